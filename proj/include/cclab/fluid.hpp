#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cclab/protocol.hpp"

namespace cclab {

enum class FluidSystemKind { WithAveraging, NoAveraging, Threshold };

int state_dimension(FluidSystemKind kind);
std::string kind_name(FluidSystemKind kind);
FluidSystemKind parse_kind(const std::string& name);

// (w, q, p); unused trailing components stay zero.
using State = std::array<double, 3>;

struct FluidModel {
  FluidSystemKind kind = FluidSystemKind::WithAveraging;
  ProtocolSpec spec = ProtocolSpec::compound();
  RedParams red{};
  ThresholdParams threshold{};
  NetworkParams net{};

  void validate() const;
};

// Named scalar parameters: tau, c, kappa, gamma, bmin, bmax, pmax, alpha, k,
// beta, qth. Unknown names throw ConfigError.
double get_parameter(const FluidModel& model, const std::string& name);
void set_parameter(FluidModel& model, const std::string& name, double value);
bool is_parameter_name(const std::string& name);

struct Equilibrium {
  double w_star = 0.0;
  std::optional<double> q_star;
  double p_star = 0.0;
  double residual = 0.0;
  // RED: q* within (b_min, b_max). Always true for Threshold.
  bool in_band = true;
  std::string warning;
  // Threshold only: w* from the approximate closed form that sets 1 - p* = 1.
  std::optional<double> closed_form_w;
};

Equilibrium equilibrium_with_averaging(const ProtocolSpec& spec, const RedParams& red,
                                       const NetworkParams& net);
Equilibrium equilibrium_no_averaging(const ProtocolSpec& spec, const RedParams& red,
                                     const NetworkParams& net);
Equilibrium equilibrium_threshold(const ProtocolSpec& spec, const NetworkParams& net,
                                  const ThresholdParams& th);
Equilibrium equilibrium(const FluidModel& model);

State equilibrium_state(const FluidModel& model, const Equilibrium& eq);

// Right-hand side including the kappa factor and the one-sided queue rule at
// q = 0 (and q = B when the buffer is finite).
State rhs(const FluidModel& model, const State& now, const State& delayed);

struct Trajectory {
  FluidSystemKind kind = FluidSystemKind::WithAveraging;
  int dimension = 1;
  double step = 0.0;
  double delay = 0.0;
  std::vector<double> t;
  std::vector<State> x;

  std::vector<double> component(int i) const;
  void write_csv(std::ostream& out) const;
};

using HistoryFn = std::function<State(double)>;
using DdeRhs = std::function<State(const State& now, const State& delayed)>;

struct IntegrateOptions {
  int steps_per_delay = 500;
  int record_every = 1;
  // Defaults to constant 1.1x equilibrium.
  HistoryFn history;
};

// RK4 by the method of steps with cubic Hermite interpolation of the delayed
// state. step = delay / steps_per_delay, steps_per_delay >= 200.
Trajectory integrate_dde(const FluidModel& model, double horizon, const IntegrateOptions& opts = {});

// Same scheme for an arbitrary single-delay system. lower/upper bound each
// state component after every step.
Trajectory integrate_dde_generic(const DdeRhs& f, int dimension, double delay,
                                 const HistoryFn& history, double horizon, int steps_per_delay,
                                 int record_every, const State& lower, const State& upper);

struct OscillationMetrics {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double amplitude = 0.0;  // peak to peak
  std::optional<double> period;
};

OscillationMetrics oscillation_metrics(const Trajectory& traj, double transient_cut,
                                       int component = 0);
// Raw-sample form; requires the samples to span transient_cut + min_window.
OscillationMetrics oscillation_metrics(const std::vector<double>& t, const std::vector<double>& x,
                                       double transient_cut, double min_window);

struct BifurcationPoint {
  double value = 0.0;
  Equilibrium eq;
  OscillationMetrics metrics;
};

struct BifurcationOptions {
  double horizon_delays = 600.0;
  double transient_delays = 400.0;
  int steps_per_delay = 200;
  unsigned threads = 0;  // 0: hardware concurrency
};

// Sweeps one parameter and records post-transient window oscillation metrics.
std::vector<BifurcationPoint> bifurcation_diagram(const FluidModel& base, const std::string& param,
                                                  const std::vector<double>& values,
                                                  const BifurcationOptions& opts = {});

}  // namespace cclab
