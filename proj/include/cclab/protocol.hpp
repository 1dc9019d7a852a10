#pragma once

#include <limits>
#include <optional>
#include <string>

namespace cclab {

enum class Variant { Compound, Reno, Illinois, Africa };

struct CompoundParams {
  double alpha = 0.125;
  double k = 0.75;
  double beta = 0.5;
};

struct IllinoisParams {
  double alpha_max = 10.0;
  double beta_min = 0.125;
};

// Window update functions i(w) (increase per ack) and d(w) (decrease per drop).
class ProtocolSpec {
 public:
  // k = 0 is accepted so that Reno is expressible as Compound(1, 0, 1/2).
  static ProtocolSpec compound(CompoundParams p = {});
  static ProtocolSpec reno();
  static ProtocolSpec illinois(IllinoisParams p = {});
  static ProtocolSpec africa();

  Variant variant() const { return variant_; }
  std::string name() const;

  // i(w) = a w^(k-1), d(w) = b w for Compound, Reno and Illinois.
  // Africa has no such form.
  std::optional<CompoundParams> power_law() const;

  const CompoundParams& compound_params() const { return compound_; }
  const IllinoisParams& illinois_params() const { return illinois_; }

 private:
  Variant variant_ = Variant::Compound;
  CompoundParams compound_{};
  IllinoisParams illinois_{};
};

// Derivative of the given order (0..3) of i(w).
double increase_rate(const ProtocolSpec& spec, double w, int order = 0);
// Derivative of the given order (0..3) of d(w).
double decrease_rate(const ProtocolSpec& spec, double w, int order = 0);

// Africa is only defined where its b(w) lies strictly inside (0, 2).
double africa_b(double w);
bool africa_in_domain(double w);

struct WindowDomain {
  double lo;
  double hi;
};
// Open interval of windows on which i and d are defined.
WindowDomain window_domain(const ProtocolSpec& spec);

struct RedParams {
  double gamma = 1e-4;
  double b_min = 50.0;
  double b_max = 550.0;
  double p_max = 0.1;

  void validate() const;
  double rho() const { return p_max / (b_max - b_min); }
  double eta() const { return (1.0 - p_max) / b_max; }
};

struct RedSlopes {
  double rho;
  double eta;
};

RedSlopes red_derived_slopes(const RedParams& red);

// Four-branch RED drop probability as a function of the averaged queue.
double red_drop_probability(double avg_q, const RedParams& red);

struct ThresholdParams {
  double q_th = 39.0;

  void validate() const;
};

struct NetworkParams {
  double c_per_flow = 100.0;  // packets per second per flow
  double rtt = 0.1;           // seconds
  double kappa = 1.0;
  double buffer = std::numeric_limits<double>::infinity();

  void validate() const;
};

// M/M/1-style drop probability (w / C tau)^q_th, clamped to [0, 1].
double threshold_drop_probability(double w, const NetworkParams& net,
                                  const ThresholdParams& th);
// d/dw of the unclamped form; zero once the clamp is active.
double threshold_drop_probability_slope(double w, const NetworkParams& net,
                                        const ThresholdParams& th);

}  // namespace cclab
