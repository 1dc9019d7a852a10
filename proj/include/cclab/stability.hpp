#pragma once

#include <array>
#include <complex>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cclab/fluid.hpp"

namespace cclab {

using cplx = std::complex<double>;

// Linearization about an equilibrium, characteristic equations
//   with averaging: l^3 + k a1 l^2 + k^2 a2 l + k^3 a3 + k^3 a4 e^{-l tau}
//   no averaging:   l^2 + k a1 l + k^2 a2 + k^2 a3 e^{-l tau}
//   threshold:      l + k a1 + k a2 e^{-l tau}
struct CharCoefficients {
  FluidSystemKind kind = FluidSystemKind::WithAveraging;
  std::array<double, 4> a{};  // a[0] = a1, ...
  int count = 0;

  double operator()(int i) const { return a[static_cast<std::size_t>(i - 1)]; }
};

// From i, i', d, d' at the equilibrium (valid for every protocol).
CharCoefficients raw_coefficients(const FluidModel& model, const Equilibrium& eq);
// Closed forms in alpha, k, beta; only for power-law protocols.
std::optional<CharCoefficients> simplified_coefficients(const FluidModel& model,
                                                        const Equilibrium& eq);
// Raw form, cross-checked against the simplified form when one exists.
// Throws ConsistencyError on disagreement beyond 1e-10 relative or on a
// nonpositive coefficient.
CharCoefficients linear_coefficients(const FluidModel& model, const Equilibrium& eq);

cplx char_residual(const CharCoefficients& c, cplx lambda, double tau, double kappa);
cplx char_derivative(const CharCoefficients& c, cplx lambda, double tau, double kappa);
// Partial derivative of the characteristic function with respect to kappa.
cplx char_kappa_derivative(const CharCoefficients& c, cplx lambda, double tau, double kappa);

// Roots of sum c[i] x^i via the companion matrix.
std::vector<cplx> polynomial_roots(const std::vector<double>& coeffs);

struct Crossover {
  bool exists = false;
  double omega = 0.0;          // the crossing that occurs first as kappa grows
  std::vector<double> omegas;  // every positive crossing frequency
};

// Positive real roots of the frequency polynomial (cubic in w^2 with
// averaging, quadratic in w^2 without, w^2 = a2^2 - a1^2 for threshold).
Crossover crossover_frequency(const CharCoefficients& c, double kappa);

// Closed form k Omega w*/tau for the no-averaging system.
double no_averaging_omega(const FluidModel& model, const Equilibrium& eq, double kappa);

// Angle theta in (0, 2 pi] with omega tau = theta at a crossing, from the
// real/imaginary pair evaluated at frequency omega.
double crossing_angle(const CharCoefficients& c, double omega, double kappa);

struct PhaseInfo {
  double residual = 0.0;  // kappa omega1 tau - theta; negative is stable
  bool crossover = false;
  double omega = 0.0;     // at the model's kappa
  double kappa_c = 0.0;   // kappa at which the crossing occurs
};

// Crossing phase residual for a model. Equal to -pi without a crossover.
PhaseInfo phase_residual(const FluidModel& model, const Equilibrium& eq, const CharCoefficients& c);

enum class Condition { LoopGain, Simplified, NecessarySufficient, ThresholdNecSuff, ThresholdSuff };
std::string condition_name(Condition c);

struct StabilityVerdict {
  bool stable = false;
  double margin = 0.0;  // condition LHS - RHS; negative when the condition holds
  Condition condition = Condition::LoopGain;
  bool conclusive = true;
  std::string note;
};

struct AveragingSufficient {
  StabilityVerdict loop_gain;   // Nyquist bound on |L(j w_c)|
  StabilityVerdict simplified;  // same bound evaluated at w_c tau = pi/2
  double omega_c = 0.0;
};

AveragingSufficient sufficient_stable_with_averaging(const ProtocolSpec& spec, const RedParams& red,
                                                     const NetworkParams& net,
                                                     const Equilibrium& eq);

StabilityVerdict stability_no_averaging(const ProtocolSpec& spec, const RedParams& red,
                                        const NetworkParams& net, const Equilibrium& eq,
                                        double kappa);

struct ThresholdStability {
  StabilityVerdict nec_suff;
  StabilityVerdict sufficient;
  // alpha q_th w*^(k-1) < pi/2 and its necessary-and-sufficient companion;
  // absent for protocols without a power-law form.
  std::optional<StabilityVerdict> sufficient_param;
  std::optional<StabilityVerdict> nec_suff_param;
};

ThresholdStability stability_threshold(const ProtocolSpec& spec, const NetworkParams& net,
                                       const ThresholdParams& th, const Equilibrium& eq);

// Exact d lambda / d kappa at lambda = j omega.
cplx dlambda_dkappa(const CharCoefficients& c, double omega, double tau, double kappa);
double transversality(const CharCoefficients& c, double omega, double tau, double kappa);
// Central difference of the real part of the root tracked by complex Newton
// from j omega at kappa (1 +- eps).
double transversality_numeric(const CharCoefficients& c, double omega, double tau, double kappa,
                              double eps = 1e-4);

std::optional<cplx> newton_root(const CharCoefficients& c, cplx seed, double tau, double kappa,
                                int max_iter = 100);

// Zeros of the characteristic function inside the rectangle, by winding
// number along an adaptively refined boundary.
int count_roots_in_rect(const CharCoefficients& c, double tau, double kappa, double re_lo,
                        double re_hi, double im_lo, double im_hi);
int rhp_root_count(const CharCoefficients& c, double tau, double kappa);
// Distinct roots found by Newton from a seed grid over Re in [-5/tau, 5/tau],
// Im in [0, 4 pi/tau].
std::vector<cplx> scan_roots(const CharCoefficients& c, double tau, double kappa, int grid = 24);

struct HopfPoint {
  std::string free_parameter;
  double value = 0.0;
  double omega = 0.0;
  double kappa_c = 0.0;
  double residual = 0.0;  // |char(j omega)|
  double phase_residual = 0.0;
  double transversality = 0.0;
  Equilibrium eq;
  CharCoefficients coeffs;
};

// Locates the first stable-to-unstable crossing of the phase residual when
// the free parameter moves from lo to hi.
HopfPoint solve_hopf_boundary(const FluidModel& base, const std::string& free_param, double lo,
                              double hi, int scan_points = 64);

HopfPoint hopf_point_at(const FluidModel& model, const std::string& free_param);

struct CurvePoint {
  double x = 0.0;
  std::optional<HopfPoint> point;
  std::string error;
};

struct ChartOptions {
  int scan_points = 64;
  unsigned threads = 0;
};

std::vector<CurvePoint> trace_stability_chart(const FluidModel& base, const std::string& x_param,
                                              const std::vector<double>& xs,
                                              const std::string& y_param, double y_lo, double y_hi,
                                              const ChartOptions& opts = {});

void write_chart_csv(std::ostream& out, const std::string& x_param, const std::string& y_param,
                     const std::vector<CurvePoint>& points);

}  // namespace cclab
