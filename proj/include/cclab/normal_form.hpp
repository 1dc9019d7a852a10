#pragma once

#include <array>
#include <complex>
#include <string>

#include "cclab/fluid.hpp"

namespace cclab {

// Second- and third-order Taylor coefficients of the no-averaging system
//   u1' = k (xi_x x + xi_s s + xi_xx x^2 + xi_xr x r + xi_xs x s + xi_rs r s
//            + xi_xxx x^3 + xi_xxr x^2 r + xi_xxs x^2 s + xi_xrs x r s)
//   u2' = k (chi_x x + chi_y y + chi_xy x y)
// with x = u1(t), r = u1(t - tau), s = u2(t - tau), y = u2(t).
struct TaylorCoefficients {
  double xi_x = 0, xi_s = 0, xi_xx = 0, xi_xr = 0, xi_xs = 0, xi_rs = 0;
  double xi_xxx = 0, xi_xxr = 0, xi_xxs = 0, xi_xrs = 0;
  double chi_x = 0, chi_y = 0, chi_xy = 0;
  double tau = 0;
};

// Valid for any protocol with three derivatives of i and d; the d'' and d'''
// terms vanish for the power-law family.
TaylorCoefficients taylor_coefficients(const ProtocolSpec& spec, const RedParams& red,
                                       const NetworkParams& net, const Equilibrium& eq);

using cvec2 = std::array<std::complex<double>, 2>;

// q(theta) = q0 e^{i w theta} and q*(s) = qstar0 e^{i w s}; by default
// q0 = (1, phi1), qstar0 = B (phi2, 1).
struct EigenData {
  double omega0 = 0;
  double kappa = 0;
  std::complex<double> phi1, phi2, B;
  cvec2 q0{}, qstar0{};
  double eigen_residual = 0;     // |A q - i w q| at theta = 0
  double adjoint_residual = 0;   // |A* q* + i w q*| at s = 0
  double ortho_residual = 0;     // |<q*, q> - 1|
  double conj_residual = 0;      // |<q*, conj q>|

  // Same eigenpair with q and q* both rotated by e^{i theta}.
  EigenData rotated(double theta) const;
};

// Bilinear form <psi, phi> for psi = a e^{i wa s}, phi = b e^{i wb theta}.
std::complex<double> bilinear_form(const TaylorCoefficients& t, double kappa, const cvec2& a,
                                   double wa, const cvec2& b, double wb);

// kappa is taken from net.kappa (the critical value).
EigenData eigen_data(const TaylorCoefficients& t, const NetworkParams& net, double omega0);

struct GCoefficients {
  std::complex<double> g20, g11, g02, g21;
  // Nonlinearity coefficients of z^2/2, z zbar, zbar^2/2, z^2 zbar/2 per row.
  cvec2 F20{}, F11{}, F02{}, F21{};
  cvec2 E{}, F{};
  cvec2 w20_0{}, w20_tau{}, w11_0{}, w11_tau{};  // at theta = 0 and -tau
};

GCoefficients g_coefficients(const TaylorCoefficients& t, const EigenData& e, const NetworkParams& net);

enum class HopfType { Supercritical, Subcritical };
enum class OrbitStability { OrbitallyStable, Unstable };

struct NormalFormResult {
  std::complex<double> g20, g11, g02, g21;
  std::complex<double> c1;
  double mu2 = 0;
  double beta2 = 0;
  HopfType type = HopfType::Supercritical;
  OrbitStability orbit = OrbitStability::OrbitallyStable;
};

NormalFormResult classify_hopf(const GCoefficients& g, double omega0, double alpha_prime);

struct HopfAnalysis {
  double omega0 = 0;
  double kappa_c = 0;
  double alpha_prime = 0;
  Equilibrium eq;
  TaylorCoefficients taylor;
  EigenData eigen;
  GCoefficients g;
  NormalFormResult result;
};

// Whole chain for a no-averaging model: equilibrium, crossover, kappa_c, and
// the classification evaluated at kappa = kappa_c.
HopfAnalysis analyze_hopf(const FluidModel& model);

std::string hopf_type_name(HopfType t);
std::string orbit_name(OrbitStability o);
// {omega0, kappa_c, c1_re, c1_im, mu2, beta2, type, orbit}
std::string hopf_report_json(const HopfAnalysis& h);

}  // namespace cclab
