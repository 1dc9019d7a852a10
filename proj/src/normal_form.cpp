#include "cclab/normal_form.hpp"

#include <cmath>
#include "json.hpp"

#include "cclab/errors.hpp"
#include "cclab/stability.hpp"

namespace cclab {

namespace {

using cd = std::complex<double>;
constexpr double kDegenerate = 1e-12;

cd safe_inverse(cd d, const char* what) {
  if (std::abs(d) < kDegenerate) throw DegenerateError(std::string("near-singular ") + what);
  return 1.0 / d;
}

// One state variable along the centre manifold:
//   v = a z + b zbar + c z^2/2 + d z zbar + ...
struct Series {
  cd z, zb, z20, z11;
};

// Collection rules for the coefficients of z^2/2, z zbar, zbar^2/2, z^2 zbar/2.
// For c X Y:
//   F20 = 2c Xz Yz,  F11 = c (Xz Yzb + Xzb Yz),  F02 = 2c Xzb Yzb,
//   F21 = c (2 Xz Y11 + 2 X11 Yz + Xzb Y20 + X20 Yzb).
// For c X Y Z only F21 picks up a term: 2c (Xz Yz Zzb + Xz Yzb Zz + Xzb Yz Zz).
struct Collected {
  cd f20, f11, f02, f21;

  void quad(double c, const Series& x, const Series& y) {
    f20 += 2.0 * c * x.z * y.z;
    f11 += c * (x.z * y.zb + x.zb * y.z);
    f02 += 2.0 * c * x.zb * y.zb;
    f21 += c * (2.0 * x.z * y.z11 + 2.0 * x.z11 * y.z + x.zb * y.z20 + x.z20 * y.zb);
  }
  void cubic(double c, const Series& x, const Series& y, const Series& w) {
    f21 += 2.0 * c * (x.z * y.z * w.zb + x.z * y.zb * w.z + x.zb * y.z * w.z);
  }
};

struct Rows {
  Collected r1, r2;
};

Rows collect(const TaylorCoefficients& t, double kappa, const Series& x, const Series& r,
             const Series& s, const Series& y) {
  Rows out;
  Collected& a = out.r1;
  a.quad(t.xi_xx, x, x);
  a.quad(t.xi_xr, x, r);
  a.quad(t.xi_xs, x, s);
  a.quad(t.xi_rs, r, s);
  a.cubic(t.xi_xxx, x, x, x);
  a.cubic(t.xi_xxr, x, x, r);
  a.cubic(t.xi_xxs, x, x, s);
  a.cubic(t.xi_xrs, x, r, s);
  out.r2.quad(t.chi_xy, x, y);
  for (Collected* c : {&out.r1, &out.r2}) {
    c->f20 *= kappa;
    c->f11 *= kappa;
    c->f02 *= kappa;
    c->f21 *= kappa;
  }
  return out;
}

cd project(const EigenData& e, const cd& f1, const cd& f2) {
  return std::conj(e.qstar0[0]) * f1 + std::conj(e.qstar0[1]) * f2;
}

}  // namespace

TaylorCoefficients taylor_coefficients(const ProtocolSpec& spec, const RedParams& red,
                                       const NetworkParams& net, const Equilibrium& eq) {
  const double w = eq.w_star, p = eq.p_star, tau = net.rtt, rho = red.rho();
  double i[4], d[4];
  for (int n = 0; n < 4; ++n) {
    i[n] = increase_rate(spec, w, n);
    d[n] = decrease_rate(spec, w, n);
  }
  // Window drift is (i(x)(1 - P(s)) - d(x) P(s)) r / tau with P' = rho, P'' = 0;
  // each coefficient is the mixed partial divided by the product of the
  // factorials of the repeated-variable orders.
  auto h = [&](int n) { return i[n] * (1.0 - p) - d[n] * p; };
  TaylorCoefficients t;
  t.tau = tau;
  t.xi_x = h(1) * w / tau;
  t.xi_s = -rho * (i[0] + d[0]) * w / tau;
  t.xi_xx = 0.5 * h(2) * w / tau;
  t.xi_xr = h(1) / tau;
  t.xi_xs = -rho * (i[1] + d[1]) * w / tau;
  t.xi_rs = -rho * (i[0] + d[0]) / tau;
  t.xi_xxx = h(3) * w / (6.0 * tau);
  t.xi_xxr = 0.5 * h(2) / tau;
  t.xi_xxs = -0.5 * rho * (i[2] + d[2]) * w / tau;
  t.xi_xrs = -rho * (i[1] + d[1]) / tau;
  t.chi_x = (1.0 - p) / tau;
  t.chi_y = -rho * w / tau;
  t.chi_xy = -rho / tau;
  return t;
}

std::complex<double> bilinear_form(const TaylorCoefficients& t, double kappa, const cvec2& a,
                                   double wa, const cvec2& b, double wb) {
  // <psi, phi> = conj(psi(0)).phi(0)
  //   + k xi_s int_{-tau}^0 conj(psi_1(zeta + tau)) phi_2(zeta) d zeta
  const double tau = t.tau, dw = wb - wa;
  const cd integral = std::abs(dw) * tau < 1e-12
                          ? cd(tau)
                          : (1.0 - std::exp(cd(0.0, -dw * tau))) / cd(0.0, dw);
  return std::conj(a[0]) * b[0] + std::conj(a[1]) * b[1] +
         kappa * t.xi_s * std::conj(a[0]) * b[1] * std::exp(cd(0.0, -wa * tau)) * integral;
}

EigenData EigenData::rotated(double theta) const {
  EigenData e = *this;
  const cd r = std::polar(1.0, theta);
  for (int j = 0; j < 2; ++j) {
    e.q0[j] *= r;
    e.qstar0[j] *= r;
  }
  return e;
}

EigenData eigen_data(const TaylorCoefficients& t, const NetworkParams& net, double omega0) {
  const double k = net.kappa, tau = t.tau, w = omega0;
  const cd iw(0.0, w);
  EigenData e;
  e.omega0 = w;
  e.kappa = k;
  e.phi1 = k * t.chi_x * safe_inverse(iw - k * t.chi_y, "eigenvector denominator");
  e.phi2 = -k * t.chi_x * safe_inverse(k * t.xi_x + iw, "adjoint eigenvector denominator");
  e.B = safe_inverse(e.phi2 * (1.0 + k * std::conj(e.phi1) * tau * t.xi_s * std::exp(iw * tau)) +
                         std::conj(e.phi1),
                     "normalizer");
  e.q0 = {1.0, e.phi1};
  e.qstar0 = {e.B * e.phi2, e.B};

  const cd lag = std::exp(-iw * tau);
  const cd r1 = k * (t.xi_x * e.q0[0] + t.xi_s * e.q0[1] * lag) - iw * e.q0[0];
  const cd r2 = k * (t.chi_x * e.q0[0] + t.chi_y * e.q0[1]) - iw * e.q0[1];
  e.eigen_residual = std::hypot(std::abs(r1), std::abs(r2));
  // A* q*(0) = dGamma^T applied to q*(-theta): rows (xi_x, chi_x), (xi_s e^{i w tau}, chi_y).
  const cd s1 = k * (t.xi_x * e.qstar0[0] + t.chi_x * e.qstar0[1]) + iw * e.qstar0[0];
  const cd s2 = k * (t.xi_s * e.qstar0[0] * std::conj(lag) + t.chi_y * e.qstar0[1]) + iw * e.qstar0[1];
  e.adjoint_residual = std::hypot(std::abs(s1), std::abs(s2)) / std::abs(e.B);
  e.ortho_residual = std::abs(bilinear_form(t, k, e.qstar0, w, e.q0, w) - 1.0);
  const cvec2 qbar{std::conj(e.q0[0]), std::conj(e.q0[1])};
  e.conj_residual = std::abs(bilinear_form(t, k, e.qstar0, w, qbar, -w));
  return e;
}

GCoefficients g_coefficients(const TaylorCoefficients& t, const EigenData& e,
                             const NetworkParams& net) {
  (void)net;
  const double k = e.kappa, tau = t.tau, w = e.omega0;
  const cd iw(0.0, w);
  const cd lag = std::exp(-iw * tau);
  const cvec2& q = e.q0;

  // Linear parts of x = u1(0), r = u1(-tau), s = u2(-tau), y = u2(0).
  Series x{q[0], std::conj(q[0]), 0.0, 0.0};
  Series r{q[0] * lag, std::conj(q[0] * lag), 0.0, 0.0};
  Series s{q[1] * lag, std::conj(q[1] * lag), 0.0, 0.0};
  Series y{q[1], std::conj(q[1]), 0.0, 0.0};

  GCoefficients g;
  const Rows first = collect(t, k, x, r, s, y);
  g.F20 = {first.r1.f20, first.r2.f20};
  g.F11 = {first.r1.f11, first.r2.f11};
  g.F02 = {first.r1.f02, first.r2.f02};
  g.g20 = project(e, g.F20[0], g.F20[1]);
  g.g11 = project(e, g.F11[0], g.F11[1]);
  g.g02 = project(e, g.F02[0], g.F02[1]);

  // (2 i w - A) E = F20 and -A F = F11 restricted to theta = 0.
  const cd A1 = k * t.xi_x - 2.0 * iw, A2 = k * t.chi_x;
  const cd B1 = k * t.xi_s * std::exp(-2.0 * iw * tau), B2 = k * t.chi_y - 2.0 * iw;
  const cd C1 = -g.F20[0], C2 = -g.F20[1];
  const cd dE = safe_inverse(A1 * B2 - A2 * B1, "E system");
  g.E = {(C1 * B2 - C2 * B1) * dE, (C2 * A1 - C1 * A2) * dE};
  const cd K1 = k * t.xi_x, K2 = k * t.chi_x, L1 = k * t.xi_s, L2 = k * t.chi_y;
  const cd J1 = -g.F11[0], J2 = -g.F11[1];
  const cd dF = safe_inverse(K1 * L2 - K2 * L1, "F system");
  g.F = {(J1 * L2 - J2 * L1) * dF, (J2 * K1 - J1 * K2) * dF};

  auto w20 = [&](double theta, int j) {
    return -g.g20 / iw * q[j] * std::exp(iw * theta) -
           std::conj(g.g02) / (3.0 * iw) * std::conj(q[j]) * std::exp(-iw * theta) +
           g.E[j] * std::exp(2.0 * iw * theta);
  };
  auto w11 = [&](double theta, int j) {
    return g.g11 / iw * q[j] * std::exp(iw * theta) -
           std::conj(g.g11) / iw * std::conj(q[j]) * std::exp(-iw * theta) + g.F[j];
  };
  for (int j = 0; j < 2; ++j) {
    g.w20_0[j] = w20(0.0, j);
    g.w20_tau[j] = w20(-tau, j);
    g.w11_0[j] = w11(0.0, j);
    g.w11_tau[j] = w11(-tau, j);
  }
  x.z20 = g.w20_0[0];
  x.z11 = g.w11_0[0];
  r.z20 = g.w20_tau[0];
  r.z11 = g.w11_tau[0];
  s.z20 = g.w20_tau[1];
  s.z11 = g.w11_tau[1];
  y.z20 = g.w20_0[1];
  y.z11 = g.w11_0[1];

  const Rows full = collect(t, k, x, r, s, y);
  g.F21 = {full.r1.f21, full.r2.f21};
  g.g21 = project(e, g.F21[0], g.F21[1]);
  return g;
}

NormalFormResult classify_hopf(const GCoefficients& g, double omega0, double alpha_prime) {
  if (alpha_prime == 0.0 || !std::isfinite(alpha_prime))
    throw DegenerateError("transversality derivative vanishes");
  NormalFormResult r;
  r.g20 = g.g20;
  r.g11 = g.g11;
  r.g02 = g.g02;
  r.g21 = g.g21;
  const double a11 = std::norm(g.g11), a02 = std::norm(g.g02);
  r.c1 = cd(0.0, 1.0 / (2.0 * omega0)) * (g.g20 * g.g11 - 2.0 * a11 - a02 / 3.0) + g.g21 / 2.0;
  r.mu2 = -r.c1.real() / alpha_prime;
  r.beta2 = 2.0 * r.c1.real();
  r.type = r.mu2 > 0.0 ? HopfType::Supercritical : HopfType::Subcritical;
  r.orbit = r.beta2 < 0.0 ? OrbitStability::OrbitallyStable : OrbitStability::Unstable;
  return r;
}

HopfAnalysis analyze_hopf(const FluidModel& model) {
  if (model.kind != FluidSystemKind::NoAveraging)
    throw DomainError("normal form is implemented for the no-averaging system only");
  HopfAnalysis h;
  h.eq = equilibrium(model);
  const CharCoefficients c = linear_coefficients(model, h.eq);
  const PhaseInfo ph = phase_residual(model, h.eq, c);
  if (!ph.crossover) throw DomainError("no crossover frequency: no Hopf bifurcation in kappa");
  h.kappa_c = ph.kappa_c;
  h.omega0 = ph.omega * ph.kappa_c / model.net.kappa;
  NetworkParams crit = model.net;
  crit.kappa = h.kappa_c;
  h.alpha_prime = transversality(c, h.omega0, crit.rtt, crit.kappa);
  h.taylor = taylor_coefficients(model.spec, model.red, crit, h.eq);
  h.eigen = eigen_data(h.taylor, crit, h.omega0);
  h.g = g_coefficients(h.taylor, h.eigen, crit);
  h.result = classify_hopf(h.g, h.omega0, h.alpha_prime);
  return h;
}

std::string hopf_type_name(HopfType t) {
  return t == HopfType::Supercritical ? "supercritical" : "subcritical";
}

std::string orbit_name(OrbitStability o) {
  return o == OrbitStability::OrbitallyStable ? "orbitally-stable" : "unstable";
}

std::string hopf_report_json(const HopfAnalysis& h) {
  nlohmann::ordered_json j;
  j["omega0"] = h.omega0;
  j["kappa_c"] = h.kappa_c;
  j["c1_re"] = h.result.c1.real();
  j["c1_im"] = h.result.c1.imag();
  j["mu2"] = h.result.mu2;
  j["beta2"] = h.result.beta2;
  j["type"] = hopf_type_name(h.result.type);
  j["orbit"] = orbit_name(h.result.orbit);
  return j.dump(2);
}

}  // namespace cclab
