#include "cclab/stability.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>

#include "cclab/errors.hpp"
#include "cclab/numeric.hpp"
#include "cclab/parallel.hpp"

namespace cclab {

namespace {

constexpr double kPi = std::numbers::pi;

struct Local {
  double w, p, tau, c, i, i1, d, d1;
  double m() const { return i1 * (1.0 - p) - d1 * p; }
};

Local local_terms(const FluidModel& model, const Equilibrium& eq) {
  const double w = eq.w_star;
  return {w,
          eq.p_star,
          model.net.rtt,
          model.net.c_per_flow,
          increase_rate(model.spec, w, 0),
          increase_rate(model.spec, w, 1),
          decrease_rate(model.spec, w, 0),
          decrease_rate(model.spec, w, 1)};
}

double wrap_positive(double theta) { return theta <= 0.0 ? theta + 2.0 * kPi : theta; }

StabilityVerdict verdict(double margin, Condition cond) {
  StabilityVerdict v;
  v.margin = margin;
  v.stable = margin < 0.0;
  v.condition = cond;
  return v;
}

// Positive real roots of x^3 + b2 x^2 + b1 x + b0, each bisected on an
// interval where the cubic is monotone.
std::vector<double> positive_cubic_roots(double b2, double b1, double b0) {
  auto f = [&](double x) { return ((x + b2) * x + b1) * x + b0; };
  std::vector<double> cuts{0.0};
  const double disc = b2 * b2 - 3.0 * b1;
  if (disc > 0.0) {
    const double s = std::sqrt(disc);
    for (double x : {(-b2 - s) / 3.0, (-b2 + s) / 3.0})
      if (x > 0.0) cuts.push_back(x);
  }
  cuts.push_back(1.0 + std::max({std::abs(b2), std::abs(b1), std::abs(b0)}));
  std::vector<double> roots;
  for (std::size_t j = 0; j + 1 < cuts.size(); ++j) {
    const double lo = cuts[j], hi = cuts[j + 1];
    const double flo = f(lo), fhi = f(hi);
    if (flo == 0.0 && lo > 0.0) {
      roots.push_back(lo);
      continue;
    }
    if ((flo < 0.0) != (fhi < 0.0) && fhi != 0.0) roots.push_back(bisect(f, lo, flo, hi, fhi).x);
  }
  return roots;
}

// Positive real roots of x^2 + b x + c, computed without cancellation.
std::vector<double> positive_quadratic_roots(double b, double c) {
  const double disc = b * b - 4.0 * c;
  if (disc < 0.0) return {};
  const double s = std::sqrt(disc);
  const double q = -0.5 * (b + std::copysign(s, b));
  std::vector<double> out;
  for (double x : {q, q != 0.0 ? c / q : 0.0})
    if (x > 0.0) out.push_back(x);
  std::sort(out.begin(), out.end());
  return out;
}

// Argument change of f along [z0, z1], refined until each piece turns less
// than about a third of a radian.
double winding_segment(const CharCoefficients& c, double tau, double kappa, cplx z0, cplx f0,
                       cplx z1, cplx f1, int depth) {
  const cplx zm = 0.5 * (z0 + z1);
  const cplx fm = char_residual(c, zm, tau, kappa);
  const double d1 = std::arg(fm / f0);
  const double d2 = std::arg(f1 / fm);
  if (depth >= 48 || (std::abs(d1) + std::abs(d2) < 0.35 &&
                      std::abs(d1 + d2 - std::arg(f1 / f0)) < 1e-9))
    return d1 + d2;
  return winding_segment(c, tau, kappa, z0, f0, zm, fm, depth + 1) +
         winding_segment(c, tau, kappa, zm, fm, z1, f1, depth + 1);
}

}  // namespace

CharCoefficients raw_coefficients(const FluidModel& model, const Equilibrium& eq) {
  const Local l = local_terms(model, eq);
  const double wt = l.w / l.tau;
  CharCoefficients c;
  c.kind = model.kind;
  switch (model.kind) {
    case FluidSystemKind::WithAveraging: {
      const double rho = model.red.rho();
      const double gc = model.red.gamma * l.c;
      c.a = {gc - l.m() * wt, gc * (rho - l.m()) * wt, -rho * gc * l.m() * wt * wt,
             rho * gc * (l.i + l.d) * (1.0 - l.p) * l.w / (l.tau * l.tau)};
      c.count = 4;
      break;
    }
    case FluidSystemKind::NoAveraging: {
      const double rho = model.red.rho();
      c.a = {(rho - l.m()) * wt, -rho * l.m() * wt * wt,
             rho * (l.i + l.d) * (1.0 - l.p) * l.w / (l.tau * l.tau), 0.0};
      c.count = 3;
      break;
    }
    case FluidSystemKind::Threshold: {
      const double slope = threshold_drop_probability_slope(l.w, model.net, model.threshold);
      c.a = {-l.m() * wt, slope * (l.i + l.d) * wt, 0.0, 0.0};
      c.count = 2;
      break;
    }
  }
  return c;
}

std::optional<CharCoefficients> simplified_coefficients(const FluidModel& model,
                                                        const Equilibrium& eq) {
  const auto pl = model.spec.power_law();
  if (!pl) return std::nullopt;
  const double w = eq.w_star, p = eq.p_star, tau = model.net.rtt, cc = model.net.c_per_flow;
  const double k = pl->k, beta = pl->beta;
  const double i = pl->alpha * std::pow(w, k - 1.0);
  CharCoefficients c;
  c.kind = model.kind;
  switch (model.kind) {
    case FluidSystemKind::WithAveraging: {
      const double rho = model.red.rho(), g = model.red.gamma;
      c.a = {g * cc + (2.0 - k) * i * (1.0 - p) / tau,
             g * cc * (rho * w + (2.0 - k) * i * (1.0 - p)) / tau,
             rho * g * cc * cc * (2.0 - k) * i / tau, rho * g * cc * cc * i / (p * tau)};
      c.count = 4;
      break;
    }
    case FluidSystemKind::NoAveraging: {
      const double rho = model.red.rho();
      const double wt = w / tau;
      c.a = {wt * (rho + (2.0 - k) * beta * p), rho * (2.0 - k) * beta * p * wt * wt,
             rho * beta * wt * wt, 0.0};
      c.count = 3;
      break;
    }
    case FluidSystemKind::Threshold:
      c.a = {(2.0 - k) * i * (1.0 - p) / tau, model.threshold.q_th * i / tau, 0.0, 0.0};
      c.count = 2;
      break;
  }
  return c;
}

CharCoefficients linear_coefficients(const FluidModel& model, const Equilibrium& eq) {
  const CharCoefficients raw = raw_coefficients(model, eq);
  if (const auto simp = simplified_coefficients(model, eq)) {
    for (int j = 0; j < raw.count; ++j)
      if (relative_difference(raw.a[j], simp->a[j]) > 1e-10)
        throw ConsistencyError("raw and simplified coefficient a" + std::to_string(j + 1) +
                               " disagree");
  }
  for (int j = 0; j < raw.count; ++j)
    if (!(raw.a[j] > 0.0))
      throw ConsistencyError("coefficient a" + std::to_string(j + 1) + " is not positive");
  return raw;
}

cplx char_residual(const CharCoefficients& c, cplx l, double tau, double k) {
  const cplx e = std::exp(-l * tau);
  switch (c.kind) {
    case FluidSystemKind::WithAveraging:
      return ((l + k * c(1)) * l + k * k * c(2)) * l + k * k * k * (c(3) + c(4) * e);
    case FluidSystemKind::NoAveraging:
      return (l + k * c(1)) * l + k * k * (c(2) + c(3) * e);
    case FluidSystemKind::Threshold:
      return l + k * (c(1) + c(2) * e);
  }
  return {};
}

cplx char_derivative(const CharCoefficients& c, cplx l, double tau, double k) {
  const cplx e = std::exp(-l * tau);
  switch (c.kind) {
    case FluidSystemKind::WithAveraging:
      return (3.0 * l + 2.0 * k * c(1)) * l + k * k * c(2) - tau * k * k * k * c(4) * e;
    case FluidSystemKind::NoAveraging:
      return 2.0 * l + k * c(1) - tau * k * k * c(3) * e;
    case FluidSystemKind::Threshold:
      return 1.0 - tau * k * c(2) * e;
  }
  return {};
}

cplx char_kappa_derivative(const CharCoefficients& c, cplx l, double tau, double k) {
  const cplx e = std::exp(-l * tau);
  switch (c.kind) {
    case FluidSystemKind::WithAveraging:
      return c(1) * l * l + 2.0 * k * c(2) * l + 3.0 * k * k * (c(3) + c(4) * e);
    case FluidSystemKind::NoAveraging:
      return c(1) * l + 2.0 * k * (c(2) + c(3) * e);
    case FluidSystemKind::Threshold:
      return c(1) + c(2) * e;
  }
  return {};
}

std::vector<cplx> polynomial_roots(const std::vector<double>& coeffs) {
  std::size_t n = coeffs.size();
  while (n > 0 && coeffs[n - 1] == 0.0) --n;
  if (n < 2) return {};
  const std::size_t deg = n - 1;
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(deg, deg);
  for (std::size_t j = 0; j < deg; ++j) comp(0, j) = -coeffs[deg - 1 - j] / coeffs[deg];
  for (std::size_t j = 1; j < deg; ++j) comp(j, j - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
  std::vector<cplx> out;
  for (Eigen::Index j = 0; j < es.eigenvalues().size(); ++j) out.push_back(es.eigenvalues()(j));
  return out;
}

double crossing_angle(const CharCoefficients& c, double w, double k) {
  switch (c.kind) {
    case FluidSystemKind::WithAveraging:
      return wrap_positive(std::atan2(k * k * c(2) * w - w * w * w, k * c(1) * w * w - k * k * k * c(3)));
    case FluidSystemKind::NoAveraging:
      return wrap_positive(std::atan2(k * c(1) * w, w * w - k * k * c(2)));
    case FluidSystemKind::Threshold:
      return wrap_positive(std::atan2(w, -k * c(1)));
  }
  return 0.0;
}

Crossover crossover_frequency(const CharCoefficients& c, double k) {
  Crossover out;
  std::vector<double> xs;
  switch (c.kind) {
    case FluidSystemKind::WithAveraging: {
      const double k2 = k * k;
      xs = positive_cubic_roots(k2 * (c(1) * c(1) - 2.0 * c(2)),
                                k2 * k2 * (c(2) * c(2) - 2.0 * c(1) * c(3)),
                                k2 * k2 * k2 * (c(3) * c(3) - c(4) * c(4)));
      break;
    }
    case FluidSystemKind::NoAveraging: {
      const double k2 = k * k;
      xs = positive_quadratic_roots(k2 * (c(1) * c(1) - 2.0 * c(2)),
                                    k2 * k2 * (c(2) * c(2) - c(3) * c(3)));
      break;
    }
    case FluidSystemKind::Threshold: {
      const double x = k * k * (c(2) * c(2) - c(1) * c(1));
      if (x > 0.0) xs.push_back(x);
      break;
    }
  }
  if (xs.empty()) return out;
  for (double x : xs) out.omegas.push_back(std::sqrt(x));
  // The first crossing as kappa grows has the smallest theta / omega.
  double best = std::numeric_limits<double>::infinity();
  for (double w : out.omegas) {
    const double ratio = crossing_angle(c, w, k) / w;
    if (ratio < best) {
      best = ratio;
      out.omega = w;
    }
  }
  out.exists = true;
  return out;
}

double no_averaging_omega(const FluidModel& model, const Equilibrium& eq, double kappa) {
  const auto pl = model.spec.power_law();
  if (!pl) throw DomainError("closed-form crossover needs a power-law protocol");
  const double rho = model.red.rho();
  const double beta = pl->beta;
  const double m = (2.0 - pl->k) * beta * eq.p_star;
  const double sum = rho * rho + m * m;
  const double disc = (rho * rho - m * m) * (rho * rho - m * m) + 4.0 * rho * rho * beta * beta;
  // Omega^2 = (sqrt(disc) - sum)/2, rewritten as 2 rho^2 (beta^2 - m^2)/(sqrt(disc) + sum).
  const double omega2 = 2.0 * rho * rho * (beta * beta - m * m) / (std::sqrt(disc) + sum);
  if (!(omega2 > 0.0)) throw DomainError("no crossover frequency");
  const double w0 = kappa * std::sqrt(omega2) * eq.w_star / model.net.rtt;

  // Direct root of the quartic in omega as an independent check.
  const CharCoefficients c = raw_coefficients(model, eq);
  const double k2 = kappa * kappa;
  const auto roots = polynomial_roots(
      {k2 * k2 * (c(2) * c(2) - c(3) * c(3)), 0.0, k2 * (c(1) * c(1) - 2.0 * c(2)), 0.0, 1.0});
  double best = std::numeric_limits<double>::infinity();
  for (const cplx& r : roots)
    if (r.real() > 0.0 && std::abs(r.imag()) <= 1e-9 * std::abs(r))
      best = std::min(best, relative_difference(r.real(), w0));
  if (!(best <= 1e-9)) throw ConsistencyError("closed-form crossover disagrees with the quartic root");
  return w0;
}

PhaseInfo phase_residual(const FluidModel& model, const Equilibrium&, const CharCoefficients& c) {
  PhaseInfo out;
  const double k = model.net.kappa, tau = model.net.rtt;
  const Crossover cr = crossover_frequency(c, k);
  if (!cr.exists) {
    out.residual = -kPi;
    return out;
  }
  double theta = crossing_angle(c, cr.omega, k);
  // Once the delay-free cubic loses Hurwitz stability the angle has passed
  // through zero; keep it on the negative branch so the residual stays continuous.
  const bool delay_free_unstable =
      c.kind == FluidSystemKind::WithAveraging && c(1) * c(2) <= c(3) + c(4);
  if (delay_free_unstable && theta > kPi) theta -= 2.0 * kPi;
  out.crossover = true;
  out.omega = cr.omega;
  out.residual = cr.omega * tau - theta;
  out.kappa_c = std::max(0.0, k * theta / (cr.omega * tau));
  return out;
}

std::string condition_name(Condition c) {
  switch (c) {
    case Condition::LoopGain: return "loop-gain-sufficient";
    case Condition::Simplified: return "simplified-sufficient";
    case Condition::NecessarySufficient: return "necessary-and-sufficient";
    case Condition::ThresholdNecSuff: return "threshold-necessary-and-sufficient";
    case Condition::ThresholdSuff: return "threshold-sufficient";
  }
  return "unknown";
}

AveragingSufficient sufficient_stable_with_averaging(const ProtocolSpec& spec, const RedParams& red,
                                                     const NetworkParams& net,
                                                     const Equilibrium& eq) {
  FluidModel model{FluidSystemKind::WithAveraging, spec, red, {}, net};
  const CharCoefficients c = linear_coefficients(model, eq);
  const double k = net.kappa, tau = net.rtt;
  const double A1 = k * c(1), A2 = k * k * c(2), A3 = k * k * k * c(3), A4 = k * k * k * c(4);
  auto P = [&](double w) { return cplx(A3 - A1 * w * w, w * (A2 - w * w)); };

  AveragingSufficient out;
  out.loop_gain.condition = Condition::LoopGain;
  const auto roots = polynomial_roots({A3, A2, A1, 1.0});
  const bool open_loop_stable =
      std::all_of(roots.begin(), roots.end(), [](const cplx& r) { return r.real() < 0.0; });
  if (!open_loop_stable) {
    out.loop_gain.conclusive = false;
    out.loop_gain.note = "delay-free polynomial is not Hurwitz";
  } else {
    // Unwrapped phase of P(j w) as a sum of root phases; strictly increasing.
    auto phase = [&](double w) {
      double s = 0.0;
      for (const cplx& r : roots) s += std::atan2(w - r.imag(), -r.real());
      return w * tau + s - kPi;
    };
    const double hi = kPi / tau;
    const double fhi = phase(hi);
    if (!(fhi > 0.0)) {
      out.loop_gain.conclusive = false;
      out.loop_gain.note = "phase crossover not bracketed in (0, pi/tau)";
    } else {
      out.omega_c = bisect(phase, 0.0, -kPi, hi, fhi).x;
      const double lhs = A4 / std::abs(P(out.omega_c));
      out.loop_gain = verdict(lhs - 1.0, Condition::LoopGain);
    }
  }

  out.simplified.condition = Condition::Simplified;
  if (const auto pl = spec.power_law(); pl && k == 1.0) {
    const double w = eq.w_star, p = eq.p_star, rho = red.rho(), g = red.gamma;
    const double num = rho * g * pl->alpha * std::pow(w, pl->k) * tau / p;
    const double den = g * (rho * w * w + (2.0 - pl->k) * pl->beta * w * w * p) -
                       kPi * kPi / (4.0 * (1.0 - p));
    // Evaluated as written; a negative denominator makes the left side negative.
    if (den != 0.0) {
      out.simplified = verdict(num / den - kPi / 2.0, Condition::Simplified);
      if (den < 0.0) out.simplified.note = "denominator negative at w tau = pi/2";
    } else {
      out.simplified.conclusive = false;
      out.simplified.note = "denominator zero at w tau = pi/2";
    }
  } else {
    out.simplified.conclusive = false;
    out.simplified.note = "needs a power-law protocol at kappa = 1";
  }
  return out;
}

StabilityVerdict stability_no_averaging(const ProtocolSpec& spec, const RedParams& red,
                                        const NetworkParams& net, const Equilibrium& eq,
                                        double kappa) {
  FluidModel model{FluidSystemKind::NoAveraging, spec, red, {}, net};
  model.net.kappa = kappa;
  const CharCoefficients c = linear_coefficients(model, eq);
  const PhaseInfo ph = phase_residual(model, eq, c);
  StabilityVerdict v = verdict(ph.residual, Condition::NecessarySufficient);
  if (!ph.crossover) v.note = "no crossover frequency: stable for every delay";
  return v;
}

ThresholdStability stability_threshold(const ProtocolSpec& spec, const NetworkParams& net,
                                       const ThresholdParams& th, const Equilibrium& eq) {
  FluidModel model{FluidSystemKind::Threshold, spec, {}, th, net};
  const CharCoefficients c = linear_coefficients(model, eq);
  const double k = net.kappa, tau = net.rtt, a1 = c(1), a2 = c(2);
  ThresholdStability out;
  if (a2 > a1) {
    out.nec_suff = verdict(k * tau * std::sqrt(a2 * a2 - a1 * a1) - std::acos(-a1 / a2),
                           Condition::ThresholdNecSuff);
  } else {
    out.nec_suff = verdict(-kPi, Condition::ThresholdNecSuff);
    out.nec_suff.note = "a2 <= a1: stable for every delay";
  }
  out.sufficient = verdict(k * a2 * tau - kPi / 2.0, Condition::ThresholdSuff);

  if (const auto pl = spec.power_law()) {
    const double wk = pl->alpha * std::pow(eq.w_star, pl->k - 1.0);
    const double q = th.q_th, s = (pl->k - 2.0) * (1.0 - eq.p_star);
    out.sufficient_param = verdict(k * q * wk - kPi / 2.0, Condition::ThresholdSuff);
    if (q * q > s * s) {
      out.nec_suff_param = verdict(k * wk * std::sqrt(q * q - s * s) - std::acos(s / q),
                                   Condition::ThresholdNecSuff);
    } else {
      out.nec_suff_param = verdict(-kPi, Condition::ThresholdNecSuff);
    }
  }
  if (out.sufficient.stable && !out.nec_suff.stable)
    throw ConsistencyError("sufficient condition holds where the exact condition fails");
  return out;
}

cplx dlambda_dkappa(const CharCoefficients& c, double omega, double tau, double kappa) {
  const cplx l(0.0, omega);
  const cplx d = char_derivative(c, l, tau, kappa);
  if (std::abs(d) < 1e-300) throw DegenerateError("characteristic root is not simple");
  return -char_kappa_derivative(c, l, tau, kappa) / d;
}

double transversality(const CharCoefficients& c, double omega, double tau, double kappa) {
  return dlambda_dkappa(c, omega, tau, kappa).real();
}

std::optional<cplx> newton_root(const CharCoefficients& c, cplx z, double tau, double kappa,
                                int max_iter) {
  for (int it = 0; it < max_iter; ++it) {
    const cplx f = char_residual(c, z, tau, kappa);
    const cplx df = char_derivative(c, z, tau, kappa);
    if (df == cplx(0.0)) return std::nullopt;
    const cplx step = f / df;
    z -= step;
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return std::nullopt;
    if (std::abs(step) <= 1e-14 * std::max(1.0, std::abs(z))) return z;
  }
  return std::nullopt;
}

double transversality_numeric(const CharCoefficients& c, double omega, double tau, double kappa,
                              double eps) {
  auto track = [&](double k) {
    const auto r = newton_root(c, cplx(0.0, omega * k / kappa), tau, k);
    if (!r) throw ConvergenceError("root tracking failed");
    return r->real();
  };
  return (track(kappa * (1.0 + eps)) - track(kappa * (1.0 - eps))) / (2.0 * eps * kappa);
}

int count_roots_in_rect(const CharCoefficients& c, double tau, double kappa, double re_lo,
                        double re_hi, double im_lo, double im_hi) {
  const cplx corners[4] = {{re_lo, im_lo}, {re_hi, im_lo}, {re_hi, im_hi}, {re_lo, im_hi}};
  constexpr int kPieces = 64;
  double total = 0.0;
  for (int e = 0; e < 4; ++e) {
    const cplx a = corners[e], b = corners[(e + 1) % 4];
    cplx z0 = a;
    cplx f0 = char_residual(c, z0, tau, kappa);
    for (int j = 1; j <= kPieces; ++j) {
      const cplx z1 = a + (b - a) * (static_cast<double>(j) / kPieces);
      const cplx f1 = char_residual(c, z1, tau, kappa);
      if (f0 == cplx(0.0) || f1 == cplx(0.0)) throw ConvergenceError("root on the contour");
      total += winding_segment(c, tau, kappa, z0, f0, z1, f1, 0);
      z0 = z1;
      f0 = f1;
    }
  }
  const double turns = total / (2.0 * kPi);
  const double n = std::round(turns);
  if (std::abs(turns - n) > 0.05) throw ConvergenceError("winding number did not converge");
  return static_cast<int>(n);
}

int rhp_root_count(const CharCoefficients& c, double tau, double kappa) {
  // On Re(l) >= 0, |e^{-l tau}| <= 1, so every root obeys |l| <= max(1, sum of
  // the kappa-scaled coefficient magnitudes).
  double s = 0.0;
  switch (c.kind) {
    case FluidSystemKind::WithAveraging:
      s = kappa * c(1) + kappa * kappa * c(2) + kappa * kappa * kappa * (c(3) + c(4));
      break;
    case FluidSystemKind::NoAveraging:
      s = kappa * c(1) + kappa * kappa * (c(2) + c(3));
      break;
    case FluidSystemKind::Threshold:
      s = kappa * (c(1) + c(2));
      break;
  }
  const double r = 1.5 * std::max(1.0, s);
  return count_roots_in_rect(c, tau, kappa, 0.0, r, -r, r);
}

std::vector<cplx> scan_roots(const CharCoefficients& c, double tau, double kappa, int grid) {
  std::vector<cplx> found;
  for (int a = 0; a < grid; ++a) {
    for (int b = 0; b < grid; ++b) {
      const cplx seed(-5.0 / tau + 10.0 / tau * (a + 0.5) / grid, 4.0 * kPi / tau * (b + 0.5) / grid);
      const auto r = newton_root(c, seed, tau, kappa);
      if (!r || r->imag() < -1e-9) continue;
      const cplx z(r->real(), std::abs(r->imag()));
      const bool dup = std::any_of(found.begin(), found.end(), [&](const cplx& x) {
        return std::abs(x - z) <= 1e-8 * std::max(1.0, std::abs(z));
      });
      if (!dup) found.push_back(z);
    }
  }
  std::sort(found.begin(), found.end(), [](const cplx& x, const cplx& y) { return x.real() > y.real(); });
  return found;
}

HopfPoint hopf_point_at(const FluidModel& model, const std::string& free_param) {
  HopfPoint h;
  h.free_parameter = free_param;
  h.value = get_parameter(model, free_param);
  h.eq = equilibrium(model);
  h.coeffs = linear_coefficients(model, h.eq);
  const PhaseInfo ph = phase_residual(model, h.eq, h.coeffs);
  if (!ph.crossover) throw DomainError("no crossover frequency at this point");
  h.omega = ph.omega;
  h.kappa_c = ph.kappa_c;
  h.phase_residual = ph.residual;
  h.residual = std::abs(char_residual(h.coeffs, cplx(0.0, h.omega), model.net.rtt, model.net.kappa));
  h.transversality = transversality(h.coeffs, h.omega, model.net.rtt, model.net.kappa);
  return h;
}

HopfPoint solve_hopf_boundary(const FluidModel& base, const std::string& free_param, double lo,
                              double hi, int scan_points) {
  if (!is_parameter_name(free_param)) throw ConfigError("unknown parameter '" + free_param + "'");
  auto model_at = [&](double v) {
    FluidModel m = base;
    set_parameter(m, free_param, v);
    return m;
  };
  auto phi = [&](double v) {
    try {
      const FluidModel m = model_at(v);
      const Equilibrium eq = equilibrium(m);
      return phase_residual(m, eq, raw_coefficients(m, eq)).residual;
    } catch (const std::exception&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };
  scan_points = std::max(scan_points, 2);
  double v0 = lo, f0 = phi(lo);
  for (int j = 1; j <= scan_points; ++j) {
    const double v1 = lo + (hi - lo) * j / scan_points;
    const double f1 = phi(v1);
    if (std::isfinite(f0) && std::isfinite(f1) && (f0 < 0.0) != (f1 < 0.0)) {
      const BisectResult r = bisect(phi, v0, f0, v1, f1);
      // A wrap of the crossing angle also changes sign; only true zeros count.
      if (std::abs(r.fx) < 1e-10) return hopf_point_at(model_at(r.x), free_param);
    }
    v0 = v1;
    f0 = f1;
  }
  throw BracketError("no stability change for '" + free_param + "' in the bracket");
}

std::vector<CurvePoint> trace_stability_chart(const FluidModel& base, const std::string& x_param,
                                              const std::vector<double>& xs,
                                              const std::string& y_param, double y_lo, double y_hi,
                                              const ChartOptions& opts) {
  std::vector<CurvePoint> out(xs.size());
  parallel_for_index(xs.size(), opts.threads, [&](std::size_t i) {
    out[i].x = xs[i];
    try {
      FluidModel m = base;
      set_parameter(m, x_param, xs[i]);
      out[i].point = solve_hopf_boundary(m, y_param, y_lo, y_hi, opts.scan_points);
    } catch (const std::exception& e) {
      out[i].error = e.what();
    }
  });
  return out;
}

void write_chart_csv(std::ostream& out, const std::string& x_param, const std::string& y_param,
                     const std::vector<CurvePoint>& points) {
  out << "x_param,x_value,y_param,y_critical,omega,residual,transversality\n";
  char buf[256];
  for (const CurvePoint& cp : points) {
    if (cp.point) {
      std::snprintf(buf, sizeof buf, "%s,%.12g,%s,%.12g,%.12g,%.6g,%.12g\n", x_param.c_str(), cp.x,
                    y_param.c_str(), cp.point->value, cp.point->omega, cp.point->residual,
                    cp.point->transversality);
    } else {
      std::snprintf(buf, sizeof buf, "%s,%.12g,%s,nan,nan,nan,nan\n", x_param.c_str(), cp.x,
                    y_param.c_str());
    }
    out << buf;
  }
}

}  // namespace cclab
