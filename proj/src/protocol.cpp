#include "cclab/protocol.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "cclab/errors.hpp"

namespace cclab {

namespace {

// Truncated Taylor series c[0] + c[1] h + c[2] h^2 + c[3] h^3 about a point.
struct Jet {
  std::array<double, 4> c{};

  static Jet variable(double x0) { return Jet{{x0, 1.0, 0.0, 0.0}}; }
  static Jet constant(double v) { return Jet{{v, 0.0, 0.0, 0.0}}; }

  double derivative(int n) const {
    static constexpr double fact[4] = {1.0, 1.0, 2.0, 6.0};
    return c[n] * fact[n];
  }
};

Jet operator+(const Jet& a, const Jet& b) {
  Jet r;
  for (int i = 0; i < 4; ++i) r.c[i] = a.c[i] + b.c[i];
  return r;
}

Jet operator-(const Jet& a, const Jet& b) {
  Jet r;
  for (int i = 0; i < 4; ++i) r.c[i] = a.c[i] - b.c[i];
  return r;
}

Jet operator*(double s, const Jet& a) {
  Jet r;
  for (int i = 0; i < 4; ++i) r.c[i] = s * a.c[i];
  return r;
}

Jet operator*(const Jet& a, const Jet& b) {
  Jet r;
  for (int n = 0; n < 4; ++n)
    for (int i = 0; i <= n; ++i) r.c[n] += a.c[i] * b.c[n - i];
  return r;
}

Jet operator/(const Jet& a, const Jet& b) {
  Jet r;
  for (int n = 0; n < 4; ++n) {
    double s = a.c[n];
    for (int i = 1; i <= n; ++i) s -= b.c[i] * r.c[n - i];
    r.c[n] = s / b.c[0];
  }
  return r;
}

// log(x0 + h) expanded about x0 > 0.
Jet log_of_variable(double x0) {
  return Jet{{std::log(x0), 1.0 / x0, -0.5 / (x0 * x0), 1.0 / (3.0 * x0 * x0 * x0)}};
}

// (x0 + h)^e expanded about x0 > 0.
Jet pow_of_variable(double x0, double e) {
  const double v = std::pow(x0, e);
  return Jet{{v, e * v / x0, e * (e - 1.0) * v / (2.0 * x0 * x0),
              e * (e - 1.0) * (e - 2.0) * v / (6.0 * x0 * x0 * x0)}};
}

constexpr double kAfricaLo = 38.0;
constexpr double kAfricaHi = 83000.0;

Jet africa_b_jet(double w) {
  const double scale = -0.4 / (std::log(kAfricaHi) - std::log(kAfricaLo));
  return scale * (log_of_variable(w) - Jet::constant(std::log(kAfricaLo))) + Jet::constant(0.5);
}

// i(w) = a(w)/w = 0.156 w^-0.2 b/(2-b)
Jet africa_increase_jet(double w) {
  const Jet b = africa_b_jet(w);
  return 0.156 * pow_of_variable(w, -0.2) * (b / (Jet::constant(2.0) - b));
}

// d(w) = w b(w)
Jet africa_decrease_jet(double w) { return Jet::variable(w) * africa_b_jet(w); }

// Derivative of a w^e.
double power_derivative(double a, double e, double w, int order) {
  double coeff = a;
  for (int j = 0; j < order; ++j) coeff *= (e - j);
  return coeff * std::pow(w, e - order);
}

void check_args(double w, int order) {
  if (!(w > 0.0)) throw DomainError("window must be positive");
  if (order < 0 || order > 3) throw std::invalid_argument("derivative order must be in 0..3");
}

void check_africa(double w) {
  if (!africa_in_domain(w)) throw DomainError("Africa b(w) outside (0, 2)");
}

}  // namespace

ProtocolSpec ProtocolSpec::compound(CompoundParams p) {
  if (!(p.alpha > 0.0)) throw DomainError("Compound alpha must be positive");
  if (!(p.k >= 0.0 && p.k < 1.0)) throw DomainError("Compound k must lie in [0, 1)");
  if (!(p.beta > 0.0 && p.beta < 1.0)) throw DomainError("Compound beta must lie in (0, 1)");
  ProtocolSpec s;
  s.variant_ = Variant::Compound;
  s.compound_ = p;
  return s;
}

ProtocolSpec ProtocolSpec::reno() {
  ProtocolSpec s;
  s.variant_ = Variant::Reno;
  s.compound_ = {1.0, 0.0, 0.5};
  return s;
}

ProtocolSpec ProtocolSpec::illinois(IllinoisParams p) {
  if (!(p.alpha_max > 0.0)) throw DomainError("Illinois alpha_max must be positive");
  if (!(p.beta_min > 0.0 && p.beta_min < 1.0))
    throw DomainError("Illinois beta_min must lie in (0, 1)");
  ProtocolSpec s;
  s.variant_ = Variant::Illinois;
  s.illinois_ = p;
  return s;
}

ProtocolSpec ProtocolSpec::africa() {
  ProtocolSpec s;
  s.variant_ = Variant::Africa;
  return s;
}

std::string ProtocolSpec::name() const {
  switch (variant_) {
    case Variant::Compound: return "compound";
    case Variant::Reno: return "reno";
    case Variant::Illinois: return "illinois";
    case Variant::Africa: return "africa";
  }
  return "unknown";
}

std::optional<CompoundParams> ProtocolSpec::power_law() const {
  switch (variant_) {
    case Variant::Compound:
    case Variant::Reno: return compound_;
    case Variant::Illinois: return CompoundParams{illinois_.alpha_max, 0.0, illinois_.beta_min};
    case Variant::Africa: return std::nullopt;
  }
  return std::nullopt;
}

double increase_rate(const ProtocolSpec& spec, double w, int order) {
  check_args(w, order);
  if (spec.variant() == Variant::Africa) {
    check_africa(w);
    return africa_increase_jet(w).derivative(order);
  }
  const CompoundParams p = *spec.power_law();
  return power_derivative(p.alpha, p.k - 1.0, w, order);
}

double decrease_rate(const ProtocolSpec& spec, double w, int order) {
  check_args(w, order);
  if (spec.variant() == Variant::Africa) {
    check_africa(w);
    return africa_decrease_jet(w).derivative(order);
  }
  const double beta = spec.power_law()->beta;
  if (order == 0) return beta * w;
  return order == 1 ? beta : 0.0;
}

double africa_b(double w) {
  if (!(w > 0.0)) throw DomainError("window must be positive");
  return africa_b_jet(w).c[0];
}

bool africa_in_domain(double w) {
  if (!(w > 0.0)) return false;
  const double b = africa_b_jet(w).c[0];
  return b > 0.0 && b < 2.0;
}

WindowDomain window_domain(const ProtocolSpec& spec) {
  if (spec.variant() != Variant::Africa)
    return {0.0, std::numeric_limits<double>::infinity()};
  // b(w) = 0.5 - s (log w - log 38) crosses 2 and 0 at these windows.
  const double span = (std::log(kAfricaHi) - std::log(kAfricaLo)) / 0.4;
  return {kAfricaLo * std::exp(-1.5 * span), kAfricaLo * std::exp(0.5 * span)};
}

void RedParams::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw DomainError("RED gamma must lie in (0, 1]");
  if (!(b_min > 0.0)) throw DomainError("RED b_min must be positive");
  if (!(b_max > b_min)) throw DomainError("RED b_max must exceed b_min");
  if (!(p_max > 0.0 && p_max < 1.0)) throw DomainError("RED p_max must lie in (0, 1)");
}

RedSlopes red_derived_slopes(const RedParams& red) {
  if (!(red.b_max > red.b_min)) throw DomainError("RED b_max must exceed b_min");
  return {red.rho(), red.eta()};
}

double red_drop_probability(double avg_q, const RedParams& red) {
  double p;
  if (avg_q <= red.b_min) {
    p = 0.0;
  } else if (avg_q < red.b_max) {
    p = red.rho() * (avg_q - red.b_min);
  } else if (avg_q < 2.0 * red.b_max) {
    p = red.eta() * avg_q - (1.0 - 2.0 * red.p_max);
  } else {
    p = 1.0;
  }
  return std::clamp(p, 0.0, 1.0);
}

void ThresholdParams::validate() const {
  if (!(q_th >= 1.0)) throw DomainError("threshold q_th must be at least 1");
}

void NetworkParams::validate() const {
  if (!(c_per_flow > 0.0)) throw DomainError("capacity per flow must be positive");
  if (!(rtt > 0.0)) throw DomainError("round-trip time must be positive");
  if (!(kappa > 0.0)) throw DomainError("kappa must be positive");
  if (!(buffer > 0.0)) throw DomainError("buffer must be positive");
}

double threshold_drop_probability(double w, const NetworkParams& net, const ThresholdParams& th) {
  const double x = w / (net.c_per_flow * net.rtt);
  if (x >= 1.0) return 1.0;
  if (x <= 0.0) return 0.0;
  return std::pow(x, th.q_th);
}

double threshold_drop_probability_slope(double w, const NetworkParams& net,
                                        const ThresholdParams& th) {
  const double ct = net.c_per_flow * net.rtt;
  const double x = w / ct;
  if (x >= 1.0 || x <= 0.0) return 0.0;
  return th.q_th * std::pow(x, th.q_th - 1.0) / ct;
}

}  // namespace cclab
