#include "cclab/fluid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "cclab/errors.hpp"
#include "cclab/numeric.hpp"
#include "cclab/parallel.hpp"

namespace cclab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// i(w) diverges at w = 0 for k < 1; the RHS evaluates i no lower than this.
constexpr double kWindowFloor = 1e-9;

double clamp01(double p) { return std::clamp(p, 0.0, 1.0); }

// Drift of w in every system: (i(w)(1 - pd) - d(w) pd) wd / tau.
double window_drift(const ProtocolSpec& spec, double w, double pd, double wd, double tau) {
  const double ww = std::max(w, kWindowFloor);
  return (increase_rate(spec, ww) * (1.0 - pd) - decrease_rate(spec, ww) * pd) * wd / tau;
}

// Projects the queue drift so q stays within [0, buffer].
double queue_drift(double raw, double q, double buffer) {
  if (q <= 0.0) return std::max(raw, 0.0);
  if (q >= buffer) return std::min(raw, 0.0);
  return raw;
}

Equilibrium red_equilibrium(const ProtocolSpec& spec, const RedParams& red,
                            const NetworkParams& net) {
  red.validate();
  net.validate();
  const double ct = net.c_per_flow * net.rtt;
  const WindowDomain dom = window_domain(spec);
  if (!(ct > dom.lo && ct < dom.hi))
    throw ConvergenceError("C*tau lies outside the protocol's window domain");

  auto window = [ct](double p) { return ct / (1.0 - p); };
  auto balance = [&](double p) {
    const double w = window(p);
    return increase_rate(spec, w) * (1.0 - p) - decrease_rate(spec, w) * p;
  };

  double p_hi = std::nextafter(1.0, 0.0);
  if (std::isfinite(dom.hi)) p_hi = std::min(p_hi, 1.0 - ct / (dom.hi * (1.0 - 1e-12)));
  const double f_lo = balance(0.0);
  const double f_hi = balance(p_hi);
  if (!(f_lo > 0.0 && f_hi < 0.0)) throw ConvergenceError("no equilibrium drop probability in (0, 1)");
  const BisectResult root = bisect(balance, 0.0, f_lo, p_hi, f_hi);

  Equilibrium eq;
  eq.p_star = root.x;
  eq.w_star = window(root.x);
  eq.q_star = eq.p_star / red.rho() + red.b_min;
  const double gain = increase_rate(spec, eq.w_star) * (1.0 - eq.p_star);
  const double loss = decrease_rate(spec, eq.w_star) * eq.p_star;
  const double r_balance = std::abs(gain - loss) / (gain + loss);
  const double r_rate = std::abs(eq.w_star * (1.0 - eq.p_star) - ct) / ct;
  const double r_queue = std::abs(*eq.q_star - (eq.p_star / red.rho() + red.b_min)) / *eq.q_star;
  eq.residual = std::max({r_balance, r_rate, r_queue});
  if (!(eq.p_star > 0.0 && eq.p_star < 1.0) || !(eq.residual < 1e-9))
    throw ConvergenceError("equilibrium residual above tolerance");
  eq.in_band = *eq.q_star > red.b_min && *eq.q_star < red.b_max;
  if (!eq.in_band) eq.warning = "equilibrium queue outside the affine RED band (b_min, b_max)";
  return eq;
}

}  // namespace

int state_dimension(FluidSystemKind kind) {
  switch (kind) {
    case FluidSystemKind::WithAveraging: return 3;
    case FluidSystemKind::NoAveraging: return 2;
    case FluidSystemKind::Threshold: return 1;
  }
  return 0;
}

std::string kind_name(FluidSystemKind kind) {
  switch (kind) {
    case FluidSystemKind::WithAveraging: return "with-averaging";
    case FluidSystemKind::NoAveraging: return "no-averaging";
    case FluidSystemKind::Threshold: return "threshold";
  }
  return "unknown";
}

FluidSystemKind parse_kind(const std::string& name) {
  if (name == "with-averaging") return FluidSystemKind::WithAveraging;
  if (name == "no-averaging") return FluidSystemKind::NoAveraging;
  if (name == "threshold") return FluidSystemKind::Threshold;
  throw ConfigError("unknown system '" + name + "'");
}

void FluidModel::validate() const {
  net.validate();
  if (kind == FluidSystemKind::Threshold)
    threshold.validate();
  else
    red.validate();
}

bool is_parameter_name(const std::string& name) {
  static const char* names[] = {"tau", "c",  "kappa", "gamma", "bmin", "bmax",
                                "pmax", "alpha", "k",  "beta", "qth"};
  return std::find(std::begin(names), std::end(names), name) != std::end(names);
}

double get_parameter(const FluidModel& m, const std::string& name) {
  if (name == "tau") return m.net.rtt;
  if (name == "c") return m.net.c_per_flow;
  if (name == "kappa") return m.net.kappa;
  if (name == "gamma") return m.red.gamma;
  if (name == "bmin") return m.red.b_min;
  if (name == "bmax") return m.red.b_max;
  if (name == "pmax") return m.red.p_max;
  if (name == "qth") return m.threshold.q_th;
  if (name == "alpha" || name == "k" || name == "beta") {
    const auto pl = m.spec.power_law();
    if (!pl) throw ConfigError("protocol has no '" + name + "' parameter");
    return name == "alpha" ? pl->alpha : name == "k" ? pl->k : pl->beta;
  }
  throw ConfigError("unknown parameter '" + name + "'");
}

void set_parameter(FluidModel& m, const std::string& name, double v) {
  if (name == "tau") {
    m.net.rtt = v;
  } else if (name == "c") {
    m.net.c_per_flow = v;
  } else if (name == "kappa") {
    m.net.kappa = v;
  } else if (name == "gamma") {
    m.red.gamma = v;
  } else if (name == "bmin") {
    m.red.b_min = v;
  } else if (name == "bmax") {
    m.red.b_max = v;
  } else if (name == "pmax") {
    m.red.p_max = v;
  } else if (name == "qth") {
    m.threshold.q_th = v;
  } else if (name == "alpha" || name == "k" || name == "beta") {
    if (m.spec.variant() != Variant::Compound)
      throw ConfigError("'" + name + "' can only be set on the Compound protocol");
    CompoundParams p = m.spec.compound_params();
    (name == "alpha" ? p.alpha : name == "k" ? p.k : p.beta) = v;
    m.spec = ProtocolSpec::compound(p);
  } else {
    throw ConfigError("unknown parameter '" + name + "'");
  }
}

Equilibrium equilibrium_with_averaging(const ProtocolSpec& spec, const RedParams& red,
                                       const NetworkParams& net) {
  return red_equilibrium(spec, red, net);
}

Equilibrium equilibrium_no_averaging(const ProtocolSpec& spec, const RedParams& red,
                                     const NetworkParams& net) {
  return red_equilibrium(spec, red, net);
}

Equilibrium equilibrium_threshold(const ProtocolSpec& spec, const NetworkParams& net,
                                  const ThresholdParams& th) {
  net.validate();
  th.validate();
  const double ct = net.c_per_flow * net.rtt;
  const WindowDomain dom = window_domain(spec);
  auto balance = [&](double w) {
    const double p = threshold_drop_probability(w, net, th);
    return increase_rate(spec, w) * (1.0 - p) - decrease_rate(spec, w) * p;
  };
  const double lo = std::max(dom.lo * (1.0 + 1e-12), ct * 1e-12);
  const double hi = std::min(ct, dom.hi * (1.0 - 1e-12));
  const double f_lo = balance(lo);
  const double f_hi = balance(hi);
  if (!(f_lo > 0.0 && f_hi < 0.0)) throw ConvergenceError("no threshold equilibrium in (0, C*tau)");
  const BisectResult root = bisect(balance, lo, f_lo, hi, f_hi);

  Equilibrium eq;
  eq.w_star = root.x;
  eq.p_star = threshold_drop_probability(eq.w_star, net, th);
  const double gain = increase_rate(spec, eq.w_star) * (1.0 - eq.p_star);
  const double loss = decrease_rate(spec, eq.w_star) * eq.p_star;
  eq.residual = std::abs(gain - loss) / (gain + loss);
  if (!(eq.p_star > 0.0 && eq.p_star < 1.0) || !(eq.residual < 1e-9))
    throw ConvergenceError("threshold equilibrium residual above tolerance");

  if (const auto pl = spec.power_law()) {
    // alpha w^(k-1) = beta w (w/C tau)^q_th once 1 - p is replaced by 1.
    const double e = th.q_th + 2.0 - pl->k;
    eq.closed_form_w =
        std::exp((std::log(pl->alpha) + th.q_th * std::log(ct) - std::log(pl->beta)) / e);
    // The exact root differs from it by the factor (1 - p*)^(1/e).
    const double predicted = *eq.closed_form_w * std::pow(1.0 - eq.p_star, 1.0 / e);
    if (relative_difference(predicted, eq.w_star) > 1e-9)
      throw ConsistencyError("threshold equilibrium disagrees with its closed form");
  }
  return eq;
}

Equilibrium equilibrium(const FluidModel& model) {
  switch (model.kind) {
    case FluidSystemKind::WithAveraging:
      return equilibrium_with_averaging(model.spec, model.red, model.net);
    case FluidSystemKind::NoAveraging:
      return equilibrium_no_averaging(model.spec, model.red, model.net);
    case FluidSystemKind::Threshold:
      return equilibrium_threshold(model.spec, model.net, model.threshold);
  }
  throw ConfigError("unknown system kind");
}

State equilibrium_state(const FluidModel& model, const Equilibrium& eq) {
  switch (model.kind) {
    case FluidSystemKind::WithAveraging: return {eq.w_star, eq.q_star.value(), eq.p_star};
    case FluidSystemKind::NoAveraging: return {eq.w_star, eq.q_star.value(), 0.0};
    case FluidSystemKind::Threshold: return {eq.w_star, 0.0, 0.0};
  }
  return {};
}

State rhs(const FluidModel& m, const State& now, const State& del) {
  const double kappa = m.net.kappa;
  const double tau = m.net.rtt;
  const double c = m.net.c_per_flow;
  const double wd = std::max(del[0], 0.0);
  State out{0.0, 0.0, 0.0};
  switch (m.kind) {
    case FluidSystemKind::WithAveraging: {
      const double pd = clamp01(del[2]);
      const double p = clamp01(now[2]);
      const double rho = m.red.rho();
      out[0] = kappa * window_drift(m.spec, now[0], pd, wd, tau);
      out[1] = kappa * queue_drift((1.0 - p) * now[0] / tau - c, now[1], m.net.buffer);
      out[2] = -kappa * m.red.gamma * c * (now[2] + rho * m.red.b_min - rho * now[1]);
      break;
    }
    case FluidSystemKind::NoAveraging: {
      const double rho = m.red.rho();
      const double pd = clamp01(rho * (del[1] - m.red.b_min));
      const double p = clamp01(rho * (now[1] - m.red.b_min));
      out[0] = kappa * window_drift(m.spec, now[0], pd, wd, tau);
      out[1] = kappa * queue_drift((1.0 - p) * now[0] / tau - c, now[1], m.net.buffer);
      break;
    }
    case FluidSystemKind::Threshold: {
      const double pd = threshold_drop_probability(std::max(del[0], kWindowFloor), m.net, m.threshold);
      out[0] = kappa * window_drift(m.spec, now[0], pd, wd, tau);
      break;
    }
  }
  return out;
}

std::vector<double> Trajectory::component(int i) const {
  std::vector<double> out;
  out.reserve(x.size());
  for (const State& s : x) out.push_back(s[i]);
  return out;
}

void Trajectory::write_csv(std::ostream& out) const {
  static const char* names[] = {"w", "q", "p"};
  out << "t";
  for (int i = 0; i < dimension; ++i) out << ',' << names[i];
  out << '\n';
  char buf[64];
  for (std::size_t n = 0; n < t.size(); ++n) {
    std::snprintf(buf, sizeof buf, "%.12g", t[n]);
    out << buf;
    for (int i = 0; i < dimension; ++i) {
      std::snprintf(buf, sizeof buf, ",%.12g", x[n][i]);
      out << buf;
    }
    out << '\n';
  }
}

Trajectory integrate_dde_generic(const DdeRhs& f, int dim, double delay, const HistoryFn& history,
                                 double horizon, int m, int record_every, const State& lower,
                                 const State& upper) {
  if (m < 200) throw DomainError("steps per delay must be at least 200");
  if (!(delay > 0.0)) throw DomainError("delay must be positive");
  if (!(horizon > 0.0)) throw DomainError("horizon must be positive");
  if (record_every < 1) throw DomainError("record_every must be at least 1");
  const double h = delay / m;
  const long steps = std::lround(horizon / h);

  struct Node {
    State x;
    State dx;
  };
  // History nodes t_j = j h for j = -m..0, derivatives by central differences.
  std::vector<Node> past(m + 1);
  const double eps = h * 1e-3;
  for (int j = -m; j <= 0; ++j) {
    Node& node = past[j + m];
    node.x = history(j * h);
    const State a = history(j * h + eps);
    const State b = history(j * h - eps);
    for (int i = 0; i < 3; ++i) node.dx[i] = (a[i] - b[i]) / (2.0 * eps);
  }
  // Ring buffer of solution nodes n - m .. n.
  const std::size_t ring = static_cast<std::size_t>(m) + 2;
  std::vector<Node> sol(ring);

  auto node = [&](long j) -> const Node& {
    if (j <= 0) return past[j + m];
    return sol[static_cast<std::size_t>(j) % ring];
  };
  auto sol_node = [&](long j) -> const Node& { return sol[static_cast<std::size_t>(j) % ring]; };
  // Delayed state at t_j + h/2, interpolated on [t_j, t_{j+1}].
  auto midpoint = [&](long j) {
    const Node& l = j < 0 ? past[j + m] : sol_node(j);
    const Node& r = j + 1 <= 0 ? past[j + 1 + m] : sol_node(j + 1);
    State out{};
    for (int i = 0; i < 3; ++i) out[i] = 0.5 * (l.x[i] + r.x[i]) + h * (l.dx[i] - r.dx[i]) / 8.0;
    return out;
  };
  auto add = [](const State& a, double s, const State& b) {
    return State{a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]};
  };

  Trajectory tr;
  tr.dimension = dim;
  tr.step = h;
  tr.delay = delay;
  tr.t.reserve(static_cast<std::size_t>(steps / record_every + 2));
  tr.x.reserve(tr.t.capacity());

  State x = history(0.0);
  sol[0].x = x;
  tr.t.push_back(0.0);
  tr.x.push_back(x);
  for (long n = 0; n < steps; ++n) {
    const long d = n - m;
    const State del0 = node(d).x;
    const State delh = midpoint(d);
    const State del1 = node(d + 1).x;
    const State k1 = f(x, del0);
    sol[static_cast<std::size_t>(n) % ring].dx = k1;
    const State k2 = f(add(x, 0.5 * h, k1), delh);
    const State k3 = f(add(x, 0.5 * h, k2), delh);
    const State k4 = f(add(x, h, k3), del1);
    for (int i = 0; i < 3; ++i) {
      x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      x[i] = std::clamp(x[i], lower[i], upper[i]);
    }
    const double t = (n + 1) * h;
    for (int i = 0; i < dim; ++i)
      if (!std::isfinite(x[i])) throw IntegrationError("non-finite state", t);
    sol[static_cast<std::size_t>(n + 1) % ring].x = x;
    if ((n + 1) % record_every == 0) {
      tr.t.push_back(t);
      tr.x.push_back(x);
    }
  }
  return tr;
}

Trajectory integrate_dde(const FluidModel& model, double horizon, const IntegrateOptions& opts) {
  model.validate();
  HistoryFn history = opts.history;
  if (!history) {
    State init = equilibrium_state(model, equilibrium(model));
    for (double& v : init) v *= 1.1;
    history = [init](double) { return init; };
  }
  const State lower{0.0, 0.0, 0.0};
  State upper{kInf, kInf, kInf};
  if (model.kind != FluidSystemKind::Threshold) upper[1] = model.net.buffer;
  if (model.kind == FluidSystemKind::WithAveraging) upper[2] = 1.0;
  auto f = [&model](const State& now, const State& del) { return rhs(model, now, del); };
  Trajectory tr = integrate_dde_generic(f, state_dimension(model.kind), model.net.rtt, history,
                                        horizon, opts.steps_per_delay, opts.record_every, lower,
                                        upper);
  tr.kind = model.kind;
  return tr;
}

OscillationMetrics oscillation_metrics(const std::vector<double>& t, const std::vector<double>& x,
                                       double transient_cut, double min_window) {
  if (t.size() != x.size() || t.size() < 2) throw DomainError("trajectory too short");
  if (t.back() - t.front() < transient_cut + min_window)
    throw DomainError("trajectory does not span the transient cut plus the metrics window");
  const double start = t.front() + transient_cut;
  const auto first = std::lower_bound(t.begin(), t.end(), start) - t.begin();

  OscillationMetrics om;
  om.min = kInf;
  om.max = -kInf;
  double sum = 0.0;
  for (auto n = first; n < static_cast<long>(t.size()); ++n) {
    om.min = std::min(om.min, x[n]);
    om.max = std::max(om.max, x[n]);
    sum += x[n];
  }
  om.mean = sum / static_cast<double>(t.size() - first);
  om.amplitude = om.max - om.min;
  if (om.amplitude <= 1e-12 * std::max(1.0, std::abs(om.mean))) return om;

  std::vector<double> ups;
  for (auto n = first + 1; n < static_cast<long>(t.size()); ++n) {
    const double a = x[n - 1] - om.mean;
    const double b = x[n] - om.mean;
    if (a < 0.0 && b >= 0.0) ups.push_back(t[n - 1] + (t[n] - t[n - 1]) * (-a) / (b - a));
  }
  if (ups.size() >= 2) om.period = (ups.back() - ups.front()) / static_cast<double>(ups.size() - 1);
  return om;
}

OscillationMetrics oscillation_metrics(const Trajectory& traj, double transient_cut, int component) {
  if (component < 0 || component >= traj.dimension) throw DomainError("no such state component");
  return oscillation_metrics(traj.t, traj.component(component), transient_cut, 50.0 * traj.delay);
}

std::vector<BifurcationPoint> bifurcation_diagram(const FluidModel& base, const std::string& param,
                                                  const std::vector<double>& values,
                                                  const BifurcationOptions& opts) {
  std::vector<BifurcationPoint> out(values.size());
  parallel_for_index(values.size(), opts.threads, [&](std::size_t i) {
    FluidModel m = base;
    set_parameter(m, param, values[i]);
    IntegrateOptions io;
    io.steps_per_delay = opts.steps_per_delay;
    io.record_every = std::max(1, opts.steps_per_delay / 50);
    const double tau = m.net.rtt;
    const Trajectory tr = integrate_dde(m, opts.horizon_delays * tau, io);
    out[i].value = values[i];
    out[i].eq = equilibrium(m);
    out[i].metrics = oscillation_metrics(tr, opts.transient_delays * tau, 0);
  });
  return out;
}

}  // namespace cclab
