// cclab: fluid-model stability tools and a packet-level simulator.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "cclab/errors.hpp"
#include "cclab/fluid.hpp"
#include "cclab/normal_form.hpp"
#include "cclab/packet_sim.hpp"
#include "cclab/scenario.hpp"
#include "cclab/stability.hpp"

using namespace cclab;
namespace fs = std::filesystem;

namespace {

const char* const kParams[] = {"tau", "c", "kappa", "gamma", "bmin", "bmax", "pmax", "alpha", "k", "beta", "qth"};

struct Sweep {
  std::string name;
  std::vector<double> values;
};

Sweep parse_sweep(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("sweep must look like name=start:stop:count");
  Sweep s;
  s.name = text.substr(0, eq);
  std::stringstream rest(text.substr(eq + 1));
  std::string a, b, n;
  if (!std::getline(rest, a, ':') || !std::getline(rest, b, ':') || !std::getline(rest, n) ||
      n.find(':') != std::string::npos)
    throw ConfigError("sweep must look like name=start:stop:count");
  double lo, hi;
  long count;
  try {
    std::size_t u1, u2, u3;
    lo = std::stod(a, &u1);
    hi = std::stod(b, &u2);
    count = std::stol(n, &u3);
    if (u1 != a.size() || u2 != b.size() || u3 != n.size()) throw std::invalid_argument(text);
  } catch (const std::exception&) {
    throw ConfigError("bad sweep '" + text + "'");
  }
  if (count < 1) throw ConfigError("sweep count must be at least 1");
  for (long i = 0; i < count; ++i)
    s.values.push_back(count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1));
  return s;
}

ProtocolSpec protocol_from_name(const std::string& name) {
  if (name == "compound") return ProtocolSpec::compound();
  if (name == "reno") return ProtocolSpec::reno();
  if (name == "illinois") return ProtocolSpec::illinois();
  if (name == "africa") return ProtocolSpec::africa();
  throw ConfigError("unknown protocol '" + name + "'");
}

// Options shared by the fluid-model subcommands.
struct ModelOptions {
  std::string system = "with-averaging";
  std::string protocol = "compound";
  std::map<std::string, double> overrides;

  void attach(CLI::App* app) {
    app->add_option("--system", system, "with-averaging | no-averaging | threshold");
    app->add_option("--protocol", protocol, "compound | reno | illinois | africa");
    for (const char* p : kParams) {
      const std::string name = p;
      app->add_option_function<double>("--" + name, [this, name](double v) { overrides[name] = v; },
                                        "set parameter " + name);
    }
  }

  FluidModel build() const {
    FluidModel m;
    m.kind = parse_kind(system);
    m.spec = protocol_from_name(protocol);
    // The threshold charts are drawn at tau = 1 s.
    if (m.kind == FluidSystemKind::Threshold) m.net.rtt = 1.0;
    for (const auto& [k, v] : overrides) set_parameter(m, k, v);
    m.validate();
    return m;
  }
};

struct Common {
  std::uint64_t seed = 1;
  std::string out;
  std::string profile = "desk";
};

std::ostream& output(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  file.open(p);
  if (!file) throw ConfigError("cannot write '" + path + "'");
  return file;
}

// Provenance sidecar for --profile paper, next to the output.
void write_params(const Common& c, const std::string& command, const std::function<void(std::ostream&)>& body) {
  if (sim::parse_profile(c.profile) != sim::Profile::Paper) return;
  fs::path dir = ".";
  if (!c.out.empty() && c.out != "-") {
    const fs::path p(c.out);
    dir = fs::is_directory(p) ? p : (p.has_parent_path() ? p.parent_path() : fs::path("."));
  }
  fs::create_directories(dir);
  std::ofstream f(dir / "params.txt");
  f << "# command = " << command << "\n# profile = paper\n# seed = " << c.seed << "\n";
  body(f);
}

void echo_model(std::ostream& out, const FluidModel& m) {
  out << "system = " << kind_name(m.kind) << "\nprotocol = " << m.spec.name() << "\n";
  for (const char* p : kParams) {
    try {
      char buf[96];
      std::snprintf(buf, sizeof buf, "%s = %.17g\n", p, get_parameter(m, p));
      out << buf;
    } catch (const ConfigError&) {
    }
  }
}

int cmd_equilibrium(const ModelOptions& mo, const Common& c) {
  const FluidModel m = mo.build();
  const Equilibrium eq = equilibrium(m);
  write_params(c, "equilibrium", [&](std::ostream& o) { echo_model(o, m); });
  std::ofstream file;
  std::ostream& out = output(c.out, file);
  out << "w_star,q_star,p_star,residual,in_band\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, "%.12g,%s,%.12g,%.3g,%d\n", eq.w_star,
                eq.q_star ? std::to_string(*eq.q_star).c_str() : "", eq.p_star, eq.residual,
                eq.in_band ? 1 : 0);
  out << buf;
  if (!eq.warning.empty()) std::cerr << "warning: " << eq.warning << "\n";
  return 0;
}

int cmd_chart(const ModelOptions& mo, const Common& c, const std::string& sweep_text,
              const std::string& solve, double lo, double hi, int scan) {
  const FluidModel m = mo.build();
  const Sweep s = parse_sweep(sweep_text);
  if (!is_parameter_name(s.name) || !is_parameter_name(solve)) throw ConfigError("unknown parameter");
  ChartOptions opts;
  opts.scan_points = scan;
  const auto pts = trace_stability_chart(m, s.name, s.values, solve, lo, hi, opts);
  write_params(c, "stability-chart", [&](std::ostream& o) { echo_model(o, m); });
  std::ofstream file;
  write_chart_csv(output(c.out, file), s.name, solve, pts);
  int failures = 0;
  for (const CurvePoint& p : pts)
    if (!p.point) {
      ++failures;
      std::cerr << s.name << "=" << p.x << ": " << p.error << "\n";
    }
  return failures == static_cast<int>(pts.size()) ? 1 : 0;
}

int cmd_hopf(const ModelOptions& mo, const Common& c) {
  const FluidModel m = mo.build();
  const HopfAnalysis h = analyze_hopf(m);
  write_params(c, "hopf-classify", [&](std::ostream& o) { echo_model(o, m); });
  std::ofstream file;
  output(c.out, file) << hopf_report_json(h) << "\n";
  return 0;
}

int cmd_fluid(const ModelOptions& mo, const Common& c, double horizon, int steps, double scale) {
  const FluidModel m = mo.build();
  const Equilibrium eq = equilibrium(m);
  IntegrateOptions opts;
  opts.steps_per_delay = steps;
  opts.record_every = std::max(1, steps / 50);
  State h0 = equilibrium_state(m, eq);
  h0[0] *= scale;
  opts.history = [h0](double) { return h0; };
  const Trajectory tr = integrate_dde(m, horizon > 0.0 ? horizon : 200.0 * m.net.rtt, opts);
  write_params(c, "fluid-sim", [&](std::ostream& o) { echo_model(o, m); });
  std::ofstream file;
  tr.write_csv(output(c.out, file));
  return 0;
}

int cmd_bifurcation(const ModelOptions& mo, const Common& c, const std::string& sweep_text,
                    double horizon_delays, double transient_delays) {
  const FluidModel m = mo.build();
  const Sweep s = parse_sweep(sweep_text);
  BifurcationOptions opts;
  opts.horizon_delays = horizon_delays;
  opts.transient_delays = transient_delays;
  const auto pts = bifurcation_diagram(m, s.name, s.values, opts);
  write_params(c, "bifurcation-diagram", [&](std::ostream& o) { echo_model(o, m); });
  std::ofstream file;
  std::ostream& out = output(c.out, file);
  out << "param,value,w_star,w_min,w_max,amplitude,period\n";
  char buf[256];
  for (const BifurcationPoint& p : pts) {
    std::snprintf(buf, sizeof buf, "%s,%.12g,%.12g,%.12g,%.12g,%.12g,%s\n", s.name.c_str(), p.value,
                  p.eq.w_star, p.metrics.min, p.metrics.max, p.metrics.amplitude,
                  p.metrics.period ? std::to_string(*p.metrics.period).c_str() : "");
    out << buf;
  }
  return 0;
}

sim::QueueConfig queue_from(const std::string& policy, double bmin, double bmax, double wq, double qth) {
  sim::QueueConfig q;
  if (policy == "red") q.policy = sim::QueuePolicy::Red;
  else if (policy == "threshold") q.policy = sim::QueuePolicy::Threshold;
  else if (policy == "droptail") q.policy = sim::QueuePolicy::DropTail;
  else throw ConfigError("unknown policy '" + policy + "'");
  q.red.b_min = bmin;
  q.red.b_max = bmax;
  q.w_q = wq;
  q.q_th = qth;
  return q;
}

int cmd_packet(const Common& c, const std::string& scenario, bool seed_given, double rtt_ms,
               const sim::QueueConfig& q) {
  sim::SimConfig cfg = scenario.empty()
                           ? sim::dumbbell_profile(sim::parse_profile(c.profile), rtt_ms / 1e3, q, c.seed)
                           : sim::load_scenario(scenario);
  if (seed_given) cfg.seed = c.seed;
  const sim::Metrics m = sim::run_simulation(cfg);
  const std::string dir = c.out.empty() ? "." : c.out;
  m.write_csv(dir);
  write_params(Common{c.seed, dir, c.profile}, "packet-sim", [&](std::ostream& o) { sim::write_scenario(o, cfg); });
  std::printf("loss_pct=%.4f throughput_mbps=%.4f min_util_pct=%.2f mean_delay_ms=%.3f queue_p2p=%.0f\n",
              m.loss_pct, m.throughput_bps / 1e6, m.min_util_pct, 1e3 * m.mean_queueing_delay,
              m.queue_peak_to_peak);
  return 0;
}

int cmd_compare(const Common& c, const std::vector<double>& rtts_ms, const std::vector<std::uint64_t>& seeds,
                double bmin, double bmax, double wq, double qth) {
  std::ofstream file;
  std::ostream& out = output(c.out, file);
  out << "policy,rtt_ms,seed,mean_delay_ms,loss_pct,throughput_mbps,min_util_pct,max_queue\n";
  const sim::Profile prof = sim::parse_profile(c.profile);
  for (const std::string policy : {"red", "threshold"}) {
    for (double rtt : rtts_ms) {
      for (std::uint64_t seed : seeds) {
        const sim::SimConfig cfg = sim::dumbbell_profile(prof, rtt / 1e3, queue_from(policy, bmin, bmax, wq, qth), seed);
        const sim::Metrics m = sim::run_simulation(cfg);
        char buf[256];
        std::snprintf(buf, sizeof buf, "%s,%g,%llu,%.4f,%.4f,%.4f,%.2f,%d\n", policy.c_str(), rtt,
                      static_cast<unsigned long long>(seed), 1e3 * m.mean_queueing_delay, m.loss_pct,
                      m.throughput_bps / 1e6, m.min_util_pct, m.links[0].max_length);
        out << buf;
      }
    }
  }
  write_params(c, "compare-policies", [&](std::ostream& o) {
    sim::write_scenario(o, sim::dumbbell_profile(prof, rtts_ms.front() / 1e3, queue_from("red", bmin, bmax, wq, qth), seeds.front()));
  });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Congestion-control fluid models, stability analysis and packet simulation"};
  app.require_subcommand(1);
  Common common;
  bool seed_given = false;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option_function<std::uint64_t>("--seed", [&](std::uint64_t s) { common.seed = s; seed_given = true; }, "random seed");
    sub->add_option("--out", common.out, "output file or directory");
    sub->add_option("--profile", common.profile, "desk | paper")->check(CLI::IsMember({"desk", "paper"}));
  };

  ModelOptions mo;
  auto* eq = app.add_subcommand("equilibrium", "equilibrium window, queue and drop probability");
  mo.attach(eq);
  add_common(eq);

  auto* chart = app.add_subcommand("stability-chart", "Hopf boundary along a parameter sweep");
  ModelOptions mo_chart;
  mo_chart.attach(chart);
  add_common(chart);
  std::string sweep, solve = "tau";
  double lo = 0.01, hi = 2.0;
  int scan = 64;
  chart->add_option("--sweep", sweep, "name=start:stop:count")->required();
  chart->add_option("--solve", solve, "parameter solved for on the boundary");
  chart->add_option("--lo", lo, "lower end of the solve bracket");
  chart->add_option("--hi", hi, "upper end of the solve bracket");
  chart->add_option("--scan", scan, "grid points scanned before bisection");

  auto* hopf = app.add_subcommand("hopf-classify", "normal-form classification of the Hopf point");
  ModelOptions mo_hopf;
  mo_hopf.system = "no-averaging";
  mo_hopf.attach(hopf);
  add_common(hopf);

  auto* fluid = app.add_subcommand("fluid-sim", "integrate the delay differential equations");
  ModelOptions mo_fluid;
  mo_fluid.attach(fluid);
  add_common(fluid);
  double horizon = 0.0, scale = 1.1;
  int steps = 500;
  fluid->add_option("--horizon", horizon, "seconds (default 200 tau)");
  fluid->add_option("--steps-per-delay", steps, "integration steps per delay");
  fluid->add_option("--history-scale", scale, "initial window as a multiple of w*");

  auto* bif = app.add_subcommand("bifurcation-diagram", "oscillation amplitude along a sweep");
  ModelOptions mo_bif;
  mo_bif.attach(bif);
  add_common(bif);
  std::string bsweep;
  double bh = 600.0, bt = 400.0;
  bif->add_option("--sweep", bsweep, "name=start:stop:count")->required();
  bif->add_option("--horizon-delays", bh, "integration horizon in delays");
  bif->add_option("--transient-delays", bt, "discarded transient in delays");

  auto* pkt = app.add_subcommand("packet-sim", "packet-level simulation");
  add_common(pkt);
  std::string scenario, policy = "red";
  double rtt_ms = 10.0, bmin = 50.0, bmax = 100.0, wq = 0.002, qth = 15.0;
  pkt->add_option("--scenario", scenario, "scenario file (otherwise the dumbbell profile)");
  pkt->add_option("--rtt-ms", rtt_ms, "propagation RTT for the profile");
  pkt->add_option("--policy", policy, "red | threshold | droptail");
  pkt->add_option("--bmin", bmin, "RED lower threshold");
  pkt->add_option("--bmax", bmax, "RED upper threshold");
  pkt->add_option("--wq", wq, "RED averaging weight");
  pkt->add_option("--qth", qth, "threshold policy limit");

  auto* cmp = app.add_subcommand("compare-policies", "RED against the threshold policy");
  add_common(cmp);
  std::vector<double> rtts{10.0, 200.0};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  double cbmin = 8.0, cbmax = 15.0, cwq = 0.002, cqth = 15.0;
  cmp->add_option("--rtt-ms", rtts, "propagation RTTs")->delimiter(',');
  cmp->add_option("--seeds", seeds, "seeds")->delimiter(',');
  cmp->add_option("--bmin", cbmin, "RED lower threshold");
  cmp->add_option("--bmax", cbmax, "RED upper threshold");
  cmp->add_option("--wq", cwq, "RED averaging weight");
  cmp->add_option("--qth", cqth, "threshold policy limit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*eq) return cmd_equilibrium(mo, common);
    if (*chart) return cmd_chart(mo_chart, common, sweep, solve, lo, hi, scan);
    if (*hopf) return cmd_hopf(mo_hopf, common);
    if (*fluid) return cmd_fluid(mo_fluid, common, horizon, steps, scale);
    if (*bif) return cmd_bifurcation(mo_bif, common, bsweep, bh, bt);
    if (*pkt) return cmd_packet(common, scenario, seed_given, rtt_ms, queue_from(policy, bmin, bmax, wq, qth));
    if (*cmp) {
      if (seed_given) seeds = {common.seed};
      return cmd_compare(common, rtts, seeds, cbmin, cbmax, cwq, cqth);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
