#include "cclab/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <random>

#include "cclab/errors.hpp"

namespace cclab::sim {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || !std::isfinite(x)) throw ConfigError("bad number for " + key + ": '" + v + "'");
  return x;
}

FlowProtocol parse_protocol(const std::string& v) {
  for (FlowProtocol p : {FlowProtocol::Compound, FlowProtocol::Reno, FlowProtocol::Cubic,
                         FlowProtocol::Udp, FlowProtocol::Http})
    if (v == protocol_name(p)) return p;
  throw ConfigError("unknown flow protocol '" + v + "'");
}

struct PartialFlow {
  std::optional<FlowProtocol> protocol;
  std::optional<double> access_mbps, rtt_ms, start_s, bytes;
};

}  // namespace

SimConfig parse_scenario(std::istream& in) {
  SimConfig c;
  c.flows.clear();
  std::map<int, PartialFlow> flows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    const std::string val = trim(t.substr(eq + 1));
    if (key == "topology") {
      if (val == "dumbbell") c.topology = Topology::Dumbbell;
      else if (val == "parking-lot") c.topology = Topology::ParkingLot;
      else throw ConfigError("unknown topology '" + val + "'");
    } else if (key == "capacity_mbps") {
      c.bottleneck_capacity = to_double(key, val) * 1e6;
    } else if (key == "buffer_pkts") {
      c.buffer = static_cast<int>(to_double(key, val));
    } else if (key == "packet_bytes") {
      c.packet_size = static_cast<int>(to_double(key, val));
    } else if (key == "duration_s") {
      c.duration = to_double(key, val);
    } else if (key == "sample_interval_s") {
      c.sample_interval = to_double(key, val);
    } else if (key == "seed") {
      try {
        c.seed = std::stoull(val);
      } catch (const std::exception&) {
        throw ConfigError("bad seed '" + val + "'");
      }
    } else if (key == "policy") {
      if (val == "red") c.queue.policy = QueuePolicy::Red;
      else if (val == "threshold") c.queue.policy = QueuePolicy::Threshold;
      else if (val == "droptail") c.queue.policy = QueuePolicy::DropTail;
      else throw ConfigError("unknown policy '" + val + "'");
    } else if (key == "red.bmin") {
      c.queue.red.b_min = to_double(key, val);
    } else if (key == "red.bmax") {
      c.queue.red.b_max = to_double(key, val);
    } else if (key == "red.pmax") {
      c.queue.red.p_max = to_double(key, val);
    } else if (key == "red.wq") {
      c.queue.w_q = to_double(key, val);
    } else if (key == "threshold.qth") {
      c.queue.q_th = to_double(key, val);
    } else if (key.rfind("flow.", 0) == 0) {
      const auto dot = key.find('.', 5);
      if (dot == std::string::npos) throw ConfigError("unknown key '" + key + "'");
      const std::string idx = key.substr(5, dot - 5);
      const std::string field = key.substr(dot + 1);
      if (idx.empty() || idx.find_first_not_of("0123456789") != std::string::npos)
        throw ConfigError("bad flow index in '" + key + "'");
      PartialFlow& f = flows[std::stoi(idx)];
      if (field == "protocol") f.protocol = parse_protocol(val);
      else if (field == "access_mbps") f.access_mbps = to_double(key, val);
      else if (field == "rtt_ms") f.rtt_ms = to_double(key, val);
      else if (field == "start_s") f.start_s = to_double(key, val);
      else if (field == "bytes") f.bytes = to_double(key, val);
      else throw ConfigError("unknown key '" + key + "'");
    } else {
      throw ConfigError("unknown key '" + key + "'");
    }
  }
  for (const auto& [n, f] : flows) {
    if (!f.protocol || !f.access_mbps || !f.rtt_ms)
      throw ConfigError("flow " + std::to_string(n) + " needs protocol, access_mbps and rtt_ms");
    FlowSpec s;
    s.protocol = *f.protocol;
    s.access_rate = *f.access_mbps * 1e6;
    s.rtt_propagation = *f.rtt_ms / 1e3;
    s.start_time = f.start_s.value_or(0.0);
    s.bytes_to_send = f.bytes;
    c.flows.push_back(s);
  }
  c.validate();
  return c;
}

SimConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario '" + path + "'");
  return parse_scenario(in);
}

void write_scenario(std::ostream& out, const SimConfig& c) {
  char buf[160];
  auto kv = [&](const char* key, double v) {
    std::snprintf(buf, sizeof buf, "%s = %.17g\n", key, v);
    out << buf;
  };
  out << "topology = " << topology_name(c.topology) << "\n";
  kv("capacity_mbps", c.bottleneck_capacity / 1e6);
  kv("buffer_pkts", c.buffer);
  kv("packet_bytes", c.packet_size);
  kv("duration_s", c.duration);
  kv("sample_interval_s", c.sample_interval);
  out << "seed = " << c.seed << "\n";
  out << "policy = " << policy_name(c.queue.policy) << "\n";
  kv("red.bmin", c.queue.red.b_min);
  kv("red.bmax", c.queue.red.b_max);
  kv("red.pmax", c.queue.red.p_max);
  kv("red.wq", c.queue.w_q);
  kv("threshold.qth", c.queue.q_th);
  for (std::size_t i = 0; i < c.flows.size(); ++i) {
    const FlowSpec& f = c.flows[i];
    const std::string p = "flow." + std::to_string(i) + ".";
    out << p << "protocol = " << protocol_name(f.protocol) << "\n";
    kv((p + "access_mbps").c_str(), f.access_rate / 1e6);
    kv((p + "rtt_ms").c_str(), f.rtt_propagation * 1e3);
    kv((p + "start_s").c_str(), f.start_time);
    if (f.bytes_to_send) kv((p + "bytes").c_str(), *f.bytes_to_send);
  }
}

Profile parse_profile(const std::string& name) {
  if (name == "desk") return Profile::Desk;
  if (name == "paper") return Profile::Paper;
  throw ConfigError("unknown profile '" + name + "'");
}

SimConfig dumbbell_profile(Profile profile, double rtt, const QueueConfig& queue, std::uint64_t seed) {
  SimConfig c;
  const int n = profile == Profile::Desk ? 20 : 60;
  c.bottleneck_capacity = profile == Profile::Desk ? 25e6 : 100e6;
  c.duration = profile == Profile::Desk ? 120.0 : 500.0;
  c.packet_size = 1500;
  c.buffer = static_cast<int>(std::lround(c.bottleneck_capacity * 0.25 / (8.0 * c.packet_size)));
  c.queue = queue;
  c.seed = seed;
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> start(0.0, 10.0);
  for (int i = 0; i < n; ++i) {
    FlowSpec f;
    f.protocol = FlowProtocol::Compound;
    f.access_rate = 1.2 * c.bottleneck_capacity / n;
    f.rtt_propagation = rtt;
    f.start_time = start(rng);
    c.flows.push_back(f);
  }
  return c;
}

}  // namespace cclab::sim
