#include "cclab/packet_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <queue>

#include "cclab/errors.hpp"

namespace cclab::sim {

std::string protocol_name(FlowProtocol p) {
  switch (p) {
    case FlowProtocol::Compound: return "compound";
    case FlowProtocol::Reno: return "reno";
    case FlowProtocol::Cubic: return "cubic";
    case FlowProtocol::Udp: return "udp";
    case FlowProtocol::Http: return "http";
  }
  return "?";
}

std::string policy_name(QueuePolicy p) {
  switch (p) {
    case QueuePolicy::Red: return "red";
    case QueuePolicy::Threshold: return "threshold";
    case QueuePolicy::DropTail: return "droptail";
  }
  return "?";
}

std::string topology_name(Topology t) {
  return t == Topology::Dumbbell ? "dumbbell" : "parking-lot";
}

void SimConfig::validate() const {
  if (!(bottleneck_capacity > 0.0)) throw ConfigError("bottleneck capacity must be positive");
  if (buffer < 1) throw ConfigError("buffer must hold at least one packet");
  if (packet_size < 1) throw ConfigError("packet size must be positive");
  if (!(duration > 0.0)) throw ConfigError("duration must be positive");
  if (!(sample_interval > 0.0)) throw ConfigError("sample interval must be positive");
  if (!(metrics_window > 0.0)) throw ConfigError("metrics window must be positive");
  if (flows.empty()) throw ConfigError("no flows configured");
  if (queue.policy == QueuePolicy::Red) {
    queue.red.validate();
    if (!(queue.w_q > 0.0 && queue.w_q <= 1.0)) throw ConfigError("red.wq must lie in (0, 1]");
  }
  if (queue.policy == QueuePolicy::Threshold && !(queue.q_th >= 1.0))
    throw ConfigError("threshold.qth must be at least 1");
  for (const FlowSpec& f : flows) {
    if (!(f.access_rate > 0.0)) throw ConfigError("flow access rate must be positive");
    if (!(f.rtt_propagation >= 0.0)) throw ConfigError("flow rtt must be nonnegative");
    if (!(f.start_time >= 0.0)) throw ConfigError("flow start time must be nonnegative");
    if (f.bytes_to_send && !(*f.bytes_to_send > 0.0)) throw ConfigError("flow bytes must be positive");
  }
}

void compound_on_ack(TcpWindow& w, double rtt, const CompoundTuning& t) {
  w.base_rtt = std::min(w.base_rtt, rtt);
  if (w.slow_start) {
    w.cwnd += 1.0;
    if (w.cwnd >= w.ssthresh) w.slow_start = false;
    return;
  }
  const double win = w.window();
  w.cwnd += 1.0 / win;
  const double diff = (win / w.base_rtt - win / rtt) * w.base_rtt;
  // Both branches of the per-RTT dwnd rule are spread over the acks of a window.
  if (diff < t.gamma_tilde) {
    w.dwnd += std::max(t.params.alpha * std::pow(win, t.params.k) - 1.0, 0.0) / win;
  } else {
    w.dwnd = std::max(w.dwnd - t.zeta * diff / win, 0.0);
  }
}

void compound_on_loss(TcpWindow& w, const CompoundTuning& t) {
  const double win = w.window();
  w.cwnd = std::max(w.cwnd / 2.0, 1.0);
  w.dwnd = std::max(win * (1.0 - t.params.beta) - w.cwnd, 0.0);
  w.ssthresh = w.cwnd;
  w.slow_start = false;
}

void reno_on_ack(TcpWindow& w, double rtt) {
  w.base_rtt = std::min(w.base_rtt, rtt);
  if (w.slow_start) {
    w.cwnd += 1.0;
    if (w.cwnd >= w.ssthresh) w.slow_start = false;
    return;
  }
  w.cwnd += 1.0 / w.cwnd;
}

void reno_on_loss(TcpWindow& w) {
  w.cwnd = std::max(w.cwnd / 2.0, 1.0);
  w.ssthresh = w.cwnd;
  w.slow_start = false;
}

namespace {
constexpr double kCubicC = 0.4;
constexpr double kCubicBeta = 0.7;
}  // namespace

void cubic_on_ack(TcpWindow& w, double now, double rtt) {
  w.base_rtt = std::min(w.base_rtt, rtt);
  if (w.slow_start) {
    w.cwnd += 1.0;
    if (w.cwnd >= w.ssthresh) w.slow_start = false;
    return;
  }
  if (w.epoch_start < 0.0) {
    w.epoch_start = now;
    if (w.w_max > w.cwnd) {
      w.k_cubic = std::cbrt((w.w_max - w.cwnd) / kCubicC);
      w.origin = w.w_max;
    } else {
      w.k_cubic = 0.0;
      w.origin = w.cwnd;
    }
  }
  const double t = now - w.epoch_start + w.base_rtt;
  const double target = w.origin + kCubicC * std::pow(t - w.k_cubic, 3.0);
  if (target > w.cwnd)
    w.cwnd += (target - w.cwnd) / w.cwnd;
  else
    w.cwnd += 0.01 / w.cwnd;
}

void cubic_on_loss(TcpWindow& w) {
  w.w_max = w.cwnd;
  w.cwnd = std::max(w.cwnd * kCubicBeta, 1.0);
  w.ssthresh = w.cwnd;
  w.slow_start = false;
  w.epoch_start = -1.0;
}

Decision red_enqueue_decision(QueueState& q, const RedParams& red, double w_q,
                              std::mt19937_64& rng) {
  if (q.length == 0 && q.idle_slots > 0.0) q.avg *= std::pow(1.0 - w_q, q.idle_slots);
  q.idle_slots = 0.0;
  q.avg = (1.0 - w_q) * q.avg + w_q * q.length;
  bool drop = q.length >= q.buffer;
  if (!drop) {
    const double p = red_drop_probability(q.avg, red);
    if (p >= 1.0) {
      drop = true;
    } else if (p > 0.0) {
      drop = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
    }
  }
  if (drop) {
    ++q.dropped;
    return Decision::Drop;
  }
  ++q.admitted;
  return Decision::Admit;
}

Decision threshold_enqueue_decision(QueueState& q, double q_th) {
  q.avg = q.length;
  if (q.length >= q_th || q.length >= q.buffer) {
    ++q.dropped;
    return Decision::Drop;
  }
  ++q.admitted;
  return Decision::Admit;
}

Decision droptail_enqueue_decision(QueueState& q) {
  q.avg = q.length;
  if (q.length >= q.buffer) {
    ++q.dropped;
    return Decision::Drop;
  }
  ++q.admitted;
  return Decision::Admit;
}

namespace {

enum class Ev : std::uint8_t { AppStart, LinkArrival, ServiceDone, Ack, LossNotify, UdpSend, HttpArrival, Sample };

struct Packet {
  int flow = -1;
  std::int64_t data = 0;
  std::int64_t tx = 0;
  double sent = 0.0;
  double enqueued = 0.0;
  int hop = 0;
};

struct Event {
  double t;
  std::uint64_t seq;
  Ev type;
  int index;
  Packet pkt;
};

struct Later {
  bool operator()(const Event& a, const Event& b) const {
    return a.t > b.t || (a.t == b.t && a.seq > b.seq);
  }
};

struct Link {
  QueueState qs;
  std::deque<Packet> fifo;
  bool busy = false;
  double busy_start = 0.0;
  double idle_since = 0.0;
  double busy_accum = 0.0;
  LinkCounters counters;
  std::uint64_t window_arrivals = 0;
  std::uint64_t window_drops = 0;

  double busy_total(double now) const { return busy_accum + (busy ? now - busy_start : 0.0); }
};

struct Flow {
  FlowSpec spec;
  FlowResult result;
  TcpWindow win;
  std::vector<int> route;
  bool active = false;
  bool done = false;
  bool traced = false;
  std::int64_t total = -1;  // packets, -1 for unbounded
  std::int64_t next_data = 0;
  std::deque<std::int64_t> retransmit;
  std::int64_t in_flight = 0;
  std::int64_t tx_counter = 0;
  std::int64_t recovery = 0;
  double access_free = 0.0;

  bool is_tcp() const {
    return spec.protocol != FlowProtocol::Udp && spec.protocol != FlowProtocol::Http;
  }
};

class Simulator {
 public:
  explicit Simulator(const SimConfig& c) : cfg_(c), rng_(c.seed) {
    cfg_.validate();
    bits_ = 8.0 * cfg_.packet_size;
    service_time_ = bits_ / cfg_.bottleneck_capacity;
    links_.resize(cfg_.topology == Topology::Dumbbell ? 1 : 2);
    for (Link& l : links_) l.qs.buffer = cfg_.buffer;
    window_start_ = cfg_.stop_when_sized_flows_done ? 0.0
                                                    : std::max(0.0, cfg_.duration - cfg_.metrics_window);
    for (std::size_t i = 0; i < cfg_.flows.size(); ++i) {
      std::vector<int> route{0};
      if (cfg_.topology == Topology::ParkingLot) {
        switch (i % 3) {
          case 0: route = {0, 1}; break;
          case 1: route = {0}; break;
          default: route = {1}; break;
        }
      }
      add_flow(cfg_.flows[i], std::move(route), false);
    }
  }

  Metrics run();

 private:
  int add_flow(const FlowSpec& spec, std::vector<int> route, bool generated) {
    Flow f;
    f.spec = spec;
    f.route = std::move(route);
    f.result.id = static_cast<int>(flows_.size());
    f.result.protocol = spec.protocol;
    f.result.generated = generated;
    f.result.start = spec.start_time;
    if (spec.protocol != FlowProtocol::Http) f.result.bytes = spec.bytes_to_send;
    if (spec.bytes_to_send && spec.protocol != FlowProtocol::Http)
      f.total = static_cast<std::int64_t>(std::ceil(*spec.bytes_to_send / cfg_.packet_size));
    if (cfg_.start_in_congestion_avoidance) f.win.slow_start = false;
    f.traced = f.is_tcp() && !generated && f.total < 0;
    flows_.push_back(std::move(f));
    if (flows_.back().total > 0 && !generated) ++sized_pending_;
    return flows_.back().result.id;
  }

  void push(double t, Ev type, int index, const Packet& p = {}) {
    if (events_.size() >= cfg_.max_pending_events) throw ConfigError("event queue overflow");
    events_.push(Event{t, seq_++, type, index, p});
  }

  void start_flow(int id) {
    Flow& f = flows_[id];
    f.active = true;
    f.access_free = now_;
    switch (f.spec.protocol) {
      case FlowProtocol::Udp: push(now_, Ev::UdpSend, id); break;
      case FlowProtocol::Http: push(now_ + exp_(rng_) / cfg_.http_arrival_rate, Ev::HttpArrival, id); break;
      default: try_send(id); break;
    }
  }

  void transmit(int id, std::int64_t data) {
    Flow& f = flows_[id];
    Packet p;
    p.flow = id;
    p.data = data;
    p.tx = ++f.tx_counter;
    p.sent = now_;
    const double depart = std::max(now_, f.access_free) + bits_ / f.spec.access_rate;
    f.access_free = depart;
    ++f.in_flight;
    push(depart + 0.5 * f.spec.rtt_propagation, Ev::LinkArrival, f.route[0], p);
  }

  void try_send(int id) {
    Flow& f = flows_[id];
    while (!f.done) {
      const auto allowed = std::max<std::int64_t>(1, static_cast<std::int64_t>(f.win.window()));
      if (f.in_flight >= allowed) break;
      std::int64_t data;
      if (!f.retransmit.empty()) {
        data = f.retransmit.front();
        f.retransmit.pop_front();
      } else if (f.total < 0 || f.next_data < f.total) {
        data = f.next_data++;
      } else {
        break;
      }
      transmit(id, data);
    }
  }

  void arrive(int li, Packet p) {
    Link& l = links_[li];
    ++l.counters.arrivals;
    if (now_ >= window_start_) ++l.window_arrivals;
    if (!l.busy) l.qs.idle_slots = (now_ - l.idle_since) / service_time_;
    Decision d;
    switch (cfg_.queue.policy) {
      case QueuePolicy::Red: d = red_enqueue_decision(l.qs, cfg_.queue.red, cfg_.queue.w_q, rng_); break;
      case QueuePolicy::Threshold: d = threshold_enqueue_decision(l.qs, cfg_.queue.q_th); break;
      default: d = droptail_enqueue_decision(l.qs); break;
    }
    if (d == Decision::Drop) {
      ++l.counters.drops;
      if (now_ >= window_start_) ++l.window_drops;
      Flow& f = flows_[p.flow];
      if (f.is_tcp()) push(now_ + 0.5 * f.spec.rtt_propagation, Ev::LossNotify, p.flow, p);
      return;
    }
    p.enqueued = now_;
    l.fifo.push_back(p);
    ++l.qs.length;
    l.counters.max_length = std::max(l.counters.max_length, l.qs.length);
    if (!l.busy) start_service(li);
  }

  void start_service(int li) {
    Link& l = links_[li];
    l.busy = true;
    l.busy_start = now_;
    const Packet& p = l.fifo.front();
    if (li == 0 && now_ >= window_start_) {
      delay_sum_ += now_ - p.enqueued;
      ++delay_count_;
    }
    push(now_ + service_time_, Ev::ServiceDone, li);
  }

  void service_done(int li) {
    Link& l = links_[li];
    Packet p = l.fifo.front();
    l.fifo.pop_front();
    --l.qs.length;
    ++l.counters.departures;
    if (li == 0 && now_ >= window_start_) window_bits_ += bits_;
    l.busy_accum += now_ - l.busy_start;
    l.busy = false;
    l.idle_since = now_;
    if (!l.fifo.empty()) start_service(li);

    const Flow& f = flows_[p.flow];
    if (p.hop + 1 < static_cast<int>(f.route.size())) {
      ++p.hop;
      arrive(f.route[p.hop], p);
    } else if (f.is_tcp()) {
      push(now_ + 0.5 * f.spec.rtt_propagation, Ev::Ack, p.flow, p);
    }
  }

  void on_ack(int id, const Packet& p) {
    Flow& f = flows_[id];
    if (f.done) return;
    --f.in_flight;
    ++f.result.delivered_packets;
    const double rtt = now_ - p.sent;
    switch (f.spec.protocol) {
      case FlowProtocol::Compound: compound_on_ack(f.win, rtt, cfg_.compound); break;
      case FlowProtocol::Cubic: cubic_on_ack(f.win, now_, rtt); break;
      default: reno_on_ack(f.win, rtt); break;
    }
    if (f.total > 0 && static_cast<std::int64_t>(f.result.delivered_packets) >= f.total) {
      f.done = true;
      f.result.completion = now_;
      if (!f.result.generated && --sized_pending_ == 0 && cfg_.stop_when_sized_flows_done) stop_ = true;
      return;
    }
    try_send(id);
  }

  void on_loss(int id, const Packet& p) {
    Flow& f = flows_[id];
    if (f.done) return;
    --f.in_flight;
    ++f.result.lost_packets;
    f.retransmit.push_back(p.data);
    // At most one reduction per window of data in flight.
    if (p.tx > f.recovery) {
      switch (f.spec.protocol) {
        case FlowProtocol::Compound: compound_on_loss(f.win, cfg_.compound); break;
        case FlowProtocol::Cubic: cubic_on_loss(f.win); break;
        default: reno_on_loss(f.win); break;
      }
      f.recovery = f.tx_counter;
    }
    try_send(id);
  }

  void udp_send(int id) {
    Flow& f = flows_[id];
    transmit(id, f.next_data++);
    --f.in_flight;
    const double next = now_ + bits_ / f.spec.access_rate;
    if (next <= cfg_.duration) push(next, Ev::UdpSend, id);
  }

  void http_arrival(int gen) {
    FlowSpec spec = flows_[gen].spec;
    spec.protocol = FlowProtocol::Reno;
    spec.start_time = now_;
    if (!spec.bytes_to_send) spec.bytes_to_send = 5000.0;
    std::vector<int> route = flows_[gen].route;
    const int id = add_flow(spec, std::move(route), true);
    start_flow(id);
    push(now_ + exp_(rng_) / cfg_.http_arrival_rate, Ev::HttpArrival, gen);
  }

  void sample() {
    const Link& l = links_[0];
    metrics_.queue.push_back({now_, static_cast<double>(l.qs.length), l.qs.avg});
    const double busy = l.busy_total(now_);
    if (now_ > 0.0) {
      const double dt = now_ - last_sample_;
      metrics_.util.push_back({now_, std::min(100.0, 100.0 * (busy - last_busy_) / dt)});
    }
    last_busy_ = busy;
    last_sample_ = now_;
    for (const Flow& f : flows_)
      if (f.traced && f.active && !f.done)
        metrics_.windows.push_back({now_, f.result.id, f.win.window()});
    const double next = now_ + cfg_.sample_interval;
    if (next <= cfg_.duration + 1e-12) push(next, Ev::Sample, 0);
  }

  void finish();

  SimConfig cfg_;
  std::mt19937_64 rng_;
  std::exponential_distribution<double> exp_{1.0};
  std::priority_queue<Event, std::vector<Event>, Later> events_;
  std::uint64_t seq_ = 0;
  double now_ = 0.0;
  double bits_ = 0.0;
  double service_time_ = 0.0;
  double window_start_ = 0.0;
  std::vector<Link> links_;
  std::vector<Flow> flows_;
  int sized_pending_ = 0;
  bool stop_ = false;
  double last_busy_ = 0.0;
  double last_sample_ = 0.0;
  double delay_sum_ = 0.0;
  std::uint64_t delay_count_ = 0;
  double window_bits_ = 0.0;
  Metrics metrics_;
};

Metrics Simulator::run() {
  for (std::size_t i = 0; i < flows_.size(); ++i) push(flows_[i].spec.start_time, Ev::AppStart, static_cast<int>(i));
  push(0.0, Ev::Sample, 0);
  std::uint64_t processed = 0;
  while (!events_.empty() && !stop_) {
    const Event e = events_.top();
    if (e.t > cfg_.duration) break;
    events_.pop();
    now_ = e.t;
    ++processed;
    switch (e.type) {
      case Ev::AppStart: start_flow(e.index); break;
      case Ev::LinkArrival: arrive(e.index, e.pkt); break;
      case Ev::ServiceDone: service_done(e.index); break;
      case Ev::Ack: on_ack(e.index, e.pkt); break;
      case Ev::LossNotify: on_loss(e.index, e.pkt); break;
      case Ev::UdpSend: udp_send(e.index); break;
      case Ev::HttpArrival: http_arrival(e.index); break;
      case Ev::Sample: sample(); break;
    }
  }
  metrics_.events = processed;
  metrics_.end_time = stop_ ? now_ : cfg_.duration;
  finish();
  return std::move(metrics_);
}

void Simulator::finish() {
  Metrics& m = metrics_;
  m.window_start = window_start_;
  const double span = m.end_time - window_start_;
  std::uint64_t arrivals = 0, drops = 0;
  for (Link& l : links_) {
    l.counters.final_occupancy = static_cast<std::uint64_t>(l.qs.length);
    m.links.push_back(l.counters);
    arrivals += l.window_arrivals;
    drops += l.window_drops;
  }
  m.loss_pct = arrivals ? 100.0 * static_cast<double>(drops) / static_cast<double>(arrivals) : 0.0;
  m.throughput_bps = span > 0.0 ? window_bits_ / span : 0.0;
  m.mean_queueing_delay = delay_count_ ? delay_sum_ / static_cast<double>(delay_count_) : 0.0;
  for (const Flow& f : flows_) m.flows.push_back(f.result);

  double umin = 100.0, usum = 0.0;
  std::size_t un = 0;
  for (const UtilSample& u : m.util) {
    if (u.t - cfg_.sample_interval < window_start_ - 1e-9 || u.t > m.end_time) continue;
    umin = std::min(umin, u.utilization_pct);
    usum += u.utilization_pct;
    ++un;
  }
  m.min_util_pct = un ? umin : 0.0;
  m.mean_util_pct = un ? usum / static_cast<double>(un) : 0.0;

  double qmin = 1e300, qmax = -1e300, qsum = 0.0;
  std::size_t qn = 0, in_band = 0;
  for (const QueueSample& s : m.queue) {
    if (s.t < window_start_) continue;
    qmin = std::min(qmin, s.q);
    qmax = std::max(qmax, s.q);
    qsum += s.q;
    ++qn;
    if (s.avg_q >= cfg_.queue.red.b_min && s.avg_q <= cfg_.queue.red.b_max) ++in_band;
  }
  if (qn) {
    m.queue_peak_to_peak = qmax - qmin;
    m.mean_queue = qsum / static_cast<double>(qn);
    m.avg_in_band_fraction = static_cast<double>(in_band) / static_cast<double>(qn);
  }

  // Synchrony over flows present at every sample in the window.
  std::vector<double> times;
  for (const QueueSample& s : m.queue)
    if (s.t >= window_start_) times.push_back(s.t);
  const std::size_t nt = times.size();
  if (nt >= 2) {
    std::vector<std::vector<double>> series(flows_.size());
    for (const WindowSample& w : m.windows)
      if (w.t >= window_start_) series[static_cast<std::size_t>(w.flow)].push_back(w.window);
    std::vector<double> mean_t(nt, 0.0);
    double var_sum = 0.0;
    std::size_t nf = 0;
    for (const auto& s : series) {
      if (s.size() != nt) continue;
      double mu = 0.0;
      for (double v : s) mu += v;
      mu /= static_cast<double>(nt);
      double var = 0.0;
      for (std::size_t j = 0; j < nt; ++j) {
        var += (s[j] - mu) * (s[j] - mu);
        mean_t[j] += s[j];
      }
      var_sum += var / static_cast<double>(nt);
      ++nf;
    }
    if (nf > 0 && var_sum > 0.0) {
      double mu = 0.0;
      for (double& v : mean_t) {
        v /= static_cast<double>(nf);
        mu += v;
      }
      mu /= static_cast<double>(nt);
      double var = 0.0;
      for (double v : mean_t) var += (v - mu) * (v - mu);
      var /= static_cast<double>(nt);
      m.sync_index = var / (var_sum / static_cast<double>(nf));
    }
  }
}

}  // namespace

Metrics run_simulation(const SimConfig& config) { return Simulator(config).run(); }

double compute_afct(const Metrics& m, bool include_generated) {
  double sum = 0.0;
  std::size_t n = 0;
  std::string stragglers;
  for (const FlowResult& f : m.flows) {
    if (!f.bytes || (f.generated && !include_generated)) continue;
    if (!f.completion) {
      stragglers += (stragglers.empty() ? "" : ", ") + std::to_string(f.id);
      continue;
    }
    sum += *f.completion - f.start;
    ++n;
  }
  if (!stragglers.empty()) throw ConsistencyError("flows did not complete: " + stragglers);
  if (n == 0) throw ConsistencyError("no sized flows");
  return sum / static_cast<double>(n);
}

void Metrics::write_csv(const std::string& directory) const {
  namespace fs = std::filesystem;
  fs::create_directories(directory);
  auto open = [&](const char* name) {
    std::ofstream out(fs::path(directory) / name);
    if (!out) throw ConfigError(std::string("cannot write ") + name);
    return out;
  };
  char buf[128];
  {
    auto out = open("queue.csv");
    out << "t,q,avg_q\n";
    for (const QueueSample& s : queue) {
      std::snprintf(buf, sizeof buf, "%.6f,%.0f,%.6f\n", s.t, s.q, s.avg_q);
      out << buf;
    }
  }
  {
    auto out = open("flows.csv");
    out << "t,flow_id,window\n";
    for (const WindowSample& s : windows) {
      std::snprintf(buf, sizeof buf, "%.6f,%d,%.6f\n", s.t, s.flow, s.window);
      out << buf;
    }
  }
  {
    auto out = open("util.csv");
    out << "t,utilization_pct\n";
    for (const UtilSample& s : util) {
      std::snprintf(buf, sizeof buf, "%.6f,%.4f\n", s.t, s.utilization_pct);
      out << buf;
    }
  }
  {
    auto out = open("summary.csv");
    out << "loss_pct,throughput_mbps,afct_s,min_util_pct\n";
    std::string afct = "nan";
    try {
      std::snprintf(buf, sizeof buf, "%.6f", compute_afct(*this));
      afct = buf;
    } catch (const ConsistencyError&) {
    }
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,", loss_pct, throughput_bps / 1e6);
    out << buf << afct;
    std::snprintf(buf, sizeof buf, ",%.4f\n", min_util_pct);
    out << buf;
  }
}

}  // namespace cclab::sim
