#include <cmath>
#include <random>
#include <sstream>

#include "cclab/errors.hpp"
#include "cclab/packet_sim.hpp"
#include "cclab/scenario.hpp"
#include "doctest.h"

using namespace cclab;
using namespace cclab::sim;

namespace {

SimConfig single_flow(FlowProtocol proto, double capacity, int buffer, double rtt) {
  SimConfig c;
  c.bottleneck_capacity = capacity;
  c.buffer = buffer;
  c.flows.push_back(FlowSpec{proto, 10.0 * capacity, rtt, 0.0, std::nullopt});
  c.duration = 60.0;
  c.metrics_window = 50.0;
  c.queue.policy = QueuePolicy::DropTail;
  return c;
}

SimConfig short_desk(double rtt, QueueConfig q, std::uint64_t seed, double duration = 30.0) {
  SimConfig c = dumbbell_profile(Profile::Desk, rtt, q, seed);
  c.duration = duration;
  c.metrics_window = duration / 2;
  return c;
}

QueueConfig red_queue(double bmin, double bmax, double w_q = 0.002) {
  QueueConfig q;
  q.policy = QueuePolicy::Red;
  q.red.b_min = bmin;
  q.red.b_max = bmax;
  q.w_q = w_q;
  return q;
}

QueueConfig threshold_queue(double q_th) {
  QueueConfig q;
  q.policy = QueuePolicy::Threshold;
  q.q_th = q_th;
  return q;
}

}  // namespace

TEST_CASE("Compound dwnd increment vanishes at the boundary window") {
  CompoundTuning t;
  TcpWindow w;
  w.slow_start = false;
  w.cwnd = 16.0;
  w.base_rtt = 0.1;
  compound_on_ack(w, 0.1, t);
  CHECK(w.dwnd == 0.0);
  CHECK(w.cwnd == doctest::Approx(16.0 + 1.0 / 16.0).epsilon(1e-15));
}

TEST_CASE("Compound loss response") {
  CompoundTuning t;
  TcpWindow w;
  w.slow_start = false;
  w.cwnd = 12.0;
  w.dwnd = 8.0;
  compound_on_loss(w, t);
  CHECK(w.cwnd == 6.0);
  CHECK(w.dwnd == 4.0);
  CHECK(w.window() == 10.0);

  TcpWindow small;
  small.slow_start = false;
  small.cwnd = 1.0;
  compound_on_loss(small, t);
  CHECK(small.cwnd == 1.0);
  CHECK(small.dwnd >= 0.0);
}

TEST_CASE("Compound delay branch shrinks dwnd") {
  CompoundTuning t;
  TcpWindow w;
  w.slow_start = false;
  w.cwnd = 100.0;
  w.dwnd = 50.0;
  w.base_rtt = 0.1;
  // diff = win (1 - base/rtt) = 150 * 0.5 = 75 >= 30
  compound_on_ack(w, 0.2, t);
  CHECK(w.dwnd == doctest::Approx(50.0 - 0.5 * 75.0 / 150.0).epsilon(1e-12));
  w.dwnd = 0.001;
  compound_on_ack(w, 0.2, t);
  CHECK(w.dwnd == 0.0);
}

TEST_CASE("Compound per-ack updates add up to alpha w^k per lossless round trip") {
  CompoundTuning t;
  // Below win = 16 the clamp (alpha w^k - 1)+ is zero and only cwnd grows.
  for (double win = 16.0; win <= 256.0; win *= 2.0) {
    TcpWindow w;
    w.slow_start = false;
    w.cwnd = win;
    w.base_rtt = 0.1;
    const int acks = static_cast<int>(win);
    for (int i = 0; i < acks; ++i) compound_on_ack(w, 0.1, t);
    const double expect = t.params.alpha * std::pow(win, t.params.k);
    CAPTURE(win);
    CHECK(std::abs((w.window() - win) - expect) <= 0.05 * expect);
  }
  for (double win : {8.0, 12.0}) {
    TcpWindow w;
    w.slow_start = false;
    w.cwnd = win;
    w.base_rtt = 0.1;
    double expect = 0.0;
    for (int i = 0; i < static_cast<int>(win); ++i) {
      expect += 1.0 / w.window();
      compound_on_ack(w, 0.1, t);
    }
    CHECK(w.dwnd == 0.0);
    CHECK(w.window() - win == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("Reno slow start and congestion avoidance") {
  TcpWindow w;
  w.ssthresh = 4.0;
  for (int i = 0; i < 3; ++i) reno_on_ack(w, 0.1);
  CHECK(w.cwnd == 4.0);
  CHECK_FALSE(w.slow_start);
  reno_on_ack(w, 0.1);
  CHECK(w.cwnd == doctest::Approx(4.25));
  reno_on_loss(w);
  CHECK(w.cwnd == doctest::Approx(2.125));
}

TEST_CASE("RED enqueue decision") {
  std::mt19937_64 rng(3);
  RedParams red{1e-4, 50.0, 100.0, 0.1};

  QueueState below;
  below.buffer = 1000;
  below.length = 40;
  int drops = 0;
  for (int i = 0; i < 10000; ++i) drops += red_enqueue_decision(below, red, 0.002, rng) == Decision::Drop;
  CHECK(drops == 0);

  QueueState high;
  high.buffer = 1000;
  high.length = 200;
  for (int i = 0; i < 1000; ++i) CHECK(red_enqueue_decision(high, red, 1.0, rng) == Decision::Drop);

  QueueState full;
  full.buffer = 10;
  full.length = 10;
  CHECK(red_enqueue_decision(full, red, 1.0, rng) == Decision::Drop);

  QueueState mid;
  mid.buffer = 1000;
  mid.length = 75;
  const int n = 100000;
  drops = 0;
  for (int i = 0; i < n; ++i) drops += red_enqueue_decision(mid, red, 1.0, rng) == Decision::Drop;
  const double p = red.p_max / 2;
  const double sigma = std::sqrt(n * p * (1 - p));
  CHECK(std::abs(drops - n * p) <= 3 * sigma);
  CHECK(mid.dropped == static_cast<std::uint64_t>(drops));
  CHECK(mid.admitted + mid.dropped == static_cast<std::uint64_t>(n));
}

TEST_CASE("RED average decays over idle time") {
  std::mt19937_64 rng(5);
  RedParams red{1e-4, 50.0, 100.0, 0.1};
  QueueState q;
  q.buffer = 100;
  q.avg = 80.0;
  q.idle_slots = 100.0;
  red_enqueue_decision(q, red, 0.01, rng);
  CHECK(q.avg == doctest::Approx(80.0 * std::pow(0.99, 101.0)).epsilon(1e-12));
}

TEST_CASE("threshold and drop-tail decisions") {
  QueueState q;
  q.buffer = 100;
  q.length = 14;
  CHECK(threshold_enqueue_decision(q, 15.0) == Decision::Admit);
  q.length = 15;
  CHECK(threshold_enqueue_decision(q, 15.0) == Decision::Drop);
  q.length = 99;
  CHECK(droptail_enqueue_decision(q) == Decision::Admit);
  q.length = 100;
  CHECK(droptail_enqueue_decision(q) == Decision::Drop);
  q.length = 50;
  CHECK(threshold_enqueue_decision(q, 200.0) == Decision::Admit);
}

TEST_CASE("single Reno flow fills the bottleneck") {
  const SimConfig c = single_flow(FlowProtocol::Reno, 10e6, 2000, 0.05);
  const Metrics m = run_simulation(c);
  CHECK(m.throughput_bps == doctest::Approx(10e6).epsilon(0.1));
  CHECK(m.mean_util_pct <= 100.0 + 1e-9);
  CHECK(m.links[0].drops > 0);
}

TEST_CASE("uncontended transfer completes within the slow-start bound") {
  SimConfig c = single_flow(FlowProtocol::Reno, 10e6, 2000, 0.05);
  const double bytes = 1.5e6;
  c.flows[0].bytes_to_send = bytes;
  c.flows[0].start_time = 1.0;
  c.stop_when_sized_flows_done = true;
  const Metrics m = run_simulation(c);
  const double afct = compute_afct(m);
  const double transfer = bytes * 8.0 / c.bottleneck_capacity;
  const double rounds = std::ceil(std::log2(bytes / c.packet_size)) + 2.0;
  CHECK(afct >= transfer);
  CHECK(afct <= transfer + rounds * 0.05);
  REQUIRE(m.flows[0].completion.has_value());
  CHECK(afct == doctest::Approx(*m.flows[0].completion - m.flows[0].start));
  CHECK(m.links[0].drops == 0);
}

TEST_CASE("AFCT lists stragglers") {
  SimConfig c = single_flow(FlowProtocol::Reno, 10e6, 2000, 0.05);
  c.flows[0].bytes_to_send = 1e12;
  c.duration = 2.0;
  c.metrics_window = 1.0;
  const Metrics m = run_simulation(c);
  try {
    compute_afct(m);
    FAIL("expected ConsistencyError");
  } catch (const ConsistencyError& e) {
    CHECK(std::string(e.what()).find('0') != std::string::npos);
  }
}

TEST_CASE("conservation per queue") {
  std::vector<SimConfig> configs;
  configs.push_back(short_desk(0.01, red_queue(50, 100), 1, 15.0));
  configs.push_back(short_desk(0.2, threshold_queue(15), 2, 15.0));
  SimConfig dt = short_desk(0.05, QueueConfig{QueuePolicy::DropTail}, 3, 15.0);
  dt.buffer = 30;
  configs.push_back(dt);
  SimConfig lot = short_desk(0.05, red_queue(20, 60), 4, 15.0);
  lot.topology = Topology::ParkingLot;
  configs.push_back(lot);
  SimConfig mixed = short_desk(0.05, red_queue(20, 60), 5, 15.0);
  mixed.flows[0].protocol = FlowProtocol::Udp;
  mixed.flows[1].protocol = FlowProtocol::Cubic;
  mixed.flows[2].protocol = FlowProtocol::Http;
  mixed.flows[2].bytes_to_send = 15000.0;
  configs.push_back(mixed);
  for (const SimConfig& c : configs) {
    const Metrics m = run_simulation(c);
    REQUIRE_FALSE(m.links.empty());
    for (const LinkCounters& l : m.links) CHECK(l.arrivals == l.departures + l.drops + l.final_occupancy);
    CHECK(m.mean_util_pct <= 100.0 + 1e-9);
    for (const auto& u : m.util) CHECK(u.utilization_pct <= 100.0 + 1e-9);
  }
}

TEST_CASE("identical seeds give identical metrics") {
  const SimConfig c = short_desk(0.05, red_queue(50, 100), 7, 10.0);
  const Metrics a = run_simulation(c), b = run_simulation(c);
  CHECK(a.events == b.events);
  CHECK(a.links[0].drops == b.links[0].drops);
  CHECK(a.loss_pct == b.loss_pct);
  CHECK(a.sync_index == b.sync_index);
  REQUIRE(a.queue.size() == b.queue.size());
  bool same = true;
  for (std::size_t i = 0; i < a.queue.size(); ++i)
    same = same && a.queue[i].q == b.queue[i].q && a.queue[i].avg_q == b.queue[i].avg_q;
  CHECK(same);
  REQUIRE(a.windows.size() == b.windows.size());
  for (std::size_t i = 0; i < a.windows.size(); ++i) same = same && a.windows[i].window == b.windows[i].window;
  CHECK(same);
  SimConfig other = c;
  other.seed = 8;
  CHECK(run_simulation(other).events != a.events);
}

TEST_CASE("threshold queue never exceeds its limit") {
  for (double rtt : {0.01, 0.1, 0.2}) {
    for (double qth : {5.0, 15.0, 40.0}) {
      const Metrics m = run_simulation(short_desk(rtt, threshold_queue(qth), 1, 15.0));
      CHECK(m.links[0].max_length <= qth);
      for (const auto& s : m.queue) CHECK(s.q <= qth);
    }
  }
}

TEST_CASE("halving the bottleneck never raises throughput") {
  for (std::uint64_t seed : {1, 2}) {
    SimConfig c = short_desk(0.05, red_queue(50, 100), seed, 20.0);
    const double full = run_simulation(c).throughput_bps;
    c.bottleneck_capacity /= 2;
    CHECK(run_simulation(c).throughput_bps <= full);
  }
}

TEST_CASE("instantaneous RED oscillates less than averaged RED at long delay") {
  double avg = 0.0, inst = 0.0;
  for (std::uint64_t seed : {1, 2}) {
    avg += run_simulation(short_desk(0.2, red_queue(50, 100, 0.002), seed, 60.0)).queue_peak_to_peak;
    inst += run_simulation(short_desk(0.2, red_queue(50, 100, 1.0), seed, 60.0)).queue_peak_to_peak;
  }
  CHECK(inst < avg);
}

TEST_CASE("invalid configurations are rejected") {
  SimConfig c = single_flow(FlowProtocol::Reno, 10e6, 100, 0.05);
  c.bottleneck_capacity = 0.0;
  CHECK_THROWS_AS(run_simulation(c), ConfigError);
  c = single_flow(FlowProtocol::Reno, 10e6, 100, 0.05);
  c.max_pending_events = 3;
  CHECK_THROWS_AS(run_simulation(c), ConfigError);
}

TEST_CASE("scenario text round trip and errors") {
  const SimConfig c = short_desk(0.05, red_queue(40, 90, 0.01), 9, 33.0);
  std::stringstream a;
  write_scenario(a, c);
  std::stringstream in(a.str());
  const SimConfig back = parse_scenario(in);
  std::stringstream b;
  write_scenario(b, back);
  CHECK(a.str() == b.str());
  CHECK(back.duration == 33.0);
  CHECK(back.queue.red.b_min == 40.0);
  CHECK(back.flows.size() == c.flows.size());

  std::stringstream bad("duration = 10\nbogus_key = 3\n");
  CHECK_THROWS_AS(parse_scenario(bad), ConfigError);
  std::stringstream bad_value("duration = ten\n");
  CHECK_THROWS_AS(parse_scenario(bad_value), ConfigError);
  CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.txt"), ConfigError);
  CHECK(parse_profile("desk") == Profile::Desk);
  CHECK_THROWS_AS(parse_profile("huge"), ConfigError);
}

TEST_CASE("desk profile shape") {
  const SimConfig c = dumbbell_profile(Profile::Desk, 0.01, red_queue(50, 100), 1);
  CHECK(c.flows.size() == 20);
  CHECK(c.bottleneck_capacity == 25e6);
  CHECK(c.duration == 120.0);
  CHECK(c.buffer == 521);
  const SimConfig p = dumbbell_profile(Profile::Paper, 0.01, red_queue(50, 100), 1);
  CHECK(p.flows.size() == 60);
  CHECK(p.buffer == 2083);
}
