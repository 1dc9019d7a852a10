#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cclab/protocol.hpp"

namespace cclab::sim {

enum class Topology { Dumbbell, ParkingLot };
// Http is a generator: Poisson arrivals of short Reno transfers.
enum class FlowProtocol { Compound, Reno, Cubic, Udp, Http };
enum class QueuePolicy { Red, Threshold, DropTail };

std::string protocol_name(FlowProtocol p);
std::string policy_name(QueuePolicy p);
std::string topology_name(Topology t);

struct FlowSpec {
  FlowProtocol protocol = FlowProtocol::Compound;
  double access_rate = 2e6;       // bits/s
  double rtt_propagation = 0.1;   // seconds, split evenly between data and ack paths
  double start_time = 0.0;
  // Transfer size; unset means long-lived. For Http, the size of each transfer.
  std::optional<double> bytes_to_send;
};

struct QueueConfig {
  QueuePolicy policy = QueuePolicy::Red;
  RedParams red{};   // gamma is not used at packet level
  double w_q = 0.002;
  double q_th = 15.0;
};

struct CompoundTuning {
  CompoundParams params{};
  double gamma_tilde = 30.0;
  double zeta = 0.5;
};

struct SimConfig {
  Topology topology = Topology::Dumbbell;
  double bottleneck_capacity = 25e6;  // bits/s
  int buffer = 521;                   // packets
  int packet_size = 1500;             // bytes
  std::vector<FlowSpec> flows;
  QueueConfig queue{};
  double duration = 120.0;
  std::uint64_t seed = 1;
  double sample_interval = 0.1;
  // Summary metrics cover the trailing window of this length.
  double metrics_window = 25.0;
  // Skip slow start; flows begin in congestion avoidance with cwnd = 1.
  bool start_in_congestion_avoidance = false;
  // End the run once every sized long-lived flow has completed.
  bool stop_when_sized_flows_done = false;
  CompoundTuning compound{};
  double http_arrival_rate = 50.0;  // transfers per second per Http generator
  std::size_t max_pending_events = 50'000'000;

  void validate() const;
};

// Per-flow window state shared by the TCP variants.
struct TcpWindow {
  double cwnd = 1.0;
  double dwnd = 0.0;
  double ssthresh = 1e300;
  double base_rtt = 1e300;
  bool slow_start = true;
  // CUBIC
  double w_max = 0.0;
  double epoch_start = -1.0;
  double k_cubic = 0.0;
  double origin = 0.0;

  double window() const { return cwnd + dwnd; }
};

void compound_on_ack(TcpWindow& w, double rtt_sample, const CompoundTuning& t);
void compound_on_loss(TcpWindow& w, const CompoundTuning& t);
void reno_on_ack(TcpWindow& w, double rtt_sample);
void reno_on_loss(TcpWindow& w);
void cubic_on_ack(TcpWindow& w, double now, double rtt_sample);
void cubic_on_loss(TcpWindow& w);

enum class Decision { Admit, Drop };

struct QueueState {
  int length = 0;      // packets at the link, including the one in service
  double avg = 0.0;    // EWMA of length, updated on arrivals
  int buffer = 1;
  // Transmission slots the link sat idle before this arrival; the EWMA decays
  // by (1 - w_q)^idle_slots as if that many empty-queue arrivals occurred.
  double idle_slots = 0.0;
  std::uint64_t admitted = 0;
  std::uint64_t dropped = 0;
};

// Updates the EWMA, then drops with probability red_drop_probability(avg).
// A full buffer always drops.
Decision red_enqueue_decision(QueueState& q, const RedParams& red, double w_q, std::mt19937_64& rng);
// Drops once the queue holds q_th packets (or the buffer is full).
Decision threshold_enqueue_decision(QueueState& q, double q_th);
Decision droptail_enqueue_decision(QueueState& q);

struct QueueSample {
  double t, q, avg_q;
};
struct WindowSample {
  double t;
  int flow;
  double window;
};
struct UtilSample {
  double t, utilization_pct;
};

struct LinkCounters {
  std::uint64_t arrivals = 0;
  std::uint64_t departures = 0;
  std::uint64_t drops = 0;
  std::uint64_t final_occupancy = 0;
  int max_length = 0;
};

struct FlowResult {
  int id = 0;
  FlowProtocol protocol = FlowProtocol::Compound;
  bool generated = false;  // spawned by an Http generator
  double start = 0.0;
  std::optional<double> bytes;
  std::optional<double> completion;
  std::uint64_t delivered_packets = 0;
  std::uint64_t lost_packets = 0;
};

struct Metrics {
  std::vector<QueueSample> queue;     // first bottleneck
  std::vector<WindowSample> windows;  // long-lived TCP flows
  std::vector<UtilSample> util;       // first bottleneck
  std::vector<LinkCounters> links;
  std::vector<FlowResult> flows;

  double end_time = 0.0;
  double window_start = 0.0;
  // Over [window_start, end_time]:
  double loss_pct = 0.0;
  double throughput_bps = 0.0;
  double min_util_pct = 0.0;
  double mean_util_pct = 0.0;
  double mean_queueing_delay = 0.0;  // waiting time before service, seconds
  double mean_queue = 0.0;
  double queue_peak_to_peak = 0.0;
  double avg_in_band_fraction = 0.0;  // share of samples with b_min <= avg_q <= b_max
  // Var(mean window) / mean of per-flow window variances: about 1/N for
  // independent flows, 1 for perfectly aligned sawtooths.
  double sync_index = 0.0;
  std::uint64_t events = 0;

  void write_csv(const std::string& directory) const;
};

Metrics run_simulation(const SimConfig& config);

// Mean completion time of sized flows; throws ConsistencyError naming the
// flows that did not complete.
double compute_afct(const Metrics& m, bool include_generated = false);

}  // namespace cclab::sim
