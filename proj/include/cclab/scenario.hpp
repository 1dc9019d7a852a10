#pragma once

#include <iosfwd>
#include <string>

#include "cclab/packet_sim.hpp"

namespace cclab::sim {

// Flat "key = value" scenario text. Blank lines and lines starting with '#'
// are ignored; unknown keys throw ConfigError.
SimConfig parse_scenario(std::istream& in);
SimConfig load_scenario(const std::string& path);
void write_scenario(std::ostream& out, const SimConfig& config);

enum class Profile { Desk, Paper };
Profile parse_profile(const std::string& name);

// Dumbbell of long-lived Compound flows whose access links together offer
// 120% of the bottleneck rate, with starts drawn uniformly from [0, 10) s.
// Desk: 20 flows, 25 Mbps, 120 s. Paper: 60 flows, 100 Mbps, 500 s.
// The buffer is the 250 ms bandwidth-delay product.
SimConfig dumbbell_profile(Profile profile, double rtt, const QueueConfig& queue, std::uint64_t seed);

}  // namespace cclab::sim
