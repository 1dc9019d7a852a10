#pragma once

#include <stdexcept>
#include <string>

namespace cclab {

// Invalid argument outside a function's mathematical domain.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// A root solve or iteration failed to converge.
struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bisection bracket does not contain a sign change.
struct BracketError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Two independent computations of the same quantity disagree.
struct ConsistencyError : std::logic_error {
  using std::logic_error::logic_error;
};

// Singular system or vanishing denominator at a bifurcation point.
struct DegenerateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IntegrationError : std::runtime_error {
  IntegrationError(const std::string& what, double t)
      : std::runtime_error(what + " at t=" + std::to_string(t)), time(t) {}
  double time;
};

// Bad configuration: unknown key, malformed value, nonsensical parameter.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace cclab
