#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

namespace cclab {

struct BisectResult {
  double x = 0.0;
  double fx = 0.0;
  int iterations = 0;
};

// Bisection on a sign change of f over [lo, hi]. Iterates until the midpoint
// can no longer be separated from an endpoint or f vanishes exactly; stops
// early once hi - lo <= xtol. Throws BracketError without a sign change.
BisectResult bisect(const std::function<double(double)>& f, double lo, double hi,
                    double xtol = 0.0, int max_iter = 2000);

// Same but with f(lo), f(hi) already known.
BisectResult bisect(const std::function<double(double)>& f, double lo, double flo, double hi,
                    double fhi, double xtol = 0.0, int max_iter = 2000);

inline double relative_difference(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

}  // namespace cclab
