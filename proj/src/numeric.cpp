#include "cclab/numeric.hpp"

#include "cclab/errors.hpp"

namespace cclab {

BisectResult bisect(const std::function<double(double)>& f, double lo, double hi, double xtol,
                    int max_iter) {
  return bisect(f, lo, f(lo), hi, f(hi), xtol, max_iter);
}

BisectResult bisect(const std::function<double(double)>& f, double lo, double flo, double hi,
                    double fhi, double xtol, int max_iter) {
  if (flo == 0.0) return {lo, flo, 0};
  if (fhi == 0.0) return {hi, fhi, 0};
  if (!(std::isfinite(flo) && std::isfinite(fhi)) || (flo < 0.0) == (fhi < 0.0))
    throw BracketError("no sign change in bracket");
  int it = 0;
  for (; it < max_iter; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= std::min(lo, hi) || mid >= std::max(lo, hi)) break;
    if (std::abs(hi - lo) <= xtol) break;
    const double fm = f(mid);
    if (fm == 0.0) return {mid, fm, it + 1};
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
      fhi = fm;
    }
  }
  // Report the endpoint with the smaller residual.
  if (std::abs(flo) <= std::abs(fhi)) return {lo, flo, it};
  return {hi, fhi, it};
}

}  // namespace cclab
