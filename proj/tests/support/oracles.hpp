#pragma once

// Independent reference computations used by the unit and acceptance tests.
// Nothing here calls into the library's solvers.

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <utility>
#include <vector>

namespace oracle {

using cplx = std::complex<double>;

// Plain bisection; f(lo) and f(hi) must differ in sign.
inline double bisect(const std::function<double(double)>& f, double lo, double hi) {
  double flo = f(lo);
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Equilibrium of a power-law protocol under RED: p = a w^(k-2) / (a w^(k-2) + b),
// w = C tau / (1 - p). Returns {w, p}.
inline std::pair<double, double> power_law_equilibrium(double alpha, double k, double beta, double c,
                                                       double tau) {
  auto g = [&](double p) {
    const double w = c * tau / (1.0 - p);
    const double a = alpha * std::pow(w, k - 2.0);
    return p - a / (a + beta);
  };
  const double p = bisect(g, 1e-300, 1.0 - 1e-15);
  return {c * tau / (1.0 - p), p};
}

// Gauss-Legendre nodes and weights on [-1, 1].
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& wt) {
  x.assign(n, 0.0);
  wt.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int j = 2; j <= n; ++j) {
        const double p2 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = z;
    wt[i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

inline cplx integrate(const std::function<cplx(double)>& f, double a, double b, int n = 64) {
  std::vector<double> x, wt;
  gauss_legendre(n, x, wt);
  cplx s = 0.0;
  for (int i = 0; i < n; ++i) s += wt[i] * f(0.5 * (b - a) * x[i] + 0.5 * (a + b));
  return 0.5 * (b - a) * s;
}

// Mixed partial derivative by nested fourth-order central differences.
// orders[j] is the derivative order in variable j, h[j] its step.
inline double mixed_partial(const std::function<double(const std::vector<double>&)>& f,
                            std::vector<double> x, std::vector<int> orders,
                            const std::vector<double>& h) {
  std::size_t j = 0;
  while (j < orders.size() && orders[j] == 0) ++j;
  if (j == orders.size()) return f(x);
  --orders[j];
  static constexpr std::array<double, 4> off{-2, -1, 1, 2};
  static constexpr std::array<double, 4> cw{1, -8, 8, -1};
  double s = 0.0;
  const double x0 = x[j];
  for (int i = 0; i < 4; ++i) {
    x[j] = x0 + off[i] * h[j];
    s += cw[i] * mixed_partial(f, x, orders, h);
  }
  return s / (12.0 * h[j]);
}

// Bivariate series in (z, zbar) truncated at total degree 3.
struct Series {
  std::array<std::array<cplx, 4>, 4> c{};  // c[i][j]: coefficient of z^i zbar^j

  static Series constant(cplx v) {
    Series s;
    s.c[0][0] = v;
    return s;
  }
  cplx& operator()(int i, int j) { return c[i][j]; }
  cplx operator()(int i, int j) const { return c[i][j]; }
};

inline Series operator+(const Series& a, const Series& b) {
  Series r;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; i + j < 4; ++j) r.c[i][j] = a.c[i][j] + b.c[i][j];
  return r;
}

inline Series operator*(const Series& a, const Series& b) {
  Series r;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; i + j < 4; ++j)
      for (int k = 0; i + j + k < 4; ++k)
        for (int l = 0; i + j + k + l < 4; ++l) r.c[i + k][j + l] += a.c[i][j] * b.c[k][l];
  return r;
}

inline Series operator*(cplx s, const Series& a) {
  Series r;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; i + j < 4; ++j) r.c[i][j] = s * a.c[i][j];
  return r;
}

// z a + zbar b + z^2/2 c + z zbar d
inline Series expansion(cplx a, cplx b, cplx c20, cplx c11) {
  Series s;
  s(1, 0) = a;
  s(0, 1) = b;
  s(2, 0) = 0.5 * c20;
  s(1, 1) = c11;
  return s;
}

}  // namespace oracle
