#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "cclab/errors.hpp"
#include "cclab/protocol.hpp"
#include "doctest.h"

using namespace cclab;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

double central(const ProtocolSpec& s, double w, int order, bool increase) {
  const double h = 1e-5 * w;
  auto f = [&](double x) { return increase ? increase_rate(s, x, order - 1) : decrease_rate(s, x, order - 1); };
  return (-f(w + 2 * h) + 8 * f(w + h) - 8 * f(w - h) + f(w - 2 * h)) / (12 * h);
}

}  // namespace

TEST_CASE("increase and decrease rates at known points") {
  const auto cmp = ProtocolSpec::compound();
  CHECK(increase_rate(cmp, 1.0) == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(increase_rate(ProtocolSpec::reno(), 2.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(decrease_rate(cmp, 10.0) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(decrease_rate(cmp, 10.0, 1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(decrease_rate(ProtocolSpec::reno(), 10.0) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(decrease_rate(ProtocolSpec::illinois({10.0, 0.125}), 8.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(rel(increase_rate(cmp, 8.0, 1), central(cmp, 8.0, 1, true)) < 1e-6);
}

TEST_CASE("rates reject bad windows and orders") {
  const auto cmp = ProtocolSpec::compound();
  CHECK_THROWS_AS(increase_rate(cmp, 0.0), DomainError);
  CHECK_THROWS_AS(decrease_rate(cmp, -1.0), DomainError);
  CHECK_THROWS_AS(increase_rate(cmp, 1.0, 4), std::invalid_argument);
  CHECK_THROWS_AS(ProtocolSpec::compound({0.125, 1.0, 0.5}), DomainError);
  CHECK_THROWS_AS(ProtocolSpec::compound({-1.0, 0.5, 0.5}), DomainError);
  CHECK_THROWS_AS(ProtocolSpec::illinois({1.0, 1.5}), DomainError);
}

TEST_CASE("analytic derivatives match finite differences on [1, 1000]") {
  const ProtocolSpec specs[] = {ProtocolSpec::compound(), ProtocolSpec::compound({0.3, 0.4, 0.2}),
                                ProtocolSpec::reno(), ProtocolSpec::illinois()};
  for (const auto& s : specs) {
    for (double w = 1.0; w <= 1000.0; w *= 1.7) {
      for (int order = 1; order <= 3; ++order) {
        CAPTURE(s.name());
        CAPTURE(w);
        CAPTURE(order);
        CHECK(rel(increase_rate(s, w, order), central(s, w, order, true)) < 1e-5);
      }
      CHECK(rel(decrease_rate(s, w, 1), central(s, w, 1, false)) < 1e-5);
      CHECK(std::abs(decrease_rate(s, w, 2)) < 1e-12);
    }
  }
}

TEST_CASE("Africa rates are defined only where b lies in (0, 2)") {
  const auto af = ProtocolSpec::africa();
  CHECK_FALSE(af.power_law().has_value());
  const auto dom = window_domain(af);
  CHECK(africa_b(38.0) == doctest::Approx(0.5));
  CHECK(africa_b(83000.0) == doctest::Approx(0.1));
  CHECK(africa_in_domain(0.5 * (dom.lo + 38.0)));
  CHECK_FALSE(africa_in_domain(dom.lo * 0.9));
  CHECK_FALSE(africa_in_domain(dom.hi * 1.1));
  CHECK_THROWS_AS(increase_rate(af, dom.hi * 1.1), DomainError);
  for (double w : {40.0, 500.0, 5000.0, 50000.0}) {
    const double b = africa_b(w);
    const double a = 0.156 * std::pow(w, 0.8) * b / (2.0 - b);
    CHECK(rel(increase_rate(af, w), a / w) < 1e-13);
    CHECK(rel(decrease_rate(af, w), b * w) < 1e-13);
    for (int order = 1; order <= 3; ++order) {
      CAPTURE(w);
      CAPTURE(order);
      CHECK(rel(increase_rate(af, w, order), central(af, w, order, true)) < 1e-5);
    }
    CHECK(rel(decrease_rate(af, w, 1), central(af, w, 1, false)) < 1e-5);
  }
}

TEST_CASE("Reno equals Compound(1, 0, 1/2) exactly") {
  const auto reno = ProtocolSpec::reno();
  const auto cmp = ProtocolSpec::compound({1.0, 0.0, 0.5});
  for (double w = 0.5; w < 2000.0; w *= 1.3) {
    for (int order = 0; order <= 3; ++order) {
      CHECK(increase_rate(reno, w, order) == increase_rate(cmp, w, order));
      CHECK(decrease_rate(reno, w, order) == decrease_rate(cmp, w, order));
    }
    CHECK(increase_rate(reno, w) == doctest::Approx(1.0 / w).epsilon(1e-15));
  }
}

TEST_CASE("RED drop probability branches") {
  const RedParams red;
  CHECK(red_drop_probability(50.0, red) == 0.0);
  CHECK(red_drop_probability(550.0, red) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(red_drop_probability(1100.0, red) == 1.0);
  CHECK(red_drop_probability(5000.0, red) == 1.0);
  CHECK(red_drop_probability(0.0, red) == 0.0);
  CHECK(red_drop_probability(300.0, red) == doctest::Approx(red.rho() * 250.0).epsilon(1e-15));
}

TEST_CASE("RED derived slopes") {
  const RedParams red;
  const auto s = red_derived_slopes(red);
  CHECK(s.rho == doctest::Approx(2e-4).epsilon(1e-12));
  CHECK(s.eta == doctest::Approx(16.36e-4).epsilon(5e-3));
  CHECK(s.eta == doctest::Approx(0.9 / 550.0).epsilon(1e-15));
  RedParams r2{1e-4, 50.0, 100.0, 0.5};
  const auto s2 = red_derived_slopes(r2);
  CHECK(s2.rho == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(s2.eta == doctest::Approx(0.005).epsilon(1e-15));
  RedParams bad{1e-4, 100.0, 50.0, 0.1};
  CHECK_THROWS_AS(red_derived_slopes(bad), DomainError);
  CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("RED probability is continuous and monotone (property)") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    RedParams red;
    red.b_min = 1.0 + 200.0 * u(rng);
    red.b_max = red.b_min + 1.0 + 800.0 * u(rng);
    red.p_max = 0.01 + 0.98 * u(rng);
    for (double bp : {red.b_min, red.b_max, 2.0 * red.b_max}) {
      const double left = red_drop_probability(std::nextafter(bp, 0.0), red);
      const double right = red_drop_probability(std::nextafter(bp, 1e300), red);
      CHECK(std::abs(left - right) < 1e-12);
    }
    std::uniform_real_distribution<double> q(0.0, 2.5 * red.b_max);
    for (int i = 0; i < 50; ++i) {
      double a = q(rng), b = q(rng);
      if (a > b) std::swap(a, b);
      CHECK(red_drop_probability(a, red) <= red_drop_probability(b, red));
    }
  }
}

TEST_CASE("threshold drop probability") {
  NetworkParams net;
  net.c_per_flow = 100.0;
  net.rtt = 1.0;
  ThresholdParams th{39.0};
  CHECK(threshold_drop_probability(100.0, net, th) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(threshold_drop_probability(150.0, net, th) == 1.0);
  CHECK(threshold_drop_probability(50.0, net, ThresholdParams{1.0}) == doctest::Approx(0.5).epsilon(1e-15));
  double ref = 1.0;
  for (int i = 0; i < 39; ++i) ref *= 0.8;
  CHECK(rel(threshold_drop_probability(80.0, net, th), ref) < 1e-8);
  CHECK(ref == doctest::Approx(1.69e-4).epsilon(0.01));
  const double h = 1e-5;
  const double fd = (threshold_drop_probability(80.0 + h, net, th) - threshold_drop_probability(80.0 - h, net, th)) / (2 * h);
  CHECK(rel(threshold_drop_probability_slope(80.0, net, th), fd) < 1e-6);
  CHECK(threshold_drop_probability_slope(120.0, net, th) == 0.0);
}
