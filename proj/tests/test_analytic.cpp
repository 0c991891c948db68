#include <doctest.h>

#include <cmath>

#include "upfcache/analytic_model.hpp"

using namespace upfcache::analytic;

// Reference values computed independently with 40-digit arithmetic.
TEST_CASE("expected leakage closed form") {
  CHECK(expected_leakage(10, 10) == doctest::Approx(3.486784401).epsilon(1e-12));
  CHECK(expected_leakage(5, 3) == doctest::Approx(2.3950617283950617).epsilon(1e-12));
  CHECK(expected_leakage(200, 100) == doctest::Approx(113.3979674857962).epsilon(1e-12));
  CHECK(expected_leakage(2, 2) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(expected_leakage(1, 5) == 0.0);
  CHECK(expected_leakage(0, 5) == 0.0);
  CHECK(expected_leakage(1000, 50) == doctest::Approx(950.00000008414837).epsilon(1e-12));
}

TEST_CASE("leakage ratio and empty-bin fraction") {
  CHECK(leakage_ratio(98304, 98304) == doctest::Approx(0.36787757003191364).epsilon(1e-10));
  CHECK(leakage_ratio(3072, 98304) == doctest::Approx(0.015458573434810896).epsilon(1e-9));
  CHECK(empty_bin_fraction(98304, 98304) == doctest::Approx(0.36787757003191364).epsilon(1e-10));
  CHECK(empty_bin_fraction(3072, 98304) == doctest::Approx(0.96923308041983784).epsilon(1e-10));
  CHECK(empty_bin_fraction(0, 7) == 1.0);
  CHECK(empty_bin_fraction(3, 1) == 0.0);
  CHECK_THROWS(leakage_ratio(0, 10));
}

TEST_CASE("leakage is monotone in n and bounded") {
  double prev = -1.0;
  for (std::uint64_t n = 1; n <= 400; ++n) {
    const double e = expected_leakage(n, 100);
    CHECK(e >= prev);
    CHECK(e >= std::max(0.0, double(n) - 100.0) - 1e-9);
    CHECK(e <= double(n));
    prev = e;
  }
}

TEST_CASE("concentration bound") {
  CHECK(concentration_bound(98304, 0.01, std::exp(-1.0)) ==
        doctest::Approx(0.23079885245306269).epsilon(1e-9));
  CHECK(concentration_bound(98304, 0.01, empty_bin_fraction(98304, 98304)) ==
        doctest::Approx(0.23078839632030803).epsilon(1e-9));
  CHECK(concentration_bound(98304, 0.02, std::exp(-1.0)) ==
        doctest::Approx(5.7293369359000039e-13).epsilon(1e-8));
  CHECK_THROWS(concentration_bound(0, 0.1, 0.3));
  CHECK_THROWS(concentration_bound(10, -0.1, 0.3));
  CHECK_THROWS(concentration_bound(10, 0.1, 0.0));
}

TEST_CASE("descriptor footprint mapping") {
  CHECK(descriptor_footprint(4096, 1500, 64) == 98304);
  CHECK(descriptor_footprint(128, 1500, 64) == 3072);
  CHECK(descriptor_footprint(1, 64, 64) == 1);
  CHECK(descriptor_footprint(1, 65, 64) == 2);
  Footprint fp;
  auto p = LeakageParams::from_footprint(fp, 6ull << 20);
  CHECK(p.n_balls == 98304);
  CHECK(p.m_bins == 98304);
}

TEST_CASE("monte carlo is deterministic and close to the closed form") {
  auto a = monte_carlo_leakage(50, 40, 20000, 9);
  auto b = monte_carlo_leakage(50, 40, 20000, 9);
  CHECK(a.mean == b.mean);
  CHECK(a.trials == 20000);
  CHECK(std::abs(a.mean - expected_leakage(50, 40)) <= 4 * a.stderr_);
  auto c = monte_carlo_leakage(50, 40, 20000, 10);
  CHECK(c.mean != a.mean);
}

TEST_CASE("monte carlo degenerate cases") {
  auto one_bin = monte_carlo_leakage(5, 1, 10, 1);
  CHECK(one_bin.mean == 4.0);
  CHECK(one_bin.stderr_ == 0.0);
  auto single = monte_carlo_leakage(1, 10, 10, 1);
  CHECK(single.mean == 0.0);
  CHECK_THROWS(monte_carlo_leakage(1, 0, 10, 1));
  CHECK_THROWS(monte_carlo_leakage(1, 10, 0, 1));
}
