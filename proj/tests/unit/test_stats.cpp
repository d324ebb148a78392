#include <doctest.h>

#include <random>

#include "fovea/error.hpp"
#include "fovea/stats.hpp"
#include "../oracles.hpp"

using namespace fovea;

TEST_SUITE("stats") {

TEST_CASE("aggregate") {
  const std::vector<double> a{2, 4, 6};
  const auto s = aggregate(a);
  CHECK(s.mean == 4);
  CHECK(s.std == 2);
  CHECK(s.n == 3);
  const std::vector<double> one{5};
  CHECK(aggregate(one).std == 0);
  try {
    aggregate(std::vector<double>{});
    FAIL("expected EmptyInput");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEmptyInput);
  }
}

TEST_CASE("paired t-test worked example") {
  const std::vector<double> a{1, 2, 3}, b{0, 0, 0};
  const auto t = paired_t_test(a, b);
  CHECK(t.df == 2);
  REQUIRE(t.t);
  CHECK(*t.t == doctest::Approx(3.4641016).epsilon(1e-7));
  CHECK(*t.p_two_tailed == doctest::Approx(0.0741799).epsilon(1e-6));
}

TEST_CASE("paired t-test degenerate and mismatched") {
  const std::vector<double> a{1, 2, 3};
  const auto d = paired_t_test(a, a);
  CHECK(d.degenerate);
  CHECK_FALSE(d.t.has_value());
  CHECK_FALSE(d.p_two_tailed.has_value());
  const std::vector<double> shifted{2, 3, 4};
  CHECK(paired_t_test(shifted, a).degenerate);
  try {
    paired_t_test(a, std::vector<double>{1, 2});
    FAIL("expected LengthMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kLengthMismatch);
  }
}

TEST_CASE("pearson") {
  CHECK(pearson_r(std::vector<double>{1, 2, 3}, std::vector<double>{3, 5, 7}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(pearson_r(std::vector<double>{1, 2, 3}, std::vector<double>{-1, -2, -3}) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(std::abs(pearson_r(std::vector<double>{1, 2, 3, 4}, std::vector<double>{2, 1, 4, 3}) - 0.6) < 1e-12);
  try {
    pearson_r(std::vector<double>{1, 1}, std::vector<double>{1, 2});
    FAIL("expected ZeroVariance");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kZeroVariance);
  }
}

TEST_CASE("student t tail against Boost over a grid") {
  for (double df : {1.0, 2.0, 3.0, 5.0, 10.0, 29.0, 100.0, 1000.0})
    for (double t : {0.0, 0.1, 0.5, 1.0, 2.0, 3.5, 8.0, 30.0}) {
      const boost::math::students_t dist(df);
      const double ref = 2 * boost::math::cdf(boost::math::complement(dist, t));
      CHECK(std::abs(student_t_two_tailed(t, df) - ref) < 1e-12);
    }
}

TEST_CASE("random datasets against the long double oracle") {
  std::mt19937_64 rng(51);
  for (int c = 0; c < 50; ++c) {
    const int n = std::uniform_int_distribution<int>(2, 40)(rng);
    std::normal_distribution<double> x(std::uniform_real_distribution<double>(-5, 5)(rng), 2.0);
    std::vector<double> a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = x(rng);
      b[i] = 0.5 * a[i] + x(rng);
    }
    const auto s = aggregate(a);
    const auto o = oracle::mean_sd(a);
    CHECK(std::abs(s.mean - static_cast<double>(o.mean)) < 1e-9);
    CHECK(std::abs(s.std - static_cast<double>(o.sd)) < 1e-9);
    const auto t = paired_t_test(a, b);
    const auto ot = oracle::paired_t(a, b);
    REQUIRE(t.t);
    CHECK(std::abs(*t.t - static_cast<double>(ot.t)) < 1e-9);
    CHECK(std::abs(*t.p_two_tailed - ot.p) < 1e-6);
    CHECK(std::abs(pearson_r(a, b) - static_cast<double>(oracle::pearson(a, b))) < 1e-9);
  }
}

}  // TEST_SUITE
