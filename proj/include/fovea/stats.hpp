#pragma once

#include <cstddef>
#include <optional>
#include <span>

namespace fovea {

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1); 0 when n == 1
  std::size_t n = 0;
};

Aggregate aggregate(std::span<const double> values);

struct TTestResult {
  std::size_t n = 0;
  int df = 0;
  double mean_diff = 0.0;
  std::optional<double> t;             // absent when degenerate
  std::optional<double> p_two_tailed;  // absent when degenerate
  bool degenerate = false;             // all differences identical
};

// Student's paired t-test on a - b.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

double pearson_r(std::span<const double> x, std::span<const double> y);

// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

// P(|T| >= |t|) for Student's t with `df` degrees of freedom.
double student_t_two_tailed(double t, double df);

}  // namespace fovea
