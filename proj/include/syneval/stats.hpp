#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace syneval::stats {

// Regularized incomplete beta I_x(a, b) via Lentz's continued fraction.
double incomplete_beta(double a, double b, double x);

// Two-sided p-value of Student's t with df degrees of freedom.
double student_t_two_sided_p(double t, double df);

struct StatResult {
  std::string test;  // one-sample-t | sign-test | bootstrap
  double statistic = 0.0;
  double p = 1.0;
  double mean = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  int n = 0;
};

// Two-sided one-sample t-test against zero. Zero sample variance is guarded:
// p = 1 when the common value is 0, p -> 0 otherwise. n < 2 is an error.
StatResult one_sample_t(const std::vector<double>& xs);

// Exact two-sided sign test against a median of zero (zeros dropped).
StatResult sign_test(const std::vector<double>& xs);

// Percentile bootstrap CI of the mean; deterministic under `seed`.
std::pair<double, double> bootstrap_ci_mean(const std::vector<double>& xs, int resamples,
                                            double level, std::uint64_t seed);

}  // namespace syneval::stats
