#include "syneval/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "syneval/rng.hpp"

namespace syneval::stats {

namespace {

// Continued fraction for the incomplete beta (modified Lentz).
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kFpMin = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log(1.0 - x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
  if (!std::isfinite(t)) return 0.0;
  return incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

StatResult one_sample_t(const std::vector<double>& xs) {
  if (xs.size() < 2) throw std::invalid_argument("one_sample_t: need at least 2 observations");
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  StatResult r;
  r.test = "one-sample-t";
  r.mean = mean;
  r.n = static_cast<int>(xs.size());
  if (sd == 0.0) {
    r.statistic = mean == 0.0 ? 0.0 : std::numeric_limits<double>::infinity() * (mean > 0 ? 1 : -1);
    r.p = mean == 0.0 ? 1.0 : 0.0;
    return r;
  }
  r.statistic = mean / (sd / std::sqrt(n));
  r.p = student_t_two_sided_p(r.statistic, n - 1.0);
  return r;
}

StatResult sign_test(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("sign_test: empty sample");
  int pos = 0, neg = 0;
  double mean = 0.0;
  for (double x : xs) {
    mean += x;
    if (x > 0) ++pos;
    if (x < 0) ++neg;
  }
  StatResult r;
  r.test = "sign-test";
  r.mean = mean / static_cast<double>(xs.size());
  r.n = pos + neg;
  r.statistic = static_cast<double>(pos);
  if (r.n == 0) {
    r.p = 1.0;
    return r;
  }
  // two-sided exact binomial tail
  const int k = std::min(pos, neg);
  const double n = static_cast<double>(r.n);
  double tail = 0.0;
  for (int i = 0; i <= k; ++i) {
    const double logpmf = std::lgamma(n + 1.0) - std::lgamma(i + 1.0) -
                          std::lgamma(n - i + 1.0) - n * std::log(2.0);
    tail += std::exp(logpmf);
  }
  r.p = std::min(1.0, 2.0 * tail);
  return r;
}

std::pair<double, double> bootstrap_ci_mean(const std::vector<double>& xs, int resamples,
                                            double level, std::uint64_t seed) {
  if (xs.empty()) throw std::invalid_argument("bootstrap_ci_mean: empty sample");
  Rng rng(seed);
  std::vector<double> means;
  means.reserve(static_cast<std::size_t>(resamples));
  for (int b = 0; b < resamples; ++b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i)
      sum += xs[rng.next_below(xs.size())];
    means.push_back(sum / static_cast<double>(xs.size()));
  }
  std::sort(means.begin(), means.end());
  const double alpha = (1.0 - level) / 2.0;
  const auto at = [&](double q) {
    const double pos = q * static_cast<double>(resamples - 1);
    return means[static_cast<std::size_t>(std::llround(pos))];
  };
  return {at(alpha), at(1.0 - alpha)};
}

}  // namespace syneval::stats
