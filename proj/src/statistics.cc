#include "mvslam/statistics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "mvslam/errors.h"

namespace mvslam {
namespace {

void require_samples(std::span<const double> s, std::size_t min_n, const char* what) {
  if (s.size() < min_n) throw InvalidArgument(std::string(what) + ": not enough samples");
  for (double v : s) {
    if (!std::isfinite(v)) throw InvalidArgument(std::string(what) + ": non-finite sample");
  }
}

double mean_of(std::span<const double> s) {
  return std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
}

// Unbiased sample variance.
double variance_of(std::span<const double> s, double mean) {
  double acc = 0.0;
  for (double v : s) acc += (v - mean) * (v - mean);
  return acc / static_cast<double>(s.size() - 1);
}

}  // namespace

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw InsufficientData("quantile of an empty sample");
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double quantile(std::vector<double> samples, double q) {
  std::sort(samples.begin(), samples.end());
  return quantile_sorted(samples, q);
}

double student_t_two_sided_p(double t, double df) {
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return 0.0;
  const boost::math::students_t_distribution<double> dist(df);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
}

TTestResult two_sample_ttest(std::span<const double> a, std::span<const double> b) {
  require_samples(a, 2, "t-test");
  require_samples(b, 2, "t-test");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double ma = mean_of(a), mb = mean_of(b);
  const double df = na + nb - 2.0;
  const double pooled = ((na - 1.0) * variance_of(a, ma) + (nb - 1.0) * variance_of(b, mb)) / df;
  TTestResult r;
  r.df = df;
  const double diff = ma - mb;
  if (pooled == 0.0) {
    if (diff == 0.0) return r;
    r.t = diff > 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    r.p_value = 0.0;
    r.degenerate = true;
    return r;
  }
  r.t = diff / std::sqrt(pooled * (1.0 / na + 1.0 / nb));
  r.p_value = student_t_two_sided_p(r.t, df);
  return r;
}

FTestResult variance_equality_test(std::span<const double> a, std::span<const double> b) {
  require_samples(a, 2, "F-test");
  require_samples(b, 2, "F-test");
  const double va = variance_of(a, mean_of(a));
  const double vb = variance_of(b, mean_of(b));
  const bool a_larger = va >= vb;
  FTestResult r;
  r.df_numerator = static_cast<double>((a_larger ? a.size() : b.size()) - 1);
  r.df_denominator = static_cast<double>((a_larger ? b.size() : a.size()) - 1);
  const double hi = a_larger ? va : vb, lo = a_larger ? vb : va;
  if (lo == 0.0) {
    r.degenerate = true;
    if (hi == 0.0) return r;
    r.f = std::numeric_limits<double>::infinity();
    r.p_value = 0.0;
    return r;
  }
  r.f = hi / lo;
  const boost::math::fisher_f_distribution<double> dist(r.df_numerator, r.df_denominator);
  r.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, r.f)));
  return r;
}

NormalityCheck normality_check(std::span<const double> samples) {
  require_samples(samples, 3, "normality check");
  const double n = static_cast<double>(samples.size());
  const double m = mean_of(samples);
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : samples) {
    const double d = v - m;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  NormalityCheck out;
  if (m2 == 0.0) return out;
  out.skewness = m3 / std::pow(m2, 1.5);
  out.excess_kurtosis = m4 / (m2 * m2) - 3.0;
  out.jarque_bera = n / 6.0 * (out.skewness * out.skewness + 0.25 * out.excess_kurtosis * out.excess_kurtosis);
  out.p_value = std::exp(-0.5 * out.jarque_bera);
  return out;
}

}  // namespace mvslam
