#pragma once

// Descriptive statistics and the two-sample tests used to compare error
// distributions between methods.

#include <span>
#include <vector>

namespace mvslam {

// Linear-interpolation quantile (numpy's default) of an ascending sequence.
double quantile_sorted(std::span<const double> sorted, double q);
double quantile(std::vector<double> samples, double q);

struct TTestResult {
  double t = 0.0;
  double p_value = 1.0;
  double df = 0.0;
  // Zero pooled variance with different means: t is +-inf and p is 0.
  bool degenerate = false;
};

// Pooled-variance Student t test, two-sided. Throws InvalidArgument when a
// sample has fewer than 2 values or contains non-finite values.
TTestResult two_sample_ttest(std::span<const double> a, std::span<const double> b);

// Two-sided p-value of Student's t distribution.
double student_t_two_sided_p(double t, double df);

struct FTestResult {
  // Larger sample variance over the smaller one.
  double f = 1.0;
  double p_value = 1.0;
  double df_numerator = 0.0;
  double df_denominator = 0.0;
  // At least one sample variance is zero.
  bool degenerate = false;
};

// F test for equal variances, two-sided.
FTestResult variance_equality_test(std::span<const double> a, std::span<const double> b);

struct NormalityCheck {
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  double jarque_bera = 0.0;
  // Asymptotic chi-squared(2) p-value of the Jarque-Bera statistic.
  double p_value = 1.0;
};

// Moment-based descriptive check; throws InvalidArgument for fewer than 3 samples.
NormalityCheck normality_check(std::span<const double> samples);

}  // namespace mvslam
