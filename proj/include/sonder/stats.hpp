#pragma once

#include <Eigen/Core>

#include <span>
#include <string>
#include <vector>

namespace sonder {

/// Significance thresholds, strongest first.
struct StarLegend {
  double three = 0.001;
  double two = 0.01;
  double one = 0.05;
};

/// Regression tables: *** p<0.001, ** p<0.01, * p<0.05.
inline constexpr StarLegend kRegressionStars{0.001, 0.01, 0.05};
/// Balance tables: *** p<0.01, ** p<0.05, * p<0.10.
inline constexpr StarLegend kBalanceStars{0.01, 0.05, 0.10};

std::string stars(double p_value, const StarLegend& legend = kRegressionStars);

/// Z-scores with the sample (n - 1) standard deviation.
/// Throws EmptyInput for n < 2 and DegenerateDistribution for zero variance.
std::vector<double> standardize(std::span<const double> values);
Eigen::VectorXd standardize(const Eigen::Ref<const Eigen::VectorXd>& values);

double mean(std::span<const double> values);
/// Sample variance, n - 1 denominator; 0 for a single value.
double sample_variance(std::span<const double> values);

/// Two-sided p-value of a t statistic with `df` degrees of freedom.
double two_sided_t_p(double t, double df);
/// Two-sided p-value under the standard normal.
double two_sided_normal_p(double z);

}  // namespace sonder
