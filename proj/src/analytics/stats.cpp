#include "sonder/stats.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <limits>
#include <numeric>

#include "sonder/error.hpp"

namespace sonder {

std::string stars(double p, const StarLegend& legend) {
  if (!(p >= 0.0)) return "";
  if (p < legend.three) return "***";
  if (p < legend.two) return "**";
  if (p < legend.one) return "*";
  return "";
}

double mean(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "mean of no values");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double sample_variance(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return ss / static_cast<double>(values.size() - 1);
}

std::vector<double> standardize(std::span<const double> values) {
  if (values.size() < 2) throw Error(ErrorCode::EmptyInput, "standardize needs at least 2 values");
  const double m = mean(values);
  const double sd = std::sqrt(sample_variance(values));
  if (!(sd > 0.0) || sd < 1e-300) {
    throw Error(ErrorCode::DegenerateDistribution, "standardize of a constant sequence");
  }
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) out.push_back((v - m) / sd);
  // A second centering pass removes the rounding residue of the first.
  const double residue = mean(out);
  for (double& v : out) v -= residue;
  return out;
}

Eigen::VectorXd standardize(const Eigen::Ref<const Eigen::VectorXd>& values) {
  const auto z = standardize(std::span<const double>(values.data(), static_cast<std::size_t>(values.size())));
  return Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
}

double two_sided_t_p(double t, double df) {
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return 0.0;
  if (!(df > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  const boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

double two_sided_normal_p(double z) {
  if (std::isnan(z)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(z)) return 0.0;
  const boost::math::normal dist;
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(z)));
}

}  // namespace sonder
