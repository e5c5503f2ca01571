#include <algorithm>

#include "sonder/analytics.hpp"
#include "sonder/error.hpp"

namespace sonder {

CompletenessCurve resample_curve(const CompletenessCurve& curve, std::size_t grid_points) {
  if (curve.points.size() < 2) throw Error(ErrorCode::EmptyInput, "curve has no results");
  if (grid_points < 2) throw Error(ErrorCode::InvalidInput, "grid needs at least 2 points");

  const auto& pts = curve.points;
  CompletenessCurve out;
  out.points.reserve(grid_points);
  std::size_t seg = 0;
  double sum = 0.0;
  for (std::size_t g = 0; g < grid_points; ++g) {
    const double x = g + 1 == grid_points ? 1.0 : static_cast<double>(g) / static_cast<double>(grid_points - 1);
    while (seg + 2 < pts.size() && pts[seg + 1].fraction_viewed < x) ++seg;
    const auto& a = pts[seg];
    const auto& b = pts[seg + 1];
    double value;
    if (x <= a.fraction_viewed) {
      value = a.value;
    } else if (x >= b.fraction_viewed) {
      value = b.value;
    } else {
      const double t = (x - a.fraction_viewed) / (b.fraction_viewed - a.fraction_viewed);
      value = a.value + t * (b.value - a.value);
    }
    out.points.push_back({x, value});
    if (g > 0) sum += value;
  }
  out.auc = sum / static_cast<double>(grid_points - 1);
  return out;
}

std::vector<RegionCurve> region_curves(std::span<const RegionCurveInput> inputs) {
  if (inputs.empty()) throw Error(ErrorCode::EmptyInput, "no curves to average");

  std::map<Region, std::pair<std::vector<double>, std::size_t>> sums;
  for (const auto& in : inputs) {
    const auto resampled = resample_curve(in.curve);
    auto& [acc, count] = sums[in.region];
    if (acc.empty()) acc.assign(kCurveGridPoints, 0.0);
    for (std::size_t g = 0; g < kCurveGridPoints; ++g) acc[g] += resampled.points[g].value;
    ++count;
  }

  std::vector<RegionCurve> out;
  for (const auto& [region, entry] : sums) {
    const auto& [acc, count] = entry;
    RegionCurve rc{region, {}, count};
    double sum = 0.0;
    for (std::size_t g = 0; g < kCurveGridPoints; ++g) {
      const double x = g + 1 == kCurveGridPoints ? 1.0 : static_cast<double>(g) / (kCurveGridPoints - 1);
      const double v = acc[g] / static_cast<double>(count);
      rc.curve.points.push_back({x, v});
      if (g > 0) sum += v;
    }
    rc.curve.auc = sum / static_cast<double>(kCurveGridPoints - 1);
    out.push_back(std::move(rc));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const RegionCurve& a, const RegionCurve& b) { return a.curve.auc < b.curve.auc; });
  return out;
}

}  // namespace sonder
