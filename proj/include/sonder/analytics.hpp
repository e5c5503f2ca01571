#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sonder/completeness.hpp"
#include "sonder/ingestion/records.hpp"
#include "sonder/stats.hpp"

namespace sonder {

enum class Region {
  EastAsiaPacific,
  EuropeCentralAsia,
  LatinAmericaCaribbean,
  MiddleEastNorthAfrica,
  NorthAmerica,
  SouthAsia,
};

inline constexpr std::array<Region, 6> kAllRegions{
    Region::EastAsiaPacific,       Region::EuropeCentralAsia, Region::LatinAmericaCaribbean,
    Region::MiddleEastNorthAfrica, Region::NorthAmerica,      Region::SouthAsia};

std::string_view to_string(Region region) noexcept;
Region parse_region(std::string_view text);
/// Built-in ISO alpha-2 to region table; nullopt for countries outside it.
std::optional<Region> region_of_country(std::string_view country);

// ---------------------------------------------------------------------------
// Aggregation

/// One scored query: first-page completeness on the 0-100 scale.
struct QueryObservation {
  std::string country;
  Region region = Region::NorthAmerica;
  Date date;
  double completeness = 0.0;
  std::uint64_t search_volume = 0;
};

struct GroupBy {
  bool country = false;
  bool region = false;
  bool date = false;
};

struct CountryDayAggregate {
  std::optional<std::string> country;
  std::optional<Region> region;
  std::optional<Date> date;
  double mean_completeness = 0.0;
  std::uint64_t search_volume = 0;
  std::size_t queries = 0;
};

/// Mean completeness and summed volume per group, groups in key order.
std::vector<CountryDayAggregate> aggregate(std::span<const QueryObservation> observations, GroupBy group_by);

/// Coarsens existing aggregates, weighting each by its query count. Grouping
/// (country, date) and then re-aggregating by country equals aggregating by
/// country directly.
std::vector<CountryDayAggregate> reaggregate(std::span<const CountryDayAggregate> aggregates, GroupBy group_by);

/// Cumulative completeness after min(page_size, N) results, on 0-100.
double first_page_completeness(const CompletenessCurve& curve, int page_size = 10);

// ---------------------------------------------------------------------------
// Regression

/// Categorical column absorbed as drop-first dummies (levels sorted).
struct FixedEffect {
  std::string name;
  std::vector<std::string> levels;
};

struct OlsOptions {
  bool intercept = true;
  std::vector<FixedEffect> fixed_effects;
  /// Per covariate column; empty means no column is standardized.
  std::vector<bool> standardize;
  /// HC1 instead of classical standard errors.
  bool robust_se = false;
  /// Label carried into the fit and exported tables.
  std::string outcome_name = "y";
};

struct Coefficient {
  std::string term;
  double estimate = 0.0;
  double std_error = 0.0;
  double t_value = 0.0;
  double p_value = 1.0;
};

struct RegressionFit {
  std::string outcome;
  std::vector<Coefficient> coefficients;  // intercept first, then covariates
  std::vector<std::string> fixed_effects;  // names of absorbed groups
  std::size_t absorbed_levels = 0;
  std::size_t n_obs = 0;
  std::size_t df_resid = 0;
  double r_squared = 0.0;
  bool robust_se = false;

  const Coefficient& at(std::string_view term) const;
  bool has(std::string_view term) const;
};

inline constexpr std::string_view kInterceptTerm = "(Intercept)";

/// Ordinary least squares through a column-pivoting Householder QR.
/// Throws RankDeficient naming the first column that is a linear combination
/// of earlier ones, and InvalidInput on NaN or too few observations.
RegressionFit ols_fit(const Eigen::Ref<const Eigen::MatrixXd>& covariates, std::span<const std::string> names,
                      const Eigen::Ref<const Eigen::VectorXd>& outcome, const OlsOptions& options = {});

struct TableExport {
  std::string csv;
  std::string text;
};

/// Roman numeral column labels I, II, III, ...
std::string roman(int n);

/// Long-form CSV (full precision, one row per model/term) and an aligned
/// text table with estimate/stars over (SE) rows, FE indicator rows and N.
TableExport export_table(std::span<const RegressionFit> fits, std::span<const std::string> labels = {},
                         const StarLegend& legend = kRegressionStars);

struct ParsedCoefficient {
  std::string model;
  std::string term;
  double estimate = 0.0;
  double std_error = 0.0;
  double p_value = 1.0;
  std::string stars;
};

std::vector<ParsedCoefficient> parse_regression_csv(std::string_view csv);

// ---------------------------------------------------------------------------
// Region curves

inline constexpr std::size_t kCurveGridPoints = 101;

/// Linear interpolation of a curve onto `grid_points` evenly spaced fractions.
/// auc of the result is the mean of the grid values after the origin.
CompletenessCurve resample_curve(const CompletenessCurve& curve, std::size_t grid_points = kCurveGridPoints);

struct RegionCurveInput {
  Region region;
  CompletenessCurve curve;
};

struct RegionCurve {
  Region region;
  CompletenessCurve curve;
  std::size_t n_curves = 0;
};

/// Pointwise mean of the resampled curves of each region, sorted by
/// ascending AUC.
std::vector<RegionCurve> region_curves(std::span<const RegionCurveInput> inputs);

// ---------------------------------------------------------------------------
// Country covariates

/// Country-year covariates loaded from CSV with header
/// `country,year,<name>,<name>...`; an optional `region` column overrides the
/// built-in country table.
struct CovariateTable {
  std::vector<std::string> names;
  std::map<std::pair<std::string, int>, std::vector<double>> rows;
  std::map<std::string, Region> regions;

  static CovariateTable load_csv(const std::filesystem::path& path);
  static CovariateTable parse_csv(std::string_view text);

  std::optional<double> value(std::string_view country, int year, std::string_view name) const;
  std::optional<Region> region(std::string_view country) const;
};

/// The five press-restriction specifications: press only; + search volume;
/// + GDP per capita and population; + date FE; + region FE. Continuous
/// covariates are standardized. Observations whose country-year is missing
/// from the table are dropped.
std::vector<RegressionFit> fit_press_models(std::span<const QueryObservation> observations,
                                            const CovariateTable& covariates);

}  // namespace sonder
