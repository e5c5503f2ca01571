#include <algorithm>
#include <map>
#include <tuple>

#include "sonder/analytics.hpp"
#include "sonder/error.hpp"

namespace sonder {

namespace {

struct RegionRow {
  std::string_view country;
  Region region;
};

// World Bank regional grouping, restricted to the six regions in use.
constexpr RegionRow kCountryRegions[] = {
    {"AU", Region::EastAsiaPacific},       {"CN", Region::EastAsiaPacific},
    {"HK", Region::EastAsiaPacific},       {"ID", Region::EastAsiaPacific},
    {"JP", Region::EastAsiaPacific},       {"KR", Region::EastAsiaPacific},
    {"MY", Region::EastAsiaPacific},       {"NZ", Region::EastAsiaPacific},
    {"PH", Region::EastAsiaPacific},       {"SG", Region::EastAsiaPacific},
    {"TH", Region::EastAsiaPacific},       {"TW", Region::EastAsiaPacific},
    {"VN", Region::EastAsiaPacific},       {"AT", Region::EuropeCentralAsia},
    {"BE", Region::EuropeCentralAsia},     {"CH", Region::EuropeCentralAsia},
    {"CZ", Region::EuropeCentralAsia},     {"DE", Region::EuropeCentralAsia},
    {"DK", Region::EuropeCentralAsia},     {"ES", Region::EuropeCentralAsia},
    {"FI", Region::EuropeCentralAsia},     {"FR", Region::EuropeCentralAsia},
    {"GB", Region::EuropeCentralAsia},     {"GR", Region::EuropeCentralAsia},
    {"HU", Region::EuropeCentralAsia},     {"IE", Region::EuropeCentralAsia},
    {"IT", Region::EuropeCentralAsia},     {"KZ", Region::EuropeCentralAsia},
    {"NL", Region::EuropeCentralAsia},     {"NO", Region::EuropeCentralAsia},
    {"PL", Region::EuropeCentralAsia},     {"PT", Region::EuropeCentralAsia},
    {"RO", Region::EuropeCentralAsia},     {"RU", Region::EuropeCentralAsia},
    {"SE", Region::EuropeCentralAsia},     {"TR", Region::EuropeCentralAsia},
    {"UA", Region::EuropeCentralAsia},     {"AR", Region::LatinAmericaCaribbean},
    {"BR", Region::LatinAmericaCaribbean}, {"CL", Region::LatinAmericaCaribbean},
    {"CO", Region::LatinAmericaCaribbean}, {"MX", Region::LatinAmericaCaribbean},
    {"PE", Region::LatinAmericaCaribbean}, {"VE", Region::LatinAmericaCaribbean},
    {"AE", Region::MiddleEastNorthAfrica}, {"DZ", Region::MiddleEastNorthAfrica},
    {"EG", Region::MiddleEastNorthAfrica}, {"IL", Region::MiddleEastNorthAfrica},
    {"IQ", Region::MiddleEastNorthAfrica}, {"JO", Region::MiddleEastNorthAfrica},
    {"MA", Region::MiddleEastNorthAfrica}, {"SA", Region::MiddleEastNorthAfrica},
    {"TN", Region::MiddleEastNorthAfrica}, {"CA", Region::NorthAmerica},
    {"US", Region::NorthAmerica},          {"BD", Region::SouthAsia},
    {"IN", Region::SouthAsia},             {"LK", Region::SouthAsia},
    {"NP", Region::SouthAsia},             {"PK", Region::SouthAsia},
};

using GroupKey = std::tuple<std::optional<std::string>, std::optional<Region>, std::optional<Date>>;

struct Accumulator {
  double weighted_sum = 0.0;
  std::uint64_t volume = 0;
  std::size_t queries = 0;
};

std::vector<CountryDayAggregate> finish(const std::map<GroupKey, Accumulator>& groups) {
  std::vector<CountryDayAggregate> out;
  out.reserve(groups.size());
  for (const auto& [key, acc] : groups) {
    CountryDayAggregate a;
    std::tie(a.country, a.region, a.date) = key;
    a.mean_completeness = acc.weighted_sum / static_cast<double>(acc.queries);
    a.search_volume = acc.volume;
    a.queries = acc.queries;
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace

std::string_view to_string(Region region) noexcept {
  switch (region) {
    case Region::EastAsiaPacific: return "East Asia & Pacific";
    case Region::EuropeCentralAsia: return "Europe & Central Asia";
    case Region::LatinAmericaCaribbean: return "Latin America & Caribbean";
    case Region::MiddleEastNorthAfrica: return "Middle East & North Africa";
    case Region::NorthAmerica: return "North America";
    case Region::SouthAsia: return "South Asia";
  }
  return "unknown";
}

Region parse_region(std::string_view text) {
  for (Region r : kAllRegions) {
    if (to_string(r) == text) return r;
  }
  if (text == "EAP") return Region::EastAsiaPacific;
  if (text == "ECA") return Region::EuropeCentralAsia;
  if (text == "LAC") return Region::LatinAmericaCaribbean;
  if (text == "MENA") return Region::MiddleEastNorthAfrica;
  if (text == "NA") return Region::NorthAmerica;
  if (text == "SA") return Region::SouthAsia;
  throw Error(ErrorCode::InvalidInput, "unknown region '" + std::string(text) + "'");
}

std::optional<Region> region_of_country(std::string_view country) {
  for (const auto& row : kCountryRegions) {
    if (row.country == country) return row.region;
  }
  return std::nullopt;
}

std::vector<CountryDayAggregate> aggregate(std::span<const QueryObservation> observations, GroupBy group_by) {
  if (observations.empty()) throw Error(ErrorCode::EmptyInput, "nothing to aggregate");
  std::map<GroupKey, Accumulator> groups;
  for (const auto& o : observations) {
    if (!(o.completeness >= 0.0 && o.completeness <= 100.0)) {
      throw Error(ErrorCode::InvalidInput, "completeness must lie on the 0-100 scale");
    }
    GroupKey key{group_by.country ? std::optional(o.country) : std::nullopt,
                 group_by.region ? std::optional(o.region) : std::nullopt,
                 group_by.date ? std::optional(o.date) : std::nullopt};
    auto& acc = groups[key];
    acc.weighted_sum += o.completeness;
    acc.volume += o.search_volume;
    ++acc.queries;
  }
  return finish(groups);
}

std::vector<CountryDayAggregate> reaggregate(std::span<const CountryDayAggregate> aggregates, GroupBy group_by) {
  if (aggregates.empty()) throw Error(ErrorCode::EmptyInput, "nothing to aggregate");
  std::map<GroupKey, Accumulator> groups;
  for (const auto& a : aggregates) {
    if ((group_by.country && !a.country) || (group_by.region && !a.region) || (group_by.date && !a.date)) {
      throw Error(ErrorCode::InvalidInput, "cannot regroup by a field the input was not grouped by");
    }
    GroupKey key{group_by.country ? a.country : std::nullopt, group_by.region ? a.region : std::nullopt,
                 group_by.date ? a.date : std::nullopt};
    auto& acc = groups[key];
    acc.weighted_sum += a.mean_completeness * static_cast<double>(a.queries);
    acc.volume += a.search_volume;
    acc.queries += a.queries;
  }
  return finish(groups);
}

double first_page_completeness(const CompletenessCurve& curve, int page_size) {
  if (curve.points.size() < 2) throw Error(ErrorCode::EmptyInput, "curve has no results");
  if (page_size < 1) throw Error(ErrorCode::InvalidInput, "page size must be >= 1");
  const std::size_t n = std::min(static_cast<std::size_t>(page_size), curve.n_results());
  return std::max(0.0, curve.points[n].value) * 100.0;
}

}  // namespace sonder
