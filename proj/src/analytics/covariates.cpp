#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "sonder/analytics.hpp"
#include "sonder/error.hpp"

namespace sonder {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(0, 1);
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

CovariateTable CovariateTable::parse_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "covariate CSV is empty");
  const auto header = split(line);
  if (header.size() < 3 || header[0] != "country" || header[1] != "year") {
    throw Error(ErrorCode::ParseError, "covariate CSV header must start with country,year");
  }
  CovariateTable table;
  std::optional<std::size_t> region_col;
  std::vector<std::size_t> value_cols;
  for (std::size_t j = 2; j < header.size(); ++j) {
    if (header[j] == "region") {
      region_col = j;
    } else {
      table.names.push_back(header[j]);
      value_cols.push_back(j);
    }
  }

  for (std::size_t line_no = 2; std::getline(in, line); ++line_no) {
    if (line.find_first_not_of(" \r") == std::string::npos) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::ParseError, "covariate CSV line " + std::to_string(line_no) + " has " +
                                             std::to_string(cells.size()) + " cells");
    }
    try {
      const std::string& country = cells[0];
      const int year = std::stoi(cells[1]);
      std::vector<double> values;
      for (auto j : value_cols) values.push_back(std::stod(cells[j]));
      table.rows[{country, year}] = std::move(values);
      if (region_col) table.regions[country] = parse_region(cells[*region_col]);
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw Error(ErrorCode::ParseError, "covariate CSV line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return table;
}

CovariateTable CovariateTable::load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::NotFound, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str());
}

std::optional<double> CovariateTable::value(std::string_view country, int year, std::string_view name) const {
  const auto col = std::find(names.begin(), names.end(), name);
  if (col == names.end()) return std::nullopt;
  const auto row = rows.find({std::string(country), year});
  if (row == rows.end()) return std::nullopt;
  return row->second[static_cast<std::size_t>(col - names.begin())];
}

std::optional<Region> CovariateTable::region(std::string_view country) const {
  if (const auto it = regions.find(std::string(country)); it != regions.end()) return it->second;
  return region_of_country(country);
}

std::vector<RegressionFit> fit_press_models(std::span<const QueryObservation> observations,
                                            const CovariateTable& covariates) {
  static const std::vector<std::string> kNeeded{"press_restriction", "gdp_per_capita", "population"};
  for (const auto& name : kNeeded) {
    if (std::find(covariates.names.begin(), covariates.names.end(), name) == covariates.names.end()) {
      throw Error(ErrorCode::InvalidInput, "covariate table lacks column " + name);
    }
  }

  std::vector<double> y, press, volume, gdp, population;
  std::vector<std::string> dates, regions;
  for (const auto& o : observations) {
    const auto p = covariates.value(o.country, o.date.year, "press_restriction");
    const auto g = covariates.value(o.country, o.date.year, "gdp_per_capita");
    const auto pop = covariates.value(o.country, o.date.year, "population");
    if (!p || !g || !pop) continue;
    y.push_back(o.completeness);
    press.push_back(*p);
    volume.push_back(static_cast<double>(o.search_volume));
    gdp.push_back(*g);
    population.push_back(*pop);
    dates.push_back(o.date.to_string());
    regions.emplace_back(to_string(covariates.region(o.country).value_or(o.region)));
  }
  if (y.empty()) throw Error(ErrorCode::EmptyInput, "no observation matches the covariate table");

  const auto n = static_cast<Eigen::Index>(y.size());
  auto column = [&](const std::vector<double>& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), n); };
  const Eigen::VectorXd outcome = column(y);

  struct Spec {
    std::vector<const std::vector<double>*> cols;
    std::vector<std::string> names;
    bool date_fe;
    bool region_fe;
  };
  const std::vector<Spec> specs{
      {{&press}, {"Press restriction"}, false, false},
      {{&press, &volume}, {"Press restriction", "Search volume"}, false, false},
      {{&press, &volume, &gdp, &population},
       {"Press restriction", "Search volume", "GDP per capita", "Population"}, false, false},
      {{&press, &volume, &gdp, &population},
       {"Press restriction", "Search volume", "GDP per capita", "Population"}, true, false},
      {{&press, &volume, &gdp, &population},
       {"Press restriction", "Search volume", "GDP per capita", "Population"}, true, true},
  };

  std::vector<RegressionFit> fits;
  for (const auto& spec : specs) {
    Eigen::MatrixXd x(n, static_cast<Eigen::Index>(spec.cols.size()));
    for (std::size_t j = 0; j < spec.cols.size(); ++j) x.col(static_cast<Eigen::Index>(j)) = column(*spec.cols[j]);
    OlsOptions options;
    options.outcome_name = "Information completeness";
    options.standardize.assign(spec.cols.size(), true);
    if (spec.date_fe) options.fixed_effects.push_back({"Date of Search", dates});
    if (spec.region_fe) options.fixed_effects.push_back({"Region", regions});
    fits.push_back(ols_fit(x, spec.names, outcome, options));
  }
  return fits;
}

}  // namespace sonder
