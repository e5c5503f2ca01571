#include "sonder/ingestion/trending.hpp"

#include <fstream>

#include "sonder/error.hpp"

namespace sonder {

FixtureTrendingSource::FixtureTrendingSource(std::filesystem::path root) : root_(std::move(root)) {}

std::vector<std::string> FixtureTrendingSource::fetch(std::string_view country, const Date& date) const {
  if (!is_country_code(country)) {
    throw Error(ErrorCode::InvalidInput, "bad country code '" + std::string(country) + "'");
  }
  const auto path = root_ / std::string(country) / (date.to_string() + ".txt");
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::NotFound, "no trending fixture for " + std::string(country) + " on " + date.to_string());
  }
  std::vector<std::string> queries;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    queries.push_back(line);
  }
  return queries;
}

}  // namespace sonder
