#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sonder/ingestion/records.hpp"

namespace sonder {

/// Source of a day's trending queries for one country.
class TrendingSource {
 public:
  virtual ~TrendingSource() = default;
  virtual std::vector<std::string> fetch(std::string_view country, const Date& date) const = 0;
};

/// Reads <root>/<COUNTRY>/<YYYY-MM-DD>.txt, one query per line. Blank lines
/// and lines starting with '#' are ignored.
class FixtureTrendingSource final : public TrendingSource {
 public:
  explicit FixtureTrendingSource(std::filesystem::path root);
  std::vector<std::string> fetch(std::string_view country, const Date& date) const override;

 private:
  std::filesystem::path root_;
};

inline std::vector<std::string> fetch_trending(const TrendingSource& source, std::string_view country,
                                               const Date& date) {
  return source.fetch(country, date);
}

}  // namespace sonder
