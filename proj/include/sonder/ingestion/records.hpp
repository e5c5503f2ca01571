#pragma once

#include <compare>
#include <nlohmann/json_fwd.hpp>
#include <string>
#include <string_view>
#include <vector>

namespace sonder {

/// Calendar date in UTC, serialized as YYYY-MM-DD.
struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  static Date parse(std::string_view text);
  std::string to_string() const;

  friend auto operator<=>(const Date&, const Date&) = default;
};

enum class SearchKind { Web, News };

std::string_view to_string(SearchKind kind) noexcept;
SearchKind parse_search_kind(std::string_view text);

bool is_country_code(std::string_view code) noexcept;

/// Registrable domain of a URL's host. Keeps the last two labels, or three
/// when the host ends in a two-letter country TLD behind a common
/// second-level label (co.uk, com.au, gov.in, ...). Leading "www." is dropped.
std::string extract_domain(std::string_view url);
std::string url_host(std::string_view url);

struct QueryKey {
  std::string query;
  std::string country;
  Date date;
  SearchKind kind = SearchKind::Web;

  /// country:date:kind:query
  std::string to_string() const;
  static QueryKey parse(std::string_view text);

  friend auto operator<=>(const QueryKey&, const QueryKey&) = default;
};

struct SearchRecord {
  std::string query;
  std::string country;
  Date date;
  int rank = 1;
  SearchKind kind = SearchKind::Web;
  std::string title;
  std::string snippet;
  std::string url;
  std::string domain;

  QueryKey key() const { return {query, country, date, kind}; }
  /// Text the embedder sees: title + " " + snippet.
  std::string text() const { return title + " " + snippet; }
  /// Stable identifier used by the service and click telemetry.
  std::string id() const;

  friend bool operator==(const SearchRecord&, const SearchRecord&) = default;
};

/// Throws InvalidRecord when a field violates the record invariants.
void validate(const SearchRecord& record);

nlohmann::json to_json(const SearchRecord& record);
/// Parses and validates one record; domain is derived from url when absent.
SearchRecord record_from_json(const nlohmann::json& j);

/// All results of one (query, country, date, kind), ordered by rank 1..N.
struct QueryCorpus {
  QueryKey key;
  std::vector<SearchRecord> records;

  std::vector<std::string> texts() const;
  std::vector<std::string> record_ids() const;

  friend bool operator==(const QueryCorpus&, const QueryCorpus&) = default;
};

/// Throws InvalidRecord / DuplicateRank unless the corpus is nonempty, keyed
/// consistently and ranked contiguously from 1.
void validate(const QueryCorpus& corpus);

}  // namespace sonder
