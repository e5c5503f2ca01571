#include "sonder/ingestion/records.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdio>

#include "sonder/embedding.hpp"
#include "sonder/error.hpp"

namespace sonder {

namespace {

int parse_int(std::string_view s, std::string_view what) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::InvalidInput, "bad " + std::string(what) + " '" + std::string(s) + "'");
  }
  return v;
}

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
  static constexpr std::array<int, 12> kDays{31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return m == 2 && is_leap(y) ? 29 : kDays[static_cast<std::size_t>(m - 1)];
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

bool ends_with_label(std::string_view host, std::string_view domain) {
  if (domain.empty() || domain.size() > host.size()) return false;
  if (host.substr(host.size() - domain.size()) != domain) return false;
  return host.size() == domain.size() || host[host.size() - domain.size() - 1] == '.';
}

}  // namespace

Date Date::parse(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw Error(ErrorCode::InvalidInput, "date must be YYYY-MM-DD, got '" + std::string(text) + "'");
  }
  Date d{parse_int(text.substr(0, 4), "year"), parse_int(text.substr(5, 2), "month"),
         parse_int(text.substr(8, 2), "day")};
  if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > days_in_month(d.year, d.month)) {
    throw Error(ErrorCode::InvalidInput, "no such date '" + std::string(text) + "'");
  }
  return d;
}

std::string Date::to_string() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
  return buf;
}

std::string_view to_string(SearchKind kind) noexcept { return kind == SearchKind::Web ? "web" : "news"; }

SearchKind parse_search_kind(std::string_view text) {
  if (text == "web") return SearchKind::Web;
  if (text == "news") return SearchKind::News;
  throw Error(ErrorCode::InvalidInput, "kind must be web or news, got '" + std::string(text) + "'");
}

bool is_country_code(std::string_view code) noexcept {
  return code.size() == 2 && std::isupper(static_cast<unsigned char>(code[0])) &&
         std::isupper(static_cast<unsigned char>(code[1]));
}

std::string url_host(std::string_view url) {
  auto rest = url;
  if (const auto p = rest.find("://"); p != std::string_view::npos) rest.remove_prefix(p + 3);
  rest = rest.substr(0, rest.find_first_of("/?#"));
  if (const auto at = rest.rfind('@'); at != std::string_view::npos) rest.remove_prefix(at + 1);
  if (const auto colon = rest.find(':'); colon != std::string_view::npos) rest = rest.substr(0, colon);
  while (!rest.empty() && rest.back() == '.') rest.remove_suffix(1);
  return lower(rest);
}

std::string extract_domain(std::string_view url) {
  std::string host = url_host(url);
  if (host.empty()) throw Error(ErrorCode::InvalidRecord, "url has no host: '" + std::string(url) + "'");
  if (host.rfind("www.", 0) == 0) host.erase(0, 4);

  std::vector<std::string_view> labels;
  std::string_view h = host;
  for (std::size_t start = 0;;) {
    const auto dot = h.find('.', start);
    labels.push_back(h.substr(start, dot - start));
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  if (labels.size() <= 2) return host;

  static constexpr std::array<std::string_view, 9> kSecondLevel{"co", "com", "org", "net", "ac",
                                                                "gov", "edu", "gob", "or"};
  const auto tld = labels.back();
  const auto sld = labels[labels.size() - 2];
  const bool cc_second_level =
      tld.size() == 2 && std::find(kSecondLevel.begin(), kSecondLevel.end(), sld) != kSecondLevel.end();
  const std::size_t keep = cc_second_level ? 3 : 2;
  std::string out;
  for (std::size_t i = labels.size() - keep; i < labels.size(); ++i) {
    if (!out.empty()) out += '.';
    out += labels[i];
  }
  return out;
}

std::string QueryKey::to_string() const {
  return country + ":" + date.to_string() + ":" + std::string(sonder::to_string(kind)) + ":" + query;
}

QueryKey QueryKey::parse(std::string_view text) {
  const auto a = text.find(':');
  const auto b = a == std::string_view::npos ? a : text.find(':', a + 1);
  const auto c = b == std::string_view::npos ? b : text.find(':', b + 1);
  if (c == std::string_view::npos) {
    throw Error(ErrorCode::InvalidInput, "query key must be COUNTRY:YYYY-MM-DD:KIND:QUERY");
  }
  QueryKey key{std::string(text.substr(c + 1)), std::string(text.substr(0, a)),
               Date::parse(text.substr(a + 1, b - a - 1)), parse_search_kind(text.substr(b + 1, c - b - 1))};
  if (!is_country_code(key.country)) throw Error(ErrorCode::InvalidInput, "bad country '" + key.country + "'");
  if (key.query.empty()) throw Error(ErrorCode::InvalidInput, "query key has an empty query");
  return key;
}

std::string SearchRecord::id() const {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%016llx-%d",
                static_cast<unsigned long long>(fnv1a64(key().to_string())), rank);
  return buf;
}

void validate(const SearchRecord& r) {
  if (r.query.empty()) throw Error(ErrorCode::InvalidRecord, "query is empty");
  if (!is_country_code(r.country)) {
    throw Error(ErrorCode::InvalidRecord, "country must be an ISO alpha-2 code, got '" + r.country + "'");
  }
  if (r.rank < 1) throw Error(ErrorCode::InvalidRecord, "rank must be >= 1");
  if (r.url.empty()) throw Error(ErrorCode::InvalidRecord, "url is empty");
  const std::string host = url_host(r.url);
  if (!ends_with_label(host, r.domain)) {
    throw Error(ErrorCode::InvalidRecord, "domain '" + r.domain + "' is not a suffix of host '" + host + "'");
  }
}

nlohmann::json to_json(const SearchRecord& r) {
  return nlohmann::json{{"query", r.query},  {"country", r.country}, {"date", r.date.to_string()},
                        {"rank", r.rank},    {"kind", to_string(r.kind)}, {"title", r.title},
                        {"snippet", r.snippet}, {"url", r.url},     {"domain", r.domain}};
}

SearchRecord record_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidRecord, "record is not a JSON object");
  SearchRecord r;
  try {
    r.query = j.at("query").get<std::string>();
    r.country = j.at("country").get<std::string>();
    r.date = Date::parse(j.at("date").get<std::string>());
    r.rank = j.at("rank").get<int>();
    r.kind = parse_search_kind(j.at("kind").get<std::string>());
    r.title = j.at("title").get<std::string>();
    r.snippet = j.at("snippet").get<std::string>();
    r.url = j.at("url").get<std::string>();
    if (const auto it = j.find("domain"); it != j.end() && !it->is_null()) {
      r.domain = lower(it->get<std::string>());
    } else {
      r.domain = extract_domain(r.url);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidRecord, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidRecord) throw;
    throw Error(ErrorCode::InvalidRecord, e.what());
  }
  validate(r);
  return r;
}

std::vector<std::string> QueryCorpus::texts() const {
  std::vector<std::string> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.text());
  return out;
}

std::vector<std::string> QueryCorpus::record_ids() const {
  std::vector<std::string> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.id());
  return out;
}

void validate(const QueryCorpus& corpus) {
  if (corpus.records.empty()) throw Error(ErrorCode::InvalidRecord, "corpus " + corpus.key.to_string() + " is empty");
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    const auto& r = corpus.records[i];
    validate(r);
    if (r.key() != corpus.key) {
      throw Error(ErrorCode::InvalidRecord, "record keyed " + r.key().to_string() + " inside corpus " +
                                                corpus.key.to_string());
    }
    if (i > 0 && r.rank == corpus.records[i - 1].rank) {
      throw Error(ErrorCode::DuplicateRank, "rank " + std::to_string(r.rank) + " repeats in " + corpus.key.to_string());
    }
    if (r.rank != static_cast<int>(i) + 1) {
      throw Error(ErrorCode::InvalidRecord, "ranks of " + corpus.key.to_string() + " are not contiguous from 1 (found " +
                                                std::to_string(r.rank) + " at position " + std::to_string(i + 1) + ")");
    }
  }
}

}  // namespace sonder
