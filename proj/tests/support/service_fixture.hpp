#pragma once

// Temporary data directory with stored corpora and a roster, plus helpers for
// driving SearchService handlers directly.

#include <nlohmann/json.hpp>

#include <atomic>
#include <random>
#include <string>
#include <vector>

#include "sonder/completeness.hpp"
#include "sonder/embedding.hpp"
#include "sonder/experiment.hpp"
#include "sonder/ingestion/store.hpp"
#include "sonder/service.hpp"
#include "testing.hpp"

namespace sonder::testing {

using nlohmann::json;

inline QueryCorpus make_corpus(const std::string& query, const std::string& country, Date date, std::size_t n,
                               std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  QueryCorpus corpus;
  corpus.key = {query, country, date, SearchKind::Web};
  for (std::size_t i = 0; i < n; ++i) {
    SearchRecord r;
    r.query = query;
    r.country = country;
    r.date = date;
    r.rank = static_cast<int>(i + 1);
    r.title = random_text(gen);
    r.snippet = random_text(gen) + (i % 3 == 0 ? " " + query : "");
    r.url = "https://site" + std::to_string(i % 7) + ".example.com/" + std::to_string(seed) + "/" + std::to_string(i);
    r.domain = extract_domain(r.url);
    corpus.records.push_back(std::move(r));
  }
  return corpus;
}

/// Scores a stored corpus from scratch with the default reference embedder.
inline std::vector<ScoredResult> oracle_scores(const QueryCorpus& corpus) {
  const EmbedderConfig config;
  std::vector<EmbeddingVector> vecs;
  for (const auto& r : corpus.records) vecs.push_back(embed_text(r.text(), config));
  const auto q = embed_text(corpus.key.query, config);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(vecs.front().dim());
  for (const auto& v : vecs) c += v.values();
  std::vector<ScoredResult> out;
  for (std::size_t i = 0; i < vecs.size(); ++i) {
    const auto& v = vecs[i].values();
    ScoredResult s;
    s.record_id = corpus.records[i].id();
    s.rank = corpus.records[i].rank;
    s.relevance = q.values().dot(v) / (q.values().norm() * v.norm());
    s.completeness = c.dot(v) / (c.norm() * v.norm());
    out.push_back(s);
  }
  return out;
}

/// Ranks sorted by a key descending, ties by stored rank.
template <typename Key>
std::vector<int> ranks_by(std::vector<ScoredResult> scored, Key key) {
  std::stable_sort(scored.begin(), scored.end(), [&](const ScoredResult& a, const ScoredResult& b) {
    const double ka = key(a), kb = key(b);
    return ka != kb ? ka > kb : a.rank < b.rank;
  });
  std::vector<int> out;
  for (const auto& s : scored) out.push_back(s.rank);
  return out;
}

class ServiceFixture {
 public:
  explicit ServiceFixture(std::size_t participants = 8) {
    for (std::size_t i = 0; i < participants; ++i) {
      const auto id = "P" + std::to_string(1000 + i);
      roster_.add(id, password(id));
      ids_.push_back(id);
    }
  }

  static std::string password(const std::string& id) { return "pw-" + id; }

  std::filesystem::path data_dir() const { return dir_.path() / "data"; }

  void store(const QueryCorpus& corpus) { CorpusStore(data_dir()).store(corpus); }

  ServiceConfig config() {
    ServiceConfig c;
    c.data_dir = data_dir();
    c.seed = 77;
    c.clock = [this] { return Clock::time_point(std::chrono::seconds(now_.load())); };
    return c;
  }

  const Roster& roster() const { return roster_; }
  const std::vector<std::string>& ids() const { return ids_; }

  /// First roster id that the given seed draws into `arm`.
  std::string id_in(Arm arm, std::uint64_t seed = 77, std::size_t skip = 0) const {
    for (const auto& id : ids_) {
      if (draw_arm(seed, id) == arm && skip-- == 0) return id;
    }
    throw std::logic_error("roster has no participant in the requested arm");
  }

  void advance(std::int64_t seconds) { now_ += seconds; }
  const TempDir& dir() const { return dir_; }

 private:
  TempDir dir_;
  Roster roster_;
  std::vector<std::string> ids_;
  std::atomic<std::int64_t> now_{1'700'000'000};
};

inline json body_of(const Reply& r) { return json::parse(r.body); }

inline std::string login(SearchService& service, const std::string& id) {
  const auto r = service.create_session(json{{"participant_id", id}, {"password", ServiceFixture::password(id)}}.dump());
  if (r.status != 200) throw std::runtime_error("login failed: " + r.body);
  return body_of(r).at("token").get<std::string>();
}

/// True when any object key anywhere in `j` contains `needle`.
inline bool has_key_containing(const json& j, std::string_view needle) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) {
      if (k.find(needle) != std::string::npos || has_key_containing(v, needle)) return true;
    }
  } else if (j.is_array()) {
    for (const auto& v : j) {
      if (has_key_containing(v, needle)) return true;
    }
  }
  return false;
}

}  // namespace sonder::testing
