#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "sonder/completeness.hpp"
#include "sonder/embedding.hpp"
#include "sonder/experiment.hpp"
#include "sonder/ingestion/pagerank.hpp"
#include "sonder/ingestion/store.hpp"

namespace httplib {
class Server;
}

namespace sonder {

using Clock = std::chrono::system_clock;

struct ServiceConfig {
  std::filesystem::path data_dir = CorpusStore::default_root();
  /// Telemetry and assignment files; defaults to <data_dir>/telemetry.
  std::optional<std::filesystem::path> telemetry_dir;
  /// CSV `id,password_hash`, hash as `sha256:<hex>` or bare hex.
  std::optional<std::filesystem::path> roster_path;
  /// Extra scale definitions (*.json). AOT17 is always available.
  std::optional<std::filesystem::path> scales_dir;
  /// Static web assets served under /app.
  std::optional<std::filesystem::path> static_dir;
  std::uint64_t seed = 20230301;
  std::chrono::seconds session_ttl{3600};
  EmbedderConfig embedder;
  /// Domain trust weights for corpus vectors; uniform when absent.
  std::optional<DomainWeights> domain_weights;
  /// Adds raw cosines to treatment responses.
  bool debug_raw = false;
  std::function<Clock::time_point()> clock = [] { return Clock::now(); };

  /// SONDER_DATA_DIR, SONDER_SEED and EMBED_* over the defaults.
  static ServiceConfig from_env();
};

struct Reply {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

std::string sha256_hex(std::string_view data);

/// Participant roster: id -> password hash.
class Roster {
 public:
  static Roster load_csv(const std::filesystem::path& path);
  static Roster parse_csv(std::string_view text);
  void add(std::string id, std::string_view password);

  bool contains(const std::string& id) const { return hashes_.count(id) != 0; }
  bool verify(const std::string& id, std::string_view password) const;
  std::size_t size() const noexcept { return hashes_.size(); }

 private:
  std::map<std::string, std::string> hashes_;
};

/// Search, session and telemetry endpoints, independent of the transport.
/// Every handler takes a JSON body and returns a status plus JSON body, so the
/// same object backs the HTTP server and direct tests.
class SearchService {
 public:
  SearchService(ServiceConfig config, Roster roster);
  ~SearchService();

  SearchService(const SearchService&) = delete;
  SearchService& operator=(const SearchService&) = delete;

  Reply create_session(const std::string& body);
  Reply search(const std::string& body);
  Reply click(const std::string& body);
  Reply survey(const std::string& body);
  Reply scale(const std::string& name) const;
  Reply metrics() const;
  Reply health() const;

  /// Registers every route on an httplib server.
  void mount(httplib::Server& server);

  /// Rescans the store for newly ingested corpora.
  void reload_index();

  const ServiceConfig& config() const noexcept { return config_; }

 private:
  struct IndexedCorpus;
  struct Session;
  struct Telemetry;

  std::shared_ptr<const IndexedCorpus> corpus_for(const std::string& query, const nlohmann::json& request);
  std::shared_ptr<Session> session_for(const std::string& token);
  std::shared_ptr<const IndexedCorpus> build_index(const QueryKey& key) const;
  void record_latency(double seconds);

  ServiceConfig config_;
  Roster roster_;
  CorpusStore store_;
  ArmAssigner assigner_;
  std::map<std::string, SurveyScale> scales_;
  std::unique_ptr<Embedder> embedder_;
  std::unique_ptr<Telemetry> telemetry_;

  mutable std::shared_mutex index_mu_;
  std::map<std::string, std::vector<QueryKey>> keys_by_query_;
  std::map<QueryKey, std::shared_ptr<const IndexedCorpus>> corpora_;
  Clock::time_point last_reload_{};

  mutable std::mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::map<Arm, std::size_t> sessions_by_arm_{{Arm::Treatment, 0}, {Arm::Control, 0}};
  std::size_t sessions_total_ = 0;

  std::atomic<std::uint64_t> n_session_{0}, n_search_{0}, n_click_{0}, n_survey_{0};
  mutable std::mutex latency_mu_;
  std::deque<double> latencies_;
};

/// Blocks serving HTTP on host:port until the server is stopped.
void run_server(SearchService& service, const std::string& host, int port);

}  // namespace sonder
