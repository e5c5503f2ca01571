#include "sonder/service.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "sonder/error.hpp"

namespace sonder {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::size_t kDefaultResults = 10;
constexpr std::size_t kMaxResults = 100;
constexpr std::size_t kLatencyWindow = 4096;
constexpr auto kReloadInterval = std::chrono::seconds(1);

Reply json_reply(int status, const json& body) { return {status, body.dump(), "application/json"}; }

Reply error_reply(int status, std::string_view error, std::string_view detail = {}) {
  json body{{"error", error}};
  if (!detail.empty()) body["detail"] = detail;
  return json_reply(status, body);
}

std::string rfc3339(Clock::time_point t) {
  const std::time_t secs = Clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string random_token() {
  std::random_device rd;
  static constexpr char kHex[] = "0123456789abcdef";
  std::string token;
  token.reserve(64);
  for (int i = 0; i < 8; ++i) {
    const std::uint32_t word = rd();
    for (int shift = 28; shift >= 0; shift -= 4) token += kHex[(word >> shift) & 0xf];
  }
  return token;
}

// Parses a request body; std::nullopt when it is not a JSON object.
std::optional<json> parse_object(const std::string& body) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  return j;
}

std::optional<std::string> string_field(const json& j, const char* name) {
  const auto it = j.find(name);
  if (it == j.end() || !it->is_string()) return std::nullopt;
  return it->get<std::string>();
}

double round_to(double v, double scale) { return std::round(v * scale) / scale; }

}  // namespace

ServiceConfig ServiceConfig::from_env() {
  ServiceConfig config;
  if (const char* seed = std::getenv("SONDER_SEED"); seed && *seed) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(seed, &end, 10);
    if (end == seed || *end != '\0') throw Error(ErrorCode::InvalidConfig, "SONDER_SEED must be an integer");
    config.seed = v;
  }
  config.embedder = EmbedderConfig::from_env();
  return config;
}

struct SearchService::IndexedCorpus {
  QueryCorpus corpus;
  Eigen::MatrixXd vectors;  // one result per column, stored rank order
  CorpusVector corpus_vector;
  std::vector<ScoredResult> scored;  // stored rank order, lambda 0
};

struct ServedResult {
  std::string result_id;
  double completeness = 0.0;  // reporting scale
};

struct SearchService::Session {
  std::string token;
  std::string participant_id;
  Arm arm = Arm::Control;
  Clock::time_point created_at;
  Clock::time_point expires_at;
  std::mutex mu;
  // query -> rank -> what was shown
  std::map<std::string, std::map<int, ServedResult>> served;
};

struct SearchService::Telemetry {
  explicit Telemetry(fs::path dir) : dir(std::move(dir)) { fs::create_directories(this->dir); }

  void append(const std::string& file, const json& line) {
    std::lock_guard lock(mu);
    std::ofstream out(dir / file, std::ios::app | std::ios::binary);
    out << line.dump() << '\n';
    out.flush();
    if (!out) throw Error(ErrorCode::InvalidConfig, "cannot append telemetry to " + (dir / file).string());
  }

  fs::path dir;
  std::mutex mu;
  // (participant, scale, phase)
  std::set<std::tuple<std::string, std::string, std::string>> submitted;
};

SearchService::SearchService(ServiceConfig config, Roster roster)
    : config_(std::move(config)),
      roster_(std::move(roster)),
      store_(config_.data_dir),
      assigner_(config_.seed, config_.telemetry_dir.value_or(config_.data_dir / "telemetry") / "assignments.csv") {
  const fs::path telemetry_dir = config_.telemetry_dir.value_or(config_.data_dir / "telemetry");
  telemetry_ = std::make_unique<Telemetry>(telemetry_dir);

  // Submissions survive restarts so the one-shot rule holds across them.
  if (std::ifstream in(telemetry_dir / "surveys.jsonl"); in) {
    std::string line;
    while (std::getline(in, line)) {
      const json j = json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object()) continue;
      telemetry_->submitted.emplace(j.value("participant_id", ""), j.value("scale", ""), j.value("phase", ""));
    }
  }

  scales_.emplace(aot17_scale().name, aot17_scale());
  if (config_.scales_dir && fs::is_directory(*config_.scales_dir)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(*config_.scales_dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
      auto scale = SurveyScale::load(path);
      scales_.insert_or_assign(scale.name, std::move(scale));
    }
  }

  embedder_ = make_embedder(config_.embedder);
  reload_index();
}

SearchService::~SearchService() = default;

void SearchService::reload_index() {
  std::map<std::string, std::vector<QueryKey>> by_query;
  for (auto& key : store_.keys()) by_query[key.query].push_back(std::move(key));
  std::unique_lock lock(index_mu_);
  keys_by_query_ = std::move(by_query);
  // Ingest may have extended a cached corpus.
  corpora_.clear();
  last_reload_ = config_.clock();
}

std::shared_ptr<const SearchService::IndexedCorpus> SearchService::build_index(const QueryKey& key) const {
  auto index = std::make_shared<IndexedCorpus>();
  index->corpus = store_.load(key);
  const auto texts = index->corpus.texts();
  const auto vectors = embedder_->embed(texts);
  const auto query_vec = embedder_->embed(std::span<const std::string>(&key.query, 1)).front();

  index->vectors.resize(vectors.front().dim(), static_cast<Eigen::Index>(vectors.size()));
  for (std::size_t i = 0; i < vectors.size(); ++i) index->vectors.col(static_cast<Eigen::Index>(i)) = vectors[i].values();

  if (config_.domain_weights) {
    const auto weights = weights_for_corpus(index->corpus, *config_.domain_weights);
    index->corpus_vector = build_corpus_vector(vectors, std::span<const double>(weights));
  } else {
    index->corpus_vector = build_corpus_vector(vectors);
  }
  const auto ids = index->corpus.record_ids();
  index->scored = score_results(query_vec, vectors, index->corpus_vector, ids, Lambda(0.0));
  return index;
}

std::shared_ptr<const SearchService::IndexedCorpus> SearchService::corpus_for(const std::string& query,
                                                                                const json& request) {
  auto pick = [&]() -> std::optional<QueryKey> {
    std::shared_lock lock(index_mu_);
    const auto it = keys_by_query_.find(query);
    if (it == keys_by_query_.end()) return std::nullopt;
    const auto country = string_field(request, "country");
    const auto date = string_field(request, "date");
    const auto kind = string_field(request, "kind");
    // Unfiltered lookups take the last key in (country, date, kind) order.
    for (auto k = it->second.rbegin(); k != it->second.rend(); ++k) {
      if (country && k->country != *country) continue;
      if (date && k->date.to_string() != *date) continue;
      if (kind && to_string(k->kind) != *kind) continue;
      return *k;
    }
    return std::nullopt;
  };

  auto key = pick();
  if (!key) {
    bool stale = false;
    {
      std::shared_lock lock(index_mu_);
      stale = config_.clock() - last_reload_ >= kReloadInterval;
    }
    if (!stale) return nullptr;
    reload_index();
    key = pick();
    if (!key) return nullptr;
  }

  {
    std::shared_lock lock(index_mu_);
    if (const auto it = corpora_.find(*key); it != corpora_.end()) return it->second;
  }
  auto built = build_index(*key);
  std::unique_lock lock(index_mu_);
  return corpora_.try_emplace(*key, std::move(built)).first->second;
}

std::shared_ptr<SearchService::Session> SearchService::session_for(const std::string& token) {
  std::lock_guard lock(sessions_mu_);
  const auto it = sessions_.find(token);
  if (it == sessions_.end()) return nullptr;
  if (config_.clock() >= it->second->expires_at) {
    sessions_.erase(it);
    return nullptr;
  }
  return it->second;
}

void SearchService::record_latency(double seconds) {
  std::lock_guard lock(latency_mu_);
  latencies_.push_back(seconds);
  if (latencies_.size() > kLatencyWindow) latencies_.pop_front();
}

Reply SearchService::create_session(const std::string& body) {
  ++n_session_;
  const auto request = parse_object(body);
  if (!request) return error_reply(400, "InvalidRequest", "body must be a JSON object");
  const auto participant = string_field(*request, "participant_id");
  const auto password = string_field(*request, "password");
  if (!participant || !password) return error_reply(400, "InvalidRequest", "participant_id and password required");
  if (!roster_.contains(*participant)) return error_reply(404, "UnknownParticipant");
  if (!roster_.verify(*participant, *password)) return error_reply(401, "BadCredentials");

  auto session = std::make_shared<Session>();
  session->token = random_token();
  session->participant_id = *participant;
  session->arm = assigner_.assign(*participant);
  session->created_at = config_.clock();
  session->expires_at = session->created_at + config_.session_ttl;
  {
    std::lock_guard lock(sessions_mu_);
    sessions_[session->token] = session;
    ++sessions_total_;
    ++sessions_by_arm_[session->arm];
  }
  telemetry_->append("sessions.jsonl", {{"participant_id", session->participant_id},
                                        {"arm", to_string(session->arm)},
                                        {"created_at", rfc3339(session->created_at)},
                                        {"expires_at", rfc3339(session->expires_at)}});
  return json_reply(200, {{"token", session->token},
                          {"participant_id", session->participant_id},
                          {"arm", to_string(session->arm)},
                          {"expires_at", rfc3339(session->expires_at)}});
}

Reply SearchService::search(const std::string& body) {
  ++n_search_;
  const auto started = std::chrono::steady_clock::now();
  const auto request = parse_object(body);
  if (!request) return error_reply(400, "InvalidRequest", "body must be a JSON object");

  const auto token = string_field(*request, "session_token");
  if (!token) return error_reply(401, "InvalidSession");
  const auto session = session_for(*token);
  if (!session) return error_reply(401, "InvalidSession");

  const auto query = string_field(*request, "query");
  if (!query || query->empty()) return error_reply(400, "InvalidRequest", "query must be a nonempty string");

  std::optional<double> lambda;
  if (const auto it = request->find("lambda"); it != request->end() && !it->is_null()) {
    if (!it->is_number() || !(it->get<double>() >= 0.0 && it->get<double>() <= 1.0)) {
      return error_reply(400, "InvalidLambda", "lambda must be a number in [0, 1]");
    }
    lambda = it->get<double>();
  }
  std::size_t max_results = kDefaultResults;
  if (const auto it = request->find("max_results"); it != request->end() && !it->is_null()) {
    if (!it->is_number_integer() || it->get<long long>() < static_cast<long long>(kDefaultResults) ||
        it->get<long long>() > static_cast<long long>(kMaxResults)) {
      return error_reply(400, "InvalidMaxResults", "max_results must be an integer in [10, 100]");
    }
    max_results = static_cast<std::size_t>(it->get<long long>());
  }

  const auto index = corpus_for(*query, *request);
  if (!index) return error_reply(404, "QueryNotIndexed");

  const bool treated = session->arm == Arm::Treatment;
  // Control sessions never see a reranked list, whatever lambda they send.
  const std::vector<ScoredResult> ordered =
      treated && lambda ? rerank(index->scored, Lambda(*lambda)) : index->scored;
  const std::size_t n = std::min(max_results, ordered.size());

  json results = json::array();
  std::vector<Eigen::Index> order;
  order.reserve(ordered.size());
  for (const auto& s : ordered) order.push_back(s.rank - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = ordered[i];
    const auto& record = index->corpus.records[static_cast<std::size_t>(s.rank - 1)];
    json item{{"result_id", s.record_id}, {"rank", s.rank},       {"position", i + 1}, {"title", record.title},
              {"snippet", record.snippet}, {"url", record.url}, {"domain", record.domain}};
    if (treated) {
      item["relevance"] = round_to(s.relevance, 1e4);
      item["completeness"] = to_reporting_scale(s.completeness);
      item["blended"] = round_to(lambda ? s.blended : s.relevance, 1e4);
      if (config_.debug_raw) item["raw"] = {{"relevance", s.relevance}, {"completeness", s.completeness}};
    }
    results.push_back(std::move(item));
  }

  json response{{"query", *query},
                {"query_key", index->corpus.key.to_string()},
                {"arm", to_string(session->arm)},
                {"scores_visible", treated},
                {"total_results", ordered.size()},
                {"results", std::move(results)}};
  if (treated) {
    const Eigen::MatrixXd served = index->vectors(Eigen::all, order);
    const auto values = cumulative_cosines(served, index->corpus_vector.vector);
    json points = json::array({json::array({0.0, 0.0})});
    const double total = static_cast<double>(values.size());
    for (std::size_t k = 0; k < values.size(); ++k) {
      points.push_back(json::array({static_cast<double>(k + 1) / total, to_reporting_scale(values[k])}));
    }
    response["lambda"] = lambda.value_or(0.0);
    response["cumulative_completeness"] = n == 0 ? 0.0 : to_reporting_scale(values[n - 1]);
    response["curve"] = std::move(points);
    if (config_.debug_raw && n > 0) response["raw_cumulative"] = values[n - 1];
  }

  {
    std::lock_guard lock(session->mu);
    auto& log = session->served[*query];
    for (std::size_t i = 0; i < n; ++i) {
      log[ordered[i].rank] = {ordered[i].record_id, to_reporting_scale(ordered[i].completeness)};
    }
  }
  json served_ranks = json::array();
  for (std::size_t i = 0; i < n; ++i) served_ranks.push_back(ordered[i].rank);
  telemetry_->append("searches.jsonl", {{"participant_id", session->participant_id},
                                        {"arm", to_string(session->arm)},
                                        {"query_key", index->corpus.key.to_string()},
                                        {"lambda", lambda ? json(*lambda) : json(nullptr)},
                                        {"max_results", max_results},
                                        {"served_ranks", std::move(served_ranks)},
                                        {"timestamp", rfc3339(config_.clock())}});

  record_latency(std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
  return json_reply(200, response);
}

Reply SearchService::click(const std::string& body) {
  ++n_click_;
  const auto request = parse_object(body);
  if (!request) return error_reply(400, "InvalidRequest", "body must be a JSON object");
  const auto token = string_field(*request, "session_token");
  const auto session = token ? session_for(*token) : nullptr;
  if (!session) return error_reply(401, "InvalidSession");

  const auto query = string_field(*request, "query");
  const auto rank_it = request->find("rank");
  if (!query || rank_it == request->end() || !rank_it->is_number_integer()) {
    return error_reply(400, "InvalidRequest", "query and integer rank required");
  }
  const long long rank = rank_it->get<long long>();
  const auto result_id = string_field(*request, "result_id");

  ServedResult served;
  {
    std::lock_guard lock(session->mu);
    const auto q = session->served.find(*query);
    if (q == session->served.end() || rank < 1 || rank > std::numeric_limits<int>::max()) {
      return error_reply(422, "UnservedResult");
    }
    const auto r = q->second.find(static_cast<int>(rank));
    if (r == q->second.end()) return error_reply(422, "UnservedResult");
    if (result_id && *result_id != r->second.result_id) return error_reply(422, "UnservedResult", "result_id mismatch");
    served = r->second;
  }

  const std::string topic = string_field(*request, "topic").value_or(*query);
  telemetry_->append("clicks.jsonl", {{"participant_id", session->participant_id},
                                      {"arm", to_string(session->arm)},
                                      {"topic", topic},
                                      {"query", *query},
                                      {"rank_clicked", rank},
                                      {"result_id", served.result_id},
                                      {"completeness_of_result", served.completeness},
                                      {"timestamp", rfc3339(config_.clock())}});
  return json_reply(200, {{"ack", true}, {"rank", rank}});
}

Reply SearchService::survey(const std::string& body) {
  ++n_survey_;
  const auto request = parse_object(body);
  if (!request) return error_reply(400, "InvalidRequest", "body must be a JSON object");
  const auto token = string_field(*request, "session_token");
  const auto session = token ? session_for(*token) : nullptr;
  if (!session) return error_reply(401, "InvalidSession");

  const auto scale_name = string_field(*request, "scale_name");
  if (!scale_name) return error_reply(400, "InvalidRequest", "scale_name required");
  const auto scale_it = scales_.find(*scale_name);
  if (scale_it == scales_.end()) return error_reply(404, "UnknownScale");
  const SurveyScale& scale = scale_it->second;
  const std::string phase = string_field(*request, "phase").value_or("post");

  const auto answers_it = request->find("answers");
  if (answers_it == request->end() || !answers_it->is_array()) {
    return error_reply(400, "InvalidAnswers", "answers must be an array");
  }
  SurveyResponse response{session->participant_id, scale.name, {}};
  auto invalid = [](std::size_t index, std::string_view why) {
    return json_reply(400, {{"error", "InvalidAnswers"}, {"item_index", index}, {"detail", why}});
  };
  for (std::size_t i = 0; i < answers_it->size(); ++i) {
    const auto& a = (*answers_it)[i];
    if (i >= scale.items.size()) return invalid(scale.items.size(), "too many answers");
    if (!a.is_number_integer()) return invalid(i, "answer must be an integer");
    const long long v = a.get<long long>();
    if (v < scale.min_answer || v > scale.max_answer) return invalid(i, "answer out of range");
    response.answers.push_back(static_cast<int>(v));
  }
  if (response.answers.size() < scale.items.size()) return invalid(response.answers.size(), "missing answer");

  json receipt{{"participant_id", session->participant_id}, {"scale", scale.name}, {"phase", phase}};
  if (scale.placeholder) {
    receipt["scored"] = false;
  } else {
    const SurveyScore score = score_survey(response, scale);
    receipt["scored"] = true;
    receipt["overall"] = score.overall;
    receipt["by_dimension"] = score.by_dimension;
  }

  {
    std::lock_guard lock(telemetry_->mu);
    if (!telemetry_->submitted.emplace(session->participant_id, scale.name, phase).second) {
      return error_reply(409, "AlreadySubmitted");
    }
  }
  json line = receipt;
  line["answers"] = response.answers;
  line["timestamp"] = rfc3339(config_.clock());
  telemetry_->append("surveys.jsonl", line);
  return json_reply(200, receipt);
}

Reply SearchService::scale(const std::string& name) const {
  const auto it = scales_.find(name);
  if (it == scales_.end()) return error_reply(404, "UnknownScale");
  return {200, it->second.to_json(), "application/json"};
}

Reply SearchService::metrics() const {
  std::vector<double> lat;
  {
    std::lock_guard lock(latency_mu_);
    lat.assign(latencies_.begin(), latencies_.end());
  }
  std::sort(lat.begin(), lat.end());
  auto quantile = [&](double q) {
    if (lat.empty()) return 0.0;
    const auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(lat.size()))) - 1;
    return lat[std::min(idx, lat.size() - 1)];
  };

  std::size_t corpora = 0;
  {
    std::shared_lock lock(index_mu_);
    for (const auto& [query, keys] : keys_by_query_) corpora += keys.size();
  }

  std::ostringstream out;
  out << "# TYPE sonder_requests_total counter\n";
  out << "sonder_requests_total{endpoint=\"session\"} " << n_session_.load() << '\n';
  out << "sonder_requests_total{endpoint=\"search\"} " << n_search_.load() << '\n';
  out << "sonder_requests_total{endpoint=\"click\"} " << n_click_.load() << '\n';
  out << "sonder_requests_total{endpoint=\"survey\"} " << n_survey_.load() << '\n';
  out << "# TYPE sonder_search_latency_seconds summary\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", quantile(0.5));
  out << "sonder_search_latency_seconds{quantile=\"0.5\"} " << buf << '\n';
  std::snprintf(buf, sizeof buf, "%.6f", quantile(0.99));
  out << "sonder_search_latency_seconds{quantile=\"0.99\"} " << buf << '\n';
  {
    std::lock_guard lock(sessions_mu_);
    out << "# TYPE sonder_sessions_total counter\n";
    out << "sonder_sessions_total " << sessions_total_ << '\n';
    out << "# TYPE sonder_sessions counter\n";
    for (const auto& [arm, count] : sessions_by_arm_) {
      out << "sonder_sessions{arm=\"" << to_string(arm) << "\"} " << count << '\n';
    }
  }
  out << "# TYPE sonder_store_corpora gauge\n";
  out << "sonder_store_corpora " << corpora << '\n';
  return {200, out.str(), "text/plain; version=0.0.4"};
}

Reply SearchService::health() const { return json_reply(200, {{"status", "ok"}}); }

}  // namespace sonder
