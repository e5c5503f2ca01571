#include "sonder/embedding.hpp"

#include <httplib.h>

#include <atomic>
#include <cctype>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <nlohmann/json.hpp>
#include <thread>

namespace sonder {

namespace {

bool is_token_byte(unsigned char c) {
  // Bytes >= 0x80 belong to multi-byte UTF-8 sequences and stay inside tokens.
  return std::isalnum(c) != 0 || c >= 0x80;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n\f\v");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n\f\v");
  return s.substr(first, last - first + 1);
}

EmbeddingVector finish(Eigen::VectorXd v, bool normalize) {
  if (!normalize) return EmbeddingVector(std::move(v), false);
  const double n = v.norm();
  if (n == 0.0) {
    throw Error(ErrorCode::DegenerateVector, "cannot normalize a zero vector");
  }
  v /= n;
  return EmbeddingVector(std::move(v), true);
}

}  // namespace

EmbeddingVector::EmbeddingVector(Eigen::VectorXd values, bool normalized)
    : values_(std::move(values)), normalized_(normalized) {
  if (values_.size() < 1) {
    throw Error(ErrorCode::InvalidInput, "embedding vector must have dim >= 1");
  }
  if (!values_.allFinite()) {
    throw Error(ErrorCode::InvalidInput, "embedding vector has non-finite components");
  }
  if (normalized_ && std::abs(values_.norm() - 1.0) > kNormTolerance) {
    throw Error(ErrorCode::InvalidInput, "vector flagged normalized does not have unit norm");
  }
}

std::string_view to_string(EmbeddingProvider provider) noexcept {
  switch (provider) {
    case EmbeddingProvider::ReferenceHash: return "reference-hash";
    case EmbeddingProvider::ExternalService: return "external-service";
  }
  return "unknown";
}

EmbeddingProvider parse_embedding_provider(std::string_view name) {
  if (name == "reference-hash") return EmbeddingProvider::ReferenceHash;
  if (name == "external-service") return EmbeddingProvider::ExternalService;
  throw Error(ErrorCode::InvalidConfig, "unknown embedding provider '" + std::string(name) + "'");
}

void EmbedderConfig::validate() const {
  if (dim < 2) throw Error(ErrorCode::InvalidConfig, "embedding dim must be >= 2");
  const bool external = provider == EmbeddingProvider::ExternalService;
  if (external != endpoint.has_value()) {
    throw Error(ErrorCode::InvalidConfig,
                external ? "external-service provider requires an endpoint"
                         : "endpoint given for a non-external provider");
  }
  if (max_in_flight < 1) throw Error(ErrorCode::InvalidConfig, "max_in_flight must be >= 1");
  if (batch_size < 1) throw Error(ErrorCode::InvalidConfig, "batch_size must be >= 1");
}

EmbedderConfig EmbedderConfig::from_env() {
  EmbedderConfig config;
  if (const char* p = std::getenv("EMBED_PROVIDER"); p && *p) {
    config.provider = parse_embedding_provider(p);
  }
  if (const char* e = std::getenv("EMBED_ENDPOINT"); e && *e) {
    config.endpoint = e;
  }
  if (const char* d = std::getenv("EMBED_DIM"); d && *d) {
    char* end = nullptr;
    const long v = std::strtol(d, &end, 10);
    if (*end != '\0') throw Error(ErrorCode::InvalidConfig, "EMBED_DIM is not an integer");
    config.dim = static_cast<int>(v);
  }
  config.validate();
  return config;
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (is_token_byte(c)) {
      current.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

ReferenceHashEmbedder::ReferenceHashEmbedder(int dim, bool normalize) : dim_(dim), normalize_(normalize) {
  if (dim_ < 2) throw Error(ErrorCode::InvalidConfig, "embedding dim must be >= 2");
}

EmbeddingVector ReferenceHashEmbedder::embed_one(std::string_view text) const {
  if (trim(text).empty()) throw Error(ErrorCode::InvalidInput, "text is empty");
  const auto tokens = tokenize(text);
  if (tokens.empty()) throw Error(ErrorCode::InvalidInput, "text has no alphanumeric tokens");
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(dim_);
  for (const auto& t : tokens) {
    counts[static_cast<Eigen::Index>(fnv1a64(t) % static_cast<std::uint64_t>(dim_))] += 1.0;
  }
  return finish(std::move(counts), normalize_);
}

std::vector<EmbeddingVector> ReferenceHashEmbedder::embed(std::span<const std::string> texts) const {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    try {
      out.push_back(embed_one(texts[i]));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InvalidInput) throw;
      throw Error(ErrorCode::InvalidInput, "text at index " + std::to_string(i) + " is invalid: " + e.what());
    }
  }
  return out;
}

ExternalServiceEmbedder::ExternalServiceEmbedder(EmbedderConfig config) : config_(std::move(config)) {
  config_.validate();
  if (config_.provider != EmbeddingProvider::ExternalService) {
    throw Error(ErrorCode::InvalidConfig, "ExternalServiceEmbedder needs provider external-service");
  }
  const std::string& url = *config_.endpoint;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::InvalidConfig, "endpoint must be an absolute URL: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
}

std::vector<EmbeddingVector> ExternalServiceEmbedder::request_chunk(std::span<const std::string> texts) const {
  httplib::Client client(scheme_host_port_);
  const auto secs = config_.timeout.count() / 1000;
  const auto usecs = (config_.timeout.count() % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  const nlohmann::json body = {{"texts", std::vector<std::string>(texts.begin(), texts.end())}};
  auto res = client.Post(path_, body.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::ProviderUnavailable,
                "embedding service unreachable: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::ProviderUnavailable, "embedding service returned HTTP " + std::to_string(res->status));
  }

  std::vector<EmbeddingVector> out;
  try {
    const auto reply = nlohmann::json::parse(res->body);
    const auto& vectors = reply.at("vectors");
    if (!vectors.is_array() || vectors.size() != texts.size()) {
      throw Error(ErrorCode::ProviderUnavailable, "embedding service returned a wrong number of vectors");
    }
    out.reserve(texts.size());
    for (const auto& v : vectors) {
      if (!v.is_array() || static_cast<int>(v.size()) != config_.dim) {
        throw Error(ErrorCode::ProviderUnavailable, "embedding service returned a vector of wrong dim");
      }
      Eigen::VectorXd values(config_.dim);
      for (int i = 0; i < config_.dim; ++i) values[i] = v[static_cast<std::size_t>(i)].get<double>();
      if (!values.allFinite()) {
        throw Error(ErrorCode::ProviderUnavailable, "embedding service returned non-finite values");
      }
      out.push_back(finish(std::move(values), config_.normalize));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ProviderUnavailable, std::string("malformed embedding reply: ") + e.what());
  }
  return out;
}

std::vector<EmbeddingVector> ExternalServiceEmbedder::embed(std::span<const std::string> texts) const {
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (trim(texts[i]).empty()) {
      throw Error(ErrorCode::InvalidInput, "text at index " + std::to_string(i) + " is empty");
    }
  }
  if (texts.empty()) return {};

  const std::size_t chunk = config_.batch_size;
  const std::size_t n_chunks = (texts.size() + chunk - 1) / chunk;
  std::vector<std::vector<EmbeddingVector>> parts(n_chunks);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto worker = [&] {
    for (std::size_t c = next++; c < n_chunks; c = next++) {
      try {
        const auto begin = c * chunk;
        const auto len = std::min(chunk, texts.size() - begin);
        parts[c] = request_chunk(texts.subspan(begin, len));
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = n_chunks;
      }
    }
  };

  const auto n_workers = std::min<std::size_t>(static_cast<std::size_t>(config_.max_in_flight), n_chunks);
  std::vector<std::thread> pool;
  pool.reserve(n_workers);
  for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (auto& p : parts) {
    for (auto& v : p) out.push_back(std::move(v));
  }
  return out;
}

namespace {

// Falls back to the reference embedder when the remote one is unavailable.
class FallbackEmbedder final : public Embedder {
 public:
  explicit FallbackEmbedder(const EmbedderConfig& config)
      : primary_(config), fallback_(config.dim, config.normalize) {}

  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override {
    try {
      return primary_.embed(texts);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ProviderUnavailable) throw;
      return fallback_.embed(texts);
    }
  }

 private:
  ExternalServiceEmbedder primary_;
  ReferenceHashEmbedder fallback_;
};

}  // namespace

std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& config) {
  config.validate();
  switch (config.provider) {
    case EmbeddingProvider::ReferenceHash:
      return std::make_unique<ReferenceHashEmbedder>(config.dim, config.normalize);
    case EmbeddingProvider::ExternalService:
      if (config.fallback_to_reference) return std::make_unique<FallbackEmbedder>(config);
      return std::make_unique<ExternalServiceEmbedder>(config);
  }
  throw Error(ErrorCode::InvalidConfig, "unknown provider");
}

EmbeddingVector embed_text(std::string_view text, const EmbedderConfig& config) {
  if (trim(text).empty()) throw Error(ErrorCode::InvalidInput, "text is empty");
  const std::string owned(text);
  auto out = make_embedder(config)->embed(std::span<const std::string>(&owned, 1));
  return std::move(out.front());
}

std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts, const EmbedderConfig& config) {
  return make_embedder(config)->embed(texts);
}

}  // namespace sonder
