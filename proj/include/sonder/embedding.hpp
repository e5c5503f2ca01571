#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sonder/error.hpp"

namespace sonder {

/// Fixed-dimension real vector for a text span (query, result or corpus).
///
/// Components are always finite. A vector flagged normalized has unit
/// Euclidean norm to within 1e-9; the zero vector can never carry the flag.
class EmbeddingVector {
 public:
  static constexpr double kNormTolerance = 1e-9;

  explicit EmbeddingVector(Eigen::VectorXd values, bool normalized = false);

  Eigen::Index dim() const noexcept { return values_.size(); }
  const Eigen::VectorXd& values() const noexcept { return values_; }
  bool normalized() const noexcept { return normalized_; }
  double norm() const { return values_.norm(); }
  bool is_zero() const { return values_.isZero(0.0); }

  friend bool operator==(const EmbeddingVector& a, const EmbeddingVector& b) {
    return a.normalized_ == b.normalized_ && a.values_.size() == b.values_.size() &&
           a.values_ == b.values_;
  }

 private:
  Eigen::VectorXd values_;
  bool normalized_;
};

enum class EmbeddingProvider { ReferenceHash, ExternalService };

std::string_view to_string(EmbeddingProvider provider) noexcept;
EmbeddingProvider parse_embedding_provider(std::string_view name);

struct EmbedderConfig {
  int dim = 256;
  EmbeddingProvider provider = EmbeddingProvider::ReferenceHash;
  bool normalize = true;
  std::optional<std::string> endpoint;  // required iff provider is ExternalService
  // Only consulted for ExternalService.
  bool fallback_to_reference = false;
  int max_in_flight = 4;
  std::size_t batch_size = 64;
  std::chrono::milliseconds timeout{5000};

  // Throws InvalidConfig when dim < 2 or the endpoint/provider pairing is off.
  void validate() const;

  // Reads EMBED_PROVIDER, EMBED_ENDPOINT and EMBED_DIM over the defaults.
  static EmbedderConfig from_env();
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const = 0;
};

/// Hashed bag-of-tokens embedder. Lowercases, splits on runs of
/// non-alphanumeric ASCII, hashes every token into one of `dim` buckets and
/// counts. Pure function of (text, dim, normalize).
class ReferenceHashEmbedder final : public Embedder {
 public:
  ReferenceHashEmbedder(int dim, bool normalize);

  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override;
  EmbeddingVector embed_one(std::string_view text) const;

 private:
  int dim_;
  bool normalize_;
};

/// Client for a remote sentence encoder speaking
///   POST <endpoint>  {"texts": [...]}  ->  {"vectors": [[...], ...]}
/// Large batches are split into chunks with at most max_in_flight concurrent
/// requests.
class ExternalServiceEmbedder final : public Embedder {
 public:
  explicit ExternalServiceEmbedder(EmbedderConfig config);

  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override;

 private:
  std::vector<EmbeddingVector> request_chunk(std::span<const std::string> texts) const;

  EmbedderConfig config_;
  std::string scheme_host_port_;
  std::string path_;
};

std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& config);

// Tokenizer used by the reference embedder. Exposed for tests and tooling.
std::vector<std::string> tokenize(std::string_view text);
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

EmbeddingVector embed_text(std::string_view text, const EmbedderConfig& config);
std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts,
                                         const EmbedderConfig& config);

/// Cosine of the angle between two vectors, clamped to [-1, 1].
template <typename DerivedA, typename DerivedB>
double cosine_similarity(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::DimensionMismatch, "cosine of vectors with dims " + std::to_string(a.size()) +
                                                  " and " + std::to_string(b.size()));
  }
  const double na = a.template cast<double>().norm();
  const double nb = b.template cast<double>().norm();
  if (na == 0.0 || nb == 0.0) {
    throw Error(ErrorCode::DegenerateVector, "cosine of a zero vector is undefined");
  }
  const double c = a.template cast<double>().dot(b.template cast<double>()) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  return cosine_similarity(a.values(), b.values());
}

}  // namespace sonder
