#include "sonder/completeness.hpp"

#include <algorithm>
#include <cmath>

namespace sonder {

namespace {

Eigen::Index common_dim(std::span<const EmbeddingVector> vectors) {
  const Eigen::Index dim = vectors.front().dim();
  for (std::size_t i = 1; i < vectors.size(); ++i) {
    if (vectors[i].dim() != dim) {
      throw Error(ErrorCode::DimensionMismatch, "result " + std::to_string(i) + " has dim " +
                                                    std::to_string(vectors[i].dim()) + ", expected " +
                                                    std::to_string(dim));
    }
  }
  return dim;
}

}  // namespace

Lambda::Lambda(double value) : value_(value) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw Error(ErrorCode::InvalidLambda, "lambda must lie in [0, 1], got " + std::to_string(value));
  }
}

CorpusVector build_corpus_vector(std::span<const EmbeddingVector> result_vectors,
                                 std::optional<std::span<const double>> weights) {
  if (result_vectors.empty()) throw Error(ErrorCode::EmptyCorpus, "corpus has no results");
  const Eigen::Index dim = common_dim(result_vectors);

  CorpusVector corpus;
  corpus.n_results = result_vectors.size();
  if (weights) {
    if (weights->size() != result_vectors.size()) {
      throw Error(ErrorCode::DimensionMismatch, "got " + std::to_string(weights->size()) + " weights for " +
                                                    std::to_string(result_vectors.size()) + " results");
    }
    bool any_positive = false;
    for (double w : *weights) {
      if (!std::isfinite(w) || w < 0.0) throw Error(ErrorCode::DegenerateWeights, "weights must be finite and >= 0");
      any_positive = any_positive || w > 0.0;
    }
    if (!any_positive) throw Error(ErrorCode::DegenerateWeights, "every weight is zero");
    corpus.weights.assign(weights->begin(), weights->end());
  } else {
    corpus.weights.assign(result_vectors.size(), 1.0);
  }

  corpus.vector = Eigen::VectorXd::Zero(dim);
  for (std::size_t i = 0; i < result_vectors.size(); ++i) {
    corpus.vector += corpus.weights[i] * result_vectors[i].values();
  }
  return corpus;
}

double result_completeness(const EmbeddingVector& result_vec, const CorpusVector& corpus) {
  return cosine_similarity(corpus.vector, result_vec.values());
}

double cumulative_completeness(std::span<const EmbeddingVector> viewed, const CorpusVector& corpus) {
  if (viewed.empty()) {
    throw Error(ErrorCode::InvalidInput, "cumulative completeness needs n >= 1; n = 0 is the curve origin");
  }
  if (viewed.size() > corpus.n_results) {
    throw Error(ErrorCode::InvalidInput, "viewed " + std::to_string(viewed.size()) + " of a corpus of " +
                                             std::to_string(corpus.n_results));
  }
  Eigen::VectorXd partial = Eigen::VectorXd::Zero(viewed.front().dim());
  for (const auto& r : viewed) {
    if (r.dim() != partial.size()) throw Error(ErrorCode::DimensionMismatch, "viewed results differ in dim");
    partial += r.values();
  }
  return cosine_similarity(corpus.vector, partial);
}

CompletenessCurve completeness_curve(std::span<const EmbeddingVector> result_vectors, const CorpusVector& corpus) {
  if (result_vectors.empty()) throw Error(ErrorCode::EmptyCorpus, "curve of an empty corpus");
  if (result_vectors.size() > corpus.n_results) {
    throw Error(ErrorCode::InvalidInput, "more results than the corpus holds");
  }
  const Eigen::Index dim = common_dim(result_vectors);
  if (dim != corpus.vector.size()) throw Error(ErrorCode::DimensionMismatch, "results and corpus differ in dim");

  const std::size_t n = result_vectors.size();
  CompletenessCurve curve;
  curve.points.reserve(n + 1);
  curve.points.push_back({0.0, 0.0});

  Eigen::VectorXd running = Eigen::VectorXd::Zero(dim);
  double sum = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    running += result_vectors[k - 1].values();
    const double value = cosine_similarity(corpus.vector, running);
    const double fraction = k == n ? 1.0 : static_cast<double>(k) / static_cast<double>(n);
    curve.points.push_back({fraction, value});
    sum += value;
  }
  curve.auc = sum / static_cast<double>(n);
  return curve;
}

double relevance(const EmbeddingVector& query_vec, const EmbeddingVector& result_vec) {
  return cosine_similarity(query_vec, result_vec);
}

double blended_score(double relevance, double completeness, Lambda lambda) {
  const double l = lambda.value();
  return l * completeness + (1.0 - l) * relevance;
}

std::vector<ScoredResult> rerank(std::vector<ScoredResult> scored, Lambda lambda) {
  for (auto& s : scored) s.blended = blended_score(s.relevance, s.completeness, lambda);
  std::stable_sort(scored.begin(), scored.end(), [](const ScoredResult& a, const ScoredResult& b) {
    if (a.blended != b.blended) return a.blended > b.blended;
    return a.rank < b.rank;
  });
  return scored;
}

std::vector<ScoredResult> score_results(const EmbeddingVector& query_vec,
                                        std::span<const EmbeddingVector> result_vectors,
                                        const CorpusVector& corpus, std::span<const std::string> record_ids,
                                        Lambda lambda) {
  if (record_ids.size() != result_vectors.size()) {
    throw Error(ErrorCode::DimensionMismatch, "record ids and result vectors differ in length");
  }
  std::vector<ScoredResult> out;
  out.reserve(result_vectors.size());
  for (std::size_t i = 0; i < result_vectors.size(); ++i) {
    ScoredResult s;
    s.record_id = record_ids[i];
    s.rank = static_cast<int>(i) + 1;
    s.relevance = relevance(query_vec, result_vectors[i]);
    s.completeness = result_completeness(result_vectors[i], corpus);
    s.blended = blended_score(s.relevance, s.completeness, lambda);
    out.push_back(std::move(s));
  }
  return out;
}

double to_reporting_scale(double value) {
  return std::round(std::max(0.0, value) * 1000.0) / 10.0;
}

}  // namespace sonder
