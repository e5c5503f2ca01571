#pragma once

#include <Eigen/Core>

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sonder/embedding.hpp"

namespace sonder {

/// Weighted sum of every result vector of one query's corpus.
struct CorpusVector {
  Eigen::VectorXd vector;
  std::vector<double> weights;
  std::size_t n_results = 0;
};

struct CurvePoint {
  double fraction_viewed = 0.0;
  double value = 0.0;

  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

/// Cumulative completeness against the fraction of results viewed.
/// points[0] is (0, 0); points[k] is (k/N, cumulative completeness of the
/// first k results). auc is the mean of points[1..N].
struct CompletenessCurve {
  std::vector<CurvePoint> points;
  double auc = 0.0;

  std::size_t n_results() const noexcept { return points.empty() ? 0 : points.size() - 1; }
  double final_value() const { return points.back().value; }
};

/// Blend weight between completeness (1) and relevance (0).
class Lambda {
 public:
  explicit Lambda(double value);
  double value() const noexcept { return value_; }

 private:
  double value_;
};

struct ScoredResult {
  std::string record_id;
  int rank = 1;
  double relevance = 0.0;
  double completeness = 0.0;
  double blended = 0.0;

  friend bool operator==(const ScoredResult&, const ScoredResult&) = default;
};

CorpusVector build_corpus_vector(std::span<const EmbeddingVector> result_vectors,
                                 std::optional<std::span<const double>> weights = std::nullopt);

double result_completeness(const EmbeddingVector& result_vec, const CorpusVector& corpus);

/// Cosine between the corpus vector and the unweighted sum of the given
/// leading results. `viewed` must hold between 1 and corpus.n_results vectors.
double cumulative_completeness(std::span<const EmbeddingVector> viewed, const CorpusVector& corpus);

CompletenessCurve completeness_curve(std::span<const EmbeddingVector> result_vectors, const CorpusVector& corpus);

double relevance(const EmbeddingVector& query_vec, const EmbeddingVector& result_vec);

double blended_score(double relevance, double completeness, Lambda lambda);

/// Recomputes every blended score under `lambda` and sorts descending.
/// Equal scores keep ascending original rank.
std::vector<ScoredResult> rerank(std::vector<ScoredResult> scored, Lambda lambda);

/// Scores every result of one corpus against the query and the corpus vector.
/// record_ids and result_vectors are parallel and in stored rank order.
std::vector<ScoredResult> score_results(const EmbeddingVector& query_vec,
                                        std::span<const EmbeddingVector> result_vectors,
                                        const CorpusVector& corpus, std::span<const std::string> record_ids,
                                        Lambda lambda);

/// User-facing scale: max(0, value) * 100, rounded to one decimal.
double to_reporting_scale(double value);

/// Running-sum form of the cumulative curve over the columns of a dense
/// matrix, one result per column. Shared by the curve builder and by
/// callers that keep their vectors packed.
template <typename Derived>
std::vector<double> cumulative_cosines(const Eigen::MatrixBase<Derived>& results,
                                       const Eigen::Ref<const Eigen::VectorXd>& corpus) {
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(results.cols()));
  Eigen::VectorXd running = Eigen::VectorXd::Zero(results.rows());
  for (Eigen::Index k = 0; k < results.cols(); ++k) {
    running += results.col(k).template cast<double>();
    values.push_back(cosine_similarity(corpus, running));
  }
  return values;
}

}  // namespace sonder
