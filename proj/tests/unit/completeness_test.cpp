#include "sonder/completeness.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "sonder/error.hpp"
#include "testing.hpp"

namespace sonder {
namespace {

EmbeddingVector vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return EmbeddingVector(v);
}

// Cosine from the definition, kept apart from the library.
double oracle_cos(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a.dot(b) / (a.norm() * b.norm()); }

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::InvalidInput;
}

TEST(CorpusVector, Examples) {
  const auto v = vec({0.3, 0.4});
  const std::vector<EmbeddingVector> single{v};
  EXPECT_TRUE(build_corpus_vector(single).vector.isApprox(v.values()));

  const std::vector<EmbeddingVector> pair{vec({1, 0}), vec({0, 1})};
  const std::vector<double> ones{1, 1}, two_one{2, 1};
  EXPECT_EQ(build_corpus_vector(pair, std::span<const double>(ones)).vector, Eigen::Vector2d(1, 1));
  EXPECT_EQ(build_corpus_vector(pair).vector, Eigen::Vector2d(1, 1));
  const auto weighted = build_corpus_vector(pair, std::span<const double>(two_one));
  EXPECT_EQ(weighted.vector, Eigen::Vector2d(2, 1));
  EXPECT_EQ(weighted.n_results, 2u);
  EXPECT_EQ(weighted.weights, two_one);
}

TEST(CorpusVector, Errors) {
  EXPECT_EQ(code_of([] { build_corpus_vector({}); }), ErrorCode::EmptyCorpus);
  const std::vector<EmbeddingVector> mixed{vec({1, 0}), vec({1, 0, 0})};
  EXPECT_EQ(code_of([&] { build_corpus_vector(mixed); }), ErrorCode::DimensionMismatch);
  const std::vector<EmbeddingVector> pair{vec({1, 0}), vec({0, 1})};
  const std::vector<double> one{1}, zeros{0, 0}, negative{1, -1};
  EXPECT_EQ(code_of([&] { build_corpus_vector(pair, std::span<const double>(one)); }), ErrorCode::DimensionMismatch);
  EXPECT_EQ(code_of([&] { build_corpus_vector(pair, std::span<const double>(zeros)); }),
            ErrorCode::DegenerateWeights);
  EXPECT_EQ(code_of([&] { build_corpus_vector(pair, std::span<const double>(negative)); }),
            ErrorCode::DegenerateWeights);
}

TEST(ResultCompleteness, Examples) {
  const std::vector<EmbeddingVector> pair{vec({1, 0}), vec({0, 1})};
  const std::vector<double> two_one{2, 1};
  const auto corpus = build_corpus_vector(pair, std::span<const double>(two_one));
  EXPECT_NEAR(result_completeness(vec({1, 0}), corpus), 2.0 / std::sqrt(5.0), 1e-12);
  EXPECT_NEAR(result_completeness(vec({1, 0}), corpus), 0.894427, 1e-6);
  EXPECT_NEAR(result_completeness(vec({4, 2}), corpus), 1.0, 1e-9);
  EXPECT_NEAR(result_completeness(vec({-1, 2}), corpus), 0.0, 1e-15);
}

TEST(CumulativeCompleteness, Examples) {
  const std::vector<EmbeddingVector> pair{vec({1, 0}), vec({0, 1})};
  const auto corpus = build_corpus_vector(pair);
  EXPECT_NEAR(cumulative_completeness(std::span(pair).first(1), corpus), 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(cumulative_completeness(pair, corpus), 1.0, 1e-12);

  const std::vector<EmbeddingVector> single{vec({0.2, -7, 3})};
  EXPECT_NEAR(cumulative_completeness(single, build_corpus_vector(single)), 1.0, 1e-12);
}

TEST(CumulativeCompleteness, BoundsOnViewedCount) {
  const std::vector<EmbeddingVector> pair{vec({1, 0}), vec({0, 1})};
  const auto corpus = build_corpus_vector(std::span(pair).first(1));
  EXPECT_EQ(code_of([&] { cumulative_completeness({}, corpus); }), ErrorCode::InvalidInput);
  EXPECT_EQ(code_of([&] { cumulative_completeness(pair, corpus); }), ErrorCode::InvalidInput);
}

TEST(CompletenessCurve, SingleResult) {
  const std::vector<EmbeddingVector> single{vec({1, 1})};
  const auto curve = completeness_curve(single, build_corpus_vector(single));
  ASSERT_EQ(curve.points.size(), 2u);
  EXPECT_EQ(curve.points[0], (CurvePoint{0.0, 0.0}));
  EXPECT_EQ(curve.points[1].fraction_viewed, 1.0);
  EXPECT_NEAR(curve.points[1].value, 1.0, 1e-12);
  EXPECT_NEAR(curve.auc, 1.0, 1e-12);
}

TEST(CompletenessCurve, OrthonormalPair) {
  const std::vector<EmbeddingVector> pair{vec({1, 0}), vec({0, 1})};
  const auto curve = completeness_curve(pair, build_corpus_vector(pair));
  ASSERT_EQ(curve.n_results(), 2u);
  EXPECT_EQ(curve.points[1].fraction_viewed, 0.5);
  EXPECT_NEAR(curve.points[1].value, 0.7071, 1e-4);
  EXPECT_NEAR(curve.final_value(), 1.0, 1e-12);
  EXPECT_NEAR(curve.auc, (1.0 / std::sqrt(2.0) + 1.0) / 2.0, 1e-12);
  EXPECT_NEAR(curve.auc, 0.8536, 1e-4);
}

TEST(CompletenessCurve, EmptyCorpus) {
  EXPECT_EQ(code_of([] {
              const std::vector<EmbeddingVector> one{vec({1, 0})};
              completeness_curve({}, build_corpus_vector(one));
            }),
            ErrorCode::EmptyCorpus);
}

TEST(CompletenessCurve, CanDip) {
  // The second result points away from the corpus direction.
  const std::vector<EmbeddingVector> dipping{vec({0.2, 1}), vec({1, -0.5}), vec({-1.1, 0.6})};
  const auto dip = completeness_curve(dipping, build_corpus_vector(dipping));
  EXPECT_LT(dip.points[2].value, dip.points[1].value);
  EXPECT_NEAR(dip.points[1].value, oracle_cos(Eigen::Vector2d(0.1, 1.1), Eigen::Vector2d(0.2, 1)), 1e-12);
  EXPECT_NEAR(dip.points[2].value, oracle_cos(Eigen::Vector2d(0.1, 1.1), Eigen::Vector2d(1.2, 0.5)), 1e-12);
  EXPECT_NEAR(dip.final_value(), 1.0, 1e-12);
}

TEST(CompletenessCurve, NonUniformWeightsMayEndBelowOne) {
  const std::vector<EmbeddingVector> pair{vec({1, 0}), vec({0, 1})};
  const std::vector<double> w{3, 1};
  const auto curve = completeness_curve(pair, build_corpus_vector(pair, std::span<const double>(w)));
  EXPECT_NEAR(curve.final_value(), oracle_cos(Eigen::Vector2d(3, 1), Eigen::Vector2d(1, 1)), 1e-12);
  EXPECT_LT(curve.final_value(), 1.0);
}

TEST(Relevance, Examples) {
  EXPECT_NEAR(relevance(vec({1, 2, 3}), vec({1, 2, 3})), 1.0, 1e-12);
  EXPECT_EQ(relevance(vec({1, 0}), vec({0, 1})), 0.0);
  EXPECT_NEAR(relevance(vec({1, 2, 3}), vec({4, 5, 6})), 0.974631846, 1e-6);
}

TEST(Blend, ExamplesAndLambdaRange) {
  EXPECT_EQ(blended_score(0.3, 0.9, Lambda(0.0)), 0.3);
  EXPECT_EQ(blended_score(0.3, 0.9, Lambda(1.0)), 0.9);
  EXPECT_NEAR(blended_score(0.4, 0.8, Lambda(0.25)), 0.5, 1e-15);
  EXPECT_EQ(code_of([] { Lambda(-0.01); }), ErrorCode::InvalidLambda);
  EXPECT_EQ(code_of([] { Lambda(1.01); }), ErrorCode::InvalidLambda);
  EXPECT_EQ(code_of([] { Lambda(NAN); }), ErrorCode::InvalidLambda);
}

TEST(Rerank, TiesKeepOriginalRank) {
  std::vector<ScoredResult> scored{{"c", 3, 0.5, 0.5, 0}, {"a", 1, 0.5, 0.5, 0}, {"b", 2, 0.25, 0.75, 0}};
  const auto out = rerank(scored, Lambda(0.5));
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].record_id, "a");
  EXPECT_EQ(out[1].record_id, "b");
  EXPECT_EQ(out[2].record_id, "c");
  for (const auto& r : out) EXPECT_DOUBLE_EQ(r.blended, 0.5);
}

TEST(Rerank, EndpointsMatchSingleKeySorts) {
  std::vector<ScoredResult> scored{
      {"r1", 1, 0.9, 0.2, 0}, {"r2", 2, 0.7, 0.8, 0}, {"r3", 3, 0.8, 0.5, 0}, {"r4", 4, 0.1, 0.9, 0}};
  auto ids = [](const std::vector<ScoredResult>& v) {
    std::vector<std::string> out;
    for (const auto& r : v) out.push_back(r.record_id);
    return out;
  };
  EXPECT_EQ(ids(rerank(scored, Lambda(0))), (std::vector<std::string>{"r1", "r3", "r2", "r4"}));
  EXPECT_EQ(ids(rerank(scored, Lambda(1))), (std::vector<std::string>{"r4", "r2", "r3", "r1"}));
}

TEST(ScoreResults, ParallelInputsAndRanks) {
  const std::vector<EmbeddingVector> results{vec({1, 0}), vec({0, 1})};
  const std::vector<std::string> ids{"x", "y"};
  const auto corpus = build_corpus_vector(results);
  const auto scored = score_results(vec({1, 0}), results, corpus, ids, Lambda(0.5));
  ASSERT_EQ(scored.size(), 2u);
  EXPECT_EQ(scored[0].record_id, "x");
  EXPECT_EQ(scored[0].rank, 1);
  EXPECT_EQ(scored[1].rank, 2);
  EXPECT_NEAR(scored[0].relevance, 1.0, 1e-12);
  EXPECT_NEAR(scored[0].completeness, 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(scored[0].blended, 0.5 + 0.5 / std::sqrt(2.0), 1e-12);
  const std::vector<std::string> short_ids{"x"};
  EXPECT_EQ(code_of([&] { score_results(vec({1, 0}), results, corpus, short_ids, Lambda(0)); }),
            ErrorCode::DimensionMismatch);
}

TEST(ReportingScale, ClampsAndRounds) {
  EXPECT_EQ(to_reporting_scale(0.70710678), 70.7);
  EXPECT_EQ(to_reporting_scale(1.0), 100.0);
  EXPECT_EQ(to_reporting_scale(-0.3), 0.0);
  EXPECT_EQ(to_reporting_scale(0.12345), 12.3);
}

// Property suite over random reference-embedded corpora.

TEST(CompletenessProperty, EndpointAndAucIdentity) {
  std::mt19937_64 gen(101);
  std::uniform_int_distribution<std::size_t> size(1, 60);
  for (int trial = 0; trial < 200; ++trial) {
    const auto results = testing::random_embedded_corpus(gen, size(gen));
    const auto curve = completeness_curve(results, build_corpus_vector(results));
    EXPECT_EQ(curve.points.front().value, 0.0);
    EXPECT_EQ(curve.points.front().fraction_viewed, 0.0);
    EXPECT_NEAR(curve.final_value(), 1.0, 1e-9);
    EXPECT_EQ(curve.points.back().fraction_viewed, 1.0);
    double sum = 0.0;
    for (std::size_t k = 1; k < curve.points.size(); ++k) {
      sum += curve.points[k].value;
      EXPECT_GT(curve.points[k].fraction_viewed, curve.points[k - 1].fraction_viewed);
      EXPECT_GE(curve.points[k].value, 0.0);
      EXPECT_LE(curve.points[k].value, 1.0);
    }
    EXPECT_NEAR(curve.auc, sum / static_cast<double>(results.size()), 1e-12);
  }
}

TEST(CompletenessProperty, WeightScaleInvariance) {
  std::mt19937_64 gen(102);
  std::uniform_real_distribution<double> w(0.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto results = testing::random_embedded_corpus(gen, 2 + trial % 30);
    std::vector<double> weights(results.size());
    for (auto& x : weights) x = 0.01 + w(gen);
    const auto base = build_corpus_vector(results, std::span<const double>(weights));
    for (double c : {0.01, 1.0, 100.0}) {
      std::vector<double> scaled(weights);
      for (auto& x : scaled) x *= c;
      const auto corpus = build_corpus_vector(results, std::span<const double>(scaled));
      for (const auto& r : results) EXPECT_NEAR(result_completeness(r, corpus), result_completeness(r, base), 1e-9);
      const auto a = completeness_curve(results, corpus);
      const auto b = completeness_curve(results, base);
      for (std::size_t k = 0; k < a.points.size(); ++k) EXPECT_NEAR(a.points[k].value, b.points[k].value, 1e-9);
    }
  }
}

TEST(CompletenessProperty, RerankIsAPermutation) {
  std::mt19937_64 gen(103);
  std::uniform_real_distribution<double> u(-1, 1), l(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ScoredResult> scored;
    for (int i = 0; i < 1 + trial % 25; ++i) {
      // Coarse values force ties.
      scored.push_back({"id" + std::to_string(i), i + 1, std::round(u(gen) * 4) / 4, std::round(u(gen) * 4) / 4, 0});
    }
    const Lambda lambda(std::round(l(gen) * 20) / 20);
    const auto out = rerank(scored, lambda);
    std::vector<std::string> a, b;
    for (const auto& r : scored) a.push_back(r.record_id);
    for (const auto& r : out) b.push_back(r.record_id);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    EXPECT_EQ(a, b);
    for (std::size_t i = 1; i < out.size(); ++i) {
      EXPECT_TRUE(out[i - 1].blended > out[i].blended ||
                  (out[i - 1].blended == out[i].blended && out[i - 1].rank < out[i].rank));
    }
  }
}

TEST(CumulativeCosines, MatchesSpanBasedForm) {
  std::mt19937_64 gen(104);
  const auto results = testing::random_embedded_corpus(gen, 17, 32);
  const auto corpus = build_corpus_vector(results);
  Eigen::MatrixXd packed(32, 17);
  for (Eigen::Index i = 0; i < 17; ++i) packed.col(i) = results[static_cast<std::size_t>(i)].values();
  const auto values = cumulative_cosines(packed, corpus.vector);
  for (std::size_t k = 1; k <= results.size(); ++k) {
    EXPECT_NEAR(values[k - 1], cumulative_completeness(std::span(results).first(k), corpus), 1e-12);
  }
}

}  // namespace
}  // namespace sonder
