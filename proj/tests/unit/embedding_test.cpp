#include "sonder/embedding.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "sonder/error.hpp"
#include "testing.hpp"

#include <httplib.h>

#include <nlohmann/json.hpp>

namespace sonder {
namespace {

// Independent FNV-1a 64 and token counting, written from the definition.
std::uint64_t oracle_fnv(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

Eigen::VectorXd oracle_counts(const std::vector<std::string>& tokens, int dim) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
  for (const auto& t : tokens) v[static_cast<Eigen::Index>(oracle_fnv(t) % static_cast<std::uint64_t>(dim))] += 1;
  return v;
}

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

TEST(Fnv1a, KnownVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(Tokenize, LowercasesAndSplitsOnNonAlphanumericRuns) {
  EXPECT_EQ(tokenize("Floods in  PAKISTAN, 2022!"),
            (std::vector<std::string>{"floods", "in", "pakistan", "2022"}));
  EXPECT_TRUE(tokenize("--- ... !!!").empty());
}

TEST(EmbeddingVector, RejectsNonFiniteAndFalseNormalizedFlag) {
  EXPECT_EQ(code_of([] { EmbeddingVector(Eigen::VectorXd()); }), ErrorCode::InvalidInput);
  EXPECT_EQ(code_of([] { EmbeddingVector(Eigen::Vector2d(1.0, NAN)); }), ErrorCode::InvalidInput);
  EXPECT_EQ(code_of([] { EmbeddingVector(Eigen::Vector2d(1.0, 1.0), true); }), ErrorCode::InvalidInput);
  EXPECT_EQ(code_of([] { EmbeddingVector(Eigen::Vector2d::Zero(), true); }), ErrorCode::InvalidInput);
  EXPECT_NO_THROW(EmbeddingVector(Eigen::Vector2d(0.6, 0.8), true));
}

TEST(EmbedderConfig, Validation) {
  EmbedderConfig c;
  EXPECT_NO_THROW(c.validate());
  c.dim = 1;
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::InvalidConfig);
  c.dim = 256;
  c.endpoint = "http://localhost:1/embed";
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::InvalidConfig);
  c.provider = EmbeddingProvider::ExternalService;
  EXPECT_NO_THROW(c.validate());
  c.endpoint.reset();
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::InvalidConfig);
}

TEST(EmbedText, DeterministicAndUnitNorm) {
  const EmbedderConfig config;
  const auto a = embed_text("abc", config);
  const auto b = embed_text("abc", config);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.dim(), 256);
  EXPECT_NEAR(a.norm(), 1.0, 1e-9);
  EXPECT_TRUE(a.normalized());
}

TEST(EmbedText, EmptyTextIsInvalid) {
  const EmbedderConfig config;
  EXPECT_EQ(code_of([&] { embed_text("", config); }), ErrorCode::InvalidInput);
  EXPECT_EQ(code_of([&] { embed_text("   \t", config); }), ErrorCode::InvalidInput);
}

TEST(EmbedText, MatchesHashedCountOracle) {
  EmbedderConfig config;
  config.normalize = false;
  const auto raw = embed_text("Floods in Pakistan floods", config);
  EXPECT_TRUE(raw.values().isApprox(oracle_counts({"floods", "in", "pakistan", "floods"}, 256)));
  EXPECT_DOUBLE_EQ(raw.values().sum(), 4.0);
}

TEST(EmbedText, RepeatedTextNormalizesToSameVector) {
  const EmbedderConfig config;
  const auto once = embed_text("floods in Pakistan", config);
  const auto twice = embed_text("floods in Pakistan floods in Pakistan", config);
  const Eigen::VectorXd oracle = oracle_counts({"floods", "in", "pakistan"}, 256).normalized();
  EXPECT_LT((once.values() - oracle).norm(), 1e-12);
  EXPECT_LT((twice.values() - oracle).norm(), 1e-12);
}

TEST(EmbedBatch, EmptyBatchAndElementwiseEquivalence) {
  const EmbedderConfig config;
  EXPECT_TRUE(embed_batch({}, config).empty());
  const std::vector<std::string> texts{"a", "b"};
  const auto batch = embed_batch(texts, config);
  ASSERT_EQ(batch.size(), 2u);
  EXPECT_EQ(batch[0], embed_text("a", config));
  EXPECT_EQ(batch[1], embed_text("b", config));
}

TEST(EmbedBatch, ThousandTextsMatchSequentialCalls) {
  std::mt19937_64 gen(7);
  std::vector<std::string> texts;
  for (int i = 0; i < 1000; ++i) texts.push_back(testing::random_text(gen));
  const EmbedderConfig config;
  const auto batch = embed_batch(texts, config);
  for (std::size_t i = 0; i < texts.size(); ++i) ASSERT_EQ(batch[i], embed_text(texts[i], config)) << i;
}

TEST(EmbedBatch, NamesOffendingIndex) {
  const std::vector<std::string> texts{"ok", "fine", ""};
  try {
    embed_batch(texts, EmbedderConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidInput);
    EXPECT_NE(std::string(e.what()).find("index 2"), std::string::npos) << e.what();
  }
}

TEST(Cosine, ArithmeticExamples) {
  EXPECT_NEAR(cosine_similarity(Eigen::Vector3d(1, 2, 3), Eigen::Vector3d(4, 5, 6)), 32.0 / std::sqrt(14.0 * 77.0),
              1e-12);
  EXPECT_NEAR(cosine_similarity(Eigen::Vector3d(1, 2, 3), Eigen::Vector3d(4, 5, 6)), 0.974631846, 1e-6);
  EXPECT_EQ(cosine_similarity(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)), 0.0);
}

TEST(Cosine, Errors) {
  const Eigen::VectorXd a = Eigen::Vector2d(1, 0), b = Eigen::Vector3d(1, 0, 0);
  EXPECT_EQ(code_of([&] { cosine_similarity(a, b); }), ErrorCode::DimensionMismatch);
  EXPECT_EQ(code_of([] { cosine_similarity(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0)); }),
            ErrorCode::DegenerateVector);
}

TEST(CosineProperty, SelfSymmetryScaleAndRange) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  for (int trial = 0; trial < 500; ++trial) {
    const Eigen::VectorXd a = testing::random_vector(gen, 1 + trial % 40);
    const Eigen::VectorXd b = testing::random_vector(gen, a.size());
    EXPECT_NEAR(cosine_similarity(a, a), 1.0, 1e-12);
    EXPECT_EQ(cosine_similarity(a, b), cosine_similarity(b, a));
    const double c = scale(gen);
    EXPECT_NEAR(cosine_similarity(Eigen::VectorXd(c * a), b), cosine_similarity(a, b), 1e-9);
    const double v = cosine_similarity(a, b);
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(CosineProperty, ReferenceEmbeddingsAreNonnegative) {
  std::mt19937_64 gen(12);
  const ReferenceHashEmbedder embedder(64, true);
  for (int trial = 0; trial < 300; ++trial) {
    const auto a = embedder.embed_one(testing::random_text(gen));
    const auto b = embedder.embed_one(testing::random_text(gen));
    EXPECT_GE(a.values().minCoeff(), 0.0);
    const double v = cosine_similarity(a, b);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

// Minimal encoder service: vector i is (len(text), 1, 0, ...).
class FakeEncoder {
 public:
  explicit FakeEncoder(int dim, bool broken = false) {
    server_.Post("/embed", [dim, broken, this](const httplib::Request& req, httplib::Response& res) {
      const int now = ++in_flight_;
      int seen = peak_.load();
      while (now > seen && !peak_.compare_exchange_weak(seen, now)) {
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
      ++requests_;
      if (broken) {
        res.set_content("{\"nope\":1}", "application/json");
      } else {
        nlohmann::json vectors = nlohmann::json::array();
        const auto request = nlohmann::json::parse(req.body);
        for (const auto& t : request.at("texts")) {
          std::vector<double> v(static_cast<std::size_t>(dim), 0.0);
          v[0] = static_cast<double>(t.get<std::string>().size());
          v[1] = 1.0;
          vectors.push_back(v);
        }
        res.set_content(nlohmann::json{{"vectors", vectors}}.dump(), "application/json");
      }
      --in_flight_;
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeEncoder() {
    server_.stop();
    thread_.join();
  }

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/embed"; }
  int peak() const { return peak_.load(); }
  int requests() const { return requests_.load(); }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::atomic<int> in_flight_{0}, peak_{0}, requests_{0};
};

TEST(ExternalEmbedder, ChunksRespectInFlightCapAndPreserveOrder) {
  FakeEncoder encoder(8);
  EmbedderConfig config;
  config.dim = 8;
  config.provider = EmbeddingProvider::ExternalService;
  config.endpoint = encoder.endpoint();
  config.batch_size = 3;
  config.max_in_flight = 2;
  const auto embedder = make_embedder(config);

  std::vector<std::string> texts;
  for (int i = 1; i <= 20; ++i) texts.push_back(std::string(static_cast<std::size_t>(i), 'x'));
  const auto out = embedder->embed(texts);
  ASSERT_EQ(out.size(), texts.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Eigen::VectorXd raw = (Eigen::VectorXd(8) << static_cast<double>(i + 1), 1, 0, 0, 0, 0, 0, 0).finished();
    EXPECT_LT((out[i].values() - raw.normalized()).norm(), 1e-12) << i;
  }
  EXPECT_EQ(encoder.requests(), 7);
  EXPECT_LE(encoder.peak(), 2);
}

TEST(ExternalEmbedder, UnreachableOrMalformedIsProviderUnavailable) {
  EmbedderConfig config;
  config.provider = EmbeddingProvider::ExternalService;
  config.endpoint = "http://127.0.0.1:1/embed";
  config.timeout = std::chrono::milliseconds(300);
  const std::vector<std::string> texts{"hello"};
  EXPECT_EQ(code_of([&] { make_embedder(config)->embed(texts); }), ErrorCode::ProviderUnavailable);

  FakeEncoder broken(8, true);
  config.endpoint = broken.endpoint();
  config.dim = 8;
  EXPECT_EQ(code_of([&] { make_embedder(config)->embed(texts); }), ErrorCode::ProviderUnavailable);
}

TEST(ExternalEmbedder, FallbackOnlyWhenConfigured) {
  EmbedderConfig config;
  config.provider = EmbeddingProvider::ExternalService;
  config.endpoint = "http://127.0.0.1:1/embed";
  config.timeout = std::chrono::milliseconds(300);
  config.fallback_to_reference = true;
  const std::vector<std::string> texts{"hello world"};
  const auto out = make_embedder(config)->embed(texts);
  EXPECT_EQ(out.front(), ReferenceHashEmbedder(256, true).embed_one("hello world"));
}

TEST(EmbedderConfig, FromEnvironment) {
  ::setenv("EMBED_PROVIDER", "reference-hash", 1);
  ::setenv("EMBED_DIM", "64", 1);
  ::unsetenv("EMBED_ENDPOINT");
  const auto config = EmbedderConfig::from_env();
  EXPECT_EQ(config.dim, 64);
  EXPECT_EQ(config.provider, EmbeddingProvider::ReferenceHash);
  ::unsetenv("EMBED_PROVIDER");
  ::unsetenv("EMBED_DIM");
}

}  // namespace
}  // namespace sonder
