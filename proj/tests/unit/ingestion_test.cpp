#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include <fstream>
#include <future>
#include <numeric>

#include "oracles.hpp"
#include "sonder/error.hpp"
#include "sonder/ingestion/pagerank.hpp"
#include "sonder/ingestion/records.hpp"
#include "sonder/ingestion/store.hpp"
#include "sonder/ingestion/trending.hpp"
#include "testing.hpp"

namespace sonder {
namespace {

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

SearchRecord make_record(const std::string& query, int rank, const std::string& url = "https://www.example.com/p") {
  SearchRecord r;
  r.query = query;
  r.country = "US";
  r.date = Date::parse("2023-03-01");
  r.rank = rank;
  r.title = "Title " + std::to_string(rank);
  r.snippet = "snippet about " + query;
  r.url = url;
  r.domain = extract_domain(url);
  return r;
}

QueryCorpus make_corpus(const std::string& query, int n) {
  QueryCorpus c;
  for (int i = 1; i <= n; ++i) c.records.push_back(make_record(query, i));
  c.key = c.records.front().key();
  return c;
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path);
  for (const auto& l : lines) out << l << '\n';
}

std::string line_for(const SearchRecord& r) { return to_json(r).dump(); }

TEST(Date, ParseValidateAndFormat) {
  const auto d = Date::parse("2024-02-29");
  EXPECT_EQ(d.to_string(), "2024-02-29");
  EXPECT_EQ(code_of([] { Date::parse("2023-02-29"); }), ErrorCode::InvalidInput);
  EXPECT_EQ(code_of([] { Date::parse("2023-13-01"); }), ErrorCode::InvalidInput);
  EXPECT_EQ(code_of([] { Date::parse("23-01-01"); }), ErrorCode::InvalidInput);
  EXPECT_LT(Date::parse("2022-12-31"), Date::parse("2023-01-01"));
}

TEST(Domain, ExtractsRegistrableDomain) {
  EXPECT_EQ(extract_domain("https://www.bbc.co.uk/news/world"), "bbc.co.uk");
  EXPECT_EQ(extract_domain("http://news.example.com:8080/x?y=1"), "example.com");
  EXPECT_EQ(extract_domain("https://user@Sub.Example.ORG/"), "example.org");
  EXPECT_EQ(extract_domain("https://www.abc.net.au/news"), "abc.net.au");
  EXPECT_EQ(extract_domain("https://localhost/"), "localhost");
  EXPECT_EQ(url_host("HTTPS://WWW.Example.com:443/a"), "www.example.com");
}

TEST(QueryKey, RoundTripsQueriesContainingColons) {
  const QueryKey key{"time: 10:30 news", "GB", Date::parse("2023-01-02"), SearchKind::News};
  EXPECT_EQ(key.to_string(), "GB:2023-01-02:news:time: 10:30 news");
  EXPECT_EQ(QueryKey::parse(key.to_string()), key);
  EXPECT_EQ(code_of([] { QueryKey::parse("just a query"); }), ErrorCode::InvalidInput);
}

TEST(SearchRecord, JsonRoundTripAndDerivedDomain) {
  const auto r = make_record("floods", 3, "https://www.dawn.com/news/1");
  EXPECT_EQ(record_from_json(to_json(r)), r);

  auto j = to_json(r);
  j.erase("domain");
  EXPECT_EQ(record_from_json(j).domain, "dawn.com");
  EXPECT_EQ(r.text(), "Title 3 snippet about floods");
  EXPECT_EQ(r.id(), make_record("floods", 3).id());
  EXPECT_NE(r.id(), make_record("floods", 4).id());
}

TEST(SearchRecord, InvalidFieldsAreRejected) {
  auto j = to_json(make_record("q", 1));
  auto bad = j;
  bad["rank"] = 0;
  EXPECT_EQ(code_of([&] { record_from_json(bad); }), ErrorCode::InvalidRecord);
  bad = j;
  bad["country"] = "usa";
  EXPECT_EQ(code_of([&] { record_from_json(bad); }), ErrorCode::InvalidRecord);
  bad = j;
  bad["domain"] = "other.com";
  EXPECT_EQ(code_of([&] { record_from_json(bad); }), ErrorCode::InvalidRecord);
  bad = j;
  bad["kind"] = "images";
  EXPECT_EQ(code_of([&] { record_from_json(bad); }), ErrorCode::InvalidRecord);
  bad = j;
  bad.erase("title");
  EXPECT_EQ(code_of([&] { record_from_json(bad); }), ErrorCode::InvalidRecord);
}

TEST(QueryCorpus, Validation) {
  EXPECT_NO_THROW(validate(make_corpus("q", 4)));
  auto dup = make_corpus("q", 3);
  dup.records[2].rank = 2;
  EXPECT_EQ(code_of([&] { validate(dup); }), ErrorCode::DuplicateRank);
  auto gap = make_corpus("q", 3);
  gap.records[2].rank = 5;
  EXPECT_EQ(code_of([&] { validate(gap); }), ErrorCode::InvalidRecord);
  QueryCorpus empty{make_corpus("q", 1).key, {}};
  EXPECT_EQ(code_of([&] { validate(empty); }), ErrorCode::InvalidRecord);
}

TEST(CorpusStore, RoundTripAndNotFound) {
  testing::TempDir dir;
  CorpusStore store(dir.path());
  const auto c = make_corpus("floods in pakistan", 5);
  store.store(c);
  EXPECT_EQ(store.load(c.key), c);
  EXPECT_TRUE(store.contains(c.key));
  EXPECT_EQ(store.keys(), std::vector<QueryKey>{c.key});
  EXPECT_EQ(code_of([&] { store.load(make_corpus("never stored", 1).key); }), ErrorCode::NotFound);
}

TEST(CorpusStore, RandomCorporaRoundTrip) {
  testing::TempDir dir;
  CorpusStore store(dir.path());
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 25; ++trial) {
    QueryCorpus c;
    const std::string query = testing::random_text(gen) + " \"quoted\" \\ ü";
    const int n = 1 + trial * 3;
    for (int i = 1; i <= n; ++i) {
      auto r = make_record(query, i, "https://site" + std::to_string(i % 7) + ".example.org/" + std::to_string(i));
      r.title = testing::random_text(gen);
      r.snippet = testing::random_text(gen) + "\n\ttab";
      r.kind = trial % 2 ? SearchKind::News : SearchKind::Web;
      c.records.push_back(r);
    }
    c.key = c.records.front().key();
    store.store(c);
    EXPECT_EQ(store.load(c.key), c);
  }
  EXPECT_EQ(store.keys().size(), 25u);
}

TEST(CorpusStore, CorruptFileIsReported) {
  testing::TempDir dir;
  CorpusStore store(dir.path());
  const auto c = make_corpus("q", 2);
  store.store(c);
  write_lines(store.path_for(c.key), {line_for(c.records[0]), "{not json"});
  EXPECT_EQ(code_of([&] { store.load(c.key); }), ErrorCode::CorruptStore);
}

TEST(CorpusStore, ConcurrentLoadsAgree) {
  testing::TempDir dir;
  CorpusStore store(dir.path());
  const auto c = make_corpus("q", 40);
  store.store(c);
  std::vector<std::future<QueryCorpus>> loads;
  for (int i = 0; i < 8; ++i) loads.push_back(std::async(std::launch::async, [&] { return store.load(c.key); }));
  for (auto& f : loads) EXPECT_EQ(f.get(), c);
}

TEST(CorpusStore, KeysIgnoreNonShardFiles) {
  testing::TempDir dir;
  CorpusStore store(dir.path());
  store.store(make_corpus("q", 1));
  std::filesystem::create_directories(dir / "telemetry");
  write_lines(dir / "telemetry" / "clicks.jsonl", {"{\"rank\":1}"});
  EXPECT_EQ(store.keys().size(), 1u);
}

TEST(Ingest, EmptyFileAcceptsNothing) {
  testing::TempDir dir;
  CorpusStore store(dir / "store");
  write_lines(dir / "empty.jsonl", {});
  const auto report = ingest_jsonl(dir / "empty.jsonl", store, true);
  EXPECT_EQ(report.accepted, 0u);
  EXPECT_TRUE(store.keys().empty());
}

TEST(Ingest, ThreeValidLinesMakeOneCorpus) {
  testing::TempDir dir;
  CorpusStore store(dir / "store");
  write_lines(dir / "in.jsonl",
              {line_for(make_record("q", 2)), line_for(make_record("q", 1)), line_for(make_record("q", 3))});
  EXPECT_EQ(ingest_jsonl(dir / "in.jsonl", store, true).accepted, 3u);
  const auto keys = store.keys();
  ASSERT_EQ(keys.size(), 1u);
  const auto loaded = store.load(keys.front());
  ASSERT_EQ(loaded.records.size(), 3u);
  EXPECT_EQ(loaded.records[0].rank, 1);
  EXPECT_EQ(loaded.records[2].rank, 3);
}

TEST(Ingest, StrictDuplicateRankNamesTheRank) {
  testing::TempDir dir;
  CorpusStore store(dir / "store");
  write_lines(dir / "in.jsonl",
              {line_for(make_record("q", 1)), line_for(make_record("q", 2)), line_for(make_record("q", 2))});
  try {
    ingest_jsonl(dir / "in.jsonl", store, true);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DuplicateRank);
    EXPECT_NE(std::string(e.what()).find("rank 2"), std::string::npos) << e.what();
  }
  EXPECT_TRUE(store.keys().empty());
}

TEST(Ingest, StrictMalformedLineNamesTheLine) {
  testing::TempDir dir;
  CorpusStore store(dir / "store");
  write_lines(dir / "in.jsonl", {line_for(make_record("q", 1)), "{oops"});
  try {
    ingest_jsonl(dir / "in.jsonl", store, true);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
  EXPECT_TRUE(store.keys().empty());
}

TEST(Ingest, LenientModeSkipsAndReports) {
  testing::TempDir dir;
  CorpusStore store(dir / "store");
  write_lines(dir / "in.jsonl", {line_for(make_record("q", 1)), "{oops", line_for(make_record("q", 2)),
                                 line_for(make_record("q", 2)), line_for(make_record("other", 2))});
  const auto report = ingest_jsonl(dir / "in.jsonl", store, false);
  EXPECT_EQ(report.accepted, 2u);
  // Bad JSON, the duplicate, and the corpus whose ranks start at 2.
  EXPECT_EQ(report.skipped, 3u);
  EXPECT_EQ(report.issues.size(), 3u);
  EXPECT_EQ(store.keys().size(), 1u);
}

TEST(Ingest, StrictRerunIsIdempotent) {
  testing::TempDir dir;
  CorpusStore store(dir / "store");
  write_lines(dir / "in.jsonl", {line_for(make_record("q", 1)), line_for(make_record("q", 2))});
  ingest_jsonl(dir / "in.jsonl", store, true);
  const auto before = store.load(store.keys().front());
  EXPECT_EQ(code_of([&] { ingest_jsonl(dir / "in.jsonl", store, true); }), ErrorCode::DuplicateRank);
  const auto lenient = ingest_jsonl(dir / "in.jsonl", store, false);
  EXPECT_EQ(lenient.accepted, 0u);
  EXPECT_EQ(lenient.skipped, 2u);
  EXPECT_EQ(store.load(store.keys().front()), before);
}

TEST(Ingest, LaterFileExtendsStoredCorpus) {
  testing::TempDir dir;
  CorpusStore store(dir / "store");
  write_lines(dir / "a.jsonl", {line_for(make_record("q", 1))});
  write_lines(dir / "b.jsonl", {line_for(make_record("q", 2))});
  ingest_jsonl(dir / "a.jsonl", store, true);
  EXPECT_EQ(ingest_jsonl(dir / "b.jsonl", store, true).accepted, 1u);
  EXPECT_EQ(store.load(store.keys().front()).records.size(), 2u);
}

TEST(Trending, FixtureOrderMissingAndDeterminism) {
  testing::TempDir dir;
  std::filesystem::create_directories(dir / "US");
  write_lines(dir / "US" / "2022-01-01.txt", {"# comment", "alpha", "beta", "", "gamma", "delta", "epsilon"});
  const FixtureTrendingSource source(dir.path());
  const auto day = Date::parse("2022-01-01");
  const auto queries = fetch_trending(source, "US", day);
  EXPECT_EQ(queries, (std::vector<std::string>{"alpha", "beta", "gamma", "delta", "epsilon"}));
  EXPECT_EQ(fetch_trending(source, "US", day), queries);
  EXPECT_EQ(code_of([&] { fetch_trending(source, "US", Date::parse("2022-01-02")); }), ErrorCode::NotFound);
  EXPECT_EQ(code_of([&] { fetch_trending(source, "FR", day); }), ErrorCode::NotFound);
}

TEST(PageRank, SmallGraphs) {
  const auto two = pagerank(DomainGraph::from_named_edges({{"A", "B"}, {"B", "A"}}));
  EXPECT_NEAR(two.at("A"), 0.5, 1e-9);
  EXPECT_NEAR(two.at("B"), 0.5, 1e-9);

  const auto one = pagerank(DomainGraph::from_edges({"A"}, {}));
  EXPECT_NEAR(one.at("A"), 1.0, 1e-12);

  const auto cycle = pagerank(DomainGraph::from_named_edges({{"A", "B"}, {"B", "C"}, {"C", "A"}}));
  for (const auto& [node, w] : cycle) EXPECT_NEAR(w, 1.0 / 3.0, 1e-8) << node;
}

TEST(PageRank, EmptyGraphAndBadEdges) {
  EXPECT_EQ(code_of([] { pagerank(DomainGraph{}); }), ErrorCode::EmptyInput);
  EXPECT_EQ(code_of([] { DomainGraph::from_edges({"A"}, {{0, 1}}); }), ErrorCode::InvalidInput);
}

TEST(PageRank, SelfLoopsAndDuplicatesDropped) {
  const auto g = DomainGraph::from_edges({"A", "B"}, {{0, 0}, {0, 1}, {0, 1}, {1, 0}});
  EXPECT_EQ(g.edges.size(), 2u);
}

TEST(PageRank, DanglingNodeMatchesDenseOracle) {
  const std::vector<std::pair<int, int>> edges{{0, 1}, {1, 2}, {0, 2}, {3, 0}};  // node 2 dangles
  const auto g = DomainGraph::from_edges({"a", "b", "c", "d"}, {{0, 1}, {1, 2}, {0, 2}, {3, 0}});
  const Eigen::VectorXd expected = oracle::dense_pagerank(4, edges);
  const Eigen::VectorXd got = pagerank_vector(g);
  EXPECT_LT((got - expected).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_NEAR(got.sum(), 1.0, 1e-12);
}

TEST(PageRank, NonConvergenceCarriesLastIterate) {
  const auto g = DomainGraph::from_named_edges({{"A", "B"}, {"B", "C"}, {"C", "A"}, {"A", "C"}});
  PageRankOptions options;
  options.max_iterations = 2;
  options.tolerance = 1e-15;
  try {
    pagerank(g, options);
    FAIL();
  } catch (const NoConvergenceError& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoConvergence);
    EXPECT_EQ(e.last_iterate().size(), 3);
    EXPECT_NEAR(e.last_iterate().sum(), 1.0, 1e-12);
  }
}

TEST(PageRankProperty, SumsToOneAndRelabelingEquivariant) {
  std::mt19937_64 gen(21);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + trial % 15;
    std::uniform_int_distribution<int> node(0, n - 1);
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (int e = 0; e < 2 * n; ++e) edges.emplace_back(node(gen), node(gen));
    std::vector<std::string> names;
    for (int i = 0; i < n; ++i) names.push_back("n" + std::to_string(i));

    std::vector<std::size_t> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), gen);
    std::vector<std::string> permuted_names(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) permuted_names[perm[static_cast<std::size_t>(i)]] = names[static_cast<std::size_t>(i)];
    std::vector<std::pair<std::size_t, std::size_t>> permuted_edges;
    for (const auto& [a, b] : edges) permuted_edges.emplace_back(perm[a], perm[b]);

    const auto w = pagerank(DomainGraph::from_edges(names, edges));
    const auto pw = pagerank(DomainGraph::from_edges(permuted_names, permuted_edges));
    double total = 0.0;
    for (const auto& [name, value] : w) {
      EXPECT_GE(value, 0.0);
      EXPECT_NEAR(value, pw.at(name), 1e-10);
      total += value;
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(PageRankProperty, VertexTransitiveGraphsAreUniform) {
  for (int n : {4, 7, 12}) {
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    std::vector<std::string> names;
    for (int i = 0; i < n; ++i) {
      names.push_back("v" + std::to_string(i));
      edges.emplace_back(i, (i + 1) % n);
      edges.emplace_back(i, (i + 3) % n);
    }
    const auto p = pagerank_vector(DomainGraph::from_edges(names, edges));
    EXPECT_LT((p.array() - 1.0 / n).abs().maxCoeff(), 1e-8);
  }
}

TEST(WeightsForCorpus, ElementwiseRule) {
  QueryCorpus c;
  c.records = {make_record("q", 1, "https://a.com/"), make_record("q", 2, "https://b.com/"),
               make_record("q", 3, "https://x.org/")};
  c.key = c.records.front().key();
  const DomainWeights w{{"a.com", 0.6}, {"b.com", 0.3}};
  EXPECT_EQ(weights_for_corpus(c, w), (std::vector<double>{0.6, 0.3, 1e-6}));
  EXPECT_EQ(weights_for_corpus(c, {}), (std::vector<double>{1e-6, 1e-6, 1e-6}));
  EXPECT_EQ(weights_for_corpus(c, {}, 0.5), (std::vector<double>{0.5, 0.5, 0.5}));
}

}  // namespace
}  // namespace sonder
