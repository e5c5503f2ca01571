#include "sonder/ingestion/pagerank.hpp"

#include <Eigen/SparseCore>

#include <algorithm>
#include <set>
#include <unordered_map>

namespace sonder {

DomainGraph DomainGraph::from_edges(std::vector<std::string> nodes,
                                    std::vector<std::pair<std::size_t, std::size_t>> edges) {
  DomainGraph g;
  g.nodes = std::move(nodes);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& e : edges) {
    if (e.first >= g.nodes.size() || e.second >= g.nodes.size()) {
      throw Error(ErrorCode::InvalidInput, "edge endpoint out of range");
    }
    if (e.first == e.second || !seen.insert(e).second) continue;
    g.edges.push_back(e);
  }
  return g;
}

DomainGraph DomainGraph::from_named_edges(const std::vector<std::pair<std::string, std::string>>& named) {
  std::vector<std::string> nodes;
  std::unordered_map<std::string, std::size_t> index;
  auto id = [&](const std::string& name) {
    auto [it, inserted] = index.emplace(name, nodes.size());
    if (inserted) nodes.push_back(name);
    return it->second;
  };
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  edges.reserve(named.size());
  for (const auto& [from, to] : named) {
    const auto a = id(from);
    const auto b = id(to);
    edges.emplace_back(a, b);
  }
  return from_edges(std::move(nodes), std::move(edges));
}

Eigen::VectorXd pagerank_vector(const DomainGraph& graph, const PageRankOptions& options) {
  const auto n = static_cast<Eigen::Index>(graph.nodes.size());
  if (n == 0) throw Error(ErrorCode::EmptyInput, "pagerank of an empty graph");
  if (!(options.damping >= 0.0 && options.damping <= 1.0)) {
    throw Error(ErrorCode::InvalidInput, "damping must lie in [0, 1]");
  }

  Eigen::VectorXd out_degree = Eigen::VectorXd::Zero(n);
  for (const auto& [from, to] : graph.edges) out_degree[static_cast<Eigen::Index>(from)] += 1.0;

  // transition(to, from) = 1 / outdeg(from), i.e. M^T in row-stochastic terms.
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(graph.edges.size());
  for (const auto& [from, to] : graph.edges) {
    const auto f = static_cast<Eigen::Index>(from);
    triplets.emplace_back(static_cast<Eigen::Index>(to), f, 1.0 / out_degree[f]);
  }
  Eigen::SparseMatrix<double> transition(n, n);
  transition.setFromTriplets(triplets.begin(), triplets.end());

  const double d = options.damping;
  const double teleport = (1.0 - d) / static_cast<double>(n);
  Eigen::VectorXd p = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  Eigen::VectorXd next(n);
  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    double dangling = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (out_degree[i] == 0.0) dangling += p[i];
    }
    next = (transition * p).array() * d + teleport + d * dangling / static_cast<double>(n);
    next /= next.sum();
    const double change = (next - p).lpNorm<1>();
    p.swap(next);
    if (change < options.tolerance) return p;
  }
  throw NoConvergenceError(p, options.max_iterations);
}

DomainWeights pagerank(const DomainGraph& graph, const PageRankOptions& options) {
  const Eigen::VectorXd p = pagerank_vector(graph, options);
  DomainWeights weights;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    weights[graph.nodes[i]] += p[static_cast<Eigen::Index>(i)];
  }
  return weights;
}

std::vector<double> weights_for_corpus(const QueryCorpus& corpus, const DomainWeights& weights, double floor) {
  if (corpus.records.empty()) throw Error(ErrorCode::EmptyCorpus, "weights for an empty corpus");
  if (!(floor > 0.0)) throw Error(ErrorCode::InvalidInput, "floor must be positive");
  std::vector<double> out;
  out.reserve(corpus.records.size());
  for (const auto& r : corpus.records) {
    const auto it = weights.find(r.domain);
    out.push_back(it != weights.end() ? it->second : floor);
  }
  return out;
}

}  // namespace sonder
