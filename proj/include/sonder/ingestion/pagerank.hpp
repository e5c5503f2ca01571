#pragma once

#include <Eigen/Core>

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sonder/error.hpp"
#include "sonder/ingestion/records.hpp"

namespace sonder {

/// Directed link graph between domains. Self-loops and repeated edges are
/// dropped by from_edges().
struct DomainGraph {
  std::vector<std::string> nodes;
  std::vector<std::pair<std::size_t, std::size_t>> edges;

  static DomainGraph from_edges(std::vector<std::string> nodes,
                                std::vector<std::pair<std::size_t, std::size_t>> edges);
  /// Builds the node list from the named endpoints, in first-seen order.
  static DomainGraph from_named_edges(const std::vector<std::pair<std::string, std::string>>& edges);
};

using DomainWeights = std::map<std::string, double>;

struct PageRankOptions {
  double damping = 0.85;
  double tolerance = 1e-10;
  int max_iterations = 200;
};

class NoConvergenceError : public Error {
 public:
  NoConvergenceError(Eigen::VectorXd last_iterate, int iterations)
      : Error(ErrorCode::NoConvergence,
              "pagerank did not converge in " + std::to_string(iterations) + " iterations"),
        last_iterate_(std::move(last_iterate)) {}

  const Eigen::VectorXd& last_iterate() const noexcept { return last_iterate_; }

 private:
  Eigen::VectorXd last_iterate_;
};

/// Power iteration from the uniform vector:
///   p <- (1 - d)/n + d * (M^T p + dangling_mass / n)
/// until the L1 change drops below the tolerance. Result sums to 1.
Eigen::VectorXd pagerank_vector(const DomainGraph& graph, const PageRankOptions& options = {});
DomainWeights pagerank(const DomainGraph& graph, const PageRankOptions& options = {});

/// Per-result weights in rank order: the domain's weight, or `floor` when the
/// domain is unknown.
std::vector<double> weights_for_corpus(const QueryCorpus& corpus, const DomainWeights& weights,
                                       double floor = 1e-6);

}  // namespace sonder
