#pragma once

#include <utility>
#include <vector>

#include "dmpcq/types.hpp"

namespace dmpcq {

/// Undirected coupling graph over agents. Neighborhoods never contain the
/// agent itself and are stored in ascending index order; construction rejects
/// disconnected graphs, self loops and out-of-range indices.
struct Topology {
  int num_agents = 0;
  std::vector<std::pair<int, int>> edges;       // normalized with first < second
  std::vector<std::vector<int>> neighbors;      // ascending per agent

  static Topology chain(int num_agents);
  static Topology complete(int num_agents);
  static Topology from_edges(int num_agents,
                             const std::vector<std::pair<int, int>>& edges);

  int degree(int agent) const { return static_cast<int>(neighbors[agent].size()); }
  bool has_edge(int i, int j) const;
};

/// Doubly stochastic mixing matrix aligned with a topology: nonzero off the
/// diagonal only on edges, rows and columns summing to one within 1e-12.
struct ConsensusMatrix {
  Mat P;
};

/// Metropolis-Hastings weights: P_ij = 1/(1+max(deg_i,deg_j)) on edges,
/// diagonal takes the remaining mass. Doubly stochastic for any undirected
/// graph; validated after construction.
ConsensusMatrix build_metropolis_matrix(const Topology& topology);

}  // namespace dmpcq
