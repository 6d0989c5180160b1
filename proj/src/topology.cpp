#include "dmpcq/topology.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dmpcq {

namespace {

void check_connected(const Topology& t) {
  if (t.num_agents <= 0) throw std::invalid_argument("topology: need at least one agent");
  std::vector<bool> seen(t.num_agents, false);
  std::vector<int> stack{0};
  seen[0] = true;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int w : t.neighbors[v]) {
      if (!seen[w]) {
        seen[w] = true;
        stack.push_back(w);
      }
    }
  }
  if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }))
    throw std::invalid_argument("topology: coupling graph is not connected");
}

}  // namespace

Topology Topology::from_edges(int num_agents,
                              const std::vector<std::pair<int, int>>& edges) {
  Topology t;
  t.num_agents = num_agents;
  t.neighbors.resize(num_agents);
  for (auto [i, j] : edges) {
    if (i == j) throw std::invalid_argument("topology: self loop on agent " + std::to_string(i));
    if (i < 0 || j < 0 || i >= num_agents || j >= num_agents)
      throw std::invalid_argument("topology: edge index out of range");
    if (i > j) std::swap(i, j);
    if (std::find(t.edges.begin(), t.edges.end(), std::make_pair(i, j)) != t.edges.end())
      continue;
    t.edges.emplace_back(i, j);
    t.neighbors[i].push_back(j);
    t.neighbors[j].push_back(i);
  }
  for (auto& nb : t.neighbors) std::sort(nb.begin(), nb.end());
  check_connected(t);
  return t;
}

Topology Topology::chain(int num_agents) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i + 1 < num_agents; ++i) edges.emplace_back(i, i + 1);
  return from_edges(num_agents, edges);
}

Topology Topology::complete(int num_agents) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < num_agents; ++i)
    for (int j = i + 1; j < num_agents; ++j) edges.emplace_back(i, j);
  return from_edges(num_agents, edges);
}

bool Topology::has_edge(int i, int j) const {
  if (i > j) std::swap(i, j);
  return std::find(edges.begin(), edges.end(), std::make_pair(i, j)) != edges.end();
}

ConsensusMatrix build_metropolis_matrix(const Topology& topology) {
  const int M = topology.num_agents;
  Mat P = Mat::Zero(M, M);
  for (auto [i, j] : topology.edges) {
    const double w = 1.0 / (1.0 + std::max(topology.degree(i), topology.degree(j)));
    P(i, j) = w;
    P(j, i) = w;
  }
  for (int i = 0; i < M; ++i) P(i, i) = 1.0 - P.row(i).sum();

  for (int i = 0; i < M; ++i) {
    if (std::abs(P.row(i).sum() - 1.0) > 1e-12 || std::abs(P.col(i).sum() - 1.0) > 1e-12)
      throw std::logic_error("consensus matrix is not doubly stochastic");
    for (int j = 0; j < M; ++j)
      if (P(i, j) < 0.0 || P(i, j) > 1.0)
        throw std::logic_error("consensus matrix entry outside [0,1]");
  }
  return ConsensusMatrix{std::move(P)};
}

}  // namespace dmpcq
