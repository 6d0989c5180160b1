#include "dmpcq/consensus.hpp"

#include <stdexcept>

namespace dmpcq {

std::vector<Vec> gac_sum(const std::vector<Vec>& local_values,
                         const Topology& topology, const ConsensusMatrix& matrix,
                         int iterations, MessageLog* log) {
  const int M = topology.num_agents;
  if (static_cast<int>(local_values.size()) != M)
    throw std::invalid_argument("gac_sum: one value vector per agent required");
  if (iterations < 1) throw std::invalid_argument("gac_sum: iterations must be >= 1");
  const Eigen::Index d = local_values[0].size();
  for (const auto& v : local_values)
    if (v.size() != d)
      throw std::invalid_argument("gac_sum: mismatched vector lengths across agents");

  std::vector<Vec> v(M);
  for (int i = 0; i < M; ++i) v[i] = static_cast<double>(M) * local_values[i];

  const Mat& P = matrix.P;
  std::vector<Vec> next(M);
  for (int it = 0; it < iterations; ++it) {
    // Every agent ships its current iterate to each neighbor before mixing.
    if (log) {
      for (int i = 0; i < M; ++i)
        for (int j : topology.neighbors[i])
          log->record({"gac", "gac_vector", log->step(), it, i, j,
                       static_cast<int>(d)});
    }
    for (int i = 0; i < M; ++i) {
      next[i] = P(i, i) * v[i];
      for (int j : topology.neighbors[i]) next[i] += P(i, j) * v[j];
    }
    v.swap(next);
  }
  return v;
}

std::vector<Vec> exact_sum(const std::vector<Vec>& local_values) {
  if (local_values.empty()) throw std::invalid_argument("exact_sum: empty input");
  Vec total = local_values[0];
  for (std::size_t i = 1; i < local_values.size(); ++i) {
    if (local_values[i].size() != total.size())
      throw std::invalid_argument("exact_sum: mismatched vector lengths across agents");
    total += local_values[i];
  }
  return std::vector<Vec>(local_values.size(), total);
}

}  // namespace dmpcq
