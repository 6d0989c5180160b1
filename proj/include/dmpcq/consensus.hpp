#pragma once

#include <vector>

#include "dmpcq/message_log.hpp"
#include "dmpcq/topology.hpp"
#include "dmpcq/types.hpp"

namespace dmpcq {

/// Global average consensus scaled to the sum: every agent starts from
/// M * v_i and mixes with P for a fixed number of synchronous iterations,
/// after which each agent holds an approximation of sum_j v_j componentwise.
/// Within one iteration the accumulation order is fixed (self term first,
/// then neighbors in ascending index) so results are bit-reproducible and a
/// vector consensus equals per-component scalar consensus exactly.
/// Throws on mismatched vector lengths or iterations < 1.
std::vector<Vec> gac_sum(const std::vector<Vec>& local_values,
                         const Topology& topology, const ConsensusMatrix& matrix,
                         int iterations, MessageLog* log = nullptr);

/// Exact-summation stand-in for gac_sum with the same signature shape; used
/// to isolate update algebra from consensus error in tests and comparisons.
std::vector<Vec> exact_sum(const std::vector<Vec>& local_values);

/// Switchable backend handed to distributed operations.
struct ConsensusScheme {
  const Topology* topology = nullptr;
  const ConsensusMatrix* matrix = nullptr;
  int iterations = 100;
  bool exact = false;  // bypass mixing, sum exactly (test/diagnostic mode)
  MessageLog* log = nullptr;

  std::vector<Vec> sum(const std::vector<Vec>& local_values) const {
    if (exact) return exact_sum(local_values);
    return gac_sum(local_values, *topology, *matrix, iterations, log);
  }
};

}  // namespace dmpcq
