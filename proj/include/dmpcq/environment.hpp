#pragma once

#include <vector>

#include "dmpcq/rng.hpp"
#include "dmpcq/topology.hpp"
#include "dmpcq/types.hpp"

namespace dmpcq {

/// Ground-truth coupled linear dynamics with per-step additive noise
/// e_i ~ U[noise_low, noise_high] entering through noise_mask (by default
/// only the first state component).
struct TrueDynamics {
  std::vector<Mat> A;                     // per agent, n x n
  std::vector<std::vector<Mat>> A_couple; // aligned with topology.neighbors[i]
  std::vector<Mat> B;                     // per agent, n x m
  double noise_low = 0.0;
  double noise_high = 0.0;
  Vec noise_mask;                         // n, multiplies the noise draw

  int state_dim() const { return static_cast<int>(A.at(0).rows()); }
  int input_dim() const { return static_cast<int>(B.at(0).cols()); }
};

/// Local stage cost ||s||^2 + 1/2||a||^2 plus one-sided linear penalties
/// omega' * max(0, s_min - s) and omega' * max(0, s - s_max), elementwise max.
struct StageCostSpec {
  Vec s_min, s_max;  // componentwise s_min < s_max
  Vec omega;         // nonnegative violation weights
};

struct StepResult {
  std::vector<Vec> next_state;
  Vec local_costs;     // one per agent
  double global_cost;  // arithmetic mean of local costs
};

double local_stage_cost(const StageCostSpec& cost, const Vec& state, const Vec& action);

double global_stage_cost(const StageCostSpec& cost, const std::vector<Vec>& state,
                         const std::vector<Vec>& action);

/// Advances the whole network one step. One independent noise draw per agent,
/// taken from that agent's stream in ascending agent order.
StepResult env_step(const TrueDynamics& dynamics, const Topology& topology,
                    const StageCostSpec& cost, const std::vector<Vec>& state,
                    const std::vector<Vec>& action, std::vector<RngStream>& noise_rng);

/// Per-agent initial states drawn uniformly from the box [low, high].
std::vector<Vec> sample_initial_state(const Vec& low, const Vec& high, int num_agents,
                                      std::vector<RngStream>& rng);

}  // namespace dmpcq
