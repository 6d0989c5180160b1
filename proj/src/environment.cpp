#include "dmpcq/environment.hpp"

#include <stdexcept>

namespace dmpcq {

double local_stage_cost(const StageCostSpec& cost, const Vec& state, const Vec& action) {
  const Vec under = (cost.s_min - state).cwiseMax(0.0);
  const Vec over = (state - cost.s_max).cwiseMax(0.0);
  return state.squaredNorm() + 0.5 * action.squaredNorm() + cost.omega.dot(under) +
         cost.omega.dot(over);
}

double global_stage_cost(const StageCostSpec& cost, const std::vector<Vec>& state,
                         const std::vector<Vec>& action) {
  double total = 0.0;
  for (std::size_t i = 0; i < state.size(); ++i)
    total += local_stage_cost(cost, state[i], action[i]);
  return total / static_cast<double>(state.size());
}

StepResult env_step(const TrueDynamics& dynamics, const Topology& topology,
                    const StageCostSpec& cost, const std::vector<Vec>& state,
                    const std::vector<Vec>& action, std::vector<RngStream>& noise_rng) {
  const int M = topology.num_agents;
  if (static_cast<int>(state.size()) != M || static_cast<int>(action.size()) != M)
    throw std::invalid_argument("env_step: state/action count must match agent count");

  StepResult out;
  out.next_state.resize(M);
  out.local_costs.resize(M);
  for (int i = 0; i < M; ++i) {
    if (state[i].size() != dynamics.state_dim() || action[i].size() != dynamics.input_dim())
      throw std::invalid_argument("env_step: state/action dimension mismatch");
    Vec next = dynamics.A[i] * state[i] + dynamics.B[i] * action[i];
    for (std::size_t jj = 0; jj < topology.neighbors[i].size(); ++jj)
      next += dynamics.A_couple[i][jj] * state[topology.neighbors[i][jj]];
    const double e = noise_rng[i].uniform(dynamics.noise_low, dynamics.noise_high);
    next += e * dynamics.noise_mask;
    out.next_state[i] = std::move(next);
    out.local_costs[i] = local_stage_cost(cost, state[i], action[i]);
  }
  out.global_cost = out.local_costs.mean();
  return out;
}

std::vector<Vec> sample_initial_state(const Vec& low, const Vec& high, int num_agents,
                                      std::vector<RngStream>& rng) {
  std::vector<Vec> states(num_agents);
  for (int i = 0; i < num_agents; ++i) {
    Vec s(low.size());
    for (Eigen::Index c = 0; c < low.size(); ++c) s[c] = rng[i].uniform(low[c], high[c]);
    states[i] = std::move(s);
  }
  return states;
}

}  // namespace dmpcq
