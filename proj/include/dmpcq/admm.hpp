#pragma once

#include <memory>
#include <vector>

#include "dmpcq/consensus.hpp"
#include "dmpcq/message_log.hpp"
#include "dmpcq/mpc.hpp"

namespace dmpcq {

struct AdmmOptions {
  int iterations = 100;
  double rho = 0.5;
  bool warm_start = false;  // roll the consensus state across time steps
  QpOptions qp{1e-10, 60, 1e-9, 2};
};

struct AdmmAgentResult {
  PrimalDualSolution p;
  double value_share = 0.0;  // F_i at the agent's own primal variables
};

struct AdmmResult {
  std::vector<AdmmAgentResult> agents;
  double primal_residual = 0.0;  // consensus disagreement after the last round
  double dual_residual = 0.0;    // rho-scaled movement of the agreed trajectories
};

/// Consensus ADMM over neighbor trajectory copies. Each agent repeatedly
/// minimizes its own cost plus a quadratic penalty tying its copies to the
/// agreed trajectories, the agreement variables are averaged over their
/// holders (reachable with neighbor-to-neighbor messages only), and scaled
/// duals absorb the disagreement. The iteration budget is fixed: running out
/// of budget is not an error, the residuals are simply reported.
///
/// A solver instance caches the per-agent subproblem structures, so the inner
/// interior-point solver performs its symbolic analysis once per run, and
/// holds the warm-start state rolled forward between time steps.
class AdmmSolver {
 public:
  AdmmSolver(const Topology& topology, const MpcConfig& cfg, AdmmOptions opt);
  ~AdmmSolver();
  AdmmSolver(AdmmSolver&&) noexcept;
  AdmmSolver& operator=(AdmmSolver&&) noexcept;

  /// action != nullptr pins each agent's first input (Q-mode).
  AdmmResult solve(const std::vector<ThetaLocal>& thetas, const std::vector<Vec>& state,
                   const std::vector<Vec>* action, MessageLog* log = nullptr);

  /// Rolls the stored consensus state one stage forward (warm start).
  void shift_warm_state();
  void clear_warm_state();

  const AdmmOptions& options() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct DistributedEval {
  std::vector<double> value;       // per-agent post-consensus global value
  std::vector<AdmmAgentResult> agents;
  std::vector<Vec> local_action;   // own first input (V-mode policy)
  double primal_residual = 0.0;
  double dual_residual = 0.0;
};

/// Distributed action-value evaluation: ADMM for the primal-dual data, then
/// consensus over the per-agent objective shares so every agent holds the
/// global value.
DistributedEval evaluate_q_distributed(AdmmSolver& solver,
                                       const std::vector<ThetaLocal>& thetas,
                                       const std::vector<Vec>& state,
                                       const std::vector<Vec>& action,
                                       const ConsensusScheme& consensus,
                                       MessageLog* log = nullptr);

/// Distributed value evaluation; also returns each agent's policy action.
DistributedEval evaluate_v_distributed(AdmmSolver& solver,
                                       const std::vector<ThetaLocal>& thetas,
                                       const std::vector<Vec>& state,
                                       const ConsensusScheme& consensus,
                                       MessageLog* log = nullptr);

}  // namespace dmpcq
