#pragma once

#include <stdexcept>
#include <vector>

#include "dmpcq/qp.hpp"
#include "dmpcq/theta.hpp"
#include "dmpcq/topology.hpp"
#include "dmpcq/types.hpp"

namespace dmpcq {

/// Shared shape of every agent's finite-horizon problem.
struct MpcConfig {
  int horizon = 10;  // N; stage set is {0, ..., N-1}
  double gamma = 0.9;
  Vec s_min, s_max;  // base state bounds, shifted per agent by theta offsets
  Vec u_min, u_max;  // hard input bounds

  int n() const { return static_cast<int>(s_min.size()); }
  int m() const { return static_cast<int>(u_min.size()); }
};

struct InfeasibleActionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SolverFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Variable offsets of one agent's blocks inside a stacked QP.
struct AgentVarIdx {
  int x_off = 0;              // own trajectory, (N+1)*n
  int u_off = 0;              // inputs, N*m
  int sig_off = 0;            // slacks, N*n
  std::vector<int> nb_x_off;  // neighbor trajectories, aligned with neighbors
};

/// Row offsets of one agent's constraint segments inside a stacked QP.
/// In Q-mode the k = 0 input-bound rows are omitted: u(0) is pinned by the
/// action equality, and keeping both would leave no strict interior.
struct AgentRowIdx {
  int eq_init = 0;      // n rows, x(0) = s
  int eq_action = -1;   // m rows, u(0) = a (Q-mode only)
  int eq_dyn = 0;       // N*n rows
  int iq_state_lo = 0;  // N*n rows
  int iq_state_hi = 0;  // N*n rows
  int iq_u_lo = 0;      // N*m rows in V-mode, (N-1)*m in Q-mode
  int iq_u_hi = 0;
  int iq_slack = 0;     // N*n rows
};

/// Locally relevant optimal primal and dual variables of one agent.
struct PrimalDualSolution {
  Mat X;                        // n x (N+1)
  Mat U;                        // m x N
  Mat Sigma;                    // n x N
  std::vector<Mat> neighbor_X;  // n x (N+1) per neighbor
  Vec lambda_init;              // n
  Vec lambda_action;            // m (empty in V-mode)
  Mat lambda_dyn;               // n x N
  Mat mu_state_lo;              // n x N
  Mat mu_state_hi;              // n x N
  Mat mu_u_lo;                  // m x N (column 0 zero in Q-mode)
  Mat mu_u_hi;                  // m x N
  Mat mu_slack;                 // n x N
  double objective_share = 0.0;  // this agent's cost term at the solution
  bool degenerate = false;       // some inequality weakly active
};

/// Incrementally built QP; sizes fixed at construction, blocks appended.
struct QpBuilder {
  std::vector<Triplet> P, A, G;
  Vec q, b, h;
  double r = 0.0;
  int next_eq = 0, next_iq = 0;

  QpBuilder(int num_vars, int num_eq, int num_ineq)
      : q(Vec::Zero(num_vars)), b(Vec::Zero(num_eq)), h(Vec::Zero(num_ineq)) {}

  QpProblem finish() const;
};

namespace detail {

/// Number of equality / inequality rows one agent contributes.
int agent_eq_rows(const MpcConfig& cfg, bool q_mode);
int agent_iq_rows(const MpcConfig& cfg, bool q_mode);
/// Number of own decision variables (trajectory + inputs + slacks).
int agent_own_vars(const MpcConfig& cfg);

/// Appends one agent's cost and constraints at the given variable offsets.
/// Used by both the monolithic problem (neighbor offsets point into other
/// agents' blocks) and the consensus subproblems (they point at local
/// copies). Triplets are emitted for every structurally learnable position
/// regardless of its current value, so the sparsity pattern is stable in
/// theta.
AgentRowIdx append_agent_block(QpBuilder& builder, const ThetaLocal& theta,
                               const MpcConfig& cfg, const Vec& state,
                               const Vec* action, const AgentVarIdx& vars);

}  // namespace detail

/// Monolithic QP over all agents plus the layout needed to slice solutions.
struct MonolithicQp {
  QpProblem qp;
  std::vector<AgentVarIdx> var_idx;
  std::vector<AgentRowIdx> row_idx;
  bool q_mode = false;
};

/// action == nullptr builds the V-mode problem (first input free).
MonolithicQp build_monolithic_qp(const std::vector<ThetaLocal>& theta,
                                 const Topology& topology, const MpcConfig& cfg,
                                 const std::vector<Vec>& state,
                                 const std::vector<Vec>* action);

/// Slices one agent's primal/dual data out of a stacked QP solution.
/// `weak_tol` classifies an inequality as weakly active (degenerate) when
/// both its residual and its multiplier are below the tolerance.
PrimalDualSolution extract_agent_solution(const QpSolution& sol,
                                          const ThetaLocal& theta, const MpcConfig& cfg,
                                          const AgentVarIdx& vars, const AgentRowIdx& rows,
                                          bool q_mode, double weak_tol = 1e-7);

/// Evaluates one agent's cost block at its solution.
double agent_objective_share(const ThetaLocal& theta, const MpcConfig& cfg,
                             const PrimalDualSolution& p);

struct CentralizedEval {
  double value = 0.0;
  std::vector<PrimalDualSolution> agents;
  std::vector<Vec> greedy_action;  // first inputs (V-mode result; also filled in Q-mode)
  QpSolution raw;
};

/// Optimal value of the joint problem with the first input pinned to the
/// given action. Throws InfeasibleActionError if the action violates the
/// input bounds and SolverFailure if KKT residuals exceed tolerance.
CentralizedEval solve_q_centralized(const std::vector<ThetaLocal>& theta,
                                    const Topology& topology, const MpcConfig& cfg,
                                    const std::vector<Vec>& state,
                                    const std::vector<Vec>& action,
                                    const QpOptions& opt = {}, QpSolver* solver = nullptr);

/// Same program without the action constraint; the first inputs form the
/// greedy joint action.
CentralizedEval solve_v_centralized(const std::vector<ThetaLocal>& theta,
                                    const Topology& topology, const MpcConfig& cfg,
                                    const std::vector<Vec>& state,
                                    const QpOptions& opt = {}, QpSolver* solver = nullptr);

}  // namespace dmpcq
