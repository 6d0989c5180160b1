#include "dmpcq/mpc.hpp"

#include <cmath>
#include <sstream>

namespace dmpcq {

QpProblem QpBuilder::finish() const {
  QpProblem prob;
  const auto nz = q.size();
  prob.P.resize(nz, nz);
  prob.P.setFromTriplets(P.begin(), P.end());
  prob.A.resize(b.size(), nz);
  prob.A.setFromTriplets(A.begin(), A.end());
  prob.G.resize(h.size(), nz);
  prob.G.setFromTriplets(G.begin(), G.end());
  prob.q = q;
  prob.b = b;
  prob.h = h;
  prob.r = r;
  prob.P.makeCompressed();
  prob.A.makeCompressed();
  prob.G.makeCompressed();
  return prob;
}

namespace detail {

int agent_own_vars(const MpcConfig& cfg) {
  const int n = cfg.n(), m = cfg.m(), N = cfg.horizon;
  return (N + 1) * n + N * m + N * n;
}

int agent_eq_rows(const MpcConfig& cfg, bool q_mode) {
  const int n = cfg.n(), m = cfg.m(), N = cfg.horizon;
  return n + (q_mode ? m : 0) + N * n;
}

int agent_iq_rows(const MpcConfig& cfg, bool q_mode) {
  const int n = cfg.n(), m = cfg.m(), N = cfg.horizon;
  return 2 * N * n + 2 * (q_mode ? N - 1 : N) * m + N * n;
}

AgentRowIdx append_agent_block(QpBuilder& builder, const ThetaLocal& theta,
                               const MpcConfig& cfg, const Vec& state,
                               const Vec* action, const AgentVarIdx& vars) {
  const int n = cfg.n(), m = cfg.m(), N = cfg.horizon;
  const bool q_mode = action != nullptr;
  AgentRowIdx rows;

  // Cost. Quadratic terms are squares of linear forms, so every pairwise
  // position of the weight vectors is structurally present.
  builder.r += theta.v_offset;
  for (int k = 0; k < N; ++k) {
    const double gk = std::pow(cfg.gamma, k);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c)
        builder.P.emplace_back(vars.x_off + k * n + r, vars.x_off + k * n + c,
                               gk * theta.state_weight[r] * theta.state_weight[c]);
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < m; ++c)
        builder.P.emplace_back(vars.u_off + k * m + r, vars.u_off + k * m + c,
                               gk * theta.input_weight[r] * theta.input_weight[c]);
    builder.q.segment(vars.x_off + k * n, n) += theta.cost_linear.head(n);
    builder.q.segment(vars.u_off + k * m, m) += theta.cost_linear.tail(m);
    builder.q.segment(vars.sig_off + k * n, n) += 0.5 * gk * theta.slack_weight;
  }

  // Initial state.
  rows.eq_init = builder.next_eq;
  builder.next_eq += n;
  for (int c = 0; c < n; ++c) {
    builder.A.emplace_back(rows.eq_init + c, vars.x_off + c, 1.0);
    builder.b[rows.eq_init + c] = state[c];
  }

  // First input pinned to the evaluated action.
  if (q_mode) {
    rows.eq_action = builder.next_eq;
    builder.next_eq += m;
    for (int c = 0; c < m; ++c) {
      builder.A.emplace_back(rows.eq_action + c, vars.u_off + c, 1.0);
      builder.b[rows.eq_action + c] = (*action)[c];
    }
  }

  // Prediction model: x(k+1) = A x(k) + B u(k) + sum_j A_j x_j(k) + bias.
  // Only structurally learnable positions are emitted (upper triangle of A,
  // corner of each coupling block, all of B).
  const Mat A_model = theta.model_a();
  rows.eq_dyn = builder.next_eq;
  builder.next_eq += N * n;
  for (int k = 0; k < N; ++k) {
    const int base = rows.eq_dyn + k * n;
    for (int r = 0; r < n; ++r) {
      builder.A.emplace_back(base + r, vars.x_off + (k + 1) * n + r, 1.0);
      for (int c = r; c < n; ++c)
        builder.A.emplace_back(base + r, vars.x_off + k * n + c, -A_model(r, c));
      for (int c = 0; c < m; ++c)
        builder.A.emplace_back(base + r, vars.u_off + k * m + c, -theta.model_b(r, c));
      builder.b[base + r] = theta.model_bias[r];
    }
    for (int jj = 0; jj < theta.deg; ++jj)
      builder.A.emplace_back(base + (n - 1), vars.nb_x_off[jj] + k * n + (n - 1),
                             -theta.model_coupling[jj]);
  }

  // Softened state bounds, shared slack for both sides.
  const Vec lo = cfg.s_min + theta.x_lo_offset;
  const Vec hi = cfg.s_max + theta.x_hi_offset;
  rows.iq_state_lo = builder.next_iq;
  builder.next_iq += N * n;
  for (int k = 0; k < N; ++k)
    for (int c = 0; c < n; ++c) {
      const int row = rows.iq_state_lo + k * n + c;
      builder.G.emplace_back(row, vars.x_off + k * n + c, -1.0);
      builder.G.emplace_back(row, vars.sig_off + k * n + c, -1.0);
      builder.h[row] = -lo[c];
    }
  rows.iq_state_hi = builder.next_iq;
  builder.next_iq += N * n;
  for (int k = 0; k < N; ++k)
    for (int c = 0; c < n; ++c) {
      const int row = rows.iq_state_hi + k * n + c;
      builder.G.emplace_back(row, vars.x_off + k * n + c, 1.0);
      builder.G.emplace_back(row, vars.sig_off + k * n + c, -1.0);
      builder.h[row] = hi[c];
    }

  // Hard input bounds.
  const int k0 = q_mode ? 1 : 0;
  rows.iq_u_lo = builder.next_iq;
  builder.next_iq += (N - k0) * m;
  for (int k = k0; k < N; ++k)
    for (int c = 0; c < m; ++c) {
      const int row = rows.iq_u_lo + (k - k0) * m + c;
      builder.G.emplace_back(row, vars.u_off + k * m + c, -1.0);
      builder.h[row] = -cfg.u_min[c];
    }
  rows.iq_u_hi = builder.next_iq;
  builder.next_iq += (N - k0) * m;
  for (int k = k0; k < N; ++k)
    for (int c = 0; c < m; ++c) {
      const int row = rows.iq_u_hi + (k - k0) * m + c;
      builder.G.emplace_back(row, vars.u_off + k * m + c, 1.0);
      builder.h[row] = cfg.u_max[c];
    }

  // Slack nonnegativity.
  rows.iq_slack = builder.next_iq;
  builder.next_iq += N * n;
  for (int k = 0; k < N; ++k)
    for (int c = 0; c < n; ++c) {
      const int row = rows.iq_slack + k * n + c;
      builder.G.emplace_back(row, vars.sig_off + k * n + c, -1.0);
      builder.h[row] = 0.0;
    }

  return rows;
}

}  // namespace detail

MonolithicQp build_monolithic_qp(const std::vector<ThetaLocal>& theta,
                                 const Topology& topology, const MpcConfig& cfg,
                                 const std::vector<Vec>& state,
                                 const std::vector<Vec>* action) {
  const int M = topology.num_agents;
  const bool q_mode = action != nullptr;
  if (static_cast<int>(theta.size()) != M || static_cast<int>(state.size()) != M)
    throw std::invalid_argument("build_monolithic_qp: one theta and state per agent");
  for (int i = 0; i < M; ++i)
    if (theta[i].deg != topology.degree(i))
      throw std::invalid_argument("build_monolithic_qp: theta degree mismatch");

  const int own = detail::agent_own_vars(cfg);
  const int nz = M * own;
  int ne = 0, ni = 0;
  for (int i = 0; i < M; ++i) {
    ne += detail::agent_eq_rows(cfg, q_mode);
    ni += detail::agent_iq_rows(cfg, q_mode);
  }

  QpBuilder builder(nz, ne, ni);
  MonolithicQp out;
  out.q_mode = q_mode;
  out.var_idx.resize(M);
  out.row_idx.resize(M);

  const int n = cfg.n(), m = cfg.m(), N = cfg.horizon;
  for (int i = 0; i < M; ++i) {
    AgentVarIdx& v = out.var_idx[i];
    v.x_off = i * own;
    v.u_off = v.x_off + (N + 1) * n;
    v.sig_off = v.u_off + N * m;
    for (int j : topology.neighbors[i]) v.nb_x_off.push_back(j * own);
  }
  for (int i = 0; i < M; ++i)
    out.row_idx[i] = detail::append_agent_block(builder, theta[i], cfg, state[i],
                                                q_mode ? &(*action)[i] : nullptr,
                                                out.var_idx[i]);
  out.qp = builder.finish();
  return out;
}

PrimalDualSolution extract_agent_solution(const QpSolution& sol,
                                          const ThetaLocal& theta, const MpcConfig& cfg,
                                          const AgentVarIdx& vars, const AgentRowIdx& rows,
                                          bool q_mode, double weak_tol) {
  const int n = cfg.n(), m = cfg.m(), N = cfg.horizon;
  PrimalDualSolution p;
  p.X = Eigen::Map<const Mat>(sol.z.data() + vars.x_off, n, N + 1);
  p.U = Eigen::Map<const Mat>(sol.z.data() + vars.u_off, m, N);
  p.Sigma = Eigen::Map<const Mat>(sol.z.data() + vars.sig_off, n, N);
  for (int off : vars.nb_x_off)
    p.neighbor_X.push_back(Eigen::Map<const Mat>(sol.z.data() + off, n, N + 1));

  p.lambda_init = sol.lambda.segment(rows.eq_init, n);
  if (q_mode) p.lambda_action = sol.lambda.segment(rows.eq_action, m);
  p.lambda_dyn = Eigen::Map<const Mat>(sol.lambda.data() + rows.eq_dyn, n, N);

  p.mu_state_lo = Eigen::Map<const Mat>(sol.mu.data() + rows.iq_state_lo, n, N);
  p.mu_state_hi = Eigen::Map<const Mat>(sol.mu.data() + rows.iq_state_hi, n, N);
  const int k0 = q_mode ? 1 : 0;
  p.mu_u_lo = Mat::Zero(m, N);
  p.mu_u_hi = Mat::Zero(m, N);
  for (int k = k0; k < N; ++k)
    for (int c = 0; c < m; ++c) {
      p.mu_u_lo(c, k) = sol.mu[rows.iq_u_lo + (k - k0) * m + c];
      p.mu_u_hi(c, k) = sol.mu[rows.iq_u_hi + (k - k0) * m + c];
    }
  p.mu_slack = Eigen::Map<const Mat>(sol.mu.data() + rows.iq_slack, n, N);

  // Weakly active inequalities (residual and multiplier both near zero) make
  // the sensitivity ill-posed; surfaced, not masked.
  auto weakly_active = [&](int row_begin, int count) {
    for (int r = row_begin; r < row_begin + count; ++r)
      if (std::abs(sol.slack[r]) < weak_tol && std::abs(sol.mu[r]) < weak_tol) return true;
    return false;
  };
  const int own_iq = detail::agent_iq_rows(cfg, q_mode);
  p.degenerate = weakly_active(rows.iq_state_lo, own_iq);

  p.objective_share = agent_objective_share(theta, cfg, p);
  return p;
}

double agent_objective_share(const ThetaLocal& theta, const MpcConfig& cfg,
                             const PrimalDualSolution& p) {
  const int n = cfg.n(), m = cfg.m(), N = cfg.horizon;
  double val = theta.v_offset;
  for (int k = 0; k < N; ++k) {
    const double gk = std::pow(cfg.gamma, k);
    val += theta.cost_linear.head(n).dot(p.X.col(k));
    val += theta.cost_linear.tail(m).dot(p.U.col(k));
    const double qx = theta.state_weight.dot(p.X.col(k));
    const double ru = theta.input_weight.dot(p.U.col(k));
    val += 0.5 * gk * (qx * qx + ru * ru + theta.slack_weight.dot(p.Sigma.col(k)));
  }
  return val;
}

namespace {

CentralizedEval solve_centralized(const std::vector<ThetaLocal>& theta,
                                  const Topology& topology, const MpcConfig& cfg,
                                  const std::vector<Vec>& state,
                                  const std::vector<Vec>* action, const QpOptions& opt,
                                  QpSolver* solver) {
  if (action) {
    for (std::size_t i = 0; i < action->size(); ++i)
      for (int c = 0; c < cfg.m(); ++c)
        if ((*action)[i][c] < cfg.u_min[c] - 1e-9 || (*action)[i][c] > cfg.u_max[c] + 1e-9) {
          std::ostringstream msg;
          msg << "action of agent " << i << " outside input bounds: " << (*action)[i][c];
          throw InfeasibleActionError(msg.str());
        }
  }

  const MonolithicQp mono = build_monolithic_qp(theta, topology, cfg, state, action);
  QpSolver local_solver;
  QpSolver& qs = solver ? *solver : local_solver;
  const QpSolution sol = qs.solve(mono.qp, opt);
  if (!sol.converged) {
    std::ostringstream msg;
    msg << "QP did not reach tolerance: stationarity=" << sol.res_stationarity
        << " equality=" << sol.res_equality << " inequality=" << sol.res_inequality
        << " gap=" << sol.gap << " after " << sol.iterations << " iterations";
    throw SolverFailure(msg.str());
  }

  CentralizedEval out;
  out.value = sol.objective;
  out.raw = sol;
  for (int i = 0; i < topology.num_agents; ++i) {
    out.agents.push_back(extract_agent_solution(sol, theta[i], cfg, mono.var_idx[i],
                                                mono.row_idx[i], mono.q_mode));
    out.greedy_action.push_back(out.agents.back().U.col(0));
  }
  return out;
}

}  // namespace

CentralizedEval solve_q_centralized(const std::vector<ThetaLocal>& theta,
                                    const Topology& topology, const MpcConfig& cfg,
                                    const std::vector<Vec>& state,
                                    const std::vector<Vec>& action, const QpOptions& opt,
                                    QpSolver* solver) {
  return solve_centralized(theta, topology, cfg, state, &action, opt, solver);
}

CentralizedEval solve_v_centralized(const std::vector<ThetaLocal>& theta,
                                    const Topology& topology, const MpcConfig& cfg,
                                    const std::vector<Vec>& state, const QpOptions& opt,
                                    QpSolver* solver) {
  return solve_centralized(theta, topology, cfg, state, nullptr, opt, solver);
}

}  // namespace dmpcq
