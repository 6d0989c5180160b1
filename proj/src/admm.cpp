#include "dmpcq/admm.hpp"

#include <cmath>
#include <sstream>

namespace dmpcq {

struct AdmmSolver::Impl {
  Topology topology;
  MpcConfig cfg;
  AdmmOptions opt;

  // Per-agent inner solvers, one per mode: the two modes have different KKT
  // sparsity, so they keep separate symbolic factorizations.
  std::vector<std::unique_ptr<QpSolver>> solver_v, solver_q;

  // Consensus state: agreed trajectory per owner and scaled duals per
  // (holder, owner) copy. Kept across solves for warm starting.
  std::vector<Vec> z;               // per owner, (N+1)*n
  std::vector<std::vector<Vec>> y;  // y[i][slot]: slot 0 = own, then neighbors
  bool have_state = false;

  int traj_len() const { return (cfg.horizon + 1) * cfg.n(); }

  void reset_state() {
    const int M = topology.num_agents;
    z.assign(M, Vec::Zero(traj_len()));
    y.assign(M, {});
    for (int i = 0; i < M; ++i)
      y[i].assign(1 + topology.degree(i), Vec::Zero(traj_len()));
    have_state = true;
  }
};

AdmmSolver::AdmmSolver(const Topology& topology, const MpcConfig& cfg, AdmmOptions opt)
    : impl_(std::make_unique<Impl>()) {
  impl_->topology = topology;
  impl_->cfg = cfg;
  impl_->opt = opt;
  for (int i = 0; i < topology.num_agents; ++i) {
    impl_->solver_v.push_back(std::make_unique<QpSolver>());
    impl_->solver_q.push_back(std::make_unique<QpSolver>());
  }
  impl_->reset_state();
}

AdmmSolver::~AdmmSolver() = default;
AdmmSolver::AdmmSolver(AdmmSolver&&) noexcept = default;
AdmmSolver& AdmmSolver::operator=(AdmmSolver&&) noexcept = default;

const AdmmOptions& AdmmSolver::options() const { return impl_->opt; }

void AdmmSolver::clear_warm_state() { impl_->reset_state(); }

void AdmmSolver::shift_warm_state() {
  auto& im = *impl_;
  const int n = im.cfg.n(), N = im.cfg.horizon;
  auto shift = [&](Vec& v) {
    for (int k = 0; k < N; ++k) v.segment(k * n, n) = v.segment((k + 1) * n, n);
  };
  for (auto& zi : im.z) shift(zi);
  for (auto& yi : im.y)
    for (auto& yij : yi) shift(yij);
}

AdmmResult AdmmSolver::solve(const std::vector<ThetaLocal>& thetas,
                             const std::vector<Vec>& state, const std::vector<Vec>* action,
                             MessageLog* log) {
  auto& im = *impl_;
  const Topology& topo = im.topology;
  const MpcConfig& cfg = im.cfg;
  const int M = topo.num_agents;
  const int n = cfg.n(), m = cfg.m(), N = cfg.horizon;
  const int traj = im.traj_len();
  const bool q_mode = action != nullptr;
  const double rho = im.opt.rho;

  if (!im.opt.warm_start || !im.have_state) im.reset_state();

  // Each agent's subproblem is built once per call; only the penalty part of
  // the linear term changes across rounds.
  struct Local {
    QpProblem prob;
    Vec q_base;
    AgentVarIdx vars;
    AgentRowIdx rows;
    std::vector<int> member_owner;   // consensus owner per penalized block
    std::vector<int> member_offset;  // variable offset of that block
    std::vector<int> member_slot;    // slot in y[i]
    QpSolution sol;
  };
  std::vector<Local> locals(M);

  for (int i = 0; i < M; ++i) {
    Local& L = locals[i];
    const int own = detail::agent_own_vars(cfg);
    const int deg = topo.degree(i);
    const int nz = own + deg * traj;
    const int ne = detail::agent_eq_rows(cfg, q_mode);
    const int ni = detail::agent_iq_rows(cfg, q_mode);

    QpBuilder builder(nz, ne, ni);
    L.vars.x_off = 0;
    L.vars.u_off = (N + 1) * n;
    L.vars.sig_off = L.vars.u_off + N * m;
    for (int jj = 0; jj < deg; ++jj) L.vars.nb_x_off.push_back(own + jj * traj);
    L.rows = detail::append_agent_block(builder, thetas[i], cfg, state[i],
                                        q_mode ? &(*action)[i] : nullptr, L.vars);

    // Quadratic penalty toward the agreed trajectories. A variable with a
    // single holder (own trajectory when M == 1) needs no consensus.
    if (deg > 0) {
      L.member_owner.push_back(i);
      L.member_offset.push_back(L.vars.x_off);
      L.member_slot.push_back(0);
    }
    for (int jj = 0; jj < deg; ++jj) {
      L.member_owner.push_back(topo.neighbors[i][jj]);
      L.member_offset.push_back(L.vars.nb_x_off[jj]);
      L.member_slot.push_back(1 + jj);
    }
    for (std::size_t mm = 0; mm < L.member_offset.size(); ++mm)
      for (int c = 0; c < traj; ++c)
        builder.P.emplace_back(L.member_offset[mm] + c, L.member_offset[mm] + c, rho);

    L.prob = builder.finish();
    L.q_base = L.prob.q;
  }

  const int rounds = (M == 1) ? 1 : im.opt.iterations;
  double primal_res = 0.0, dual_res = 0.0;

  for (int round = 0; round < rounds; ++round) {
    // Local minimization against the previous round's agreement and duals.
    for (int i = 0; i < M; ++i) {
      Local& L = locals[i];
      L.prob.q = L.q_base;
      for (std::size_t mm = 0; mm < L.member_offset.size(); ++mm) {
        const int owner = L.member_owner[mm];
        L.prob.q.segment(L.member_offset[mm], traj) -=
            rho * (im.z[owner] - im.y[i][L.member_slot[mm]]);
      }
      QpSolver& solver = q_mode ? *im.solver_q[i] : *im.solver_v[i];
      const QpSolution* hint = round > 0 ? &L.sol : nullptr;
      L.sol = solver.solve(L.prob, im.opt.qp, hint);
      if (!L.sol.converged) {
        std::ostringstream msg;
        msg << "agent " << i << " local subproblem failed: stationarity="
            << L.sol.res_stationarity << " equality=" << L.sol.res_equality
            << " inequality=" << L.sol.res_inequality << " gap=" << L.sol.gap;
        throw SolverFailure(msg.str());
      }
    }

    if (M == 1) break;

    // Each agent ships (copy + dual) for every neighbor-owned trajectory.
    if (log) {
      for (int i = 0; i < M; ++i)
        for (int j : topo.neighbors[i])
          log->record({"admm", "trajectory_copy", log->step(), round, i, j, traj});
    }

    // Agreement update: average every copy of each trajectory over its
    // holders, then broadcast the result back to them.
    std::vector<Vec> z_new(M);
    for (int j = 0; j < M; ++j) {
      Vec acc = locals[j].sol.z.segment(locals[j].vars.x_off, traj) + im.y[j][0];
      for (int holder : topo.neighbors[j]) {
        const Local& L = locals[holder];
        for (std::size_t mm = 0; mm < L.member_owner.size(); ++mm)
          if (L.member_owner[mm] == j) {
            acc += L.sol.z.segment(L.member_offset[mm], traj) +
                   im.y[holder][L.member_slot[mm]];
            break;
          }
      }
      z_new[j] = acc / static_cast<double>(topo.degree(j) + 1);
    }
    if (log) {
      for (int j = 0; j < M; ++j)
        for (int i : topo.neighbors[j])
          log->record({"admm", "consensus_broadcast", log->step(), round, j, i, traj});
    }

    dual_res = 0.0;
    for (int j = 0; j < M; ++j) dual_res += (z_new[j] - im.z[j]).squaredNorm();
    dual_res = rho * std::sqrt(dual_res);
    im.z = std::move(z_new);

    // Scaled dual update and primal residual.
    primal_res = 0.0;
    for (int i = 0; i < M; ++i) {
      Local& L = locals[i];
      for (std::size_t mm = 0; mm < L.member_offset.size(); ++mm) {
        const Vec gap =
            L.sol.z.segment(L.member_offset[mm], traj) - im.z[L.member_owner[mm]];
        im.y[i][L.member_slot[mm]] += gap;
        primal_res += gap.squaredNorm();
      }
    }
    primal_res = std::sqrt(primal_res);
  }

  AdmmResult out;
  out.primal_residual = primal_res;
  out.dual_residual = dual_res;
  for (int i = 0; i < M; ++i) {
    Local& L = locals[i];
    AdmmAgentResult ar;
    ar.p = extract_agent_solution(L.sol, thetas[i], cfg, L.vars, L.rows, q_mode);
    ar.value_share = ar.p.objective_share;
    out.agents.push_back(std::move(ar));
  }
  return out;
}

namespace {

DistributedEval finish_distributed(AdmmResult&& admm, const ConsensusScheme& consensus,
                                   bool v_mode) {
  DistributedEval out;
  std::vector<Vec> shares;
  for (const auto& a : admm.agents) shares.push_back(Vec::Constant(1, a.value_share));
  const auto summed = consensus.sum(shares);
  for (const auto& v : summed) out.value.push_back(v[0]);
  if (v_mode)
    for (const auto& a : admm.agents) out.local_action.push_back(a.p.U.col(0));
  out.primal_residual = admm.primal_residual;
  out.dual_residual = admm.dual_residual;
  out.agents = std::move(admm.agents);
  return out;
}

}  // namespace

DistributedEval evaluate_q_distributed(AdmmSolver& solver,
                                       const std::vector<ThetaLocal>& thetas,
                                       const std::vector<Vec>& state,
                                       const std::vector<Vec>& action,
                                       const ConsensusScheme& consensus, MessageLog* log) {
  return finish_distributed(solver.solve(thetas, state, &action, log), consensus, false);
}

DistributedEval evaluate_v_distributed(AdmmSolver& solver,
                                       const std::vector<ThetaLocal>& thetas,
                                       const std::vector<Vec>& state,
                                       const ConsensusScheme& consensus, MessageLog* log) {
  return finish_distributed(solver.solve(thetas, state, nullptr, log), consensus, true);
}

}  // namespace dmpcq
