#include "dmpcq/sensitivity.hpp"

#include <cmath>

namespace dmpcq {

Vec lagrangian_gradient(const ThetaLocal& theta, const MpcConfig& cfg,
                        const PrimalDualSolution& p) {
  const int n = theta.n, m = theta.m, N = cfg.horizon;
  Vec g = Vec::Zero(theta.size());

  g[theta.idx_v()] = 1.0;

  for (int k = 0; k < N; ++k) {
    const double gk = std::pow(cfg.gamma, k);

    // Cost terms.
    g.segment(theta.idx_cost_linear(), n) += p.X.col(k);
    g.segment(theta.idx_cost_linear() + n, m) += p.U.col(k);
    g.segment(theta.idx_state_weight(), n) +=
        gk * theta.state_weight.dot(p.X.col(k)) * p.X.col(k);
    g.segment(theta.idx_input_weight(), m) +=
        gk * theta.input_weight.dot(p.U.col(k)) * p.U.col(k);
    g.segment(theta.idx_slack_weight(), n) += 0.5 * gk * p.Sigma.col(k);

    // Bound offsets through the state-bound multipliers.
    g.segment(theta.idx_x_lo(), n) += p.mu_state_lo.col(k);
    g.segment(theta.idx_x_hi(), n) -= p.mu_state_hi.col(k);

    // Model entries through the dynamics multipliers: the residual is
    // x(k+1) - A x(k) - B u(k) - sum_j A_j x_j(k) - bias.
    g.segment(theta.idx_bias(), n) -= p.lambda_dyn.col(k);
    int pos = theta.idx_a_upper();
    for (int r = 0; r < n; ++r)
      for (int c = r; c < n; ++c) g[pos++] -= p.lambda_dyn(r, k) * p.X(c, k);
    for (int jj = 0; jj < theta.deg; ++jj)
      g[theta.idx_coupling() + jj] -=
          p.lambda_dyn(n - 1, k) * p.neighbor_X[jj](n - 1, k);
    for (int c = 0; c < m; ++c)
      for (int r = 0; r < n; ++r)
        g[theta.idx_b() + c * n + r] -= p.lambda_dyn(r, k) * p.U(c, k);
  }
  return g;
}

Mat lagrangian_hessian(const ThetaLocal& theta, const MpcConfig& cfg,
                       const PrimalDualSolution& p) {
  const int n = theta.n, m = theta.m, N = cfg.horizon;
  Mat H = Mat::Zero(theta.size(), theta.size());
  for (int k = 0; k < N; ++k) {
    const double gk = std::pow(cfg.gamma, k);
    H.block(theta.idx_state_weight(), theta.idx_state_weight(), n, n) +=
        gk * p.X.col(k) * p.X.col(k).transpose();
    H.block(theta.idx_input_weight(), theta.idx_input_weight(), m, m) +=
        gk * p.U.col(k) * p.U.col(k).transpose();
  }
  return H;
}

}  // namespace dmpcq
