#include "dmpcq/learner.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dmpcq {

std::vector<int> ReplayBuffer::sample_without_replacement(int count, RngStream& rng) const {
  if (count > size())
    throw std::logic_error("replay buffer: not enough transitions to sample");
  std::vector<int> idx(size());
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < count; ++i) {
    const int j = i + static_cast<int>(rng.uniform_index(idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  return idx;
}

double choose_regularizer(const Mat& K, int T, RegularizerMode mode) {
  Eigen::SelfAdjointEigenSolver<Mat> es(K, Eigen::EigenvaluesOnly);
  const Vec& lam = es.eigenvalues();
  if (mode == RegularizerMode::posdef) {
    constexpr double sigma_min = 1e-6, eps = 1e-6;
    return std::max(sigma_min, (lam.maxCoeff() + eps) / static_cast<double>(T));
  }
  const double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
  for (int j = 0; j <= 16; ++j) {
    const double sigma = 1e-8 * std::pow(10.0, j);
    double margin = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < lam.size(); ++k)
      margin = std::min(margin, std::abs(T * sigma - lam[k]));
    if (margin > 1e-9 * scale) return sigma;
  }
  // Finitely many eigenvalues cannot block the whole grid; defensive fallback.
  return 1e8;
}

Mat k_tilde(const Mat& K, double sigma, int T) {
  Eigen::SelfAdjointEigenSolver<Mat> es(K);
  const Vec inv = (T * sigma - es.eigenvalues().array()).inverse().matrix();
  Mat out = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
  out = 0.5 * (out + out.transpose());
  return out;
}

Vec pack_upper_triangle(const Mat& C) {
  const int T = static_cast<int>(C.rows());
  Vec out(T * (T + 1) / 2);
  int pos = 0;
  for (int r = 0; r < T; ++r)
    for (int c = r; c < T; ++c) out[pos++] = C(r, c);
  return out;
}

Mat unpack_upper_triangle(const Vec& packed, int T) {
  Mat C(T, T);
  int pos = 0;
  for (int r = 0; r < T; ++r)
    for (int c = r; c < T; ++c) {
      C(r, c) = packed[pos];
      C(c, r) = packed[pos];
      ++pos;
    }
  return C;
}

Vec local_c_contribution(const Mat& G_i, const Mat& K_tilde_i) {
  return pack_upper_triangle(G_i.transpose() * K_tilde_i * G_i);
}

std::vector<Mat> assemble_C_distributed(const std::vector<Mat>& G_blocks,
                                        const std::vector<Mat>& K_tilde_blocks,
                                        const ConsensusScheme& consensus) {
  const int T = static_cast<int>(G_blocks.at(0).cols());
  std::vector<Vec> contributions;
  for (std::size_t i = 0; i < G_blocks.size(); ++i)
    contributions.push_back(local_c_contribution(G_blocks[i], K_tilde_blocks[i]));
  const auto summed = consensus.sum(contributions);
  std::vector<Mat> out;
  for (const auto& v : summed) out.push_back(unpack_upper_triangle(v, T));
  return out;
}

CombinationResult update_combination(const Mat& C, const Vec& delta) {
  Eigen::SelfAdjointEigenSolver<Mat> es(C);
  const Vec lam = es.eigenvalues();
  CombinationResult res;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (Eigen::Index k = 0; k < lam.size(); ++k) {
    lo = std::min(lo, std::abs(1.0 + lam[k]));
    hi = std::max(hi, std::abs(1.0 + lam[k]));
  }
  // The identity block pins the natural scale of I + C at one, so the
  // singularity estimate is taken relative to max(1, |I + C|).
  res.cond = lo > 0.0 ? std::max(1.0, hi) / lo : std::numeric_limits<double>::infinity();
  const Vec cd = C * delta;
  const Vec inv = (1.0 + lam.array()).inverse().matrix();
  res.e = delta - es.eigenvectors() * (inv.asDiagonal() *
                                       (es.eigenvectors().transpose() * cd));
  return res;
}

void second_order_direction(UpdateWorkspace& ws, double cond_limit) {
  const std::size_t M = ws.G.size();
  ws.direction.assign(M, Vec());
  ws.max_cond = 0.0;
  ws.skipped = false;

  std::vector<Vec> combos(M);
  for (std::size_t i = 0; i < M; ++i) {
    const auto res = update_combination(ws.C[i], ws.delta);
    ws.max_cond = std::max(ws.max_cond, res.cond);
    combos[i] = res.e;
  }
  // Agents abandon the update in lockstep when any of them sees a singular
  // combination matrix (with consensus, their copies agree).
  if (ws.max_cond > cond_limit) {
    ws.skipped = true;
    for (std::size_t i = 0; i < M; ++i) ws.direction[i] = Vec::Zero(ws.G[i].rows());
    return;
  }
  // The same K_tilde map must back both the consensus matrix and this final
  // product: the low-rank update identity cancels their (backward-stable)
  // errors only when the two computations share it exactly.
  for (std::size_t i = 0; i < M; ++i)
    ws.direction[i] = -(ws.K_tilde[i] * (ws.G[i] * combos[i]));
}

UpdateWorkspace build_second_order_update(const std::vector<Mat>& G_blocks,
                                          const std::vector<Mat>& K_blocks,
                                          const Vec& delta, RegularizerMode mode,
                                          double alpha, const ConsensusScheme& consensus,
                                          double cond_limit) {
  const int T = static_cast<int>(delta.size());
  UpdateWorkspace ws;
  ws.delta = delta;
  ws.G = G_blocks;
  ws.K = K_blocks;
  ws.alpha = alpha;
  for (std::size_t i = 0; i < G_blocks.size(); ++i) {
    ws.sigma.push_back(choose_regularizer(K_blocks[i], T, mode));
    ws.K_tilde.push_back(k_tilde(K_blocks[i], ws.sigma.back(), T));
  }
  ws.C = assemble_C_distributed(ws.G, ws.K_tilde, consensus);
  second_order_direction(ws, cond_limit);
  return ws;
}

std::vector<Vec> second_order_recursive_direction(const std::vector<Vec>& g_blocks,
                                                  double delta, double sigma,
                                                  const ConsensusScheme& consensus) {
  std::vector<Vec> sq;
  for (const auto& g : g_blocks) sq.push_back(Vec::Constant(1, g.squaredNorm()));
  const auto summed = consensus.sum(sq);
  std::vector<Vec> out;
  for (std::size_t i = 0; i < g_blocks.size(); ++i)
    out.push_back((-delta / (sigma + summed[i][0])) * g_blocks[i]);
  return out;
}

Vec first_order_local_update(const Vec& theta_i, const Mat& G_i, const Vec& delta,
                             double alpha) {
  const double T = static_cast<double>(delta.size());
  return theta_i + (alpha / T) * (G_i * delta);
}

CentralizedUpdate centralized_second_order_update(const Vec& theta_stacked,
                                                  const std::vector<Mat>& G_blocks,
                                                  const std::vector<Mat>& K_blocks,
                                                  const Vec& delta,
                                                  const std::vector<double>& sigma,
                                                  double alpha, double cond_limit) {
  const int T = static_cast<int>(delta.size());
  const std::size_t M = G_blocks.size();
  int n_theta = 0;
  for (const auto& G : G_blocks) n_theta += static_cast<int>(G.rows());
  if (theta_stacked.size() != n_theta)
    throw std::invalid_argument("centralized update: stacked theta length mismatch");

  // Stacked gradients per sample and the block-diagonal curvature.
  Mat U(n_theta, T);
  Mat K = Mat::Zero(n_theta, n_theta);
  Mat Lambda = Mat::Zero(n_theta, n_theta);
  int off = 0;
  for (std::size_t i = 0; i < M; ++i) {
    const int ni = static_cast<int>(G_blocks[i].rows());
    U.block(off, 0, ni, T) = G_blocks[i];
    K.block(off, off, ni, ni) = K_blocks[i];
    Lambda.block(off, off, ni, ni) = sigma[i] * Mat::Identity(ni, ni);
    off += ni;
  }

  const Mat H = (U * U.transpose() - K) / static_cast<double>(T);
  const Vec q = -(U * delta) / static_cast<double>(T);
  const Mat HL = H + Lambda;

  CentralizedUpdate out;
  Eigen::SelfAdjointEigenSolver<Mat> es(HL);
  const Vec lam = es.eigenvalues();
  const double hi = lam.cwiseAbs().maxCoeff();
  const double lo = lam.cwiseAbs().minCoeff();
  out.cond = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  // A minimal ridge leaves the system legitimately ill-conditioned; only a
  // numerically singular matrix (rank-deficient at machine precision) is
  // skipped.
  (void)cond_limit;
  if (lo <= 1e-15 * std::max(1.0, hi)) {
    out.skipped = true;
    out.theta = theta_stacked;
    out.direction = Vec::Zero(n_theta);
    return out;
  }
  out.direction = es.eigenvectors() *
                  ((es.eigenvectors().transpose() * q).array() / lam.array()).matrix();
  out.theta = theta_stacked - alpha * out.direction;
  return out;
}

Vec explore(const Vec& greedy, const ExplorationSchedule& schedule, std::int64_t t,
            RngStream& rng, const Vec& u_min, const Vec& u_max) {
  const double eps = schedule.epsilon(t);
  Vec out(greedy.size());
  for (Eigen::Index c = 0; c < greedy.size(); ++c) {
    const double perturbed = greedy[c] + rng.uniform(-eps, eps);
    out[c] = std::clamp(perturbed, u_min[c], u_max[c]);
  }
  return out;
}

}  // namespace dmpcq
