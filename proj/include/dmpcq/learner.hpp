#pragma once

#include <deque>
#include <vector>

#include "dmpcq/consensus.hpp"
#include "dmpcq/rng.hpp"
#include "dmpcq/sensitivity.hpp"
#include "dmpcq/types.hpp"

namespace dmpcq {

/// One-step Bellman residual L + gamma*V(s') - Q(s, a).
inline double td_error(double cost, double gamma, double v_next, double q) {
  return cost + gamma * v_next - q;
}

/// Stored transition with cached per-agent sensitivities. Values that reach
/// agents through consensus (the TD error) are stored per agent: with finite
/// consensus iterations each agent holds its own estimate.
struct Transition {
  std::vector<Vec> state, action, next_state;
  Vec local_costs;
  double global_cost = 0.0;
  std::vector<SensitivitySample> sens;  // one per agent
  Vec delta;                            // per-agent TD error estimate
};

/// Ring buffer of the most recent transitions.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity) : capacity_(capacity) {}

  void push(Transition t) {
    buf_.push_back(std::move(t));
    if (static_cast<int>(buf_.size()) > capacity_) buf_.pop_front();
  }
  int size() const { return static_cast<int>(buf_.size()); }
  int capacity() const { return capacity_; }
  const Transition& at(int idx) const { return buf_[idx]; }

  /// Uniform sample of distinct indices, order as drawn.
  std::vector<int> sample_without_replacement(int count, RngStream& rng) const;

 private:
  std::deque<Transition> buf_;
  int capacity_;
};

enum class RegularizerMode { posdef, nonsingular };

/// Levenberg-style regularizer for the TD-weighted curvature matrix K.
/// posdef: sigma = max(1e-6, (lambda_max(K) + 1e-6)/T), which certifies
/// T*sigma*I - K > 0. nonsingular: the smallest sigma from the grid
/// {1e-8 * 10^j, j = 0..16} keeping every eigenvalue of T*sigma*I - K away
/// from zero (relative margin 1e-9).
double choose_regularizer(const Mat& K, int T, RegularizerMode mode);

/// (T*sigma*I - K)^{-1} through the eigendecomposition of K; exactly
/// symmetric by construction.
Mat k_tilde(const Mat& K, double sigma, int T);

/// Packing of a symmetric T x T matrix as its upper triangle, row-major.
Vec pack_upper_triangle(const Mat& C);
Mat unpack_upper_triangle(const Vec& packed, int T);

/// Agent-local contribution to the consensus matrix: upper triangle of
/// G_i' K_tilde_i G_i.
Vec local_c_contribution(const Mat& G_i, const Mat& K_tilde_i);

/// Gram-style cross-sample matrix assembled by consensus; every agent ends
/// up holding (an estimate of) the same symmetric T x T matrix, at the price
/// of T(T+1)/2 consensus scalars.
std::vector<Mat> assemble_C_distributed(const std::vector<Mat>& G_blocks,
                                        const std::vector<Mat>& K_tilde_blocks,
                                        const ConsensusScheme& consensus);

/// delta - (I+C)^{-1} C delta via the eigendecomposition of C (a size-T
/// factorization); cond is the condition number of I + C.
struct CombinationResult {
  Vec e;
  double cond = 0.0;
};
CombinationResult update_combination(const Mat& C, const Vec& delta);

/// Everything one second-order update touches; kept for logging and tests.
struct UpdateWorkspace {
  Vec delta;                 // sampled TD errors (one consensus copy)
  std::vector<Mat> G;        // per agent, n_theta_i x T
  std::vector<Mat> K;        // per agent TD-weighted curvature
  std::vector<Mat> K_tilde;  // per agent regularized inverse
  std::vector<double> sigma;
  std::vector<Mat> C;        // per agent consensus copy
  std::vector<Vec> direction;
  double alpha = 0.0;
  bool skipped = false;      // I + C judged numerically singular
  double max_cond = 0.0;
};

/// Per-agent direction d_i = -K_tilde_i G_i (delta - (I+C)^{-1} C delta),
/// using each agent's own consensus copy of C. Sets skipped (and leaves the
/// directions zero) when any agent's I + C condition estimate exceeds
/// cond_limit; with a positive-definite regularizer this cannot happen.
void second_order_direction(UpdateWorkspace& ws, double cond_limit = 1e12);

/// Full distributed second-order step: regularizer choice, local inverses,
/// consensus on the cross-sample matrix, and the per-agent directions.
UpdateWorkspace build_second_order_update(const std::vector<Mat>& G_blocks,
                                          const std::vector<Mat>& K_blocks,
                                          const Vec& delta, RegularizerMode mode,
                                          double alpha, const ConsensusScheme& consensus,
                                          double cond_limit = 1e12);

/// Single-sample, zero-curvature special case: d_i scales the local gradient
/// by -delta / (sigma + ||g||^2), the squared gradient norm reaching every
/// agent by consensus over the local squared norms.
std::vector<Vec> second_order_recursive_direction(const std::vector<Vec>& g_blocks,
                                                  double delta, double sigma,
                                                  const ConsensusScheme& consensus);

/// First-order step on one agent's parameters: theta + (alpha/T) * G_i delta.
Vec first_order_local_update(const Vec& theta_i, const Mat& G_i, const Vec& delta,
                             double alpha);

/// Centralized second-order oracle: solves (H + Lambda) d = q densely over
/// the stacked parameters and returns theta - alpha * d. Reference path for
/// the distributed update and the centralized learner variant.
struct CentralizedUpdate {
  Vec theta;
  Vec direction;
  bool skipped = false;
  double cond = 0.0;
};
CentralizedUpdate centralized_second_order_update(const Vec& theta_stacked,
                                                  const std::vector<Mat>& G_blocks,
                                                  const std::vector<Mat>& K_blocks,
                                                  const Vec& delta,
                                                  const std::vector<double>& sigma,
                                                  double alpha, double cond_limit = 1e12);

/// Exploration: uniform perturbation of geometrically decaying magnitude,
/// clipped to the input box.
struct ExplorationSchedule {
  double epsilon0 = 0.5;
  double decay = 0.9995;
  double epsilon(std::int64_t t) const { return epsilon0 * std::pow(decay, static_cast<double>(t)); }
};

Vec explore(const Vec& greedy, const ExplorationSchedule& schedule, std::int64_t t,
            RngStream& rng, const Vec& u_min, const Vec& u_max);

}  // namespace dmpcq
