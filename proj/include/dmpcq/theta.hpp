#pragma once

#include <vector>

#include "dmpcq/types.hpp"

namespace dmpcq {

/// One agent's learnable parameter vector with named sub-blocks.
///
/// The prediction model is structured: the own-state matrix is upper
/// triangular (subdiagonal entries are fixed zeros), each neighbor coupling
/// block has a single learnable entry in its lower-right corner, and the
/// input matrix is fully learnable.
///
/// Flattening order (fixed, round-trips exactly):
///   [ v_offset (1) | x_lo_offset (n) | x_hi_offset (n) | model_bias (n) |
///     cost_linear (n+m) | state_weight (n) | input_weight (m) |
///     slack_weight (n) | model_a_upper (n(n+1)/2, row-major upper triangle) |
///     model_coupling (one per neighbor, ascending neighbor index) |
///     model_b (n*m, column-major) ]
struct ThetaLocal {
  int n = 0, m = 0, deg = 0;

  double v_offset = 0.0;  // constant added to the objective
  Vec x_lo_offset;        // n, shifts the lower state bound
  Vec x_hi_offset;        // n, shifts the upper state bound
  Vec model_bias;         // n, affine term of the prediction model
  Vec cost_linear;        // n+m, weights on [x(k); u(k)]
  Vec state_weight;       // n, cost term (state_weight'x)^2
  Vec input_weight;       // m, cost term (input_weight'u)^2
  Vec slack_weight;       // n, linear penalty on bound slacks
  Vec model_a_upper;      // n(n+1)/2 upper-triangular model entries
  Vec model_coupling;     // deg, corner entry per neighbor block
  Mat model_b;            // n x m input matrix

  static ThetaLocal zeros(int n, int m, int deg);

  int size() const;
  Vec flatten() const;
  static ThetaLocal unflatten(const Vec& flat, int n, int m, int deg);

  /// Assembles the n x n own-state model matrix from the upper-tri entries.
  Mat model_a() const;
  /// Assembles the coupling block for the neighbor at position idx in the
  /// agent's neighbor list: all zeros except the (n-1, n-1) corner.
  Mat model_a_couple(int idx) const;

  /// Offsets of the named blocks inside the flattened vector.
  int idx_v() const { return 0; }
  int idx_x_lo() const { return 1; }
  int idx_x_hi() const { return 1 + n; }
  int idx_bias() const { return 1 + 2 * n; }
  int idx_cost_linear() const { return 1 + 3 * n; }
  int idx_state_weight() const { return 1 + 4 * n + m; }
  int idx_input_weight() const { return 1 + 5 * n + m; }
  int idx_slack_weight() const { return 1 + 5 * n + 2 * m; }
  int idx_a_upper() const { return 1 + 6 * n + 2 * m; }
  int idx_coupling() const { return idx_a_upper() + n * (n + 1) / 2; }
  int idx_b() const { return idx_coupling() + deg; }
};

}  // namespace dmpcq
