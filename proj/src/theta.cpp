#include "dmpcq/theta.hpp"

#include <stdexcept>

namespace dmpcq {

ThetaLocal ThetaLocal::zeros(int n, int m, int deg) {
  ThetaLocal t;
  t.n = n;
  t.m = m;
  t.deg = deg;
  t.x_lo_offset = Vec::Zero(n);
  t.x_hi_offset = Vec::Zero(n);
  t.model_bias = Vec::Zero(n);
  t.cost_linear = Vec::Zero(n + m);
  t.state_weight = Vec::Zero(n);
  t.input_weight = Vec::Zero(m);
  t.slack_weight = Vec::Zero(n);
  t.model_a_upper = Vec::Zero(n * (n + 1) / 2);
  t.model_coupling = Vec::Zero(deg);
  t.model_b = Mat::Zero(n, m);
  return t;
}

int ThetaLocal::size() const { return 1 + 6 * n + 2 * m + n * (n + 1) / 2 + deg + n * m; }

Vec ThetaLocal::flatten() const {
  Vec out(size());
  out[idx_v()] = v_offset;
  out.segment(idx_x_lo(), n) = x_lo_offset;
  out.segment(idx_x_hi(), n) = x_hi_offset;
  out.segment(idx_bias(), n) = model_bias;
  out.segment(idx_cost_linear(), n + m) = cost_linear;
  out.segment(idx_state_weight(), n) = state_weight;
  out.segment(idx_input_weight(), m) = input_weight;
  out.segment(idx_slack_weight(), n) = slack_weight;
  out.segment(idx_a_upper(), n * (n + 1) / 2) = model_a_upper;
  out.segment(idx_coupling(), deg) = model_coupling;
  out.segment(idx_b(), n * m) = Eigen::Map<const Vec>(model_b.data(), n * m);
  return out;
}

ThetaLocal ThetaLocal::unflatten(const Vec& flat, int n, int m, int deg) {
  ThetaLocal t = zeros(n, m, deg);
  if (flat.size() != t.size())
    throw std::invalid_argument("ThetaLocal::unflatten: wrong vector length");
  t.v_offset = flat[t.idx_v()];
  t.x_lo_offset = flat.segment(t.idx_x_lo(), n);
  t.x_hi_offset = flat.segment(t.idx_x_hi(), n);
  t.model_bias = flat.segment(t.idx_bias(), n);
  t.cost_linear = flat.segment(t.idx_cost_linear(), n + m);
  t.state_weight = flat.segment(t.idx_state_weight(), n);
  t.input_weight = flat.segment(t.idx_input_weight(), m);
  t.slack_weight = flat.segment(t.idx_slack_weight(), n);
  t.model_a_upper = flat.segment(t.idx_a_upper(), n * (n + 1) / 2);
  t.model_coupling = flat.segment(t.idx_coupling(), deg);
  t.model_b = Eigen::Map<const Mat>(flat.segment(t.idx_b(), n * m).data(), n, m);
  return t;
}

Mat ThetaLocal::model_a() const {
  Mat A = Mat::Zero(n, n);
  int pos = 0;
  for (int r = 0; r < n; ++r)
    for (int c = r; c < n; ++c) A(r, c) = model_a_upper[pos++];
  return A;
}

Mat ThetaLocal::model_a_couple(int idx) const {
  Mat A = Mat::Zero(n, n);
  A(n - 1, n - 1) = model_coupling[idx];
  return A;
}

}  // namespace dmpcq
