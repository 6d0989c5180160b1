#pragma once

#include <vector>

#include "dmpcq/environment.hpp"
#include "dmpcq/mpc.hpp"
#include "dmpcq/theta.hpp"
#include "dmpcq/topology.hpp"
#include "dmpcq/types.hpp"

// Shared benchmark-shaped fixtures. Values mirror tests/oracles/qp_reference.py,
// which freezes the reference optimal values asserted in the test suites.
namespace fixtures {

using dmpcq::Mat;
using dmpcq::Vec;

inline Vec vec1(double a) {
  Vec v(1);
  v << a;
  return v;
}

inline Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

inline dmpcq::MpcConfig mpc_config() {
  dmpcq::MpcConfig cfg;
  cfg.horizon = 10;
  cfg.gamma = 0.9;
  cfg.s_min = vec2(0.0, -1.0);
  cfg.s_max = vec2(1.0, 1.0);
  cfg.u_min = vec1(-1.0);
  cfg.u_max = vec1(1.0);
  return cfg;
}

inline dmpcq::ThetaLocal default_theta(int deg) {
  auto t = dmpcq::ThetaLocal::zeros(2, 1, deg);
  t.state_weight = vec2(1.0, 1.0);
  t.input_weight = vec1(0.5);
  t.slack_weight = vec2(500.0, 500.0);
  t.model_a_upper = Vec(3);
  t.model_a_upper << 1.0, 0.25, 1.0;
  t.model_b = Mat(2, 1);
  t.model_b << 0.0312, 0.25;
  return t;
}

inline std::vector<dmpcq::ThetaLocal> chain3_thetas() {
  return {default_theta(1), default_theta(2), default_theta(1)};
}

// Perturbed parameter set exercising every learnable block; probe B of the
// reference script.
inline dmpcq::ThetaLocal probe_b_theta(int i, int deg) {
  auto t = default_theta(deg);
  t.v_offset = 0.3 * (i + 1);
  t.x_lo_offset = vec2(-0.05, 0.02 * (i + 1));
  t.x_hi_offset = vec2(0.04, -0.03);
  t.model_bias = vec2(0.01 * (i + 1), -0.02);
  t.cost_linear = Vec(3);
  t.cost_linear << 0.1, -0.05, 0.2 * (i + 1);
  t.state_weight = vec2(1.1, 0.8 + 0.1 * i);
  t.input_weight = vec1(0.6);
  t.slack_weight = vec2(480.0, 520.0);
  t.model_a_upper << 0.95, 0.2, 1.05;
  t.model_coupling = Vec::Constant(deg, -0.08);
  t.model_b << 0.05, 0.22;
  return t;
}

inline std::vector<dmpcq::ThetaLocal> probe_b_thetas() {
  return {probe_b_theta(0, 1), probe_b_theta(1, 2), probe_b_theta(2, 1)};
}

inline std::vector<Vec> probe_b_states() {
  return {vec2(-0.08, 0.9), vec2(0.95, -0.85), vec2(0.4, 0.2)};
}

inline std::vector<Vec> probe_b_actions() {
  return {vec1(0.3), vec1(-0.7), vec1(0.05)};
}

inline dmpcq::TrueDynamics true_dynamics(const dmpcq::Topology& topology) {
  dmpcq::TrueDynamics dyn;
  Mat A(2, 2), Aij(2, 2), B(2, 1);
  A << 0.9, 0.35, 0.0, 1.1;
  Aij << 0.0, 0.0, 0.0, -0.1;
  B << 0.0813, 0.2;
  for (int i = 0; i < topology.num_agents; ++i) {
    dyn.A.push_back(A);
    dyn.B.push_back(B);
    dyn.A_couple.emplace_back(topology.degree(i), Aij);
  }
  dyn.noise_low = -0.1;
  dyn.noise_high = 0.0;
  dyn.noise_mask = vec2(1.0, 0.0);
  return dyn;
}

inline dmpcq::StageCostSpec stage_cost() {
  dmpcq::StageCostSpec c;
  c.s_min = vec2(0.0, -1.0);
  c.s_max = vec2(1.0, 1.0);
  c.omega = vec2(500.0, 500.0);
  return c;
}

}  // namespace fixtures
