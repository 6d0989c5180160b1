#pragma once

#include "dmpcq/mpc.hpp"
#include "dmpcq/theta.hpp"
#include "dmpcq/types.hpp"

namespace dmpcq {

/// Gradient of one agent's local Lagrangian in its own parameters, evaluated
/// at a fixed optimal primal-dual point. Closed form for the quadratic-affine
/// parameterization; layout matches ThetaLocal::flatten.
Vec lagrangian_gradient(const ThetaLocal& theta, const MpcConfig& cfg,
                        const PrimalDualSolution& p);

/// Second derivative of the local Lagrangian in the agent's parameters at a
/// fixed primal-dual point. Only the squared-linear cost terms contribute, so
/// the matrix is zero outside the state_weight and input_weight blocks.
Mat lagrangian_hessian(const ThetaLocal& theta, const MpcConfig& cfg,
                       const PrimalDualSolution& p);

/// Cached per-transition sensitivity information of one agent.
struct SensitivitySample {
  Vec gradient;    // d L_i / d theta_i at the stored solution
  Mat hessian;     // d^2 L_i / d theta_i^2, symmetric
  double td_error = 0.0;
  bool degenerate = false;
};

}  // namespace dmpcq
