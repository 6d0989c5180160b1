#pragma once

#include <Eigen/SparseCholesky>

#include "dmpcq/types.hpp"

namespace dmpcq {

/// Convex quadratic program
///   minimize    1/2 z'Pz + q'z + r
///   subject to  A z = b,   G z <= h
/// with P symmetric positive semidefinite (stored full).
struct QpProblem {
  SpMat P;
  Vec q;
  double r = 0.0;
  SpMat A;
  Vec b;
  SpMat G;
  Vec h;

  Eigen::Index num_vars() const { return q.size(); }
  Eigen::Index num_eq() const { return b.size(); }
  Eigen::Index num_ineq() const { return h.size(); }
};

struct QpOptions {
  double tol = 1e-10;       // residual and gap target, relative to problem scale
  int max_iter = 60;
  double static_reg = 1e-9; // quasi-definite regularization of the KKT system
  int refine_steps = 2;     // iterative refinement per KKT solve
};

struct QpSolution {
  Vec z;
  Vec lambda;  // equality multipliers, stationarity uses +A'lambda
  Vec mu;      // inequality multipliers, nonnegative
  Vec slack;   // h - Gz at the returned point
  double objective = 0.0;
  bool converged = false;
  int iterations = 0;
  double res_stationarity = 0.0;
  double res_equality = 0.0;
  double res_inequality = 0.0;
  double gap = 0.0;
};

/// Primal-dual interior-point method (Mehrotra predictor-corrector) on the
/// sparse KKT system. A solver instance caches the symbolic factorization, so
/// repeated solves of problems with identical sparsity (the hot path in the
/// distributed optimizer) skip the analyze phase.
class QpSolver {
 public:
  /// `hint`, when compatible with the problem shape, seeds the iteration
  /// from a previous solution of a nearby problem; on stall the solve is
  /// retried cold.
  QpSolution solve(const QpProblem& prob, const QpOptions& opt = {},
                   const QpSolution* hint = nullptr);

 private:
  QpSolution solve_once(const QpProblem& prob, const QpOptions& opt,
                        const QpSolution* hint);
  void polish(const QpProblem& prob, const QpOptions& opt, QpSolution& sol);

  Eigen::SimplicialLDLT<SpMat, Eigen::Lower> ldlt_;
  bool analyzed_ = false;
  Eigen::Index sig_vars_ = -1, sig_eq_ = -1, sig_nnz_ = -1;
};

/// One-shot convenience wrapper.
QpSolution solve_qp(const QpProblem& prob, const QpOptions& opt = {});

}  // namespace dmpcq
