#include "dmpcq/qp.hpp"

#include <cstdio>
#include <cstdlib>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

namespace dmpcq {

namespace {

// Largest alpha in (0, 1] keeping v + alpha*dv >= 0.
double max_step(const Vec& v, const Vec& dv) {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
  return alpha;
}

bool finite(const Vec& v) { return v.allFinite(); }

// Assembles K = [P + G'WG + reg*I, A'; A, -reg*I]. Triplet positions do not
// depend on values, so the sparsity pattern is invariant across iterations
// and across solves of structurally identical problems.
SpMat assemble_kkt(const QpProblem& prob, const Eigen::SparseMatrix<double, Eigen::RowMajor>& G_rows,
                   const Vec& w, double reg) {
  const Eigen::Index nz = prob.num_vars();
  const Eigen::Index ne = prob.num_eq();
  const Eigen::Index dim = nz + ne;

  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(prob.P.nonZeros() + 2 * prob.A.nonZeros() +
                                         4 * prob.G.nonZeros() + dim));
  for (int k = 0; k < prob.P.outerSize(); ++k)
    for (SpMat::InnerIterator it(prob.P, k); it; ++it)
      trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());

  for (Eigen::Index r = 0; r < G_rows.rows(); ++r) {
    const double wr = w.size() ? w[r] : 1.0;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it1(G_rows, r); it1; ++it1)
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it2(G_rows, r); it2; ++it2)
        trips.emplace_back(static_cast<int>(it1.col()), static_cast<int>(it2.col()),
                           wr * it1.value() * it2.value());
  }

  for (int k = 0; k < prob.A.outerSize(); ++k)
    for (SpMat::InnerIterator it(prob.A, k); it; ++it) {
      trips.emplace_back(static_cast<int>(nz + it.row()), static_cast<int>(it.col()), it.value());
      trips.emplace_back(static_cast<int>(it.col()), static_cast<int>(nz + it.row()), it.value());
    }

  for (Eigen::Index i = 0; i < nz; ++i) trips.emplace_back(static_cast<int>(i), static_cast<int>(i), reg);
  for (Eigen::Index i = 0; i < ne; ++i)
    trips.emplace_back(static_cast<int>(nz + i), static_cast<int>(nz + i), -reg);

  SpMat K(dim, dim);
  K.setFromTriplets(trips.begin(), trips.end());
  K.makeCompressed();
  return K;
}

}  // namespace

QpSolution QpSolver::solve(const QpProblem& prob, const QpOptions& opt,
                           const QpSolution* hint) {
  QpSolution sol = solve_once(prob, opt, hint);
  if (!sol.converged && hint) sol = solve_once(prob, opt, nullptr);
  return sol;
}

QpSolution QpSolver::solve_once(const QpProblem& prob, const QpOptions& opt,
                                const QpSolution* hint) {
  const Eigen::Index nz = prob.num_vars();
  const Eigen::Index ne = prob.num_eq();
  const Eigen::Index ni = prob.num_ineq();

  QpSolution sol;
  sol.z = Vec::Zero(nz);
  sol.lambda = Vec::Zero(ne);
  sol.mu = Vec::Zero(ni);
  sol.slack = Vec::Zero(ni);

  const Eigen::SparseMatrix<double, Eigen::RowMajor> G_rows(prob.G);

  const double scale_d = 1.0 + prob.q.lpNorm<Eigen::Infinity>();
  const double scale_p =
      1.0 + std::max(ne ? prob.b.lpNorm<Eigen::Infinity>() : 0.0,
                     ni ? prob.h.lpNorm<Eigen::Infinity>() : 0.0);

  double reg = opt.static_reg;

  // Factorizes K, reusing the cached symbolic analysis when the pattern of
  // this problem matches the previous one handled by this solver instance.
  auto factorize = [&](const SpMat& K) -> bool {
    const bool same_pattern =
        analyzed_ && sig_vars_ == nz && sig_eq_ == ne && sig_nnz_ == K.nonZeros();
    if (!same_pattern) {
      ldlt_.analyzePattern(K);
      analyzed_ = true;
      sig_vars_ = nz;
      sig_eq_ = ne;
      sig_nnz_ = K.nonZeros();
    }
    ldlt_.factorize(K);
    return ldlt_.info() == Eigen::Success;
  };

  // Solves the regularized KKT and refines against the unregularized system.
  auto kkt_solve = [&](const Vec& w, const Vec& rhs) -> Vec {
    Vec x = ldlt_.solve(rhs);
    for (int it = 0; it < opt.refine_steps; ++it) {
      Vec res(rhs.size());
      const Vec dz = x.head(nz);
      const Vec dl = x.tail(ne);
      Vec top = prob.P * dz;
      if (ni) {
        Vec t = prob.G * dz;
        top += prob.G.transpose() * w.cwiseProduct(t);
      }
      if (ne) top += prob.A.transpose() * dl;
      res.head(nz) = rhs.head(nz) - top;
      if (ne) res.tail(ne) = rhs.tail(ne) - prob.A * dz;
      if (res.lpNorm<Eigen::Infinity>() < 1e-14 * (1.0 + rhs.lpNorm<Eigen::Infinity>())) break;
      x += ldlt_.solve(res);
    }
    return x;
  };

  // Equality-only (or unconstrained) problems need a single Newton solve.
  if (ni == 0) {
    Vec w0;
    SpMat K = assemble_kkt(prob, G_rows, w0, reg);
    if (!factorize(K)) {
      reg *= 1e3;
      K = assemble_kkt(prob, G_rows, w0, reg);
      if (!factorize(K)) return sol;
    }
    Vec rhs(nz + ne);
    rhs.head(nz) = -prob.q;
    rhs.tail(ne) = prob.b;
    const Vec x = kkt_solve(w0, rhs);
    sol.z = x.head(nz);
    sol.lambda = x.tail(ne);
    sol.objective = 0.5 * sol.z.dot(prob.P * sol.z) + prob.q.dot(sol.z) + prob.r;
    sol.res_stationarity =
        (prob.P * sol.z + prob.q + prob.A.transpose() * sol.lambda).lpNorm<Eigen::Infinity>();
    sol.res_equality = ne ? (prob.A * sol.z - prob.b).lpNorm<Eigen::Infinity>() : 0.0;
    sol.converged = sol.res_stationarity <= opt.tol * scale_d * 10 &&
                    sol.res_equality <= opt.tol * scale_p * 10;
    sol.iterations = 1;
    return sol;
  }

  // Starting point: either a caller-provided nearby solution or an
  // equality-constrained solve ignoring inequalities; slacks and multipliers
  // are pushed safely into the positive orthant either way.
  const bool use_hint = hint && hint->z.size() == nz && hint->mu.size() == ni &&
                        hint->lambda.size() == ne;
  if (use_hint) {
    sol.z = hint->z;
    sol.lambda = hint->lambda;
    const Vec resid = prob.h - prob.G * sol.z;
    sol.slack = resid.cwiseMax(1e-8);
    sol.mu = hint->mu.cwiseMax(1e-8);
  } else {
    const Vec w0 = Vec::Ones(ni);
    SpMat K = assemble_kkt(prob, G_rows, w0, std::max(reg, 1e-9));
    if (!factorize(K)) {
      reg *= 1e3;
      K = assemble_kkt(prob, G_rows, w0, reg);
      if (!factorize(K)) return sol;
    }
    Vec rhs(nz + ne);
    rhs.head(nz) = -prob.q + prob.G.transpose() * prob.h;
    if (ne) rhs.tail(ne) = prob.b;
    const Vec x = kkt_solve(w0, rhs);
    sol.z = x.head(nz);
    if (ne) sol.lambda = x.tail(ne);
    const Vec resid = prob.h - prob.G * sol.z;
    sol.slack = resid.cwiseMax(1.0);
    sol.mu = Vec::Ones(ni);
  }

  Vec s = sol.slack;
  Vec mu = sol.mu;

  int stalls = 0;
  for (int iter = 0; iter < opt.max_iter; ++iter) {
    const Vec r_d =
        prob.P * sol.z + prob.q + prob.A.transpose() * sol.lambda + prob.G.transpose() * mu;
    const Vec r_p = ne ? Vec(prob.A * sol.z - prob.b) : Vec();
    const Vec r_g = prob.G * sol.z + s - prob.h;
    const double gap = s.dot(mu) / static_cast<double>(ni);

    sol.res_stationarity = r_d.lpNorm<Eigen::Infinity>();
    sol.res_equality = ne ? r_p.lpNorm<Eigen::Infinity>() : 0.0;
    sol.res_inequality = r_g.lpNorm<Eigen::Infinity>();
    sol.gap = gap;
    sol.iterations = iter;

    const double obj = 0.5 * sol.z.dot(prob.P * sol.z) + prob.q.dot(sol.z) + prob.r;
    if (sol.res_stationarity <= opt.tol * scale_d && sol.res_equality <= opt.tol * scale_p &&
        sol.res_inequality <= opt.tol * scale_p && gap <= opt.tol * (1.0 + std::abs(obj))) {
      sol.converged = true;
      break;
    }

    const Vec w = (mu.array() / s.array()).cwiseMax(1e-16).cwiseMin(1e16).matrix();
    SpMat K = assemble_kkt(prob, G_rows, w, reg);
    if (!factorize(K)) {
      reg *= 1e2;
      continue;
    }

    auto direction = [&](const Vec& rc) {
      // u = (mu .* r_g - rc) ./ s; reduced rhs = [-r_d - G'u; -r_p]
      const Vec u = (mu.cwiseProduct(r_g) - rc).cwiseQuotient(s);
      Vec rhs(nz + ne);
      rhs.head(nz) = -r_d - prob.G.transpose() * u;
      if (ne) rhs.tail(ne) = -r_p;
      const Vec x = kkt_solve(w, rhs);
      struct Dir {
        Vec dz, dl, ds, dmu;
      } d;
      d.dz = x.head(nz);
      d.dl = ne ? Vec(x.tail(ne)) : Vec();
      d.ds = -r_g - prob.G * d.dz;
      d.dmu = u + w.cwiseProduct(prob.G * d.dz);
      return d;
    };

    // Predictor
    auto aff = direction(s.cwiseProduct(mu));
    const double a_aff = std::min(max_step(s, aff.ds), max_step(mu, aff.dmu));
    const double gap_aff =
        (s + a_aff * aff.ds).dot(mu + a_aff * aff.dmu) / static_cast<double>(ni);
    double sigma = std::pow(std::max(gap_aff, 0.0) / gap, 3);
    sigma = std::clamp(sigma, 0.0, 1.0);

    // Corrector
    const Vec rc =
        s.cwiseProduct(mu) + aff.ds.cwiseProduct(aff.dmu) - Vec::Constant(ni, sigma * gap);
    auto dir = direction(rc);

    const double alpha =
        0.99 * std::min(max_step(s, dir.ds), max_step(mu, dir.dmu));
    if (alpha < 1e-13) {
      if (++stalls >= 2) break;
    } else {
      stalls = 0;
    }

    sol.z += alpha * dir.dz;
    if (ne) sol.lambda += alpha * dir.dl;
    s += alpha * dir.ds;
    mu += alpha * dir.dmu;

    if (!finite(sol.z) || !finite(s) || !finite(mu)) break;
  }

  sol.slack = prob.h - prob.G * sol.z;
  sol.mu = mu;
  sol.objective = 0.5 * sol.z.dot(prob.P * sol.z) + prob.q.dot(sol.z) + prob.r;
  if (!sol.converged) polish(prob, opt, sol);
  return sol;
}

// Active-set rescue for degenerate instances where the interior-point steps
// stall: fix the active set suggested by the final iterate, solve the
// resulting equality-constrained KKT system, and accept the point only if it
// is a valid KKT point within tolerance. Rows whose multiplier comes out
// negative are dropped once and the solve repeated.
void QpSolver::polish(const QpProblem& prob, const QpOptions& opt, QpSolution& sol) {
  const Eigen::Index nz = prob.num_vars();
  const Eigen::Index ne = prob.num_eq();
  const Eigen::Index ni = prob.num_ineq();

  std::vector<int> active;
  for (Eigen::Index r = 0; r < ni; ++r)
    if (sol.mu[r] > sol.slack[r]) active.push_back(static_cast<int>(r));

  const Eigen::SparseMatrix<double, Eigen::RowMajor> G_rows(prob.G);
  const double reg = opt.static_reg;
  const double scale_d = 1.0 + prob.q.lpNorm<Eigen::Infinity>();
  const double scale_p =
      1.0 + std::max(ne ? prob.b.lpNorm<Eigen::Infinity>() : 0.0,
                     ni ? prob.h.lpNorm<Eigen::Infinity>() : 0.0);

  for (int attempt = 0; attempt < 2; ++attempt) {
    const Eigen::Index na = static_cast<Eigen::Index>(active.size());
    const Eigen::Index dim = nz + ne + na;

    std::vector<Triplet> gact_trips;
    for (Eigen::Index a = 0; a < na; ++a)
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(G_rows, active[a]);
           it; ++it)
        gact_trips.emplace_back(static_cast<int>(a), static_cast<int>(it.col()), it.value());
    SpMat Gact(na, nz);
    Gact.setFromTriplets(gact_trips.begin(), gact_trips.end());

    std::vector<Triplet> trips;
    for (int k = 0; k < prob.P.outerSize(); ++k)
      for (SpMat::InnerIterator it(prob.P, k); it; ++it)
        trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    for (Eigen::Index i = 0; i < nz; ++i)
      trips.emplace_back(static_cast<int>(i), static_cast<int>(i), reg);
    for (int k = 0; k < prob.A.outerSize(); ++k)
      for (SpMat::InnerIterator it(prob.A, k); it; ++it) {
        trips.emplace_back(static_cast<int>(nz + it.row()), static_cast<int>(it.col()),
                           it.value());
        trips.emplace_back(static_cast<int>(it.col()), static_cast<int>(nz + it.row()),
                           it.value());
      }
    for (int k = 0; k < Gact.outerSize(); ++k)
      for (SpMat::InnerIterator it(Gact, k); it; ++it) {
        trips.emplace_back(static_cast<int>(nz + ne + it.row()), static_cast<int>(it.col()),
                           it.value());
        trips.emplace_back(static_cast<int>(it.col()), static_cast<int>(nz + ne + it.row()),
                           it.value());
      }
    for (Eigen::Index i = 0; i < ne + na; ++i)
      trips.emplace_back(static_cast<int>(nz + i), static_cast<int>(nz + i), -reg);
    SpMat K(dim, dim);
    K.setFromTriplets(trips.begin(), trips.end());
    K.makeCompressed();

    Eigen::SimplicialLDLT<SpMat, Eigen::Lower> ldlt;
    ldlt.compute(K);
    if (ldlt.info() != Eigen::Success) return;

    Vec rhs(dim);
    rhs.head(nz) = -prob.q;
    rhs.segment(nz, ne) = prob.b;
    for (Eigen::Index a = 0; a < na; ++a) rhs[nz + ne + a] = prob.h[active[a]];

    // Refine against the unregularized KKT operator so the regularization
    // bias does not survive into the multipliers.
    auto apply = [&](const Vec& x) {
      Vec out(dim);
      const Vec z = x.head(nz);
      Vec top = prob.P * z;
      if (ne) top += prob.A.transpose() * x.segment(nz, ne);
      if (na) top += Gact.transpose() * x.tail(na);
      out.head(nz) = top;
      if (ne) out.segment(nz, ne) = prob.A * z;
      if (na) out.tail(na) = Gact * z;
      return out;
    };
    Vec x = ldlt.solve(rhs);
    for (int refine = 0; refine < 3; ++refine) {
      const Vec res = rhs - apply(x);
      if (res.lpNorm<Eigen::Infinity>() < 1e-14 * (1.0 + rhs.lpNorm<Eigen::Infinity>())) break;
      x += ldlt.solve(res);
    }

    // A negative multiplier marks a wrongly activated row: drop and retry.
    bool dropped = false;
    std::vector<int> keep;
    for (Eigen::Index a = 0; a < na; ++a) {
      if (x[nz + ne + a] < -1e-9 * scale_d)
        dropped = true;
      else
        keep.push_back(active[a]);
    }
    if (dropped && attempt == 0) {
      active = std::move(keep);
      continue;
    }

    QpSolution cand = sol;
    cand.z = x.head(nz);
    cand.lambda = x.segment(nz, ne);
    cand.mu = Vec::Zero(ni);
    for (Eigen::Index a = 0; a < na; ++a) cand.mu[active[a]] = std::max(0.0, x[nz + ne + a]);
    cand.slack = prob.h - prob.G * cand.z;
    cand.res_stationarity = (prob.P * cand.z + prob.q + prob.A.transpose() * cand.lambda +
                             prob.G.transpose() * cand.mu)
                                .lpNorm<Eigen::Infinity>();
    cand.res_equality = ne ? (prob.A * cand.z - prob.b).lpNorm<Eigen::Infinity>() : 0.0;
    cand.res_inequality = (prob.G * cand.z - prob.h).cwiseMax(0.0).lpNorm<Eigen::Infinity>();
    cand.gap = ni ? std::abs(cand.mu.dot(prob.G * cand.z - prob.h)) / static_cast<double>(ni)
                  : 0.0;
    cand.objective = 0.5 * cand.z.dot(prob.P * cand.z) + prob.q.dot(cand.z) + prob.r;

    const double obj_scale = 1.0 + std::abs(cand.objective);
    if (cand.res_stationarity <= opt.tol * scale_d * 10 &&
        cand.res_equality <= opt.tol * scale_p * 10 &&
        cand.res_inequality <= opt.tol * scale_p * 10 &&
        cand.gap <= opt.tol * obj_scale * 10) {
      cand.converged = true;
      cand.iterations = sol.iterations;
      sol = cand;
    }
    return;
  }
}

QpSolution solve_qp(const QpProblem& prob, const QpOptions& opt) {
  QpSolver solver;
  return solver.solve(prob, opt);
}

}  // namespace dmpcq
