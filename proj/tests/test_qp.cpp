#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dmpcq/qp.hpp"
#include "dmpcq/rng.hpp"

using namespace dmpcq;

namespace {

SpMat dense_to_sparse(const Mat& m) {
  std::vector<Triplet> trips;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      if (m(r, c) != 0.0) trips.emplace_back(r, c, m(r, c));
  SpMat out(m.rows(), m.cols());
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

QpProblem make_problem(const Mat& P, const Vec& q, const Mat& A, const Vec& b,
                       const Mat& G, const Vec& h) {
  QpProblem prob;
  prob.P = dense_to_sparse(P);
  prob.q = q;
  prob.A = dense_to_sparse(A);
  prob.b = b;
  prob.G = dense_to_sparse(G);
  prob.h = h;
  return prob;
}

double kkt_residual(const QpProblem& p, const QpSolution& s) {
  double r = (Mat(p.P) * s.z + p.q + Mat(p.A).transpose() * s.lambda +
              Mat(p.G).transpose() * s.mu)
                 .lpNorm<Eigen::Infinity>();
  if (p.num_eq()) r = std::max(r, (Mat(p.A) * s.z - p.b).lpNorm<Eigen::Infinity>());
  if (p.num_ineq()) {
    const Vec viol = (Mat(p.G) * s.z - p.h).cwiseMax(0.0);
    r = std::max(r, viol.lpNorm<Eigen::Infinity>());
    r = std::max(r, s.mu.cwiseProduct(Mat(p.G) * s.z - p.h).lpNorm<Eigen::Infinity>());
  }
  return r;
}

}  // namespace

TEST_CASE("box-constrained quadratic with one active bound") {
  // min 1/2||x||^2 - [1,1]'x  s.t. x <= [0.5, 2]; optimum [0.5, 1], mu = [0.5, 0]
  Mat P = Mat::Identity(2, 2);
  Vec q(2);
  q << -1, -1;
  Mat G(2, 2);
  G << 1, 0, 0, 1;
  Vec h(2);
  h << 0.5, 2.0;
  const auto sol = solve_qp(make_problem(P, q, Mat(0, 2), Vec(0), G, h));
  REQUIRE(sol.converged);
  CHECK(sol.z[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(sol.z[1] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(sol.mu[0] == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(std::abs(sol.mu[1]) < 1e-8);
  CHECK(sol.objective == doctest::Approx(0.5 * (0.25 + 1) - 1.5).epsilon(1e-10));
}

TEST_CASE("equality-constrained quadratic returns the exact multiplier") {
  // min 1/2||x||^2  s.t. x1 + x2 = 1; optimum [0.5, 0.5], lambda = -0.5
  Mat P = Mat::Identity(2, 2);
  Vec q = Vec::Zero(2);
  Mat A(1, 2);
  A << 1, 1;
  Vec b(1);
  b << 1;
  const auto sol = solve_qp(make_problem(P, q, A, b, Mat(0, 2), Vec(0)));
  REQUIRE(sol.converged);
  CHECK(sol.z[0] == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(sol.z[1] == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(sol.lambda[0] == doctest::Approx(-0.5).epsilon(1e-10));
}

TEST_CASE("semidefinite objective with linear slack cost stays solvable") {
  // min c's  s.t. -s <= 0, x - s <= 1, x = 2  =>  s = 1 on the boundary
  Mat P = Mat::Zero(2, 2);  // variables [x, s]
  Vec q(2);
  q << 0, 3;
  Mat A(1, 2);
  A << 1, 0;
  Vec b(1);
  b << 2;
  Mat G(2, 2);
  G << 0, -1, 1, -1;
  Vec h(2);
  h << 0, 1;
  const auto sol = solve_qp(make_problem(P, q, A, b, G, h));
  REQUIRE(sol.converged);
  CHECK(sol.z[0] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(sol.z[1] == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("random strictly feasible QPs satisfy KKT to 1e-9 scale") {
  RngStream rng(2024);
  for (int trial = 0; trial < 25; ++trial) {
    const int nz = 4 + static_cast<int>(rng.uniform_index(8));
    const int ne = static_cast<int>(rng.uniform_index(3));
    const int ni = 2 + static_cast<int>(rng.uniform_index(10));
    Mat F(nz, nz);
    for (int r = 0; r < nz; ++r)
      for (int c = 0; c < nz; ++c) F(r, c) = rng.uniform(-1, 1);
    Mat P = F.transpose() * F;  // PSD, often rank deficient in spirit
    Vec q(nz);
    for (int i = 0; i < nz; ++i) q[i] = rng.uniform(-1, 1);
    Mat A(ne, nz);
    for (int r = 0; r < ne; ++r)
      for (int c = 0; c < nz; ++c) A(r, c) = rng.uniform(-1, 1);
    Vec x0(nz);
    for (int i = 0; i < nz; ++i) x0[i] = rng.uniform(-1, 1);
    Vec b = A * x0;  // feasible by construction
    Mat G(ni, nz);
    for (int r = 0; r < ni; ++r)
      for (int c = 0; c < nz; ++c) G(r, c) = rng.uniform(-1, 1);
    Vec h = G * x0 + Vec::Constant(ni, 0.5);  // strictly feasible at x0
    // regularize P a little so the optimum is unique
    P += 1e-3 * Mat::Identity(nz, nz);
    const auto prob = make_problem(P, q, A, b, G, h);
    const auto sol = solve_qp(prob);
    REQUIRE(sol.converged);
    CHECK(kkt_residual(prob, sol) < 1e-8);
    for (int i = 0; i < ni; ++i) CHECK(sol.mu[i] >= -1e-12);
  }
}

TEST_CASE("solver instance reuses its symbolic analysis across same-pattern solves") {
  Mat P = Mat::Identity(3, 3);
  Vec q(3);
  q << -1, 2, 0.5;
  Mat G(3, 3);
  G << 1, 0, 0, 0, 1, 0, 0, 0, 1;
  Vec h = Vec::Constant(3, 1.0);
  QpSolver solver;
  const auto prob = make_problem(P, q, Mat(0, 3), Vec(0), G, h);
  const auto s1 = solver.solve(prob);
  auto prob2 = prob;
  prob2.q << 0.3, -0.7, 0.1;  // same structure, new data
  const auto s2 = solver.solve(prob2);
  REQUIRE(s1.converged);
  REQUIRE(s2.converged);
  CHECK(kkt_residual(prob2, s2) < 1e-9);
  CHECK(s2.z[1] == doctest::Approx(0.7).epsilon(1e-9));
}
