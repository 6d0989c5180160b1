#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dmpcq/mpc.hpp"
#include "dmpcq/rng.hpp"
#include "fixtures.hpp"

using namespace dmpcq;
using fixtures::vec1;
using fixtures::vec2;

// Reference optimal values frozen from tests/oracles/qp_reference.py.
namespace oracle {
constexpr double probeA_q = 1.071032551607;
constexpr double probeA_v = 0.776328119280;
constexpr double probeA_u = -0.649606772727;
constexpr double probeB_q = 175.174546007366;
constexpr double probeB_v = 9.312481274000;
constexpr double probeB_u[3] = {-1.000000000000, 0.984440822222, -0.942617197627};
}  // namespace oracle

TEST_CASE("probe A matches the independent reference solver within 1e-6") {
  const auto topo = Topology::chain(3);
  const auto cfg = fixtures::mpc_config();
  const auto thetas = fixtures::chain3_thetas();
  const std::vector<Vec> s(3, vec2(0.5, 0.0));
  const std::vector<Vec> a(3, vec1(0.0));

  const auto q = solve_q_centralized(thetas, topo, cfg, s, a);
  CHECK(q.value == doctest::Approx(oracle::probeA_q).epsilon(1e-6));

  const auto v = solve_v_centralized(thetas, topo, cfg, s);
  CHECK(v.value == doctest::Approx(oracle::probeA_v).epsilon(1e-6));
  for (int i = 0; i < 3; ++i)
    CHECK(v.greedy_action[i][0] == doctest::Approx(oracle::probeA_u).epsilon(1e-6));
}

TEST_CASE("probe B exercises every learnable block against the reference") {
  const auto topo = Topology::chain(3);
  const auto cfg = fixtures::mpc_config();
  const auto thetas = fixtures::probe_b_thetas();
  const auto s = fixtures::probe_b_states();
  const auto a = fixtures::probe_b_actions();

  const auto q = solve_q_centralized(thetas, topo, cfg, s, a);
  CHECK(q.value == doctest::Approx(oracle::probeB_q).epsilon(1e-6));

  const auto v = solve_v_centralized(thetas, topo, cfg, s);
  CHECK(v.value == doctest::Approx(oracle::probeB_v).epsilon(1e-6));
  for (int i = 0; i < 3; ++i)
    CHECK(v.greedy_action[i][0] ==
          doctest::Approx(oracle::probeB_u[i]).epsilon(5e-6));
}

TEST_CASE("zero offsets and interior origin give Q equal to the value offsets") {
  const auto topo = Topology::chain(3);
  const auto cfg = fixtures::mpc_config();
  auto thetas = fixtures::chain3_thetas();
  for (int i = 0; i < 3; ++i) {
    thetas[i].v_offset = 0.5 * (i + 1);
    thetas[i].x_lo_offset = vec2(-0.5, -0.5);  // pull the lower bound away from 0
  }
  const std::vector<Vec> s(3, vec2(0.0, 0.0));
  const std::vector<Vec> a(3, vec1(0.0));
  const auto q = solve_q_centralized(thetas, topo, cfg, s, a);
  CHECK(q.value == doctest::Approx(3.0).epsilon(1e-8));
  for (const auto& p : q.agents) {
    CHECK(p.X.norm() < 1e-6);
    CHECK(p.U.norm() < 1e-6);
    CHECK(p.Sigma.norm() < 1e-6);
  }
}

TEST_CASE("decoupled network solves agent by agent") {
  const auto topo = Topology::chain(3);
  const auto cfg = fixtures::mpc_config();
  const auto thetas = fixtures::chain3_thetas();  // coupling entries are zero
  RngStream rng(5);
  std::vector<Vec> s;
  for (int i = 0; i < 3; ++i) s.push_back(vec2(rng.uniform(0, 1), rng.uniform(-1, 1)));
  std::vector<Vec> a;
  for (int i = 0; i < 3; ++i) a.push_back(vec1(rng.uniform(-1, 1)));

  const auto joint = solve_q_centralized(thetas, topo, cfg, s, a);

  const auto single_topo = Topology::chain(1);
  double sum = 0.0;
  for (int i = 0; i < 3; ++i) {
    auto ti = fixtures::default_theta(0);
    const auto qi = solve_q_centralized({ti}, single_topo, cfg, {s[i]}, {a[i]});
    sum += qi.value;
  }
  CHECK(joint.value == doctest::Approx(sum).epsilon(1e-8));
}

TEST_CASE("value function is the relaxation of the action-value function") {
  const auto topo = Topology::chain(3);
  const auto cfg = fixtures::mpc_config();
  const auto thetas = fixtures::probe_b_thetas();
  RngStream rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Vec> s, a;
    for (int i = 0; i < 3; ++i) {
      s.push_back(vec2(rng.uniform(-0.2, 1), rng.uniform(-1, 1)));
      a.push_back(vec1(rng.uniform(-1, 1)));
    }
    const auto v = solve_v_centralized(thetas, topo, cfg, s);
    const auto q = solve_q_centralized(thetas, topo, cfg, s, a);
    CHECK(v.value <= q.value + 1e-7 * (1.0 + std::abs(q.value)));
  }
}

TEST_CASE("greedy action closes the Bellman gap") {
  const auto topo = Topology::chain(3);
  const auto cfg = fixtures::mpc_config();
  const auto thetas = fixtures::probe_b_thetas();
  const auto s = fixtures::probe_b_states();
  const auto v = solve_v_centralized(thetas, topo, cfg, s);
  const auto q = solve_q_centralized(thetas, topo, cfg, s, v.greedy_action);
  CHECK(q.value == doctest::Approx(v.value).epsilon(1e-8));
}

TEST_CASE("objective separates into per-agent shares") {
  const auto topo = Topology::chain(3);
  const auto cfg = fixtures::mpc_config();
  const auto thetas = fixtures::probe_b_thetas();
  const auto q = solve_q_centralized(thetas, topo, cfg, fixtures::probe_b_states(),
                                     fixtures::probe_b_actions());
  double sum = 0.0;
  for (const auto& p : q.agents) sum += p.objective_share;
  CHECK(sum == doctest::Approx(q.value).epsilon(1e-8));
}

TEST_CASE("strong duality: complementarity and feasibility residuals vanish") {
  const auto topo = Topology::chain(3);
  const auto cfg = fixtures::mpc_config();
  const auto thetas = fixtures::probe_b_thetas();
  const auto mono = build_monolithic_qp(thetas, topo, cfg, fixtures::probe_b_states(),
                                        nullptr);
  const auto sol = solve_qp(mono.qp);
  REQUIRE(sol.converged);
  const Vec eq_res = Mat(mono.qp.A) * sol.z - mono.qp.b;
  const Vec iq_res = Mat(mono.qp.G) * sol.z - mono.qp.h;
  const double lag_gap = sol.lambda.dot(eq_res) + sol.mu.dot(iq_res);
  CHECK(std::abs(lag_gap) < 1e-7 * (1.0 + std::abs(sol.objective)));
}

TEST_CASE("actions outside the input bounds are rejected up front") {
  const auto topo = Topology::chain(3);
  const auto cfg = fixtures::mpc_config();
  const auto thetas = fixtures::chain3_thetas();
  const std::vector<Vec> s(3, vec2(0.5, 0.0));
  std::vector<Vec> a(3, vec1(0.0));
  a[1] = vec1(1.5);
  CHECK_THROWS_AS(solve_q_centralized(thetas, topo, cfg, s, a), InfeasibleActionError);
}

TEST_CASE("boundary actions from exploration clipping stay solvable") {
  const auto topo = Topology::chain(3);
  const auto cfg = fixtures::mpc_config();
  const auto thetas = fixtures::chain3_thetas();
  const std::vector<Vec> s(3, vec2(0.5, 0.0));
  const std::vector<Vec> a{vec1(1.0), vec1(-1.0), vec1(0.0)};
  const auto q = solve_q_centralized(thetas, topo, cfg, s, a);
  CHECK(q.raw.converged);
  for (int i = 0; i < 3; ++i)
    CHECK(q.agents[i].U(0, 0) == doctest::Approx(a[i][0]).epsilon(1e-9));
}
