#include "dmpcq/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <atomic>
#include <future>
#include <thread>
#include <set>
#include <sstream>
#include <stdexcept>

#include "dmpcq/csv.hpp"
#include "dmpcq/sensitivity.hpp"

namespace dmpcq {

namespace fs = std::filesystem;
using nlohmann::json;

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "dfo") return Algorithm::dfo;
  if (name == "dso") return Algorithm::dso;
  if (name == "cso") return Algorithm::cso;
  throw std::invalid_argument("unknown algorithm: " + name);
}

std::string to_string(Algorithm algo) {
  switch (algo) {
    case Algorithm::dfo: return "dfo";
    case Algorithm::dso: return "dso";
    case Algorithm::cso: return "cso";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// configuration

ExperimentConfig ExperimentConfig::defaults() {
  ExperimentConfig c;
  c.A_true = Mat(2, 2);
  c.A_true << 0.9, 0.35, 0.0, 1.1;
  c.A_couple_true = Mat(2, 2);
  c.A_couple_true << 0.0, 0.0, 0.0, -0.1;
  c.B_true = Mat(2, 1);
  c.B_true << 0.0813, 0.2;
  c.noise_mask = Vec(2);
  c.noise_mask << 1.0, 0.0;
  c.s_min = Vec(2);
  c.s_min << 0.0, -1.0;
  c.s_max = Vec(2);
  c.s_max << 1.0, 1.0;
  c.omega = Vec(2);
  c.omega << 500.0, 500.0;
  c.init_low = c.s_min;
  c.init_high = c.s_max;
  c.u_min = Vec(1);
  c.u_min << -1.0;
  c.u_max = Vec(1);
  c.u_max << 1.0;
  c.A_model0 = Mat(2, 2);
  c.A_model0 << 1.0, 0.25, 0.0, 1.0;
  c.B_model0 = Mat(2, 1);
  c.B_model0 << 0.0312, 0.25;
  c.state_weight0 = Vec(2);
  c.state_weight0 << 1.0, 1.0;
  c.input_weight0 = Vec(1);
  c.input_weight0 << 0.5;
  return c;
}

namespace {

Vec json_to_vec(const json& j) {
  Vec v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

Mat json_to_mat(const json& j) {
  const std::size_t rows = j.size(), cols = j.empty() ? 0 : j[0].size();
  Mat m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  return m;
}

json vec_to_json(const Vec& v) {
  json j = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

json mat_to_json(const Mat& m) {
  json j = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    j.push_back(row);
  }
  return j;
}

std::uint64_t fnv1a(const std::string& data) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::string ExperimentConfig::to_json() const {
  json j;
  j["topology"] = {{"type", topology_type}, {"agents", num_agents}};
  if (!edges.empty()) {
    json e = json::array();
    for (auto [a, b] : edges) e.push_back({a, b});
    j["topology"]["edges"] = e;
  }
  j["env"] = {{"state_dim", state_dim},
              {"input_dim", input_dim},
              {"A", mat_to_json(A_true)},
              {"A_couple", mat_to_json(A_couple_true)},
              {"B", mat_to_json(B_true)},
              {"noise_low", noise_low},
              {"noise_high", noise_high},
              {"noise_mask", vec_to_json(noise_mask)},
              {"s_min", vec_to_json(s_min)},
              {"s_max", vec_to_json(s_max)},
              {"omega", vec_to_json(omega)},
              {"init_low", vec_to_json(init_low)},
              {"init_high", vec_to_json(init_high)},
              {"reset_period", reset_period}};
  j["mpc"] = {{"horizon", horizon},
              {"gamma", gamma},
              {"u_min", vec_to_json(u_min)},
              {"u_max", vec_to_json(u_max)},
              {"A_model", mat_to_json(A_model0)},
              {"B_model", mat_to_json(B_model0)},
              {"coupling0", coupling0},
              {"state_weight0", vec_to_json(state_weight0)},
              {"input_weight0", vec_to_json(input_weight0)}};
  j["learner"] = {{"alpha_second_order", alpha_second_order},
                  {"alpha_first_order", alpha_first_order},
                  {"batch", batch},
                  {"buffer", buffer},
                  {"update_period", update_period},
                  {"regularizer",
                   regularizer == RegularizerMode::posdef ? "posdef" : "nonsingular"},
                  {"cond_limit", cond_limit},
                  {"exploration_eps0", exploration_eps0},
                  {"exploration_decay", exploration_decay},
                  {"certify_posdef", certify_posdef}};
  j["admm"] = {{"iterations", admm_iterations},
               {"rho", admm_rho},
               {"warm_start", admm_warm_start},
               {"qp_tol", qp_tol}};
  j["gac"] = {{"iterations", gac_iterations}, {"exact", consensus_exact}};
  j["run"] = {{"steps", steps}, {"seeds", seeds}};
  return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  json j = json::parse(in);
  ExperimentConfig c = defaults();

  if (j.contains("topology")) {
    const auto& t = j["topology"];
    if (t.contains("type")) c.topology_type = t["type"].get<std::string>();
    if (t.contains("agents")) c.num_agents = t["agents"].get<int>();
    if (t.contains("edges")) {
      c.edges.clear();
      for (const auto& e : t["edges"]) c.edges.emplace_back(e[0].get<int>(), e[1].get<int>());
    }
  }
  if (j.contains("env")) {
    const auto& e = j["env"];
    if (e.contains("state_dim")) c.state_dim = e["state_dim"].get<int>();
    if (e.contains("input_dim")) c.input_dim = e["input_dim"].get<int>();
    if (e.contains("A")) c.A_true = json_to_mat(e["A"]);
    if (e.contains("A_couple")) c.A_couple_true = json_to_mat(e["A_couple"]);
    if (e.contains("B")) c.B_true = json_to_mat(e["B"]);
    if (e.contains("noise_low")) c.noise_low = e["noise_low"].get<double>();
    if (e.contains("noise_high")) c.noise_high = e["noise_high"].get<double>();
    if (e.contains("noise_mask")) c.noise_mask = json_to_vec(e["noise_mask"]);
    if (e.contains("s_min")) c.s_min = json_to_vec(e["s_min"]);
    if (e.contains("s_max")) c.s_max = json_to_vec(e["s_max"]);
    if (e.contains("omega")) c.omega = json_to_vec(e["omega"]);
    if (e.contains("init_low")) c.init_low = json_to_vec(e["init_low"]);
    if (e.contains("init_high")) c.init_high = json_to_vec(e["init_high"]);
    if (e.contains("reset_period")) c.reset_period = e["reset_period"].get<std::int64_t>();
  }
  if (j.contains("mpc")) {
    const auto& m = j["mpc"];
    if (m.contains("horizon")) c.horizon = m["horizon"].get<int>();
    if (m.contains("gamma")) c.gamma = m["gamma"].get<double>();
    if (m.contains("u_min")) c.u_min = json_to_vec(m["u_min"]);
    if (m.contains("u_max")) c.u_max = json_to_vec(m["u_max"]);
    if (m.contains("A_model")) c.A_model0 = json_to_mat(m["A_model"]);
    if (m.contains("B_model")) c.B_model0 = json_to_mat(m["B_model"]);
    if (m.contains("coupling0")) c.coupling0 = m["coupling0"].get<double>();
    if (m.contains("state_weight0")) c.state_weight0 = json_to_vec(m["state_weight0"]);
    if (m.contains("input_weight0")) c.input_weight0 = json_to_vec(m["input_weight0"]);
  }
  if (j.contains("learner")) {
    const auto& l = j["learner"];
    if (l.contains("alpha_second_order"))
      c.alpha_second_order = l["alpha_second_order"].get<double>();
    if (l.contains("alpha_first_order"))
      c.alpha_first_order = l["alpha_first_order"].get<double>();
    if (l.contains("batch")) c.batch = l["batch"].get<int>();
    if (l.contains("buffer")) c.buffer = l["buffer"].get<int>();
    if (l.contains("update_period")) c.update_period = l["update_period"].get<int>();
    if (l.contains("regularizer"))
      c.regularizer = l["regularizer"].get<std::string>() == "posdef"
                          ? RegularizerMode::posdef
                          : RegularizerMode::nonsingular;
    if (l.contains("cond_limit")) c.cond_limit = l["cond_limit"].get<double>();
    if (l.contains("exploration_eps0"))
      c.exploration_eps0 = l["exploration_eps0"].get<double>();
    if (l.contains("exploration_decay"))
      c.exploration_decay = l["exploration_decay"].get<double>();
    if (l.contains("certify_posdef")) c.certify_posdef = l["certify_posdef"].get<bool>();
  }
  if (j.contains("admm")) {
    const auto& a = j["admm"];
    if (a.contains("iterations")) c.admm_iterations = a["iterations"].get<int>();
    if (a.contains("rho")) c.admm_rho = a["rho"].get<double>();
    if (a.contains("warm_start")) c.admm_warm_start = a["warm_start"].get<bool>();
    if (a.contains("qp_tol")) c.qp_tol = a["qp_tol"].get<double>();
  }
  if (j.contains("gac")) {
    const auto& g = j["gac"];
    if (g.contains("iterations")) c.gac_iterations = g["iterations"].get<int>();
    if (g.contains("exact")) c.consensus_exact = g["exact"].get<bool>();
  }
  if (j.contains("run")) {
    const auto& r = j["run"];
    if (r.contains("steps")) c.steps = r["steps"].get<std::int64_t>();
    if (r.contains("seeds")) {
      c.seeds.clear();
      for (const auto& s : r["seeds"]) c.seeds.push_back(s.get<std::uint64_t>());
    }
  }
  return c;
}

Topology ExperimentConfig::make_topology() const {
  if (topology_type == "chain") return Topology::chain(num_agents);
  if (topology_type == "complete") return Topology::complete(num_agents);
  if (topology_type == "custom") return Topology::from_edges(num_agents, edges);
  throw std::invalid_argument("unknown topology type: " + topology_type);
}

TrueDynamics ExperimentConfig::make_dynamics(const Topology& topo) const {
  TrueDynamics dyn;
  for (int i = 0; i < topo.num_agents; ++i) {
    dyn.A.push_back(A_true);
    dyn.B.push_back(B_true);
    dyn.A_couple.emplace_back(topo.degree(i), A_couple_true);
  }
  dyn.noise_low = noise_low;
  dyn.noise_high = noise_high;
  dyn.noise_mask = noise_mask;
  return dyn;
}

StageCostSpec ExperimentConfig::make_cost() const { return {s_min, s_max, omega}; }

MpcConfig ExperimentConfig::make_mpc() const {
  MpcConfig m;
  m.horizon = horizon;
  m.gamma = gamma;
  m.s_min = s_min;
  m.s_max = s_max;
  m.u_min = u_min;
  m.u_max = u_max;
  return m;
}

std::vector<ThetaLocal> ExperimentConfig::make_initial_theta(const Topology& topo) const {
  std::vector<ThetaLocal> thetas;
  const int n = state_dim, m = input_dim;
  for (int i = 0; i < topo.num_agents; ++i) {
    ThetaLocal t = ThetaLocal::zeros(n, m, topo.degree(i));
    t.state_weight = state_weight0;
    t.input_weight = input_weight0;
    t.slack_weight = omega;
    int pos = 0;
    t.model_a_upper.resize(n * (n + 1) / 2);
    for (int r = 0; r < n; ++r)
      for (int c = r; c < n; ++c) t.model_a_upper[pos++] = A_model0(r, c);
    t.model_coupling = Vec::Constant(topo.degree(i), coupling0);
    t.model_b = B_model0;
    thetas.push_back(std::move(t));
  }
  return thetas;
}

// ---------------------------------------------------------------------------
// training loop

namespace {

struct PhaseTimer {
  double* sink;
  std::chrono::steady_clock::time_point start;
  explicit PhaseTimer(double* s) : sink(s), start(std::chrono::steady_clock::now()) {}
  ~PhaseTimer() {
    *sink += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

void moving_average(const std::vector<double>& x, std::vector<double>& out, int window,
                    bool absolute) {
  out.resize(x.size());
  double acc = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    acc += absolute ? std::abs(x[t]) : x[t];
    if (t >= static_cast<std::size_t>(window))
      acc -= absolute ? std::abs(x[t - window]) : x[t - window];
    out[t] = acc / std::min<std::size_t>(t + 1, window);
  }
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config, Algorithm algo,
                         std::uint64_t seed, MessageLog* log) {
  const Topology topo = config.make_topology();
  const TrueDynamics dyn = config.make_dynamics(topo);
  const StageCostSpec cost_spec = config.make_cost();
  const MpcConfig mpc = config.make_mpc();
  const ConsensusMatrix cons_matrix = build_metropolis_matrix(topo);
  const int M = topo.num_agents;
  const int T = config.batch;
  const bool distributed = algo != Algorithm::cso;
  const double alpha = config.alpha_for(algo);

  std::vector<ThetaLocal> thetas = config.make_initial_theta(topo);

  ConsensusScheme consensus;
  consensus.topology = &topo;
  consensus.matrix = &cons_matrix;
  consensus.iterations = config.gac_iterations;
  consensus.exact = config.consensus_exact;
  consensus.log = log;

  AdmmOptions admm_opt;
  admm_opt.iterations = config.admm_iterations;
  admm_opt.rho = config.admm_rho;
  admm_opt.warm_start = config.admm_warm_start;
  admm_opt.qp.tol = config.qp_tol;
  AdmmSolver admm_v(topo, mpc, admm_opt);
  AdmmSolver admm_q(topo, mpc, admm_opt);

  QpSolver central_v, central_q;
  QpOptions central_opt;
  central_opt.tol = config.qp_tol;

  // Independent streams: noise and exploration per agent, one shared stream
  // for replay sampling and one for the initial state.
  std::vector<RngStream> noise_rng, explore_rng, init_rng;
  for (int i = 0; i < M; ++i) {
    noise_rng.push_back(derive_stream(seed, 1, i));
    explore_rng.push_back(derive_stream(seed, 2, i));
    init_rng.push_back(derive_stream(seed, 3, i));
  }
  RngStream sample_rng = derive_stream(seed, 4, 0);

  ExplorationSchedule sched{config.exploration_eps0, config.exploration_decay};
  ReplayBuffer buffer(config.buffer);

  RunResult out;
  const std::int64_t steps = config.steps;
  out.cost.resize(steps);
  out.td.assign(steps, 0.0);
  out.states.resize(steps);
  out.actions.resize(steps);
  out.local_costs.resize(steps);
  out.updated.assign(steps, 0);
  out.update_skipped.assign(steps, 0);

  std::vector<Vec> state = sample_initial_state(config.init_low, config.init_high, M, init_rng);

  // Per-agent share of Q(s_{t-1}, a_{t-1}) and previous local costs, waiting
  // for this step's consensus round.
  Vec prev_q_share = Vec::Zero(M);
  double prev_q_exact = 0.0;
  Vec prev_local_costs = Vec::Zero(M);
  bool have_prev = false;
  Transition pending;

  const std::string mode_name =
      algo == Algorithm::dfo
          ? "first_order"
          : (config.regularizer == RegularizerMode::posdef ? "posdef" : "nonsingular");

  for (std::int64_t t = 0; t < steps; ++t) {
    if (log) log->set_step(t);
    if (config.reset_period > 0 && t > 0 && t % config.reset_period == 0)
      state = sample_initial_state(config.init_low, config.init_high, M, init_rng);

    // --- update preparation: sample the replay buffer before this step's
    // transition lands in it, so the consensus payload for the update can
    // ride the same vector as the TD scalars.
    const bool updating = buffer.size() >= T && t % config.update_period == 0;
    std::vector<int> sample_idx;
    std::vector<Mat> G(M), K(M), K_tilde(M);
    std::vector<Vec> delta_loc(M);
    std::vector<double> sigma(M, 0.0);
    std::vector<Vec> c_packed(M);
    if (updating) {
      PhaseTimer timer(&out.wall_update);
      sample_idx = buffer.sample_without_replacement(T, sample_rng);
      for (int i = 0; i < M; ++i) {
        const int nti = thetas[i].size();
        G[i].resize(nti, T);
        K[i] = Mat::Zero(nti, nti);
        delta_loc[i].resize(T);
        for (int s = 0; s < T; ++s) {
          const Transition& tr = buffer.at(sample_idx[s]);
          G[i].col(s) = tr.sens[i].gradient;
          delta_loc[i][s] = tr.delta[i];
          K[i] += tr.delta[i] * tr.sens[i].hessian;
        }
        if (algo != Algorithm::dfo) {
          sigma[i] = choose_regularizer(K[i], T, config.regularizer);
          K_tilde[i] = k_tilde(K[i], sigma[i], T);
          if (algo == Algorithm::dso) c_packed[i] = local_c_contribution(G[i], K_tilde[i]);
        }
      }
    }

    // --- value evaluation at the current state (policy source)
    std::vector<Vec> greedy(M);
    Vec v_shares = Vec::Zero(M);
    double v_exact = 0.0;
    std::vector<AdmmAgentResult> v_agents;
    {
      PhaseTimer timer(&out.wall_solve);
      if (distributed) {
        const auto res = admm_v.solve(thetas, state, nullptr, log);
        for (int i = 0; i < M; ++i) {
          v_shares[i] = res.agents[i].value_share;
          greedy[i] = res.agents[i].p.U.col(0);
        }
      } else {
        const auto res = solve_v_centralized(thetas, topo, mpc, state, central_opt, &central_v);
        v_exact = res.value;
        greedy = res.greedy_action;
      }
    }

    // --- consensus round: [V share, previous Q share, previous cost] plus
    // the packed update payload when a second-order update is due.
    Vec v_post(M), q_prev_post(M), l_prev_post(M);
    if (distributed) {
      PhaseTimer timer(&out.wall_consensus);
      const int payload = 3 + ((updating && algo == Algorithm::dso) ? T * (T + 1) / 2 : 0);
      std::vector<Vec> local(M);
      for (int i = 0; i < M; ++i) {
        local[i].resize(payload);
        local[i][0] = v_shares[i];
        local[i][1] = have_prev ? prev_q_share[i] : 0.0;
        local[i][2] = have_prev ? prev_local_costs[i] / M : 0.0;
        if (payload > 3) local[i].segment(3, payload - 3) = c_packed[i];
      }
      const auto summed = consensus.sum(local);
      for (int i = 0; i < M; ++i) {
        v_post[i] = summed[i][0];
        q_prev_post[i] = summed[i][1];
        l_prev_post[i] = summed[i][2];
        if (payload > 3) c_packed[i] = summed[i].segment(3, payload - 3);
      }
    } else {
      v_post.setConstant(v_exact);
      q_prev_post.setConstant(prev_q_exact);
      l_prev_post.setConstant(have_prev ? prev_local_costs.mean() : 0.0);
    }

    // --- finish the previous transition now that V(s_t) is known
    if (have_prev) {
      pending.delta = Vec(M);
      for (int i = 0; i < M; ++i)
        pending.delta[i] = td_error(l_prev_post[i], config.gamma, v_post[i], q_prev_post[i]);
      out.td[t - 1] = pending.delta[0];
      buffer.push(std::move(pending));
    }

    // --- parameter update
    if (updating) {
      PhaseTimer timer(&out.wall_update);
      out.updated[t] = 1;
      if (algo == Algorithm::dfo) {
        for (int i = 0; i < M; ++i) {
          const Vec dir = (G[i] * delta_loc[i]) / static_cast<double>(T);
          const Vec next = thetas[i].flatten() + alpha * dir;
          thetas[i] = ThetaLocal::unflatten(next, thetas[i].n, thetas[i].m, thetas[i].deg);
          out.updates.push_back({t, i, 0.0, mode_name, dir.norm(), 0.0, false});
        }
      } else if (algo == Algorithm::dso) {
        UpdateWorkspace ws;
        ws.delta = delta_loc[0];  // each agent applies its own copy below
        ws.G = G;
        ws.K = K;
        ws.K_tilde = K_tilde;
        ws.sigma = sigma;
        ws.alpha = alpha;
        ws.C.resize(M);
        ws.direction.assign(M, Vec());
        ws.max_cond = 0.0;
        bool skip = false;
        std::vector<CombinationResult> combos(M);
        for (int i = 0; i < M; ++i) {
          ws.C[i] = unpack_upper_triangle(c_packed[i], T);
          combos[i] = update_combination(ws.C[i], delta_loc[i]);
          ws.max_cond = std::max(ws.max_cond, combos[i].cond);
        }
        skip = config.regularizer == RegularizerMode::nonsingular &&
               ws.max_cond > config.cond_limit;
        for (int i = 0; i < M; ++i) {
          if (skip) {
            ws.direction[i] = Vec::Zero(thetas[i].size());
          } else {
            ws.direction[i] = -(K_tilde[i] * (G[i] * combos[i].e));
            const Vec next = thetas[i].flatten() - alpha * ws.direction[i];
            thetas[i] = ThetaLocal::unflatten(next, thetas[i].n, thetas[i].m, thetas[i].deg);
          }
          out.updates.push_back(
              {t, i, sigma[i], mode_name, ws.direction[i].norm(), combos[i].cond, skip});
        }
        if (skip) {
          out.update_skipped[t] = 1;
          ++out.skipped_updates;
        }
        if (config.certify_posdef && config.regularizer == RegularizerMode::posdef) {
          // Factorization certificates for every matrix the update inverts.
          bool ok = true;
          int n_theta = 0;
          for (int i = 0; i < M; ++i) {
            const int nti = thetas[i].size();
            n_theta += nti;
            Eigen::LLT<Mat> llt(T * sigma[i] * Mat::Identity(nti, nti) - K[i]);
            ok = ok && llt.info() == Eigen::Success;
          }
          Eigen::LLT<Mat> llt_ic(Mat::Identity(T, T) + ws.C[0]);
          ok = ok && llt_ic.info() == Eigen::Success;
          Mat big = Mat::Zero(n_theta, n_theta);
          int off = 0;
          for (int i = 0; i < M; ++i) {
            const int nti = thetas[i].size();
            big.block(off, off, nti, nti) =
                T * sigma[i] * Mat::Identity(nti, nti) - K[i];
            off += nti;
          }
          Mat U(n_theta, T);
          off = 0;
          for (int i = 0; i < M; ++i) {
            U.block(off, 0, thetas[i].size(), T) = G[i];
            off += thetas[i].size();
          }
          big += U * U.transpose();
          Eigen::LLT<Mat> llt_big(big);
          ok = ok && llt_big.info() == Eigen::Success;
          if (!ok) ++out.posdef_violations;
        }
      } else {  // cso
        Vec stacked(0);
        {
          int n_theta = 0;
          for (const auto& th : thetas) n_theta += th.size();
          stacked.resize(n_theta);
          int off = 0;
          for (const auto& th : thetas) {
            stacked.segment(off, th.size()) = th.flatten();
            off += th.size();
          }
        }
        const auto upd = centralized_second_order_update(stacked, G, K, delta_loc[0],
                                                         sigma, alpha, config.cond_limit);
        if (upd.skipped) {
          out.update_skipped[t] = 1;
          ++out.skipped_updates;
        } else {
          int off = 0;
          for (int i = 0; i < M; ++i) {
            thetas[i] = ThetaLocal::unflatten(upd.theta.segment(off, thetas[i].size()),
                                              thetas[i].n, thetas[i].m, thetas[i].deg);
            off += thetas[i].size();
          }
        }
        int off = 0;
        for (int i = 0; i < M; ++i) {
          out.updates.push_back({t, i, sigma[i], mode_name,
                                 upd.direction.segment(off, thetas[i].size()).norm(),
                                 upd.cond, upd.skipped});
          off += thetas[i].size();
        }
      }
    }

    // --- low-weight conditioning watch (sensitivity assumptions erode as the
    // squared-cost weights vanish)
    for (int i = 0; i < M; ++i)
      if (thetas[i].state_weight.norm() < 1e-6 || thetas[i].input_weight.norm() < 1e-6) {
        ++out.weight_warnings;
        break;
      }

    // --- exploration around the greedy action
    std::vector<Vec> action(M);
    for (int i = 0; i < M; ++i)
      action[i] = explore(greedy[i], sched, t, explore_rng[i], config.u_min, config.u_max);

    // --- action-value evaluation at the executed action; sensitivities are
    // cached with the parameters that produced them
    pending = Transition{};
    pending.state = state;
    pending.action = action;
    pending.sens.resize(M);
    {
      PhaseTimer timer(&out.wall_solve);
      if (distributed) {
        const auto res = admm_q.solve(thetas, state, &action, log);
        for (int i = 0; i < M; ++i) {
          prev_q_share[i] = res.agents[i].value_share;
          pending.sens[i].gradient = lagrangian_gradient(thetas[i], mpc, res.agents[i].p);
          pending.sens[i].hessian = lagrangian_hessian(thetas[i], mpc, res.agents[i].p);
          pending.sens[i].degenerate = res.agents[i].p.degenerate;
          if (res.agents[i].p.degenerate) ++out.degenerate_solutions;
        }
      } else {
        const auto res =
            solve_q_centralized(thetas, topo, mpc, state, action, central_opt, &central_q);
        prev_q_exact = res.value;
        for (int i = 0; i < M; ++i) {
          pending.sens[i].gradient = lagrangian_gradient(thetas[i], mpc, res.agents[i]);
          pending.sens[i].hessian = lagrangian_hessian(thetas[i], mpc, res.agents[i]);
          pending.sens[i].degenerate = res.agents[i].degenerate;
          if (res.agents[i].degenerate) ++out.degenerate_solutions;
        }
      }
    }

    // --- environment step
    {
      PhaseTimer timer(&out.wall_env);
      const auto step_res = env_step(dyn, topo, cost_spec, state, action, noise_rng);
      out.cost[t] = step_res.global_cost;
      out.states[t] = state;
      out.actions[t] = action;
      out.local_costs[t] = step_res.local_costs;
      pending.next_state = step_res.next_state;
      prev_local_costs = step_res.local_costs;
      state = step_res.next_state;
    }
    have_prev = true;

    if (distributed && config.admm_warm_start) {
      admm_v.shift_warm_state();
      admm_q.shift_warm_state();
    }
  }

  // Close the final transition with one more value evaluation so every step
  // has a TD error.
  if (have_prev && steps > 0) {
    if (log) log->set_step(steps);
    double v_last = 0.0;
    Vec q_last(M), l_last(M), v_post(M);
    if (distributed) {
      const auto res = admm_v.solve(thetas, state, nullptr, log);
      std::vector<Vec> local(M);
      for (int i = 0; i < M; ++i) {
        local[i].resize(3);
        local[i][0] = res.agents[i].value_share;
        local[i][1] = prev_q_share[i];
        local[i][2] = prev_local_costs[i] / M;
      }
      const auto summed = consensus.sum(local);
      out.td[steps - 1] =
          td_error(summed[0][2], config.gamma, summed[0][0], summed[0][1]);
    } else {
      const auto res = solve_v_centralized(thetas, topo, mpc, state, central_opt, &central_v);
      v_last = res.value;
      out.td[steps - 1] =
          td_error(prev_local_costs.mean(), config.gamma, v_last, prev_q_exact);
    }
  }

  moving_average(out.cost, out.cost_ma, 100, false);
  moving_average(out.td, out.td_ma, 100, true);
  out.discounted_return = 0.0;
  double g_pow = 1.0;
  for (std::int64_t t = 0; t < steps; ++t) {
    out.discounted_return += g_pow * out.cost[t];
    g_pow *= config.gamma;
  }
  for (const auto& th : thetas) out.final_theta.push_back(th.flatten());
  return out;
}

// ---------------------------------------------------------------------------
// persistence

double end_window_cost(const RunResult& run, double tail_fraction) {
  const std::int64_t n = static_cast<std::int64_t>(run.cost.size());
  const std::int64_t start = n - std::max<std::int64_t>(1, static_cast<std::int64_t>(n * tail_fraction));
  double acc = 0.0;
  for (std::int64_t t = start; t < n; ++t) acc += run.cost[t];
  return acc / static_cast<double>(n - start);
}

void write_run_outputs(const ExperimentConfig& config, Algorithm algo,
                       std::uint64_t seed, const RunResult& run,
                       const std::string& out_dir, const MessageLog* log) {
  fs::create_directories(out_dir);
  const int M = config.num_agents;
  const int n = config.state_dim, m = config.input_dim;
  const std::int64_t steps = static_cast<std::int64_t>(run.cost.size());

  CsvTable traj;
  traj.header = {"t"};
  for (int i = 0; i < M; ++i)
    for (int c = 0; c < n; ++c) traj.header.push_back("s" + std::to_string(i) + "_" + std::to_string(c));
  for (int i = 0; i < M; ++i)
    for (int c = 0; c < m; ++c) traj.header.push_back("a" + std::to_string(i) + "_" + std::to_string(c));
  for (int i = 0; i < M; ++i) traj.header.push_back("L" + std::to_string(i));
  traj.header.insert(traj.header.end(), {"L", "delta", "updated", "skipped"});
  for (std::int64_t t = 0; t < steps; ++t) {
    std::vector<std::string> row{std::to_string(t)};
    for (int i = 0; i < M; ++i)
      for (int c = 0; c < n; ++c) row.push_back(csv_format(run.states[t][i][c]));
    for (int i = 0; i < M; ++i)
      for (int c = 0; c < m; ++c) row.push_back(csv_format(run.actions[t][i][c]));
    for (int i = 0; i < M; ++i) row.push_back(csv_format(run.local_costs[t][i]));
    row.push_back(csv_format(run.cost[t]));
    row.push_back(csv_format(run.td[t]));
    row.push_back(std::to_string(static_cast<int>(run.updated[t])));
    row.push_back(std::to_string(static_cast<int>(run.update_skipped[t])));
    traj.rows.push_back(std::move(row));
  }
  traj.write(out_dir + "/trajectory.csv");

  CsvTable metrics;
  metrics.header = {"t", "cost", "td", "cost_ma100", "abs_td_ma100"};
  for (std::int64_t t = 0; t < steps; ++t)
    metrics.rows.push_back({std::to_string(t), csv_format(run.cost[t]), csv_format(run.td[t]),
                            csv_format(run.cost_ma[t]), csv_format(run.td_ma[t])});
  metrics.write(out_dir + "/metrics.csv");

  CsvTable updates;
  updates.header = {"t", "agent", "sigma", "mode", "norm_d", "cond", "skipped"};
  for (const auto& u : run.updates)
    updates.rows.push_back({std::to_string(u.t), std::to_string(u.agent),
                            csv_format(u.sigma), u.mode, csv_format(u.norm_d),
                            csv_format(u.cond), std::to_string(u.skipped ? 1 : 0)});
  updates.write(out_dir + "/updates.csv");

  const std::string cfg_json = config.to_json();
  {
    json manifest;
    manifest["algorithm"] = to_string(algo);
    manifest["seed"] = seed;
    manifest["steps"] = steps;
    manifest["content_hash"] =
        fnv1a(cfg_json + to_string(algo) + std::to_string(seed));
    manifest["config"] = json::parse(cfg_json);
    std::ofstream(out_dir + "/manifest.json") << manifest.dump(2) << '\n';
  }
  {
    json summary;
    summary["discounted_return"] = run.discounted_return;
    summary["end_window_cost"] = end_window_cost(run);
    summary["first_window_cost"] =
        run.cost_ma.empty() ? 0.0 : run.cost_ma[std::min<std::int64_t>(steps - 1, 99)];
    summary["skipped_updates"] = run.skipped_updates;
    summary["degenerate_solutions"] = run.degenerate_solutions;
    summary["weight_warnings"] = run.weight_warnings;
    summary["posdef_violations"] = run.posdef_violations;
    summary["wall_solve"] = run.wall_solve;
    summary["wall_consensus"] = run.wall_consensus;
    summary["wall_update"] = run.wall_update;
    summary["wall_env"] = run.wall_env;
    json theta = json::array();
    for (const auto& th : run.final_theta) theta.push_back(vec_to_json(th));
    summary["final_theta"] = theta;
    std::ofstream(out_dir + "/summary.json") << summary.dump(2) << '\n';
  }
  if (log) log->write_csv(out_dir + "/messages.csv");
}

// ---------------------------------------------------------------------------
// sweep / aggregate / audit

SweepSummary sweep(const ExperimentConfig& config, const std::vector<Algorithm>& algos,
                   const std::vector<double>& alphas,
                   const std::vector<std::uint64_t>& seeds, int threads,
                   const std::string& out_dir) {
  struct Job {
    Algorithm algo;
    double alpha;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto algo : algos)
    for (const double a : alphas)
      for (const auto s : seeds) jobs.push_back({algo, a, s});

  std::vector<SweepArm> arms(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t k = next.fetch_add(1);
      if (k >= jobs.size()) return;
      const Job& job = jobs[k];
      ExperimentConfig local = config;
      if (job.algo == Algorithm::dfo)
        local.alpha_first_order = job.alpha;
      else
        local.alpha_second_order = job.alpha;
      const RunResult run = run_experiment(local, job.algo, job.seed);
      arms[k] = {job.algo, job.alpha, job.seed, end_window_cost(run)};
      if (!out_dir.empty()) {
        std::ostringstream dir;
        dir << out_dir << "/" << to_string(job.algo) << "_alpha" << job.alpha << "_seed"
            << job.seed;
        write_run_outputs(local, job.algo, job.seed, run, dir.str());
      }
    }
  };
  std::vector<std::thread> pool;
  const int nthreads = std::max(1, threads);
  for (int w = 0; w < nthreads; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  SweepSummary summary;
  summary.arms = arms;
  std::sort(summary.arms.begin(), summary.arms.end(), [](const SweepArm& a, const SweepArm& b) {
    if (a.end_cost != b.end_cost) return a.end_cost < b.end_cost;
    return a.alpha > b.alpha;
  });

  for (const auto algo : algos) {
    double best_alpha = 0.0, best_mean = std::numeric_limits<double>::infinity();
    for (const double a : alphas) {
      double acc = 0.0;
      int count = 0;
      for (const auto& arm : arms)
        if (arm.algo == algo && arm.alpha == a) {
          acc += arm.end_cost;
          ++count;
        }
      const double mean = acc / std::max(1, count);
      if (mean < best_mean || (mean == best_mean && a > best_alpha)) {
        best_mean = mean;
        best_alpha = a;
      }
    }
    summary.best_alpha[to_string(algo)] = best_alpha;
  }

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    CsvTable table;
    table.header = {"algorithm", "alpha", "seed", "end_window_cost"};
    for (const auto& arm : summary.arms)
      table.rows.push_back({to_string(arm.algo), csv_format(arm.alpha),
                            std::to_string(arm.seed), csv_format(arm.end_cost)});
    table.write(out_dir + "/summary.csv");
    json best;
    for (const auto& [name, a] : summary.best_alpha) best[name] = a;
    std::ofstream(out_dir + "/best_alpha.json") << best.dump(2) << '\n';
  }
  return summary;
}

double percentile_linear(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("percentile of empty set");
  std::sort(values.begin(), values.end());
  const double rank = p / 100.0 * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(rank);
  const double frac = rank - static_cast<double>(lo);
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] * (1.0 - frac) + values[lo + 1] * frac;
}

PercentileBands aggregate_series(const std::vector<std::vector<double>>& series) {
  if (series.empty()) throw std::invalid_argument("aggregate of zero runs");
  std::size_t len = series[0].size();
  for (const auto& s : series) len = std::min(len, s.size());
  PercentileBands bands;
  bands.p32.resize(len);
  bands.p50.resize(len);
  bands.p68.resize(len);
  std::vector<double> column(series.size());
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t r = 0; r < series.size(); ++r) column[r] = series[r][t];
    bands.p32[t] = percentile_linear(column, 32.0);
    bands.p50[t] = percentile_linear(column, 50.0);
    bands.p68[t] = percentile_linear(column, 68.0);
  }
  return bands;
}

void aggregate_directory(const std::string& in_dir, const std::string& out_dir) {
  std::vector<std::string> run_dirs;
  for (const auto& entry : fs::directory_iterator(in_dir))
    if (entry.is_directory() && fs::exists(entry.path() / "metrics.csv"))
      run_dirs.push_back(entry.path().string());
  std::sort(run_dirs.begin(), run_dirs.end());
  if (run_dirs.empty()) throw std::runtime_error("no run directories under " + in_dir);

  std::vector<std::vector<double>> cost_ma, td_ma;
  for (const auto& dir : run_dirs) {
    const CsvTable t = CsvTable::read(dir + "/metrics.csv");
    const int cc = t.column("cost_ma100"), tc = t.column("abs_td_ma100");
    std::vector<double> c, d;
    for (const auto& row : t.rows) {
      c.push_back(std::stod(row[cc]));
      d.push_back(std::stod(row[tc]));
    }
    cost_ma.push_back(std::move(c));
    td_ma.push_back(std::move(d));
  }
  const auto cost_bands = aggregate_series(cost_ma);
  const auto td_bands = aggregate_series(td_ma);

  fs::create_directories(out_dir);
  CsvTable outp;
  outp.header = {"t",      "cost_p32", "cost_p50", "cost_p68",
                 "td_p32", "td_p50",   "td_p68"};
  for (std::size_t t = 0; t < cost_bands.p50.size(); ++t)
    outp.rows.push_back({std::to_string(t), csv_format(cost_bands.p32[t]),
                         csv_format(cost_bands.p50[t]), csv_format(cost_bands.p68[t]),
                         csv_format(td_bands.p32[t]), csv_format(td_bands.p50[t]),
                         csv_format(td_bands.p68[t])});
  outp.write(out_dir + "/aggregate.csv");

  json meta;
  meta["percentile_rule"] =
      "linear interpolation on sorted values at rank p/100*(n-1)";
  meta["runs"] = run_dirs;
  meta["series"] = "100-step moving averages of global stage cost and |TD error|";
  std::ofstream(out_dir + "/metadata.json") << meta.dump(2) << '\n';
}

AuditReport audit_messages(const MessageLog& log, const Topology& topology,
                           const ExperimentConfig& config) {
  AuditReport report;
  const int traj = (config.horizon + 1) * config.state_dim;
  const int T = config.batch;
  const int base_payload = 3;
  const int update_payload = 3 + T * (T + 1) / 2;
  report.per_step_payload = base_payload;
  report.per_update_payload = update_payload;

  auto violation = [&](const std::string& what) {
    report.ok = false;
    if (report.violations.size() < 50) report.violations.push_back(what);
  };

  for (const auto& r : log.records()) {
    if (r.sender == r.receiver) violation("self message");
    if (!topology.has_edge(r.sender, r.receiver))
      violation("message outside the coupling graph: " + std::to_string(r.sender) +
                "->" + std::to_string(r.receiver));
    if (r.kind == "trajectory_copy" || r.kind == "consensus_broadcast") {
      ++report.admm_messages;
      if (r.num_scalars != traj)
        violation("trajectory payload of " + std::to_string(r.num_scalars) +
                  " scalars, expected " + std::to_string(traj));
    } else if (r.kind == "gac_vector") {
      ++report.gac_messages;
      if (r.num_scalars != base_payload && r.num_scalars != update_payload)
        violation("consensus payload of " + std::to_string(r.num_scalars) +
                  " scalars, expected " + std::to_string(base_payload) + " or " +
                  std::to_string(update_payload));
    } else {
      violation("unknown message kind: " + r.kind);
    }
  }
  return report;
}

}  // namespace dmpcq
