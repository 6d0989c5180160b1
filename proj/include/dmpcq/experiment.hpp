#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dmpcq/admm.hpp"
#include "dmpcq/environment.hpp"
#include "dmpcq/learner.hpp"
#include "dmpcq/message_log.hpp"
#include "dmpcq/mpc.hpp"
#include "dmpcq/topology.hpp"

namespace dmpcq {

enum class Algorithm { dfo, dso, cso };

Algorithm algorithm_from_string(const std::string& name);
std::string to_string(Algorithm algo);

/// Full experiment description. Defaults reproduce the benchmark setup:
/// three agents in a chain, horizon 10, gamma 0.9, batch 15, buffer 100,
/// 100 consensus and 100 ADMM iterations, learning rates 1e-4 (second
/// order) and 1e-8 (first order). Loadable from a JSON document in which
/// any subset of fields overrides these defaults.
struct ExperimentConfig {
  // topology
  std::string topology_type = "chain";  // "chain" | "complete" | "custom"
  int num_agents = 3;
  std::vector<std::pair<int, int>> edges;  // used when topology_type == "custom"

  // dimensions
  int state_dim = 2;
  int input_dim = 1;

  // true dynamics (identical blocks for every agent)
  Mat A_true, A_couple_true, B_true;
  double noise_low = -0.1, noise_high = 0.0;
  Vec noise_mask;

  // stage cost and state constraints
  Vec s_min, s_max, omega;

  // initial-state distribution and episode structure
  Vec init_low, init_high;
  std::int64_t reset_period = 0;  // 0: one continuing episode

  // controller shape and initial model
  int horizon = 10;
  double gamma = 0.9;
  Vec u_min, u_max;
  Mat A_model0, B_model0;
  double coupling0 = 0.0;
  Vec state_weight0, input_weight0;

  // learner
  double alpha_second_order = 1e-4;
  double alpha_first_order = 1e-8;
  int batch = 15;     // samples per update
  int buffer = 100;   // replay capacity
  int update_period = 1;  // environment steps between parameter updates
  RegularizerMode regularizer = RegularizerMode::nonsingular;
  double cond_limit = 1e12;
  double exploration_eps0 = 0.1;
  double exploration_decay = 0.99995;
  bool certify_posdef = false;  // factorization certificates on every update

  // distributed optimization
  int admm_iterations = 100;
  double admm_rho = 0.5;
  bool admm_warm_start = true;
  double qp_tol = 1e-10;
  int gac_iterations = 100;
  bool consensus_exact = false;  // exact-sum stub instead of mixing

  // run
  std::int64_t steps = 20000;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};

  static ExperimentConfig defaults();
  static ExperimentConfig from_json_file(const std::string& path);
  std::string to_json() const;

  Topology make_topology() const;
  TrueDynamics make_dynamics(const Topology& topo) const;
  StageCostSpec make_cost() const;
  MpcConfig make_mpc() const;
  std::vector<ThetaLocal> make_initial_theta(const Topology& topo) const;
  double alpha_for(Algorithm algo) const {
    return algo == Algorithm::dfo ? alpha_first_order : alpha_second_order;
  }
};

struct UpdateRecord {
  std::int64_t t = 0;
  int agent = 0;
  double sigma = 0.0;
  std::string mode;  // "posdef" | "nonsingular" | "first_order"
  double norm_d = 0.0;
  double cond = 0.0;
  bool skipped = false;
};

struct RunResult {
  // one entry per environment step
  std::vector<double> cost;      // global stage cost
  std::vector<double> td;        // TD error of the transition started at t
  std::vector<double> cost_ma;   // 100-step moving average of cost
  std::vector<double> td_ma;     // 100-step moving average of |td|
  std::vector<std::vector<Vec>> states, actions;  // [t][agent]
  std::vector<Vec> local_costs;  // [t], one entry per agent
  std::vector<std::uint8_t> updated, update_skipped;

  std::vector<UpdateRecord> updates;
  std::vector<Vec> final_theta;

  double discounted_return = 0.0;
  std::int64_t skipped_updates = 0;
  std::int64_t degenerate_solutions = 0;
  std::int64_t weight_warnings = 0;
  std::int64_t posdef_violations = 0;  // populated when certify_posdef is set
  double wall_solve = 0.0, wall_consensus = 0.0, wall_update = 0.0, wall_env = 0.0;
};

/// Trains one instance. Deterministic for a fixed (config, algorithm, seed).
RunResult run_experiment(const ExperimentConfig& config, Algorithm algo,
                         std::uint64_t seed, MessageLog* log = nullptr);

/// Writes trajectory.csv, metrics.csv, updates.csv, manifest.json and
/// summary.json (plus messages.csv when a log is given) into out_dir.
void write_run_outputs(const ExperimentConfig& config, Algorithm algo,
                       std::uint64_t seed, const RunResult& run,
                       const std::string& out_dir, const MessageLog* log = nullptr);

/// Mean global stage cost over the final tail_fraction of steps.
double end_window_cost(const RunResult& run, double tail_fraction = 0.1);

struct SweepArm {
  Algorithm algo;
  double alpha;
  std::uint64_t seed;
  double end_cost;
};
struct SweepSummary {
  std::vector<SweepArm> arms;  // sorted ascending by cost, ties toward larger alpha
  std::map<std::string, double> best_alpha;  // per algorithm name
};

/// Runs every (algorithm, alpha, seed) arm; seeds are shared across arms.
SweepSummary sweep(const ExperimentConfig& config, const std::vector<Algorithm>& algos,
                   const std::vector<double>& alphas,
                   const std::vector<std::uint64_t>& seeds, int threads = 1,
                   const std::string& out_dir = "");

/// Percentile bands across runs: linear interpolation on sorted values at
/// rank p/100 * (n-1), the documented rule.
struct PercentileBands {
  std::vector<double> p32, p50, p68;
};
PercentileBands aggregate_series(const std::vector<std::vector<double>>& series);
double percentile_linear(std::vector<double> values, double p);

/// Aggregates metrics.csv files found in run directories under in_dir.
void aggregate_directory(const std::string& in_dir, const std::string& out_dir);

struct AuditReport {
  bool ok = true;
  std::vector<std::string> violations;
  std::int64_t gac_messages = 0, admm_messages = 0;
  int per_step_payload = 0;    // gac scalars on non-update steps
  int per_update_payload = 0;  // gac scalars on update steps
};

/// Structural locality audit of a message log: every message travels along a
/// graph edge and carries only protocol payloads (trajectory copies, agreed
/// trajectories, consensus vectors of the documented sizes). Parameters,
/// local costs and model entries have no message kind, so their absence is
/// checked by exhaustion.
AuditReport audit_messages(const MessageLog& log, const Topology& topology,
                           const ExperimentConfig& config);

}  // namespace dmpcq
