// Command-line front end: train single instances, sweep learning rates,
// aggregate runs into percentile bands, and audit message logs.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "dmpcq/experiment.hpp"

using namespace dmpcq;

namespace {

ExperimentConfig load_config(const std::string& path) {
  if (path.empty()) return ExperimentConfig::defaults();
  return ExperimentConfig::from_json_file(path);
}

std::vector<double> parse_doubles(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& list) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoull(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"distributed MPC-based Q-learning testbed"};
  app.require_subcommand(1);

  // ---- run
  auto* run_cmd = app.add_subcommand("run", "train one instance and write its logs");
  std::string run_config, run_algo = "dso", run_out = "out";
  std::uint64_t run_seed = 1;
  std::int64_t run_steps = -1;
  bool run_log_messages = false;
  run_cmd->add_option("--config", run_config, "JSON config file (defaults when omitted)");
  run_cmd->add_option("--algo", run_algo, "dfo | dso | cso")->required();
  run_cmd->add_option("--seed", run_seed, "random seed");
  run_cmd->add_option("--steps", run_steps, "override training steps");
  run_cmd->add_option("--out", run_out, "output directory")->required();
  run_cmd->add_flag("--log-messages", run_log_messages,
                    "record every neighbor-to-neighbor message (large)");

  // ---- sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "grid over learning rates and seeds");
  std::string sweep_config, sweep_alphas, sweep_seeds, sweep_out = "sweep_out";
  std::string sweep_algos = "dfo,dso,cso";
  int sweep_threads = 1;
  std::int64_t sweep_steps = -1;
  sweep_cmd->add_option("--config", sweep_config, "JSON config file");
  sweep_cmd->add_option("--alphas", sweep_alphas, "comma-separated learning rates")->required();
  sweep_cmd->add_option("--seeds", sweep_seeds, "comma-separated seeds")->required();
  sweep_cmd->add_option("--algos", sweep_algos, "comma-separated algorithms");
  sweep_cmd->add_option("--steps", sweep_steps, "override training steps");
  sweep_cmd->add_option("--threads", sweep_threads, "parallel runs");
  sweep_cmd->add_option("--out", sweep_out, "output directory")->required();

  // ---- aggregate
  auto* agg_cmd = app.add_subcommand("aggregate", "percentile bands across runs");
  std::string agg_in, agg_out;
  agg_cmd->add_option("--in", agg_in, "directory containing run directories")->required();
  agg_cmd->add_option("--out", agg_out, "output directory")->required();

  // ---- audit-messages
  auto* audit_cmd = app.add_subcommand("audit-messages", "locality audit of a message log");
  std::string audit_in;
  audit_cmd->add_option("--in", audit_in, "run directory with messages.csv + manifest.json")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      ExperimentConfig cfg = load_config(run_config);
      if (run_steps > 0) cfg.steps = run_steps;
      const Algorithm algo = algorithm_from_string(run_algo);
      MessageLog log;
      MessageLog* log_ptr = run_log_messages ? &log : nullptr;
      const RunResult run = run_experiment(cfg, algo, run_seed, log_ptr);
      write_run_outputs(cfg, algo, run_seed, run, run_out, log_ptr);
      std::printf("steps=%lld end_window_cost=%.6f discounted_return=%.6f skipped=%lld\n",
                  static_cast<long long>(cfg.steps), end_window_cost(run),
                  run.discounted_return, static_cast<long long>(run.skipped_updates));
    } else if (*sweep_cmd) {
      ExperimentConfig cfg = load_config(sweep_config);
      if (sweep_steps > 0) cfg.steps = sweep_steps;
      std::vector<Algorithm> algos;
      {
        std::stringstream ss(sweep_algos);
        std::string item;
        while (std::getline(ss, item, ',')) algos.push_back(algorithm_from_string(item));
      }
      const auto summary = sweep(cfg, algos, parse_doubles(sweep_alphas),
                                 parse_seeds(sweep_seeds), sweep_threads, sweep_out);
      for (const auto& arm : summary.arms)
        std::printf("%s alpha=%g seed=%llu end_window_cost=%.6f\n", to_string(arm.algo).c_str(),
                    arm.alpha, static_cast<unsigned long long>(arm.seed), arm.end_cost);
      for (const auto& [name, alpha] : summary.best_alpha)
        std::printf("best alpha for %s: %g\n", name.c_str(), alpha);
    } else if (*agg_cmd) {
      aggregate_directory(agg_in, agg_out);
      std::printf("wrote %s/aggregate.csv\n", agg_out.c_str());
    } else if (*audit_cmd) {
      const MessageLog log = MessageLog::read_csv(audit_in + "/messages.csv");
      std::ifstream mf(audit_in + "/manifest.json");
      if (!mf) throw std::runtime_error("missing manifest.json in " + audit_in);
      // Rebuild the config the run was made with, then check the log against it.
      const std::string tmp = audit_in + "/.audit_config.json";
      {
        nlohmann::json manifest = nlohmann::json::parse(mf);
        std::ofstream(tmp) << manifest["config"].dump(2);
      }
      const ExperimentConfig cfg = ExperimentConfig::from_json_file(tmp);
      std::filesystem::remove(tmp);
      const auto report = audit_messages(log, cfg.make_topology(), cfg);
      std::printf("messages: %lld consensus, %lld trajectory\n",
                  static_cast<long long>(report.gac_messages),
                  static_cast<long long>(report.admm_messages));
      std::printf("payload per step: %d scalars; per update: %d scalars\n",
                  report.per_step_payload, report.per_update_payload);
      if (report.ok) {
        std::printf("locality audit: OK\n");
      } else {
        std::printf("locality audit: FAILED\n");
        for (const auto& v : report.violations) std::printf("  %s\n", v.c_str());
        return 1;
      }
    }
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 1;
  }
  return 0;
}
