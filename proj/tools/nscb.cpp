#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nscb/diagnostics.hpp"
#include "nscb/errors.hpp"
#include "nscb/experiment.hpp"

namespace {

nscb::Interval parse_interval(const std::string& text) {
  auto colon = text.find(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 >= text.size())
    throw nscb::InputError("interval must look like s:e");
  nscb::Interval I;
  try {
    std::size_t used = 0;
    I.s = std::stoll(text.substr(0, colon), &used);
    if (used != colon) throw nscb::InputError("interval must look like s:e");
    std::string tail = text.substr(colon + 1);
    I.e = std::stoll(tail, &used);
    if (used != tail.size()) throw nscb::InputError("interval must look like s:e");
  } catch (const std::logic_error&) {
    throw nscb::InputError("interval must look like s:e");
  }
  if (I.s < 1 || I.e < I.s) throw nscb::InputError("interval needs 1 <= s <= e");
  return I;
}

int cmd_run(const std::string& cfg_path, int workers, double cscale, std::int64_t seed_offset) {
  nscb::ExperimentConfig cfg = nscb::ExperimentConfig::load(cfg_path);
  if (workers > 0) cfg.workers = workers;
  if (cscale > 0.0) cfg.constant_scale = cscale;
  if (seed_offset != 0)
    for (auto& s : cfg.seeds) s += static_cast<std::uint64_t>(seed_offset);
  nscb::ExperimentResult res = nscb::run_experiment(cfg);
  for (const nscb::RunSummary& s : res.runs) {
    std::cout << nscb::algorithm_name(s.algorithm) << " seed " << s.seed << ": pseudo regret "
              << s.final_pseudo << ", realized " << s.final_realized << ", restarts "
              << s.restart_rounds.size() << "\n";
  }
  std::cout << "artifacts written to " << res.output_dir << "\n";
  return 0;
}

int cmd_diagnose_partition(const std::string& cfg_path, const std::string& interval) {
  nscb::ExperimentConfig cfg = nscb::ExperimentConfig::load(cfg_path);
  nscb::Environment env(cfg.env);
  nscb::PolicyClass pc =
      nscb::build_policy_class(cfg.policy_class, cfg.env.K, cfg.env.num_contexts, "");
  nscb::ScheduleParams params = nscb::ScheduleParams::compute(
      cfg.env.T, cfg.env.K, pc.size(), cfg.delta, cfg.constant_scale, cfg.op);
  nscb::PartitionReport rep = nscb::partition_interval(env, parse_interval(interval), params.C0);
  std::cout << rep.to_json() << "\n";
  return 0;
}

int cmd_diagnose_excess(const std::string& cfg_path, const std::string& interval, int seed_index,
                        const std::string& algo_name) {
  nscb::ExperimentConfig cfg = nscb::ExperimentConfig::load(cfg_path);
  if (seed_index < 0 || seed_index >= static_cast<int>(cfg.seeds.size()))
    throw nscb::InputError("seed index outside the configured seed list");
  nscb::Algorithm algo = nscb::algorithm_from_name(algo_name);
  nscb::Environment env(cfg.env);
  nscb::PolicyClass pc =
      nscb::build_policy_class(cfg.policy_class, cfg.env.K, cfg.env.num_contexts, "");
  nscb::ScheduleParams params = nscb::ScheduleParams::compute(
      cfg.env.T, cfg.env.K, pc.size(), cfg.delta, cfg.constant_scale, cfg.op);
  std::vector<std::int64_t> forced;
  if (algo == nscb::Algorithm::OracleRestart)
    for (std::int64_t u : nscb::true_change_rounds(env)) forced.push_back(u - 1);
  nscb::RunResult rr =
      nscb::execute_algorithm(algo, env, pc, &params, forced, cfg.seeds[seed_index]);
  nscb::ExcessReport rep =
      nscb::excess_regret_diagnostic(rr.history, env, pc, params, parse_interval(interval));
  std::cout << rep.to_json() << "\n";
  return 0;
}

int cmd_plot_data(const std::string& experiment_dir, const std::string& out_path) {
  if (out_path.empty()) {
    nscb::emit_plot_data(experiment_dir, std::cout);
    return 0;
  }
  std::ofstream os(out_path, std::ios::binary | std::ios::trunc);
  if (!os) throw nscb::InputError("cannot write " + out_path);
  nscb::emit_plot_data(experiment_dir, os);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"seeded simulator for an adaptively restarting contextual bandit learner"};
  app.require_subcommand(1);

  std::string run_cfg;
  int workers = -1;
  double cscale = -1.0;
  std::int64_t seed_offset = 0;
  CLI::App* run_cmd = app.add_subcommand("run", "run a configured experiment");
  run_cmd->add_option("--config", run_cfg, "experiment config JSON")->required();
  run_cmd->add_option("--workers", workers, "override the config worker count");
  run_cmd->add_option("--constant-scale", cscale, "override the config constant scale");
  run_cmd->add_option("--seed-offset", seed_offset, "shift every configured seed");

  CLI::App* diag = app.add_subcommand("diagnose", "offline ground-truth diagnostics");
  diag->require_subcommand(1);
  std::string part_cfg, part_interval;
  CLI::App* part = diag->add_subcommand("partition", "greedy low-variation partition");
  part->add_option("--config", part_cfg, "experiment config JSON")->required();
  part->add_option("--interval", part_interval, "closed round interval s:e")->required();
  std::string ex_cfg, ex_interval, ex_algo = "ada_replay";
  int ex_seed_index = 0;
  CLI::App* excess = diag->add_subcommand("excess", "regret-gap check on a recorded block");
  excess->add_option("--config", ex_cfg, "experiment config JSON")->required();
  excess->add_option("--interval", ex_interval, "closed round interval s:e")->required();
  excess->add_option("--seed-index", ex_seed_index, "which configured seed to replay");
  excess->add_option("--algorithm", ex_algo, "which algorithm to replay");

  std::string plot_dir, plot_out;
  CLI::App* plot = app.add_subcommand("plot-data", "tidy cumulative-regret CSV");
  plot->add_option("--experiment", plot_dir, "experiment output directory")->required();
  plot->add_option("--out", plot_out, "write to this file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(run_cfg, workers, cscale, seed_offset);
    if (part->parsed()) return cmd_diagnose_partition(part_cfg, part_interval);
    if (excess->parsed()) return cmd_diagnose_excess(ex_cfg, ex_interval, ex_seed_index, ex_algo);
    if (plot->parsed()) return cmd_plot_data(plot_dir, plot_out);
    std::cerr << "error: no subcommand selected\n";
    return 1;
  } catch (const nscb::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 2;
  }
}
