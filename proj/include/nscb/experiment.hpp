#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "nscb/environment.hpp"
#include "nscb/op_solver.hpp"
#include "nscb/scheduler.hpp"

namespace nscb {

enum class Algorithm { AdaReplay, NoReplayNoTest, OracleRestart, UniformRandom };

std::string algorithm_name(Algorithm a);
Algorithm algorithm_from_name(const std::string& name);

// Where the policy class comes from: "all" enumerates the full table space,
// "random" draws `count` distinct tables, "inline" embeds them in the config,
// "file" loads a JSON table file.
struct PolicyClassSpec {
  std::string type = "random";
  int count = 0;
  std::uint64_t seed = 0;
  std::string path;
  std::vector<std::vector<int>> policies;
};

struct ExperimentConfig {
  EnvironmentSpec env;
  PolicyClassSpec policy_class;
  std::vector<Algorithm> algorithms;
  double delta = 0.05;
  double constant_scale = 1.0;
  std::vector<std::uint64_t> seeds;
  std::string output_dir;
  int workers = 1;
  OpConfig op;

  void validate() const;
  static ExperimentConfig from_json(const std::string& text, const std::string& base_dir);
  static ExperimentConfig load(const std::string& path);
};

PolicyClass build_policy_class(const PolicyClassSpec& spec, int K, int num_contexts,
                               const std::string& base_dir);

// Everything summary.json holds for one (algorithm, seed) run, plus the
// artifact directory relative to the experiment root.
struct RunSummary {
  Algorithm algorithm = Algorithm::AdaReplay;
  std::uint64_t seed = 0;
  std::int64_t rounds = 0;
  double final_realized = 0.0;
  double final_pseudo = 0.0;
  std::vector<std::int64_t> restart_rounds;
  std::int64_t switches = 0;
  double total_variation = 0.0;
  std::int64_t op_solves = 0;
  std::string dir;
};

struct ExperimentResult {
  std::string output_dir;
  std::vector<RunSummary> runs;  // algorithm-major, then seed order
};

// Rounds u >= 2 of a piecewise environment where the distribution actually
// changes; empty for drifting environments.
std::vector<std::int64_t> true_change_rounds(const Environment& env);

// One algorithm run; params may be null only for uniform_random, and
// forced_restarts feeds the known-change-point baseline.
RunResult execute_algorithm(Algorithm a, const Environment& env, const PolicyClass& pc,
                            const ScheduleParams* params,
                            const std::vector<std::int64_t>& forced_restarts, std::uint64_t seed);

// Runs every (algorithm, seed) pair up to cfg.workers at a time and writes the
// artifact tree: per run rounds.csv, events.jsonl, summary.json, regret.csv,
// timing.json; at the root aggregate.json and ground_truth.json. Output bytes
// do not depend on the worker count (timing.json aside).
ExperimentResult run_experiment(const ExperimentConfig& cfg);

void write_events_jsonl(const std::vector<Event>& events, std::ostream& os);
void write_regret_csv(const RegretSeries& series, std::ostream& os);
std::string summary_to_json(const RunSummary& s);

// Concatenates every run's regret curve into one tidy table
// (algorithm, seed, t, realized, pseudo), discovering runs via aggregate.json.
void emit_plot_data(const std::string& experiment_dir, std::ostream& os);

}  // namespace nscb
