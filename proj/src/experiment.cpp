#include "nscb/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "nscb/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace nscb {

namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("short write to " + path.string());
}

std::string resolve(const std::string& path, const std::string& base_dir) {
  fs::path p(path);
  if (p.is_absolute() || base_dir.empty()) return path;
  return (fs::path(base_dir) / p).string();
}

OpConfig op_from_json(const json& j) {
  OpConfig op;
  if (j.contains("C")) op.C = j.at("C").get<double>();
  if (j.contains("feas_tol")) op.feas_tol = j.at("feas_tol").get<double>();
  if (j.contains("iter_cap_factor")) op.iter_cap_factor = j.at("iter_cap_factor").get<double>();
  if (j.contains("sparsity_factor")) op.sparsity_factor = j.at("sparsity_factor").get<double>();
  if (j.contains("slack_target")) op.slack_target = j.at("slack_target").get<double>();
  if (j.contains("oracle_search")) op.oracle_search = j.at("oracle_search").get<bool>();
  return op;
}

struct Mean {
  double mean = 0.0;
  double stderr_ = 0.0;
};

Mean mean_stderr(const std::vector<double>& v) {
  Mean m;
  if (v.empty()) return m;
  double s = 0.0;
  for (double x : v) s += x;
  m.mean = s / static_cast<double>(v.size());
  if (v.size() < 2) return m;
  double ss = 0.0;
  for (double x : v) ss += (x - m.mean) * (x - m.mean);
  m.stderr_ = std::sqrt(ss / static_cast<double>(v.size() - 1)) /
              std::sqrt(static_cast<double>(v.size()));
  return m;
}

}  // namespace

std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::AdaReplay: return "ada_replay";
    case Algorithm::NoReplayNoTest: return "no_replay_no_test";
    case Algorithm::OracleRestart: return "oracle_restart";
    case Algorithm::UniformRandom: return "uniform_random";
  }
  throw InputError("unknown algorithm id");
}

Algorithm algorithm_from_name(const std::string& name) {
  if (name == "ada_replay") return Algorithm::AdaReplay;
  if (name == "no_replay_no_test") return Algorithm::NoReplayNoTest;
  if (name == "oracle_restart") return Algorithm::OracleRestart;
  if (name == "uniform_random") return Algorithm::UniformRandom;
  throw InputError("unrecognized algorithm '" + name + "'");
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw InputError("config needs at least one seed");
  if (algorithms.empty()) throw InputError("config needs at least one algorithm");
  if (output_dir.empty()) throw InputError("config needs an output directory");
  if (!(delta > 0.0 && delta < 1.0)) throw InputError("delta must lie in (0,1)");
  if (!(constant_scale > 0.0 && constant_scale <= 1.0))
    throw InputError("constant_scale must lie in (0,1]");
  if (workers < 1) throw InputError("workers must be positive");
  for (std::size_t i = 0; i < algorithms.size(); ++i)
    for (std::size_t k = i + 1; k < algorithms.size(); ++k)
      if (algorithms[i] == algorithms[k]) throw InputError("duplicate algorithm in config");
  for (std::size_t i = 0; i < seeds.size(); ++i)
    for (std::size_t k = i + 1; k < seeds.size(); ++k)
      if (seeds[i] == seeds[k]) throw InputError("duplicate seed in config");
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text,
                                             const std::string& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    ExperimentConfig cfg;
    if (j.contains("env") == j.contains("env_path"))
      throw InputError("config needs exactly one of env / env_path");
    if (j.contains("env")) {
      cfg.env = EnvironmentSpec::from_json(j.at("env").dump());
    } else {
      cfg.env = EnvironmentSpec::from_json(
          read_file(resolve(j.at("env_path").get<std::string>(), base_dir)));
    }
    if (j.contains("T") && j.at("T").get<std::int64_t>() != cfg.env.T)
      throw InputError("config horizon differs from the environment spec");

    const json& pcj = j.at("policy_class");
    cfg.policy_class.type = pcj.at("type").get<std::string>();
    if (cfg.policy_class.type == "random") {
      cfg.policy_class.count = pcj.at("count").get<int>();
      cfg.policy_class.seed = pcj.value("seed", std::uint64_t{0});
    } else if (cfg.policy_class.type == "file") {
      cfg.policy_class.path = resolve(pcj.at("path").get<std::string>(), base_dir);
    } else if (cfg.policy_class.type == "inline") {
      cfg.policy_class.policies = pcj.at("policies").get<std::vector<std::vector<int>>>();
    } else if (cfg.policy_class.type != "all") {
      throw InputError("policy_class.type must be all/random/inline/file");
    }

    if (j.contains("algorithm") == j.contains("algorithms"))
      throw InputError("config needs exactly one of algorithm / algorithms");
    if (j.contains("algorithm")) {
      cfg.algorithms.push_back(algorithm_from_name(j.at("algorithm").get<std::string>()));
    } else {
      for (const auto& name : j.at("algorithms"))
        cfg.algorithms.push_back(algorithm_from_name(name.get<std::string>()));
    }

    cfg.delta = j.value("delta", 0.05);
    cfg.constant_scale = j.value("constant_scale", 1.0);
    cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    cfg.output_dir = resolve(j.at("output_dir").get<std::string>(), base_dir);
    cfg.workers = j.value("workers", 1);
    if (j.contains("op")) cfg.op = op_from_json(j.at("op"));
    cfg.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw InputError(std::string("config field error: ") + e.what());
  }
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  return from_json(read_file(path), fs::path(path).parent_path().string());
}

PolicyClass build_policy_class(const PolicyClassSpec& spec, int K, int num_contexts,
                               const std::string& base_dir) {
  if (spec.type == "all") return all_policies(K, num_contexts);
  if (spec.type == "random") return random_policies(K, num_contexts, spec.count, spec.seed);
  if (spec.type == "file") return PolicyClass::from_json(read_file(resolve(spec.path, base_dir)));
  if (spec.type == "inline") {
    std::vector<PolicyTable> tables;
    tables.reserve(spec.policies.size());
    for (const auto& row : spec.policies) {
      PolicyTable t;
      t.actions.assign(row.begin(), row.end());
      tables.push_back(std::move(t));
    }
    return PolicyClass(K, num_contexts, std::move(tables));
  }
  throw InputError("policy_class.type must be all/random/inline/file");
}

namespace {

const char* kind_name(EventKind k) {
  switch (k) {
    case EventKind::EpochStart: return "epoch_start";
    case EventKind::BlockStart: return "block_start";
    case EventKind::ReplayStart: return "replay_start";
    case EventKind::ReplayTestEvent: return "replay_test";
    case EventKind::BlockTestEvent: return "block_test";
    case EventKind::Restart: return "restart";
  }
  return "unknown";
}

json event_to_json(const Event& e) {
  json j;
  j["t"] = e.t;
  j["kind"] = kind_name(e.kind);
  j["epoch"] = e.epoch;
  switch (e.kind) {
    case EventKind::EpochStart:
      break;
    case EventKind::BlockStart:
      j["block"] = e.block;
      j["span"] = {{"s", e.span.s}, {"e", e.span.e}};
      j["nu"] = e.nu;
      j["support"] = e.support;
      break;
    case EventKind::ReplayStart:
      j["block"] = e.block;
      j["m"] = e.m_or_k;
      j["span"] = {{"s", e.span.s}, {"e", e.span.e}};
      break;
    case EventKind::ReplayTestEvent:
    case EventKind::BlockTestEvent:
      j["block"] = e.block;
      j[e.kind == EventKind::ReplayTestEvent ? "m" : "k"] = e.m_or_k;
      j["span"] = {{"s", e.span.s}, {"e", e.span.e}};
      j["verdict"] = e.verdict == Verdict::Fail ? "fail" : "pass";
      if (e.witness) {
        j["witness"] = {{"inequality", e.witness->inequality},
                        {"policy", e.witness->policy},
                        {"lhs", e.witness->lhs},
                        {"rhs", e.witness->rhs}};
      }
      break;
    case EventKind::Restart:
      j["block"] = e.block;
      break;
  }
  return j;
}

}  // namespace

void write_events_jsonl(const std::vector<Event>& events, std::ostream& os) {
  for (const Event& e : events) os << event_to_json(e).dump() << '\n';
}

void write_regret_csv(const RegretSeries& series, std::ostream& os) {
  os << "t,realized,pseudo\n";
  for (std::size_t i = 0; i < series.realized.size(); ++i)
    os << (i + 1) << ',' << fmt17(series.realized[i]) << ',' << fmt17(series.pseudo[i]) << '\n';
}

std::string summary_to_json(const RunSummary& s) {
  json j;
  j["algorithm"] = algorithm_name(s.algorithm);
  j["seed"] = s.seed;
  j["rounds"] = s.rounds;
  j["final_realized_regret"] = s.final_realized;
  j["final_pseudo_regret"] = s.final_pseudo;
  j["restart_rounds"] = s.restart_rounds;
  j["switches"] = s.switches;
  j["total_variation"] = s.total_variation;
  j["op_solves"] = s.op_solves;
  return j.dump(2) + "\n";
}

std::vector<std::int64_t> true_change_rounds(const Environment& env) {
  std::vector<std::int64_t> out;
  if (!env.is_piecewise()) return out;
  for (std::size_t seg = 1; seg < env.spec().segments.size(); ++seg) {
    std::int64_t u = env.segment_start(static_cast<int>(seg));
    if (env.distribution_changes_at(u)) out.push_back(u);
  }
  return out;
}

RunResult execute_algorithm(Algorithm a, const Environment& env, const PolicyClass& pc,
                            const ScheduleParams* params,
                            const std::vector<std::int64_t>& forced_restarts,
                            std::uint64_t seed) {
  if (a != Algorithm::UniformRandom && params == nullptr)
    throw InputError("this algorithm needs schedule parameters");
  switch (a) {
    case Algorithm::AdaReplay:
      return run(env, pc, *params, seed, RunOptions{true, true, {}});
    case Algorithm::NoReplayNoTest:
      return run(env, pc, *params, seed, RunOptions{false, false, {}});
    case Algorithm::OracleRestart:
      return run(env, pc, *params, seed, RunOptions{false, false, forced_restarts});
    case Algorithm::UniformRandom:
      return run_uniform(env, pc, seed);
  }
  throw InputError("unknown algorithm id");
}

namespace {

struct Task {
  Algorithm algo;
  std::uint64_t seed;
  std::string rel_dir;
};

RunSummary execute_task(const Task& task, const ExperimentConfig& cfg, const Environment& env,
                        const PolicyClass& pc, const ScheduleParams* params,
                        const std::vector<std::int64_t>& forced,
                        const NonstationarityMeasures& meas) {
  auto t0 = std::chrono::steady_clock::now();
  RunResult rr = execute_algorithm(task.algo, env, pc, params, forced, task.seed);
  RegretSeries reg = dynamic_regret(rr.history, env, pc, rr.rewards);
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  RunSummary s;
  s.algorithm = task.algo;
  s.seed = task.seed;
  s.rounds = rr.history.size();
  s.final_realized = reg.realized.empty() ? 0.0 : reg.realized.back();
  s.final_pseudo = reg.pseudo.empty() ? 0.0 : reg.pseudo.back();
  s.restart_rounds = rr.restart_rounds;
  s.switches = meas.switches;
  s.total_variation = meas.total_variation;
  s.op_solves = rr.op_solves;
  s.dir = task.rel_dir;

  fs::path dir = fs::path(cfg.output_dir) / task.rel_dir;
  fs::create_directories(dir);
  {
    std::ofstream os(dir / "rounds.csv", std::ios::binary | std::ios::trunc);
    if (!os) throw InputError("cannot write " + (dir / "rounds.csv").string());
    write_rounds_csv(rr.history, os);
  }
  {
    std::ofstream os(dir / "events.jsonl", std::ios::binary | std::ios::trunc);
    if (!os) throw InputError("cannot write " + (dir / "events.jsonl").string());
    write_events_jsonl(rr.events, os);
  }
  {
    std::ofstream os(dir / "regret.csv", std::ios::binary | std::ios::trunc);
    if (!os) throw InputError("cannot write " + (dir / "regret.csv").string());
    write_regret_csv(reg, os);
  }
  write_file(dir / "summary.json", summary_to_json(s));
  json timing;
  timing["wall_seconds"] = wall;
  write_file(dir / "timing.json", timing.dump(2) + "\n");
  return s;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  Environment env(cfg.env);
  PolicyClass pc = build_policy_class(cfg.policy_class, cfg.env.K, cfg.env.num_contexts, "");

  bool needs_schedule = false;
  bool needs_oracle = false;
  for (Algorithm a : cfg.algorithms) {
    if (a != Algorithm::UniformRandom) needs_schedule = true;
    if (a == Algorithm::OracleRestart) needs_oracle = true;
  }
  ScheduleParams params;
  if (needs_schedule)
    params = ScheduleParams::compute(cfg.env.T, cfg.env.K, pc.size(), cfg.delta,
                                     cfg.constant_scale, cfg.op);
  std::vector<std::int64_t> forced;
  if (needs_oracle) {
    if (!env.is_piecewise())
      throw InputError("the known-change-point baseline needs a piecewise environment");
    for (std::int64_t u : true_change_rounds(env)) forced.push_back(u - 1);
  }
  NonstationarityMeasures meas = env.nonstationarity_measures();

  std::vector<Task> tasks;
  for (Algorithm a : cfg.algorithms)
    for (std::uint64_t seed : cfg.seeds)
      tasks.push_back(Task{a, seed,
                           algorithm_name(a) + "/seed_" + std::to_string(seed)});

  std::vector<RunSummary> summaries(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  auto body = [&] {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) break;
      try {
        summaries[i] = execute_task(tasks[i], cfg, env, pc, needs_schedule ? &params : nullptr,
                                    forced, meas);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::size_t nworkers = std::min<std::size_t>(static_cast<std::size_t>(cfg.workers),
                                               tasks.size());
  if (nworkers <= 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(nworkers);
    for (std::size_t w = 0; w < nworkers; ++w) pool.emplace_back(body);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  // Sequential reduce into the root artifacts.
  json agg;
  agg["algorithms"] = json::object();
  std::size_t idx = 0;
  for (Algorithm a : cfg.algorithms) {
    std::vector<double> realized, pseudo, restarts;
    json runs = json::array();
    for (std::size_t k = 0; k < cfg.seeds.size(); ++k, ++idx) {
      const RunSummary& s = summaries[idx];
      realized.push_back(s.final_realized);
      pseudo.push_back(s.final_pseudo);
      restarts.push_back(static_cast<double>(s.restart_rounds.size()));
      runs.push_back({{"seed", s.seed},
                      {"dir", s.dir},
                      {"final_realized_regret", s.final_realized},
                      {"final_pseudo_regret", s.final_pseudo},
                      {"restarts", s.restart_rounds.size()}});
    }
    Mean mr = mean_stderr(realized), mp = mean_stderr(pseudo), ms = mean_stderr(restarts);
    agg["algorithms"][algorithm_name(a)] = {
        {"final_realized_regret", {{"mean", mr.mean}, {"stderr", mr.stderr_}}},
        {"final_pseudo_regret", {{"mean", mp.mean}, {"stderr", mp.stderr_}}},
        {"restart_count", {{"mean", ms.mean}, {"stderr", ms.stderr_}}},
        {"runs", runs}};
  }
  fs::create_directories(cfg.output_dir);
  write_file(fs::path(cfg.output_dir) / "aggregate.json", agg.dump(2) + "\n");

  json truth;
  truth["switches"] = meas.switches;
  truth["total_variation"] = meas.total_variation;
  truth["piecewise"] = env.is_piecewise();
  truth["change_rounds"] = true_change_rounds(env);
  if (env.is_piecewise()) {
    json opt = json::array();
    for (std::size_t seg = 0; seg < env.spec().segments.size(); ++seg) {
      auto [star, value] = env.optimal_policy_at(env.segment_start(static_cast<int>(seg)), pc);
      opt.push_back({{"segment", seg},
                     {"start", env.segment_start(static_cast<int>(seg))},
                     {"policy", star},
                     {"value", value}});
    }
    truth["segment_optimal"] = opt;
  }
  write_file(fs::path(cfg.output_dir) / "ground_truth.json", truth.dump(2) + "\n");

  ExperimentResult res;
  res.output_dir = cfg.output_dir;
  res.runs = std::move(summaries);
  return res;
}

void emit_plot_data(const std::string& experiment_dir, std::ostream& os) {
  fs::path root(experiment_dir);
  json agg;
  try {
    agg = json::parse(read_file((root / "aggregate.json").string()));
  } catch (const json::exception& e) {
    throw CorruptRecordError(std::string("aggregate.json is not valid JSON: ") + e.what());
  }
  os << "algorithm,seed,t,realized,pseudo\n";
  try {
    for (const auto& [name, entry] : agg.at("algorithms").items()) {
      for (const auto& run : entry.at("runs")) {
        std::string dir = run.at("dir").get<std::string>();
        std::uint64_t seed = run.at("seed").get<std::uint64_t>();
        std::ifstream in(root / dir / "regret.csv", std::ios::binary);
        if (!in) throw InputError("missing artifact " + (root / dir / "regret.csv").string());
        std::string line;
        if (!std::getline(in, line) || line != "t,realized,pseudo")
          throw CorruptRecordError("unexpected regret.csv header under " + dir);
        while (std::getline(in, line)) os << name << ',' << seed << ',' << line << '\n';
      }
    }
  } catch (const json::exception& e) {
    throw CorruptRecordError(std::string("aggregate.json field error: ") + e.what());
  }
}

}  // namespace nscb
