#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "nscb/errors.hpp"
#include "nscb/experiment.hpp"

using namespace nscb;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Flip environment JSON shared by most cases here.
nlohmann::json env_json(std::int64_t T) {
  return nlohmann::json{
      {"T", T},
      {"K", 2},
      {"contexts", 1},
      {"segments",
       nlohmann::json::array(
           {{{"length", T / 2}, {"context_probs", {1.0}}, {"reward_means", {{0.9, 0.1}}}},
            {{"length", T - T / 2},
             {"context_probs", {1.0}},
             {"reward_means", {{0.1, 0.9}}}}})}};
}

nlohmann::json base_config(std::int64_t T, const fs::path& out) {
  nlohmann::json cfg;
  cfg["env"] = env_json(T);
  cfg["policy_class"] = {{"type", "all"}};
  cfg["algorithms"] = {"ada_replay", "no_replay_no_test", "oracle_restart", "uniform_random"};
  cfg["delta"] = 0.05;
  cfg["seeds"] = {1, 2};
  cfg["output_dir"] = out.string();
  cfg["workers"] = 2;
  return cfg;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("nscb_test_" + tag + "_" +
                                        std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("algorithm names round trip") {
  for (Algorithm a : {Algorithm::AdaReplay, Algorithm::NoReplayNoTest, Algorithm::OracleRestart,
                      Algorithm::UniformRandom})
    CHECK(algorithm_from_name(algorithm_name(a)) == a);
  CHECK(algorithm_name(Algorithm::AdaReplay) == "ada_replay");
  CHECK_THROWS_AS(algorithm_from_name("banditron"), InputError);
}

TEST_CASE("config parsing accepts either one algorithm or a list") {
  TempDir tmp("cfg");
  nlohmann::json cfg = base_config(400, tmp.path / "out");
  ExperimentConfig parsed = ExperimentConfig::from_json(cfg.dump(), tmp.path.string());
  CHECK(parsed.algorithms.size() == 4);
  CHECK(parsed.seeds == std::vector<std::uint64_t>{1, 2});
  CHECK(parsed.env.T == 400);

  cfg.erase("algorithms");
  cfg["algorithm"] = "ada_replay";
  ExperimentConfig single = ExperimentConfig::from_json(cfg.dump(), tmp.path.string());
  REQUIRE(single.algorithms.size() == 1);
  CHECK(single.algorithms[0] == Algorithm::AdaReplay);

  cfg["algorithms"] = {"uniform_random"};
  CHECK_THROWS_AS(ExperimentConfig::from_json(cfg.dump(), tmp.path.string()), InputError);
}

TEST_CASE("config validation rejects inconsistencies") {
  TempDir tmp("cfgbad");
  nlohmann::json good = base_config(400, tmp.path / "out");

  nlohmann::json dup_seed = good;
  dup_seed["seeds"] = {1, 1};
  CHECK_THROWS_AS(ExperimentConfig::from_json(dup_seed.dump(), tmp.path.string()), InputError);

  nlohmann::json dup_algo = good;
  dup_algo["algorithms"] = {"ada_replay", "ada_replay"};
  CHECK_THROWS_AS(ExperimentConfig::from_json(dup_algo.dump(), tmp.path.string()), InputError);

  nlohmann::json no_seed = good;
  no_seed["seeds"] = nlohmann::json::array();
  CHECK_THROWS_AS(ExperimentConfig::from_json(no_seed.dump(), tmp.path.string()), InputError);

  nlohmann::json bad_T = good;
  bad_T["T"] = 444;
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad_T.dump(), tmp.path.string()), InputError);

  nlohmann::json ok_T = good;
  ok_T["T"] = 400;
  CHECK_NOTHROW(ExperimentConfig::from_json(ok_T.dump(), tmp.path.string()));

  nlohmann::json bad_scale = good;
  bad_scale["constant_scale"] = 0.0;
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad_scale.dump(), tmp.path.string()), InputError);
}

TEST_CASE("environment can live in a sibling file") {
  TempDir tmp("envfile");
  {
    std::ofstream out(tmp.path / "env.json");
    out << env_json(300).dump(2);
  }
  nlohmann::json cfg = base_config(300, tmp.path / "out");
  cfg.erase("env");
  cfg["env_path"] = "env.json";
  ExperimentConfig parsed = ExperimentConfig::from_json(cfg.dump(), tmp.path.string());
  CHECK(parsed.env.T == 300);

  cfg["env"] = env_json(300);
  CHECK_THROWS_AS(ExperimentConfig::from_json(cfg.dump(), tmp.path.string()), InputError);
  cfg.erase("env");
  cfg.erase("env_path");
  CHECK_THROWS_AS(ExperimentConfig::from_json(cfg.dump(), tmp.path.string()), InputError);
}

TEST_CASE("policy class sources") {
  PolicyClassSpec all;
  all.type = "all";
  CHECK(build_policy_class(all, 2, 2, ".").size() == 4);

  PolicyClassSpec rnd;
  rnd.type = "random";
  rnd.count = 5;
  rnd.seed = 3;
  PolicyClass r = build_policy_class(rnd, 2, 3, ".");
  CHECK(r.size() == 5);

  PolicyClassSpec inl;
  inl.type = "inline";
  inl.policies = {{0, 1}, {1, 0}};
  PolicyClass i = build_policy_class(inl, 2, 2, ".");
  REQUIRE(i.size() == 2);
  CHECK(i[0].actions == std::vector<ActionId>{0, 1});

  TempDir tmp("pcfile");
  {
    std::ofstream out(tmp.path / "pc.json");
    out << i.to_json();
  }
  PolicyClassSpec file;
  file.type = "file";
  file.path = "pc.json";
  PolicyClass f = build_policy_class(file, 2, 2, tmp.path.string());
  REQUIRE(f.size() == 2);
  CHECK(f[1].actions == i[1].actions);

  PolicyClassSpec bad;
  bad.type = "sorcery";
  CHECK_THROWS_AS(build_policy_class(bad, 2, 2, "."), InputError);
}

TEST_CASE("true change rounds of a piecewise environment") {
  EnvironmentSpec spec;
  spec.T = 30;
  spec.K = 2;
  spec.num_contexts = 1;
  spec.segments.push_back(SegmentSpec{10, {1.0}, {{0.9, 0.1}}});
  spec.segments.push_back(SegmentSpec{10, {1.0}, {{0.9, 0.1}}});  // no actual change
  spec.segments.push_back(SegmentSpec{10, {1.0}, {{0.1, 0.9}}});
  Environment env{std::move(spec)};
  CHECK(true_change_rounds(env) == std::vector<std::int64_t>{21});
}

TEST_CASE("full experiment writes a consistent artifact tree") {
  TempDir tmp("tree");
  fs::path out = tmp.path / "out";
  nlohmann::json cfg_json = base_config(400, out);
  ExperimentConfig cfg = ExperimentConfig::from_json(cfg_json.dump(), tmp.path.string());
  ExperimentResult result = run_experiment(cfg);
  CHECK(result.runs.size() == 8);

  const char* algos[] = {"ada_replay", "no_replay_no_test", "oracle_restart", "uniform_random"};
  for (const char* algo : algos)
    for (int seed : {1, 2}) {
      fs::path dir = out / algo / ("seed_" + std::to_string(seed));
      for (const char* f :
           {"rounds.csv", "events.jsonl", "summary.json", "regret.csv", "timing.json"})
        CHECK(fs::exists(dir / f));

      nlohmann::json summary = nlohmann::json::parse(read_file(dir / "summary.json"));
      CHECK(summary["algorithm"] == algo);
      CHECK(summary["seed"] == seed);
      CHECK(summary["rounds"] == 400);
      CHECK(summary["switches"] == 2);

      // regret.csv's last row matches the summary's final values
      std::string regret = read_file(dir / "regret.csv");
      auto last_nl = regret.find_last_of('\n', regret.size() - 2);
      std::string last = regret.substr(last_nl + 1);
      std::istringstream row(last);
      std::string tcol, realized, pseudo;
      std::getline(row, tcol, ',');
      std::getline(row, realized, ',');
      std::getline(row, pseudo, ',');
      CHECK(tcol == "400");
      CHECK(std::stod(realized) ==
            doctest::Approx(summary["final_realized_regret"].get<double>()).epsilon(1e-15));
      CHECK(std::stod(pseudo) ==
            doctest::Approx(summary["final_pseudo_regret"].get<double>()).epsilon(1e-15));

      // rounds.csv has a header plus one line per round
      std::string rounds = read_file(dir / "rounds.csv");
      std::int64_t lines = std::count(rounds.begin(), rounds.end(), '\n');
      CHECK(lines == 401);
    }

  nlohmann::json agg = nlohmann::json::parse(read_file(out / "aggregate.json"));
  std::size_t indexed_runs = 0;
  for (const auto& [name, entry] : agg["algorithms"].items())
    indexed_runs += entry["runs"].size();
  CHECK(indexed_runs == 8);
  for (const char* algo : algos) {
    REQUIRE(agg["algorithms"].contains(algo));
    double mean = agg["algorithms"][algo]["final_pseudo_regret"]["mean"].get<double>();
    double manual = 0.0;
    for (int seed : {1, 2}) {
      fs::path dir = out / algo / ("seed_" + std::to_string(seed));
      manual +=
          nlohmann::json::parse(read_file(dir / "summary.json"))["final_pseudo_regret"]
              .get<double>();
    }
    CHECK(mean == doctest::Approx(manual / 2.0).epsilon(1e-12));
  }

  nlohmann::json truth = nlohmann::json::parse(read_file(out / "ground_truth.json"));
  CHECK(truth["switches"] == 2);
  CHECK(truth["change_rounds"] == std::vector<std::int64_t>{201});
  REQUIRE(truth["segment_optimal"].size() == 2);
  CHECK(truth["segment_optimal"][0]["policy"] == 0);
  CHECK(truth["segment_optimal"][1]["policy"] == 1);

  // oracle_restart restarts exactly one round before each true change
  nlohmann::json oracle_summary = nlohmann::json::parse(
      read_file(out / "oracle_restart" / "seed_1" / "summary.json"));
  CHECK(oracle_summary["restart_rounds"] == std::vector<std::int64_t>{200});

  // uniform play on complementary means keeps pseudo-regret at exactly t * 0.4
  nlohmann::json uni = nlohmann::json::parse(
      read_file(out / "uniform_random" / "seed_1" / "summary.json"));
  CHECK(uni["final_pseudo_regret"].get<double>() == doctest::Approx(160.0).epsilon(1e-12));

  // plot-data stitches every curve back together
  std::ostringstream plot;
  emit_plot_data(out.string(), plot);
  std::string table = plot.str();
  CHECK(std::count(table.begin(), table.end(), '\n') == 8 * 400 + 1);
  CHECK(table.rfind("algorithm,seed,t,realized,pseudo", 0) == 0);
}

TEST_CASE("artifacts are byte-identical across worker counts and reruns") {
  TempDir tmp("repro");
  auto run_once = [&](const fs::path& out, int workers) {
    nlohmann::json cfg_json = base_config(300, out);
    cfg_json["workers"] = workers;
    ExperimentConfig cfg = ExperimentConfig::from_json(cfg_json.dump(), tmp.path.string());
    run_experiment(cfg);
  };
  run_once(tmp.path / "a", 1);
  run_once(tmp.path / "b", 4);
  std::size_t compared = 0;
  for (auto& entry : fs::recursive_directory_iterator(tmp.path / "a")) {
    if (!entry.is_regular_file()) continue;
    fs::path rel = fs::relative(entry.path(), tmp.path / "a");
    if (rel.filename() == "timing.json") continue;  // wall time is quarantined here
    ++compared;
    CHECK(read_file(entry.path()) == read_file(tmp.path / "b" / rel));
  }
  CHECK(compared == 4 * 2 * 4 + 2);  // four per-run files per run, two roots
}

TEST_CASE("oracle restarts require a piecewise environment") {
  TempDir tmp("oracledrift");
  nlohmann::json cfg_json = base_config(300, tmp.path / "out");
  cfg_json["env"] = {
      {"T", 300},
      {"K", 2},
      {"contexts", 1},
      {"drift",
       {{"start", {{"context_probs", {1.0}}, {"reward_means", {{0.9, 0.1}}}}},
        {"end", {{"context_probs", {1.0}}, {"reward_means", {{0.1, 0.9}}}}}}}};
  ExperimentConfig cfg = ExperimentConfig::from_json(cfg_json.dump(), tmp.path.string());
  CHECK_THROWS_AS(run_experiment(cfg), InputError);

  cfg.algorithms = {Algorithm::AdaReplay, Algorithm::UniformRandom};
  CHECK_NOTHROW(run_experiment(cfg));
}

TEST_CASE("event stream serialization carries the test verdicts") {
  std::vector<Event> events;
  Event start;
  start.t = 1;
  start.kind = EventKind::EpochStart;
  start.epoch = 1;
  events.push_back(start);
  Event fail;
  fail.t = 77;
  fail.kind = EventKind::ReplayTestEvent;
  fail.epoch = 2;
  fail.block = 3;
  fail.m_or_k = 1;
  fail.span = Interval{40, 77};
  fail.verdict = Verdict::Fail;
  fail.witness = TestWitness{2, 5, 1.25, 0.5};
  events.push_back(fail);

  std::ostringstream os;
  write_events_jsonl(events, os);
  std::istringstream in(os.str());
  std::string line;
  REQUIRE(std::getline(in, line));
  nlohmann::json first = nlohmann::json::parse(line);
  CHECK(first["kind"] == "epoch_start");
  REQUIRE(std::getline(in, line));
  nlohmann::json second = nlohmann::json::parse(line);
  CHECK(second["kind"] == "replay_test");
  CHECK(second["verdict"] == "fail");
  CHECK(second["m"] == 1);
  CHECK(second["witness"]["inequality"] == 2);
  CHECK(second["witness"]["policy"] == 5);
  CHECK(second["witness"]["lhs"] == 1.25);
  CHECK_FALSE(std::getline(in, line));
}

TEST_CASE("plot data refuses a directory without an aggregate index") {
  TempDir tmp("plotmissing");
  std::ostringstream os;
  CHECK_THROWS_AS(emit_plot_data((tmp.path / "nothing").string(), os), InputError);
}
