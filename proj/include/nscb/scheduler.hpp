#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "nscb/drift_tests.hpp"
#include "nscb/environment.hpp"
#include "nscb/history.hpp"
#include "nscb/op_solver.hpp"
#include "nscb/policy.hpp"
#include "nscb/rng.hpp"

namespace nscb {

// Horizon-derived schedule: confidence mass C0, base block length L, the
// per-block exploration floors nu_j, and the scaled test/solver constants.
struct ScheduleParams {
  std::int64_t T = 0;
  int K = 0;
  int num_policies = 0;
  double delta = 0.0;
  double constant_scale = 1.0;

  double C0 = 0.0;        // ln(8 T^3 |Pi|^2 / delta)
  std::int64_t L = 0;     // ceil(4 K C0)
  double k_prime = 0.0;   // log2(T) * K
  OpConfig op;            // C multiplied by constant_scale
  TestConstants tests;    // thresholds multiplied by constant_scale

  double nu(int j) const;                // sqrt(C0 / (K 2^j L))
  std::int64_t block_len(int j) const;   // 2^j L

  static ScheduleParams compute(std::int64_t T, int K, int num_policies, double delta,
                                double constant_scale = 1.0, OpConfig base_op = {});
};

// One sampled replay decision.
struct ReplayDraw {
  bool start = false;
  int m = 0;
};

// In block j >= 1: start with probability (1/L) 2^{-j/2} sum_m 2^{-m/2}, then
// pick the scale with odds proportional to 2^{-m/2} over m < j. Block 0 never
// starts a replay and consumes no randomness.
ReplayDraw sample_replay_start(int j, std::int64_t L, RngStream& coin, RngStream& index);

struct ReplayPhase {
  int m = 0;
  Interval span;
};

// Deduplicated sorted scales of the phases whose span contains t.
std::vector<int> active_replay_indices(std::span<const ReplayPhase> S, std::int64_t t);

// The played mixture: the current block's smoothed distribution when no replay
// is active, otherwise the uniform average of the active scales' smoothed
// distributions.
ActionDistribution action_distribution(std::span<const SparsePolicyDistribution> Qs,
                                       const ScheduleParams& params, int j,
                                       std::span<const int> active, const PolicyClass& pc,
                                       ContextId x);

enum class EventKind {
  EpochStart,
  BlockStart,
  ReplayStart,
  ReplayTestEvent,
  BlockTestEvent,
  Restart,
};

struct Event {
  std::int64_t t = 0;
  EventKind kind = EventKind::EpochStart;
  std::int64_t epoch = 0;
  int block = 0;
  int m_or_k = -1;
  Interval span;
  Verdict verdict = Verdict::Pass;
  std::optional<TestWitness> witness;
  double nu = 0.0;
  int support = 0;
};

struct RunOptions {
  bool replays_enabled = true;
  bool tests_enabled = true;
  // Rounds whose Step-3 phase restarts unconditionally (the new epoch opens at
  // t+1); used by the known-change-point baseline.
  std::vector<std::int64_t> forced_restart_after;
};

struct RunResult {
  History history;
  std::vector<std::vector<double>> rewards;  // full per-round reward vectors
  std::vector<Event> events;
  std::vector<std::int64_t> restart_rounds;
  std::int64_t op_solves = 0;
};

// The full adaptive loop: per round, maybe start a replay phase, play the
// mixture, then run the end-of-replay and end-of-block checks (skipped at
// t = T). A Fail consumes the round and opens a new epoch at t+1.
RunResult run(const Environment& env, const PolicyClass& pc, const ScheduleParams& params,
              std::uint64_t seed, const RunOptions& opts = {});

// Uniform-exploration baseline producing the same artifact shapes.
RunResult run_uniform(const Environment& env, const PolicyClass& pc, std::uint64_t seed);

}  // namespace nscb
