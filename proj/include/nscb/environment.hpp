#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nscb/history.hpp"
#include "nscb/policy.hpp"

namespace nscb {

// One stationary stretch: context distribution plus per-(context, action)
// Bernoulli reward means.
struct SegmentSpec {
  std::int64_t length = 0;
  std::vector<double> context_probs;             // size num_contexts, sums to 1
  std::vector<std::vector<double>> reward_means;  // num_contexts rows of K means in [0,1]
};

// Per-round linear interpolation between two parameter settings across the
// whole horizon (round 1 plays start, round T plays end).
struct DriftSpec {
  SegmentSpec start;
  SegmentSpec end;
};

struct EnvironmentSpec {
  std::int64_t T = 0;
  int K = 0;
  int num_contexts = 0;
  std::vector<SegmentSpec> segments;  // exclusive with drift
  std::optional<DriftSpec> drift;

  std::string to_json() const;
  static EnvironmentSpec from_json(const std::string& text);
};

// Counts of distribution switches and the summed L1 distance between
// consecutive joint (context, reward-vector) distributions.
struct NonstationarityMeasures {
  std::int64_t switches = 0;     // S: 1 + number of rounds where D_t != D_{t-1}
  double total_variation = 0.0;  // Delta: sum of ||D_t - D_{t-1}||_1
};

// Cumulative dynamic-regret series; index t-1 holds the value through round t.
struct RegretSeries {
  std::vector<double> realized;
  std::vector<double> pseudo;
};

class Environment {
 public:
  // Joint-outcome enumeration is 2^K per context; measures refuse K above this.
  static constexpr int kEnumCap = 12;

  explicit Environment(EnvironmentSpec spec);

  std::int64_t T() const { return spec_.T; }
  int K() const { return spec_.K; }
  int num_contexts() const { return spec_.num_contexts; }
  const EnvironmentSpec& spec() const { return spec_; }
  bool is_piecewise() const { return !spec_.drift.has_value(); }

  // Ground-truth parameters at round t (1-based).
  std::vector<double> context_probs(std::int64_t t) const;
  double mean(std::int64_t t, ContextId x, ActionId a) const;
  int segment_index(std::int64_t t) const;  // piecewise only
  std::int64_t segment_start(int seg) const;

  // Pure function of (seed, t): context draw plus the full reward vector.
  std::pair<ContextId, std::vector<double>> sample_round(std::int64_t t,
                                                         std::uint64_t seed) const;

  // Lowest-index maximizer of expected reward at round t, with its value.
  std::pair<int, double> optimal_policy_at(std::int64_t t, const PolicyClass& pc) const;

  // True iff the joint distribution at t differs from t-1 (t >= 2).
  bool distribution_changes_at(std::int64_t t) const;
  // ||D_t - D_{t-1}||_1 over the joint outcome space (0 when unchanged).
  double step_l1(std::int64_t t) const;

  NonstationarityMeasures nonstationarity_measures() const;
  NonstationarityMeasures nonstationarity_measures(Interval I) const;

 private:
  EnvironmentSpec spec_;
  std::vector<std::int64_t> seg_start_;  // piecewise: first round of each segment

  void params_at(std::int64_t t, const double** ctx, const std::vector<std::vector<double>>** means,
                 std::vector<double>* ctx_scratch, std::vector<std::vector<double>>* mean_scratch) const;
};

// Cumulative realized and pseudo dynamic regret against the per-round optimal
// policy; full_rewards holds the simulator-retained reward vectors per round.
RegretSeries dynamic_regret(const History& h, const Environment& env, const PolicyClass& pc,
                            const std::vector<std::vector<double>>& full_rewards);

// Expected (ground-truth) counterparts of the empirical interval statistics.
double expected_avg_reward(const Environment& env, Interval I, const PolicyTable& pi);
double expected_max_avg_reward(const Environment& env, Interval I, const PolicyClass& pc,
                               int* argmax = nullptr);
double expected_regret(const Environment& env, Interval I, const PolicyTable& pi,
                       const PolicyClass& pc);
double expected_variance(const Environment& env, Interval I, const SparsePolicyDistribution& Q,
                         double nu, const PolicyTable& pi, const PolicyClass& pc);

}  // namespace nscb
