#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <ostream>
#include <vector>

#include "nscb/policy.hpp"

namespace nscb {

// Closed 1-based round interval [s, e].
struct Interval {
  std::int64_t s = 0;
  std::int64_t e = 0;

  std::int64_t length() const { return e - s + 1; }
  bool contains(std::int64_t t) const { return s <= t && t <= e; }
  friend bool operator==(const Interval&, const Interval&) = default;
  friend auto operator<=>(const Interval&, const Interval&) = default;
};

// What the learner knew and did at round t. Only the chosen action's reward is
// stored; estimators never see the other arms.
struct RoundRecord {
  std::int64_t t = 0;
  ContextId x = 0;
  ActionId a = 0;
  ActionDistribution p;  // full action distribution the action was drawn from
  double observed_reward = 0.0;
  std::int64_t epoch = 1;
  int block = 0;
  std::vector<int> replay_indices;  // deduplicated active replay scales, sorted
};

// Per-(context, action) interval aggregates: n(x) round counts and the summed
// importance-weighted rewards G(x,a). Everything the estimators and the
// feasibility solver read is a function of these plus the interval length.
struct IntervalStats {
  Interval I;
  int num_contexts = 0;
  int K = 0;
  std::vector<std::int64_t> ctx_count;  // n(x)
  std::vector<double> ips;              // G(x,a), indexed x*K + a

  double ips_at(ContextId x, ActionId a) const {
    return ips[static_cast<std::size_t>(x) * K + a];
  }
};

// Append-only round log with a memoized interval-aggregate cache.
class History {
 public:
  History(int num_contexts, int K) : num_contexts_(num_contexts), K_(K) {}

  int num_contexts() const { return num_contexts_; }
  int K() const { return K_; }
  std::int64_t size() const { return static_cast<std::int64_t>(rounds_.size()); }

  void append(RoundRecord rec);
  const RoundRecord& at(std::int64_t t) const;

  // Cached per-(context, action) aggregates over a recorded interval.
  const IntervalStats& stats(Interval I) const;

  void check_interval(Interval I) const;

 private:
  int num_contexts_;
  int K_;
  std::vector<RoundRecord> rounds_;
  mutable std::map<std::pair<std::int64_t, std::int64_t>, std::unique_ptr<IntervalStats>> cache_;
};

// Export schema: t,epoch,block,replay_indices,x,a,p_a,reward with the replay
// scales "|"-joined.
void write_rounds_csv(const History& h, std::ostream& os);

}  // namespace nscb
