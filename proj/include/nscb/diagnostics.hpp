#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nscb/environment.hpp"
#include "nscb/scheduler.hpp"

namespace nscb {

// One cell of the greedy low-variation partition; the cell's summed
// distribution drift stays within its length-dependent budget.
struct PartitionCell {
  Interval span;
  double variation = 0.0;  // summed L1 drift across the cell
  double budget = 0.0;     // sqrt(K * C0 / |span|)
};

struct PartitionReport {
  Interval query;
  double C0 = 0.0;
  std::vector<PartitionCell> cells;

  int count() const { return static_cast<int>(cells.size()); }
  std::string to_json() const;
};

// Greedy left-to-right partition of I: extend the current cell while the
// next round keeps the summed drift within sqrt(K * C0 / length); close it
// on the last round where extending would break the budget.
PartitionReport partition_interval(const Environment& env, Interval I, double C0);

// Gap between ground-truth interval regret and a scaled empirical baseline
// regret, maximized over the class. The interval must sit inside a single
// recorded block with index >= 1; the baseline is the previous doubling span
// of the same epoch.
struct ExcessReport {
  Interval I;
  std::int64_t epoch = 0;
  int block = 0;
  Interval baseline;
  double excess = 0.0;
  int witness_policy = -1;
  double alpha = 0.0;      // sqrt(2 K C0 / |I|) * log2(T)
  double threshold = 0.0;  // regret-gap constant * scale * alpha
  bool flagged = false;

  std::string to_json() const;
};

ExcessReport excess_regret_diagnostic(const History& h, const Environment& env,
                                      const PolicyClass& pc, const ScheduleParams& params,
                                      Interval I);

}  // namespace nscb
