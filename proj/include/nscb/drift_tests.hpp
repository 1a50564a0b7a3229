#pragma once

#include <optional>
#include <span>

#include "nscb/history.hpp"
#include "nscb/policy.hpp"

namespace nscb {

// Threshold constants for the distribution-shift tests. `scale` multiplies all
// of them; 1.0 is the theory-faithful setting, smaller values make detection
// triggerable at simulation horizons.
struct TestConstants {
  double replay_regret = 6400.0;
  double replay_variance = 800.0;
  double block_regret = 6400.0;
  double block_variance = 800.0;
  double excess_gap = 4.1e6;
  double scale = 1.0;

  double scaled_replay_regret() const { return replay_regret * scale; }
  double scaled_replay_variance() const { return replay_variance * scale; }
  double scaled_block_regret() const { return block_regret * scale; }
  double scaled_block_variance() const { return block_variance * scale; }
  double scaled_excess_gap() const { return excess_gap * scale; }
};

enum class Verdict { Pass, Fail };

// The first violated inequality: its id (1-3 replay, 4-6 block), the witness
// policy, and both sides of the comparison.
struct TestWitness {
  int inequality = 0;
  int policy = 0;
  double lhs = 0.0;
  double rhs = 0.0;
};

struct TestOutcome {
  Verdict verdict = Verdict::Pass;
  std::optional<TestWitness> witness;
  int compare_index = -1;  // replay scale m, or the block index k that failed
};

// max over the class of coefA * avg_A(pi) + coefB * avg_B(pi), computed with
// one argmax-oracle call on the merged per-(context, action) weights.
// Overlapping intervals contribute to both terms.
double max_weighted_gap(const History& h, Interval A, double coefA, Interval B, double coefB,
                        const PolicyClass& pc, int* argmax = nullptr);

// The shared three-inequality core. `recent` is the audited window, `baseline`
// the reference window; `audit_q`/`audit_nu` drive the variance inequality and
// `threshold_nu` scales the two regret thresholds.
struct GapTestSpec {
  Interval recent;
  Interval baseline;
  const SparsePolicyDistribution* audit_q = nullptr;
  double audit_nu = 0.0;
  double threshold_nu = 0.0;
};

std::optional<TestWitness> evaluate_gap_test(const History& h, const PolicyClass& pc,
                                             const GapTestSpec& spec, double d_regret,
                                             double d_variance, double k_prime,
                                             int first_inequality_id);

// Completed replay window A at scale m against the previous-block prefix B,
// auditing the distribution that was played at scale m.
TestOutcome replay_test(const History& h, const PolicyClass& pc, Interval A, Interval B,
                        const SparsePolicyDistribution& q_m, double nu_m, double k_prime,
                        const TestConstants& consts);

// One baseline entry per earlier block prefix.
struct BlockBaseline {
  Interval span;                               // B_k
  double nu_k = 0.0;                           // regret threshold scale
  const SparsePolicyDistribution* q_next = nullptr;  // Q_(i,k+1)
  double nu_next = 0.0;                        // its smoothing floor
};

// Current block prefix B_j against every earlier prefix; vacuous Pass when
// there are no baselines (block 0).
TestOutcome block_test(const History& h, const PolicyClass& pc, Interval Bj,
                       std::span<const BlockBaseline> baselines, double k_prime,
                       const TestConstants& consts);

}  // namespace nscb
