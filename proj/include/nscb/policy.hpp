#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nscb/errors.hpp"

namespace nscb {

using ContextId = std::int32_t;
using ActionId = std::int32_t;

// A deterministic policy: one action per context.
struct PolicyTable {
  std::vector<ActionId> actions;
};

// Finite policy class over finite contexts and K actions. Validates every
// table on construction; policies are addressed by index and ties everywhere
// break toward the lowest index.
class PolicyClass {
 public:
  PolicyClass(int K, int num_contexts, std::vector<PolicyTable> policies);

  int K() const { return K_; }
  int num_contexts() const { return num_contexts_; }
  int size() const { return static_cast<int>(policies_.size()); }
  const PolicyTable& operator[](int i) const { return policies_[i]; }

  ActionId evaluate(int policy_index, ContextId x) const;

  std::string to_json() const;
  static PolicyClass from_json(const std::string& text);

 private:
  int K_;
  int num_contexts_;
  std::vector<PolicyTable> policies_;
};

// Enumerates all K^num_contexts tables (capped; throws InputError past the cap).
PolicyClass all_policies(int K, int num_contexts, int cap = 65536);

// Deterministic pseudo-random distinct tables; throws if count is not reachable.
PolicyClass random_policies(int K, int num_contexts, int count, std::uint64_t seed);

// Distribution over actions, sums to 1 within 1e-12.
struct ActionDistribution {
  std::vector<double> p;
};

// Sparse distribution over policy indices: strictly positive weights summing
// to 1, atoms sorted by policy index.
struct PolicyWeight {
  int policy = 0;
  double weight = 0.0;
};

struct SparsePolicyDistribution {
  std::vector<PolicyWeight> atoms;

  double weight_sum() const;
  // Throws CorruptRecordError unless atoms are sorted, positive, in range,
  // and sum to 1 within tol.
  void validate(int num_policies, double tol = 1e-9) const;

  static SparsePolicyDistribution point_mass(int policy);
};

// Q(a|x) = sum of weights of atoms whose policy plays a at x.
ActionDistribution project_distribution(const SparsePolicyDistribution& Q,
                                        const PolicyClass& pc, ContextId x);

// Floor-mixing toward uniform: out(a) = nu + (1 - K*nu) * in(a), nu in [0, 1/K].
ActionDistribution smooth_distribution(const ActionDistribution& d, double nu);

// One example: a context and a full per-action weight vector (signed).
struct WeightedExample {
  ContextId x = 0;
  std::vector<double> weights;
};

// Per-(context, action) accumulated weights; the shared aggregation that makes
// policy search O(|X|K + |Pi||X|) instead of O(|Pi| * examples).
class WeightTable {
 public:
  WeightTable(int num_contexts, int K)
      : num_contexts_(num_contexts), K_(K), w_(static_cast<std::size_t>(num_contexts) * K, 0.0) {}

  int num_contexts() const { return num_contexts_; }
  int K() const { return K_; }

  double& at(ContextId x, ActionId a) { return w_[static_cast<std::size_t>(x) * K_ + a]; }
  double at(ContextId x, ActionId a) const { return w_[static_cast<std::size_t>(x) * K_ + a]; }

  void add(ContextId x, std::span<const double> weights, double scale = 1.0);

  double policy_value(const PolicyTable& pi) const;

 private:
  int num_contexts_;
  int K_;
  std::vector<double> w_;
};

// Lowest-index maximizer of the table's policy value over the class.
std::pair<int, double> best_policy(const WeightTable& table, const PolicyClass& pc);

// Exact cost-sensitive argmax over the class: maximizes the summed weight of
// the chosen actions. Empty dataset returns (0, 0.0).
std::pair<int, double> erm_oracle(std::span<const WeightedExample> dataset,
                                  const PolicyClass& pc);

}  // namespace nscb
