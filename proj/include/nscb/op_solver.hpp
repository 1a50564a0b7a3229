#pragma once

#include <string>
#include <vector>

#include "nscb/estimator.hpp"
#include "nscb/history.hpp"
#include "nscb/policy.hpp"

namespace nscb {

struct OpConfig {
  // Scale factor already applied by the caller when constants are scaled.
  double C = 1.2e7;
  // Feasibility acceptance tolerance on constraint slack.
  double feas_tol = 1e-9;
  // Iteration budget: ceil(iter_cap_factor / nu) loop passes.
  double iter_cap_factor = 64.0;
  // Support bound: ceil(c_sparse / nu) with c_sparse = sparsity_factor * ln(1/(K nu^2)) / (K nu).
  double sparsity_factor = 4.0;
  // Each accepted step lands the repaired constraint this far inside its bound.
  double slack_target = 1e-6;
  // Search for the most violated constraint through the argmax oracle; the
  // direct per-policy scan is the cross-check path for small classes.
  bool oracle_search = true;
};

// One constrained-distribution problem over an interval of history.
struct OpInstance {
  const History* h = nullptr;
  Interval I;
  const PolicyClass* pc = nullptr;
  double nu = 0.0;
  OpConfig cfg;
};

struct ConstraintReport {
  int policy = -1;  // -1 for the summed-regret budget
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;  // rhs - lhs
};

struct FeasibilityCertificate {
  bool feasible = false;
  ConstraintReport budget;          // sum_pi Q(pi) reg(pi) <= 2*C*K*nu
  ConstraintReport worst_variance;  // min-slack variance constraint
  double weight_sum = 0.0;

  std::string to_json() const;
};

struct IterationTrace {
  double violation = 0.0;  // max constraint violation when the pass began
  bool scaled_down = false;
};

struct OpSolution {
  SparsePolicyDistribution Q;
  int iterations = 0;
  int support = 0;
  int oracle_calls = 0;  // 1 initial + 1 per pass on the oracle search path
  FeasibilityCertificate certificate;
  std::vector<IterationTrace> trace;
};

std::int64_t op_iteration_cap(double nu, double factor);
std::int64_t op_sparsity_cap(double nu, int K, double factor);

// Exhaustive audit of both constraint families for a candidate distribution.
FeasibilityCertificate check_op_feasibility(const OpInstance& inst,
                                            const SparsePolicyDistribution& Q);

// Coordinate descent from the empty sub-distribution: repeatedly repair the
// most violated variance constraint with a Newton line search that lands it
// just inside its bound, renormalize when the regret budget overflows, and
// stop once the full audit passes. Throws SolverFailure if the iteration
// budget runs out.
OpSolution solve_op(const OpInstance& inst);

}  // namespace nscb
