#include "nscb/op_solver.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <json.hpp>

#include "nscb/errors.hpp"

namespace nscb {

namespace {

struct InstanceData {
  const IntervalStats* st = nullptr;
  std::int64_t len = 0;
  int X = 0;
  int K = 0;
  std::vector<double> avg_reward;  // barR(pi) per policy
  double max_avg = 0.0;
  int best = 0;  // lowest-index empirical maximizer
};

InstanceData load(const OpInstance& inst) {
  if (!inst.h || !inst.pc) throw InputError("op instance needs a history and a policy class");
  const PolicyClass& pc = *inst.pc;
  if (inst.h->num_contexts() != pc.num_contexts() || inst.h->K() != pc.K())
    throw InputError("op instance: history and policy class dimensions differ");
  if (!(inst.nu > 0.0) || inst.nu > 1.0 / pc.K() + 1e-15)
    throw InputError("op instance: nu must lie in (0, 1/K]");
  if (!(inst.cfg.C > 0.0)) throw InputError("op instance: C must be positive");
  InstanceData d;
  d.st = &inst.h->stats(inst.I);
  d.len = inst.I.length();
  d.X = pc.num_contexts();
  d.K = pc.K();
  d.avg_reward.resize(pc.size());
  double inv = 1.0 / static_cast<double>(d.len);
  for (int i = 0; i < pc.size(); ++i) {
    const auto& tbl = pc[i].actions;
    double s = 0.0;
    for (int x = 0; x < d.X; ++x) s += d.st->ips_at(x, tbl[x]);
    d.avg_reward[i] = s * inv;
  }
  d.best = 0;
  d.max_avg = d.avg_reward[0];
  for (int i = 1; i < pc.size(); ++i)
    if (d.avg_reward[i] > d.max_avg) {
      d.max_avg = d.avg_reward[i];
      d.best = i;
    }
  return d;
}

}  // namespace

std::string FeasibilityCertificate::to_json() const {
  nlohmann::json j;
  j["feasible"] = feasible;
  j["budget"] = {{"lhs", budget.lhs}, {"rhs", budget.rhs}, {"slack", budget.slack}};
  j["worst_variance"] = {{"policy", worst_variance.policy},
                         {"lhs", worst_variance.lhs},
                         {"rhs", worst_variance.rhs},
                         {"slack", worst_variance.slack}};
  j["weight_sum"] = weight_sum;
  return j.dump();
}

std::int64_t op_iteration_cap(double nu, double factor) {
  return static_cast<std::int64_t>(std::ceil(factor / nu));
}

std::int64_t op_sparsity_cap(double nu, int K, double factor) {
  double c_sparse = factor * std::log(1.0 / (K * nu * nu)) / (K * nu);
  return static_cast<std::int64_t>(std::ceil(c_sparse / nu));
}

FeasibilityCertificate check_op_feasibility(const OpInstance& inst,
                                            const SparsePolicyDistribution& Q) {
  InstanceData d = load(inst);
  const PolicyClass& pc = *inst.pc;
  Q.validate(pc.size());
  double Cnu = inst.cfg.C * inst.nu;

  FeasibilityCertificate cert;
  cert.weight_sum = Q.weight_sum();

  double budget_lhs = 0.0;
  for (const auto& atom : Q.atoms)
    budget_lhs += atom.weight * (d.max_avg - d.avg_reward[atom.policy]);
  cert.budget = ConstraintReport{-1, budget_lhs, 2.0 * inst.cfg.C * d.K * inst.nu, 0.0};
  cert.budget.slack = cert.budget.rhs - cert.budget.lhs;

  std::vector<double> q = smoothed_projection_table(Q, inst.nu, pc);
  double inv = 1.0 / static_cast<double>(d.len);
  bool first = true;
  for (int i = 0; i < pc.size(); ++i) {
    const auto& tbl = pc[i].actions;
    double v = 0.0;
    for (int x = 0; x < d.X; ++x) {
      if (d.st->ctx_count[x] == 0) continue;
      v += static_cast<double>(d.st->ctx_count[x]) / q[static_cast<std::size_t>(x) * d.K + tbl[x]];
    }
    v *= inv;
    double rhs = 2.0 * d.K + (d.max_avg - d.avg_reward[i]) / Cnu;
    double slack = rhs - v;
    if (first || slack < cert.worst_variance.slack) {
      cert.worst_variance = ConstraintReport{i, v, rhs, slack};
      first = false;
    }
  }
  cert.feasible = cert.budget.slack >= -inst.cfg.feas_tol &&
                  cert.worst_variance.slack >= -inst.cfg.feas_tol;
  return cert;
}

OpSolution solve_op(const OpInstance& inst) {
  InstanceData d = load(inst);
  const PolicyClass& pc = *inst.pc;
  const double nu = inst.nu;
  const double keep = 1.0 - d.K * nu;
  const double Cnu = inst.cfg.C * nu;
  const double two_k = 2.0 * d.K;
  const std::int64_t cap = op_iteration_cap(nu, inst.cfg.iter_cap_factor);
  const double inv = 1.0 / static_cast<double>(d.len);

  // b(pi) = reg(pi) / (C nu); the budget keeps sum w (2K + b) <= 2K, which
  // implies both sum w <= 1 and the summed-regret constraint.
  std::vector<double> b(pc.size());
  for (int i = 0; i < pc.size(); ++i) b[i] = (d.max_avg - d.avg_reward[i]) / Cnu;

  std::map<int, double> w;  // sub-distribution atoms
  std::vector<double> q(static_cast<std::size_t>(d.X) * d.K, nu);  // smoothed projection
  double wsum = 0.0;
  double budget_sum = 0.0;

  OpSolution sol;
  sol.oracle_calls = 1;  // the initial best-average computation

  auto variance_of = [&](const PolicyTable& tbl) {
    double v = 0.0;
    for (int x = 0; x < d.X; ++x) {
      if (d.st->ctx_count[x] == 0) continue;
      v += static_cast<double>(d.st->ctx_count[x]) / q[static_cast<std::size_t>(x) * d.K + tbl.actions[x]];
    }
    return v * inv;
  };

  auto materialize = [&]() {
    double leftover = std::max(0.0, 1.0 - wsum);
    std::map<int, double> full = w;
    full[d.best] += leftover;
    double total = 0.0;
    for (const auto& [pi, wt] : full) total += wt;
    SparsePolicyDistribution Q;
    for (const auto& [pi, wt] : full)
      if (wt > 0.0) Q.atoms.push_back(PolicyWeight{pi, wt / total});
    return Q;
  };

  for (std::int64_t iter = 1; iter <= cap; ++iter) {
    bool scaled = false;
    if (budget_sum > two_k) {
      double c = two_k / budget_sum;
      for (auto& [pi, wt] : w) wt *= c;
      for (int x = 0; x < d.X; ++x)
        for (int a = 0; a < d.K; ++a) {
          double& qa = q[static_cast<std::size_t>(x) * d.K + a];
          qa = nu + c * (qa - nu);
        }
      wsum *= c;
      budget_sum = two_k;
      scaled = true;
    }

    // Most violated variance constraint: maximize V(pi) + barR(pi)/(C nu),
    // whose argmax is the argmax of the violation D(pi) = V - (2K + b).
    int worst;
    double worst_d;
    if (inst.cfg.oracle_search) {
      WeightTable table(d.X, d.K);
      for (int x = 0; x < d.X; ++x)
        for (int a = 0; a < d.K; ++a)
          table.at(x, a) = static_cast<double>(d.st->ctx_count[x]) * inv /
                               q[static_cast<std::size_t>(x) * d.K + a] +
                           d.st->ips_at(x, a) * inv / Cnu;
      auto [arg, val] = best_policy(table, pc);
      sol.oracle_calls += 1;
      worst = arg;
      worst_d = val - two_k - d.max_avg / Cnu;
    } else {
      worst = 0;
      worst_d = variance_of(pc[0]) - (two_k + b[0]);
      for (int i = 1; i < pc.size(); ++i) {
        double di = variance_of(pc[i]) - (two_k + b[i]);
        if (di > worst_d) {
          worst_d = di;
          worst = i;
        }
      }
    }

    sol.iterations = static_cast<int>(iter);
    sol.trace.push_back(IterationTrace{std::max(0.0, worst_d), scaled});

    if (worst_d <= 0.0) {
      sol.Q = materialize();
      sol.support = static_cast<int>(sol.Q.atoms.size());
      sol.certificate = check_op_feasibility(inst, sol.Q);
      if (!sol.certificate.feasible)
        throw SolverFailure("constraint audit failed after convergence: " +
                            sol.certificate.to_json());
      return sol;
    }

    // keep == 0 only when nu == 1/K, where V <= 1/nu = K < 2K leaves nothing
    // to violate, so this point is unreachable there.
    const PolicyTable& tbl = pc[worst];
    double target = two_k + b[worst] - inst.cfg.slack_target * d.K;
    double alpha = 0.0;
    for (int step = 0; step < 80; ++step) {
      double f = 0.0, fp = 0.0;
      for (int x = 0; x < d.X; ++x) {
        if (d.st->ctx_count[x] == 0) continue;
        double qa = q[static_cast<std::size_t>(x) * d.K + tbl.actions[x]] + alpha * keep;
        double n = static_cast<double>(d.st->ctx_count[x]);
        f += n / qa;
        fp -= n * keep / (qa * qa);
      }
      f = f * inv - target;
      fp *= inv;
      if (std::abs(f) <= 1e-13 * std::max(1.0, target)) break;
      alpha -= f / fp;
    }
    if (!(alpha > 0.0)) throw SolverFailure("line search produced a non-positive step");

    w[worst] += alpha;
    for (int x = 0; x < d.X; ++x) q[static_cast<std::size_t>(x) * d.K + tbl.actions[x]] += alpha * keep;
    wsum += alpha;
    budget_sum += alpha * (two_k + b[worst]);
  }

  throw SolverFailure("iteration budget exhausted after " + std::to_string(cap) +
                      " passes with max violation " +
                      std::to_string(sol.trace.empty() ? 0.0 : sol.trace.back().violation));
}

}  // namespace nscb
