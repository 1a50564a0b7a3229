#include "nscb/estimator.hpp"

#include <cmath>

#include "nscb/errors.hpp"

namespace nscb {

std::vector<double> ips_estimate(const RoundRecord& rec, int K) {
  if (static_cast<int>(rec.p.p.size()) != K)
    throw InputError("ips_estimate: record dimension mismatch");
  std::vector<double> out(K, 0.0);
  out[rec.a] = rec.observed_reward / rec.p.p[rec.a];
  return out;
}

double empirical_avg_reward(const History& h, Interval I, const PolicyTable& pi) {
  const IntervalStats& st = h.stats(I);
  if (static_cast<int>(pi.actions.size()) != st.num_contexts)
    throw InputError("empirical_avg_reward: policy table length mismatch");
  double sum = 0.0;
  for (int x = 0; x < st.num_contexts; ++x) sum += st.ips_at(x, pi.actions[x]);
  return sum / static_cast<double>(I.length());
}

double empirical_max_avg_reward(const History& h, Interval I, const PolicyClass& pc,
                                int* argmax) {
  const IntervalStats& st = h.stats(I);
  WeightTable table(st.num_contexts, st.K);
  double inv = 1.0 / static_cast<double>(I.length());
  for (int x = 0; x < st.num_contexts; ++x)
    for (int a = 0; a < st.K; ++a) table.at(x, a) = st.ips_at(x, a) * inv;
  auto [arg, val] = best_policy(table, pc);
  if (argmax) *argmax = arg;
  return val;
}

double empirical_regret(const History& h, Interval I, const PolicyTable& pi,
                        const PolicyClass& pc) {
  return empirical_max_avg_reward(h, I, pc) - empirical_avg_reward(h, I, pi);
}

std::vector<double> smoothed_projection_table(const SparsePolicyDistribution& Q, double nu,
                                              const PolicyClass& pc) {
  Q.validate(pc.size());
  if (!(nu > 0.0) || nu > 1.0 / pc.K() + 1e-15)
    throw InputError("smoothed_projection_table: nu must lie in (0, 1/K]");
  int X = pc.num_contexts();
  int K = pc.K();
  std::vector<double> q(static_cast<std::size_t>(X) * K, 0.0);
  for (const auto& atom : Q.atoms) {
    const PolicyTable& tbl = pc[atom.policy];
    for (int x = 0; x < X; ++x) q[static_cast<std::size_t>(x) * K + tbl.actions[x]] += atom.weight;
  }
  double keep = 1.0 - K * nu;
  for (auto& v : q) v = nu + keep * v;
  return q;
}

double empirical_variance(const History& h, Interval I, const SparsePolicyDistribution& Q,
                          double nu, const PolicyTable& pi, const PolicyClass& pc) {
  const IntervalStats& st = h.stats(I);
  if (st.num_contexts != pc.num_contexts() || st.K != pc.K())
    throw InputError("empirical_variance: history and class dimensions differ");
  std::vector<double> q = smoothed_projection_table(Q, nu, pc);
  double sum = 0.0;
  for (int x = 0; x < st.num_contexts; ++x) {
    if (st.ctx_count[x] == 0) continue;
    sum += static_cast<double>(st.ctx_count[x]) /
           q[static_cast<std::size_t>(x) * st.K + pi.actions[x]];
  }
  return sum / static_cast<double>(I.length());
}

}  // namespace nscb
