#include "nscb/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>

#include <json.hpp>

#include "nscb/rng.hpp"

namespace nscb {

PolicyClass::PolicyClass(int K, int num_contexts, std::vector<PolicyTable> policies)
    : K_(K), num_contexts_(num_contexts), policies_(std::move(policies)) {
  if (K_ < 2) throw InputError("policy class needs K >= 2 actions");
  if (num_contexts_ < 1) throw InputError("policy class needs at least one context");
  if (policies_.empty()) throw InputError("policy class must be nonempty");
  for (std::size_t i = 0; i < policies_.size(); ++i) {
    const auto& tbl = policies_[i].actions;
    if (static_cast<int>(tbl.size()) != num_contexts_)
      throw InputError("policy " + std::to_string(i) + " has wrong table length");
    for (ActionId a : tbl)
      if (a < 0 || a >= K_)
        throw InputError("policy " + std::to_string(i) + " maps to an action outside [0,K)");
  }
}

ActionId PolicyClass::evaluate(int policy_index, ContextId x) const {
  if (policy_index < 0 || policy_index >= size())
    throw InputError("policy index out of range");
  if (x < 0 || x >= num_contexts_) throw InputError("context id out of range");
  return policies_[policy_index].actions[x];
}

std::string PolicyClass::to_json() const {
  nlohmann::json j;
  j["K"] = K_;
  j["num_contexts"] = num_contexts_;
  auto arr = nlohmann::json::array();
  for (const auto& p : policies_) arr.push_back(p.actions);
  j["policies"] = std::move(arr);
  return j.dump();
}

PolicyClass PolicyClass::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("policy class JSON parse failure: ") + e.what());
  }
  if (!j.contains("K") || !j.contains("num_contexts") || !j.contains("policies"))
    throw InputError("policy class JSON needs K, num_contexts, policies");
  std::vector<PolicyTable> tables;
  for (const auto& row : j.at("policies"))
    tables.push_back(PolicyTable{row.get<std::vector<ActionId>>()});
  return PolicyClass(j.at("K").get<int>(), j.at("num_contexts").get<int>(), std::move(tables));
}

PolicyClass all_policies(int K, int num_contexts, int cap) {
  if (K < 2 || num_contexts < 1) throw InputError("all_policies: bad dimensions");
  double total = std::pow(static_cast<double>(K), num_contexts);
  if (total > static_cast<double>(cap))
    throw InputError("all_policies: K^num_contexts exceeds cap");
  int n = static_cast<int>(std::llround(total));
  std::vector<PolicyTable> tables;
  tables.reserve(n);
  std::vector<ActionId> cur(num_contexts, 0);
  for (int i = 0; i < n; ++i) {
    tables.push_back(PolicyTable{cur});
    for (int x = num_contexts - 1; x >= 0; --x) {
      if (++cur[x] < K) break;
      cur[x] = 0;
    }
  }
  return PolicyClass(K, num_contexts, std::move(tables));
}

PolicyClass random_policies(int K, int num_contexts, int count, std::uint64_t seed) {
  if (count < 1) throw InputError("random_policies: count must be positive");
  double distinct = std::pow(static_cast<double>(K), num_contexts);
  if (static_cast<double>(count) > distinct)
    throw InputError("random_policies: count exceeds the number of distinct tables");
  SplitMix64 g{mix_seed(seed, 0x9061c1a5u)};
  std::set<std::vector<ActionId>> seen;
  std::vector<PolicyTable> tables;
  while (static_cast<int>(tables.size()) < count) {
    std::vector<ActionId> tbl(num_contexts);
    for (auto& a : tbl) a = static_cast<ActionId>(g.next() % static_cast<std::uint64_t>(K));
    if (seen.insert(tbl).second) tables.push_back(PolicyTable{std::move(tbl)});
  }
  return PolicyClass(K, num_contexts, std::move(tables));
}

double SparsePolicyDistribution::weight_sum() const {
  double s = 0.0;
  for (const auto& a : atoms) s += a.weight;
  return s;
}

void SparsePolicyDistribution::validate(int num_policies, double tol) const {
  if (atoms.empty()) throw CorruptRecordError("policy distribution has no atoms");
  int prev = -1;
  for (const auto& a : atoms) {
    if (a.policy <= prev) throw CorruptRecordError("policy distribution atoms out of order");
    if (a.policy >= num_policies) throw CorruptRecordError("policy distribution atom out of range");
    if (!(a.weight > 0.0)) throw CorruptRecordError("policy distribution atom not positive");
    prev = a.policy;
  }
  if (std::abs(weight_sum() - 1.0) > tol)
    throw CorruptRecordError("policy distribution weights do not sum to 1");
}

SparsePolicyDistribution SparsePolicyDistribution::point_mass(int policy) {
  return SparsePolicyDistribution{{PolicyWeight{policy, 1.0}}};
}

ActionDistribution project_distribution(const SparsePolicyDistribution& Q,
                                        const PolicyClass& pc, ContextId x) {
  Q.validate(pc.size());
  if (x < 0 || x >= pc.num_contexts()) throw InputError("context id out of range");
  ActionDistribution out{std::vector<double>(pc.K(), 0.0)};
  for (const auto& atom : Q.atoms) out.p[pc.evaluate(atom.policy, x)] += atom.weight;
  return out;
}

ActionDistribution smooth_distribution(const ActionDistribution& d, double nu) {
  int K = static_cast<int>(d.p.size());
  if (K < 1) throw InputError("smooth_distribution: empty distribution");
  if (!(nu >= 0.0) || nu > 1.0 / K + 1e-15)
    throw InputError("smooth_distribution: nu must lie in [0, 1/K]");
  double sum = 0.0;
  for (double v : d.p) sum += v;
  if (std::abs(sum - 1.0) > 1e-9)
    throw InputError("smooth_distribution: input does not sum to 1");
  ActionDistribution out{std::vector<double>(K)};
  double keep = 1.0 - K * nu;
  for (int a = 0; a < K; ++a) out.p[a] = nu + keep * d.p[a];
  return out;
}

void WeightTable::add(ContextId x, std::span<const double> weights, double scale) {
  if (x < 0 || x >= num_contexts_) throw InputError("weight table: context out of range");
  if (static_cast<int>(weights.size()) != K_)
    throw InputError("weight table: weight vector has wrong length");
  double* row = &w_[static_cast<std::size_t>(x) * K_];
  for (int a = 0; a < K_; ++a) row[a] += scale * weights[a];
}

double WeightTable::policy_value(const PolicyTable& pi) const {
  double v = 0.0;
  for (int x = 0; x < num_contexts_; ++x)
    v += w_[static_cast<std::size_t>(x) * K_ + pi.actions[x]];
  return v;
}

std::pair<int, double> best_policy(const WeightTable& table, const PolicyClass& pc) {
  if (table.num_contexts() != pc.num_contexts() || table.K() != pc.K())
    throw InputError("weight table dimensions do not match the policy class");
  int arg = 0;
  double best = table.policy_value(pc[0]);
  for (int i = 1; i < pc.size(); ++i) {
    double v = table.policy_value(pc[i]);
    if (v > best) {
      best = v;
      arg = i;
    }
  }
  return {arg, best};
}

std::pair<int, double> erm_oracle(std::span<const WeightedExample> dataset,
                                  const PolicyClass& pc) {
  WeightTable table(pc.num_contexts(), pc.K());
  for (const auto& ex : dataset) table.add(ex.x, ex.weights);
  return best_policy(table, pc);
}

}  // namespace nscb
