#include "nscb/diagnostics.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>

#include "json.hpp"
#include "nscb/errors.hpp"
#include "nscb/estimator.hpp"

namespace nscb {

namespace {

double round_trip(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::strtod(buf, nullptr);
}

}  // namespace

std::string PartitionReport::to_json() const {
  nlohmann::json j;
  j["interval"] = {{"s", query.s}, {"e", query.e}};
  j["c0"] = round_trip(C0);
  j["count"] = count();
  j["cells"] = nlohmann::json::array();
  for (const PartitionCell& c : cells) {
    j["cells"].push_back({{"s", c.span.s},
                          {"e", c.span.e},
                          {"variation", round_trip(c.variation)},
                          {"budget", round_trip(c.budget)}});
  }
  return j.dump(2);
}

PartitionReport partition_interval(const Environment& env, Interval I, double C0) {
  if (I.s < 1 || I.e > env.T() || I.s > I.e)
    throw InputError("partition interval must lie inside the horizon");
  if (!(C0 > 0.0)) throw InputError("partition needs a positive log-confidence constant");
  const double kc0 = static_cast<double>(env.K()) * C0;
  PartitionReport rep;
  rep.query = I;
  rep.C0 = C0;
  std::int64_t sk = I.s;
  double delta = 0.0;
  for (std::int64_t t = I.s; t <= I.e; ++t) {
    std::int64_t len = t - sk + 1;
    double budget = std::sqrt(kc0 / static_cast<double>(len));
    if (t == I.e) {
      rep.cells.push_back({Interval{sk, t}, delta, budget});
      break;
    }
    double next_delta = delta + env.step_l1(t + 1);
    double next_budget = std::sqrt(kc0 / static_cast<double>(len + 1));
    if (delta <= budget && next_delta > next_budget) {
      rep.cells.push_back({Interval{sk, t}, delta, budget});
      sk = t + 1;
      delta = 0.0;
    } else {
      delta = next_delta;
    }
  }
  return rep;
}

std::string ExcessReport::to_json() const {
  nlohmann::json j;
  j["interval"] = {{"s", I.s}, {"e", I.e}};
  j["epoch"] = epoch;
  j["block"] = block;
  j["baseline"] = {{"s", baseline.s}, {"e", baseline.e}};
  j["excess"] = round_trip(excess);
  j["witness_policy"] = witness_policy;
  j["alpha"] = round_trip(alpha);
  j["threshold"] = round_trip(threshold);
  j["flagged"] = flagged;
  return j.dump(2);
}

ExcessReport excess_regret_diagnostic(const History& h, const Environment& env,
                                      const PolicyClass& pc, const ScheduleParams& params,
                                      Interval I) {
  if (I.s < 1 || I.e > h.size() || I.s > I.e)
    throw InputError("diagnostic interval must lie inside the recorded history");

  const RoundRecord& first = h.at(I.s);
  std::int64_t epoch = first.epoch;
  int j = first.block;
  for (std::int64_t t = I.s + 1; t <= I.e; ++t) {
    const RoundRecord& r = h.at(t);
    if (r.epoch != epoch || r.block != j)
      throw InputError("diagnostic interval spans an epoch or block boundary");
  }
  if (j < 1) throw InputError("diagnostic interval must sit in a block with index >= 1");

  // Recover the epoch start, then check I against the recorded block span.
  std::int64_t tau = I.s;
  while (tau > 1 && h.at(tau - 1).epoch == epoch) --tau;
  Interval block_span{tau + params.block_len(j - 1), tau + params.block_len(j) - 1};
  if (I.s < block_span.s || I.e > block_span.e)
    throw InputError("diagnostic interval exceeds the recorded block span");

  Interval baseline{tau, tau + params.block_len(j - 1) - 1};

  ExcessReport rep;
  rep.I = I;
  rep.epoch = epoch;
  rep.block = j;
  rep.baseline = baseline;

  double true_max = expected_max_avg_reward(env, I, pc);
  double emp_max = empirical_max_avg_reward(h, baseline, pc);
  double best = -std::numeric_limits<double>::infinity();
  int arg = 0;
  for (int p = 0; p < pc.size(); ++p) {
    const PolicyTable& pi = pc[p];
    double true_reg = true_max - expected_avg_reward(env, I, pi);
    double emp_reg = emp_max - empirical_avg_reward(h, baseline, pi);
    double gap = true_reg - 8.0 * emp_reg;
    if (gap > best) {
      best = gap;
      arg = p;
    }
  }
  rep.excess = best;
  rep.witness_policy = arg;
  rep.alpha = std::sqrt(2.0 * params.K * params.C0 / static_cast<double>(I.length())) *
              std::log2(static_cast<double>(params.T));
  rep.threshold = params.tests.scaled_excess_gap() * rep.alpha;
  rep.flagged = rep.excess > rep.threshold;
  return rep;
}

}  // namespace nscb
