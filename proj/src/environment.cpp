#include "nscb/environment.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "nscb/errors.hpp"
#include "nscb/estimator.hpp"
#include "nscb/rng.hpp"

namespace nscb {

namespace {

void validate_params(const SegmentSpec& seg, int num_contexts, int K, const char* where) {
  if (static_cast<int>(seg.context_probs.size()) != num_contexts)
    throw InputError(std::string(where) + ": context_probs has wrong length");
  double sum = 0.0;
  for (double p : seg.context_probs) {
    if (!(p >= 0.0) || !std::isfinite(p))
      throw InputError(std::string(where) + ": negative context probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw InputError(std::string(where) + ": context_probs do not sum to 1");
  if (static_cast<int>(seg.reward_means.size()) != num_contexts)
    throw InputError(std::string(where) + ": reward_means has wrong row count");
  for (const auto& row : seg.reward_means) {
    if (static_cast<int>(row.size()) != K)
      throw InputError(std::string(where) + ": reward_means row has wrong length");
    for (double m : row)
      if (!(m >= 0.0 && m <= 1.0))
        throw InputError(std::string(where) + ": reward mean outside [0,1]");
  }
}

nlohmann::json params_to_json(const SegmentSpec& seg, bool with_length) {
  nlohmann::json j;
  if (with_length) j["length"] = seg.length;
  j["context_probs"] = seg.context_probs;
  j["reward_means"] = seg.reward_means;
  return j;
}

SegmentSpec params_from_json(const nlohmann::json& j, bool with_length) {
  SegmentSpec seg;
  if (with_length) seg.length = j.at("length").get<std::int64_t>();
  seg.context_probs = j.at("context_probs").get<std::vector<double>>();
  seg.reward_means = j.at("reward_means").get<std::vector<std::vector<double>>>();
  return seg;
}

}  // namespace

std::string EnvironmentSpec::to_json() const {
  nlohmann::json j;
  j["T"] = T;
  j["K"] = K;
  j["contexts"] = num_contexts;
  if (drift.has_value()) {
    j["drift"] = {{"start", params_to_json(drift->start, false)},
                  {"end", params_to_json(drift->end, false)}};
  } else {
    auto arr = nlohmann::json::array();
    for (const auto& seg : segments) arr.push_back(params_to_json(seg, true));
    j["segments"] = std::move(arr);
  }
  return j.dump(2);
}

EnvironmentSpec EnvironmentSpec::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("environment JSON parse failure: ") + e.what());
  }
  EnvironmentSpec spec;
  try {
    spec.T = j.at("T").get<std::int64_t>();
    spec.K = j.at("K").get<int>();
    spec.num_contexts = j.at("contexts").get<int>();
    if (j.contains("drift")) {
      spec.drift = DriftSpec{params_from_json(j.at("drift").at("start"), false),
                             params_from_json(j.at("drift").at("end"), false)};
    }
    if (j.contains("segments"))
      for (const auto& s : j.at("segments")) spec.segments.push_back(params_from_json(s, true));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("environment JSON field failure: ") + e.what());
  }
  return spec;
}

Environment::Environment(EnvironmentSpec spec) : spec_(std::move(spec)) {
  if (spec_.T < 1) throw InputError("environment needs T >= 1");
  if (spec_.K < 1) throw InputError("environment needs K >= 1");
  if (spec_.num_contexts < 1) throw InputError("environment needs at least one context");
  bool has_segments = !spec_.segments.empty();
  bool has_drift = spec_.drift.has_value();
  if (has_segments == has_drift)
    throw InputError("environment needs exactly one of segments or drift");
  if (has_drift) {
    validate_params(spec_.drift->start, spec_.num_contexts, spec_.K, "drift start");
    validate_params(spec_.drift->end, spec_.num_contexts, spec_.K, "drift end");
  } else {
    std::int64_t total = 0;
    seg_start_.reserve(spec_.segments.size());
    for (std::size_t i = 0; i < spec_.segments.size(); ++i) {
      const auto& seg = spec_.segments[i];
      if (seg.length < 1) throw InputError("segment length must be positive");
      validate_params(seg, spec_.num_contexts, spec_.K, "segment");
      seg_start_.push_back(total + 1);
      total += seg.length;
    }
    if (total != spec_.T) throw InputError("segment lengths must sum to T");
  }
}

int Environment::segment_index(std::int64_t t) const {
  if (!is_piecewise()) throw StateError("segment_index is only defined piecewise");
  if (t < 1 || t > spec_.T) throw StateError("round outside horizon");
  auto it = std::upper_bound(seg_start_.begin(), seg_start_.end(), t);
  return static_cast<int>(it - seg_start_.begin()) - 1;
}

std::int64_t Environment::segment_start(int seg) const {
  if (!is_piecewise()) throw StateError("segment_start is only defined piecewise");
  if (seg < 0 || seg >= static_cast<int>(seg_start_.size()))
    throw InputError("segment index out of range");
  return seg_start_[seg];
}

void Environment::params_at(std::int64_t t, const double** ctx,
                            const std::vector<std::vector<double>>** means,
                            std::vector<double>* ctx_scratch,
                            std::vector<std::vector<double>>* mean_scratch) const {
  if (t < 1 || t > spec_.T) throw StateError("round outside horizon");
  if (is_piecewise()) {
    const SegmentSpec& seg = spec_.segments[segment_index(t)];
    *ctx = seg.context_probs.data();
    *means = &seg.reward_means;
    return;
  }
  const DriftSpec& d = *spec_.drift;
  double w = spec_.T > 1 ? static_cast<double>(t - 1) / static_cast<double>(spec_.T - 1) : 0.0;
  ctx_scratch->resize(spec_.num_contexts);
  mean_scratch->assign(spec_.num_contexts, std::vector<double>(spec_.K));
  for (int x = 0; x < spec_.num_contexts; ++x) {
    (*ctx_scratch)[x] =
        d.start.context_probs[x] + w * (d.end.context_probs[x] - d.start.context_probs[x]);
    for (int a = 0; a < spec_.K; ++a)
      (*mean_scratch)[x][a] =
          d.start.reward_means[x][a] + w * (d.end.reward_means[x][a] - d.start.reward_means[x][a]);
  }
  *ctx = ctx_scratch->data();
  *means = mean_scratch;
}

std::vector<double> Environment::context_probs(std::int64_t t) const {
  const double* ctx;
  const std::vector<std::vector<double>>* means;
  std::vector<double> cs;
  std::vector<std::vector<double>> ms;
  params_at(t, &ctx, &means, &cs, &ms);
  return std::vector<double>(ctx, ctx + spec_.num_contexts);
}

double Environment::mean(std::int64_t t, ContextId x, ActionId a) const {
  if (x < 0 || x >= spec_.num_contexts) throw InputError("context id out of range");
  if (a < 0 || a >= spec_.K) throw InputError("action id out of range");
  const double* ctx;
  const std::vector<std::vector<double>>* means;
  std::vector<double> cs;
  std::vector<std::vector<double>> ms;
  params_at(t, &ctx, &means, &cs, &ms);
  return (*means)[x][a];
}

std::pair<ContextId, std::vector<double>> Environment::sample_round(std::int64_t t,
                                                                    std::uint64_t seed) const {
  const double* ctx;
  const std::vector<std::vector<double>>* means;
  std::vector<double> cs;
  std::vector<std::vector<double>> ms;
  params_at(t, &ctx, &means, &cs, &ms);
  SplitMix64 g{mix_seed(mix_seed(seed, kEnvStream), static_cast<std::uint64_t>(t))};
  ContextId x = categorical_draw(g, std::span<const double>(ctx, spec_.num_contexts));
  std::vector<double> r(spec_.K);
  for (int a = 0; a < spec_.K; ++a) r[a] = g.uniform01() < (*means)[x][a] ? 1.0 : 0.0;
  return {x, std::move(r)};
}

std::pair<int, double> Environment::optimal_policy_at(std::int64_t t,
                                                      const PolicyClass& pc) const {
  if (pc.num_contexts() != spec_.num_contexts || pc.K() != spec_.K)
    throw InputError("policy class does not match environment dimensions");
  const double* ctx;
  const std::vector<std::vector<double>>* means;
  std::vector<double> cs;
  std::vector<std::vector<double>> ms;
  params_at(t, &ctx, &means, &cs, &ms);
  int arg = 0;
  double best = -1.0;
  for (int i = 0; i < pc.size(); ++i) {
    double v = 0.0;
    const auto& tbl = pc[i].actions;
    for (int x = 0; x < spec_.num_contexts; ++x) v += ctx[x] * (*means)[x][tbl[x]];
    if (v > best) {
      best = v;
      arg = i;
    }
  }
  return {arg, best};
}

bool Environment::distribution_changes_at(std::int64_t t) const {
  if (t < 2 || t > spec_.T) return false;
  if (is_piecewise()) {
    auto it = std::lower_bound(seg_start_.begin(), seg_start_.end(), t);
    if (it == seg_start_.end() || *it != t) return false;
    int k = static_cast<int>(it - seg_start_.begin());
    const SegmentSpec& cur = spec_.segments[k];
    const SegmentSpec& prev = spec_.segments[k - 1];
    return cur.context_probs != prev.context_probs || cur.reward_means != prev.reward_means;
  }
  return context_probs(t) != context_probs(t - 1) ||
         [&] {
           for (int x = 0; x < spec_.num_contexts; ++x)
             for (int a = 0; a < spec_.K; ++a)
               if (mean(t, x, a) != mean(t - 1, x, a)) return true;
           return false;
         }();
}

double Environment::step_l1(std::int64_t t) const {
  if (!distribution_changes_at(t)) return 0.0;
  if (spec_.K > kEnumCap)
    throw InputError("joint-outcome enumeration is capped at K <= 12");
  std::vector<double> ctx_prev = context_probs(t - 1);
  std::vector<double> ctx_cur = context_probs(t);
  double l1 = 0.0;
  int masks = 1 << spec_.K;
  for (int x = 0; x < spec_.num_contexts; ++x) {
    for (int m = 0; m < masks; ++m) {
      double p_prev = ctx_prev[x];
      double p_cur = ctx_cur[x];
      for (int a = 0; a < spec_.K; ++a) {
        double mp = mean(t - 1, x, a);
        double mc = mean(t, x, a);
        if (m & (1 << a)) {
          p_prev *= mp;
          p_cur *= mc;
        } else {
          p_prev *= 1.0 - mp;
          p_cur *= 1.0 - mc;
        }
      }
      l1 += std::abs(p_cur - p_prev);
    }
  }
  return l1;
}

NonstationarityMeasures Environment::nonstationarity_measures() const {
  return nonstationarity_measures(Interval{1, spec_.T});
}

NonstationarityMeasures Environment::nonstationarity_measures(Interval I) const {
  if (I.s < 1 || I.e > spec_.T || I.s > I.e) throw StateError("interval outside horizon");
  if (spec_.K > kEnumCap)
    throw InputError("joint-outcome enumeration is capped at K <= 12");
  NonstationarityMeasures m;
  m.switches = 1;
  if (is_piecewise()) {
    // Only segment starts can change the distribution.
    for (std::size_t k = 1; k < seg_start_.size(); ++k) {
      std::int64_t t = seg_start_[k];
      if (t <= I.s || t > I.e) continue;
      if (distribution_changes_at(t)) {
        m.switches += 1;
        m.total_variation += step_l1(t);
      }
    }
    return m;
  }
  for (std::int64_t t = I.s + 1; t <= I.e; ++t) {
    if (distribution_changes_at(t)) {
      m.switches += 1;
      m.total_variation += step_l1(t);
    }
  }
  return m;
}

RegretSeries dynamic_regret(const History& h, const Environment& env, const PolicyClass& pc,
                            const std::vector<std::vector<double>>& full_rewards) {
  if (h.size() > env.T()) throw StateError("history extends past the horizon");
  if (static_cast<std::int64_t>(full_rewards.size()) != h.size())
    throw InputError("full reward log does not match the history length");
  if (pc.num_contexts() != env.num_contexts() || pc.K() != env.K())
    throw InputError("policy class does not match environment dimensions");
  RegretSeries out;
  out.realized.resize(h.size());
  out.pseudo.resize(h.size());
  std::vector<int> seg_opt;  // piecewise memo
  if (env.is_piecewise()) seg_opt.assign(env.spec().segments.size(), -1);
  double cum_real = 0.0, cum_pseudo = 0.0;
  for (std::int64_t t = 1; t <= h.size(); ++t) {
    const RoundRecord& rec = h.at(t);
    const auto& r = full_rewards[static_cast<std::size_t>(t - 1)];
    if (static_cast<int>(r.size()) != env.K())
      throw InputError("full reward vector has wrong length");
    int star;
    if (env.is_piecewise()) {
      int seg = env.segment_index(t);
      if (seg_opt[seg] < 0) seg_opt[seg] = env.optimal_policy_at(t, pc).first;
      star = seg_opt[seg];
    } else {
      star = env.optimal_policy_at(t, pc).first;
    }
    ActionId a_star = pc.evaluate(star, rec.x);
    cum_real += r[a_star] - r[rec.a];
    double best_mean = 0.0;
    std::vector<double> ctx = env.context_probs(t);
    for (int x = 0; x < env.num_contexts(); ++x)
      best_mean += ctx[x] * env.mean(t, x, pc.evaluate(star, x));
    double played_mean = 0.0;
    for (int a = 0; a < env.K(); ++a) played_mean += rec.p.p[a] * env.mean(t, rec.x, a);
    cum_pseudo += best_mean - played_mean;
    out.realized[static_cast<std::size_t>(t - 1)] = cum_real;
    out.pseudo[static_cast<std::size_t>(t - 1)] = cum_pseudo;
  }
  return out;
}

double expected_avg_reward(const Environment& env, Interval I, const PolicyTable& pi) {
  if (I.s < 1 || I.e > env.T() || I.s > I.e) throw StateError("interval outside horizon");
  double sum = 0.0;
  for (std::int64_t t = I.s; t <= I.e; ++t) {
    std::vector<double> ctx = env.context_probs(t);
    for (int x = 0; x < env.num_contexts(); ++x) sum += ctx[x] * env.mean(t, x, pi.actions[x]);
  }
  return sum / static_cast<double>(I.length());
}

double expected_max_avg_reward(const Environment& env, Interval I, const PolicyClass& pc,
                               int* argmax) {
  if (I.s < 1 || I.e > env.T() || I.s > I.e) throw StateError("interval outside horizon");
  WeightTable table(env.num_contexts(), env.K());
  double inv = 1.0 / static_cast<double>(I.length());
  for (std::int64_t t = I.s; t <= I.e; ++t) {
    std::vector<double> ctx = env.context_probs(t);
    for (int x = 0; x < env.num_contexts(); ++x)
      for (int a = 0; a < env.K(); ++a) table.at(x, a) += inv * ctx[x] * env.mean(t, x, a);
  }
  auto [arg, val] = best_policy(table, pc);
  if (argmax) *argmax = arg;
  return val;
}

double expected_regret(const Environment& env, Interval I, const PolicyTable& pi,
                       const PolicyClass& pc) {
  return expected_max_avg_reward(env, I, pc) - expected_avg_reward(env, I, pi);
}

double expected_variance(const Environment& env, Interval I, const SparsePolicyDistribution& Q,
                         double nu, const PolicyTable& pi, const PolicyClass& pc) {
  if (I.s < 1 || I.e > env.T() || I.s > I.e) throw StateError("interval outside horizon");
  std::vector<double> q = smoothed_projection_table(Q, nu, pc);
  std::vector<double> ctx_mass(env.num_contexts(), 0.0);
  for (std::int64_t t = I.s; t <= I.e; ++t) {
    std::vector<double> ctx = env.context_probs(t);
    for (int x = 0; x < env.num_contexts(); ++x) ctx_mass[x] += ctx[x];
  }
  double sum = 0.0;
  for (int x = 0; x < env.num_contexts(); ++x)
    sum += ctx_mass[x] / q[static_cast<std::size_t>(x) * env.K() + pi.actions[x]];
  return sum / static_cast<double>(I.length());
}

}  // namespace nscb
