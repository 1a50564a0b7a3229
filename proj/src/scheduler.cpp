#include "nscb/scheduler.hpp"

#include <algorithm>
#include <cmath>

#include "nscb/errors.hpp"

namespace nscb {

double ScheduleParams::nu(int j) const {
  if (j < 0 || j > 60) throw InputError("block index out of range");
  return std::sqrt(C0 / (static_cast<double>(K) * std::ldexp(static_cast<double>(L), j)));
}

std::int64_t ScheduleParams::block_len(int j) const {
  if (j < 0 || j > 60) throw InputError("block index out of range");
  return L << j;
}

ScheduleParams ScheduleParams::compute(std::int64_t T, int K, int num_policies, double delta,
                                       double constant_scale, OpConfig base_op) {
  if (T < 1) throw InputError("schedule needs T >= 1");
  if (K < 2) throw InputError("schedule needs K >= 2");
  if (num_policies < 1) throw InputError("schedule needs a nonempty policy class");
  if (!(delta > 0.0 && delta < 1.0)) throw InputError("schedule needs delta in (0,1)");
  if (!(constant_scale > 0.0 && constant_scale <= 1.0))
    throw InputError("constant_scale must lie in (0,1]");
  ScheduleParams p;
  p.T = T;
  p.K = K;
  p.num_policies = num_policies;
  p.delta = delta;
  p.constant_scale = constant_scale;
  double tf = static_cast<double>(T);
  double pf = static_cast<double>(num_policies);
  p.C0 = std::log(8.0 * tf * tf * tf * pf * pf / delta);
  p.L = static_cast<std::int64_t>(std::ceil(4.0 * K * p.C0));
  p.k_prime = std::log2(tf) * K;
  p.op = base_op;
  p.op.C *= constant_scale;
  p.tests.scale = constant_scale;
  return p;
}

ReplayDraw sample_replay_start(int j, std::int64_t L, RngStream& coin, RngStream& index) {
  if (j <= 0) return {};
  double tail = 0.0;
  for (int m = 0; m < j; ++m) tail += std::exp2(-0.5 * m);
  double start_prob = std::exp2(-0.5 * j) * tail / static_cast<double>(L);
  if (!coin.bernoulli(start_prob)) return {};
  std::vector<double> probs(j);
  for (int m = 0; m < j; ++m) probs[m] = std::exp2(-0.5 * m) / tail;
  ReplayDraw d;
  d.start = true;
  d.m = index.categorical(probs);
  return d;
}

std::vector<int> active_replay_indices(std::span<const ReplayPhase> S, std::int64_t t) {
  std::vector<int> out;
  for (const auto& phase : S)
    if (phase.span.contains(t)) out.push_back(phase.m);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

ActionDistribution action_distribution(std::span<const SparsePolicyDistribution> Qs,
                                       const ScheduleParams& params, int j,
                                       std::span<const int> active, const PolicyClass& pc,
                                       ContextId x) {
  if (j < 0 || j >= static_cast<int>(Qs.size()))
    throw StateError("no distribution recorded for the current block");
  if (active.empty()) {
    return smooth_distribution(project_distribution(Qs[j], pc, x), params.nu(j));
  }
  ActionDistribution out{std::vector<double>(pc.K(), 0.0)};
  double share = 1.0 / static_cast<double>(active.size());
  for (int m : active) {
    if (m < 0 || m >= j) throw StateError("active replay scale outside the current block");
    ActionDistribution d = smooth_distribution(project_distribution(Qs[m], pc, x), params.nu(m));
    for (int a = 0; a < pc.K(); ++a) out.p[a] += share * d.p[a];
  }
  return out;
}

namespace {

struct LoopState {
  std::int64_t epoch = 1;
  std::int64_t tau = 1;
  int j = 0;
  std::vector<SparsePolicyDistribution> Qs;
  std::vector<ReplayPhase> S;
};

void emit_block_start(std::vector<Event>& events, const LoopState& st,
                      const ScheduleParams& params, std::int64_t t) {
  Event e;
  e.t = t;
  e.kind = EventKind::BlockStart;
  e.epoch = st.epoch;
  e.block = st.j;
  e.nu = params.nu(st.j);
  e.support = static_cast<int>(st.Qs[st.j].atoms.size());
  e.span = Interval{st.tau, st.tau + params.block_len(st.j) - 1};
  events.push_back(e);
}

void open_epoch(std::vector<Event>& events, LoopState& st, const ScheduleParams& params,
                std::int64_t t) {
  st.tau = t;
  st.j = 0;
  st.S.clear();
  st.Qs.assign(1, SparsePolicyDistribution::point_mass(0));
  Event e;
  e.t = t;
  e.kind = EventKind::EpochStart;
  e.epoch = st.epoch;
  events.push_back(e);
  emit_block_start(events, st, params, t);
}

}  // namespace

RunResult run(const Environment& env, const PolicyClass& pc, const ScheduleParams& params,
              std::uint64_t seed, const RunOptions& opts) {
  if (env.K() != pc.K() || env.num_contexts() != pc.num_contexts())
    throw InputError("environment and policy class dimensions differ");
  if (env.T() != params.T) throw InputError("schedule horizon differs from the environment");
  if (pc.size() != params.num_policies)
    throw InputError("schedule was computed for a different class size");
  if (!std::is_sorted(opts.forced_restart_after.begin(), opts.forced_restart_after.end()))
    throw InputError("forced restart rounds must be sorted");

  RngStream coin(seed, kReplayCoinStream);
  RngStream index(seed, kReplayIndexStream);
  RngStream action(seed, kActionStream);

  RunResult res{History(pc.num_contexts(), pc.K()), {}, {}, {}, 0};
  res.rewards.reserve(static_cast<std::size_t>(params.T));

  LoopState st;
  st.epoch = 1;
  open_epoch(res.events, st, params, 1);
  std::size_t forced_at = 0;

  for (std::int64_t t = 1; t <= params.T; ++t) {
    // Step 1: replay sampling.
    if (opts.replays_enabled && st.j >= 1) {
      ReplayDraw draw = sample_replay_start(st.j, params.L, coin, index);
      if (draw.start) {
        ReplayPhase phase{draw.m, Interval{t, t + params.block_len(draw.m) - 1}};
        st.S.push_back(phase);
        Event e;
        e.t = t;
        e.kind = EventKind::ReplayStart;
        e.epoch = st.epoch;
        e.block = st.j;
        e.m_or_k = draw.m;
        e.span = phase.span;
        res.events.push_back(e);
      }
    }

    // Step 2: play the mixture.
    std::vector<int> active = active_replay_indices(st.S, t);
    auto [x, rvec] = env.sample_round(t, seed);
    ActionDistribution p = action_distribution(st.Qs, params, st.j, active, pc, x);
    ActionId a = static_cast<ActionId>(action.categorical(p.p));

    RoundRecord rec;
    rec.t = t;
    rec.x = x;
    rec.a = a;
    rec.p = p;
    rec.observed_reward = rvec[a];
    rec.epoch = st.epoch;
    rec.block = st.j;
    rec.replay_indices = active;
    res.history.append(std::move(rec));
    res.rewards.push_back(std::move(rvec));

    // Step 3: checks (the run ends at t = T without further tests).
    if (t == params.T) break;

    bool restart = false;
    if (opts.tests_enabled) {
      for (const ReplayPhase& phase : st.S) {
        if (phase.span.e != t) continue;
        Interval B{st.tau, st.tau + params.block_len(st.j - 1) - 1};
        TestOutcome out = replay_test(res.history, pc, phase.span, B, st.Qs[phase.m],
                                      params.nu(phase.m), params.k_prime, params.tests);
        Event e;
        e.t = t;
        e.kind = EventKind::ReplayTestEvent;
        e.epoch = st.epoch;
        e.block = st.j;
        e.m_or_k = phase.m;
        e.span = phase.span;
        e.verdict = out.verdict;
        e.witness = out.witness;
        res.events.push_back(e);
        if (out.verdict == Verdict::Fail) {
          restart = true;
          break;
        }
      }
    }

    if (!restart && forced_at < opts.forced_restart_after.size() &&
        opts.forced_restart_after[forced_at] == t) {
      restart = true;
      ++forced_at;
    }

    if (!restart && t == st.tau + params.block_len(st.j) - 1) {
      TestOutcome out;
      if (opts.tests_enabled) {
        std::vector<BlockBaseline> baselines;
        baselines.reserve(static_cast<std::size_t>(st.j));
        for (int k = 0; k < st.j; ++k)
          baselines.push_back(BlockBaseline{Interval{st.tau, st.tau + params.block_len(k) - 1},
                                            params.nu(k), &st.Qs[k + 1], params.nu(k + 1)});
        out = block_test(res.history, pc, Interval{st.tau, t}, baselines, params.k_prime,
                         params.tests);
        Event e;
        e.t = t;
        e.kind = EventKind::BlockTestEvent;
        e.epoch = st.epoch;
        e.block = st.j;
        e.m_or_k = out.compare_index;
        e.span = Interval{st.tau, t};
        e.verdict = out.verdict;
        e.witness = out.witness;
        res.events.push_back(e);
      }
      if (out.verdict == Verdict::Fail) {
        restart = true;
      } else {
        st.j += 1;
        st.S.clear();
        OpInstance inst{&res.history, Interval{st.tau, t}, &pc, params.nu(st.j), params.op};
        OpSolution sol = solve_op(inst);
        res.op_solves += 1;
        st.Qs.push_back(std::move(sol.Q));
        emit_block_start(res.events, st, params, t + 1);
      }
    }

    if (restart) {
      res.restart_rounds.push_back(t);
      Event e;
      e.t = t;
      e.kind = EventKind::Restart;
      e.epoch = st.epoch;
      e.block = st.j;
      res.events.push_back(e);
      st.epoch += 1;
      open_epoch(res.events, st, params, t + 1);
    }
  }

  return res;
}

RunResult run_uniform(const Environment& env, const PolicyClass& pc, std::uint64_t seed) {
  if (env.K() != pc.K() || env.num_contexts() != pc.num_contexts())
    throw InputError("environment and policy class dimensions differ");
  RngStream action(seed, kActionStream);
  RunResult res{History(pc.num_contexts(), pc.K()), {}, {}, {}, 0};
  res.rewards.reserve(static_cast<std::size_t>(env.T()));
  ActionDistribution uniform{std::vector<double>(pc.K(), 1.0 / pc.K())};
  for (std::int64_t t = 1; t <= env.T(); ++t) {
    auto [x, rvec] = env.sample_round(t, seed);
    ActionId a = static_cast<ActionId>(action.categorical(uniform.p));
    RoundRecord rec;
    rec.t = t;
    rec.x = x;
    rec.a = a;
    rec.p = uniform;
    rec.observed_reward = rvec[a];
    rec.epoch = 1;
    rec.block = 0;
    res.history.append(std::move(rec));
    res.rewards.push_back(std::move(rvec));
  }
  return res;
}

}  // namespace nscb
