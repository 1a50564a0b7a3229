#include <cmath>
#include <vector>

#include "doctest.h"
#include "nscb/environment.hpp"
#include "nscb/errors.hpp"
#include "nscb/estimator.hpp"
#include "nscb/rng.hpp"

using namespace nscb;

namespace {

EnvironmentSpec flip_spec(std::int64_t half, int K, std::vector<double> probs,
                          std::vector<std::vector<double>> means_a,
                          std::vector<std::vector<double>> means_b) {
  EnvironmentSpec spec;
  spec.T = 2 * half;
  spec.K = K;
  spec.num_contexts = static_cast<int>(probs.size());
  spec.segments.push_back(SegmentSpec{half, probs, means_a});
  spec.segments.push_back(SegmentSpec{half, probs, means_b});
  return spec;
}

EnvironmentSpec stationary_spec(std::int64_t T, int K, std::vector<double> probs,
                                std::vector<std::vector<double>> means) {
  EnvironmentSpec spec;
  spec.T = T;
  spec.K = K;
  spec.num_contexts = static_cast<int>(probs.size());
  spec.segments.push_back(SegmentSpec{T, std::move(probs), std::move(means)});
  return spec;
}

}  // namespace

TEST_CASE("spec validation") {
  EnvironmentSpec s = stationary_spec(10, 2, {1.0}, {{0.5, 0.5}});
  CHECK_NOTHROW(Environment{s});

  EnvironmentSpec bad = s;
  bad.segments[0].length = 9;
  CHECK_THROWS_AS(Environment{bad}, InputError);
  bad = s;
  bad.segments[0].context_probs = {0.9};
  CHECK_THROWS_AS(Environment{bad}, InputError);
  bad = s;
  bad.segments[0].reward_means = {{1.2, 0.5}};
  CHECK_THROWS_AS(Environment{bad}, InputError);
  bad = s;
  bad.drift = DriftSpec{s.segments[0], s.segments[0]};
  CHECK_THROWS_AS(Environment{bad}, InputError);
  bad = s;
  bad.segments.clear();
  CHECK_THROWS_AS(Environment{bad}, InputError);
}

TEST_CASE("spec json round trip") {
  EnvironmentSpec s = flip_spec(50, 2, {0.3, 0.7}, {{0.9, 0.1}, {0.2, 0.8}},
                                {{0.1, 0.9}, {0.8, 0.2}});
  EnvironmentSpec back = EnvironmentSpec::from_json(s.to_json());
  CHECK(back.T == s.T);
  CHECK(back.K == s.K);
  CHECK(back.num_contexts == s.num_contexts);
  REQUIRE(back.segments.size() == 2);
  CHECK(back.segments[1].reward_means == s.segments[1].reward_means);

  EnvironmentSpec d = stationary_spec(10, 2, {1.0}, {{0.5, 0.5}});
  d.drift = DriftSpec{d.segments[0], d.segments[0]};
  d.drift->end.reward_means = {{0.0, 1.0}};
  d.segments.clear();
  EnvironmentSpec dback = EnvironmentSpec::from_json(d.to_json());
  CHECK(dback.drift.has_value());
  CHECK(dback.segments.empty());
  CHECK(dback.drift->end.reward_means[0][1] == 1.0);

  CHECK_THROWS_AS(EnvironmentSpec::from_json("not json"), InputError);
}

TEST_CASE("degenerate reward means give constant draws") {
  Environment env(stationary_spec(20, 2, {1.0}, {{1.0, 0.0}}));
  for (std::int64_t t = 1; t <= 20; ++t) {
    auto [x, r] = env.sample_round(t, 7);
    CHECK(x == 0);
    CHECK(r[0] == 1.0);
    CHECK(r[1] == 0.0);
  }
}

TEST_CASE("sampling is a pure function of seed and round") {
  Environment env(flip_spec(25, 3, {0.5, 0.5}, {{0.9, 0.1, 0.3}, {0.2, 0.8, 0.5}},
                            {{0.1, 0.9, 0.7}, {0.8, 0.2, 0.5}}));
  for (std::int64_t t : {1, 7, 25, 26, 50}) {
    auto first = env.sample_round(t, 123);
    auto second = env.sample_round(t, 123);
    CHECK(first.first == second.first);
    CHECK(first.second == second.second);
  }
  // different seeds decorrelate
  int diffs = 0;
  for (std::int64_t t = 1; t <= 50; ++t)
    if (env.sample_round(t, 1).second != env.sample_round(t, 2).second) ++diffs;
  CHECK(diffs > 10);
}

TEST_CASE("per-action draw frequencies match the means") {
  // 10^5 draws of round 1; each action mean within 4 standard errors
  Environment env(stationary_spec(1, 3, {1.0}, {{0.25, 0.5, 0.9}}));
  const int n = 100000;
  std::vector<double> hits(3, 0.0);
  for (int s = 0; s < n; ++s) {
    auto [x, r] = env.sample_round(1, static_cast<std::uint64_t>(s));
    for (int a = 0; a < 3; ++a) hits[a] += r[a];
  }
  std::vector<double> means{0.25, 0.5, 0.9};
  for (int a = 0; a < 3; ++a) {
    double se = std::sqrt(means[a] * (1.0 - means[a]) / n);
    CHECK(std::abs(hits[a] / n - means[a]) < 4.0 * se);
  }
}

TEST_CASE("context draw frequencies match the categorical law") {
  Environment env(stationary_spec(1, 2, {0.2, 0.3, 0.5},
                                  {{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}}));
  const int n = 100000;
  std::vector<double> hits(3, 0.0);
  for (int s = 0; s < n; ++s) hits[env.sample_round(1, static_cast<std::uint64_t>(s)).first] += 1.0;
  std::vector<double> probs{0.2, 0.3, 0.5};
  for (int x = 0; x < 3; ++x) {
    double se = std::sqrt(probs[x] * (1.0 - probs[x]) / n);
    CHECK(std::abs(hits[x] / n - probs[x]) < 4.0 * se);
  }
}

TEST_CASE("switch count and variation for a hard flip") {
  // single context, K=1, mean 0 -> 1: two-point outcome space with disjoint
  // support, so the L1 distance is 2
  Environment env(flip_spec(5, 1, {1.0}, {{0.0}}, {{1.0}}));
  NonstationarityMeasures m = env.nonstationarity_measures();
  CHECK(m.switches == 2);
  CHECK(m.total_variation == doctest::Approx(2.0).epsilon(1e-12));

  Environment flat(stationary_spec(10, 2, {1.0}, {{0.3, 0.7}}));
  NonstationarityMeasures f = flat.nonstationarity_measures();
  CHECK(f.switches == 1);
  CHECK(f.total_variation == 0.0);
}

TEST_CASE("epsilon perturbation of one mean contributes 2 p epsilon") {
  const double eps = 0.01, p = 0.3;
  Environment env(flip_spec(2, 2, {p, 1.0 - p}, {{0.5, 0.6}, {0.4, 0.2}},
                            {{0.5 + eps, 0.6}, {0.4, 0.2}}));
  NonstationarityMeasures m = env.nonstationarity_measures();
  CHECK(m.switches == 2);
  CHECK(m.total_variation == doctest::Approx(2.0 * p * eps).epsilon(1e-9));
}

TEST_CASE("variation is additive over interval splits") {
  EnvironmentSpec spec;
  spec.T = 40;
  spec.K = 2;
  spec.num_contexts = 1;
  spec.segments = {SegmentSpec{10, {1.0}, {{0.9, 0.1}}}, SegmentSpec{10, {1.0}, {{0.2, 0.7}}},
                   SegmentSpec{10, {1.0}, {{0.5, 0.5}}}, SegmentSpec{10, {1.0}, {{0.9, 0.1}}}};
  Environment env(spec);
  auto whole = env.nonstationarity_measures(Interval{3, 38});
  auto left = env.nonstationarity_measures(Interval{3, 17});
  auto right = env.nonstationarity_measures(Interval{17, 38});
  CHECK(whole.total_variation ==
        doctest::Approx(left.total_variation + right.total_variation).epsilon(1e-12));
  // interval switch counts: 1 + changes inside
  CHECK(whole.switches == 4);
  CHECK(left.switches == 2);
  CHECK(right.switches == 3);

  auto single = env.nonstationarity_measures(Interval{5, 5});
  CHECK(single.switches == 1);
  CHECK(single.total_variation == 0.0);
}

TEST_CASE("drift environment accumulates variation smoothly") {
  EnvironmentSpec spec;
  spec.T = 11;
  spec.K = 2;
  spec.num_contexts = 1;
  spec.drift = DriftSpec{SegmentSpec{0, {1.0}, {{0.0, 1.0}}}, SegmentSpec{0, {1.0}, {{1.0, 0.0}}}};
  Environment env(spec);
  CHECK(env.mean(1, 0, 0) == doctest::Approx(0.0));
  CHECK(env.mean(11, 0, 0) == doctest::Approx(1.0));
  CHECK(env.mean(6, 0, 0) == doctest::Approx(0.5));
  NonstationarityMeasures m = env.nonstationarity_measures();
  CHECK(m.switches == 11);
  CHECK(m.total_variation > 0.0);
  // every step moves the same parameter distance; step L1 terms are equal at
  // the midpoint by symmetry and all positive
  CHECK(env.step_l1(2) > 0.0);
  CHECK(env.step_l1(6) == doctest::Approx(env.step_l1(7)).epsilon(1e-9));
}

TEST_CASE("enumeration cap") {
  Environment env(stationary_spec(4, 13, {1.0}, {std::vector<double>(13, 0.5)}));
  CHECK_THROWS_AS(env.nonstationarity_measures(), InputError);
  EnvironmentSpec d;
  d.T = 4;
  d.K = 13;
  d.num_contexts = 1;
  d.drift = DriftSpec{SegmentSpec{0, {1.0}, {std::vector<double>(13, 0.4)}},
                      SegmentSpec{0, {1.0}, {std::vector<double>(13, 0.6)}}};
  CHECK_THROWS_AS(Environment(d).step_l1(2), InputError);
}

TEST_CASE("round-optimal policy matches brute force") {
  Environment env(flip_spec(20, 3, {0.25, 0.75}, {{0.9, 0.1, 0.3}, {0.2, 0.8, 0.5}},
                            {{0.1, 0.9, 0.7}, {0.8, 0.2, 0.5}}));
  PolicyClass pc = all_policies(3, 2);
  for (std::int64_t t : {1, 20, 21, 40}) {
    auto [star, value] = env.optimal_policy_at(t, pc);
    double best = -1.0;
    int arg = -1;
    for (int i = 0; i < pc.size(); ++i) {
      double v = 0.0;
      std::vector<double> ctx = env.context_probs(t);
      for (int x = 0; x < 2; ++x) v += ctx[x] * env.mean(t, x, pc.evaluate(i, x));
      if (v > best + 1e-15) {
        best = v;
        arg = i;
      }
    }
    CHECK(star == arg);
    CHECK(value == doctest::Approx(best).epsilon(1e-12));
  }

  // single context, K=2, means (0.9, 0.1), both constant policies
  Environment tiny(stationary_spec(5, 2, {1.0}, {{0.9, 0.1}}));
  PolicyClass constants = all_policies(2, 1);
  auto [star, value] = tiny.optimal_policy_at(3, constants);
  CHECK(star == 0);
  CHECK(value == doctest::Approx(0.9));
}

TEST_CASE("argmax is invariant under constant mean shifts") {
  std::vector<std::vector<double>> base{{0.4, 0.1, 0.3}, {0.2, 0.5, 0.1}};
  std::vector<std::vector<double>> shifted = base;
  for (auto& row : shifted)
    for (double& v : row) v += 0.2;
  Environment a(stationary_spec(5, 3, {0.6, 0.4}, base));
  Environment b(stationary_spec(5, 3, {0.6, 0.4}, shifted));
  PolicyClass pc = all_policies(3, 2);
  CHECK(a.optimal_policy_at(1, pc).first == b.optimal_policy_at(1, pc).first);
}

TEST_CASE("expected interval statistics agree with per-round means") {
  Environment env(flip_spec(10, 2, {1.0}, {{0.9, 0.1}}, {{0.1, 0.9}}));
  PolicyClass pc = all_policies(2, 1);
  // policy 0 plays action 0: avg over [6, 15] = (5*0.9 + 5*0.1)/10
  CHECK(expected_avg_reward(env, Interval{6, 15}, pc[0]) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(expected_max_avg_reward(env, Interval{1, 10}, pc) == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(expected_regret(env, Interval{1, 10}, pc[1], pc) == doctest::Approx(0.8).epsilon(1e-12));
  // variance of the point mass on the best policy under nu = 0.1
  SparsePolicyDistribution q = SparsePolicyDistribution::point_mass(0);
  CHECK(expected_variance(env, Interval{1, 10}, q, 0.1, pc[0], pc) ==
        doctest::Approx(1.0 / 0.9).epsilon(1e-12));
  CHECK(expected_variance(env, Interval{1, 10}, q, 0.1, pc[1], pc) ==
        doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("regret series on hand-checkable play") {
  Environment env(stationary_spec(100, 2, {1.0}, {{1.0, 0.0}}));
  PolicyClass pc = all_policies(2, 1);
  History h(1, 2);
  std::vector<std::vector<double>> rewards;
  for (std::int64_t t = 1; t <= 100; ++t) {
    auto [x, r] = env.sample_round(t, 3);
    RoundRecord rec;
    rec.t = t;
    rec.x = x;
    rec.a = 0;  // always the optimal action
    rec.p = ActionDistribution{{1.0, 0.0}};
    rec.observed_reward = r[0];
    h.append(std::move(rec));
    rewards.push_back(r);
  }
  RegretSeries series = dynamic_regret(h, env, pc, rewards);
  CHECK(series.realized.back() == doctest::Approx(0.0));
  CHECK(series.pseudo.back() == doctest::Approx(0.0));

  // uniform play on means (1, 0): pseudo regret is exactly t/2
  History hu(1, 2);
  std::vector<std::vector<double>> ru;
  RngStream pick(11, kActionStream);
  for (std::int64_t t = 1; t <= 100; ++t) {
    auto [x, r] = env.sample_round(t, 11);
    RoundRecord rec;
    rec.t = t;
    rec.x = x;
    rec.a = static_cast<ActionId>(pick.categorical(std::vector<double>{0.5, 0.5}));
    rec.p = ActionDistribution{{0.5, 0.5}};
    rec.observed_reward = r[rec.a];
    hu.append(std::move(rec));
    ru.push_back(r);
  }
  RegretSeries us = dynamic_regret(hu, env, pc, ru);
  for (std::int64_t t = 1; t <= 100; ++t)
    CHECK(us.pseudo[static_cast<std::size_t>(t - 1)] ==
          doctest::Approx(0.5 * static_cast<double>(t)).epsilon(1e-12));

  // realized stays within an Azuma-style five-sigma band of pseudo
  for (std::int64_t t = 1; t <= 100; ++t) {
    double gap = std::abs(us.realized[static_cast<std::size_t>(t - 1)] -
                          us.pseudo[static_cast<std::size_t>(t - 1)]);
    CHECK(gap <= 5.0 * 2.0 * std::sqrt(static_cast<double>(t)) + 1e-9);
  }
}
