#pragma once

#include <vector>

#include "nscb/history.hpp"
#include "nscb/policy.hpp"

namespace nscb {

// Importance-weighted reward vector for one round:
// rhat(a) = observed_reward / p(a) on the chosen action, 0 elsewhere.
std::vector<double> ips_estimate(const RoundRecord& rec, int K);

// Interval mean of rhat_t(pi(x_t)).
double empirical_avg_reward(const History& h, Interval I, const PolicyTable& pi);

// Lowest-index maximizer of the interval mean over the class; optional argmax out.
double empirical_max_avg_reward(const History& h, Interval I, const PolicyClass& pc,
                                int* argmax = nullptr);

// max_pi' avg(pi') - avg(pi); nonnegative up to float error.
double empirical_regret(const History& h, Interval I, const PolicyTable& pi,
                        const PolicyClass& pc);

// Interval mean of 1 / Q^nu(pi(x_t) | x_t); lands in [1, 1/nu].
double empirical_variance(const History& h, Interval I, const SparsePolicyDistribution& Q,
                          double nu, const PolicyTable& pi, const PolicyClass& pc);

// Smoothed projected probabilities q(a|x) = nu + (1-K*nu) Q(a|x) for all
// contexts at once; indexed x*K + a. Shared by the variance paths.
std::vector<double> smoothed_projection_table(const SparsePolicyDistribution& Q, double nu,
                                              const PolicyClass& pc);

}  // namespace nscb
