/**
 * Splitting a labeling budget across strata.
 *
 * Fixed plans (proportional, equal, optimal with known S_k) are rounded to
 * integers by largest remainder and then clamped so every stratum gets at least
 * kMinPerStratum labels, which keeps the per-stratum variance estimate defined.
 *
 * The two-phase procedure (opt_a1) and its iterative form (opt_a2) learn S_k
 * from a pilot sample of n_ini labels per stratum and spend the rest of the
 * budget in optimal proportions; opt_a2 re-estimates after every batch of
 * n_step labels. All draws in a stratum are pooled into its final estimate.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "estimation.hpp"

namespace strateval {

inline constexpr std::int64_t kMinPerStratum = 2;
inline constexpr std::int64_t kDefaultInitialPerStratum = 5;
inline constexpr std::int64_t kDefaultStep = 10;

inline std::string_view to_string(AllocationPolicy p) {
    switch (p) {
        case AllocationPolicy::proportional: return "pro";
        case AllocationPolicy::equal: return "equ";
        case AllocationPolicy::optimal: return "opt";
    }
    return "?";
}

struct AllocationPlan {
    std::vector<std::int64_t> n_k;
    AllocationPolicy policy = AllocationPolicy::proportional;
    /// Optimal allocation fell back to proportional (every S_k was zero).
    bool fallback = false;

    std::int64_t total() const { return std::accumulate(n_k.begin(), n_k.end(), std::int64_t{0}); }
};

/**
 * Round a real-valued allocation summing to n into integers summing to n.
 *
 * Largest remainder first (ties to the lower index); then every stratum below
 * `min_per_stratum` is raised to it one unit at a time, each unit taken from
 * the currently largest allocation (ties to the lower index).
 */
inline std::vector<std::int64_t> round_allocation(std::span<const double> real_alloc, std::int64_t n,
                                                  std::int64_t min_per_stratum = kMinPerStratum) {
    const auto k_count = static_cast<std::int64_t>(real_alloc.size());
    if (k_count == 0) throw std::invalid_argument("no strata to allocate");
    if (n < k_count * min_per_stratum)
        throw std::invalid_argument("budget " + std::to_string(n) + " below " +
                                    std::to_string(min_per_stratum) + " per stratum for " +
                                    std::to_string(k_count) + " strata");
    double sum = 0.0;
    for (double v : real_alloc) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("allocation must be nonnegative");
        sum += v;
    }
    if (std::abs(sum - static_cast<double>(n)) > 1e-9 * std::max(1.0, static_cast<double>(n)))
        throw std::invalid_argument("real allocation does not sum to n");

    const std::size_t k = real_alloc.size();
    std::vector<std::int64_t> out(k);
    std::vector<double> remainder(k);
    std::int64_t assigned = 0;
    for (std::size_t i = 0; i < k; ++i) {
        const double fl = std::floor(real_alloc[i]);
        out[i] = static_cast<std::int64_t>(fl);
        remainder[i] = real_alloc[i] - fl;
        assigned += out[i];
    }
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    // The floors can overshoot by a unit when the sum is a hair above n.
    for (std::size_t j = 0; assigned < n; j = (j + 1) % k, ++assigned) ++out[order[j]];
    while (assigned > n) {
        const auto it = std::max_element(out.begin(), out.end());
        --*it;
        --assigned;
    }

    for (std::size_t i = 0; i < k; ++i) {
        while (out[i] < min_per_stratum) {
            const auto largest = static_cast<std::size_t>(std::max_element(out.begin(), out.end()) - out.begin());
            --out[largest];
            ++out[i];
        }
    }
    return out;
}

/// n_k = W_k n, rounded.
inline AllocationPlan allocate_proportional(std::span<const double> weights, std::int64_t n,
                                            std::int64_t min_per_stratum = kMinPerStratum) {
    if (weights.empty()) throw std::invalid_argument("no strata to allocate");
    double wsum = 0.0;
    for (double w : weights) wsum += w;
    std::vector<double> real;
    for (double w : weights) real.push_back(w / wsum * static_cast<double>(n));
    return {round_allocation(real, n, min_per_stratum), AllocationPolicy::proportional, false};
}

/// floor(n/K) each, remainder to the lowest-index strata.
inline AllocationPlan allocate_equal(int K, std::int64_t n, std::int64_t min_per_stratum = kMinPerStratum) {
    if (K < 1) throw std::invalid_argument("K must be positive");
    if (n < K * min_per_stratum)
        throw std::invalid_argument("budget " + std::to_string(n) + " below " +
                                    std::to_string(min_per_stratum) + " per stratum for " +
                                    std::to_string(K) + " strata");
    AllocationPlan plan;
    plan.policy = AllocationPolicy::equal;
    plan.n_k.assign(static_cast<std::size_t>(K), n / K);
    for (std::int64_t r = 0; r < n % K; ++r) ++plan.n_k[static_cast<std::size_t>(r)];
    return plan;
}

/// n_k = n W_k S_k / sum_j W_j S_j, rounded. All-zero S_k falls back to proportional.
inline AllocationPlan allocate_optimal(std::span<const double> weights, std::span<const double> sds,
                                       std::int64_t n, std::int64_t min_per_stratum = kMinPerStratum) {
    if (weights.size() != sds.size()) throw std::invalid_argument("weights and sds differ in length");
    double denom = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        if (sds[k] < 0.0) throw std::invalid_argument("standard deviations must be nonnegative");
        denom += weights[k] * sds[k];
    }
    if (!(denom > 0.0)) {
        auto plan = allocate_proportional(weights, n, min_per_stratum);
        plan.policy = AllocationPolicy::optimal;
        plan.fallback = true;
        return plan;
    }
    std::vector<double> real;
    for (std::size_t k = 0; k < weights.size(); ++k)
        real.push_back(static_cast<double>(n) * weights[k] * sds[k] / denom);
    return {round_allocation(real, n, min_per_stratum), AllocationPolicy::optimal, false};
}

inline AllocationPlan plan_for(AllocationPolicy policy, const StrataPartition& partition,
                               std::int64_t n) {
    switch (policy) {
        case AllocationPolicy::proportional: return allocate_proportional(partition.weights, n);
        case AllocationPolicy::equal: return allocate_equal(partition.K, n);
        case AllocationPolicy::optimal: break;
    }
    throw std::invalid_argument("optimal allocation needs stratum standard deviations");
}

inline EstimateResult stratified_estimate(BudgetedOracle& oracle, const StratumFrame& frame,
                                          const AllocationPlan& plan, std::uint64_t seed) {
    return stratified_estimate(oracle, frame, std::span<const std::int64_t>(plan.n_k), seed);
}

inline EstimateResult stratified_estimate(BudgetedOracle& oracle, const StrataPartition& partition,
                                          const AllocationPlan& plan, std::uint64_t seed) {
    return stratified_estimate(oracle, StratumFrame::from(partition), plan, seed);
}

/// Progress of the adaptive procedures, reported after every sampling batch.
struct OptState {
    std::vector<StratumTally> tallies;
    /// sqrt of the unbiased s_k^2 per stratum, as used for the next allocation.
    std::vector<double> sd_estimates;
    /// Labels handed out in the batch just drawn, per stratum.
    std::vector<std::int64_t> last_batch;
    std::int64_t n_ini = 0;
    std::int64_t n_step = 0;
    std::int64_t n_rem = 0;
    /// 0 for the pilot batch, then 1, 2, ...
    int iteration = 0;
};

using OptObserver = std::function<void(const OptState&)>;

/**
 * How the adaptive procedures estimate S_k for the optimal split.
 *   smoothed  sqrt(n/(n-1) p(1-p)) with p = (successes + 1) / (draws + 2)
 *   unbiased  sqrt(n/(n-1) A^(1-A^)), the plain sample estimate; a stratum whose
 *             draws so far all agree gets s_k = 0 and no further labels
 */
enum class SdRule { smoothed, unbiased };

inline std::string_view to_string(SdRule r) { return r == SdRule::smoothed ? "smoothed" : "unbiased"; }

namespace detail {

inline void refresh_sd(OptState& st, SdRule rule) {
    st.sd_estimates.resize(st.tallies.size());
    for (std::size_t k = 0; k < st.tallies.size(); ++k) {
        const auto& t = st.tallies[k];
        if (rule == SdRule::unbiased || t.draws < 2) {
            st.sd_estimates[k] = std::sqrt(t.variance().value_or(0.0));
        } else {
            const auto n = static_cast<double>(t.draws);
            const double p = (static_cast<double>(t.successes) + 1.0) / (n + 2.0);
            st.sd_estimates[k] = std::sqrt(n / (n - 1.0) * p * (1.0 - p));
        }
    }
}

/// Spend `amount` labels by the optimal rule with the current estimates; no per-stratum minimum.
inline std::vector<std::int64_t> adaptive_split(const StratumFrame& frame, const OptState& st,
                                                std::int64_t amount) {
    return allocate_optimal(frame.weights, st.sd_estimates, amount, 0).n_k;
}

inline EstimateResult run_adaptive(BudgetedOracle& oracle, const StratumFrame& frame, std::int64_t n,
                                   std::int64_t n_ini, std::int64_t n_step, std::uint64_t seed,
                                   const OptObserver& observer, SdRule rule) {
    const auto k_count = static_cast<std::int64_t>(frame.strata());
    if (n_ini < 2) throw std::invalid_argument("n_ini must be at least 2");
    if (n_step < 1) throw std::invalid_argument("n_step must be at least 1");
    if (n < k_count * n_ini)
        throw std::invalid_argument("budget " + std::to_string(n) + " below n_ini * K = " +
                                    std::to_string(k_count * n_ini));
    if (oracle.remaining() < n) throw BudgetExceeded(n, oracle.remaining());

    Stream rng(seed);
    OptState st;
    st.tallies.resize(frame.strata());
    st.n_ini = n_ini;
    st.n_step = n_step;
    st.last_batch.assign(frame.strata(), n_ini);
    for (std::size_t k = 0; k < frame.strata(); ++k)
        draw_stratum(oracle, frame.members[k], n_ini, rng, st.tallies[k]);
    st.n_rem = n - k_count * n_ini;
    refresh_sd(st, rule);
    if (observer) observer(st);

    while (st.n_rem > 0) {
        const std::int64_t n_curr = std::min(n_step, st.n_rem);
        st.last_batch = adaptive_split(frame, st, n_curr);
        for (std::size_t k = 0; k < frame.strata(); ++k)
            draw_stratum(oracle, frame.members[k], st.last_batch[k], rng, st.tallies[k]);
        st.n_rem -= n_curr;
        ++st.iteration;
        refresh_sd(st, rule);
        if (observer) observer(st);
    }
    return assemble_stratified(frame.sizes, st.tallies);
}

}  // namespace detail

/**
 * Two-phase optimal allocation: n_ini labels per stratum, then the remaining
 * n - K n_ini split by the optimal rule using the pilot s_k.
 */
inline EstimateResult opt_a1(BudgetedOracle& oracle, const StratumFrame& frame, std::int64_t n,
                             std::int64_t n_ini, std::uint64_t seed, const OptObserver& observer = {},
                             SdRule rule = SdRule::smoothed) {
    const std::int64_t rest = n - static_cast<std::int64_t>(frame.strata()) * n_ini;
    return detail::run_adaptive(oracle, frame, n, n_ini, std::max<std::int64_t>(rest, 1), seed, observer, rule);
}

/**
 * Iterative optimal allocation: after the pilot, repeatedly split
 * min(n_step, n_rem) labels by the optimal rule with the current s_k and
 * update the estimates, until the budget is spent.
 */
inline EstimateResult opt_a2(BudgetedOracle& oracle, const StratumFrame& frame, std::int64_t n,
                             std::int64_t n_ini, std::int64_t n_step, std::uint64_t seed,
                             const OptObserver& observer = {}, SdRule rule = SdRule::smoothed) {
    return detail::run_adaptive(oracle, frame, n, n_ini, n_step, seed, observer, rule);
}

inline EstimateResult opt_a1(BudgetedOracle& oracle, const StrataPartition& partition, std::int64_t n,
                             std::int64_t n_ini, std::uint64_t seed, const OptObserver& observer = {},
                             SdRule rule = SdRule::smoothed) {
    return opt_a1(oracle, StratumFrame::from(partition), n, n_ini, seed, observer, rule);
}

inline EstimateResult opt_a2(BudgetedOracle& oracle, const StrataPartition& partition, std::int64_t n,
                             std::int64_t n_ini, std::int64_t n_step, std::uint64_t seed,
                             const OptObserver& observer = {}, SdRule rule = SdRule::smoothed) {
    return opt_a2(oracle, StratumFrame::from(partition), n, n_ini, n_step, seed, observer, rule);
}

}  // namespace strateval
