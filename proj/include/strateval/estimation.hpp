/**
 * Accuracy estimators and their variances.
 *
 * Sampling is with replacement everywhere, so no finite-population correction
 * appears. Notation in comments: W_k = N_k/N stratum weight, A_k true stratum
 * accuracy, S_k^2 = N_k A_k (1 - A_k) / (N_k - 1) within-stratum variance of the
 * correctness bits, n_k per-stratum labels.
 */
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "oracle.hpp"
#include "random.hpp"
#include "stratification.hpp"

namespace strateval {

/// Running draw count and number of correct predictions in one stratum.
struct StratumTally {
    std::int64_t draws = 0;
    std::int64_t successes = 0;

    double accuracy() const {
        return draws > 0 ? static_cast<double>(successes) / static_cast<double>(draws) : 0.0;
    }

    /// Unbiased s^2 = n/(n-1) * A(1-A); nullopt below two draws.
    std::optional<double> variance() const {
        if (draws < 2) return std::nullopt;
        const double a = accuracy();
        const auto n = static_cast<double>(draws);
        return n / (n - 1.0) * a * (1.0 - a);
    }

    void add(int bit) {
        ++draws;
        successes += bit;
    }
};

struct StratumEstimate {
    std::int64_t draws = 0;
    double accuracy = 0.0;
    std::optional<double> s2;
};

struct EstimateResult {
    double estimate = 0.0;
    /// Unbiased variance estimate; absent when some stratum has fewer than two draws.
    std::optional<double> variance;
    std::int64_t samples_used = 0;
    std::vector<StratumEstimate> per_stratum;
};

/// Population mean of the correctness bits.
inline double true_accuracy(std::span<const int> bits) {
    if (bits.empty()) throw std::invalid_argument("no correctness bits");
    std::int64_t s = 0;
    for (int b : bits) s += b;
    return static_cast<double>(s) / static_cast<double>(bits.size());
}

/// Mean of sampled bits and v = A(1-A)/(n-1).
inline EstimateResult estimate_from_bits(std::span<const int> bits) {
    if (bits.empty()) throw std::invalid_argument("no sampled bits");
    StratumTally t;
    for (int b : bits) t.add(b);
    EstimateResult r;
    r.estimate = t.accuracy();
    r.samples_used = t.draws;
    if (t.draws >= 2) r.variance = r.estimate * (1.0 - r.estimate) / static_cast<double>(t.draws - 1);
    return r;
}

/**
 * Combine per-stratum tallies into the stratified estimate
 *   A^s = sum_k N_k A^_k / N     (equal to sum_k W_k A^_k)
 *   v   = sum_k W_k^2 A^_k (1 - A^_k) / (n_k - 1).
 * Summing N_k A^_k before the single division keeps pure strata exact.
 */
inline EstimateResult assemble_stratified(std::span<const std::size_t> sizes,
                                          std::span<const StratumTally> tallies) {
    if (sizes.size() != tallies.size() || sizes.empty())
        throw std::invalid_argument("tallies do not match strata");
    std::size_t population = 0;
    for (std::size_t s : sizes) population += s;
    const auto n_total = static_cast<double>(population);

    EstimateResult r;
    double weighted = 0.0;
    double v = 0.0;
    bool variance_ok = true;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
        const auto& t = tallies[k];
        if (t.draws < 1) throw std::invalid_argument("stratum " + std::to_string(k) + " has no draws");
        const double a = t.accuracy();
        weighted += static_cast<double>(sizes[k]) * a;
        const double w = static_cast<double>(sizes[k]) / n_total;
        if (t.draws >= 2)
            v += w * w * a * (1.0 - a) / static_cast<double>(t.draws - 1);
        else
            variance_ok = false;
        r.samples_used += t.draws;
        r.per_stratum.push_back({t.draws, a, t.variance()});
    }
    r.estimate = weighted / n_total;
    if (variance_ok) r.variance = v;
    return r;
}

/// Row membership of each stratum, precomputed once per partition.
struct StratumFrame {
    std::vector<std::vector<std::size_t>> members;
    std::vector<std::size_t> sizes;
    std::vector<double> weights;

    static StratumFrame from(const StrataPartition& p) {
        return {p.members(), p.sizes, p.weights};
    }

    std::size_t strata() const noexcept { return sizes.size(); }
};

namespace detail {

/// Draw `count` rows of stratum k uniformly with replacement and label them as one query.
inline void draw_stratum(BudgetedOracle& oracle, const std::vector<std::size_t>& members,
                         std::int64_t count, Stream& rng, StratumTally& tally) {
    if (count <= 0) return;
    std::vector<std::size_t> rows(static_cast<std::size_t>(count));
    for (auto& r : rows) r = members[rng.index(members.size())];
    for (int bit : oracle.query_rows(rows)) tally.add(bit);
}

}  // namespace detail

/// Simple random sampling: n uniform draws with replacement over the whole set.
inline EstimateResult random_estimate(BudgetedOracle& oracle, std::int64_t n, std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("random estimate needs n >= 2");
    if (oracle.remaining() < n) throw BudgetExceeded(n, oracle.remaining());
    Stream rng(seed);
    std::vector<std::size_t> rows(static_cast<std::size_t>(n));
    for (auto& r : rows) r = rng.index(oracle.population());
    const auto bits = oracle.query_rows(rows);
    return estimate_from_bits(bits);
}

/// Stratified random sampling with a fixed per-stratum allocation.
inline EstimateResult stratified_estimate(BudgetedOracle& oracle, const StratumFrame& frame,
                                          std::span<const std::int64_t> allocation,
                                          std::uint64_t seed) {
    if (allocation.size() != frame.strata())
        throw std::invalid_argument("allocation has " + std::to_string(allocation.size()) +
                                    " entries for " + std::to_string(frame.strata()) + " strata");
    std::int64_t total = 0;
    for (std::int64_t nk : allocation) {
        if (nk < 1) throw std::invalid_argument("every stratum needs at least one label");
        total += nk;
    }
    if (oracle.remaining() < total) throw BudgetExceeded(total, oracle.remaining());
    Stream rng(seed);
    std::vector<StratumTally> tallies(frame.strata());
    for (std::size_t k = 0; k < frame.strata(); ++k)
        detail::draw_stratum(oracle, frame.members[k], allocation[k], rng, tallies[k]);
    return assemble_stratified(frame.sizes, tallies);
}

inline EstimateResult stratified_estimate(BudgetedOracle& oracle, const StrataPartition& partition,
                                          std::span<const std::int64_t> allocation,
                                          std::uint64_t seed) {
    return stratified_estimate(oracle, StratumFrame::from(partition), allocation, seed);
}

// ---------------------------------------------------------------------------
// Closed-form variances
// ---------------------------------------------------------------------------

/// S^2 of a 0/1 population with mean A and size N: N/(N-1) * A(1-A).
inline double finite_population_variance(double accuracy, double population) {
    return population / (population - 1.0) * (accuracy * (1.0 - accuracy));
}

/// V(A^r) = N A(1-A) / ((N-1) n).
inline double theoretical_variance_random(double accuracy, double population, double n) {
    if (population < 2.0) throw std::invalid_argument("population must be at least 2");
    if (n < 1.0) throw std::invalid_argument("n must be at least 1");
    return finite_population_variance(accuracy, population) / n;
}

/// Ground truth of one stratum in a synthetic or analysed population.
struct StratumTruth {
    double weight = 0.0;
    double accuracy = 0.0;
    double size = 0.0;
};

/// `exact` keeps N_k/(N_k-1); `large_population` drops it (S_k^2 = A_k(1-A_k)).
enum class VarianceMode { exact, large_population };

inline double stratum_variance(const StratumTruth& s, VarianceMode mode) {
    const double base = s.accuracy * (1.0 - s.accuracy);
    if (mode == VarianceMode::large_population) return base;
    if (s.size < 2.0) throw std::invalid_argument("stratum size must be at least 2");
    return s.size / (s.size - 1.0) * base;
}

/// V(A^s) = sum_k W_k^2 S_k^2 / n_k.
inline double theoretical_variance_stratified(std::span<const StratumTruth> strata,
                                              std::span<const std::int64_t> allocation,
                                              VarianceMode mode = VarianceMode::exact) {
    if (strata.size() != allocation.size()) throw std::invalid_argument("allocation size mismatch");
    double v = 0.0;
    for (std::size_t k = 0; k < strata.size(); ++k) {
        if (allocation[k] < 1) throw std::invalid_argument("allocation must be positive");
        const double w = strata[k].weight;
        v += w * w * stratum_variance(strata[k], mode) / static_cast<double>(allocation[k]);
    }
    return v;
}

enum class AllocationPolicy { proportional, equal, optimal };

/**
 * Closed-form variance of the stratified estimator under an idealized
 * (real-valued) allocation:
 *   proportional  (1/n) sum W_k S_k^2
 *   equal         (K/n) sum W_k^2 S_k^2
 *   optimal       (sum W_k S_k)^2 / n
 */
inline double allocation_variance(std::span<const StratumTruth> strata, double n,
                                  AllocationPolicy policy,
                                  VarianceMode mode = VarianceMode::exact) {
    if (!(n > 0.0)) throw std::invalid_argument("n must be positive");
    double acc = 0.0;
    for (const auto& s : strata) {
        const double s2 = stratum_variance(s, mode);
        switch (policy) {
            case AllocationPolicy::proportional: acc += s.weight * s2; break;
            case AllocationPolicy::equal: acc += s.weight * s.weight * s2; break;
            case AllocationPolicy::optimal: acc += s.weight * std::sqrt(s2); break;
        }
    }
    switch (policy) {
        case AllocationPolicy::proportional: return acc / n;
        case AllocationPolicy::equal: return static_cast<double>(strata.size()) * acc / n;
        case AllocationPolicy::optimal: return acc * acc / n;
    }
    return acc;
}

struct VarianceDecomposition {
    /// (1/n) sum W_k (A_k - A)^2
    double gap_random_minus_pro = 0.0;
    /// (1/n) sum W_k (S_k - S_M)^2
    double gap_pro_minus_opt = 0.0;
    /// Same gaps by subtracting the variance formulas directly.
    double direct_random_minus_pro = 0.0;
    double direct_pro_minus_opt = 0.0;
    /// S_M = sum W_k S_k
    double weighted_mean_sd = 0.0;
};

inline constexpr double kIdentityTolerance = 1e-12;

/**
 * Decompose the variance gaps random - proportional and proportional - optimal
 * in the large-population regime (S_k = sqrt(A_k(1-A_k))), both through the
 * closed forms and by direct subtraction. Throws std::logic_error if the two
 * routes disagree by more than kIdentityTolerance.
 */
inline VarianceDecomposition variance_decomposition(std::span<const StratumTruth> strata, double n) {
    if (strata.empty()) throw std::invalid_argument("no strata");
    if (!(n > 0.0)) throw std::invalid_argument("n must be positive");
    double wsum = 0.0;
    double a = 0.0;
    double sm = 0.0;
    for (const auto& s : strata) {
        wsum += s.weight;
        a += s.weight * s.accuracy;
        sm += s.weight * std::sqrt(stratum_variance(s, VarianceMode::large_population));
    }
    if (std::abs(wsum - 1.0) > 1e-9) throw std::invalid_argument("stratum weights must sum to 1");

    VarianceDecomposition d;
    d.weighted_mean_sd = sm;
    double spread_a = 0.0;
    double spread_s = 0.0;
    for (const auto& s : strata) {
        const double sk = std::sqrt(stratum_variance(s, VarianceMode::large_population));
        spread_a += s.weight * (s.accuracy - a) * (s.accuracy - a);
        spread_s += s.weight * (sk - sm) * (sk - sm);
    }
    d.gap_random_minus_pro = spread_a / n;
    d.gap_pro_minus_opt = spread_s / n;

    const auto mode = VarianceMode::large_population;
    const double v_random = a * (1.0 - a) / n;
    const double v_pro = allocation_variance(strata, n, AllocationPolicy::proportional, mode);
    const double v_opt = allocation_variance(strata, n, AllocationPolicy::optimal, mode);
    d.direct_random_minus_pro = v_random - v_pro;
    d.direct_pro_minus_opt = v_pro - v_opt;

    if (std::abs(d.direct_random_minus_pro - d.gap_random_minus_pro) > kIdentityTolerance ||
        std::abs(d.direct_pro_minus_opt - d.gap_pro_minus_opt) > kIdentityTolerance)
        throw std::logic_error("variance decomposition routes disagree");
    return d;
}

struct Case2Gap {
    /// V(A^r) - V_pro with exact N/(N-1) and N_k/(N_k-1) factors.
    double gap = 0.0;
    /// -A(1-A)/n * sum_k N_k (N - N_k) / (N (N-1) (N_k - 1)); only when all A_k are equal.
    std::optional<double> equal_accuracy_closed_form;
};

/// Random-minus-proportional variance gap for small strata, with W_k = N_k/N.
inline Case2Gap case2_exact_gap(std::span<const StratumTruth> strata, double n) {
    if (strata.empty()) throw std::invalid_argument("no strata");
    double population = 0.0;
    for (const auto& s : strata) population += s.size;
    double a = 0.0;
    for (const auto& s : strata) a += s.size / population * s.accuracy;

    double v_pro = 0.0;
    for (const auto& s : strata)
        v_pro += s.size / population * stratum_variance(s, VarianceMode::exact);
    v_pro /= n;

    Case2Gap out;
    out.gap = theoretical_variance_random(a, population, n) - v_pro;

    bool equal = true;
    for (const auto& s : strata) equal = equal && s.accuracy == strata.front().accuracy;
    if (equal) {
        const double a0 = strata.front().accuracy;
        double sum = 0.0;
        for (const auto& s : strata)
            sum += s.size * (population - s.size) / (population * (population - 1.0) * (s.size - 1.0));
        out.equal_accuracy_closed_form = -a0 * (1.0 - a0) / n * sum;
    }
    return out;
}

}  // namespace strateval
