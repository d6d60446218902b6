/**
 * Partitioning a dataset into strata from the stratification variable z.
 *
 * Seven methods are provided: cumulative-root boundary rules (SQRT, CBRT),
 * weighted-mean equalization (WTMN), 1-D k-means (KM), a 1-D Gaussian mixture
 * (GMM), equal-size (EQSZ) and equal-width (EQWD) splits.
 *
 * Empty strata are never returned: an empty stratum is folded into a neighbour,
 * K shrinks accordingly and `merged_empty` is set on the partition.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "density.hpp"
#include "random.hpp"

namespace strateval {

enum class Method { sqrt, cbrt, wtmn, km, gmm, eqsz, eqwd };

inline constexpr Method kAllMethods[] = {Method::sqrt, Method::cbrt, Method::wtmn, Method::km,
                                         Method::gmm,  Method::eqsz, Method::eqwd};

inline std::string_view to_string(Method m) {
    switch (m) {
        case Method::sqrt: return "sqrt";
        case Method::cbrt: return "cbrt";
        case Method::wtmn: return "wtmn";
        case Method::km: return "km";
        case Method::gmm: return "gmm";
        case Method::eqsz: return "eqsz";
        case Method::eqwd: return "eqwd";
    }
    return "?";
}

inline std::optional<Method> parse_method(std::string_view token) {
    for (Method m : kAllMethods)
        if (to_string(m) == token) return m;
    return std::nullopt;
}

inline bool uses_density(Method m) { return m == Method::sqrt || m == Method::cbrt; }

struct StrataPartition {
    int K = 0;
    /// Stratum index per instance, aligned with dataset rows.
    std::vector<int> assignment;
    std::vector<std::size_t> sizes;
    std::vector<double> weights;
    Method method = Method::eqsz;
    /// K-1 cut points for boundary-based methods.
    std::optional<std::vector<double>> boundaries;
    bool merged_empty = false;

    std::size_t population() const noexcept { return assignment.size(); }

    /// Row indices of each stratum, in row order.
    std::vector<std::vector<std::size_t>> members() const {
        std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(K));
        for (std::size_t k = 0; k < out.size(); ++k) out[k].reserve(sizes[k]);
        for (std::size_t i = 0; i < assignment.size(); ++i)
            out[static_cast<std::size_t>(assignment[i])].push_back(i);
        return out;
    }
};

namespace detail {

/**
 * Build a partition from a raw assignment over `raw_k` labels. Labels with no
 * members are dropped and the remaining ones renumbered in order, which merges
 * each empty stratum into the adjacent nonempty one. For boundary-based methods
 * the cut below each surviving stratum is kept.
 */
inline StrataPartition finalize_partition(std::vector<int> assignment, int raw_k, Method method,
                                          std::optional<std::vector<double>> boundaries) {
    std::vector<std::size_t> counts(static_cast<std::size_t>(raw_k), 0);
    for (int a : assignment) ++counts[static_cast<std::size_t>(a)];

    std::vector<int> remap(static_cast<std::size_t>(raw_k), -1);
    int next = 0;
    std::optional<std::vector<double>> kept;
    if (boundaries) kept.emplace();
    for (int k = 0; k < raw_k; ++k) {
        if (counts[static_cast<std::size_t>(k)] == 0) continue;
        if (kept && next > 0) kept->push_back((*boundaries)[static_cast<std::size_t>(k - 1)]);
        remap[static_cast<std::size_t>(k)] = next++;
    }

    StrataPartition p;
    p.K = next;
    p.method = method;
    p.merged_empty = next < raw_k;
    p.boundaries = std::move(kept);
    for (int& a : assignment) a = remap[static_cast<std::size_t>(a)];
    p.assignment = std::move(assignment);
    p.sizes.assign(static_cast<std::size_t>(next), 0);
    for (int a : p.assignment) ++p.sizes[static_cast<std::size_t>(a)];
    const auto n = static_cast<double>(p.assignment.size());
    for (std::size_t s : p.sizes) p.weights.push_back(static_cast<double>(s) / n);
    return p;
}

/// Row indices sorted by z; ties keep row order.
inline std::vector<std::size_t> order_by_value(std::span<const double> z) {
    std::vector<std::size_t> order(z.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return z[a] < z[b]; });
    return order;
}

inline std::size_t count_distinct(std::span<const double> z) {
    std::vector<double> v(z.begin(), z.end());
    std::sort(v.begin(), v.end());
    return static_cast<std::size_t>(std::unique(v.begin(), v.end()) - v.begin());
}

inline void require_nonempty(std::span<const double> z) {
    if (z.empty()) throw std::invalid_argument("empty stratification variable");
}

}  // namespace detail

/**
 * Instance i goes to stratum k iff boundaries[k-1] <= z_i < boundaries[k]; the
 * first stratum is open below and the last closed above. A z equal to a
 * boundary lands in the upper stratum.
 */
inline StrataPartition assign_by_boundaries(std::span<const double> z,
                                            std::span<const double> boundaries,
                                            Method method = Method::eqwd) {
    detail::require_nonempty(z);
    for (std::size_t k = 1; k < boundaries.size(); ++k)
        if (!(boundaries[k] > boundaries[k - 1]))
            throw std::invalid_argument("boundaries must be strictly increasing");
    std::vector<int> assignment(z.size());
    for (std::size_t i = 0; i < z.size(); ++i)
        assignment[i] = static_cast<int>(
            std::upper_bound(boundaries.begin(), boundaries.end(), z[i]) - boundaries.begin());
    return detail::finalize_partition(std::move(assignment), static_cast<int>(boundaries.size()) + 1,
                                      method,
                                      std::vector<double>(boundaries.begin(), boundaries.end()));
}

/// Equal-width sub-ranges: cuts at min(z) + r*k/K with r = max(z) - min(z).
inline StrataPartition stratify_eqwd(std::span<const double> z, int K) {
    detail::require_nonempty(z);
    if (K < 1) throw std::invalid_argument("K must be positive");
    const auto [lo, hi] = std::minmax_element(z.begin(), z.end());
    const double range = *hi - *lo;
    if (!(range > 0.0)) throw std::invalid_argument("zero range in stratification variable");
    std::vector<double> cuts;
    for (int k = 1; k < K; ++k) cuts.push_back(*lo + range * k / K);
    return assign_by_boundaries(z, cuts, Method::eqwd);
}

/**
 * Equal-size strata along sorted z. With N = qK + r the first r strata get
 * q + 1 instances and the rest q; ties in z are broken by row order.
 */
inline StrataPartition stratify_eqsz(std::span<const double> z, int K) {
    if (K < 1) throw std::invalid_argument("K must be positive");
    if (z.size() < static_cast<std::size_t>(K))
        throw std::invalid_argument("fewer instances than strata");
    const auto order = detail::order_by_value(z);
    const std::size_t q = z.size() / static_cast<std::size_t>(K);
    const std::size_t r = z.size() % static_cast<std::size_t>(K);
    std::vector<int> assignment(z.size());
    std::size_t pos = 0;
    for (std::size_t k = 0; k < static_cast<std::size_t>(K); ++k) {
        const std::size_t take = q + (k < r ? 1 : 0);
        for (std::size_t t = 0; t < take; ++t) assignment[order[pos++]] = static_cast<int>(k);
    }
    return detail::finalize_partition(std::move(assignment), K, Method::eqsz, std::nullopt);
}

/**
 * Weighted-mean equalization: walk instances in ascending z and cut where the
 * running sum of z crosses k/K of the total, so that W_k times the stratum mean
 * of z (the stratum's share of sum z) is the same for every stratum up to
 * discreteness. An instance whose preceding running sum is S goes to stratum
 * floor(K * S / sum z).
 */
inline StrataPartition stratify_wtmn(std::span<const double> z, int K) {
    detail::require_nonempty(z);
    if (K < 1) throw std::invalid_argument("K must be positive");
    double total = 0.0;
    for (double v : z) {
        if (v < 0.0) throw std::invalid_argument("weighted-mean stratification needs z >= 0");
        total += v;
    }
    if (!(total > 0.0)) throw std::invalid_argument("sum of z is zero");
    const auto order = detail::order_by_value(z);
    std::vector<int> assignment(z.size());
    double before = 0.0;
    for (std::size_t i : order) {
        const auto k = static_cast<int>(std::floor(static_cast<double>(K) * before / total));
        assignment[i] = std::clamp(k, 0, K - 1);
        before += z[i];
    }
    return detail::finalize_partition(std::move(assignment), K, Method::wtmn, std::nullopt);
}

struct KMeansResult {
    /// Ascending cluster centers.
    std::vector<double> centers;
    std::vector<int> assignment;
    /// Within-cluster sum of squares after each Lloyd update.
    std::vector<double> objective_trace;
    int iterations = 0;
};

inline constexpr int kKMeansMaxIterations = 300;

/**
 * 1-D k-means with k-means++ seeding and Lloyd iterations until the assignment
 * stops changing or kKMeansMaxIterations is reached. Clusters are relabelled by
 * ascending center.
 */
inline KMeansResult kmeans_1d(std::span<const double> z, int K, std::uint64_t seed) {
    if (K < 1) throw std::invalid_argument("K must be positive");
    if (detail::count_distinct(z) < static_cast<std::size_t>(K))
        throw std::invalid_argument("fewer distinct z values than strata");
    const std::size_t n = z.size();
    const auto k_count = static_cast<std::size_t>(K);
    Stream rng(seed);

    std::vector<double> centers;
    centers.push_back(z[rng.index(n)]);
    std::vector<double> d2(n);
    while (centers.size() < k_count) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (double c : centers) best = std::min(best, (z[i] - c) * (z[i] - c));
            d2[i] = best;
            total += best;
        }
        double target = rng.uniform() * total;
        std::size_t pick = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (d2[i] <= 0.0) continue;
            pick = i;
            target -= d2[i];
            if (target < 0.0) break;
        }
        centers.push_back(z[pick]);
    }

    const auto nearest = [&](double v) {
        std::size_t best = 0;
        double bd = std::abs(v - centers[0]);
        for (std::size_t k = 1; k < k_count; ++k) {
            const double d = std::abs(v - centers[k]);
            if (d < bd) {
                bd = d;
                best = k;
            }
        }
        return static_cast<int>(best);
    };
    const auto objective = [&](const std::vector<int>& assign) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = z[i] - centers[static_cast<std::size_t>(assign[i])];
            s += d * d;
        }
        return s;
    };

    KMeansResult result;
    std::vector<int> assign(n, -1);
    for (int it = 0; it < kKMeansMaxIterations; ++it) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            const int k = nearest(z[i]);
            if (k != assign[i]) {
                assign[i] = k;
                changed = true;
            }
        }
        result.iterations = it + 1;
        if (!changed) break;
        std::vector<double> sum(k_count, 0.0);
        std::vector<std::size_t> cnt(k_count, 0);
        for (std::size_t i = 0; i < n; ++i) {
            sum[static_cast<std::size_t>(assign[i])] += z[i];
            ++cnt[static_cast<std::size_t>(assign[i])];
        }
        for (std::size_t k = 0; k < k_count; ++k)
            if (cnt[k] > 0) centers[k] = sum[k] / static_cast<double>(cnt[k]);
        result.objective_trace.push_back(objective(assign));
    }

    std::vector<std::size_t> rank(k_count);
    std::iota(rank.begin(), rank.end(), std::size_t{0});
    std::stable_sort(rank.begin(), rank.end(),
                     [&](std::size_t a, std::size_t b) { return centers[a] < centers[b]; });
    std::vector<int> relabel(k_count);
    for (std::size_t r = 0; r < k_count; ++r) {
        relabel[rank[r]] = static_cast<int>(r);
        result.centers.push_back(centers[rank[r]]);
    }
    for (int& a : assign) a = relabel[static_cast<std::size_t>(a)];
    result.assignment = std::move(assign);
    return result;
}

inline StrataPartition stratify_kmeans(std::span<const double> z, int K, std::uint64_t seed) {
    auto fit = kmeans_1d(z, K, seed);
    return detail::finalize_partition(std::move(fit.assignment), K, Method::km, std::nullopt);
}

struct GaussianMixture1D {
    /// Ascending component means.
    std::vector<double> means;
    std::vector<double> variances;
    std::vector<double> mix_weights;
    std::vector<int> assignment;
    double mean_log_likelihood = 0.0;
    int iterations = 0;
};

inline constexpr int kGmmMaxIterations = 500;
inline constexpr double kGmmTolerance = 1e-8;
inline constexpr double kGmmVarianceFloor = 1e-6;

/**
 * Fit a K-component 1-D Gaussian mixture by EM, initialized from the k-means
 * solution. Variances are floored at 1e-6 * var(z). Stops after 500 iterations
 * or when the mean per-instance log-likelihood changes by less than 1e-8.
 * Instances are assigned to their maximum-posterior component.
 */
inline GaussianMixture1D fit_gmm_1d(std::span<const double> z, int K, std::uint64_t seed) {
    const auto km = kmeans_1d(z, K, seed);
    const std::size_t n = z.size();
    const auto k_count = static_cast<std::size_t>(K);

    double zmean = 0.0;
    for (double v : z) zmean += v;
    zmean /= static_cast<double>(n);
    double zvar = 0.0;
    for (double v : z) zvar += (v - zmean) * (v - zmean);
    zvar /= static_cast<double>(n);
    const double floor_var = std::max(kGmmVarianceFloor * zvar, std::numeric_limits<double>::min());

    GaussianMixture1D g;
    g.means = km.centers;
    g.variances.assign(k_count, 0.0);
    g.mix_weights.assign(k_count, 0.0);
    {
        std::vector<std::size_t> cnt(k_count, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto k = static_cast<std::size_t>(km.assignment[i]);
            const double d = z[i] - g.means[k];
            g.variances[k] += d * d;
            ++cnt[k];
        }
        for (std::size_t k = 0; k < k_count; ++k) {
            g.mix_weights[k] = std::max(static_cast<double>(cnt[k]), 1.0) / static_cast<double>(n);
            g.variances[k] = cnt[k] > 0 ? std::max(g.variances[k] / static_cast<double>(cnt[k]), floor_var)
                                        : std::max(zvar, floor_var);
        }
        double wsum = 0.0;
        for (double w : g.mix_weights) wsum += w;
        for (double& w : g.mix_weights) w /= wsum;
    }

    constexpr double log_sqrt_2pi = 0.91893853320467274178;
    std::vector<double> resp(n * k_count);
    std::vector<double> logp(k_count);
    double prev_ll = -std::numeric_limits<double>::infinity();
    std::vector<double> offset(k_count);
    std::vector<double> inv_var(k_count);
    const auto e_step = [&] {
        for (std::size_t k = 0; k < k_count; ++k) {
            offset[k] = std::log(g.mix_weights[k]) - 0.5 * std::log(g.variances[k]) - log_sqrt_2pi;
            inv_var[k] = 0.5 / g.variances[k];
        }
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < k_count; ++k) {
                const double d = z[i] - g.means[k];
                logp[k] = offset[k] - d * d * inv_var[k];
                mx = std::max(mx, logp[k]);
            }
            double* r = &resp[i * k_count];
            double s = 0.0;
            for (std::size_t k = 0; k < k_count; ++k) {
                r[k] = std::exp(logp[k] - mx);
                s += r[k];
            }
            ll += mx + std::log(s);
            const double inv = 1.0 / s;
            for (std::size_t k = 0; k < k_count; ++k) r[k] *= inv;
        }
        return ll / static_cast<double>(n);
    };

    for (int it = 0; it < kGmmMaxIterations; ++it) {
        const double ll = e_step();
        g.iterations = it + 1;
        g.mean_log_likelihood = ll;
        if (std::abs(ll - prev_ll) < kGmmTolerance) break;
        prev_ll = ll;
        for (std::size_t k = 0; k < k_count; ++k) {
            double nk = 0.0;
            double sx = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                nk += resp[i * k_count + k];
                sx += resp[i * k_count + k] * z[i];
            }
            if (nk <= 1e-300) continue;  // component collapsed; keep previous parameters
            const double mu = sx / nk;
            double sv = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = z[i] - mu;
                sv += resp[i * k_count + k] * d * d;
            }
            g.means[k] = mu;
            g.variances[k] = std::max(sv / nk, floor_var);
            g.mix_weights[k] = nk / static_cast<double>(n);
        }
    }
    e_step();

    std::vector<std::size_t> rank(k_count);
    std::iota(rank.begin(), rank.end(), std::size_t{0});
    std::stable_sort(rank.begin(), rank.end(),
                     [&](std::size_t a, std::size_t b) { return g.means[a] < g.means[b]; });
    std::vector<int> relabel(k_count);
    GaussianMixture1D sorted = g;
    for (std::size_t r = 0; r < k_count; ++r) {
        relabel[rank[r]] = static_cast<int>(r);
        sorted.means[r] = g.means[rank[r]];
        sorted.variances[r] = g.variances[rank[r]];
        sorted.mix_weights[r] = g.mix_weights[rank[r]];
    }
    sorted.assignment.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < k_count; ++k)
            if (resp[i * k_count + k] > resp[i * k_count + best]) best = k;
        sorted.assignment[i] = relabel[best];
    }
    return sorted;
}

inline StrataPartition stratify_gmm(std::span<const double> z, int K, std::uint64_t seed) {
    auto fit = fit_gmm_1d(z, K, seed);
    return detail::finalize_partition(std::move(fit.assignment), K, Method::gmm, std::nullopt);
}

/// Dispatch to the method-specific partitioner. SQRT and CBRT need a density model.
inline StrataPartition stratify(std::span<const double> z, Method method, int K, std::uint64_t seed,
                                const DensityModel* density = nullptr) {
    switch (method) {
        case Method::sqrt:
        case Method::cbrt: {
            if (!density) throw std::invalid_argument("density model required for sqrt/cbrt");
            const double exponent = method == Method::sqrt ? 0.5 : 1.0 / 3.0;
            const auto cuts = root_cumulative_boundaries(*density, K, exponent);
            return assign_by_boundaries(z, cuts, method);
        }
        case Method::wtmn: return stratify_wtmn(z, K);
        case Method::km: return stratify_kmeans(z, K, seed);
        case Method::gmm: return stratify_gmm(z, K, seed);
        case Method::eqsz: return stratify_eqsz(z, K);
        case Method::eqwd: return stratify_eqwd(z, K);
    }
    throw std::invalid_argument("unknown stratification method");
}

}  // namespace strateval
