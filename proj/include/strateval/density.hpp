/**
 * Gaussian kernel density estimate of the stratification variable and the
 * cumulative-root boundary rule (cum sqrt(f) / cum cbrt(f)).
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace strateval {

/// Density sampled on an equally spaced grid spanning [min(z), max(z)].
struct DensityModel {
    std::vector<double> grid;
    std::vector<double> density;
    double bandwidth = 0.0;

    /// Trapezoidal integral of `values` over the grid.
    double integrate(std::span<const double> values) const {
        double total = 0.0;
        for (std::size_t j = 1; j < grid.size(); ++j)
            total += 0.5 * (values[j] + values[j - 1]) * (grid[j] - grid[j - 1]);
        return total;
    }

    double integral() const { return integrate(density); }
};

inline constexpr std::size_t kDefaultGridSize = 1024;

namespace detail {

/// Linear-interpolated quantile of sorted data (type 7).
inline double quantile_sorted(std::span<const double> sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace detail

/**
 * Silverman's rule of thumb: 1.06 * min(sd, IQR/1.34) * N^(-1/5).
 * Falls back to the standard deviation when the IQR is zero.
 */
inline double silverman_bandwidth(std::span<const double> z) {
    const auto n = static_cast<double>(z.size());
    double mean = 0.0;
    for (double v : z) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : z) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (n - 1.0));

    std::vector<double> sorted(z.begin(), z.end());
    std::sort(sorted.begin(), sorted.end());
    const double iqr =
        detail::quantile_sorted(sorted, 0.75) - detail::quantile_sorted(sorted, 0.25);
    const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
    return 1.06 * spread * std::pow(n, -0.2);
}

/**
 * Fit a Gaussian KDE and evaluate it on `grid_size` points over [min(z), max(z)].
 *
 * The kernels leak mass outside the observed range, so the sampled density is
 * renormalized to integrate to one over the grid; z is bounded by
 * construction (a probability or a margin magnitude) and the boundary rule only
 * ever looks inside that range.
 */
inline DensityModel fit_kde(std::span<const double> z, std::optional<double> bandwidth = std::nullopt,
                            std::size_t grid_size = kDefaultGridSize) {
    if (grid_size < 2) throw std::invalid_argument("grid size must be at least 2");
    if (z.size() < 2) throw std::invalid_argument("degenerate stratification variable");
    const auto [lo_it, hi_it] = std::minmax_element(z.begin(), z.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    if (!(hi > lo)) throw std::invalid_argument("degenerate stratification variable");
    if (bandwidth && !(*bandwidth > 0.0)) throw std::invalid_argument("bandwidth must be positive");

    DensityModel model;
    model.bandwidth = bandwidth ? *bandwidth : silverman_bandwidth(z);
    const double h = model.bandwidth;
    model.grid.resize(grid_size);
    model.density.assign(grid_size, 0.0);
    const double step = (hi - lo) / static_cast<double>(grid_size - 1);
    for (std::size_t j = 0; j < grid_size; ++j) model.grid[j] = lo + step * static_cast<double>(j);
    model.grid.back() = hi;

    // Kernels further than 8h contribute below double precision.
    std::vector<double> sorted(z.begin(), z.end());
    std::sort(sorted.begin(), sorted.end());
    const double reach = 8.0 * h;
    const double norm = 1.0 / (static_cast<double>(z.size()) * h * std::sqrt(2.0 * std::numbers::pi));
    for (std::size_t j = 0; j < grid_size; ++j) {
        const double x = model.grid[j];
        auto first = std::lower_bound(sorted.begin(), sorted.end(), x - reach);
        auto last = std::upper_bound(first, sorted.end(), x + reach);
        double acc = 0.0;
        for (auto it = first; it != last; ++it) {
            const double u = (x - *it) / h;
            acc += std::exp(-0.5 * u * u);
        }
        model.density[j] = acc * norm;
    }
    const double mass = model.integral();
    if (mass > 0.0)
        for (double& d : model.density) d /= mass;
    return model;
}

/**
 * Stratum boundaries where the cumulative of f(z)^exponent crosses k/K of its
 * total, k = 1..K-1. exponent 1/2 gives the cum sqrt(f) rule, 1/3 the cube-root
 * rule. Crossings are located by linear interpolation between grid points.
 */
inline std::vector<double> root_cumulative_boundaries(const DensityModel& model, int K,
                                                      double exponent) {
    if (K < 2) throw std::invalid_argument("K must be at least 2");
    if (!(exponent > 0.0)) throw std::invalid_argument("exponent must be positive");
    const std::size_t m = model.grid.size();
    if (m < 2 || model.density.size() != m) throw std::invalid_argument("invalid density model");
    if (static_cast<std::size_t>(K) > m - 1)
        throw std::invalid_argument("K exceeds the number of grid cells");

    std::vector<double> cumulative(m, 0.0);
    double prev = std::pow(std::max(model.density[0], 0.0), exponent);
    for (std::size_t j = 1; j < m; ++j) {
        const double cur = std::pow(std::max(model.density[j], 0.0), exponent);
        cumulative[j] = cumulative[j - 1] + 0.5 * (cur + prev) * (model.grid[j] - model.grid[j - 1]);
        prev = cur;
    }
    const double total = cumulative.back();
    if (!(total > 0.0)) throw std::invalid_argument("density has no mass");

    std::vector<double> boundaries;
    boundaries.reserve(static_cast<std::size_t>(K - 1));
    std::size_t j = 1;
    for (int k = 1; k < K; ++k) {
        const double target = total * static_cast<double>(k) / static_cast<double>(K);
        while (j < m - 1 && cumulative[j] < target) ++j;
        const double c0 = cumulative[j - 1];
        const double c1 = cumulative[j];
        const double t = c1 > c0 ? (target - c0) / (c1 - c0) : 0.5;
        boundaries.push_back(model.grid[j - 1] + t * (model.grid[j] - model.grid[j - 1]));
    }
    return boundaries;
}

}  // namespace strateval
