/**
 * Monte-Carlo experiment harness.
 *
 * Synthetic simulation sets with exact per-stratum accuracies, seeded replicate
 * grids over (method, allocation, K, n), MAE/MVR aggregation, the labels needed
 * for a target error, and the accuracy-dependence study.
 *
 * Seeding: replicate r of grid cell c uses mix_seed(master, {c, r}); its
 * stratified and random-reference streams are mix_seed(that, {1}) and
 * mix_seed(that, {2}). KM/GMM stratification for a (method, K) pair uses
 * mix_seed(master, {kStratifySalt, method, K}). Results are reduced in
 * replicate order, so the report does not depend on thread count.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <exception>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "allocation.hpp"
#include "dataset.hpp"
#include "density.hpp"
#include "estimation.hpp"
#include "oracle.hpp"
#include "random.hpp"
#include "stratification.hpp"

namespace strateval {

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

struct SyntheticStratum {
    double weight = 0.0;
    double accuracy = 0.0;
    double z_mean = 0.0;
    double z_sd = 0.0;
};

struct SyntheticSpec {
    std::size_t N = 0;
    std::vector<SyntheticStratum> strata;
    ScoreKind kind = ScoreKind::probabilistic;

    void validate() const {
        if (N < 1) throw DataError("synthetic spec: N must be positive");
        if (strata.empty()) throw DataError("synthetic spec: no strata");
        double wsum = 0.0;
        for (const auto& s : strata) {
            if (!(s.weight > 0.0)) throw DataError("synthetic spec: stratum weights must be positive");
            if (!(s.accuracy >= 0.0 && s.accuracy <= 1.0))
                throw DataError("synthetic spec: stratum accuracy outside [0,1]");
            if (!(s.z_sd >= 0.0) || !std::isfinite(s.z_mean))
                throw DataError("synthetic spec: invalid z distribution");
            wsum += s.weight;
        }
        if (std::abs(wsum - 1.0) > 1e-9) throw DataError("synthetic spec: weights must sum to 1");
    }

    /// Per-stratum instance counts: round(W_k N), remainder to stratum 0.
    std::vector<std::size_t> stratum_sizes() const {
        std::vector<std::int64_t> sizes;
        std::int64_t total = 0;
        for (const auto& s : strata) {
            sizes.push_back(std::llround(s.weight * static_cast<double>(N)));
            total += sizes.back();
        }
        sizes[0] += static_cast<std::int64_t>(N) - total;
        std::vector<std::size_t> out;
        for (auto v : sizes) {
            if (v < 1) throw DataError("synthetic spec: a stratum would be empty");
            out.push_back(static_cast<std::size_t>(v));
        }
        return out;
    }

    /// Realized strata: exact sizes and accuracies round(A_k N_k)/N_k.
    std::vector<StratumTruth> truth() const {
        const auto sizes = stratum_sizes();
        std::vector<StratumTruth> out;
        for (std::size_t k = 0; k < strata.size(); ++k) {
            const auto nk = static_cast<double>(sizes[k]);
            const double correct = static_cast<double>(std::llround(strata[k].accuracy * nk));
            out.push_back({nk / static_cast<double>(N), correct / nk, nk});
        }
        return out;
    }
};

/**
 * Parse the line-oriented spec format:
 *
 *     # comment
 *     N=10000
 *     kind=probabilistic          (optional; or margin)
 *     stratum=W,A,z_mean,z_sd     (one line per stratum)
 */
inline SyntheticSpec parse_synthetic_spec(std::istream& in, const std::string& source = "<spec>") {
    SyntheticSpec spec;
    bool have_n = false;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view text = detail::trim(line);
        if (text.empty() || text.front() == '#') continue;
        const auto where = [&] { return source + ":" + std::to_string(lineno) + ": "; };
        const auto eq = text.find('=');
        if (eq == std::string_view::npos) throw DataError(where() + "expected key=value");
        const auto key = detail::trim(text.substr(0, eq));
        const auto value = detail::trim(text.substr(eq + 1));
        if (key == "N") {
            const auto n = detail::parse_number<std::int64_t>(value);
            if (!n || *n < 1) throw DataError(where() + "N must be a positive integer");
            spec.N = static_cast<std::size_t>(*n);
            have_n = true;
        } else if (key == "kind") {
            try {
                spec.kind = parse_score_kind(value);
            } catch (const std::invalid_argument& e) {
                throw DataError(where() + e.what());
            }
        } else if (key == "stratum") {
            const auto fields = detail::split_commas(value);
            if (fields.size() != 4) throw DataError(where() + "stratum needs W,A,z_mean,z_sd");
            double v[4];
            for (std::size_t j = 0; j < 4; ++j) {
                const auto x = detail::parse_number<double>(fields[j]);
                if (!x) throw DataError(where() + "non-numeric value '" + std::string(fields[j]) + "'");
                v[j] = *x;
            }
            spec.strata.push_back({v[0], v[1], v[2], v[3]});
        } else {
            throw DataError(where() + "unknown key '" + std::string(key) + "'");
        }
    }
    if (!have_n) throw DataError(source + ": missing N=");
    spec.validate();
    return spec;
}

inline SyntheticSpec load_synthetic_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    return parse_synthetic_spec(in, path);
}

inline void write_synthetic_spec(std::ostream& out, const SyntheticSpec& spec) {
    out << "N=" << spec.N << '\n' << "kind=" << to_string(spec.kind) << '\n';
    for (const auto& s : spec.strata)
        out << "stratum=" << detail::format_double(s.weight) << ',' << detail::format_double(s.accuracy)
            << ',' << detail::format_double(s.z_mean) << ',' << detail::format_double(s.z_sd) << '\n';
}

struct SyntheticDataset {
    ScoredDataset data;
    /// Generating stratum of each row.
    std::vector<int> source_stratum;
};

namespace detail {

template <class T>
void shuffle_in_place(std::vector<T>& v, Stream& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.index(i)]);
}

/// Normal draw truncated to [lo, hi] by rejection; clamps if the window is far in a tail.
inline double truncated_normal(Stream& rng, double mean, double sd, double lo, double hi) {
    if (sd == 0.0) return std::clamp(mean, lo, hi);
    for (int attempt = 0; attempt < 1000; ++attempt) {
        const double x = rng.normal(mean, sd);
        if (x >= lo && x <= hi) return x;
    }
    return std::clamp(mean, lo, hi);
}

}  // namespace detail

/**
 * Build a simulation set from a spec. Stratum k receives round(W_k N) rows
 * (remainder to stratum 0) of which exactly round(A_k N_k) are correct
 * predictions, at seeded positions. The predicted-class probability (or margin
 * magnitude) is drawn from the stratum's normal distribution truncated to
 * [0.5, 1] (probabilistic, binary labels {0,1}) or [0, inf) (margin, labels
 * {-1,+1}). Rows are shuffled and numbered 1..N.
 */
inline SyntheticDataset generate_synthetic_layout(const SyntheticSpec& spec, std::uint64_t seed) {
    spec.validate();
    const auto sizes = spec.stratum_sizes();
    Stream rng(seed);
    const bool prob = spec.kind == ScoreKind::probabilistic;
    const double lo = prob ? 0.5 : 0.0;
    const double hi = prob ? 1.0 : std::numeric_limits<double>::infinity();

    struct Row {
        double z;
        int correct;
        int stratum;
    };
    std::vector<Row> rows;
    rows.reserve(spec.N);
    for (std::size_t k = 0; k < sizes.size(); ++k)
        for (std::size_t i = 0; i < sizes[k]; ++i)
            rows.push_back({detail::truncated_normal(rng, spec.strata[k].z_mean, spec.strata[k].z_sd, lo, hi),
                            0, static_cast<int>(k)});
    std::size_t offset = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
        const auto correct = static_cast<std::size_t>(
            std::llround(spec.strata[k].accuracy * static_cast<double>(sizes[k])));
        std::vector<int> bits(sizes[k], 0);
        std::fill(bits.begin(), bits.begin() + static_cast<std::ptrdiff_t>(correct), 1);
        detail::shuffle_in_place(bits, rng);
        for (std::size_t i = 0; i < sizes[k]; ++i) rows[offset + i].correct = bits[i];
        offset += sizes[k];
    }
    detail::shuffle_in_place(rows, rng);

    std::vector<InstanceRecord> records;
    std::vector<int> truth;
    std::vector<int> source;
    records.reserve(rows.size());
    truth.reserve(rows.size());
    source.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const bool positive = rng.uniform() < 0.5;
        const auto& r = rows[i];
        InstanceRecord rec;
        rec.id = static_cast<std::int64_t>(i + 1);
        if (prob) {
            rec.predicted_label = positive ? 1 : 0;
            rec.raw_score = positive ? r.z : 1.0 - r.z;
            truth.push_back(r.correct ? rec.predicted_label : 1 - rec.predicted_label);
        } else {
            rec.predicted_label = positive ? 1 : -1;
            rec.raw_score = positive ? r.z : -r.z;
            truth.push_back(r.correct ? rec.predicted_label : -rec.predicted_label);
        }
        records.push_back(rec);
        source.push_back(r.stratum);
    }
    return {ScoredDataset(std::move(records), spec.kind, std::move(truth)), std::move(source)};
}

inline ScoredDataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
    return generate_synthetic_layout(spec, seed).data;
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

enum class Allocation { random, pro, equ, opt_a1, opt_a2 };

inline std::string_view to_string(Allocation a) {
    switch (a) {
        case Allocation::random: return "random";
        case Allocation::pro: return "pro";
        case Allocation::equ: return "equ";
        case Allocation::opt_a1: return "opt-a1";
        case Allocation::opt_a2: return "opt-a2";
    }
    return "?";
}

inline std::optional<Allocation> parse_allocation(std::string_view token) {
    for (Allocation a : {Allocation::random, Allocation::pro, Allocation::equ, Allocation::opt_a1,
                         Allocation::opt_a2})
        if (to_string(a) == token) return a;
    return std::nullopt;
}

/// How the mean variance ratio is aggregated over replicates.
enum class MvrMode { ratio_of_means, mean_of_ratios };

inline constexpr std::uint64_t kStratifySalt = 0x5354524154ULL;

struct ExperimentConfig {
    std::vector<Method> methods{Method::eqsz};
    std::vector<Allocation> allocations{Allocation::pro, Allocation::random};
    std::vector<int> ks{2, 3, 4, 5, 6, 7, 8, 9, 10};
    std::vector<std::int64_t> ns{100};
    std::int64_t runs = 3000;
    std::uint64_t master_seed = 0;
    std::int64_t n_ini = kDefaultInitialPerStratum;
    std::int64_t n_step = kDefaultStep;
    SdRule sd_rule = SdRule::smoothed;
    std::optional<double> bandwidth;
    std::size_t grid_size = kDefaultGridSize;
    MvrMode mvr_mode = MvrMode::ratio_of_means;
    unsigned jobs = 1;
    /// Execute replicates last-to-first; the report must not change.
    bool reverse_replicate_order = false;

    void validate() const {
        if (methods.empty() || allocations.empty() || ks.empty() || ns.empty())
            throw std::invalid_argument("experiment grid is empty");
        if (runs < 2) throw std::invalid_argument("runs must be at least 2");
        for (int k : ks)
            if (k < 1) throw std::invalid_argument("K must be positive");
        for (auto n : ns)
            if (n < 2) throw std::invalid_argument("n must be at least 2");
        if (n_ini < 2) throw std::invalid_argument("n_ini must be at least 2");
        if (n_step < 1) throw std::invalid_argument("n_step must be at least 1");
        if (jobs < 1) throw std::invalid_argument("jobs must be at least 1");
    }
};

struct CellResult {
    Method method = Method::eqsz;
    Allocation allocation = Allocation::pro;
    int K = 0;
    /// Strata actually used after empty-stratum merging.
    int strata = 0;
    std::int64_t n = 0;
    std::int64_t runs = 0;
    double mae_pct = 0.0;
    double mvr = 0.0;
    double mean_estimate = 0.0;
    double empirical_var = 0.0;
    std::int64_t excluded_runs = 0;
    double mean_var_stratified = 0.0;
    double mean_var_random = 0.0;
    /// Delta-method standard error of the ratio-of-means MVR.
    double mvr_se = 0.0;
    double true_accuracy = 0.0;
};

struct ExperimentReport {
    std::vector<CellResult> cells;
};

namespace detail {

struct ReplicateOutcome {
    double estimate = 0.0;
    std::optional<double> var_stratified;
    double var_random = 0.0;
};

struct CellPlan {
    Method method;
    Allocation allocation;
    int K;
    std::int64_t n;
    const StratumFrame* frame;
    int strata;
    std::vector<std::int64_t> fixed_plan;
};

inline ReplicateOutcome run_replicate(const CellPlan& cell, const ExperimentConfig& cfg,
                                      const std::shared_ptr<const LabelTable>& table,
                                      std::uint64_t seed) {
    ReplicateOutcome out;
    const std::uint64_t s_strat = mix_seed(seed, {1});
    const std::uint64_t s_rand = mix_seed(seed, {2});
    BudgetedOracle oracle(table, cell.n);
    EstimateResult est;
    switch (cell.allocation) {
        case Allocation::random: est = random_estimate(oracle, cell.n, s_strat); break;
        case Allocation::pro:
        case Allocation::equ:
            est = stratified_estimate(oracle, *cell.frame, std::span<const std::int64_t>(cell.fixed_plan), s_strat);
            break;
        case Allocation::opt_a1: est = opt_a1(oracle, *cell.frame, cell.n, cfg.n_ini, s_strat, {}, cfg.sd_rule); break;
        case Allocation::opt_a2:
            est = opt_a2(oracle, *cell.frame, cell.n, cfg.n_ini, cfg.n_step, s_strat, {}, cfg.sd_rule);
            break;
    }
    BudgetedOracle reference(table, cell.n);
    const auto ref = random_estimate(reference, cell.n, s_rand);
    out.estimate = est.estimate;
    out.var_stratified = est.variance;
    out.var_random = ref.variance.value_or(0.0);
    return out;
}

inline CellResult aggregate(const CellPlan& cell, const ExperimentConfig& cfg,
                            std::span<const ReplicateOutcome> reps, double truth) {
    CellResult c;
    c.method = cell.method;
    c.allocation = cell.allocation;
    c.K = cell.K;
    c.strata = cell.strata;
    c.n = cell.n;
    c.runs = static_cast<std::int64_t>(reps.size());
    c.true_accuracy = truth;
    const auto r = static_cast<double>(reps.size());

    double abs_err = 0.0;
    double sum = 0.0;
    for (const auto& o : reps) {
        abs_err += std::abs(o.estimate - truth);
        sum += o.estimate;
    }
    c.mae_pct = 100.0 * abs_err / r;
    c.mean_estimate = sum / r;
    double ss = 0.0;
    for (const auto& o : reps) ss += (o.estimate - c.mean_estimate) * (o.estimate - c.mean_estimate);
    c.empirical_var = ss / (r - 1.0);

    std::vector<std::pair<double, double>> pairs;
    for (const auto& o : reps) {
        const bool usable = o.var_stratified.has_value() &&
                            (cfg.mvr_mode == MvrMode::ratio_of_means || o.var_random > 0.0);
        if (usable)
            pairs.emplace_back(*o.var_stratified, o.var_random);
        else
            ++c.excluded_runs;
    }
    const auto m = static_cast<double>(pairs.size());
    if (pairs.empty()) {
        c.mvr = c.mvr_se = c.mean_var_stratified = c.mean_var_random = std::nan("");
        return c;
    }
    double ys = 0.0;
    double xs = 0.0;
    double ratios = 0.0;
    for (const auto& [y, x] : pairs) {
        ys += y;
        xs += x;
        if (x > 0.0) ratios += y / x;
    }
    c.mean_var_stratified = ys / m;
    c.mean_var_random = xs / m;
    const double rom = c.mean_var_random > 0.0 ? c.mean_var_stratified / c.mean_var_random : std::nan("");
    c.mvr = cfg.mvr_mode == MvrMode::ratio_of_means ? rom : ratios / m;

    if (pairs.size() > 1 && c.mean_var_random > 0.0) {
        double syy = 0.0, sxx = 0.0, sxy = 0.0;
        for (const auto& [y, x] : pairs) {
            syy += (y - c.mean_var_stratified) * (y - c.mean_var_stratified);
            sxx += (x - c.mean_var_random) * (x - c.mean_var_random);
            sxy += (y - c.mean_var_stratified) * (x - c.mean_var_random);
        }
        syy /= m - 1.0;
        sxx /= m - 1.0;
        sxy /= m - 1.0;
        const double lin = std::max(0.0, syy - 2.0 * rom * sxy + rom * rom * sxx);
        c.mvr_se = std::sqrt(lin / m) / c.mean_var_random;
    }
    return c;
}

}  // namespace detail

/**
 * Run the replicate grid on a simulation set. Cells are ordered
 * method x allocation x K x n. Each replicate gets a fresh oracle with budget n
 * for the estimate under test and another for a same-n random reference.
 */
inline ExperimentReport run_experiment(const ScoredDataset& data, const ExperimentConfig& cfg) {
    cfg.validate();
    auto table = std::make_shared<const LabelTable>(data);
    const double truth = table->population_accuracy();
    const auto z = derive_z(data.without_truth());

    std::optional<DensityModel> density;
    const bool need_density = std::any_of(cfg.methods.begin(), cfg.methods.end(), uses_density);
    if (need_density) density = fit_kde(z.values, cfg.bandwidth, cfg.grid_size);

    std::map<std::pair<std::size_t, int>, StratumFrame> frames;
    std::map<std::pair<std::size_t, int>, StrataPartition> partitions;
    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi)
        for (int k : cfg.ks) {
            const auto seed = mix_seed(cfg.master_seed,
                                       {kStratifySalt, static_cast<std::uint64_t>(cfg.methods[mi]),
                                        static_cast<std::uint64_t>(k)});
            auto p = stratify(z.values, cfg.methods[mi], k, seed, density ? &*density : nullptr);
            frames.emplace(std::pair{mi, k}, StratumFrame::from(p));
            partitions.emplace(std::pair{mi, k}, std::move(p));
        }

    std::vector<detail::CellPlan> cells;
    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi)
        for (Allocation alloc : cfg.allocations)
            for (int k : cfg.ks)
                for (std::int64_t n : cfg.ns) {
                    const auto& part = partitions.at({mi, k});
                    detail::CellPlan cell{cfg.methods[mi], alloc, k, n, &frames.at({mi, k}), part.K, {}};
                    const auto where = [&] {
                        return std::string(to_string(cell.method)) + "/" + std::string(to_string(alloc)) +
                               " K=" + std::to_string(k) + " n=" + std::to_string(n) + ": ";
                    };
                    if (alloc == Allocation::pro || alloc == Allocation::equ) {
                        if (n < kMinPerStratum * part.K)
                            throw std::invalid_argument(where() + "n must be at least 2K");
                        cell.fixed_plan = plan_for(alloc == Allocation::pro ? AllocationPolicy::proportional
                                                                            : AllocationPolicy::equal,
                                                   part, n)
                                              .n_k;
                    } else if (alloc == Allocation::opt_a1 || alloc == Allocation::opt_a2) {
                        if (n < cfg.n_ini * part.K) throw std::invalid_argument(where() + "n must be at least K*n_ini");
                    }
                    cells.push_back(std::move(cell));
                }

    ExperimentReport report;
    const auto runs = static_cast<std::size_t>(cfg.runs);
    std::vector<detail::ReplicateOutcome> outcomes(runs);
    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
        const auto& cell = cells[ci];
        const std::size_t jobs = std::min<std::size_t>(cfg.jobs, runs);
        std::vector<std::exception_ptr> failures(jobs);
        const auto work = [&](std::size_t slot, std::size_t begin, std::size_t end) {
            try {
                for (std::size_t j = begin; j < end; ++j) {
                    const std::size_t r = cfg.reverse_replicate_order ? runs - 1 - j : j;
                    outcomes[r] = detail::run_replicate(cell, cfg, table, mix_seed(cfg.master_seed, {ci, r}));
                }
            } catch (...) {
                failures[slot] = std::current_exception();
            }
        };
        if (jobs <= 1) {
            work(0, 0, runs);
        } else {
            std::vector<std::jthread> pool;
            const std::size_t chunk = (runs + jobs - 1) / jobs;
            for (std::size_t t = 0; t < jobs; ++t) {
                const std::size_t b = t * chunk;
                const std::size_t e = std::min(runs, b + chunk);
                if (b < e) pool.emplace_back(work, t, b, e);
            }
        }
        for (const auto& f : failures)
            if (f) std::rethrow_exception(f);
        report.cells.push_back(detail::aggregate(cell, cfg, outcomes, truth));
    }
    return report;
}

inline void write_report_csv(std::ostream& out, const ExperimentReport& report) {
    out << "method,allocation,K,n,runs,mae_pct,mvr,mean_estimate,empirical_var,excluded_runs\n";
    for (const auto& c : report.cells)
        out << to_string(c.method) << ',' << to_string(c.allocation) << ',' << c.K << ',' << c.n << ','
            << c.runs << ',' << detail::format_double(c.mae_pct) << ',' << detail::format_double(c.mvr)
            << ',' << detail::format_double(c.mean_estimate) << ','
            << detail::format_double(c.empirical_var) << ',' << c.excluded_runs << '\n';
}

struct MaePoint {
    std::int64_t n = 0;
    double mae_pct = 0.0;
};

/// MAE against n for one (method, allocation, K) slice of a report, ascending n.
inline std::vector<MaePoint> mae_curve(const ExperimentReport& report, Method method,
                                       Allocation allocation, int K) {
    std::vector<MaePoint> out;
    for (const auto& c : report.cells)
        if (c.method == method && c.allocation == allocation && c.K == K) out.push_back({c.n, c.mae_pct});
    std::sort(out.begin(), out.end(), [](const MaePoint& a, const MaePoint& b) { return a.n < b.n; });
    return out;
}

/// Smallest swept n whose MAE (percentage points) is at most the target; nullopt if none.
inline std::optional<std::int64_t> n_for_error_target(std::span<const MaePoint> curve,
                                                      double target_pct = 1.0) {
    std::optional<std::int64_t> best;
    for (const auto& p : curve)
        if (p.mae_pct <= target_pct && (!best || p.n < *best)) best = p.n;
    return best;
}

/**
 * Rescale a spec to overall accuracy `level` keeping its z structure: every
 * stratum accuracy is multiplied by level / A_base.
 */
inline SyntheticSpec scale_accuracy(const SyntheticSpec& base, double level) {
    double a_base = 0.0;
    for (const auto& s : base.strata) a_base += s.weight * s.accuracy;
    if (!(level >= 0.0 && level <= 1.0)) throw std::invalid_argument("accuracy level outside [0,1]");
    if (!(a_base > 0.0)) throw std::invalid_argument("base spec has zero accuracy");
    const double factor = level / a_base;
    SyntheticSpec out = base;
    for (auto& s : out.strata) {
        s.accuracy *= factor;
        if (s.accuracy > 1.0) throw std::invalid_argument("accuracy level unreachable by scaling");
    }
    return out;
}

struct AccuracyLevelResult {
    double level = 0.0;
    double realized_accuracy = 0.0;
    std::vector<CellResult> cells;
};

/**
 * For each accuracy level, generate a dataset with the same z structure
 * (identical generator seed) and scaled stratum accuracies, then run the grid
 * of `config` restricted to OPT-A2 with replicate seeds derived per level.
 */
inline std::vector<AccuracyLevelResult> accuracy_dependence_study(const SyntheticSpec& base,
                                                                  std::span<const double> levels,
                                                                  const ExperimentConfig& config,
                                                                  std::uint64_t data_seed) {
    if (levels.empty()) throw std::invalid_argument("no accuracy levels");
    std::vector<AccuracyLevelResult> out;
    for (std::size_t li = 0; li < levels.size(); ++li) {
        const auto spec = scale_accuracy(base, levels[li]);
        const auto data = generate_synthetic(spec, data_seed);
        ExperimentConfig cfg = config;
        cfg.allocations = {Allocation::opt_a2};
        cfg.master_seed = mix_seed(config.master_seed, {li});
        auto report = run_experiment(data, cfg);
        AccuracyLevelResult row;
        row.level = levels[li];
        row.realized_accuracy = LabelTable(data).population_accuracy();
        row.cells = std::move(report.cells);
        out.push_back(std::move(row));
    }
    return out;
}

}  // namespace strateval
