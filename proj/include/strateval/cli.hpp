/**
 * Command-line front end: `synth`, `stratify`, `estimate`, `sweep`.
 *
 * run_cli() is the whole program minus process plumbing so it can be driven
 * in-process by tests. Exit codes: 0 success, 1 usage error, 2 data error.
 */
#pragma once

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "allocation.hpp"
#include "dataset.hpp"
#include "density.hpp"
#include "estimation.hpp"
#include "harness.hpp"
#include "oracle.hpp"
#include "stratification.hpp"

namespace strateval::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

namespace detail {

const std::vector<std::string> kMethodTokens{"sqrt", "cbrt", "wtmn", "km", "gmm", "eqsz", "eqwd"};
const std::vector<std::string> kEstimateAllocTokens{"pro", "equ", "opt-a1", "opt-a2", "random"};
const std::vector<std::string> kSweepAllocTokens{"random", "pro", "equ", "opt-a1", "opt-a2"};

/// Writes to the named file, or to `fallback` when the path is empty or "-".
class Output {
public:
    Output(const std::string& path, std::ostream& fallback) {
        if (path.empty() || path == "-") {
            stream_ = &fallback;
        } else {
            file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
            if (!*file_) throw DataError("cannot write '" + path + "'");
            stream_ = file_.get();
        }
    }
    std::ostream& operator*() { return *stream_; }

private:
    std::unique_ptr<std::ofstream> file_;
    std::ostream* stream_ = nullptr;
};

struct StrataOptions {
    std::string method;
    int k = 0;
    std::string score_kind = "probabilistic";
    std::optional<double> bandwidth;
    std::size_t grid_size = kDefaultGridSize;
};

inline void add_strata_options(CLI::App* cmd, StrataOptions& o) {
    cmd->add_option("--method", o.method, "Stratification method")
        ->required()
        ->check(CLI::IsMember(kMethodTokens));
    cmd->add_option("--k", o.k, "Number of strata")->required()->check(CLI::Range(1, 1000000));
    cmd->add_option("--score-kind", o.score_kind, "Score column meaning")
        ->check(CLI::IsMember({"probabilistic", "margin"}));
    cmd->add_option("--bandwidth", o.bandwidth, "KDE bandwidth (default: Silverman)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--grid-size", o.grid_size, "KDE grid points")->check(CLI::Range(2, 100000000));
}

inline StrataPartition build_partition(const ScoredDataset& data, const StrataOptions& o,
                                       std::uint64_t seed) {
    const auto method = *parse_method(o.method);
    const auto z = derive_z(data);
    std::optional<DensityModel> density;
    if (uses_density(method)) density = fit_kde(z.values, o.bandwidth, o.grid_size);
    const auto strat_seed = mix_seed(seed, {kStratifySalt, static_cast<std::uint64_t>(method),
                                            static_cast<std::uint64_t>(o.k)});
    return stratify(z.values, method, o.k, strat_seed, density ? &*density : nullptr);
}

inline std::string format_optional(const std::optional<double>& v) {
    return v ? strateval::detail::format_double(*v) : std::string("NA");
}

}  // namespace detail

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Stratified-sampling estimation of classifier accuracy under a labeling budget",
                 "strateval"};
    app.require_subcommand(1);

    // synth
    std::string spec_path, synth_out;
    std::uint64_t synth_seed = 0;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic simulation CSV from a spec file");
    synth->add_option("--spec", spec_path, "Synthetic spec file")->required();
    synth->add_option("--seed", synth_seed, "Random seed")->required();
    synth->add_option("--out", synth_out, "Output CSV")->required();

    // stratify
    std::string strat_data, strat_out = "-";
    std::uint64_t strat_seed = 0;
    detail::StrataOptions strat_opts;
    auto* strat = app.add_subcommand("stratify", "Partition a scored dataset into strata");
    strat->add_option("--data", strat_data, "Scored CSV")->required();
    detail::add_strata_options(strat, strat_opts);
    strat->add_option("--seed", strat_seed, "Random seed")->required();
    strat->add_option("--out", strat_out, "Output CSV (id,stratum); default stdout");

    // estimate
    std::string est_data, est_alloc, est_out = "-";
    std::int64_t est_n = 0;
    std::int64_t est_n_ini = kDefaultInitialPerStratum;
    std::int64_t est_n_step = kDefaultStep;
    std::uint64_t est_seed = 0;
    bool no_truth = false;
    std::string est_sd_rule = "smoothed";
    detail::StrataOptions est_opts;
    auto* estimate = app.add_subcommand("estimate", "Estimate accuracy with one labeling budget");
    estimate->add_option("--data", est_data, "Scored CSV")->required();
    detail::add_strata_options(estimate, est_opts);
    estimate->add_option("--alloc", est_alloc, "Allocation policy")
        ->required()
        ->check(CLI::IsMember(detail::kEstimateAllocTokens));
    estimate->add_option("--n", est_n, "Labeling budget")->required()->check(CLI::Range(std::int64_t{2}, INT64_MAX));
    estimate->add_option("--n-ini", est_n_ini, "Pilot labels per stratum (opt-a1/opt-a2)")
        ->check(CLI::Range(std::int64_t{2}, INT64_MAX));
    estimate->add_option("--n-step", est_n_step, "Labels per iteration (opt-a2)")
        ->check(CLI::Range(std::int64_t{1}, INT64_MAX));
    estimate->add_option("--pilot-sd", est_sd_rule, "S_k estimate for opt-a1/opt-a2")
        ->check(CLI::IsMember({"smoothed", "unbiased"}));
    estimate->add_option("--seed", est_seed, "Random seed")->required();
    estimate->add_flag("--no-truth", no_truth, "Plan only: print the allocation without labeling");
    estimate->add_option("--out", est_out, "Output CSV; default stdout");

    // sweep
    std::string sweep_data, sweep_out, mvr_mode = "ratio-of-means";
    std::vector<std::string> sweep_methods, sweep_allocs;
    std::vector<int> sweep_ks{2, 3, 4, 5, 6, 7, 8, 9, 10};
    std::vector<std::int64_t> sweep_ns;
    std::string sweep_kind = "probabilistic";
    std::string sweep_sd_rule = "smoothed";
    ExperimentConfig cfg;
    auto* sweep = app.add_subcommand("sweep", "Run the Monte-Carlo replicate grid and write a report");
    sweep->add_option("--data", sweep_data, "Simulation CSV (with truth)")->required();
    sweep->add_option("--methods", sweep_methods, "Comma-separated stratification methods")
        ->required()
        ->delimiter(',')
        ->check(CLI::IsMember(detail::kMethodTokens));
    sweep->add_option("--alloc", sweep_allocs, "Comma-separated allocations")
        ->required()
        ->delimiter(',')
        ->check(CLI::IsMember(detail::kSweepAllocTokens));
    sweep->add_option("--k", sweep_ks, "Comma-separated K values (default 2..10)")
        ->delimiter(',')
        ->check(CLI::Range(1, 1000000));
    sweep->add_option("--n", sweep_ns, "Comma-separated budgets")->required()->delimiter(',')->check(
        CLI::Range(std::int64_t{2}, INT64_MAX));
    sweep->add_option("--runs", cfg.runs, "Replicates per cell")->check(CLI::Range(std::int64_t{2}, INT64_MAX));
    sweep->add_option("--seed", cfg.master_seed, "Master seed")->required();
    sweep->add_option("--out", sweep_out, "Report CSV")->required();
    sweep->add_option("--jobs", cfg.jobs, "Worker threads")->check(CLI::Range(1u, 1024u));
    sweep->add_option("--n-ini", cfg.n_ini, "Pilot labels per stratum")->check(CLI::Range(std::int64_t{2}, INT64_MAX));
    sweep->add_option("--n-step", cfg.n_step, "Labels per OPT-A2 iteration")
        ->check(CLI::Range(std::int64_t{1}, INT64_MAX));
    sweep->add_option("--pilot-sd", sweep_sd_rule, "S_k estimate for opt-a1/opt-a2")
        ->check(CLI::IsMember({"smoothed", "unbiased"}));
    sweep->add_option("--mvr", mvr_mode, "MVR aggregation")
        ->check(CLI::IsMember({"ratio-of-means", "mean-of-ratios"}));
    sweep->add_option("--score-kind", sweep_kind, "Score column meaning")
        ->check(CLI::IsMember({"probabilistic", "margin"}));
    sweep->add_option("--bandwidth", cfg.bandwidth, "KDE bandwidth")->check(CLI::PositiveNumber);
    sweep->add_option("--grid-size", cfg.grid_size, "KDE grid points")->check(CLI::Range(2, 100000000));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*synth) {
            const auto spec = load_synthetic_spec(spec_path);
            write_scored_csv(synth_out, generate_synthetic(spec, synth_seed));
        } else if (*strat) {
            const auto data = load_scored_csv(strat_data, parse_score_kind(strat_opts.score_kind)).without_truth();
            const auto p = detail::build_partition(data, strat_opts, strat_seed);
            detail::Output sink(strat_out, out);
            *sink << "id,stratum\n";
            for (std::size_t i = 0; i < data.size(); ++i) *sink << data[i].id << ',' << p.assignment[i] << '\n';
            if (p.merged_empty)
                err << "warning: empty strata merged; " << p.K << " strata remain\n";
        } else if (*estimate) {
            const auto full = load_scored_csv(est_data, parse_score_kind(est_opts.score_kind));
            const auto scores = full.without_truth();
            const auto alloc = *parse_allocation(est_alloc);
            detail::Output sink(est_out, out);
            std::optional<StrataPartition> partition;
            if (alloc != Allocation::random || no_truth)
                partition = detail::build_partition(scores, est_opts, est_seed);

            if (no_truth) {
                std::vector<std::int64_t> n_k;
                switch (alloc) {
                    case Allocation::pro: n_k = allocate_proportional(partition->weights, est_n).n_k; break;
                    case Allocation::equ: n_k = allocate_equal(partition->K, est_n).n_k; break;
                    case Allocation::opt_a1:
                    case Allocation::opt_a2:
                        if (est_n < est_n_ini * partition->K)
                            throw std::invalid_argument("n must be at least K*n_ini");
                        n_k.assign(static_cast<std::size_t>(partition->K), est_n_ini);
                        break;
                    case Allocation::random: n_k.assign(static_cast<std::size_t>(partition->K), 0); break;
                }
                *sink << "stratum,size,weight,n_k\n";
                for (int k = 0; k < partition->K; ++k) {
                    const auto uk = static_cast<std::size_t>(k);
                    *sink << k << ',' << partition->sizes[uk] << ','
                          << strateval::detail::format_double(partition->weights[uk]) << ',' << n_k[uk] << '\n';
                }
                return kExitOk;
            }

            auto oracle = make_oracle(full, est_n);
            const auto sample_seed = mix_seed(est_seed, {1});
            const auto sd_rule = est_sd_rule == "unbiased" ? SdRule::unbiased : SdRule::smoothed;
            EstimateResult result;
            switch (alloc) {
                case Allocation::random: result = random_estimate(oracle, est_n, sample_seed); break;
                case Allocation::pro:
                    result = stratified_estimate(oracle, *partition,
                                                 allocate_proportional(partition->weights, est_n), sample_seed);
                    break;
                case Allocation::equ:
                    result = stratified_estimate(oracle, *partition, allocate_equal(partition->K, est_n),
                                                 sample_seed);
                    break;
                case Allocation::opt_a1:
                    result = opt_a1(oracle, *partition, est_n, est_n_ini, sample_seed, {}, sd_rule);
                    break;
                case Allocation::opt_a2:
                    result = opt_a2(oracle, *partition, est_n, est_n_ini, est_n_step, sample_seed, {}, sd_rule);
                    break;
            }
            *sink << "estimate,variance_estimate,samples_used\n"
                  << strateval::detail::format_double(result.estimate) << ','
                  << detail::format_optional(result.variance) << ',' << oracle.consumed() << '\n';
        } else if (*sweep) {
            const auto data = load_scored_csv(sweep_data, parse_score_kind(sweep_kind));
            cfg.methods.clear();
            for (const auto& m : sweep_methods) cfg.methods.push_back(*parse_method(m));
            cfg.allocations.clear();
            for (const auto& a : sweep_allocs) cfg.allocations.push_back(*parse_allocation(a));
            cfg.ks = sweep_ks;
            cfg.ns = sweep_ns;
            cfg.sd_rule = sweep_sd_rule == "unbiased" ? SdRule::unbiased : SdRule::smoothed;
            cfg.mvr_mode = mvr_mode == "mean-of-ratios" ? MvrMode::mean_of_ratios : MvrMode::ratio_of_means;
            const auto report = run_experiment(data, cfg);
            detail::Output sink(sweep_out, out);
            write_report_csv(*sink, report);
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitOk;
}

}  // namespace strateval::cli
