// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "strateval/strateval.hpp"

using namespace strateval;
namespace fs = std::filesystem;

namespace {

constexpr std::int64_t kRuns = 3000;

struct Verdict {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    }
    void note(const std::string& what) {
        if (!detail.empty()) detail += "; ";
        detail += what;
    }
};

std::string fmt(double v, int prec = 4) {
    std::ostringstream s;
    s.precision(prec);
    s << v;
    return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double mean(const std::vector<double>& x) { return std::accumulate(x.begin(), x.end(), 0.0) / x.size(); }

// Per-stratum truth of a partition, by labelling the whole set (evaluation side only).
std::vector<StratumTruth> partition_truth(const ScoredDataset& data, const StrataPartition& p) {
    auto o = make_oracle(data, static_cast<std::int64_t>(data.size()));
    std::vector<double> correct(static_cast<std::size_t>(p.K), 0.0);
    for (std::size_t i = 0; i < data.size(); ++i) correct[static_cast<std::size_t>(p.assignment[i])] += o.query_row(i);
    std::vector<StratumTruth> out;
    for (int k = 0; k < p.K; ++k) {
        const auto uk = static_cast<std::size_t>(k);
        out.push_back({p.weights[uk], correct[uk] / static_cast<double>(p.sizes[uk]), static_cast<double>(p.sizes[uk])});
    }
    return out;
}

// Strata well separated in z so EQSZ with K = #strata recovers them exactly.
SyntheticSpec separated(const std::vector<double>& w, const std::vector<double>& a, std::size_t n) {
    SyntheticSpec s;
    s.N = n;
    const std::size_t k = w.size();
    for (std::size_t j = 0; j < k; ++j) {
        const double centre = 0.55 + 0.4 * (static_cast<double>(j) + 0.5) / static_cast<double>(k);
        s.strata.push_back({w[j], a[j], centre, 0.1 / (6.0 * static_cast<double>(k))});
    }
    return s;
}

bool recovers(const SyntheticDataset& g, const StrataPartition& p) {
    for (std::size_t i = 0; i < p.assignment.size(); ++i)
        if (p.assignment[i] != g.source_stratum[i]) return false;
    return true;
}

// ---------------------------------------------------------------------------

Verdict criterion1() {
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    Stream rng(1);
    double worst12 = 0.0, worst13 = 0.0, worst_case2 = 0.0, worst_lemma = 0.0;
    int nonnegative_case2 = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int K = 2 + static_cast<int>(rng.index(9));
        std::vector<double> w(static_cast<std::size_t>(K));
        for (auto& x : w) x = 0.01 + rng.uniform();
        const double tw = std::accumulate(w.begin(), w.end(), 0.0);
        std::vector<StratumTruth> s;
        for (double x : w) s.push_back({x / tw, rng.uniform(), 0});
        const double n = 2.0 + static_cast<double>(rng.index(1000));
        try {
            const auto d = variance_decomposition(s, n);
            // Independent right-hand sides of both gap identities.
            double a = 0.0, sm = 0.0;
            for (const auto& st : s) {
                a += st.weight * st.accuracy;
                sm += st.weight * std::sqrt(st.accuracy * (1 - st.accuracy));
            }
            double r12 = 0.0, r13 = 0.0, vpro = 0.0;
            for (const auto& st : s) {
                const double sk = std::sqrt(st.accuracy * (1 - st.accuracy));
                r12 += st.weight * (st.accuracy - a) * (st.accuracy - a) / n;
                r13 += st.weight * (sk - sm) * (sk - sm) / n;
                vpro += st.weight * sk * sk / n;
            }
            const double vr = a * (1 - a) / n, vopt = sm * sm / n;
            worst12 = std::max({worst12, std::abs(vr - vpro - r12), std::abs(d.gap_random_minus_pro - r12)});
            worst13 = std::max({worst13, std::abs(vpro - vopt - r13), std::abs(d.gap_pro_minus_opt - r13)});
        } catch (const std::logic_error&) {
            worst12 = worst13 = 1.0;
        }

        // Case 2: equal A_k, exact sizes.
        std::vector<StratumTruth> c2;
        const double a0 = 0.05 + 0.9 * rng.uniform();
        for (int k = 0; k < K; ++k) c2.push_back({0, a0, static_cast<double>(2 + rng.index(60))});
        const auto g = case2_exact_gap(c2, n);
        double population = 0.0, vpro = 0.0;
        for (const auto& st : c2) population += st.size;
        for (const auto& st : c2) vpro += st.size / population * st.size / (st.size - 1) * a0 * (1 - a0) / n;
        const double direct = population / (population - 1) * a0 * (1 - a0) / n - vpro;
        worst_case2 = std::max({worst_case2, std::abs(g.gap - direct),
                                std::abs(direct - g.equal_accuracy_closed_form.value_or(1e9))});
        if (!(g.gap < 0.0)) ++nonnegative_case2;

        // S^2 = N/(N-1) A(1-A) on a random 0/1 vector.
        std::vector<int> bits(2 + rng.index(200));
        for (auto& b : bits) b = rng.uniform() < 0.3 ? 1 : 0;
        const double A = true_accuracy(bits);
        worst_lemma = std::max(worst_lemma, std::abs(oracles::direct_bit_variance(bits) -
                                                     finite_population_variance(A, static_cast<double>(bits.size()))));
    }
    const double secs = seconds_since(t0);
    v.require(worst12 <= 1e-12, "random-pro gap max err " + fmt(worst12));
    v.require(worst13 <= 1e-12, "pro-opt gap max err " + fmt(worst13));
    v.require(worst_case2 <= 1e-12, "case-2 max err " + fmt(worst_case2));
    v.require(nonnegative_case2 == 0, std::to_string(nonnegative_case2) + " non-negative case-2 gaps");
    v.require(worst_lemma <= 1e-12, "S^2 identity max err " + fmt(worst_lemma));
    v.require(secs < 1.0, "runtime " + fmt(secs) + " s");
    v.note("max errors " + fmt(worst12, 2) + "/" + fmt(worst13, 2) + "/" + fmt(worst_case2, 2) + "/" +
           fmt(worst_lemma, 2) + ", " + fmt(secs, 2) + " s");
    return v;
}

struct AllocationRun {
    std::string name;
    std::vector<double> estimates;
    std::vector<double> variances;
    double v_theory = 0.0;
};

// Criteria 2 and 3 share the replicate runs.
std::vector<AllocationRun> criterion23_runs() {
    const auto spec = separated({0.5, 0.5}, {0.6, 0.9}, 10000);
    const auto g = generate_synthetic_layout(spec, 2024);
    const auto z = derive_z(g.data);
    const auto p = stratify_eqsz(z.values, 2);
    if (!recovers(g, p)) throw std::runtime_error("EQSZ did not recover the generating strata");
    const auto truth = partition_truth(g.data, p);
    const auto table = std::make_shared<const LabelTable>(g.data);
    const auto frame = StratumFrame::from(p);
    const double A = table->population_accuracy();
    constexpr std::int64_t n = 100;

    const auto pro = allocate_proportional(p.weights, n);
    const auto equ = allocate_equal(p.K, n);
    std::vector<AllocationRun> runs{
        {"RANDOM", {}, {}, theoretical_variance_random(A, 10000, n)},
        {"PRO", {}, {}, allocation_variance(truth, n, AllocationPolicy::proportional)},
        {"EQU", {}, {}, allocation_variance(truth, n, AllocationPolicy::equal)},
        {"OPT-A1", {}, {}, allocation_variance(truth, n, AllocationPolicy::optimal)},
        {"OPT-A2", {}, {}, allocation_variance(truth, n, AllocationPolicy::optimal)},
    };
    for (std::size_t a = 0; a < runs.size(); ++a)
        for (std::int64_t r = 0; r < kRuns; ++r) {
            BudgetedOracle o(table, n);
            const auto seed = mix_seed(23, {a, static_cast<std::uint64_t>(r)});
            EstimateResult e;
            switch (a) {
                case 0: e = random_estimate(o, n, seed); break;
                case 1: e = stratified_estimate(o, frame, pro, seed); break;
                case 2: e = stratified_estimate(o, frame, equ, seed); break;
                case 3: e = opt_a1(o, frame, n, kDefaultInitialPerStratum, seed); break;
                default: e = opt_a2(o, frame, n, kDefaultInitialPerStratum, kDefaultStep, seed); break;
            }
            runs[a].estimates.push_back(e.estimate);
            runs[a].variances.push_back(e.variance.value_or(std::nan("")));
        }
    return runs;
}

Verdict criterion2(const std::vector<AllocationRun>& runs) {
    Verdict v;
    for (const auto& r : runs) {
        const double bias = std::abs(mean(r.estimates) - 0.75);
        const double bound = 4.0 * std::sqrt(r.v_theory / kRuns);
        v.require(bias <= bound, r.name + " bias " + fmt(bias) + " > " + fmt(bound));
        v.note(r.name + " |bias| " + fmt(bias, 2) + " <= " + fmt(bound, 2));
    }
    return v;
}

Verdict criterion3(const std::vector<AllocationRun>& runs) {
    Verdict v;
    for (std::size_t a = 0; a < 3; ++a) {
        const auto& r = runs[a];
        const double emp = oracles::sample_variance(r.estimates);
        const double rel_formula = std::abs(emp / r.v_theory - 1.0);
        const double rel_estimator = std::abs(mean(r.variances) / emp - 1.0);
        v.require(rel_formula <= 0.10, r.name + " empirical vs formula " + fmt(rel_formula));
        v.require(rel_estimator <= 0.10, r.name + " mean v vs empirical " + fmt(rel_estimator));
        v.note(r.name + " rel.err formula " + fmt(rel_formula, 2) + ", v " + fmt(rel_estimator, 2));
    }
    return v;
}

Verdict criterion4() {
    Verdict v;
    const std::vector<std::vector<double>> ws{{0.5, 0.3, 0.2}, {0.6, 0.3, 0.1}, {1.0 / 3, 1.0 / 3, 1.0 / 3}, {0.2, 0.2, 0.6}};
    const std::vector<std::vector<double>> accs{{0.95, 0.8, 0.5}, {0.99, 0.7, 0.6}, {0.9, 0.9, 0.55}, {0.999, 0.5, 0.85}};
    int checked = 0;
    for (const auto& w : ws)
        for (const auto& a : accs) {
            std::vector<double> sd, s2;
            for (double x : a) {
                s2.push_back(x * (1 - x));
                sd.push_back(std::sqrt(x * (1 - x)));
            }
            const auto bf = oracles::brute_force_three(w, s2, 30, 2);
            v.require(bf.plans < 500, "too many plans");
            const auto plan = allocate_optimal(w, sd, 30).n_k;
            double best_neighbour = oracles::stratified_variance(w, s2, plan);
            for (std::size_t from = 0; from < 3; ++from)
                for (std::size_t to = 0; to < 3; ++to) {
                    if (from == to || plan[from] <= 2) continue;
                    auto q = plan;
                    --q[from];
                    ++q[to];
                    best_neighbour = std::min(best_neighbour, oracles::stratified_variance(w, s2, q));
                }
            v.require(best_neighbour <= bf.best * (1 + 1e-12), "plan far from optimum");
            ++checked;
        }
    v.note(std::to_string(checked) + " (W, S) settings, each exhaustively over <500 plans");
    return v;
}

double pro_mvr(const std::vector<double>& acc, std::uint64_t seed) {
    const auto g = generate_synthetic_layout(separated({0.5, 0.5}, acc, 10000), seed);
    ExperimentConfig cfg;
    cfg.methods = {Method::eqsz};
    cfg.allocations = {Allocation::pro};
    cfg.ks = {2};
    cfg.ns = {100};
    cfg.runs = kRuns;
    cfg.master_seed = seed;
    cfg.jobs = std::max(1u, std::thread::hardware_concurrency());
    return run_experiment(g.data, cfg).cells.at(0).mvr;
}

Verdict criterion5() {
    Verdict v;
    const double flat = pro_mvr({0.75, 0.75}, 51);
    const double het = pro_mvr({0.95, 0.55}, 52);
    v.require(flat >= 0.9 && flat <= 1.1, "constant-A MVR " + fmt(flat));
    v.require(het >= 0.73 && het <= 0.85, "heterogeneous MVR " + fmt(het));
    v.note("constant-A MVR " + fmt(flat) + ", A=[0.95,0.55] MVR " + fmt(het) + " (closed form 0.787)");
    return v;
}

Verdict criterion6() {
    Verdict v;
    const auto g = generate_synthetic_layout(separated({0.25, 0.25, 0.25, 0.25}, {0.55, 0.7, 0.85, 0.95}, 10000), 6);
    const auto z = derive_z(g.data);
    if (!recovers(g, stratify_eqsz(z.values, 4))) v.require(false, "strata not recovered");
    ExperimentConfig cfg;
    cfg.methods = {Method::eqsz};
    cfg.allocations = {Allocation::opt_a1, Allocation::opt_a2};
    cfg.ks = {4};
    cfg.ns = {120};
    cfg.runs = kRuns;
    cfg.master_seed = 66;
    cfg.n_ini = 5;
    cfg.jobs = std::max(1u, std::thread::hardware_concurrency());
    std::vector<double> mvr_by_step;
    for (std::int64_t step : {5, 10, 20}) {
        cfg.n_step = step;
        const auto report = run_experiment(g.data, cfg);
        const auto& a1 = report.cells.at(0);
        const auto& a2 = report.cells.at(1);
        if (step == 10) {
            v.require(a2.mean_var_stratified <= 1.02 * a1.mean_var_stratified,
                      "mean v OPT-A2 " + fmt(a2.mean_var_stratified) + " vs OPT-A1 " + fmt(a1.mean_var_stratified));
            v.note("mean v A2/A1 = " + fmt(a2.mean_var_stratified / a1.mean_var_stratified));
        }
        mvr_by_step.push_back(a2.mvr);
    }
    const auto [lo, hi] = std::minmax_element(mvr_by_step.begin(), mvr_by_step.end());
    v.require(*hi - *lo < 0.05, "OPT-A2 MVR spread " + fmt(*hi - *lo));
    v.note("OPT-A2 MVR at n_step 5/10/20 = " + fmt(mvr_by_step[0]) + "/" + fmt(mvr_by_step[1]) + "/" +
           fmt(mvr_by_step[2]));
    return v;
}

Verdict criterion7() {
    Verdict v;
    const auto base = separated({0.4, 0.3, 0.2, 0.1}, {1.0, 0.95, 0.75, 0.55}, 10000);
    ExperimentConfig cfg;
    cfg.methods = {Method::eqsz};
    cfg.ks = {4};
    cfg.ns = {200};
    cfg.runs = kRuns;
    cfg.master_seed = 77;
    cfg.jobs = std::max(1u, std::thread::hardware_concurrency());
    const std::vector<double> levels{0.88, 0.77, 0.67};
    const auto rows = accuracy_dependence_study(base, levels, cfg, 7);
    std::string table;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double m = rows[i].cells.at(0).mvr;
        table += (i ? ", " : "") + fmt(rows[i].realized_accuracy, 3) + " -> " + fmt(m);
        if (i > 0) v.require(m >= rows[i - 1].cells.at(0).mvr, "MVR not monotone at level " + fmt(levels[i]));
    }
    v.note("MVR by accuracy: " + table);
    return v;
}

Verdict criterion8() {
    Verdict v;
    const auto g = generate_synthetic_layout(separated({0.25, 0.25, 0.25, 0.25}, {1, 0, 1, 1}, 10000), 8);
    const auto z = derive_z(g.data);
    const auto p = stratify_eqsz(z.values, 4);
    v.require(recovers(g, p), "strata not recovered");
    const auto table = std::make_shared<const LabelTable>(g.data);
    const double A = table->population_accuracy();
    const auto frame = StratumFrame::from(p);
    const auto plan = allocate_equal(4, 8);
    int mismatches = 0;
    double abs_err = 0.0;
    for (std::int64_t r = 0; r < kRuns; ++r) {
        BudgetedOracle o(table, 8);
        const auto e = stratified_estimate(o, frame, plan, mix_seed(88, {static_cast<std::uint64_t>(r)}));
        if (e.estimate != A) ++mismatches;
        abs_err += std::abs(e.estimate - A);
    }
    const double mae = 100.0 * abs_err / kRuns;
    v.require(mismatches == 0, std::to_string(mismatches) + " replicates differ from A");
    v.require(mae == 0.0, "MAE " + fmt(mae));
    v.note("A=" + fmt(A) + ", " + std::to_string(kRuns) + " replicates exact, MAE 0");
    return v;
}

Verdict criterion9() {
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    SyntheticSpec spec;
    spec.N = 10000;
    spec.strata = {{0.3, 0.9, 0.95, 0.03}, {0.4, 0.8, 0.8, 0.08}, {0.3, 0.6, 0.6, 0.05}};
    const auto data = generate_synthetic(spec, 9);
    const auto z = derive_z(data).values;
    const auto density = fit_kde(z);
    const double integral = density.integral();
    v.require(integral >= 0.99 && integral <= 1.01, "KDE integral " + fmt(integral));
    const double zmin = *std::min_element(z.begin(), z.end());
    const double zmax = *std::max_element(z.begin(), z.end());

    int partitions = 0;
    for (Method m : kAllMethods)
        for (int K = 2; K <= 10; ++K) {
            const auto p = stratify(z, m, K, 1234, &density);
            const auto again = stratify(z, m, K, 1234, &density);
            const std::string tag = std::string(to_string(m)) + " K=" + std::to_string(K);
            ++partitions;
            v.require(p.assignment == again.assignment, tag + " not deterministic");
            v.require(p.assignment.size() == z.size(), tag + " does not cover");
            std::vector<std::size_t> counts(static_cast<std::size_t>(p.K), 0);
            bool in_range = true;
            for (int a : p.assignment) {
                if (a < 0 || a >= p.K) in_range = false;
                else ++counts[static_cast<std::size_t>(a)];
            }
            v.require(in_range, tag + " label out of range");
            v.require(counts == p.sizes, tag + " sizes disagree with assignment");
            v.require(std::all_of(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }),
                      tag + " empty stratum");
            v.require(std::abs(std::accumulate(p.weights.begin(), p.weights.end(), 0.0) - 1.0) <= 1e-12,
                      tag + " weights do not sum to 1");
            if (m == Method::eqwd) {
                for (int j = 1; j < K; ++j) {
                    const double cut = zmin + (zmax - zmin) * j / K;
                    v.require(std::abs((*p.boundaries)[static_cast<std::size_t>(j - 1)] - cut) <= 1e-12,
                              tag + " boundary");
                }
                for (std::size_t i = 0; i < z.size(); ++i) {
                    const double pos = (z[i] - zmin) / (zmax - zmin) * K;
                    if (std::abs(pos - std::round(pos)) < 1e-9) continue;
                    const int expect = std::min(K - 1, static_cast<int>(std::floor(pos)));
                    v.require(p.assignment[i] == expect, tag + " assignment");
                }
            }
            if (m == Method::eqsz) {
                for (int k = 0; k < K; ++k)
                    v.require(p.sizes[static_cast<std::size_t>(k)] ==
                                  z.size() / K + (static_cast<std::size_t>(k) < z.size() % K ? 1 : 0),
                              tag + " sizes");
            }
        }
    const double secs = seconds_since(t0);
    v.require(secs < 30.0, "runtime " + fmt(secs) + " s");
    v.note(std::to_string(partitions) + " partitions, KDE integral " + fmt(integral, 6) + ", " + fmt(secs, 3) + " s");
    return v;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

Verdict criterion10() {
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path dir = fs::temp_directory_path() / "strateval_acceptance_cli";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "spec.txt") << "N=5000\nstratum=0.5,0.9,0.9,0.04\nstratum=0.3,0.75,0.75,0.04\n"
                                       "stratum=0.2,0.55,0.6,0.04\n";
    const std::string cli = STRATEVAL_CLI;
    const auto q = [](const fs::path& p) { return "'" + p.string() + "'"; };
    const auto sh = [&](const std::string& args) { return std::system((cli + " " + args).c_str()); };
    v.require(sh("synth --spec " + q(dir / "spec.txt") + " --seed 7 --out " + q(dir / "d.csv")) == 0, "synth failed");
    const std::string sweep = "sweep --data " + q(dir / "d.csv") +
                              " --methods eqsz,sqrt --alloc pro,opt-a2,random --k 3,6 --n 50,100 --runs 200 --seed 1";
    v.require(sh(sweep + " --out " + q(dir / "r1.csv")) == 0, "sweep failed");
    v.require(sh(sweep + " --jobs 4 --out " + q(dir / "r2.csv")) == 0, "second sweep failed");
    const auto r1 = slurp(dir / "r1.csv");
    const auto rows = std::count(r1.begin(), r1.end(), '\n') - 1;
    v.require(rows == 2 * 3 * 2 * 2, "report has " + std::to_string(rows) + " rows");
    v.require(!r1.empty() && r1 == slurp(dir / "r2.csv"), "reruns differ");
    fs::remove_all(dir);
    const double secs = seconds_since(t0);
    v.require(secs < 120.0, "runtime " + fmt(secs) + " s");
    v.note(std::to_string(rows) + " rows, byte-identical rerun, " + fmt(secs, 3) + " s");
    return v;
}

}  // namespace

int main() {
    int failures = 0;
    const auto report = [&](int id, const std::function<Verdict()>& f) {
        Verdict v;
        try {
            v = f();
        } catch (const std::exception& e) {
            v.pass = false;
            v.detail = std::string("exception: ") + e.what();
        }
        if (!v.pass) ++failures;
        std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << v.detail << std::endl;
    };
    report(1, criterion1);
    std::vector<AllocationRun> runs;
    try {
        runs = criterion23_runs();
    } catch (const std::exception& e) {
        std::cerr << "criterion 2/3 setup: " << e.what() << '\n';
    }
    report(2, [&] {
        if (runs.empty()) throw std::runtime_error("setup failed");
        return criterion2(runs);
    });
    report(3, [&] {
        if (runs.empty()) throw std::runtime_error("setup failed");
        return criterion3(runs);
    });
    report(4, criterion4);
    report(5, criterion5);
    report(6, criterion6);
    report(7, criterion7);
    report(8, criterion8);
    report(9, criterion9);
    report(10, criterion10);
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
