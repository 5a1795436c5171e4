// Acceptance suite: one line per criterion, nonzero exit when any fails.
// argv[1] (optional) is the path of the command-line binary, used by the
// determinism criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "bssp/bssp.hpp"

using namespace bssp;
namespace fs = std::filesystem;

namespace {

int failures = 0;

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

void report(int number, const std::string& name, bool pass, const std::string& detail) {
    std::printf("%s  %d. %-28s %s\n", pass ? "PASS" : "FAIL", number, name.c_str(), detail.c_str());
    if (!pass) ++failures;
}

Design random_design(std::size_t m, std::size_t d, Rng& rng) {
    Design out(m, d);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < d; ++c) out(r, c) = rng.coin() ? 1 : -1;
    return out;
}

// ---- 1. word-length pattern against the enumeration oracle --------------
void criterion_gwlp() {
    Timer timer;
    bool pass = true;
    std::ostringstream detail;

    const Gwlp half = gwlp(regular_ffd(2, {{1, 2}}));
    if (!(half.values[0] == 0.0 && half.values[1] == 0.0 && std::abs(half.values[2] - 1.0) < 1e-12)) {
        pass = false;
        detail << "half-fraction pattern off; ";
    }
    for (std::size_t d = 1; d <= 6 && pass; ++d) {
        const Gwlp g = gwlp(full_factorial(d));
        for (double a : g.values)
            if (a != 0.0) {
                pass = false;
                detail << "full factorial d=" << d << " not zero; ";
                break;
            }
    }
    double worst = 0.0;
    Rng rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t m = 2 + rng.below(63);
        const std::size_t d = 1 + rng.below(10);
        const Design design = random_design(m, d, rng);
        const Gwlp fast = gwlp(design);
        const Gwlp slow = gwlp_oracle(design);
        for (std::size_t j = 0; j < d; ++j) worst = std::max(worst, std::abs(fast.values[j] - slow.values[j]));
    }
    if (worst > 1e-8) {
        pass = false;
        detail << "oracle gap " << worst << "; ";
    }
    const double elapsed = timer.seconds();
    if (elapsed >= 10.0) pass = false;
    detail << "max |gwlp - oracle| = " << worst << " over 100 designs, " << elapsed << " s";
    report(1, "gwlp vs oracle", pass, detail.str());
}

// ---- 2. template resolution / strength / orthogonality -------------------
void criterion_template() {
    Timer timer;
    bool pass = true;
    std::ostringstream detail;
    const Design tmpl = reference_template_128();

    const Gwlp g = gwlp(tmpl);
    if (g.resolution != 5) {
        pass = false;
        detail << "resolution " << g.resolution << " != 5; ";
    }
    const std::size_t strength = orthogonal_strength(tmpl);
    if (strength != 4) {
        pass = false;
        detail << "strength " << strength << " != 4; ";
    }

    const std::size_t d = tmpl.factors();
    std::int64_t worst_pair = 0;
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = a + 1; b < d; ++b) {
            std::int64_t dot = 0;
            for (std::size_t r = 0; r < tmpl.runs(); ++r) dot += tmpl(r, a) * tmpl(r, b);
            worst_pair = std::max(worst_pair, std::abs(dot));
        }
    if (worst_pair != 0) pass = false;

    // every 2- and 3-way interaction column against every main effect
    std::int64_t worst_interaction = 0;
    std::vector<std::size_t> idx;
    for (std::size_t size = 2; size <= 3; ++size) {
        idx.assign(size, 0);
        for (std::size_t i = 0; i < size; ++i) idx[i] = i;
        while (true) {
            for (std::size_t j = 0; j < d; ++j) {
                std::int64_t dot = 0;
                for (std::size_t r = 0; r < tmpl.runs(); ++r) {
                    int prod = tmpl(r, j);
                    for (std::size_t c : idx) prod *= tmpl(r, c);
                    dot += prod;
                }
                worst_interaction = std::max(worst_interaction, std::abs(dot));
            }
            std::size_t i = size;
            while (i > 0 && idx[i - 1] == d - size + i - 1) --i;
            if (i == 0) break;
            ++idx[i - 1];
            for (std::size_t k = i; k < size; ++k) idx[k] = idx[k - 1] + 1;
        }
    }
    if (worst_interaction != 0) pass = false;

    const double elapsed = timer.seconds();
    if (elapsed >= 5.0) pass = false;
    detail << "resolution 5, strength " << strength << ", max |col dot| = " << worst_pair
           << ", max |interaction dot| = " << worst_interaction << ", " << elapsed << " s";
    report(2, "template orthogonality", pass, detail.str());
}

// ---- 3. zero balancing loss on matched designs ---------------------------
void criterion_theorem3() {
    bool pass = true;
    std::ostringstream detail;
    const BinaryMatrix tmpl = reference_template_128().zero_one_view();
    const WeightVector unit(tmpl.rows(), 1.0);
    double worst = 0.0;
    for (std::size_t k = 1; k <= 3; ++k) worst = std::max(worst, generalized_loss(tmpl, unit, k));
    const BinaryMatrix res4 = regular_ffd(4, {{1, 2, 3}, {1, 2, 4}}).zero_one_view();
    const WeightVector unit16(res4.rows(), 1.0);
    for (std::size_t k = 1; k <= 2; ++k) worst = std::max(worst, generalized_loss(res4, unit16, k));
    if (worst > 1e-10) pass = false;
    detail << "max loss = " << worst << " (template k=1..3, 16-run resolution-4 k=1..2)";
    report(3, "matched-design loss", pass, detail.str());
}

// ---- 4. psi curve over random subsets ------------------------------------
void criterion_psi_curve() {
    Timer timer;
    bool pass = true;
    std::ostringstream detail;
    const auto curve = psi_random_subset_curve(reference_template_128(), {16, 32, 64, 96, 120, 128}, 100, 4242);
    for (std::size_t i = 1; i < curve.size(); ++i)
        if (curve[i].mean > curve[i - 1].mean + 1e-12) {
            pass = false;
            detail << "mean rose at size " << curve[i].size << "; ";
        }
    if (curve.back().mean != 0.0 || curve.back().stddev != 0.0) {
        pass = false;
        detail << "full-size psi not exactly 0; ";
    }
    const double elapsed = timer.seconds();
    if (elapsed >= 60.0) pass = false;
    detail << "means:";
    for (const auto& pt : curve) detail << ' ' << pt.mean;
    detail << ", " << elapsed << " s";
    report(4, "psi curve", pass, detail.str());
}

// ---- 5. regression stability ---------------------------------------------
void criterion_regression() {
    Timer timer;
    bool pass = true;
    std::ostringstream detail;

    ExperimentConfig cfg;
    cfg.task = Task::regression;
    cfg.r_train = 2.0;
    cfg.r_tests = {-3.0, -2.0, -1.7, -1.5, -1.3, 1.3, 1.5, 1.7, 2.0, 3.0};
    cfg.replications = 20;
    cfg.n = 2000;
    cfg.seed = 42;
    const ExperimentReport report_data = run_experiment(cfg);

    const auto& ols = report_data.summaries.at("baseline");
    const auto& gbr = report_data.summaries.at("gbr");
    const auto& bssp_s = report_data.summaries.at("bssp");
    const auto spread = [](const MethodSummary& s) {
        double lo = s.per_environment_mean[0], hi = lo;
        for (double v : s.per_environment_mean) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        return hi - lo;
    };

    if (!(*bssp_s.mean_beta_error_noisy < *ols.mean_beta_error_noisy)) {
        pass = false;
        detail << "beta_V not improved; ";
    }
    if (!(*bssp_s.stability < *ols.stability) || !(*bssp_s.stability < *gbr.stability)) {
        pass = false;
        detail << "stability not best; ";
    }
    if (!(spread(bssp_s) < spread(ols))) {
        pass = false;
        detail << "rmse spread not reduced; ";
    }
    const double elapsed = timer.seconds();
    if (elapsed >= 600.0) pass = false;
    detail << "beta_V " << *bssp_s.mean_beta_error_noisy << " vs " << *ols.mean_beta_error_noisy << " (ols)"
           << "; stability " << *bssp_s.stability << " vs " << *ols.stability << " (ols) / " << *gbr.stability
           << " (gbr); spread " << spread(bssp_s) << " vs " << spread(ols) << "; failures "
           << report_data.failures.size() << "; " << elapsed << " s";
    report(5, "regression stability", pass, detail.str());
}

// ---- 6. classification stability ------------------------------------------
void criterion_classification() {
    Timer timer;
    bool pass = true;
    std::ostringstream detail;

    for (double r_train : {0.15, 0.85}) {
        ExperimentConfig cfg;
        cfg.task = Task::classification;
        cfg.r_train = r_train;
        cfg.r_tests = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0 - 1e-9};
        cfg.replications = 20;
        cfg.n = 2000;
        cfg.seed = 42;
        cfg.methods = {Method::baseline, Method::bssp};
        const ExperimentReport report_data = run_experiment(cfg);
        const auto& lr = report_data.summaries.at("baseline");
        const auto& bs = report_data.summaries.at("bssp");

        // grid index closest to the training rate, and the far end of the grid
        std::size_t near = 0, far = 0;
        for (std::size_t e = 1; e < cfg.r_tests.size(); ++e) {
            if (std::abs(cfg.r_tests[e] - r_train) < std::abs(cfg.r_tests[near] - r_train)) near = e;
            if (std::abs(cfg.r_tests[e] - r_train) > std::abs(cfg.r_tests[far] - r_train)) far = e;
        }
        const auto range = [](const MethodSummary& s) {
            double lo = s.per_environment_mean[0], hi = lo;
            for (double v : s.per_environment_mean) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            return hi - lo;
        };
        if (!(lr.per_environment_mean[far] > lr.per_environment_mean[near])) {
            pass = false;
            detail << "LR far/near ordering broken at r_train=" << r_train << "; ";
        }
        if (!(range(bs) < range(lr))) {
            pass = false;
            detail << "range not reduced at r_train=" << r_train << "; ";
        }
        detail << "r_train=" << r_train << ": LR far " << lr.per_environment_mean[far] << " vs near "
               << lr.per_environment_mean[near] << ", range " << range(bs) << " (bssp) vs " << range(lr)
               << " (lr); ";
    }
    const double elapsed = timer.seconds();
    if (elapsed >= 600.0) pass = false;
    detail << elapsed << " s";
    report(6, "classification stability", pass, detail.str());
}

// ---- 7. correlation diagnostics -------------------------------------------
void criterion_correlations() {
    bool pass = true;
    std::ostringstream detail;

    // fully matched subsample: correlations vanish to machine precision
    const Design tmpl = reference_template_128();
    RegressionGenConfig gen_cfg;
    gen_cfg.n = 3000;
    gen_cfg.bias_rate = 2.0;
    gen_cfg.seed = 7;
    Dataset data = gen_regression(gen_cfg);
    // append the template rows so a perfect match exists at the identity
    BinaryMatrix padded(data.x.rows() + tmpl.runs(), 10);
    for (std::size_t i = 0; i < data.x.rows(); ++i)
        for (std::size_t j = 0; j < 10; ++j) padded(i, j) = data.x(i, j);
    const BinaryMatrix tview = tmpl.zero_one_view();
    for (std::size_t r = 0; r < tmpl.runs(); ++r)
        for (std::size_t j = 0; j < 10; ++j) padded(data.x.rows() + r, j) = tview(r, j);

    SearchConfig search;
    search.strategy = SearchStrategy::exhaustive_lexicographic;
    search.budget = 5;
    const SubsampleResult sub = ffd_subsample(padded, tmpl, search);
    if (sub.matched_count != 128 || sub.psi != 0.0) {
        pass = false;
        detail << "expected a perfect match; ";
    }
    const BinaryMatrix matched = padded.select_rows(sub.selected_indices);
    std::vector<double> interaction(matched.rows());
    for (std::size_t i = 0; i < matched.rows(); ++i) interaction[i] = matched(i, 0) * matched(i, 1);
    const CorrelationMatrix corr = correlation_diagnostics(matched, {{"g", interaction}});
    double worst = 0.0;
    for (std::size_t a = 0; a < 10; ++a)
        for (std::size_t b = a + 1; b < 10; ++b) worst = std::max(worst, std::abs(corr.at(a, b)));
    const double v5_g = std::abs(corr.at(9, 10));
    if (worst != 0.0 || v5_g != 0.0) {
        pass = false;
        detail << "matched-subsample correlations nonzero; ";
    }

    // raw biased data: the noisy feature is visibly correlated with the outcome
    double mean_abs_corr = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        gen_cfg.seed = 100 + seed;
        gen_cfg.n = 2000;
        const Dataset raw = gen_regression(gen_cfg);
        std::vector<NamedColumn> extras{{"y", raw.y}};
        const CorrelationMatrix raw_corr = correlation_diagnostics(raw.x, extras);
        mean_abs_corr += std::abs(raw_corr.at(9, 10));
    }
    mean_abs_corr /= 20.0;
    if (!(mean_abs_corr > 0.05)) {
        pass = false;
        detail << "raw corr(V5, y) too small; ";
    }
    detail << "matched max |corr| = " << worst << ", corr(V5,g) = " << v5_g
           << ", raw mean |corr(V5,y)| = " << mean_abs_corr;
    report(7, "correlation diagnostics", pass, detail.str());
}

// ---- 8. solver optimality ---------------------------------------------------
void criterion_solvers() {
    bool pass = true;
    std::ostringstream detail;
    Rng rng(31337);

    double worst_kkt = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 20 + rng.below(200);
        const std::size_t d = 2 + rng.below(12);
        BinaryMatrix x(n, d);
        std::vector<double> y(n);
        WeightVector w(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < d; ++j) x(i, j) = rng.coin();
            y[i] = rng.normal(0.0, 1.0) + 0.8 * x(i, 0) - 0.5 * x(i, d - 1);
            w[i] = 0.05 + rng.uniform01();
        }
        const double lambda = rng.uniform01() * 0.6;
        const ModelFit fit = fit_linear(x, y, &w, lambda);
        worst_kkt = std::max(worst_kkt, lasso_kkt_violation(x, y, &w, fit));
    }
    if (worst_kkt > 1e-6) {
        pass = false;
        detail << "KKT violated; ";
    }

    double worst_grad = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 30 + rng.below(40);
        const std::size_t d = 2 + rng.below(5);
        BinaryMatrix x(n, d);
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < d; ++j) x(i, j) = rng.coin();
            y[i] = rng.coin() ? 1.0 : 0.0;
        }
        double intercept = rng.normal(0.0, 0.4);
        std::vector<double> beta(d);
        for (double& b : beta) b = rng.normal(0.0, 0.4);
        const auto grad = logistic_gradient(x, y, nullptr, intercept, beta);
        const double h = 1e-5;
        const double g0 =
            (logistic_nll(x, y, nullptr, intercept + h, beta) - logistic_nll(x, y, nullptr, intercept - h, beta)) /
            (2 * h);
        worst_grad = std::max(worst_grad, std::abs(grad[0] - g0) / std::max(1.0, std::abs(g0)));
        for (std::size_t j = 0; j < d; ++j) {
            std::vector<double> up = beta, down = beta;
            up[j] += h;
            down[j] -= h;
            const double gj =
                (logistic_nll(x, y, nullptr, intercept, up) - logistic_nll(x, y, nullptr, intercept, down)) / (2 * h);
            worst_grad = std::max(worst_grad, std::abs(grad[j + 1] - gj) / std::max(1.0, std::abs(gj)));
        }
    }
    if (worst_grad > 1e-4) {
        pass = false;
        detail << "gradient mismatch; ";
    }
    detail << "max KKT residual = " << worst_kkt << " (50 fits), max gradient gap = " << worst_grad << " (20 checks)";
    report(8, "solver optimality", pass, detail.str());
}

// ---- 9. CLI determinism ------------------------------------------------------
void criterion_cli_determinism(const std::string& cli) {
    bool pass = true;
    std::ostringstream detail;
    if (cli.empty()) {
        report(9, "cli determinism", false, "no CLI path given");
        return;
    }
    const fs::path work = fs::temp_directory_path() / "bssp_acceptance_cli";
    std::error_code ec;
    fs::remove_all(work, ec);
    fs::create_directories(work);

    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    const auto run = [&](const std::string& args) {
        const std::string cmd = cli + " " + args + " > /dev/null 2>&1";
        return std::system(cmd.c_str()) == 0;
    };

    for (const std::string preset : {"--paper-regression", "--paper-classification"}) {
        const std::string out_a = (work / ("a" + preset.substr(8))).string();
        const std::string out_b = (work / ("b" + preset.substr(8))).string();
        const std::string common = "experiment " + preset + " --reps 2 --n 400 --seed 11 --out ";
        if (!run(common + out_a) || !run(common + out_b)) {
            pass = false;
            detail << preset << " run failed; ";
            continue;
        }
        if (slurp(out_a + "/report.csv") != slurp(out_b + "/report.csv")) {
            pass = false;
            detail << preset << " reports differ; ";
        }
    }
    detail << "presets re-run byte-identical (reps 2, n 400)";
    report(9, "cli determinism", pass, detail.str());
    fs::remove_all(work, ec);
}

}  // namespace

int main(int argc, char** argv) {
    const std::string cli = argc > 1 ? argv[1] : "";
    Timer total;
    criterion_gwlp();
    criterion_template();
    criterion_theorem3();
    criterion_psi_curve();
    criterion_regression();
    criterion_classification();
    criterion_correlations();
    criterion_solvers();
    criterion_cli_determinism(cli);
    std::printf("%s: %d criterion(s) failed, %.1f s total\n", failures == 0 ? "OK" : "FAILED", failures,
                total.seconds());
    return failures == 0 ? 0 : 1;
}
