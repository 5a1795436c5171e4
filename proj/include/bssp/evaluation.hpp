#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "bssp/balancing.hpp"
#include "bssp/datagen.hpp"
#include "bssp/design.hpp"
#include "bssp/error.hpp"
#include "bssp/matrix.hpp"
#include "bssp/models.hpp"
#include "bssp/rng.hpp"
#include "bssp/subsampling.hpp"

namespace bssp {

inline double rmse(const std::vector<double>& y_true, const std::vector<double>& y_pred) {
    if (y_true.size() != y_pred.size()) throw validation_error("rmse needs equal-length vectors");
    if (y_true.empty()) throw validation_error("rmse needs at least one element");
    double ss = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const double d = y_true[i] - y_pred[i];
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(y_true.size()));
}

inline double beta_error(const std::vector<double>& beta_true, const std::vector<double>& beta_hat) {
    if (beta_true.size() != beta_hat.size()) throw validation_error("beta_error needs equal-length vectors");
    double s = 0.0;
    for (std::size_t i = 0; i < beta_true.size(); ++i) s += std::abs(beta_true[i] - beta_hat[i]);
    return s;
}

inline double average_error(const std::vector<double>& per_environment) {
    if (per_environment.empty()) throw validation_error("average_error needs at least one environment");
    double s = 0.0;
    for (double v : per_environment) s += v;
    return s / static_cast<double>(per_environment.size());
}

// Sample standard deviation of per-environment errors (divisor |E|-1).
inline double stability_error(const std::vector<double>& per_environment) {
    if (per_environment.size() < 2) throw validation_error("stability_error needs at least two environments");
    const double mean = average_error(per_environment);
    double ss = 0.0;
    for (double v : per_environment) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(per_environment.size() - 1));
}

// ---------------------------------------------------------------------------

enum class Task { regression, classification };
enum class Method { baseline, gbr, bssp };

inline std::string method_name(Method m) {
    switch (m) {
        case Method::baseline: return "baseline";
        case Method::gbr: return "gbr";
        default: return "bssp";
    }
}

struct ExperimentConfig {
    Task task = Task::regression;
    double r_train = 2.0;
    std::vector<double> r_tests;
    std::size_t replications = 50;
    std::vector<Method> methods = {Method::baseline, Method::gbr, Method::bssp};
    Design matching_template = reference_template_128();
    std::size_t n = 2000;
    std::uint64_t seed = 0;
    std::optional<double> fixed_lambda;  // nullopt: pick by cross validation
    SearchConfig search;
    BalanceConfig balance;
    GbrConfig gbr;
    CvConfig cv;
    std::size_t min_subsample_rows = 32;
    std::size_t threads = 1;
    RegressionGenConfig regression_base;
    ClassificationGenConfig classification_base;

    void validate() const {
        if (replications < 1) throw validation_error("need at least one replication");
        if (r_tests.empty()) throw validation_error("test environment list is empty");
        if (methods.empty()) throw validation_error("method list is empty");
        balance.validate();
        search.validate();
        const std::size_t d = task == Task::regression ? regression_base.d : classification_base.d;
        for (Method m : methods)
            if (m == Method::bssp) {
                if (matching_template.factors() != d)
                    throw validation_error("template factor count does not match the generated dimension");
                if (gwlp(matching_template).resolution < 3)
                    throw validation_error("bssp needs a template of resolution >= 3");
            }
    }
};

struct RmseCell {
    Method method;
    double r_test = 0.0;
    std::size_t replication = 0;
    double rmse = 0.0;
};

struct BetaCell {
    Method method;
    std::size_t replication = 0;
    double beta_error_stable = 0.0;
    double beta_error_noisy = 0.0;
};

struct SubsampleMeta {
    std::size_t replication = 0;
    double psi = 0.0;
    std::size_t matched_count = 0;
};

struct FailedReplication {
    std::size_t replication = 0;
    std::string reason;
};

struct MethodSummary {
    std::vector<double> per_environment_mean;  // aligned with config.r_tests
    double average_error = 0.0;
    std::optional<double> stability;           // absent with a single test environment
    std::optional<double> mean_beta_error_stable;
    std::optional<double> mean_beta_error_noisy;
};

struct ExperimentReport {
    Task task = Task::regression;
    double r_train = 0.0;
    std::vector<double> r_tests;
    std::size_t replications = 0;
    std::size_t n = 0;
    std::uint64_t seed = 0;
    std::vector<Method> methods;
    std::vector<RmseCell> cells;
    std::vector<BetaCell> beta_cells;
    std::vector<SubsampleMeta> subsample_meta;
    std::vector<FailedReplication> failures;
    std::map<std::string, MethodSummary> summaries;
};

namespace detail {

// stream tags for per-replication seed derivation
constexpr std::uint64_t kTagTrain = 0x747261696eULL;
constexpr std::uint64_t kTagTest = 0x74657374ULL;
constexpr std::uint64_t kTagCv = 0x6376ULL;
constexpr std::uint64_t kTagSearch = 0x736561ULL;

struct RepOutcome {
    struct PerMethod {
        bool present = false;
        std::vector<double> env_rmse;
        std::optional<double> beta_stable, beta_noisy;
    };
    std::map<Method, PerMethod> per_method;
    std::optional<SubsampleMeta> meta;
    std::optional<std::string> failure;
};

inline Dataset generate(const ExperimentConfig& cfg, double bias, std::uint64_t seed) {
    if (cfg.task == Task::regression) {
        RegressionGenConfig g = cfg.regression_base;
        g.n = cfg.n;
        g.bias_rate = bias;
        g.seed = seed;
        return gen_regression(g);
    }
    ClassificationGenConfig g = cfg.classification_base;
    g.n = cfg.n;
    g.bias_rate = bias;
    g.seed = seed;
    return gen_classification(g);
}

inline ModelFit fit_task_model(const ExperimentConfig& cfg, const BinaryMatrix& x, const std::vector<double>& y,
                               const WeightVector* w, std::uint64_t cv_seed) {
    const ModelFamily family = cfg.task == Task::regression ? ModelFamily::linear : ModelFamily::logistic;
    double lambda = 0.0;
    if (cfg.fixed_lambda) {
        lambda = *cfg.fixed_lambda;
    } else {
        CvConfig cv = cfg.cv;
        cv.seed = cv_seed;
        lambda = cross_validate_lambda(family, x, y, w, cv);
    }
    return family == ModelFamily::linear ? fit_linear(x, y, w, lambda) : fit_logistic(x, y, w, lambda);
}

inline RepOutcome run_replication(const ExperimentConfig& cfg, std::size_t rep) {
    RepOutcome out;
    const Dataset train = generate(cfg, cfg.r_train, mix_seed(cfg.seed, kTagTrain, rep));

    std::map<Method, ModelFit> fits;
    for (Method m : cfg.methods) {
        const std::uint64_t cv_seed = mix_seed(cfg.seed, kTagCv, rep * 8 + static_cast<std::size_t>(m));
        switch (m) {
            case Method::baseline:
                fits[m] = fit_task_model(cfg, train.x, train.y, nullptr, cv_seed);
                break;
            case Method::gbr: {
                const BalancingWeights bw = learn_balancing_weights(train.x, cfg.gbr, cfg.balance);
                fits[m] = fit_task_model(cfg, train.x, train.y, &bw.weights, cv_seed);
                break;
            }
            case Method::bssp: {
                SearchConfig search = cfg.search;
                search.seed = mix_seed(cfg.seed, kTagSearch, rep);
                try {
                    const SubsampleResult sub = ffd_subsample(train.x, cfg.matching_template, search, cfg.balance);
                    out.meta = SubsampleMeta{rep, sub.psi, sub.matched_count};
                    if (sub.matched_count < cfg.min_subsample_rows) {
                        out.failure = "subsample has " + std::to_string(sub.matched_count) + " rows, minimum is " +
                                      std::to_string(cfg.min_subsample_rows);
                        continue;
                    }
                    std::vector<double> y_sub(sub.selected_indices.size());
                    for (std::size_t i = 0; i < sub.selected_indices.size(); ++i)
                        y_sub[i] = train.y[sub.selected_indices[i]];
                    fits[m] = fit_task_model(cfg, train.x.select_rows(sub.selected_indices), y_sub, nullptr, cv_seed);
                } catch (const error& e) {
                    out.failure = e.what();
                    continue;
                }
                break;
            }
        }
    }

    // beta errors against the generating coefficients (regression only)
    if (cfg.task == Task::regression) {
        const std::size_t half = cfg.regression_base.d / 2;
        for (auto& [m, fit] : fits) {
            double es = 0.0, ev = 0.0;
            for (std::size_t j = 0; j < half; ++j) es += std::abs(fit.coefficients[j] - cfg.regression_base.beta_stable[j]);
            for (std::size_t j = half; j < cfg.regression_base.d; ++j) ev += std::abs(fit.coefficients[j]);
            out.per_method[m].beta_stable = es;
            out.per_method[m].beta_noisy = ev;
        }
    }

    for (std::size_t e = 0; e < cfg.r_tests.size(); ++e) {
        const Dataset test = generate(cfg, cfg.r_tests[e], mix_seed(cfg.seed, kTagTest, rep * 1024 + e));
        for (auto& [m, fit] : fits) {
            auto& slot = out.per_method[m];
            slot.present = true;
            slot.env_rmse.resize(cfg.r_tests.size(), 0.0);
            slot.env_rmse[e] = rmse(test.y, predict(fit, test.x));
        }
    }
    return out;
}

}  // namespace detail

// Runs the full protocol: per replication, generate training data at r_train,
// fit every enabled method, score on fresh test data at every r_test, then
// aggregate per-environment means into Average/Stability errors. Replications
// are independent; with threads > 1 they run in parallel and the aggregation
// stays deterministic because results are folded in replication order.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    ExperimentReport report;
    report.task = cfg.task;
    report.r_train = cfg.r_train;
    report.r_tests = cfg.r_tests;
    report.replications = cfg.replications;
    report.n = cfg.n;
    report.seed = cfg.seed;
    report.methods = cfg.methods;

    std::vector<detail::RepOutcome> outcomes(cfg.replications);
    const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.threads, cfg.replications));
    if (workers == 1) {
        for (std::size_t rep = 0; rep < cfg.replications; ++rep) outcomes[rep] = detail::run_replication(cfg, rep);
    } else {
        std::vector<std::thread> pool;
        std::atomic<std::size_t> next{0};
        for (std::size_t t = 0; t < workers; ++t)
            pool.emplace_back([&] {
                for (std::size_t rep = next.fetch_add(1); rep < cfg.replications; rep = next.fetch_add(1))
                    outcomes[rep] = detail::run_replication(cfg, rep);
            });
        for (auto& th : pool) th.join();
    }

    for (std::size_t rep = 0; rep < cfg.replications; ++rep) {
        const auto& o = outcomes[rep];
        if (o.meta) report.subsample_meta.push_back(*o.meta);
        if (o.failure) report.failures.push_back({rep, *o.failure});
        for (const auto& [m, slot] : o.per_method) {
            if (!slot.present) continue;
            for (std::size_t e = 0; e < cfg.r_tests.size(); ++e)
                report.cells.push_back({m, cfg.r_tests[e], rep, slot.env_rmse[e]});
            if (slot.beta_stable)
                report.beta_cells.push_back({m, rep, *slot.beta_stable, *slot.beta_noisy});
        }
    }

    for (Method m : cfg.methods) {
        MethodSummary summary;
        summary.per_environment_mean.assign(cfg.r_tests.size(), 0.0);
        std::vector<std::size_t> counts(cfg.r_tests.size(), 0);
        for (const auto& cell : report.cells) {
            if (cell.method != m) continue;
            for (std::size_t e = 0; e < cfg.r_tests.size(); ++e)
                if (cfg.r_tests[e] == cell.r_test) {
                    summary.per_environment_mean[e] += cell.rmse;
                    ++counts[e];
                }
        }
        bool any = false;
        for (std::size_t e = 0; e < cfg.r_tests.size(); ++e)
            if (counts[e] > 0) {
                summary.per_environment_mean[e] /= static_cast<double>(counts[e]);
                any = true;
            }
        if (!any) continue;  // every replication failed for this method
        summary.average_error = average_error(summary.per_environment_mean);
        if (cfg.r_tests.size() >= 2) summary.stability = stability_error(summary.per_environment_mean);
        double bs = 0.0, bv = 0.0;
        std::size_t bn = 0;
        for (const auto& cell : report.beta_cells)
            if (cell.method == m) {
                bs += cell.beta_error_stable;
                bv += cell.beta_error_noisy;
                ++bn;
            }
        if (bn > 0) {
            summary.mean_beta_error_stable = bs / static_cast<double>(bn);
            summary.mean_beta_error_noisy = bv / static_cast<double>(bn);
        }
        report.summaries[method_name(m)] = std::move(summary);
    }
    return report;
}

// Long-format export: method,r_train,r_test,replication,metric,value.
inline void write_report_csv(std::ostream& os, const ExperimentReport& report) {
    os.precision(17);
    os << "method,r_train,r_test,replication,metric,value\n";
    for (const auto& cell : report.cells)
        os << method_name(cell.method) << ',' << report.r_train << ',' << cell.r_test << ',' << cell.replication
           << ",rmse," << cell.rmse << '\n';
    for (const auto& cell : report.beta_cells) {
        os << method_name(cell.method) << ',' << report.r_train << ",," << cell.replication << ",beta_error_S,"
           << cell.beta_error_stable << '\n';
        os << method_name(cell.method) << ',' << report.r_train << ",," << cell.replication << ",beta_error_V,"
           << cell.beta_error_noisy << '\n';
    }
    for (const auto& meta : report.subsample_meta) {
        os << "bssp," << report.r_train << ",," << meta.replication << ",psi," << meta.psi << '\n';
        os << "bssp," << report.r_train << ",," << meta.replication << ",matched_count," << meta.matched_count << '\n';
    }
    for (const auto& f : report.failures)
        os << "bssp," << report.r_train << ",," << f.replication << ",failed,1\n";
}

}  // namespace bssp
