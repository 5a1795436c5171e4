#pragma once

// JSON serialization for the public value types; kept apart so the core
// headers do not drag in the json dependency.

#include <json.hpp>

#include "bssp/evaluation.hpp"
#include "bssp/gwlp.hpp"
#include "bssp/models.hpp"
#include "bssp/subsampling.hpp"
#include "bssp/version.hpp"

namespace bssp {

inline nlohmann::json to_json(const Gwlp& g) {
    return {{"values", g.values}, {"resolution", g.resolution}};
}

inline nlohmann::json design_analysis_json(const Design& design) {
    const Gwlp g = gwlp(design);
    return {{"runs", design.runs()},
            {"factors", design.factors()},
            {"gwlp", g.values},
            {"resolution", g.resolution},
            {"orthogonal_strength", orthogonal_strength(design)}};
}

inline nlohmann::json to_json(const SubsampleResult& r) {
    nlohmann::json j{{"indices", r.selected_indices},
                     {"permutation", r.permutation},
                     {"matched_count", r.matched_count}};
    if (std::isfinite(r.psi)) j["psi"] = r.psi;
    else j["psi"] = "inf";
    return j;
}

inline nlohmann::json to_json(const ModelFit& fit) {
    return {{"family", fit.family == ModelFamily::linear ? "linear" : "logistic"},
            {"lambda_l1", fit.lambda_l1},
            {"intercept", fit.intercept},
            {"coefficients", fit.coefficients},
            {"converged", fit.converged},
            {"iterations", fit.iterations}};
}

// Sidecar metadata written next to dataset CSVs.
inline nlohmann::json dataset_metadata_json(const Dataset& data, const nlohmann::json& generator_config,
                                            const IngestReport* report = nullptr) {
    nlohmann::json j{{"version", kVersion},
                     {"rows", data.size()},
                     {"features", data.feature_names},
                     {"binary_outcome", data.binary_outcome},
                     {"config", generator_config}};
    if (data.environment_label) j["environment"] = *data.environment_label;
    if (report != nullptr) {
        nlohmann::json dropped = nlohmann::json::array();
        for (const auto& f : report->dropped_features)
            dropped.push_back({{"name", f.name}, {"frequency", f.frequency}});
        j["dropped_features"] = dropped;
        j["dropped_rows"] = report->dropped_rows;
    }
    return j;
}

inline nlohmann::json report_summary_json(const ExperimentReport& report) {
    nlohmann::json methods = nlohmann::json::object();
    for (const auto& [name, s] : report.summaries) {
        nlohmann::json m{{"average_error", s.average_error},
                         {"per_environment_mean", s.per_environment_mean}};
        m["stability_error"] = s.stability ? nlohmann::json(*s.stability) : nlohmann::json();
        if (s.mean_beta_error_stable) m["mean_beta_error_S"] = *s.mean_beta_error_stable;
        if (s.mean_beta_error_noisy) m["mean_beta_error_V"] = *s.mean_beta_error_noisy;
        methods[name] = std::move(m);
    }
    nlohmann::json failures = nlohmann::json::array();
    for (const auto& f : report.failures) failures.push_back({{"replication", f.replication}, {"reason", f.reason}});
    nlohmann::json meta = nlohmann::json::array();
    for (const auto& m : report.subsample_meta)
        meta.push_back({{"replication", m.replication},
                        {"psi", std::isfinite(m.psi) ? nlohmann::json(m.psi) : nlohmann::json("inf")},
                        {"matched_count", m.matched_count}});
    std::vector<std::string> method_names;
    for (Method m : report.methods) method_names.push_back(method_name(m));
    return {{"version", kVersion},
            {"task", report.task == Task::regression ? "regression" : "classification"},
            {"seed", report.seed},
            {"n", report.n},
            {"r_train", report.r_train},
            {"r_tests", report.r_tests},
            {"replications", report.replications},
            {"methods", method_names},
            {"summaries", methods},
            {"subsample", meta},
            {"failed_replications", failures}};
}

}  // namespace bssp
