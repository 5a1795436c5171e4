#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "bssp/error.hpp"
#include "bssp/matrix.hpp"
#include "bssp/rng.hpp"

namespace bssp {

struct Dataset {
    BinaryMatrix x;
    std::vector<double> y;
    std::vector<std::string> feature_names;
    bool binary_outcome = false;
    std::optional<std::string> environment_label;

    std::size_t size() const { return x.rows(); }
};

// ---------------------------------------------------------------------------
// Synthetic generators. Covariates are fair coin bits (the sign of a standard
// normal), the outcome is computed from the binarized features, and biased
// selection keeps a draw with a probability driven by the bias rate.

struct RegressionGenConfig {
    std::size_t n = 2000;  // accepted sample count
    std::size_t d = 10;    // first half stable, second half noisy
    std::vector<double> beta_stable = {1.0 / 3.0, -2.0 / 3.0, 1.0, -1.0 / 3.0, 2.0 / 3.0};
    double noise_sd = 0.3;
    double bias_rate = 2.0;  // |r| in (1,3]; the sign sets the correlation direction
    std::uint64_t seed = 0;

    void validate() const {
        if (n < 1 || d < 2 || d % 2 != 0) throw validation_error("need n >= 1 and an even d >= 2");
        if (beta_stable.size() != d / 2) throw validation_error("beta_stable must have d/2 entries");
        const double a = std::abs(bias_rate);
        if (!(a > 1.0 && a <= 3.0)) throw validation_error("|bias_rate| must lie in (1,3]");
    }
};

struct ClassificationGenConfig {
    std::size_t n = 2000;
    std::size_t d = 10;
    double interaction_scale = 5.0;
    double latent_noise_sd = 0.2;
    double bias_rate = 0.85;  // in (0,1); 0.5 is unbiased
    std::uint64_t seed = 0;

    void validate() const {
        if (n < 1 || d < 10) throw validation_error("need n >= 1 and d >= 10");
        if (!(bias_rate > 0.0 && bias_rate < 1.0)) throw validation_error("bias_rate must lie in (0,1)");
    }
};

namespace detail {

inline std::vector<std::string> synthetic_feature_names(std::size_t d) {
    std::vector<std::string> names;
    for (std::size_t j = 0; j < d; ++j) {
        const bool stable = j < d / 2;
        names.push_back((stable ? "S" : "V") + std::to_string(stable ? j + 1 : j + 1 - d / 2));
    }
    return names;
}

constexpr std::size_t kMaxConsecutiveRejections = 10'000'000;

}  // namespace detail

inline BinaryMatrix gen_covariates(std::size_t count, std::size_t d, std::uint64_t seed) {
    if (count < 1 || d < 1) throw validation_error("covariate matrix needs count, d >= 1");
    BinaryMatrix x(count, d);
    Rng rng(seed);
    for (std::size_t i = 0; i < count; ++i)
        for (std::size_t j = 0; j < d; ++j)
            x(i, j) = rng.coin() ? 1 : 0;
    return x;
}

// Continuous outcome y = S*beta + S1*S2 + noise; a draw survives selection
// with probability |r|^(-5*tau), tau = |S*beta + S1*S2 - sign(r)*V_last|.
// Draw order per candidate row: d feature bits, acceptance uniform, then the
// outcome noise only for accepted rows.
inline Dataset gen_regression(const RegressionGenConfig& cfg) {
    cfg.validate();
    const std::size_t half = cfg.d / 2;
    Rng rng(cfg.seed);
    Dataset data;
    data.x = BinaryMatrix(cfg.n, cfg.d);
    data.y.resize(cfg.n);
    data.feature_names = detail::synthetic_feature_names(cfg.d);
    const double sign_r = cfg.bias_rate > 0 ? 1.0 : -1.0;
    const double abs_r = std::abs(cfg.bias_rate);

    std::size_t accepted = 0;
    std::size_t rejections = 0;
    std::vector<std::uint8_t> row(cfg.d);
    while (accepted < cfg.n) {
        for (std::size_t j = 0; j < cfg.d; ++j) row[j] = rng.coin() ? 1 : 0;
        double mean_part = 0.0;
        for (std::size_t j = 0; j < half; ++j) mean_part += cfg.beta_stable[j] * row[j];
        mean_part += static_cast<double>(row[0] * row[1]);
        const double tau = std::abs(mean_part - sign_r * row[cfg.d - 1]);
        const double p = std::pow(abs_r, -5.0 * tau);
        if (!(p >= 0.0 && p <= 1.0 + 1e-12))
            throw error("generation", "selection probability left [0,1]");
        if (rng.uniform01() < p) {
            for (std::size_t j = 0; j < cfg.d; ++j) data.x(accepted, j) = row[j];
            data.y[accepted] = mean_part + rng.normal(0.0, cfg.noise_sd);
            ++accepted;
            rejections = 0;
        } else if (++rejections >= detail::kMaxConsecutiveRejections) {
            throw error("generation", "no acceptances in " + std::to_string(rejections) + " consecutive draws");
        }
    }
    return data;
}

// Binary outcome thresholded from a noisy sigmoid of the first three stable
// features plus an S4*S5 interaction; selection keeps a row with probability
// r when V_last equals the label, 1-r otherwise.
inline Dataset gen_classification(const ClassificationGenConfig& cfg) {
    cfg.validate();
    for (std::size_t attempt = 0; attempt <= 10; ++attempt) {
        Rng rng(cfg.seed + attempt);
        Dataset data;
        data.x = BinaryMatrix(cfg.n, cfg.d);
        data.y.resize(cfg.n);
        data.feature_names = detail::synthetic_feature_names(cfg.d);
        data.binary_outcome = true;

        // alpha_i = (-1)^i * (mod(i,3)+1) * d/3 for i = 1..3
        double alpha[3];
        for (std::size_t i = 1; i <= 3; ++i)
            alpha[i - 1] = (i % 2 == 0 ? 1.0 : -1.0) * static_cast<double>(i % 3 + 1) * static_cast<double>(cfg.d) / 3.0;

        std::size_t accepted = 0;
        std::size_t rejections = 0;
        std::vector<std::uint8_t> row(cfg.d);
        while (accepted < cfg.n) {
            for (std::size_t j = 0; j < cfg.d; ++j) row[j] = rng.coin() ? 1 : 0;
            double logit = 0.0;
            for (std::size_t i = 0; i < 3; ++i) logit += alpha[i] * row[i];
            logit -= cfg.interaction_scale * row[3] * row[4];
            const double latent = 1.0 / (1.0 + std::exp(-logit)) + rng.normal(0.0, cfg.latent_noise_sd);
            const double label = latent >= 0.5 ? 1.0 : 0.0;
            const double p = (static_cast<double>(row[cfg.d - 1]) == label) ? cfg.bias_rate : 1.0 - cfg.bias_rate;
            if (rng.uniform01() < p) {
                for (std::size_t j = 0; j < cfg.d; ++j) data.x(accepted, j) = row[j];
                data.y[accepted] = label;
                ++accepted;
                rejections = 0;
            } else if (++rejections >= detail::kMaxConsecutiveRejections) {
                throw error("generation", "no acceptances in " + std::to_string(rejections) + " consecutive draws");
            }
        }
        bool h0 = false, h1 = false;
        for (double v : data.y) (v > 0.5 ? h1 : h0) = true;
        if (h0 && h1) return data;
        // single-class draw; retry with the next seed
    }
    throw error("generation", "classification outcome stayed single-class after 10 reseeds");
}

// ---------------------------------------------------------------------------
// CSV ingestion: dichotomize around column means, drop features outside the
// frequency band, split rows into environments.

struct IngestConfig {
    std::string outcome_column;
    std::optional<std::string> environment_column;
    double frequency_low = 0.2;
    double frequency_high = 0.8;
};

struct DroppedFeature {
    std::string name;
    double frequency = 0.0;
};

struct IngestReport {
    std::vector<DroppedFeature> dropped_features;
    std::size_t dropped_rows = 0;
    std::vector<std::string> kept_features;
};

struct IngestResult {
    std::vector<Dataset> environments;
    IngestReport report;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (char ch : line) {
        if (ch == '"') {
            quoted = !quoted;
        } else if (ch == ',' && !quoted) {
            out.push_back(field);
            field.clear();
        } else {
            field += ch;
        }
    }
    out.push_back(field);
    for (auto& f : out) {
        while (!f.empty() && (f.back() == '\r' || f.back() == ' ')) f.pop_back();
        std::size_t start = 0;
        while (start < f.size() && f[start] == ' ') ++start;
        f = f.substr(start);
    }
    return out;
}

}  // namespace detail

inline IngestResult ingest_csv(std::istream& is, const IngestConfig& cfg) {
    std::string line;
    if (!std::getline(is, line)) throw error("ingestion", "input is empty");
    const std::vector<std::string> header = detail::split_csv_line(line);

    std::ptrdiff_t outcome_idx = -1, env_idx = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == cfg.outcome_column) outcome_idx = static_cast<std::ptrdiff_t>(i);
        if (cfg.environment_column && header[i] == *cfg.environment_column) env_idx = static_cast<std::ptrdiff_t>(i);
    }
    if (outcome_idx < 0) throw error("ingestion", "outcome column '" + cfg.outcome_column + "' not found");
    if (cfg.environment_column && env_idx < 0)
        throw error("ingestion", "environment column '" + *cfg.environment_column + "' not found");

    std::vector<std::size_t> feature_cols;
    for (std::size_t i = 0; i < header.size(); ++i)
        if (static_cast<std::ptrdiff_t>(i) != outcome_idx && static_cast<std::ptrdiff_t>(i) != env_idx)
            feature_cols.push_back(i);
    if (feature_cols.empty()) throw error("ingestion", "no feature columns besides outcome/environment");

    std::vector<std::vector<double>> raw;  // row-major feature values
    std::vector<double> outcome;
    std::vector<std::string> env_labels;
    std::size_t dropped_rows = 0;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size()) {
            ++dropped_rows;
            continue;
        }
        std::vector<double> vals(feature_cols.size());
        bool ok = true;
        for (std::size_t f = 0; f < feature_cols.size() && ok; ++f) {
            const std::string& s = fields[feature_cols[f]];
            if (s.empty()) { ok = false; break; }
            try {
                std::size_t pos = 0;
                vals[f] = std::stod(s, &pos);
                ok = pos == s.size();
            } catch (...) { ok = false; }
        }
        double yv = 0.0;
        if (ok) {
            const std::string& s = fields[static_cast<std::size_t>(outcome_idx)];
            try {
                std::size_t pos = 0;
                yv = std::stod(s, &pos);
                ok = !s.empty() && pos == s.size();
            } catch (...) { ok = false; }
        }
        if (!ok) {
            ++dropped_rows;
            continue;
        }
        raw.push_back(std::move(vals));
        outcome.push_back(yv);
        env_labels.push_back(env_idx >= 0 ? fields[static_cast<std::size_t>(env_idx)] : "all");
    }
    if (raw.empty()) throw error("ingestion", "no usable data rows");
    const std::size_t n = raw.size();

    // thresholds from full-file means so encodings agree across environments
    std::vector<double> mean(feature_cols.size(), 0.0);
    for (const auto& row : raw)
        for (std::size_t f = 0; f < row.size(); ++f) mean[f] += row[f];
    for (double& m : mean) m /= static_cast<double>(n);

    IngestResult result;
    std::vector<std::size_t> kept;
    for (std::size_t f = 0; f < feature_cols.size(); ++f) {
        std::size_t ones = 0;
        for (const auto& row : raw) ones += row[f] >= mean[f] ? 1 : 0;
        const double freq = static_cast<double>(ones) / static_cast<double>(n);
        if (freq < cfg.frequency_low || freq > cfg.frequency_high) {
            result.report.dropped_features.push_back({header[feature_cols[f]], freq});
        } else {
            kept.push_back(f);
            result.report.kept_features.push_back(header[feature_cols[f]]);
        }
    }
    result.report.dropped_rows = dropped_rows;
    if (kept.empty()) throw error("ingestion", "every feature fell outside the frequency band");

    bool outcome_binary = true;
    for (double v : outcome)
        if (v != 0.0 && v != 1.0) { outcome_binary = false; break; }

    std::map<std::string, std::vector<std::size_t>> groups;  // sorted by label
    for (std::size_t i = 0; i < n; ++i) groups[env_labels[i]].push_back(i);

    for (const auto& [label, rows] : groups) {
        Dataset ds;
        ds.x = BinaryMatrix(rows.size(), kept.size());
        ds.y.resize(rows.size());
        ds.feature_names = result.report.kept_features;
        ds.binary_outcome = outcome_binary;
        if (env_idx >= 0) ds.environment_label = label;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            for (std::size_t f = 0; f < kept.size(); ++f)
                ds.x(i, f) = raw[rows[i]][kept[f]] >= mean[kept[f]] ? 1 : 0;
            ds.y[i] = outcome[rows[i]];
        }
        result.environments.push_back(std::move(ds));
    }
    return result;
}

inline IngestResult ingest_csv_file(const std::string& path, const IngestConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw error("ingestion", "cannot open '" + path + "'");
    return ingest_csv(in, cfg);
}

// Dataset CSV: features, then outcome, then the environment label when set.
inline void write_dataset_csv(std::ostream& os, const Dataset& data, const std::string& outcome_name = "y") {
    for (std::size_t j = 0; j < data.x.cols(); ++j)
        os << (j ? "," : "") << (j < data.feature_names.size() ? data.feature_names[j] : "x" + std::to_string(j + 1));
    os << ',' << outcome_name;
    if (data.environment_label) os << ",environment";
    os << '\n';
    os.precision(17);
    for (std::size_t i = 0; i < data.x.rows(); ++i) {
        for (std::size_t j = 0; j < data.x.cols(); ++j) os << (j ? "," : "") << static_cast<int>(data.x(i, j));
        os << ',' << data.y[i];
        if (data.environment_label) os << ',' << *data.environment_label;
        os << '\n';
    }
}

// Minimal reader for the matching CLI path: every feature column must already
// be 0/1; the last column (or a named one) is the outcome.
inline Dataset read_binary_dataset_csv(std::istream& is, const std::string& outcome_column = "") {
    std::string line;
    if (!std::getline(is, line)) throw error("ingestion", "input is empty");
    const auto header = detail::split_csv_line(line);
    if (header.size() < 2) throw error("ingestion", "need at least one feature column and the outcome");
    std::size_t outcome_idx = header.size() - 1;
    if (!outcome_column.empty()) {
        bool found = false;
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == outcome_column) {
                outcome_idx = i;
                found = true;
            }
        if (!found) throw error("ingestion", "outcome column '" + outcome_column + "' not found");
    }
    std::vector<std::vector<std::uint8_t>> rows;
    std::vector<double> outcome;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size())
            throw error("ingestion", "row " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                                          " fields, expected " + std::to_string(header.size()));
        std::vector<std::uint8_t> row;
        row.reserve(header.size() - 1);
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i == outcome_idx) continue;
            if (fields[i] == "0") row.push_back(0);
            else if (fields[i] == "1") row.push_back(1);
            else throw error("ingestion", "feature value '" + fields[i] + "' at row " + std::to_string(line_no) +
                                              " is not 0/1; run ingestion first");
        }
        try {
            outcome.push_back(std::stod(fields[outcome_idx]));
        } catch (...) {
            throw error("ingestion", "outcome value '" + fields[outcome_idx] + "' at row " + std::to_string(line_no) +
                                         " is not numeric");
        }
        rows.push_back(std::move(row));
    }
    Dataset ds;
    ds.x = BinaryMatrix(rows.size(), header.size() - 1);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) ds.x(i, j) = rows[i][j];
    ds.y = std::move(outcome);
    for (std::size_t i = 0; i < header.size(); ++i)
        if (i != outcome_idx) ds.feature_names.push_back(header[i]);
    bool binary = true;
    for (double v : ds.y)
        if (v != 0.0 && v != 1.0) binary = false;
    ds.binary_outcome = binary;
    return ds;
}

}  // namespace bssp
