#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "bssp/design.hpp"
#include "bssp/error.hpp"
#include "bssp/gwlp.hpp"
#include "bssp/matrix.hpp"
#include "bssp/rng.hpp"

namespace bssp {

struct BalanceConfig {
    double rho = 0.9;                    // exponential weight in the confounding measure
    std::size_t k_max = 3;               // highest interaction order of interest
    double zero_division_guard = 1e-12;  // minimum weighted group mass
    std::uint64_t term_budget = 5'000'000;  // cap on d * C(d-1, k) loss terms

    void validate() const {
        if (!(rho > 0.0 && rho < 1.0)) throw validation_error("rho must lie in (0,1)");
        if (k_max < 1) throw validation_error("k_max must be >= 1");
    }
};

namespace detail {

inline std::uint64_t binomial_u64(std::uint64_t a, std::uint64_t b) {
    if (b > a) return 0;
    b = std::min(b, a - b);
    std::uint64_t r = 1;
    for (std::uint64_t i = 1; i <= b; ++i) r = r * (a - b + i) / i;
    return r;
}

}  // namespace detail

// Generalized balancing loss of order k: for every treated column j and every
// k-subset I of the remaining columns, the squared difference of the weighted
// means of the interaction indicator X_I (elementwise AND) across the two
// X_j groups. Order 1 is the classic pairwise balancing loss.
inline double generalized_loss(const BinaryMatrix& x, const WeightVector& w, std::size_t k,
                               const BalanceConfig& cfg = {}) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    cfg.validate();
    if (w.size() != n) throw validation_error("weight vector length does not match row count");
    if (k < 1 || k >= d) throw validation_error("interaction order k must satisfy 1 <= k < d");
    check_pattern_width(d);
    const std::uint64_t terms = static_cast<std::uint64_t>(d) * detail::binomial_u64(d - 1, k);
    if (terms > cfg.term_budget)
        throw capacity_error("loss would expand " + std::to_string(terms) + " terms, budget is " +
                             std::to_string(cfg.term_budget));

    std::vector<std::uint64_t> packs(n);
    for (std::size_t i = 0; i < n; ++i) packs[i] = x.packed_row(i);

    // per-column weighted group masses
    std::vector<double> mass1(d, 0.0), mass0(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j)
            ((packs[i] >> j) & 1 ? mass1[j] : mass0[j]) += w[i];
    for (std::size_t j = 0; j < d; ++j)
        if (mass1[j] <= cfg.zero_division_guard || mass0[j] <= cfg.zero_division_guard)
            throw error("degenerate-column",
                        "column " + std::to_string(j + 1) + " has (near-)zero weighted mass in one group");

    double loss = 0.0;
    // enumerate subsets I with |I| = k, then treat each j outside I
    std::vector<std::size_t> cols(k);
    for (std::size_t i = 0; i < k; ++i) cols[i] = i;
    std::vector<double> sum1(d);
    while (true) {
        std::uint64_t mask = 0;
        for (std::size_t c : cols) mask |= (std::uint64_t{1} << c);
        double total = 0.0;
        std::fill(sum1.begin(), sum1.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            if ((packs[i] & mask) != mask) continue;  // interaction indicator is 0
            total += w[i];
            const std::uint64_t rest = packs[i] & ~mask;
            for (std::size_t j = 0; j < d; ++j)
                if ((rest >> j) & 1) sum1[j] += w[i];
        }
        for (std::size_t j = 0; j < d; ++j) {
            if ((mask >> j) & 1) continue;
            const double diff = sum1[j] / mass1[j] - (total - sum1[j]) / mass0[j];
            loss += diff * diff;
        }
        std::size_t i = k;
        while (i > 0 && cols[i - 1] == d - k + i - 1) --i;
        if (i == 0) break;
        ++cols[i - 1];
        for (std::size_t p = i; p < k; ++p) cols[p] = cols[p - 1] + 1;
    }
    return loss;
}

inline double first_order_loss(const BinaryMatrix& x, const WeightVector& w, const BalanceConfig& cfg = {}) {
    return generalized_loss(x, w, 1, cfg);
}

constexpr double kPsiEmpty = std::numeric_limits<double>::infinity();

// Confounding measure psi = sum_{j=1}^{R-1} rho^j A_j of the subdata viewed
// as a design. Empty subdata scores +infinity so that any candidate beats it.
inline double confounding_measure(const BinaryMatrix& x_sub, std::size_t template_resolution,
                                  const BalanceConfig& cfg = {}) {
    cfg.validate();
    if (template_resolution < 2) throw validation_error("template resolution must be >= 2");
    if (x_sub.rows() == 0) return kPsiEmpty;
    const Gwlp pattern = gwlp(design_from_binary(x_sub));
    double psi = 0.0;
    double rho_pow = 1.0;
    for (std::size_t j = 1; j <= template_resolution - 1 && j <= x_sub.cols(); ++j) {
        rho_pow *= cfg.rho;
        psi += rho_pow * pattern.values[j - 1];
    }
    return psi;
}

// ---------------------------------------------------------------------------
// Global balancing weights (the reweighting baseline)

struct GbrConfig {
    double lambda_norm = 1e-4;  // penalty pulling sum(W) back to n
    double lambda_l2 = 1e-6;
    std::size_t iterations = 300;
    double initial_step = 0.5;
    std::uint64_t seed = 0;  // reserved; the descent itself is deterministic
};

struct BalancingWeights {
    WeightVector weights;
    double first_order_loss = 0.0;
    double objective = 0.0;
    std::size_t iterations = 0;
};

namespace detail {

// first-order loss + gradient w.r.t. W; returns +inf loss on degenerate masses
inline double balance_loss_grad(const BinaryMatrix& x, const std::vector<double>& w, double guard,
                                std::vector<double>& grad) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    std::fill(grad.begin(), grad.end(), 0.0);
    std::vector<double> mass1(d, 0.0), mass0(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j)
            (x(i, j) ? mass1[j] : mass0[j]) += w[i];
    double loss = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        if (mass1[j] <= guard || mass0[j] <= guard) return std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < d; ++k) {
            if (k == j) continue;
            double s1 = 0.0, s0 = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                (x(i, j) ? s1 : s0) += w[i] * x(i, k);
            const double mu1 = s1 / mass1[j];
            const double mu0 = s0 / mass0[j];
            const double diff = mu1 - mu0;
            loss += diff * diff;
            for (std::size_t i = 0; i < n; ++i) {
                const double pull = x(i, j) ? (x(i, k) - mu1) / mass1[j] : -(x(i, k) - mu0) / mass0[j];
                grad[i] += 2.0 * diff * pull;
            }
        }
    }
    return loss;
}

}  // namespace detail

// Learns nonnegative sample weights minimizing the first-order balancing loss
// plus a sum-to-n penalty and an L2 term. Nonnegativity comes from the W = u^2
// parameterization; plain gradient descent with a backtracking step starting
// from u = 1.
inline BalancingWeights learn_balancing_weights(const BinaryMatrix& x, const GbrConfig& cfg = {},
                                                const BalanceConfig& balance = {}) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    if (n == 0) throw validation_error("cannot balance an empty sample");
    if (n == 1) return BalancingWeights{WeightVector{1.0}, 0.0, 0.0, 0};
    for (std::size_t j = 0; j < d; ++j) {
        bool any0 = false, any1 = false;
        for (std::size_t i = 0; i < n; ++i) (x(i, j) ? any1 : any0) = true;
        if (!any0 || !any1)
            throw error("degenerate-column", "column " + std::to_string(j + 1) + " is constant");
    }

    std::vector<double> u(n, 1.0), w(n, 1.0);
    std::vector<double> loss_grad(n, 0.0), grad_u(n, 0.0);

    auto evaluate = [&](const std::vector<double>& uu, double& balance_part) {
        for (std::size_t i = 0; i < n; ++i) w[i] = uu[i] * uu[i];
        balance_part = detail::balance_loss_grad(x, w, balance.zero_division_guard, loss_grad);
        if (!std::isfinite(balance_part)) return balance_part;
        double sum_w = 0.0, sq = 0.0;
        for (double wi : w) {
            sum_w += wi;
            sq += wi * wi;
        }
        const double excess = sum_w - static_cast<double>(n);
        const double obj = balance_part + cfg.lambda_norm * excess * excess + cfg.lambda_l2 * sq;
        for (std::size_t i = 0; i < n; ++i) {
            const double dW = loss_grad[i] + 2.0 * cfg.lambda_norm * excess + 2.0 * cfg.lambda_l2 * w[i];
            grad_u[i] = dW * 2.0 * uu[i];
        }
        return obj;
    };

    double balance_part = 0.0;
    double obj = evaluate(u, balance_part);
    if (!std::isfinite(obj)) throw error("optimization-diverged", "non-finite loss at iteration 0");
    double step = cfg.initial_step;
    std::vector<double> trial(n), grad_cur = grad_u;
    std::size_t it = 0;
    for (; it < cfg.iterations; ++it) {
        for (std::size_t i = 0; i < n; ++i) trial[i] = u[i] - step * grad_cur[i];
        double trial_balance = 0.0;
        const double trial_obj = evaluate(trial, trial_balance);
        if (std::isfinite(trial_obj) && trial_obj < obj) {
            u.swap(trial);
            obj = trial_obj;
            balance_part = trial_balance;
            grad_cur = grad_u;
            step *= 1.1;
        } else {
            step *= 0.5;
            if (step < 1e-14) break;
        }
    }

    BalancingWeights out;
    out.weights.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.weights[i] = u[i] * u[i];
    out.first_order_loss = balance_part;
    out.objective = obj;
    out.iterations = it;
    return out;
}

// ---------------------------------------------------------------------------
// Correlation diagnostics

struct NamedColumn {
    std::string name;
    std::vector<double> values;
};

struct CorrelationMatrix {
    std::vector<std::string> names;
    std::vector<double> values;  // k x k row-major
    std::vector<bool> constant_flags;

    double at(std::size_t i, std::size_t j) const { return values[i * names.size() + j]; }
};

// (Weighted) Pearson correlations over the predictor columns plus any extra
// named columns. Constant columns are flagged and their correlations set to 0
// rather than raising.
inline CorrelationMatrix correlation_diagnostics(const BinaryMatrix& x, const std::vector<NamedColumn>& extras = {},
                                                 const WeightVector* w = nullptr,
                                                 const std::vector<std::string>& feature_names = {}) {
    const std::size_t n = x.rows();
    if (n < 2) throw validation_error("correlation diagnostics need at least 2 rows");
    std::vector<NamedColumn> cols;
    cols.reserve(x.cols() + extras.size());
    for (std::size_t j = 0; j < x.cols(); ++j) {
        NamedColumn c;
        c.name = j < feature_names.size() ? feature_names[j] : "x" + std::to_string(j + 1);
        c.values.resize(n);
        for (std::size_t i = 0; i < n; ++i) c.values[i] = x(i, j);
        cols.push_back(std::move(c));
    }
    for (const auto& e : extras) {
        if (e.values.size() != n) throw validation_error("extra column '" + e.name + "' has wrong length");
        cols.push_back(e);
    }

    const std::size_t k = cols.size();
    double total = 0.0;
    std::vector<double> wt(n, 1.0);
    if (w != nullptr) {
        if (w->size() != n) throw validation_error("weight vector length does not match row count");
        wt = *w;
    }
    for (double v : wt) total += v;
    if (total <= 0.0) throw validation_error("weights sum to zero");

    std::vector<double> mean(k, 0.0), var(k, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t i = 0; i < n; ++i) mean[c] += wt[i] * cols[c].values[i];
        mean[c] /= total;
        for (std::size_t i = 0; i < n; ++i) {
            const double dv = cols[c].values[i] - mean[c];
            var[c] += wt[i] * dv * dv;
        }
        var[c] /= total;
    }

    CorrelationMatrix out;
    out.values.assign(k * k, 0.0);
    out.constant_flags.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        out.names.push_back(cols[c].name);
        out.constant_flags[c] = var[c] <= 1e-15;
    }
    for (std::size_t a = 0; a < k; ++a) {
        out.values[a * k + a] = 1.0;
        for (std::size_t b = a + 1; b < k; ++b) {
            double corr = 0.0;
            if (!out.constant_flags[a] && !out.constant_flags[b]) {
                double cov = 0.0;
                for (std::size_t i = 0; i < n; ++i)
                    cov += wt[i] * (cols[a].values[i] - mean[a]) * (cols[b].values[i] - mean[b]);
                cov /= total;
                corr = cov / std::sqrt(var[a] * var[b]);
            }
            out.values[a * k + b] = corr;
            out.values[b * k + a] = corr;
        }
    }
    return out;
}

inline void write_correlation_csv(std::ostream& os, const CorrelationMatrix& m) {
    os << "column";
    for (const auto& name : m.names) os << ',' << name;
    os << '\n';
    const std::size_t k = m.names.size();
    for (std::size_t i = 0; i < k; ++i) {
        os << m.names[i];
        for (std::size_t j = 0; j < k; ++j) os << ',' << m.at(i, j);
        os << '\n';
    }
}

// Mean/spread of psi over uniformly random row subsets of a design, one entry
// per requested size. Used to chart how the measure shrinks as subdata grows.
struct PsiCurvePoint {
    std::size_t size = 0;
    double mean = 0.0;
    double stddev = 0.0;
    double min = 0.0;
    double max = 0.0;
};

inline std::vector<PsiCurvePoint> psi_random_subset_curve(const Design& tmpl, const std::vector<std::size_t>& sizes,
                                                          std::size_t replications, std::uint64_t seed,
                                                          const BalanceConfig& cfg = {}) {
    const std::size_t m = tmpl.runs();
    const std::size_t res = gwlp(tmpl).resolution;
    const BinaryMatrix full = tmpl.zero_one_view();
    std::vector<PsiCurvePoint> out;
    for (std::size_t size : sizes) {
        if (size == 0 || size > m) throw validation_error("subset size must lie in [1, runs]");
        Rng rng(mix_seed(seed, size));
        std::vector<std::size_t> order(m);
        PsiCurvePoint pt;
        pt.size = size;
        pt.min = std::numeric_limits<double>::infinity();
        pt.max = -pt.min;
        std::vector<double> samples;
        samples.reserve(replications);
        for (std::size_t rep = 0; rep < replications; ++rep) {
            for (std::size_t i = 0; i < m; ++i) order[i] = i;
            for (std::size_t i = 0; i < size; ++i)  // partial Fisher-Yates
                std::swap(order[i], order[i + rng.below(m - i)]);
            const double psi = confounding_measure(
                full.select_rows({order.begin(), order.begin() + static_cast<std::ptrdiff_t>(size)}), res, cfg);
            samples.push_back(psi);
            pt.mean += psi;
            pt.min = std::min(pt.min, psi);
            pt.max = std::max(pt.max, psi);
        }
        pt.mean /= static_cast<double>(replications);
        double ss = 0.0;
        for (double s : samples) ss += (s - pt.mean) * (s - pt.mean);
        pt.stddev = replications > 1 ? std::sqrt(ss / static_cast<double>(replications - 1)) : 0.0;
        out.push_back(pt);
    }
    return out;
}

inline void write_psi_curve_csv(std::ostream& os, const std::vector<PsiCurvePoint>& curve) {
    os << "size,mean_psi,stddev_psi,min_psi,max_psi\n";
    for (const auto& pt : curve)
        os << pt.size << ',' << pt.mean << ',' << pt.stddev << ',' << pt.min << ',' << pt.max << '\n';
}

}  // namespace bssp
