#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "bssp/error.hpp"
#include "bssp/matrix.hpp"
#include "bssp/rng.hpp"

namespace bssp {

enum class ModelFamily { linear, logistic };

struct ModelFit {
    ModelFamily family = ModelFamily::linear;
    std::vector<double> coefficients;
    double intercept = 0.0;
    double lambda_l1 = 0.0;
    bool converged = false;
    std::size_t iterations = 0;
};

namespace detail {

inline double soft_threshold(double z, double gamma) {
    if (z > gamma) return z - gamma;
    if (z < -gamma) return z + gamma;
    return 0.0;
}

inline std::vector<double> normalized_weights(std::size_t n, const WeightVector* w) {
    std::vector<double> wn(n, 1.0 / static_cast<double>(n));
    if (w != nullptr) {
        if (w->size() != n) throw validation_error("weight vector length does not match sample count");
        double total = 0.0;
        for (double v : *w) {
            if (v < 0.0) throw validation_error("weights must be nonnegative");
            total += v;
        }
        if (total <= 0.0) throw validation_error("total weight must be positive");
        for (std::size_t i = 0; i < n; ++i) wn[i] = (*w)[i] / total;
    }
    return wn;
}

// Cyclic coordinate descent for
//   sum_i wn_i (y_i - b0 - x_i beta)^2 + lambda * ||beta||_1,
// wn already normalized to sum 1, intercept unpenalized. Columns may be any
// reals (the logistic majorizer reuses this with working responses).
struct CdResult {
    bool converged = false;
    std::size_t sweeps = 0;
};

inline CdResult coordinate_descent(const BinaryMatrix& x, const std::vector<double>& y,
                                   const std::vector<double>& wn, double lambda, double& intercept,
                                   std::vector<double>& beta, double tol = 1e-8, std::size_t max_sweeps = 10000) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    std::vector<double> colsq(d, 0.0);  // sum wn * x^2 (binary x, so sum of wn where x=1)
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j)
            if (x(i, j)) colsq[j] += wn[i];

    std::vector<double> residual(n);
    for (std::size_t i = 0; i < n; ++i) {
        double eta = intercept;
        for (std::size_t j = 0; j < d; ++j)
            if (x(i, j)) eta += beta[j];
        residual[i] = y[i] - eta;
    }

    CdResult out;
    for (out.sweeps = 1; out.sweeps <= max_sweeps; ++out.sweeps) {
        double max_change = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            if (colsq[j] <= 0.0) continue;  // all-zero column, coefficient stays put
            double c = colsq[j] * beta[j];
            for (std::size_t i = 0; i < n; ++i)
                if (x(i, j)) c += wn[i] * residual[i];
            const double updated = soft_threshold(c, lambda / 2.0) / colsq[j];
            const double change = updated - beta[j];
            if (change != 0.0) {
                for (std::size_t i = 0; i < n; ++i)
                    if (x(i, j)) residual[i] -= change;
                beta[j] = updated;
                max_change = std::max(max_change, std::abs(change));
            }
        }
        double shift = 0.0;
        for (std::size_t i = 0; i < n; ++i) shift += wn[i] * residual[i];
        if (shift != 0.0) {
            intercept += shift;
            for (double& r : residual) r -= shift;
            max_change = std::max(max_change, std::abs(shift));
        }
        if (max_change < tol) {
            out.converged = true;
            break;
        }
    }
    out.sweeps = std::min(out.sweeps, max_sweeps);
    return out;
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace detail

// Weighted lasso regression. Objective, with weights normalized to sum 1:
//   sum_i wn_i (y_i - b0 - x_i beta)^2 + lambda * ||beta||_1.
// The normalization makes fits invariant to rescaling W and keeps lambda
// comparable between weighted and unweighted runs.
inline ModelFit fit_linear(const BinaryMatrix& x, const std::vector<double>& y, const WeightVector* w = nullptr,
                           double lambda_l1 = 0.0, double tol = 1e-8, std::size_t max_sweeps = 10000) {
    const std::size_t n = x.rows();
    if (n == 0) throw validation_error("cannot fit on an empty sample");
    if (y.size() != n) throw validation_error("outcome length does not match row count");
    if (lambda_l1 < 0.0) throw validation_error("lambda must be nonnegative");
    const std::vector<double> wn = detail::normalized_weights(n, w);

    ModelFit fit;
    fit.family = ModelFamily::linear;
    fit.lambda_l1 = lambda_l1;
    fit.coefficients.assign(x.cols(), 0.0);
    for (std::size_t i = 0; i < n; ++i) fit.intercept += wn[i] * y[i];
    const auto cd = detail::coordinate_descent(x, y, wn, lambda_l1, fit.intercept, fit.coefficients, tol, max_sweeps);
    fit.converged = cd.converged;
    fit.iterations = cd.sweeps;
    return fit;
}

// Weighted L1-regularized logistic regression by iteratively reweighted least
// squares with the coordinate-descent lasso on each quadratic majorizer.
// Objective: sum_i wn_i [log(1+exp(eta_i)) - y_i eta_i] + lambda * ||beta||_1.
inline ModelFit fit_logistic(const BinaryMatrix& x, const std::vector<double>& y, const WeightVector* w = nullptr,
                             double lambda_l1 = 0.0, double tol = 1e-8, std::size_t max_outer = 100) {
    const std::size_t n = x.rows();
    if (n == 0) throw validation_error("cannot fit on an empty sample");
    if (y.size() != n) throw validation_error("outcome length does not match row count");
    bool any0 = false, any1 = false;
    for (double v : y) {
        if (v == 0.0) any0 = true;
        else if (v == 1.0) any1 = true;
        else throw validation_error("logistic outcome must be 0 or 1");
    }
    if (!any0 || !any1) throw validation_error("logistic fit needs both outcome classes present");
    const std::vector<double> wn = detail::normalized_weights(n, w);

    ModelFit fit;
    fit.family = ModelFamily::logistic;
    fit.lambda_l1 = lambda_l1;
    fit.coefficients.assign(x.cols(), 0.0);

    std::vector<double> eta(n), prob(n), irls_w(n), z(n);
    for (std::size_t outer = 1; outer <= max_outer; ++outer) {
        double wsum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double e = fit.intercept;
            for (std::size_t j = 0; j < x.cols(); ++j)
                if (x(i, j)) e += fit.coefficients[j];
            eta[i] = e;
            double p = detail::sigmoid(e);
            p = std::clamp(p, 1e-9, 1.0 - 1e-9);
            prob[i] = p;
            irls_w[i] = wn[i] * p * (1.0 - p);
            z[i] = e + (y[i] - p) / (p * (1.0 - p));
            wsum += irls_w[i];
        }
        if (wsum <= 0.0) break;
        std::vector<double> wq(n);
        for (std::size_t i = 0; i < n; ++i) wq[i] = irls_w[i] / wsum;
        // majorizer is (1/2) sum irls_w (z - eta)^2, hence the 2/wsum rescale
        double b0 = fit.intercept;
        std::vector<double> beta = fit.coefficients;
        detail::coordinate_descent(x, z, wq, 2.0 * lambda_l1 / wsum, b0, beta, std::max(tol * 1e-2, 1e-12), 2000);
        double max_change = std::abs(b0 - fit.intercept);
        for (std::size_t j = 0; j < x.cols(); ++j)
            max_change = std::max(max_change, std::abs(beta[j] - fit.coefficients[j]));
        fit.intercept = b0;
        fit.coefficients = std::move(beta);
        fit.iterations = outer;
        if (max_change < tol) {
            fit.converged = true;
            break;
        }
    }
    return fit;
}

inline std::vector<double> predict(const ModelFit& fit, const BinaryMatrix& x) {
    if (x.cols() != fit.coefficients.size()) throw validation_error("predictor count does not match the fit");
    std::vector<double> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double eta = fit.intercept;
        for (std::size_t j = 0; j < x.cols(); ++j)
            if (x(i, j)) eta += fit.coefficients[j];
        out[i] = fit.family == ModelFamily::linear ? eta : detail::sigmoid(eta);
    }
    return out;
}

// --------------------------------------------------------------------------
// Optimality diagnostics (used heavily by the test suites)

// Max KKT violation of a lasso solution: coordinates at zero must have
// |gradient| <= lambda, active coordinates must sit at |gradient| = lambda.
inline double lasso_kkt_violation(const BinaryMatrix& x, const std::vector<double>& y, const WeightVector* w,
                                  const ModelFit& fit) {
    const std::size_t n = x.rows();
    const std::vector<double> wn = detail::normalized_weights(n, w);
    const std::vector<double> pred = predict(fit, x);
    double worst = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
        double grad = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (x(i, j)) grad += -2.0 * wn[i] * (y[i] - pred[i]);
        if (std::abs(fit.coefficients[j]) > 1e-12)
            worst = std::max(worst, std::abs(grad + fit.lambda_l1 * (fit.coefficients[j] > 0 ? 1.0 : -1.0)));
        else
            worst = std::max(worst, std::max(0.0, std::abs(grad) - fit.lambda_l1));
    }
    double g0 = 0.0;
    for (std::size_t i = 0; i < n; ++i) g0 += -2.0 * wn[i] * (y[i] - pred[i]);
    return std::max(worst, std::abs(g0));
}

// Smooth-part gradient of the logistic objective at (intercept, beta);
// element 0 is the intercept coordinate.
inline std::vector<double> logistic_gradient(const BinaryMatrix& x, const std::vector<double>& y,
                                             const WeightVector* w, double intercept,
                                             const std::vector<double>& beta) {
    const std::size_t n = x.rows();
    const std::vector<double> wn = detail::normalized_weights(n, w);
    std::vector<double> grad(x.cols() + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double eta = intercept;
        for (std::size_t j = 0; j < x.cols(); ++j)
            if (x(i, j)) eta += beta[j];
        const double diff = wn[i] * (detail::sigmoid(eta) - y[i]);
        grad[0] += diff;
        for (std::size_t j = 0; j < x.cols(); ++j)
            if (x(i, j)) grad[j + 1] += diff;
    }
    return grad;
}

inline double logistic_nll(const BinaryMatrix& x, const std::vector<double>& y, const WeightVector* w,
                           double intercept, const std::vector<double>& beta) {
    const std::size_t n = x.rows();
    const std::vector<double> wn = detail::normalized_weights(n, w);
    double nll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double eta = intercept;
        for (std::size_t j = 0; j < x.cols(); ++j)
            if (x(i, j)) eta += beta[j];
        // log(1+exp(eta)) - y*eta, stabilized
        const double lse = eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
        nll += wn[i] * (lse - y[i] * eta);
    }
    return nll;
}

// --------------------------------------------------------------------------
// Cross-validated lambda selection

struct CvConfig {
    std::size_t folds = 5;
    std::size_t grid_size = 20;
    double lambda_min_ratio = 1e-3;
    std::uint64_t seed = 0;
};

namespace detail {

inline std::vector<std::size_t> cv_fold_assignment(const std::vector<double>& y, bool stratify, std::size_t folds,
                                                   std::uint64_t seed) {
    const std::size_t n = y.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(mix_seed(seed, 0x666f6c64ULL));  // "fold"
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    std::vector<std::size_t> fold(n, 0);
    if (!stratify) {
        for (std::size_t pos = 0; pos < n; ++pos) fold[order[pos]] = pos % folds;
    } else {
        std::size_t next0 = 0, next1 = 0;
        for (std::size_t pos = 0; pos < n; ++pos) {
            auto& counter = y[order[pos]] > 0.5 ? next1 : next0;
            fold[order[pos]] = counter++ % folds;
        }
    }
    return fold;
}

}  // namespace detail

// Picks lambda by k-fold cross validation over a descending log grid with
// warm starts; validation error is weighted squared error of predictions
// (probabilities in the logistic case). Ties go to the larger lambda.
inline double cross_validate_lambda(ModelFamily family, const BinaryMatrix& x, const std::vector<double>& y,
                                    const WeightVector* w = nullptr, const CvConfig& cfg = {}) {
    const std::size_t n = x.rows();
    if (n < cfg.folds) return 0.0;  // too small to cross-validate, fall back to unpenalized
    const std::vector<double> wn = detail::normalized_weights(n, w);

    // lambda_max: smallest lambda whose solution is the null model
    double ybar = 0.0;
    for (std::size_t i = 0; i < n; ++i) ybar += wn[i] * y[i];
    double lambda_max = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
        double g = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (x(i, j)) g += wn[i] * (y[i] - ybar);
        lambda_max = std::max(lambda_max, (family == ModelFamily::linear ? 2.0 : 1.0) * std::abs(g));
    }
    if (lambda_max <= 0.0) return 0.0;

    std::vector<double> grid(cfg.grid_size);
    const double log_max = std::log(lambda_max);
    const double log_min = log_max + std::log(cfg.lambda_min_ratio);
    for (std::size_t g = 0; g < cfg.grid_size; ++g) {
        const double t = cfg.grid_size == 1 ? 0.0 : static_cast<double>(g) / static_cast<double>(cfg.grid_size - 1);
        grid[g] = std::exp(log_max + t * (log_min - log_max));
    }

    const bool logistic = family == ModelFamily::logistic;
    const auto fold = detail::cv_fold_assignment(y, logistic, cfg.folds, cfg.seed);
    std::vector<double> cv_error(cfg.grid_size, 0.0);

    for (std::size_t f = 0; f < cfg.folds; ++f) {
        std::vector<std::size_t> train_idx, test_idx;
        for (std::size_t i = 0; i < n; ++i) (fold[i] == f ? test_idx : train_idx).push_back(i);
        if (train_idx.empty() || test_idx.empty()) continue;
        BinaryMatrix xtr = x.select_rows(train_idx);
        std::vector<double> ytr(train_idx.size());
        WeightVector wtr(train_idx.size());
        for (std::size_t i = 0; i < train_idx.size(); ++i) {
            ytr[i] = y[train_idx[i]];
            wtr[i] = wn[train_idx[i]];
        }
        if (logistic) {
            bool h0 = false, h1 = false;
            for (double v : ytr) (v > 0.5 ? h1 : h0) = true;
            if (!h0 || !h1) continue;
        }
        BinaryMatrix xte = x.select_rows(test_idx);

        // warm-started path down the grid for the linear family
        ModelFit warm;
        warm.family = family;
        warm.coefficients.assign(x.cols(), 0.0);
        const auto wnorm = detail::normalized_weights(train_idx.size(), &wtr);
        for (std::size_t i = 0; i < train_idx.size(); ++i) warm.intercept += wnorm[i] * ytr[i];
        for (std::size_t g = 0; g < cfg.grid_size; ++g) {
            if (family == ModelFamily::linear) {
                warm.lambda_l1 = grid[g];
                detail::coordinate_descent(xtr, ytr, wnorm, grid[g], warm.intercept, warm.coefficients);
            } else {
                warm = fit_logistic(xtr, ytr, &wtr, grid[g]);
            }
            const std::vector<double> pred = predict(warm, xte);
            for (std::size_t i = 0; i < test_idx.size(); ++i) {
                const double diff = y[test_idx[i]] - pred[i];
                cv_error[g] += wn[test_idx[i]] * diff * diff;
            }
        }
    }

    std::size_t best = 0;
    for (std::size_t g = 1; g < cfg.grid_size; ++g)
        if (cv_error[g] < cv_error[best]) best = g;
    return grid[best];
}

}  // namespace bssp
