#include "fedcni/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "fedcni/errors.hpp"

namespace fedcni {

namespace {

// Linear-interpolated quantile of a sorted vector, q in [0,1].
double quantile_sorted(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double log_normal_pdf(double x, double mean, double var) {
    const double diff = x - mean;
    return -0.5 * std::log(2.0 * std::numbers::pi * var) - diff * diff / (2.0 * var);
}

}  // namespace

GmmFit fit_gmm(std::span<const double> values, int max_iters, double tol) {
    const std::size_t n = values.size();
    if (n < 2) {
        throw InsufficientDataError("fit_gmm needs at least 2 points, got " +
                                    std::to_string(n));
    }
    for (double v : values) {
        if (!std::isfinite(v)) throw NumericError("fit_gmm: non-finite input value");
    }

    GmmFit fit;
    fit.responsibilities.assign(n, {0.5, 0.5});

    // Data narrower than a few standard deviations of the variance floor is
    // indistinguishable from identical at the model's resolution; fitting two
    // floored components to it degenerates into weight-ratio noise.
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    if (sorted.back() - sorted.front() < 6.0 * std::sqrt(kGmmVarianceFloor)) {
        const double mid = 0.5 * (sorted.front() + sorted.back());
        fit.means = {mid, mid};
        fit.variances = {kGmmVarianceFloor, kGmmVarianceFloor};
        fit.converged = true;
        fit.degenerate = true;
        double ll = 0.0;
        for (double v : values) {
            ll += log_normal_pdf(v, fit.means[0], fit.variances[0]);
        }
        fit.log_likelihood = ll;
        fit.log_likelihood_trace.push_back(ll);
        return fit;
    }

    double mean_all = 0.0;
    for (double v : values) mean_all += v;
    mean_all /= static_cast<double>(n);
    double var_all = 0.0;
    for (double v : values) var_all += (v - mean_all) * (v - mean_all);
    var_all = std::max(var_all / static_cast<double>(n), kGmmVarianceFloor);

    fit.means = {quantile_sorted(sorted, 0.25), quantile_sorted(sorted, 0.75)};
    fit.variances = {var_all, var_all};
    fit.weights = {0.5, 0.5};

    // E step (log domain so tight components cannot overflow)
    auto e_step = [&]() {
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double lp[2];
            for (int k = 0; k < 2; ++k) {
                lp[k] = std::log(fit.weights[k]) +
                        log_normal_pdf(values[i], fit.means[k], fit.variances[k]);
            }
            const double m = std::max(lp[0], lp[1]);
            const double denom = std::exp(lp[0] - m) + std::exp(lp[1] - m);
            ll += m + std::log(denom);
            for (int k = 0; k < 2; ++k) {
                fit.responsibilities[i][k] = std::exp(lp[k] - m) / denom;
            }
        }
        fit.log_likelihood = ll;
        fit.log_likelihood_trace.push_back(ll);
        return ll;
    };

    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < max_iters; ++iter) {
        const double ll = e_step();
        if (iter > 0 && ll - prev_ll < tol) {
            fit.converged = true;
            break;
        }
        prev_ll = ll;

        // M step
        for (int k = 0; k < 2; ++k) {
            double nk = 0.0, mk = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                nk += fit.responsibilities[i][k];
                mk += fit.responsibilities[i][k] * values[i];
            }
            if (nk < 1e-12) {
                // emptied component: park it on the global stats
                fit.weights[k] = 1e-12;
                fit.means[k] = mean_all;
                fit.variances[k] = var_all;
                continue;
            }
            mk /= nk;
            double vk = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                vk += fit.responsibilities[i][k] * (values[i] - mk) * (values[i] - mk);
            }
            fit.weights[k] = nk / static_cast<double>(n);
            fit.means[k] = mk;
            fit.variances[k] = std::max(vk / nk, kGmmVarianceFloor);
        }
    }
    if (!fit.converged) e_step();  // sync responsibilities with final params

    if (fit.means[0] > fit.means[1]) {
        std::swap(fit.means[0], fit.means[1]);
        std::swap(fit.variances[0], fit.variances[1]);
        std::swap(fit.weights[0], fit.weights[1]);
        for (auto& r : fit.responsibilities) std::swap(r[0], r[1]);
    }
    // Components that collapsed onto each other carry no split information;
    // their responsibilities are pure weight ratio.
    if (fit.means[1] - fit.means[0] < std::sqrt(kGmmVarianceFloor)) {
        fit.degenerate = true;
    }
    return fit;
}

std::pair<std::vector<int>, std::vector<int>> split_by_component(const GmmFit& fit) {
    std::vector<int> low, high;
    for (std::size_t i = 0; i < fit.responsibilities.size(); ++i) {
        if (!fit.degenerate && fit.responsibilities[i][0] > 0.5) {
            low.push_back(static_cast<int>(i));
        } else {
            high.push_back(static_cast<int>(i));
        }
    }
    return {std::move(low), std::move(high)};
}

}  // namespace fedcni
