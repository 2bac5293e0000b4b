#pragma once

#include <array>
#include <span>
#include <utility>
#include <vector>

namespace fedcni {

// Two-component 1-D Gaussian mixture fitted by EM. Components are reported
// sorted by mean ascending; responsibilities follow that order.
struct GmmFit {
    std::array<double, 2> weights{0.5, 0.5};
    std::array<double, 2> means{0.0, 0.0};
    std::array<double, 2> variances{0.0, 0.0};
    std::vector<std::array<double, 2>> responsibilities;
    double log_likelihood = 0.0;
    std::vector<double> log_likelihood_trace;  // one entry per EM iteration
    bool converged = false;
    // All input values (near-)identical: both means equal, responsibilities
    // pinned to 0.5/0.5 so the split routes everything to the high component.
    bool degenerate = false;
};

inline constexpr double kGmmVarianceFloor = 1e-6;

// EM init: means at the 25th/75th percentiles, shared global variance,
// equal weights. Stops when the log-likelihood gain drops below tol.
// Throws InsufficientDataError for fewer than 2 points.
GmmFit fit_gmm(std::span<const double> values, int max_iters = 100, double tol = 1e-6);

// Point i goes low iff responsibility of the lower-mean component > 0.5;
// ties and degenerate fits go high. Returns (low_indices, high_indices).
std::pair<std::vector<int>, std::vector<int>> split_by_component(const GmmFit& fit);

}  // namespace fedcni
