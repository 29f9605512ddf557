#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "pcdetect/matrix.hpp"

namespace pcdetect {

struct EvmResult {
    PriorityVector priorities;
    double lambda_max = 0.0;
    int iterations = 0;
};

inline constexpr double kEvmTolerance = 1e-10;
inline constexpr int kEvmMaxIterations = 10000;

/// Principal eigenvector by power iteration.
///
/// Starts from the all-ones vector and renormalizes to unit Manhattan norm on
/// every step. Stops once the Rayleigh-quotient residual max|Cw - lambda w|
/// falls below `tol`; the returned weights are that converged iterate.
inline EvmResult priority_evm(const PCMatrix& c, double tol = kEvmTolerance, int max_iter = kEvmMaxIterations)
{
    const std::size_t n = c.order();
    std::vector<double> w(n, 1.0 / static_cast<double>(n));
    std::vector<double> y(n);

    for (int it = 1; it <= max_iter; ++it) {
        double wy = 0.0, ww = 0.0, sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto r = c.row(i);
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                acc += r[j] * w[j];
            y[i] = acc;
            wy += w[i] * acc;
            ww += w[i] * w[i];
            sum += acc;
        }
        const double lambda = wy / ww;
        double residual = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            residual = std::max(residual, std::abs(y[i] - lambda * w[i]));
        if (residual <= tol)
            return {PriorityVector{w, PriorityMethod::EVM}, lambda, it};
        for (std::size_t i = 0; i < n; ++i)
            w[i] = y[i] / sum;
    }
    throw Error(ErrorCode::NoConvergence, "power iteration did not converge in " + std::to_string(max_iter) +
                                              " iterations");
}

/// Row geometric means, rescaled to sum 1. Evaluated in log space so that the
/// very large entries produced by attacks do not overflow the row products.
inline PriorityVector priority_gmm(const PCMatrix& c)
{
    const std::size_t n = c.order();
    std::vector<double> logs(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (double x : c.row(i))
            s += std::log(x);
        logs[i] = s / static_cast<double>(n);
    }
    const double top = *std::max_element(logs.begin(), logs.end());
    std::vector<double> w(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = std::exp(logs[i] - top);
        total += w[i];
    }
    for (double& x : w)
        x /= total;
    return {std::move(w), PriorityMethod::GMM};
}

inline PriorityVector priorities(const PCMatrix& c, PriorityMethod method)
{
    return method == PriorityMethod::EVM ? priority_evm(c).priorities : priority_gmm(c);
}

} // namespace pcdetect
