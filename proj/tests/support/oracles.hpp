#pragma once

// Reference computations and random generators used by the tests. Nothing
// here calls into the library's numerical routines, so agreement with the
// library is a real cross-check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "pcdetect/matrix.hpp"

namespace oracle {

using Rows = std::vector<std::vector<double>>;

class Gen {
public:
    explicit Gen(std::uint64_t seed) : eng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
    std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(eng_); }
    std::size_t between(std::size_t lo, std::size_t hi) { return lo + index(hi - lo + 1); }

    std::vector<double> weights(std::size_t n)
    {
        std::vector<double> w(n);
        double s = 0.0;
        for (auto& x : w) {
            x = uniform(0.05, 1.0);
            s += x;
        }
        for (auto& x : w)
            x /= s;
        return w;
    }

private:
    std::mt19937_64 eng_;
};

inline Rows consistent_rows(const std::vector<double>& w)
{
    const std::size_t n = w.size();
    Rows r(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            r[i][j] = i == j ? 1.0 : w[i] / w[j];
    return r;
}

// Multiplies each upper entry by exp(U(-ln g, ln g)) and mirrors it.
inline Rows perturb_rows(Rows r, Gen& g, double gamma)
{
    const double lg = std::log(gamma);
    for (std::size_t i = 0; i < r.size(); ++i)
        for (std::size_t j = i + 1; j < r.size(); ++j) {
            r[i][j] *= std::exp(g.uniform(-lg, lg));
            r[j][i] = 1.0 / r[i][j];
        }
    return r;
}

// Upper entries drawn from {1/9, ..., 1/2, 1, 2, ..., 9}.
inline Rows saaty_rows(std::size_t n, Gen& g)
{
    Rows r(n, std::vector<double>(n, 1.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double k = static_cast<double>(g.between(1, 9));
            r[i][j] = g.index(2) ? k : 1.0 / k;
            r[j][i] = 1.0 / r[i][j];
        }
    return r;
}

inline pcdetect::PCMatrix make(const Rows& r) { return pcdetect::build_matrix(r); }

inline pcdetect::PCMatrix random_perturbed(std::size_t n, Gen& g, double gamma = 2.0)
{
    return make(perturb_rows(consistent_rows(g.weights(n)), g, gamma));
}

inline Eigen::MatrixXd to_eigen(const pcdetect::PCMatrix& c)
{
    const auto n = static_cast<Eigen::Index>(c.order());
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            m(i, j) = c(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    return m;
}

// Largest real eigenvalue from a dense QR-based solver.
inline double lambda_max(const pcdetect::PCMatrix& c)
{
    Eigen::EigenSolver<Eigen::MatrixXd> es(to_eigen(c), false);
    const auto ev = es.eigenvalues();
    double best = -1e300;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (std::abs(ev[i].imag()) < 1e-9)
            best = std::max(best, ev[i].real());
    return best;
}

// Perron vector normalized to sum 1.
inline std::vector<double> perron_vector(const pcdetect::PCMatrix& c)
{
    Eigen::EigenSolver<Eigen::MatrixXd> es(to_eigen(c), true);
    const auto ev = es.eigenvalues();
    Eigen::Index k = 0;
    for (Eigen::Index i = 1; i < ev.size(); ++i)
        if (ev[i].real() > ev[k].real())
            k = i;
    const Eigen::VectorXd v = es.eigenvectors().col(k).real();
    const double s = v.sum();
    std::vector<double> w(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i)
        w[static_cast<std::size_t>(i)] = v[i] / s;
    return w;
}

// Row geometric means by direct products, normalized to sum 1.
inline std::vector<double> gmm(const pcdetect::PCMatrix& c)
{
    const std::size_t n = c.order();
    std::vector<double> w(n);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double prod = 1.0;
        for (std::size_t j = 0; j < n; ++j)
            prod *= c(i, j);
        w[i] = std::pow(prod, 1.0 / static_cast<double>(n));
        s += w[i];
    }
    for (auto& x : w)
        x /= s;
    return w;
}

// For a reciprocal 3x3 minor on (i, j, k) the determinant is t + 1/t - 2 with
// t = c_ij c_jk / c_ik, and zero whenever an index repeats.
inline double det_closed_form(const pcdetect::PCMatrix& c, std::size_t i, std::size_t j, std::size_t k)
{
    if (i == j || j == k || i == k)
        return 0.0;
    const double t = c(i, j) * c(j, k) / c(i, k);
    return t + 1.0 / t - 2.0;
}

inline std::size_t argmax(const std::vector<double>& w)
{
    return static_cast<std::size_t>(std::max_element(w.begin(), w.end()) - w.begin());
}

} // namespace oracle
