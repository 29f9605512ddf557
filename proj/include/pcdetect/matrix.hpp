#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcdetect/error.hpp"

namespace pcdetect {

inline constexpr double kReciprocityTolerance = 1e-12;

enum class PriorityMethod { EVM, GMM };

inline std::string to_string(PriorityMethod m) { return m == PriorityMethod::EVM ? "evm" : "gmm"; }

inline PriorityMethod parse_priority_method(const std::string& s)
{
    if (s == "evm" || s == "EVM")
        return PriorityMethod::EVM;
    if (s == "gmm" || s == "GMM")
        return PriorityMethod::GMM;
    throw Error(ErrorCode::InvalidArgument, "unknown priority method '" + s + "'");
}

// Normalized ranking weights (sum 1, all positive).
struct PriorityVector {
    std::vector<double> weights;
    PriorityMethod method = PriorityMethod::GMM;

    std::size_t size() const { return weights.size(); }
    double operator[](std::size_t i) const { return weights[i]; }
};

// Row-major dense square matrix of reals with no structural invariants.
struct SquareGrid {
    std::size_t n = 0;
    std::vector<double> values;

    SquareGrid() = default;
    explicit SquareGrid(std::size_t order, double fill = 0.0) : n(order), values(order * order, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return values[i * n + j]; }
    double operator()(std::size_t i, std::size_t j) const { return values[i * n + j]; }
};

/// Positive reciprocal pairwise-comparison matrix.
///
/// The upper triangle is authoritative: every stored lower entry is exactly
/// `1.0 / upper`, and the diagonal is exactly 1. All mutation goes through
/// `set_pair`, which keeps that form, so reciprocity holds bit-exactly after
/// any sequence of edits and survives serialization.
class PCMatrix {
public:
    std::size_t order() const noexcept { return n_; }

    double operator()(std::size_t i, std::size_t j) const { return v_[i * n_ + j]; }

    std::span<const double> row(std::size_t i) const { return {v_.data() + i * n_, n_}; }
    std::span<const double> data() const { return v_; }

    double max_entry() const
    {
        double m = 0.0;
        for (double x : v_)
            m = std::max(m, x);
        return m;
    }

    // Sets c_ij = value and c_ji = 1/value (i != j), preserving canonical form.
    void set_pair(std::size_t i, std::size_t j, double value)
    {
        if (i >= n_ || j >= n_ || i == j)
            throw Error(ErrorCode::InvalidArgument, "set_pair needs distinct in-range indices",
                        Error::Location{i, j});
        if (!(value > 0.0) || !std::isfinite(value))
            throw Error(ErrorCode::NonPositiveEntry, "comparison must be finite and > 0", Error::Location{i, j});
        const std::size_t a = std::min(i, j);
        const std::size_t b = std::max(i, j);
        const double upper = (i < j) ? value : 1.0 / value;
        v_[a * n_ + b] = upper;
        v_[b * n_ + a] = 1.0 / upper;
    }

    std::vector<std::vector<double>> rows() const
    {
        std::vector<std::vector<double>> out(n_);
        for (std::size_t i = 0; i < n_; ++i)
            out[i].assign(v_.begin() + static_cast<std::ptrdiff_t>(i * n_),
                          v_.begin() + static_cast<std::ptrdiff_t>((i + 1) * n_));
        return out;
    }

    friend bool operator==(const PCMatrix&, const PCMatrix&) = default;

    // Canonical construction from an upper triangle; lower triangle is derived.
    static PCMatrix from_upper(std::size_t n, const std::vector<double>& full_row_major)
    {
        PCMatrix m;
        m.n_ = n;
        m.v_.assign(n * n, 1.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                const double u = full_row_major[i * n + j];
                m.v_[i * n + j] = u;
                m.v_[j * n + i] = 1.0 / u;
            }
        return m;
    }

private:
    std::size_t n_ = 0;
    std::vector<double> v_;
};

/// Validates a raw square array and returns it as a PCMatrix.
/// Checks, in order: squareness, order >= 3, finite positive entries, unit
/// diagonal and reciprocity (|c_ij * c_ji - 1| <= 1e-12). A reciprocity
/// failure reports the worst offending pair (row < column).
inline PCMatrix build_matrix(const std::vector<std::vector<double>>& raw)
{
    const std::size_t n = raw.size();
    for (std::size_t i = 0; i < n; ++i)
        if (raw[i].size() != n)
            throw Error(ErrorCode::NonSquare,
                        "row " + std::to_string(i) + " has " + std::to_string(raw[i].size()) +
                            " entries, expected " + std::to_string(n),
                        Error::Location{i, 0});
    if (n < 3)
        throw Error(ErrorCode::OrderTooSmall, "order " + std::to_string(n) + " < 3");

    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double x = raw[i][j];
            if (!std::isfinite(x) || !(x > 0.0))
                throw Error(ErrorCode::NonPositiveEntry, "entry is not finite and positive", Error::Location{i, j});
        }

    double worst = 0.0;
    Error::Location worst_at{};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            const double dev = std::abs(raw[i][j] * raw[j][i] - 1.0);
            if (dev > worst) {
                worst = dev;
                worst_at = {i, j};
            }
        }
    if (worst > kReciprocityTolerance)
        throw Error(ErrorCode::ReciprocityViolation,
                    "c_ij * c_ji deviates from 1 by " + std::to_string(worst) + " at (" +
                        std::to_string(worst_at.first) + "," + std::to_string(worst_at.second) + ")",
                    worst_at);

    std::vector<double> flat(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            flat[i * n + j] = raw[i][j];
    return PCMatrix::from_upper(n, flat);
}

/// The consistent matrix induced by a weight vector: c_ij = w_i / w_j.
inline PCMatrix consistent_from_weights(std::span<const double> w)
{
    const std::size_t n = w.size();
    if (n < 3)
        throw Error(ErrorCode::OrderTooSmall, "order " + std::to_string(n) + " < 3");
    for (std::size_t i = 0; i < n; ++i)
        if (!(w[i] > 0.0) || !std::isfinite(w[i]))
            throw Error(ErrorCode::ZeroWeight, "weight " + std::to_string(i) + " is not positive",
                        Error::Location{i, 0});
    std::vector<double> flat(n * n, 1.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            flat[i * n + j] = w[i] / w[j];
    return PCMatrix::from_upper(n, flat);
}

inline PCMatrix consistent_from_weights(const PriorityVector& w) { return consistent_from_weights(w.weights); }

// {"n": int, "rows": [[...], ...]}
inline nlohmann::json matrix_to_json(const PCMatrix& m)
{
    return nlohmann::json{{"n", m.order()}, {"rows", m.rows()}};
}

inline PCMatrix matrix_from_json(const nlohmann::json& j)
{
    if (!j.is_object() || !j.contains("n") || !j.contains("rows"))
        throw Error(ErrorCode::InvalidArgument, "matrix object needs 'n' and 'rows'");
    const auto n = j.at("n").get<std::size_t>();
    auto rows = j.at("rows").get<std::vector<std::vector<double>>>();
    if (rows.size() != n)
        throw Error(ErrorCode::NonSquare, "'n' does not match the number of rows");
    return build_matrix(rows);
}

} // namespace pcdetect
