#pragma once

/** @file
 * Data model and shared numeric primitives: validated multivariate series,
 * panel pairs, sample covariances against difference series, and cofactors.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "infoflow/error.hpp"

namespace infoflow {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class NanPolicy { Reject, Interpolate };

/**
 * d aligned, uniformly sampled series. values is d×N: row = variable,
 * column = time index. dt is the sampling interval in the caller's time
 * units; every rate computed downstream is per that unit.
 *
 * Instances produced by validate_series_set() satisfy: N ≥ d + 3, all
 * entries finite, no constant rows, unique names. The simulator also
 * produces instances directly and does not enforce the statistical
 * conditions (a noiseless trajectory may be constant).
 */
struct TimeSeriesSet {
    std::vector<std::string> names;
    Matrix values;
    double dt = 1.0;

    [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(values.rows()); }
    [[nodiscard]] std::size_t length() const noexcept { return static_cast<std::size_t>(values.cols()); }
};

struct ValidationReport {
    std::size_t interpolated_cells = 0;
    std::size_t trimmed_leading = 0;
    std::size_t trimmed_trailing = 0;
};

namespace detail {

inline void check_names(const std::vector<std::string>& names, std::size_t d) {
    if (names.size() != d) {
        throw Error(ErrorCode::InvalidArgument, "expected " + std::to_string(d) + " names, got " +
                                                    std::to_string(names.size()));
    }
    std::unordered_set<std::string> seen;
    for (const auto& n : names) {
        if (!seen.insert(n).second) throw Error(ErrorCode::DuplicateNames, "duplicate name '" + n + "'");
    }
}

// Trims leading/trailing columns in which any variable is NaN, then linearly
// interpolates interior NaN runs of each row.
inline Matrix interpolate_nans(const Matrix& raw, ValidationReport& report) {
    const Eigen::Index d = raw.rows();
    const Eigen::Index n = raw.cols();
    auto column_has_nan = [&](Eigen::Index c) { return raw.col(c).hasNaN(); };
    Eigen::Index first = 0;
    while (first < n && column_has_nan(first)) ++first;
    Eigen::Index last = n - 1;
    while (last >= first && column_has_nan(last)) --last;
    if (first > last) throw Error(ErrorCode::TooShort, "no sample remains after trimming NaNs");
    report.trimmed_leading = static_cast<std::size_t>(first);
    report.trimmed_trailing = static_cast<std::size_t>(n - 1 - last);

    Matrix out = raw.middleCols(first, last - first + 1);
    for (Eigen::Index r = 0; r < d; ++r) {
        Eigen::Index c = 0;
        while (c < out.cols()) {
            if (!std::isnan(out(r, c))) {
                ++c;
                continue;
            }
            const Eigen::Index lo = c - 1;  // finite: the run is interior
            Eigen::Index hi = c;
            while (std::isnan(out(r, hi))) ++hi;
            const double span = static_cast<double>(hi - lo);
            for (Eigen::Index m = c; m < hi; ++m) {
                const double w = static_cast<double>(m - lo) / span;
                out(r, m) = (1.0 - w) * out(r, lo) + w * out(r, hi);
                ++report.interpolated_cells;
            }
            c = hi;
        }
    }
    return out;
}

}  // namespace detail

/// Checks and normalizes raw input (d×N) into a TimeSeriesSet.
inline TimeSeriesSet validate_series_set(const Matrix& raw, std::vector<std::string> names, double dt,
                                         NanPolicy policy = NanPolicy::Reject,
                                         ValidationReport* report = nullptr) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorCode::InvalidArgument, "dt must be positive");
    const auto d = static_cast<std::size_t>(raw.rows());
    if (d == 0) throw Error(ErrorCode::TooShort, "no variables");
    detail::check_names(names, d);

    ValidationReport local;
    Matrix values;
    if (raw.hasNaN()) {
        if (policy == NanPolicy::Reject) {
            for (Eigen::Index c = 0; c < raw.cols(); ++c) {
                for (Eigen::Index r = 0; r < raw.rows(); ++r) {
                    if (std::isnan(raw(r, c))) {
                        throw Error(ErrorCode::NaNsPresent, "NaN in variable '" + names[r] + "' at sample " +
                                                                std::to_string(c));
                    }
                }
            }
        }
        values = detail::interpolate_nans(raw, local);
    } else {
        values = raw;
    }
    if (!values.allFinite()) throw Error(ErrorCode::InvalidArgument, "infinite value in input");

    const auto n = static_cast<std::size_t>(values.cols());
    if (n < d + 3) {
        throw Error(ErrorCode::TooShort, "need at least d + 3 = " + std::to_string(d + 3) + " samples, got " +
                                             std::to_string(n));
    }
    for (std::size_t r = 0; r < d; ++r) {
        const auto row = values.row(static_cast<Eigen::Index>(r));
        if (row.maxCoeff() == row.minCoeff()) {
            throw Error(ErrorCode::ConstantSeries, "variable '" + names[r] + "' has zero variance");
        }
    }
    if (report != nullptr) *report = local;
    return TimeSeriesSet{std::move(names), std::move(values), dt};
}

/// Row-per-variable overload; rejects ragged input.
inline TimeSeriesSet validate_series_set(const std::vector<std::vector<double>>& rows,
                                         std::vector<std::string> names, double dt,
                                         NanPolicy policy = NanPolicy::Reject,
                                         ValidationReport* report = nullptr) {
    const std::size_t n = rows.empty() ? 0 : rows.front().size();
    Matrix raw(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != n) {
            throw Error(ErrorCode::NonRectangular, "row " + std::to_string(r) + " has " +
                                                       std::to_string(rows[r].size()) + " samples, expected " +
                                                       std::to_string(n));
        }
        for (std::size_t c = 0; c < n; ++c) raw(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
    return validate_series_set(raw, std::move(names), dt, policy, report);
}

/// (x[n+k] - x[n]) / (k dt) for n = 0 .. size-k-1.
[[nodiscard]] inline std::vector<double> difference_series(std::span<const double> x, std::size_t k, double dt) {
    if (k == 0 || k >= x.size()) throw Error(ErrorCode::KTooLarge, "k must satisfy 1 <= k < length");
    std::vector<double> out(x.size() - k);
    const double scale = 1.0 / (static_cast<double>(k) * dt);
    for (std::size_t n = 0; n < out.size(); ++n) out[n] = (x[n + k] - x[n]) * scale;
    return out;
}

/// Unbiased (divisor n-1) sample covariance of two equally long sequences.
[[nodiscard]] inline double sample_covariance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) {
        throw Error(ErrorCode::InvalidArgument, "covariance needs two equal-length sequences of >= 2 samples");
    }
    const double n = static_cast<double>(a.size());
    double ma = 0.0;
    double mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - ma) * (b[i] - mb);
    return s / (n - 1.0);
}

/**
 * Covariances feeding the flow estimators for one target variable.
 * C is over the first n_eff = N - k samples of every variable; Cd[j] is the
 * covariance of X_j with the target's difference series. Both use divisor
 * n_eff - 1.
 */
struct SampleCovariances {
    Matrix C;
    Vector Cd;
    std::size_t n_eff = 0;
    std::size_t target = 0;
};

/// d×M snapshots x0 and their successors x1 after a gap dt_gap.
struct PanelPairs {
    Matrix x0;
    Matrix x1;
    double dt_gap = 1.0;

    [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(x0.rows()); }
    [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(x0.cols()); }
};

inline PanelPairs make_panel_pairs(Matrix x0, Matrix x1, double dt_gap) {
    if (!(dt_gap > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt_gap must be positive");
    if (x0.rows() != x1.rows() || x0.cols() != x1.cols()) {
        throw Error(ErrorCode::NonRectangular, "x0 and x1 must have identical shape");
    }
    if (!x0.allFinite() || !x1.allFinite()) throw Error(ErrorCode::NaNsPresent, "panel entries must be finite");
    if (x0.cols() < x0.rows() + 3) throw Error(ErrorCode::TooShort, "panel needs at least d + 3 pairs");
    return PanelPairs{std::move(x0), std::move(x1), dt_gap};
}

namespace detail {

// Rows centered with a corrected two-pass mean.
inline Matrix center_rows(const Eigen::Ref<const Matrix>& x, Vector& means) {
    const double n = static_cast<double>(x.cols());
    means = x.rowwise().sum() / n;
    Matrix out = x.colwise() - means;
    const Vector fix = out.rowwise().sum() / n;
    out.colwise() -= fix;
    means += fix;
    return out;
}

/**
 * Centered regressors and difference series shared by every target:
 * C = Xc Xcᵀ/(n-1), CD(j, i) = cov(X_j, Ẋ_i), dvar(i) = var(Ẋ_i).
 */
struct CenteredData {
    Matrix xc;  // d×n
    Matrix dc;  // d×n
    Vector x_mean;
    Vector d_mean;
    Matrix C;
    Matrix CD;
    std::size_t n_eff = 0;
};

inline CenteredData centered_data(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& xdot) {
    CenteredData out;
    out.n_eff = static_cast<std::size_t>(x.cols());
    out.xc = center_rows(x, out.x_mean);
    out.dc = center_rows(xdot, out.d_mean);
    const double denom = static_cast<double>(out.n_eff) - 1.0;
    const Eigen::Index d = x.rows();
    out.C = Matrix::Zero(d, d);
    out.C.selfadjointView<Eigen::Lower>().rankUpdate(out.xc, 1.0 / denom);
    out.C.triangularView<Eigen::StrictlyUpper>() = out.C.transpose();
    out.CD.noalias() = out.xc * out.dc.transpose() / denom;
    return out;
}

inline void check_k(std::size_t n, std::size_t d, std::size_t k) {
    if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
    if (n < d + 3 || k > n - d - 2) {
        throw Error(ErrorCode::KTooLarge, "k = " + std::to_string(k) + " leaves too few aligned samples (N = " +
                                              std::to_string(n) + ", d = " + std::to_string(d) + ")");
    }
}

inline CenteredData centered_data(const TimeSeriesSet& set, std::size_t k) {
    const std::size_t d = set.dim();
    const std::size_t n = set.length();
    check_k(n, d, k);
    const auto n_eff = static_cast<Eigen::Index>(n - k);
    const double scale = 1.0 / (static_cast<double>(k) * set.dt);
    const Matrix xdot = (set.values.rightCols(n_eff) - set.values.leftCols(n_eff)) * scale;
    return centered_data(set.values.leftCols(n_eff), xdot);
}

inline CenteredData centered_data(const PanelPairs& pairs) {
    const Matrix xdot = (pairs.x1 - pairs.x0) / pairs.dt_gap;
    return centered_data(pairs.x0, xdot);
}

inline SampleCovariances extract(const CenteredData& data, std::size_t target) {
    return SampleCovariances{data.C, data.CD.col(static_cast<Eigen::Index>(target)), data.n_eff, target};
}

}  // namespace detail

/// Covariances of the first N-k samples and of X_j against the target's
/// forward difference series (X[n+k] - X[n]) / (k dt).
[[nodiscard]] inline SampleCovariances sample_covariance_matrix(const TimeSeriesSet& set, std::size_t k,
                                                                std::size_t target) {
    if (target >= set.dim()) throw Error(ErrorCode::InvalidArgument, "target index out of range");
    return detail::extract(detail::centered_data(set, k), target);
}

/// Determinant; closed form up to 3×3, partial-pivot LU beyond.
[[nodiscard]] inline double determinant(const Eigen::Ref<const Matrix>& m) {
    switch (m.rows()) {
        case 0: return 1.0;
        case 1: return m(0, 0);
        case 2: return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
        case 3:
            return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
                   m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
                   m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
        default:
            return Eigen::PartialPivLU<Matrix>(m).determinant();
    }
}

/// Minor of m with row i and column j removed.
[[nodiscard]] inline Matrix minor_matrix(const Eigen::Ref<const Matrix>& m, Eigen::Index i, Eigen::Index j) {
    const Eigen::Index n = m.rows();
    Matrix out(n - 1, n - 1);
    for (Eigen::Index r = 0, rr = 0; r < n; ++r) {
        if (r == i) continue;
        for (Eigen::Index c = 0, cc = 0; c < n; ++c) {
            if (c == j) continue;
            out(rr, cc++) = m(r, c);
        }
        ++rr;
    }
    return out;
}

/// (-1)^(i+j) det(minor(i, j)); defined as 1 for a 1×1 matrix.
[[nodiscard]] inline double cofactor(const Eigen::Ref<const Matrix>& c, std::size_t i, std::size_t j) {
    if (c.rows() != c.cols()) throw Error(ErrorCode::InvalidArgument, "cofactor of a non-square matrix");
    if (static_cast<Eigen::Index>(std::max(i, j)) >= c.rows()) {
        throw Error(ErrorCode::InvalidArgument, "cofactor index out of range");
    }
    if (c.rows() == 1) return 1.0;
    const double sign = ((i + j) % 2 == 0) ? 1.0 : -1.0;
    return sign * determinant(minor_matrix(c, static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
}

/**
 * Matrix of cofactors, cof(i, j) = Δ_ij. Small or singular matrices use
 * per-entry minors; otherwise det(C)·C⁻ᵀ from one LU factorization.
 */
[[nodiscard]] inline Matrix cofactor_matrix(const Eigen::Ref<const Matrix>& c) {
    if (c.rows() != c.cols()) throw Error(ErrorCode::InvalidArgument, "cofactor of a non-square matrix");
    const Eigen::Index n = c.rows();
    Matrix out(n, n);
    if (n > 3) {
        const Eigen::PartialPivLU<Matrix> lu(c);
        const double det = lu.determinant();
        if (det != 0.0 && std::isfinite(det)) {
            out = det * lu.inverse().transpose();
            return out;
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            out(i, j) = cofactor(c, static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        }
    }
    return out;
}

}  // namespace infoflow
