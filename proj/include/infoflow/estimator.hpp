#pragma once

/** @file
 * Maximum-likelihood information flow between components of a multivariate
 * series under a linear model with additive independent noise.
 *
 * For a target X_i regressed as Ẋ_i = f + Σ_j a_j X_j + ε, the flow from
 * X_j into X_i is T_{j→i} = a_j C_ij / C_ii with a = C⁻¹ C_{·,di} written in
 * cofactors, and the self contribution dH*_i/dt = a_i. Rates are in nats per
 * unit of dt.
 */

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "infoflow/core.hpp"
#include "infoflow/error.hpp"

namespace infoflow {

inline constexpr double kZ90 = 1.6448536269514722;
inline constexpr double kZ95 = 1.9599639845400540;
inline constexpr double kZ99 = 2.5758293035489004;

enum class FlowKind { Pairwise, Self };

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    [[nodiscard]] bool contains(double x) const noexcept { return lo <= x && x <= hi; }
    [[nodiscard]] bool contains(const Interval& other) const noexcept { return lo <= other.lo && other.hi <= hi; }
};

struct FlowEstimate {
    FlowKind kind = FlowKind::Pairwise;
    std::optional<std::size_t> source;  // unset for self contributions
    std::size_t target = 0;
    double value = 0.0;
    double std_err = 0.0;
    Interval ci90;
    Interval ci95;
    Interval ci99;
    double p_value = 1.0;
    std::optional<double> normalized;
    bool zero_variance = false;  // nonzero value with zero standard error
};

/**
 * Least-squares fit of the target's difference series on all components.
 * coeff_cov is ordered [intercept, a_0, ..., a_{d-1}]. resid_var is the
 * dof-corrected RSS/(n_eff - d - 1) in per-step units; g_hat = resid_var·k·dt
 * is the noise intensity per unit time.
 */
struct LinearModelFit {
    std::size_t target = 0;
    Vector coeffs;
    double intercept = 0.0;
    double resid_var = 0.0;
    Matrix coeff_cov;
    double g_hat = 0.0;
    std::size_t n_eff = 0;
    std::size_t dof = 0;
    SampleCovariances cov;
};

namespace detail {

[[nodiscard]] inline double singular_tolerance(std::size_t d) {
    return 1024.0 * std::numeric_limits<double>::epsilon() * static_cast<double>(d);
}

// The covariance matrix rescaled to unit diagonal, R = S⁻¹ C S⁻¹. Cofactors and
// the inverse are taken on R so results do not depend on the variables' units.
struct ScaledSystem {
    Vector scale;
    Matrix cof;
    double det = 0.0;
    Matrix c_inv;
};

inline ScaledSystem scaled_system(const Matrix& c) {
    ScaledSystem sys;
    const Eigen::Index d = c.rows();
    sys.scale = c.diagonal().cwiseSqrt();
    if (!(sys.scale.minCoeff() > 0.0)) throw Error(ErrorCode::ConstantSeries, "zero variance regressor");
    const Vector inv = sys.scale.cwiseInverse();
    const Matrix r = inv.asDiagonal() * c * inv.asDiagonal();
    sys.det = determinant(r);
    if (!(sys.det > singular_tolerance(static_cast<std::size_t>(d)))) {
        throw Error(ErrorCode::SingularCovariance,
                    "covariance matrix is singular (det of correlation matrix = " + std::to_string(sys.det) + ")");
    }
    sys.cof = cofactor_matrix(r);
    const Eigen::LDLT<Matrix> ldlt(r);
    Matrix r_inv = ldlt.solve(Matrix::Identity(d, d));
    r_inv = 0.5 * (r_inv + r_inv.transpose()).eval();
    sys.c_inv = inv.asDiagonal() * r_inv * inv.asDiagonal();
    return sys;
}

// Σ_m Δ_jm C_{m,di} / det C, evaluated on the unit-diagonal system.
[[nodiscard]] inline double cofactor_coefficient(const ScaledSystem& sys, const Vector& cd, Eigen::Index j) {
    double acc = 0.0;
    for (Eigen::Index m = 0; m < cd.size(); ++m) acc += sys.cof(j, m) * (cd(m) / sys.scale(m));
    return acc / (sys.det * sys.scale(j));
}

inline LinearModelFit fit_target(const CenteredData& data, const ScaledSystem& sys, std::size_t target,
                                 double step) {
    const auto i = static_cast<Eigen::Index>(target);
    const Eigen::Index d = data.C.rows();
    const auto n = static_cast<double>(data.n_eff);

    LinearModelFit fit;
    fit.target = target;
    fit.cov = extract(data, target);
    fit.n_eff = data.n_eff;
    fit.dof = data.n_eff - static_cast<std::size_t>(d) - 1;
    fit.coeffs = sys.c_inv * fit.cov.Cd;
    fit.intercept = data.d_mean(i) - fit.coeffs.dot(data.x_mean);

    const double rss = (data.dc.row(i) - fit.coeffs.transpose() * data.xc).squaredNorm();
    fit.resid_var = rss / static_cast<double>(fit.dof);
    fit.g_hat = fit.resid_var * step;

    const Matrix var_a = (fit.resid_var / (n - 1.0)) * sys.c_inv;
    const Vector cross = var_a * data.x_mean;
    fit.coeff_cov.resize(d + 1, d + 1);
    fit.coeff_cov(0, 0) = fit.resid_var / n + data.x_mean.dot(cross);
    fit.coeff_cov.block(1, 0, d, 1) = -cross;
    fit.coeff_cov.block(0, 1, 1, d) = -cross.transpose();
    fit.coeff_cov.block(1, 1, d, d) = var_a;
    return fit;
}

inline void check_index(std::size_t idx, std::size_t d, const char* what) {
    if (idx >= d) throw Error(ErrorCode::InvalidArgument, std::string(what) + " index out of range");
}

}  // namespace detail

/// Two-sided normal p-value for value/std_err.
[[nodiscard]] inline double two_sided_p(double value, double std_err) {
    return std::erfc(std::abs(value) / std_err / std::sqrt(2.0));
}

/// Fills std_err, p-value and the 90/95/99% intervals from a standard error.
inline FlowEstimate with_standard_error(FlowEstimate est, double std_err) {
    est.std_err = std_err;
    est.zero_variance = false;
    if (std_err > 0.0) {
        est.p_value = two_sided_p(est.value, std_err);
    } else {
        est.p_value = est.value == 0.0 ? 1.0 : 0.0;
        est.zero_variance = est.value != 0.0;
    }
    est.ci90 = {est.value - kZ90 * std_err, est.value + kZ90 * std_err};
    est.ci95 = {est.value - kZ95 * std_err, est.value + kZ95 * std_err};
    est.ci99 = {est.value - kZ99 * std_err, est.value + kZ99 * std_err};
    return est;
}

/**
 * Delta-method standard error from the fit's coefficient covariance. T is
 * linear in a_j, so se(T_{j→i}) = |C_ij / C_ii| · se(a_j); a self
 * contribution is a_i itself.
 */
inline FlowEstimate significance(FlowEstimate flow, const LinearModelFit& fit) {
    if (flow.target != fit.target) throw Error(ErrorCode::InvalidArgument, "flow and fit targets differ");
    const auto i = static_cast<Eigen::Index>(fit.target);
    double se = 0.0;
    if (flow.kind == FlowKind::Self) {
        se = std::sqrt(std::max(0.0, fit.coeff_cov(i + 1, i + 1)));
    } else {
        const auto j = static_cast<Eigen::Index>(flow.source.value());
        const double ratio = fit.cov.C(i, j) / fit.cov.C(i, i);
        se = std::abs(ratio) * std::sqrt(std::max(0.0, fit.coeff_cov(j + 1, j + 1)));
    }
    return with_standard_error(std::move(flow), se);
}

/// T_{source→target} from covariances alone (cofactor form).
[[nodiscard]] inline double information_flow(const SampleCovariances& cov, std::size_t source) {
    detail::check_index(source, static_cast<std::size_t>(cov.C.rows()), "source");
    if (source == cov.target) throw Error(ErrorCode::SameIndex, "source and target coincide");
    const auto sys = detail::scaled_system(cov.C);
    const auto i = static_cast<Eigen::Index>(cov.target);
    const auto j = static_cast<Eigen::Index>(source);
    return detail::cofactor_coefficient(sys, cov.Cd, j) * cov.C(i, j) / cov.C(i, i);
}

/// dH*_target/dt from covariances alone (cofactor form).
[[nodiscard]] inline double self_information_flow(const SampleCovariances& cov) {
    const auto sys = detail::scaled_system(cov.C);
    return detail::cofactor_coefficient(sys, cov.Cd, static_cast<Eigen::Index>(cov.target));
}

inline LinearModelFit fit_linear_model(const TimeSeriesSet& set, std::size_t target, std::size_t k = 1) {
    detail::check_index(target, set.dim(), "target");
    const auto data = detail::centered_data(set, k);
    const auto sys = detail::scaled_system(data.C);
    return detail::fit_target(data, sys, target, static_cast<double>(k) * set.dt);
}

namespace detail {

inline FlowEstimate pairwise_estimate(const CenteredData& data, const ScaledSystem& sys, const LinearModelFit& fit,
                                      std::size_t source) {
    const auto i = static_cast<Eigen::Index>(fit.target);
    const auto j = static_cast<Eigen::Index>(source);
    FlowEstimate est;
    est.kind = FlowKind::Pairwise;
    est.source = source;
    est.target = fit.target;
    est.value = cofactor_coefficient(sys, fit.cov.Cd, j) * data.C(i, j) / data.C(i, i);
    return significance(std::move(est), fit);
}

inline FlowEstimate self_estimate(const ScaledSystem& sys, const LinearModelFit& fit) {
    FlowEstimate est;
    est.kind = FlowKind::Self;
    est.target = fit.target;
    est.value = cofactor_coefficient(sys, fit.cov.Cd, static_cast<Eigen::Index>(fit.target));
    return significance(std::move(est), fit);
}

}  // namespace detail

/// T_{source→target} conditioned on every component of the set.
inline FlowEstimate flow_multivariate(const TimeSeriesSet& set, std::size_t source, std::size_t target,
                                      std::size_t k = 1) {
    detail::check_index(source, set.dim(), "source");
    detail::check_index(target, set.dim(), "target");
    if (source == target) throw Error(ErrorCode::SameIndex, "source and target coincide");
    const auto data = detail::centered_data(set, k);
    const auto sys = detail::scaled_system(data.C);
    const auto fit = detail::fit_target(data, sys, target, static_cast<double>(k) * set.dt);
    return detail::pairwise_estimate(data, sys, fit, source);
}

inline FlowEstimate self_contribution(const TimeSeriesSet& set, std::size_t target, std::size_t k = 1) {
    detail::check_index(target, set.dim(), "target");
    const auto data = detail::centered_data(set, k);
    const auto sys = detail::scaled_system(data.C);
    const auto fit = detail::fit_target(data, sys, target, static_cast<double>(k) * set.dt);
    return detail::self_estimate(sys, fit);
}

/// Panel variant: covariances over i.i.d. (state, successor) pairs.
inline FlowEstimate flow_panel(const PanelPairs& pairs, std::size_t source, std::size_t target) {
    detail::check_index(source, pairs.dim(), "source");
    detail::check_index(target, pairs.dim(), "target");
    if (source == target) throw Error(ErrorCode::SameIndex, "source and target coincide");
    const auto data = detail::centered_data(pairs);
    const auto sys = detail::scaled_system(data.C);
    const auto fit = detail::fit_target(data, sys, target, pairs.dt_gap);
    return detail::pairwise_estimate(data, sys, fit, source);
}

/**
 * Two-variable closed form for T_{2→1} with x1 the target and x2 the source:
 *
 *   (C11 C12 C2,d1 − C12² C1,d1) / (C11² C22 − C11 C12²)
 *
 * Computed from its own covariance sums, independently of the
 * general-dimension path.
 */
inline FlowEstimate flow_bivariate(std::span<const double> x1, std::span<const double> x2, double dt,
                                   std::size_t k = 1) {
    if (x1.size() != x2.size()) throw Error(ErrorCode::NonRectangular, "series lengths differ");
    if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt must be positive");
    detail::check_k(x1.size(), 2, k);
    const std::size_t n = x1.size() - k;
    const auto d1 = difference_series(x1, k, dt);
    const auto a = x1.first(n);
    const auto b = x2.first(n);

    const double c11 = sample_covariance(a, a);
    const double c22 = sample_covariance(b, b);
    const double c12 = sample_covariance(a, b);
    const double c1d = sample_covariance(a, d1);
    const double c2d = sample_covariance(b, d1);
    if (!(c11 > 0.0) || !(c22 > 0.0)) throw Error(ErrorCode::ConstantSeries, "zero variance series");
    const double det = c11 * c22 - c12 * c12;
    if (!(det / (c11 * c22) > detail::singular_tolerance(2))) {
        throw Error(ErrorCode::SingularCovariance, "series are perfectly correlated");
    }

    FlowEstimate est;
    est.kind = FlowKind::Pairwise;
    est.source = 1;
    est.target = 0;
    est.value = (c11 * c12 * c2d - c12 * c12 * c1d) / (c11 * c11 * c22 - c11 * c12 * c12);

    const double a1 = (c22 * c1d - c12 * c2d) / det;
    const double a2 = (c11 * c2d - c12 * c1d) / det;
    double m1 = 0.0, m2 = 0.0, md = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        m1 += a[t];
        m2 += b[t];
        md += d1[t];
    }
    m1 /= static_cast<double>(n);
    m2 /= static_cast<double>(n);
    md /= static_cast<double>(n);
    double rss = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        const double r = (d1[t] - md) - a1 * (a[t] - m1) - a2 * (b[t] - m2);
        rss += r * r;
    }
    const double s2 = rss / static_cast<double>(n - 3);
    const double var_a2 = s2 / static_cast<double>(n - 1) * c11 / det;
    return with_standard_error(std::move(est), std::abs(c12 / c11) * std::sqrt(var_a2));
}

/// Shares of the target's entropy budget: incoming flows, self, noise.
struct NormalizedBudget {
    std::vector<double> tau;  // one per incoming flow, same order
    double self_share = 0.0;
    double noise_share = 0.0;
    double noise_term = 0.0;  // g_hat / (2 C_ii)
    double total = 0.0;       // Z = Σ|T| + |self| + |noise|
};

/**
 * Normalizes by Z = Σ_{j≠i} |T_{j→i}| + |dH*_i/dt| + |g/(2 C_ii)| and writes
 * τ into each estimate's normalized field.
 */
inline NormalizedBudget normalize_flows(std::span<FlowEstimate> flows, FlowEstimate& self,
                                        const LinearModelFit& fit) {
    if (self.kind != FlowKind::Self || self.target != fit.target) {
        throw Error(ErrorCode::InvalidArgument, "self estimate does not match the fit");
    }
    const auto i = static_cast<Eigen::Index>(fit.target);
    NormalizedBudget out;
    out.noise_term = fit.g_hat / (2.0 * fit.cov.C(i, i));
    out.total = std::abs(self.value) + std::abs(out.noise_term);
    for (const auto& f : flows) {
        if (f.target != fit.target) throw Error(ErrorCode::InvalidArgument, "flow target does not match the fit");
        out.total += std::abs(f.value);
    }
    if (!(out.total > std::numeric_limits<double>::min()) || !std::isfinite(out.total)) {
        throw Error(ErrorCode::DegenerateBudget, "entropy budget of target " + std::to_string(fit.target) +
                                                     " vanishes");
    }
    out.tau.reserve(flows.size());
    for (auto& f : flows) {
        f.normalized = f.value / out.total;
        out.tau.push_back(*f.normalized);
    }
    out.self_share = self.value / out.total;
    out.noise_share = out.noise_term / out.total;
    self.normalized = out.self_share;
    return out;
}

}  // namespace infoflow
