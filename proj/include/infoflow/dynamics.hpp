#pragma once

/** @file
 * Linear SDE ground truth: dX = (f + A X) dt + B dW.
 *
 * Provides an Euler–Maruyama simulator and the exact stationary quantities
 * used as oracles: the Lyapunov covariance Σ (A Σ + Σ Aᵀ + B Bᵀ = 0), the
 * linear information flow T_{j→i} = a_ij σ_ij / σ_ii, and the per-target
 * entropy budget.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "infoflow/core.hpp"
#include "infoflow/error.hpp"

namespace infoflow {

struct LinearSDE {
    Matrix A;
    Vector f;
    Matrix B;  // d×m
    std::vector<std::string> names;

    [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(A.rows()); }
    [[nodiscard]] Matrix Q() const { return B * B.transpose(); }
};

[[nodiscard]] inline std::vector<std::string> default_names(std::size_t d) {
    std::vector<std::string> names;
    names.reserve(d);
    for (std::size_t i = 0; i < d; ++i) names.push_back("x" + std::to_string(i + 1));
    return names;
}

/// Shape-checked constructor. Empty names become x1..xd.
inline LinearSDE make_linear_sde(Matrix a, Vector f, Matrix b, std::vector<std::string> names = {}) {
    const Eigen::Index d = a.rows();
    if (d == 0 || a.cols() != d) throw Error(ErrorCode::BadMatrixSpec, "A must be a non-empty square matrix");
    if (f.size() == 0) f = Vector::Zero(d);
    if (f.size() != d) throw Error(ErrorCode::BadMatrixSpec, "f must have one entry per row of A");
    if (b.rows() != d || b.cols() == 0) throw Error(ErrorCode::BadMatrixSpec, "B must have as many rows as A");
    if (!a.allFinite() || !f.allFinite() || !b.allFinite()) {
        throw Error(ErrorCode::BadMatrixSpec, "non-finite coefficient");
    }
    if (names.empty()) names = default_names(static_cast<std::size_t>(d));
    detail::check_names(names, static_cast<std::size_t>(d));
    return LinearSDE{std::move(a), std::move(f), std::move(b), std::move(names)};
}

[[nodiscard]] inline Eigen::VectorXcd drift_eigenvalues(const Matrix& a) {
    return Eigen::EigenSolver<Matrix>(a, false).eigenvalues();
}

[[nodiscard]] inline bool is_hurwitz(const Matrix& a) {
    return drift_eigenvalues(a).real().maxCoeff() < 0.0;
}

/// Burn-in steps: max(10 / |Re λ| of the slowest mode / dt, 1000) for a
/// Hurwitz drift, 0 otherwise.
[[nodiscard]] inline std::size_t default_burn_in(const LinearSDE& sde, double dt) {
    const Vector re = drift_eigenvalues(sde.A).real();
    if (!(re.maxCoeff() < 0.0)) return 0;
    const double slowest = -re.maxCoeff();
    const double steps = std::ceil(10.0 / (slowest * dt));
    return std::max<std::size_t>(1000, static_cast<std::size_t>(std::min(steps, 1e12)));
}

struct SimulationOptions {
    std::size_t n_steps = 1000;  // recorded samples
    double dt = 0.01;
    std::uint64_t seed = 0;
    std::optional<std::size_t> burn_in;  // nullopt: default_burn_in()
};

/**
 * Euler–Maruyama: x_{n+1} = x_n + (f + A x_n) dt + √dt B ξ_n.
 *
 * ξ_n are standard normals from std::mt19937_64 seeded through
 * std::seed_seq with the two 32-bit halves of the seed, drawn via
 * std::normal_distribution. Equal seed and parameters give identical output
 * on a given standard library. The first recorded sample is the state after
 * burn_in steps from x0.
 */
inline TimeSeriesSet simulate(const LinearSDE& sde, const Vector& x0, const SimulationOptions& opts) {
    const std::size_t d = sde.dim();
    if (!(opts.dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt must be positive");
    if (opts.n_steps < 1) throw Error(ErrorCode::InvalidArgument, "n_steps must be >= 1");
    if (static_cast<std::size_t>(x0.size()) != d) throw Error(ErrorCode::BadMatrixSpec, "x0 has wrong length");

    const std::size_t burn = opts.burn_in.value_or(default_burn_in(sde, opts.dt));
    const auto m = static_cast<std::size_t>(sde.B.cols());
    const double dt = opts.dt;
    const double sqdt = std::sqrt(dt);

    // Row-major copies keep the inner loops contiguous.
    std::vector<double> a(d * d), b(d * m), f(d), x(d), next(d), xi(m);
    for (std::size_t r = 0; r < d; ++r) {
        f[r] = sde.f(static_cast<Eigen::Index>(r));
        x[r] = x0(static_cast<Eigen::Index>(r));
        for (std::size_t c = 0; c < d; ++c) a[r * d + c] = sde.A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        for (std::size_t c = 0; c < m; ++c) b[r * m + c] = sde.B(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }
    const bool noisy = sde.B.cwiseAbs().maxCoeff() > 0.0;

    std::seed_seq seq{static_cast<std::uint32_t>(opts.seed & 0xffffffffULL),
                      static_cast<std::uint32_t>(opts.seed >> 32)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);

    auto step = [&](std::size_t n) {
        if (noisy) {
            for (auto& v : xi) v = normal(rng);
        }
        for (std::size_t r = 0; r < d; ++r) {
            double drift = f[r];
            for (std::size_t c = 0; c < d; ++c) drift += a[r * d + c] * x[c];
            double noise = 0.0;
            if (noisy) {
                for (std::size_t c = 0; c < m; ++c) noise += b[r * m + c] * xi[c];
            }
            next[r] = x[r] + drift * dt + sqdt * noise;
            if (!std::isfinite(next[r])) {
                throw Error(ErrorCode::NonFiniteState, "trajectory diverged at step " + std::to_string(n));
            }
        }
        x.swap(next);
    };

    for (std::size_t n = 0; n < burn; ++n) step(n);

    TimeSeriesSet out;
    out.names = sde.names;
    out.dt = dt;
    out.values.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(opts.n_steps));
    for (std::size_t n = 0; n < opts.n_steps; ++n) {
        for (std::size_t r = 0; r < d; ++r) out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(n)) = x[r];
        if (n + 1 < opts.n_steps) step(burn + n);
    }
    return out;
}

struct StationaryCovariance {
    Matrix sigma;
    double residual = 0.0;  // max |A Σ + Σ Aᵀ + Q|
};

/// Solves A Σ + Σ Aᵀ + B Bᵀ = 0 through (I⊗A + A⊗I) vec Σ = −vec Q.
inline StationaryCovariance stationary_covariance(const LinearSDE& sde) {
    if (!is_hurwitz(sde.A)) throw Error(ErrorCode::NotHurwitz, "drift matrix has an eigenvalue with Re >= 0");
    const Eigen::Index d = sde.A.rows();
    const Matrix q = sde.Q();
    const Matrix eye = Matrix::Identity(d, d);
    Matrix k(d * d, d * d);
    for (Eigen::Index r = 0; r < d; ++r) {
        for (Eigen::Index c = 0; c < d; ++c) {
            k.block(r * d, c * d, d, d) = eye(r, c) * sde.A + sde.A(r, c) * eye;
        }
    }
    const Eigen::PartialPivLU<Matrix> lu(k);
    const Vector rhs = -Eigen::Map<const Vector>(q.data(), d * d);
    Vector vec_sigma = lu.solve(rhs);
    vec_sigma += lu.solve(rhs - k * vec_sigma);  // one refinement step

    StationaryCovariance out;
    out.sigma = Eigen::Map<const Matrix>(vec_sigma.data(), d, d);
    out.sigma = 0.5 * (out.sigma + out.sigma.transpose()).eval();
    out.residual = (sde.A * out.sigma + out.sigma * sde.A.transpose() + q).cwiseAbs().maxCoeff();
    return out;
}

namespace detail {

inline double flow_from_sigma(const Matrix& a, const Matrix& sigma, Eigen::Index j, Eigen::Index i) {
    if (!(sigma(i, i) > 0.0)) {
        throw Error(ErrorCode::DegenerateBudget, "target has zero stationary variance");
    }
    return a(i, j) * sigma(i, j) / sigma(i, i);
}

}  // namespace detail

/// T_{source→target} = a_ij σ_ij / σ_ii on the stationary state.
inline double theoretical_flow(const LinearSDE& sde, std::size_t source, std::size_t target) {
    const std::size_t d = sde.dim();
    if (source >= d || target >= d) throw Error(ErrorCode::InvalidArgument, "index out of range");
    if (source == target) throw Error(ErrorCode::SameIndex, "source and target coincide");
    const auto sigma = stationary_covariance(sde).sigma;
    return detail::flow_from_sigma(sde.A, sigma, static_cast<Eigen::Index>(source),
                                   static_cast<Eigen::Index>(target));
}

/// Stationary entropy budget of one target. flows[target] is 0.
struct TheoreticalBudget {
    std::size_t target = 0;
    Vector flows;
    double self = 0.0;   // a_ii
    double noise = 0.0;  // Q_ii / (2 σ_ii)

    /// Σ flows + self + noise; zero at stationarity.
    [[nodiscard]] double residual() const { return flows.sum() + self + noise; }
};

inline TheoreticalBudget theoretical_budget(const LinearSDE& sde, std::size_t target,
                                            const StationaryCovariance& stationary) {
    const std::size_t d = sde.dim();
    if (target >= d) throw Error(ErrorCode::InvalidArgument, "index out of range");
    const auto i = static_cast<Eigen::Index>(target);
    const Matrix& sigma = stationary.sigma;
    TheoreticalBudget out;
    out.target = target;
    out.flows = Vector::Zero(static_cast<Eigen::Index>(d));
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(d); ++j) {
        if (j != i) out.flows(j) = detail::flow_from_sigma(sde.A, sigma, j, i);
    }
    out.self = sde.A(i, i);
    out.noise = sde.Q()(i, i) / (2.0 * sigma(i, i));
    return out;
}

inline TheoreticalBudget theoretical_budget(const LinearSDE& sde, std::size_t target) {
    return theoretical_budget(sde, target, stationary_covariance(sde));
}

}  // namespace infoflow
