#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "infoflow/estimator.hpp"
#include "test_support.hpp"

using namespace infoflow;
using infoflow::testing::ou2;
using infoflow::testing::random_dataset;
using infoflow::testing::rel_diff;
using infoflow::testing::simulate_system;

namespace {

// Stationary solution of ou2 by hand: −2σ11 + σ12 + 1 = 0, −2σ12 + 0.5σ22 = 0,
// −2σ22 + 1 = 0 → σ22 = 0.5, σ12 = 0.125, σ11 = 0.5625; T_{2→1} = 0.5·0.125/0.5625.
constexpr double kOu2Flow = 1.0 / 9.0;
constexpr double kOu2Sigma11 = 0.5625;

std::vector<double> row_of(const TimeSeriesSet& set, Eigen::Index r) {
    return {set.values.row(r).begin(), set.values.row(r).end()};
}

TimeSeriesSet white_noise_pair(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    TimeSeriesSet set{{"a", "b"}, Matrix(2, static_cast<Eigen::Index>(n)), 1.0};
    for (Eigen::Index c = 0; c < set.values.cols(); ++c) {
        set.values(0, c) = normal(rng);
        set.values(1, c) = normal(rng);
    }
    return set;
}

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no infoflow::Error thrown";
    return ErrorCode::InvalidArgument;
}

}  // namespace

TEST(FitLinearModel, NoiselessDecayRecoversCoefficient) {
    // X1 follows x[n+1] = x[n](1 − dt) exactly, so Ẋ1 = −X1; X2 is unrelated noise.
    const std::size_t n = 400;
    const double dt = 0.01;
    TimeSeriesSet set{{"x1", "x2"}, Matrix(2, n), dt};
    std::mt19937_64 rng(1);
    std::normal_distribution<double> normal(0.0, 1.0);
    double x = 3.0;
    for (std::size_t t = 0; t < n; ++t) {
        set.values(0, static_cast<Eigen::Index>(t)) = x;
        set.values(1, static_cast<Eigen::Index>(t)) = normal(rng);
        x *= 1.0 - dt;
    }
    const auto fit = fit_linear_model(set, 0);
    EXPECT_NEAR(fit.coeffs(0), -1.0, 1e-9);
    EXPECT_NEAR(fit.coeffs(1), 0.0, 1e-9);
    EXPECT_LT(fit.resid_var, 1e-18);
    EXPECT_EQ(fit.dof, n - 1 - 3);
}

TEST(FitLinearModel, CollinearInputsAreSingular) {
    auto set = random_dataset(3, 500, 2);
    set.values.row(2) = set.values.row(1);
    EXPECT_EQ(code_of([&] { (void)fit_linear_model(set, 0); }), ErrorCode::SingularCovariance);
    EXPECT_EQ(code_of([&] { (void)flow_multivariate(set, 1, 0); }), ErrorCode::SingularCovariance);
}

TEST(FitLinearModel, RecoversOuDriftWithinThreeStandardErrors) {
    const auto set = simulate_system(ou2(), 1000000, 11);
    const auto fit = fit_linear_model(set, 0);
    EXPECT_LT(std::abs(fit.coeffs(0) + 1.0), 3.0 * std::sqrt(fit.coeff_cov(1, 1)));
    EXPECT_LT(std::abs(fit.coeffs(1) - 0.5), 3.0 * std::sqrt(fit.coeff_cov(2, 2)));
    EXPECT_NEAR(fit.g_hat, 1.0, 0.01);
}

TEST(FitLinearModel, CoefficientCovarianceIsSymmetricPsd) {
    const auto set = random_dataset(5, 800, 3);
    for (std::size_t i = 0; i < 5; ++i) {
        const auto fit = fit_linear_model(set, i);
        EXPECT_TRUE(fit.coeff_cov.isApprox(fit.coeff_cov.transpose(), 1e-12));
        const Eigen::SelfAdjointEigenSolver<Matrix> eig(fit.coeff_cov);
        EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-12 * eig.eigenvalues().maxCoeff());
    }
}

TEST(FitLinearModel, InterceptAndCovarianceMatchDirectLeastSquares) {
    // Oracle: explicit design matrix [1, X] solved with Householder QR.
    const auto set = random_dataset(3, 300, 4);
    const std::size_t target = 2;
    const auto fit = fit_linear_model(set, target);
    const Eigen::Index n = static_cast<Eigen::Index>(set.length()) - 1;
    Matrix design(n, 4);
    Vector y(n);
    for (Eigen::Index t = 0; t < n; ++t) {
        design(t, 0) = 1.0;
        for (Eigen::Index j = 0; j < 3; ++j) design(t, j + 1) = set.values(j, t);
        y(t) = (set.values(2, t + 1) - set.values(2, t)) / set.dt;
    }
    const Vector beta = design.householderQr().solve(y);
    const double s2 = (y - design * beta).squaredNorm() / static_cast<double>(n - 4);
    const Matrix cov = s2 * (design.transpose() * design).inverse();
    EXPECT_LT(rel_diff(fit.intercept, beta(0)), 1e-9);
    for (Eigen::Index j = 0; j < 3; ++j) EXPECT_LT(rel_diff(fit.coeffs(j), beta(j + 1)), 1e-9);
    EXPECT_LT(rel_diff(fit.resid_var, s2), 1e-9);
    EXPECT_LT((fit.coeff_cov - cov).cwiseAbs().maxCoeff(), 1e-9 * cov.cwiseAbs().maxCoeff());
}

TEST(FlowMultivariate, ZeroSampleCovarianceGivesZeroFlow) {
    // Period-4 integer patterns: both centered sums and the cross sum vanish exactly.
    const std::size_t n = 41;
    TimeSeriesSet set{{"x1", "x2"}, Matrix(2, n), 1.0};
    const double p1[4] = {1.0, -1.0, 1.0, -1.0};
    const double p2[4] = {1.0, 1.0, -1.0, -1.0};
    for (std::size_t t = 0; t < n; ++t) {
        set.values(0, static_cast<Eigen::Index>(t)) = p1[t % 4];
        set.values(1, static_cast<Eigen::Index>(t)) = p2[t % 4];
    }
    ASSERT_EQ(sample_covariance_matrix(set, 1, 0).C(0, 1), 0.0);
    EXPECT_EQ(flow_multivariate(set, 1, 0).value, 0.0);
    EXPECT_EQ(flow_multivariate(set, 0, 1).value, 0.0);
}

TEST(FlowMultivariate, EqualsRegressionCoefficientForm) {
    for (std::size_t d = 2; d <= 10; ++d) {
        const auto set = random_dataset(d, 1000, 20 + d);
        for (std::size_t i = 0; i < d; ++i) {
            const auto fit = fit_linear_model(set, i);
            EXPECT_LT(rel_diff(self_contribution(set, i).value, fit.coeffs(static_cast<Eigen::Index>(i))), 1e-9);
            for (std::size_t j = 0; j < d; ++j) {
                if (i == j) continue;
                const double ols = fit.coeffs(static_cast<Eigen::Index>(j)) * fit.cov.C(i, j) / fit.cov.C(i, i);
                EXPECT_LT(rel_diff(flow_multivariate(set, j, i).value, ols), 1e-9) << d << " " << i << " " << j;
            }
        }
    }
}

TEST(FlowMultivariate, TwoVariableReductionMatchesClosedForm) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto set = random_dataset(2, 1000, 300 + seed);
        const auto x1 = row_of(set, 0);
        const auto x2 = row_of(set, 1);
        // Closed form written out here from covariances.
        const auto cov = sample_covariance_matrix(set, 1, 0);
        const double c11 = cov.C(0, 0), c12 = cov.C(0, 1), c22 = cov.C(1, 1);
        const double oracle =
            (c11 * c12 * cov.Cd(1) - c12 * c12 * cov.Cd(0)) / (c11 * c11 * c22 - c11 * c12 * c12);
        const auto multi = flow_multivariate(set, 1, 0);
        const auto bi = flow_bivariate(x1, x2, set.dt);
        EXPECT_LT(rel_diff(multi.value, oracle), 1e-12);
        EXPECT_LT(rel_diff(bi.value, multi.value), 1e-12);
        EXPECT_LT(rel_diff(bi.std_err, multi.std_err), 1e-9);
    }
}

TEST(FlowMultivariate, OuFlowApproachesLyapunovValue) {
    const auto set = simulate_system(ou2(), 1000000, 12);
    const auto forward = flow_multivariate(set, 1, 0);
    const auto backward = flow_multivariate(set, 0, 1);
    EXPECT_NEAR(forward.value, kOu2Flow, 0.1 * kOu2Flow);
    EXPECT_LT(std::abs(backward.value), 3.0 * backward.std_err);
    EXPECT_LT(forward.p_value, 1e-6);
}

TEST(FlowMultivariate, ErrorPaths) {
    const auto set = random_dataset(3, 100, 5);
    EXPECT_EQ(code_of([&] { (void)flow_multivariate(set, 1, 1); }), ErrorCode::SameIndex);
    EXPECT_EQ(code_of([&] { (void)flow_multivariate(set, 3, 1); }), ErrorCode::InvalidArgument);
}

TEST(FlowBivariate, ShiftedCopyIsSingular) {
    const auto set = random_dataset(1, 500, 6);
    auto x1 = row_of(set, 0);
    std::vector<double> x2(x1);
    for (auto& v : x2) v += 4.0;
    EXPECT_EQ(code_of([&] { (void)flow_bivariate(x1, x2, 1.0); }), ErrorCode::SingularCovariance);
}

TEST(FlowBivariate, IndependentWhiteNoiseRarelySignificant) {
    int not_significant = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const auto set = white_noise_pair(10000, 5000 + seed);
        const auto est = flow_bivariate(row_of(set, 0), row_of(set, 1), 1.0);
        if (est.p_value >= 0.05) ++not_significant;
    }
    EXPECT_GE(not_significant, 880);
}

TEST(SelfContribution, EqualsOwnCoefficient) {
    const auto set = random_dataset(4, 1000, 7);
    for (std::size_t i = 0; i < 4; ++i) {
        const auto est = self_contribution(set, i);
        EXPECT_EQ(est.kind, FlowKind::Self);
        EXPECT_FALSE(est.source.has_value());
        EXPECT_LT(rel_diff(est.value, fit_linear_model(set, i).coeffs(static_cast<Eigen::Index>(i))), 1e-9);
    }
}

TEST(SelfContribution, OuSelfTermApproachesDrift) {
    const auto set = simulate_system(ou2(), 1000000, 13);
    const auto est = self_contribution(set, 0);
    EXPECT_NEAR(est.value, -1.0, 0.05);
    EXPECT_LT(std::abs(est.value + 1.0), 4.0 * est.std_err);
}

TEST(SelfContribution, DriftlessTargetIsNearZero) {
    // X1 has a zero drift row (Brownian), X2 is an OU process.
    Matrix a(2, 2);
    a << 0.0, 0.0, 0.0, -1.0;
    const auto sde = make_linear_sde(a, Vector::Zero(2), Matrix::Identity(2, 2));
    int within = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const auto set = simulate(sde, Vector::Zero(2), SimulationOptions{1000, 0.1, 700 + seed, 0});
        const auto est = self_contribution(set, 0);
        if (std::abs(est.value) <= 3.0 * est.std_err) ++within;
    }
    // The unit-root t-statistic has a heavier left tail than the normal
    // (about 3-4% beyond -3), hence not 99.7%.
    EXPECT_GE(within, 930);
}

TEST(FlowPanel, SlicedSeriesMatchesTimeSeriesEstimator) {
    const auto set = simulate_system(ou2(), 20000, 14);
    const Eigen::Index m = static_cast<Eigen::Index>(set.length()) - 1;
    const auto pairs = make_panel_pairs(set.values.leftCols(m), set.values.rightCols(m), set.dt);
    for (auto [j, i] : {std::pair<std::size_t, std::size_t>{1, 0}, {0, 1}}) {
        const auto panel = flow_panel(pairs, j, i);
        const auto series = flow_multivariate(set, j, i);
        EXPECT_LT(rel_diff(panel.value, series.value), 1e-12);
        EXPECT_LT(rel_diff(panel.std_err, series.std_err), 1e-12);
    }
}

TEST(FlowPanel, ZeroDifferencesGiveZeroFlow) {
    const auto set = random_dataset(3, 200, 15);
    const auto pairs = make_panel_pairs(set.values, set.values, 1.0);
    const auto est = flow_panel(pairs, 2, 0);
    EXPECT_EQ(est.value, 0.0);
    EXPECT_EQ(est.p_value, 1.0);
}

TEST(FlowPanel, PairOrderDoesNotMatter) {
    const auto set = simulate_system(ou2(), 5000, 16);
    const Eigen::Index m = static_cast<Eigen::Index>(set.length()) - 1;
    Matrix x0 = set.values.leftCols(m);
    Matrix x1 = set.values.rightCols(m);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), std::mt19937_64(17));
    Matrix y0(2, m), y1(2, m);
    for (Eigen::Index c = 0; c < m; ++c) {
        y0.col(c) = x0.col(order[static_cast<std::size_t>(c)]);
        y1.col(c) = x1.col(order[static_cast<std::size_t>(c)]);
    }
    const auto a = flow_panel(make_panel_pairs(x0, x1, 0.01), 1, 0);
    const auto b = flow_panel(make_panel_pairs(y0, y1, 0.01), 1, 0);
    EXPECT_LT(rel_diff(a.value, b.value), 1e-12);
}

TEST(Significance, NormalQuantilesAndPValues) {
    FlowEstimate est;
    est.value = 0.0;
    est = with_standard_error(est, 0.1);
    EXPECT_DOUBLE_EQ(est.p_value, 1.0);
    EXPECT_NEAR(est.ci95.lo, -0.196, 5e-4);
    EXPECT_NEAR(est.ci95.hi, 0.196, 5e-4);

    est.value = 0.3;
    est = with_standard_error(est, 0.1);
    EXPECT_NEAR(est.p_value, 0.0026997960632601866, 1e-12);  // 2(1 − Φ(3))
    EXPECT_TRUE(est.ci99.contains(est.ci95));
    EXPECT_TRUE(est.ci95.contains(est.ci90));
    EXPECT_TRUE(est.ci90.contains(est.value));
}

TEST(Significance, ZeroStandardErrorIsFlagged) {
    FlowEstimate est;
    est.value = 0.2;
    est = with_standard_error(est, 0.0);
    EXPECT_EQ(est.p_value, 0.0);
    EXPECT_TRUE(est.zero_variance);
}

TEST(Significance, PValueConsistentWithStandardError) {
    const auto set = random_dataset(4, 600, 18);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            if (i == j) continue;
            const auto est = flow_multivariate(set, j, i);
            const double z = std::abs(est.value) / est.std_err;
            EXPECT_NEAR(est.p_value, 2.0 * (1.0 - 0.5 * std::erfc(-z / std::sqrt(2.0))), 1e-12);
        }
    }
}

TEST(Significance, UncoupledDirectionCoverage) {
    int covered = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const auto set = simulate_system(ou2(), 10000, 9000 + seed, 0.1, 1000);
        if (flow_multivariate(set, 0, 1).ci95.contains(0.0)) ++covered;
    }
    EXPECT_GE(covered, 930);
    EXPECT_LE(covered, 970);
}

TEST(NormalizeFlows, SingleTermTakesWholeBudget) {
    LinearModelFit fit;
    fit.target = 0;
    fit.g_hat = 0.0;
    fit.cov.C = Matrix::Identity(2, 2);
    FlowEstimate flow;
    flow.source = 1;
    flow.value = -0.4;
    FlowEstimate self;
    self.kind = FlowKind::Self;
    self.value = 0.0;
    std::vector<FlowEstimate> flows{flow};
    const auto budget = normalize_flows(flows, self, fit);
    EXPECT_DOUBLE_EQ(std::abs(*flows[0].normalized), 1.0);
    EXPECT_EQ(budget.self_share, 0.0);
}

TEST(NormalizeFlows, AllZeroBudgetIsDegenerate) {
    LinearModelFit fit;
    fit.cov.C = Matrix::Identity(2, 2);
    FlowEstimate flow;
    flow.source = 1;
    FlowEstimate self;
    self.kind = FlowKind::Self;
    std::vector<FlowEstimate> flows{flow};
    EXPECT_EQ(code_of([&] { (void)normalize_flows(flows, self, fit); }), ErrorCode::DegenerateBudget);
}

TEST(NormalizeFlows, SharesSumToOne) {
    const auto set = random_dataset(5, 800, 19);
    for (std::size_t i = 0; i < 5; ++i) {
        const auto fit = fit_linear_model(set, i);
        std::vector<FlowEstimate> flows;
        for (std::size_t j = 0; j < 5; ++j)
            if (j != i) flows.push_back(flow_multivariate(set, j, i));
        auto self = self_contribution(set, i);
        const auto budget = normalize_flows(flows, self, fit);
        double total = std::abs(budget.self_share) + std::abs(budget.noise_share);
        for (const auto& f : flows) {
            total += std::abs(*f.normalized);
            EXPECT_LE(std::abs(*f.normalized), 1.0);
        }
        EXPECT_NEAR(total, 1.0, 1e-12);
    }
}

TEST(NormalizeFlows, OuShareMatchesLyapunovBudget) {
    // τ_{2→1} = (1/9) / (1/9 + 1 + 1/(2·0.5625)) = 1/18.
    const double expected = kOu2Flow / (kOu2Flow + 1.0 + 1.0 / (2.0 * kOu2Sigma11));
    ASSERT_NEAR(expected, 0.0556, 1e-4);
    const auto set = simulate_system(ou2(), 1000000, 20);
    const auto fit = fit_linear_model(set, 0);
    std::vector<FlowEstimate> flows{flow_multivariate(set, 1, 0)};
    auto self = self_contribution(set, 0);
    (void)normalize_flows(flows, self, fit);
    EXPECT_NEAR(*flows[0].normalized, expected, 0.005);
}

TEST(Invariance, PerComponentAffineMaps) {
    const auto set = random_dataset(4, 2000, 21);
    auto mapped = set;
    const double alpha[4] = {1e-3, 1e3, 1.0, -1e3};
    const double shift[4] = {2e-3, -5e2, 7.0, 1e3};
    for (Eigen::Index m = 0; m < 4; ++m) mapped.values.row(m) = alpha[m] * set.values.row(m).array() + shift[m];
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_LT(rel_diff(self_contribution(set, i).value, self_contribution(mapped, i).value), 1e-10);
        for (std::size_t j = 0; j < 4; ++j) {
            if (i == j) continue;
            const auto a = flow_multivariate(set, j, i);
            const auto b = flow_multivariate(mapped, j, i);
            EXPECT_LT(rel_diff(a.value, b.value), 1e-10);
            EXPECT_LT(rel_diff(a.std_err, b.std_err), 1e-10);
        }
    }
}
