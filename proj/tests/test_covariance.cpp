#include "stfuse/covariance.hpp"
#include "stfuse/simulate.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace stfuse;

namespace {

std::vector<SpaceTimePoint> random_points(std::size_t n, std::uint64_t seed, double t_max = 1440.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u;
    std::vector<SpaceTimePoint> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back({u(rng), u(rng), t_max * u(rng)});
    return out;
}

std::vector<double> edges(double hi, int bins) {
    std::vector<double> e;
    for (int k = 0; k <= bins; ++k) e.push_back(hi * k / bins);
    return e;
}

} // namespace

TEST(Kernels, ExamplesAndErrors) {
    EXPECT_EQ(space_kernel(0.0, 2.0), 1.0);
    EXPECT_NEAR(space_kernel(2.0, 2.0), 0.36787944117144233, 1e-15);
    EXPECT_NEAR(time_kernel(30.0, 30.0), std::exp(-1.0), 1e-15);
    EXPECT_LT(space_kernel(50.0, 1.0), 1e-20);
    double prev = 1.0;
    for (double d = 0.1; d < 10; d += 0.1) {
        EXPECT_LT(space_kernel(d, 1.5), prev);
        prev = space_kernel(d, 1.5);
    }
    EXPECT_THROW(space_kernel(-1e-9, 1.0), InputError);
    EXPECT_THROW(time_kernel(-1.0, 1.0), InputError);
    EXPECT_THROW(space_kernel(1.0, 0.0), InputError);
}

TEST(ProductSum, ZeroLagAndPureSpaceLag) {
    const ProductSumKernel k{0.7, 0.2, 0.4, 0.3, 60.0};
    const SpaceTimePoint a{0.1, 0.2, 100.0};
    EXPECT_DOUBLE_EQ(product_sum_cov(a, a, k), 1.3);
    const ProductSumKernel k0{0.7, 0.2, 0.0, 0.3, 60.0};
    const SpaceTimePoint b{0.4, 0.2, 100.0};
    EXPECT_NEAR(product_sum_cov(a, b, k0), 0.7 * std::exp(-1.0) + 0.2, 1e-14);
}

TEST(ProductSum, SymmetryStationarityAndDominance) {
    const ProductSumKernel k{0.5, 0.3, 0.9, 0.25, 200.0};
    const auto pts = random_points(60, 1);
    for (const auto& x : pts) {
        EXPECT_NEAR(product_sum_cov(x, x, k), k.sill(), 1e-14);
        for (const auto& y : pts) {
            EXPECT_EQ(product_sum_cov(x, y, k), product_sum_cov(y, x, k));
            EXPECT_LE(product_sum_cov(x, y, k), product_sum_cov(x, x, k));
        }
    }
}

TEST(Anchors, SingleLocationTwoTimes) {
    const std::vector<SpaceTimePoint> one{{0.5, 0.5, 0.0}};
    const auto lay = make_anchors(one, 2, 0.0, 1440.0, block_all, 1.0);
    ASSERT_EQ(lay.anchors.size(), 2u);
    EXPECT_EQ(lay.anchors[0].t, 0.0);
    EXPECT_EQ(lay.anchors[1].t, 1440.0);
    EXPECT_DOUBLE_EQ(lay.r_tilde_t, 2160.0);
    EXPECT_DOUBLE_EQ(lay.r_tilde_s, 1.5);
}

TEST(Anchors, GridSpacingRule) {
    const auto lay = make_grid_anchors(5, 0.0, 2.0);
    EXPECT_NEAR(lay.r_tilde_s, 1.5 * 0.5, 1e-15);
    EXPECT_EQ(lay.dimension(), 25u);
    std::vector<SpaceTimePoint> sp;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) sp.push_back({0.2 * i, 0.2 * j, 0.0});
    const auto st = make_anchors(sp, 4, 0.0, 300.0);
    EXPECT_EQ(st.anchors.size(), 36u);
    EXPECT_NEAR(st.r_tilde_s, 0.3, 1e-15);
    EXPECT_NEAR(st.r_tilde_t, 150.0, 1e-12);
}

TEST(Anchors, SingleTimeFallsBackToWindow) {
    const std::vector<SpaceTimePoint> sp{{0, 0, 0}, {1, 0, 0}};
    EXPECT_DOUBLE_EQ(make_anchors(sp, 1, 100.0, 500.0).r_tilde_t, 600.0);
    EXPECT_DOUBLE_EQ(make_anchors(sp, 1, 100.0, 500.0).anchors[0].t, 300.0);
}

TEST(Anchors, Errors) {
    const std::vector<SpaceTimePoint> dup{{0, 0, 0}, {0, 0, 5}};
    EXPECT_THROW(make_anchors(dup, 2, 0.0, 10.0), InputError);
    EXPECT_THROW(make_anchors(std::vector<SpaceTimePoint>{}, 2, 0.0, 10.0), InputError);
    const std::vector<SpaceTimePoint> one{{0, 0, 0}};
    EXPECT_THROW(make_anchors(one, 0, 0.0, 10.0), InputError);
    EXPECT_THROW(make_layout({}), InputError);
}

TEST(BasisVector, ExamplesAndProductStructure) {
    const auto lay = make_layout({{0, 0, 0}}, block_all, 2.0, 60.0);
    const double rs = lay.r_tilde_s;
    const auto w = basis_vector({rs, 0, 0}, lay);
    ASSERT_EQ(w.size(), 3);
    EXPECT_NEAR(w[0], std::exp(-1.0), 1e-15);
    EXPECT_EQ(w[1], 1.0);
    EXPECT_NEAR(w[2], std::exp(-1.0), 1e-15);

    std::vector<SpaceTimePoint> anchors = random_points(6, 2, 600.0);
    const auto gen = make_layout(anchors);
    const auto at = basis_vector(anchors[3], gen);
    EXPECT_EQ(at[3], 1.0);
    EXPECT_EQ(at[6 + 3], 1.0);
    EXPECT_EQ(at[12 + 3], 1.0);
    for (const auto& x : random_points(30, 3, 600.0)) {
        const auto v = basis_vector(x, gen);
        for (int a = 0; a < 6; ++a) EXPECT_NEAR(v[12 + a], v[a] * v[6 + a], 1e-15);
        EXPECT_GT(v.minCoeff(), 0.0);
        EXPECT_LE(v.maxCoeff(), 1.0);
    }
}

TEST(BasisVector, DecreasingInDistance) {
    const auto lay = make_layout({{0, 0, 0}, {1, 1, 100}});
    double prev = 2.0;
    for (double d = 0.0; d < 3.0; d += 0.05) {
        const double w = basis_vector({d, 0, 0}, lay)[0];
        EXPECT_LT(w, prev);
        prev = w;
    }
}

TEST(Layout, RepeatedLocationsShareSpatialEntries) {
    const std::vector<SpaceTimePoint> sp{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    const auto lay = make_anchors(sp, 3, 0.0, 100.0);
    EXPECT_EQ(lay.spatial_size(), 3u);
    EXPECT_EQ(lay.temporal_size(), 3u);
    EXPECT_EQ(lay.spatiotemporal_size(), 9u);
    EXPECT_EQ(lay.dimension(), 15u);
}

TEST(LowRank, ExamplesAndRank) {
    const auto lay = make_layout(random_points(5, 4, 500.0));
    BasisCoefficients zero{Eigen::VectorXd::Zero(15), 1.0};
    const auto pts = random_points(20, 5, 500.0);
    EXPECT_EQ(lowrank_cov(pts[0], pts[1], zero, lay), 0.0);

    std::mt19937_64 rng(6);
    std::normal_distribution<double> nd;
    for (int rep = 0; rep < 10; ++rep) {
        BasisCoefficients c{Eigen::VectorXd::NullaryExpr(15, [&] { return nd(rng); }), 0.5};
        const CovarianceModel m(LowRankModel{c, lay});
        for (const auto& x : pts) EXPECT_GE(m(x, x), 0.0);
        const Eigen::MatrixXd g = m.gram(pts);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
        const double top = es.eigenvalues().cwiseAbs().maxCoeff();
        int nonzero = 0;
        for (auto v : es.eigenvalues()) nonzero += std::abs(v) > 1e-8 * top;
        EXPECT_LE(nonzero, 3);
        const Eigen::MatrixXd u = lowrank_factor(pts, c, lay);
        EXPECT_LT((u * u.transpose() - g).cwiseAbs().maxCoeff(), 1e-12);
    }
    EXPECT_THROW(lowrank_cov(pts[0], pts[1], BasisCoefficients{Eigen::VectorXd::Zero(3), 1.0}, lay), InputError);
}

TEST(CovarianceModel, NoisyGramIsPositiveDefinite) {
    const auto pts = random_points(80, 7, 300.0);
    const CovarianceModel k(ProductSumKernel{0.4, 0.4, 0.4, 0.2, 50.0});
    const auto lay = make_layout(random_points(4, 8, 300.0));
    BasisCoefficients c{Eigen::VectorXd::Constant(12, 0.7), 1e-6};
    const CovarianceModel lr(LowRankModel{c, lay});
    for (const CovarianceModel* m : {&k, &lr}) {
        Eigen::MatrixXd g = m->gram(pts);
        EXPECT_TRUE(g.isApprox(g.transpose(), 0.0));
        g.diagonal().array() += 1e-6;
        EXPECT_EQ(Eigen::LLT<Eigen::MatrixXd>(g).info(), Eigen::Success);
    }
    EXPECT_THROW(CovarianceModel(ProductSumKernel{1, 0, 0, -1, 1}), InputError);
}

TEST(Variogram, TwoPointsAndScaling) {
    const std::vector<SpaceTimePoint> two{{0, 0, 0}, {0.3, 0.4, 10}};
    const std::vector<double> y{1.0, 4.0};
    const auto se = edges(1.0, 2), te = edges(20.0, 2);
    const auto vg = empirical_variogram(two, y, se, te);
    ASSERT_EQ(vg.bins.size(), 1u);
    EXPECT_EQ(vg.bins[0].semivariance, 4.5);
    EXPECT_EQ(vg.bins[0].count, 1u);
    EXPECT_EQ(vg.bins[0].spatial_lag, 0.5);
    EXPECT_EQ(vg.bins[0].temporal_lag, 10.0);
    EXPECT_EQ(vg.dropped_empty_bins, 3u);
    EXPECT_FALSE(vg.warnings.empty());

    const auto pts = random_points(50, 9, 100.0);
    std::vector<double> r(50), r2(50), flat(50, 3.0);
    std::mt19937_64 rng(10);
    std::normal_distribution<double> nd;
    for (int i = 0; i < 50; ++i) r[i] = nd(rng), r2[i] = 2 * r[i];
    const auto a = empirical_variogram(pts, r, edges(1.5, 5), edges(100.0, 4));
    const auto b = empirical_variogram(pts, r2, edges(1.5, 5), edges(100.0, 4));
    ASSERT_EQ(a.bins.size(), b.bins.size());
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < a.bins.size(); ++i) {
        EXPECT_NEAR(b.bins[i].semivariance, 4 * a.bins[i].semivariance, 1e-12);
        EXPECT_GE(a.bins[i].count, 1u);
        pairs += a.bins[i].count;
    }
    EXPECT_EQ(pairs, 50u * 49u / 2u);
    for (const auto& bin : empirical_variogram(pts, flat, edges(1.5, 5), edges(100.0, 4)).bins) EXPECT_EQ(bin.semivariance, 0.0);
    EXPECT_THROW(empirical_variogram(std::span(two.data(), 1), std::span(y.data(), 1), se, te), InputError);
}

TEST(Wls, ExactModelVariogramIsFixedPoint) {
    const ProductSumKernel truth{0.6, 0.3, 0.5, 0.2, 90.0};
    EmpiricalVariogram vg;
    for (double hs : {0.05, 0.1, 0.2, 0.4, 0.8})
        for (double ht : {0.0, 30.0, 90.0, 200.0}) vg.bins.push_back({hs, ht, truth.semivariance(hs, ht), 40});
    const auto fit = fit_product_sum_wls(vg, truth);
    EXPECT_LT(fit.objective, 1e-20);
    EXPECT_NEAR(fit.kernel.sigma2_s, truth.sigma2_s, 1e-9);
    EXPECT_NEAR(fit.kernel.sigma2_t, truth.sigma2_t, 1e-9);
    EXPECT_NEAR(fit.kernel.sigma2_st, truth.sigma2_st, 1e-9);
    EXPECT_NEAR(fit.kernel.r_s, truth.r_s, 1e-9);
    EXPECT_NEAR(fit.kernel.r_t, truth.r_t, 1e-7);
}

TEST(Wls, RecoversKernelFromPerturbedStart) {
    const ProductSumKernel truth{0.6, 0.3, 0.5, 0.2, 90.0};
    EmpiricalVariogram vg;
    for (double hs : {0.05, 0.1, 0.2, 0.4, 0.8})
        for (double ht : {0.0, 30.0, 90.0, 200.0}) vg.bins.push_back({hs, ht, truth.semivariance(hs, ht), 40});
    const auto fit = fit_product_sum_wls(vg, default_wls_init(vg));
    EXPECT_LT(fit.objective, 1e-10);
    EXPECT_NEAR(fit.kernel.sill(), truth.sill(), 1e-3);
    for (std::size_t i = 1; i < fit.objective_trace.size(); ++i) EXPECT_LE(fit.objective_trace[i], fit.objective_trace[i - 1] + 1e-12);
}

TEST(Wls, AllZeroIsDegenerate) {
    EmpiricalVariogram vg;
    for (int i = 1; i <= 6; ++i) vg.bins.push_back({0.1 * i, 0.0, 0.0, 10});
    const auto fit = fit_product_sum_wls(vg, ProductSumKernel{});
    EXPECT_TRUE(fit.degenerate);
    EXPECT_EQ(fit.kernel.sill(), 0.0);
    EXPECT_FALSE(fit.warnings.empty());
}

TEST(Wls, NeedsFiveBins) {
    EmpiricalVariogram vg;
    for (int i = 1; i <= 4; ++i) vg.bins.push_back({0.1 * i, 0.0, 0.5, 10});
    EXPECT_THROW(fit_product_sum_wls(vg, ProductSumKernel{}), InputError);
}

// Simulate from a known kernel and fit; the median total variance over
// replications should land near the truth (one field is a single draw).
TEST(Wls, SimulatedSillWithinQuarter) {
    const ProductSumKernel truth{0.5, 0.2, 0.3, 0.1, 60.0};
    std::vector<double> sills;
    const int reps = 20;
    for (int rep = 0; rep < reps; ++rep) {
        std::vector<SpaceTimePoint> pts;
        const auto sites = random_points(40, 100 + rep, 0.0);
        for (int k = 0; k < 16; ++k)
            for (const auto& s : sites) pts.push_back({s.lon, s.lat, 20.0 * k});
        const Eigen::VectorXd y = sample_gp(pts, [&](const auto& a, const auto& b) { return product_sum_cov(a, b, truth); },
                                            static_cast<std::uint64_t>(rep));
        const std::vector<double> r(y.data(), y.data() + y.size());
        std::vector<double> te{0.0, 1.0};
        for (int k = 1; k <= 8; ++k) te.push_back(20.0 * k + 10.0);
        const auto vg = empirical_variogram(pts, r, edges(0.5, 10), te);
        const auto fit = fit_product_sum_wls(vg, default_wls_init(vg));
        sills.push_back(fit.kernel.sill());
    }
    std::nth_element(sills.begin(), sills.begin() + reps / 2, sills.end());
    EXPECT_NEAR(sills[reps / 2], truth.sill(), 0.25 * truth.sill());
}
