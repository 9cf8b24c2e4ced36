#include "stfuse/hotlogit.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace stfuse;

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }
double expit(double e) { return 1.0 / (1.0 + std::exp(-e)); }

// Bernoulli data with logit p = a + b x, days spread over a month.
std::vector<HotObservation> simulate(std::size_t n, double a, double b, std::uint64_t seed,
                                     double (*day_effect)(double) = nullptr) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> u;
    std::vector<HotObservation> out;
    for (std::size_t i = 0; i < n; ++i) {
        HotObservation o;
        o.at = {139.0 + u(rng), 35.0 + u(rng), 31.0 * minutes_per_day * u(rng)};
        const double x = z(rng);
        o.covariates = {x};
        double eta = a + b * x;
        if (day_effect) eta += day_effect(o.at.day());
        o.hot = u(rng) < expit(eta) ? 1 : 0;
        out.push_back(o);
    }
    return out;
}

} // namespace

TEST(HotlogitDesign, NoSmoothsIsInterceptPlusCovariates) {
    auto data = simulate(50, 0.0, 1.0, 1);
    AdditiveLogisticSpec spec{{"x"}, {}, {}, {}};
    const Design d = build_design(data, spec);
    ASSERT_EQ(d.x.cols(), 2);
    EXPECT_TRUE(d.penalties.empty());
    for (Eigen::Index i = 0; i < d.x.rows(); ++i) {
        EXPECT_EQ(d.x(i, 0), 1.0);
        EXPECT_EQ(d.x(i, 1), data[static_cast<std::size_t>(i)].covariates[0]);
    }
}

TEST(HotlogitDesign, DaySmoothColumnsAndPenaltyRank) {
    std::vector<HotObservation> data;
    for (int day = 0; day < 31; ++day) data.push_back({{0, 0, day * minutes_per_day + 30}, {}, day % 2});
    AdditiveLogisticSpec spec;
    spec.day_smooth = SmoothSpec{6, 2, 1.0};
    const Design d = build_design(data, spec);
    EXPECT_EQ(d.x.cols(), 7);
    ASSERT_EQ(d.penalties.size(), 1u);
    const Eigen::MatrixXd& p = d.penalties[0].matrix;
    ASSERT_EQ(p.rows(), 6);
    // hand-built second differences
    Eigen::MatrixXd dd = Eigen::MatrixXd::Zero(4, 6);
    for (int r = 0; r < 4; ++r) dd(r, r) = 1, dd(r, r + 1) = -2, dd(r, r + 2) = 1;
    EXPECT_LT((p - dd.transpose() * dd).norm(), 1e-12);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(p);
    EXPECT_EQ(lu.rank(), 4);
    for (Eigen::Index i = 0; i < d.x.rows(); ++i) EXPECT_NEAR(d.x.row(i).segment(1, 6).sum(), 1.0, 1e-12);
}

TEST(HotlogitDesign, SpatialTensorIsOuterProduct) {
    auto data = simulate(40, 0.0, 1.0, 2);
    for (auto& o : data) o.covariates.clear();
    AdditiveLogisticSpec spec;
    spec.spatial_smooth = SpatialSmoothSpec{4, 4, 2, 1.0};
    const Design d = build_design(data, spec);
    ASSERT_EQ(d.x.cols(), 17);
    const auto& bx = *d.layout.lon_basis;
    const auto& by = *d.layout.lat_basis;
    for (Eigen::Index i = 0; i < d.x.rows(); ++i) {
        const auto& at = data[static_cast<std::size_t>(i)].at;
        const Eigen::VectorXd ex = bx.eval(at.lon), ey = by.eval(at.lat);
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) EXPECT_NEAR(d.x(i, 1 + a * 4 + b), ex[a] * ey[b], 1e-14);
    }
}

TEST(HotlogitDesign, ConstantResponseIsSeparated) {
    auto data = simulate(20, 0.0, 1.0, 3);
    for (auto& o : data) o.hot = 0;
    EXPECT_THROW(build_design(data, AdditiveLogisticSpec{{"x"}, {}, {}, {}}), SeparationError);
    for (auto& o : data) o.hot = 1;
    EXPECT_THROW(build_design(data, AdditiveLogisticSpec{{"x"}, {}, {}, {}}), SeparationError);
}

TEST(HotlogitDesign, RejectsBadInput) {
    auto data = simulate(20, 0.0, 1.0, 4);
    data[3].hot = 2;
    EXPECT_THROW(build_design(data, AdditiveLogisticSpec{{"x"}, {}, {}, {}}), InputError);
    data[3].hot = 1;
    data[5].covariates.clear();
    EXPECT_THROW(build_design(data, AdditiveLogisticSpec{{"x"}, {}, {}, {}}), InputError);
    AdditiveLogisticSpec bad;
    bad.day_smooth = SmoothSpec{3, 2, 1.0};
    EXPECT_THROW(bad.validate(), InputError);
}

TEST(HotlogitFit, InterceptOnlyIsLogitOfMean) {
    auto data = simulate(300, -0.7, 0.0, 5);
    for (auto& o : data) o.covariates.clear();
    const Design d = build_design(data, AdditiveLogisticSpec{});
    const auto fit = fit_penalized_logistic(d);
    EXPECT_NEAR(fit.alpha, logit(d.y.mean()), 1e-10);
    EXPECT_NEAR(predict_hot_probability(fit, data[0].at, {}), d.y.mean(), 1e-10);
}

TEST(HotlogitFit, RecoversSlopeWithinThreeStandardErrors) {
    auto data = simulate(5000, 0.3, -0.4, 6);
    const auto fit = fit_penalized_logistic(build_design(data, AdditiveLogisticSpec{{"x"}, {}, {}, {}}));
    EXPECT_TRUE(fit.converged);
    EXPECT_LT(std::abs(fit.beta[0] + 0.4), 3.0 * fit.se[1]);
    EXPECT_LT(std::abs(fit.alpha - 0.3), 3.0 * fit.se[0]);
    EXPECT_LT(fit.score_max_norm, 1e-6);
    const auto rows = fit.table();
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[1].name, "x");
    EXPECT_EQ(rows[1].stars, "**");
    EXPECT_NEAR(rows[1].z, fit.beta[0] / fit.se[1], 1e-12);
}

TEST(HotlogitFit, StandardErrorsMatchInverseInformation) {
    auto data = simulate(800, 0.1, 0.8, 7);
    const Design d = build_design(data, AdditiveLogisticSpec{{"x"}, {}, {}, {}});
    const auto fit = fit_penalized_logistic(d);
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(2, 2);
    for (Eigen::Index i = 0; i < d.x.rows(); ++i) {
        const double p = expit(d.x.row(i).dot(fit.coefficients));
        info += p * (1 - p) * d.x.row(i).transpose() * d.x.row(i);
    }
    const Eigen::MatrixXd cov = info.inverse();
    EXPECT_NEAR(fit.se[0], std::sqrt(cov(0, 0)), 1e-8);
    EXPECT_NEAR(fit.se[1], std::sqrt(cov(1, 1)), 1e-8);
}

TEST(HotlogitFit, HeavyPenaltyLeavesLinearDayEffect) {
    auto data = simulate(1500, 0.0, 0.5, 8, [](double day) { return std::sin(day / 5.0); });
    AdditiveLogisticSpec spec{{"x"}, SmoothSpec{8, 2, 1e9}, {}, {}};
    const auto fit = fit_penalized_logistic(build_design(data, spec));
    const auto curve = smooth_curve(fit, SmoothTerm::day, 41);
    // second differences on an even grid vanish for a line
    double range = 0.0, worst = 0.0;
    for (std::size_t i = 1; i + 1 < curve.size(); ++i) {
        worst = std::max(worst, std::abs(curve[i + 1].second - 2 * curve[i].second + curve[i - 1].second));
        range = std::max(range, std::abs(curve[i].second));
    }
    EXPECT_LT(worst, 1e-6);

    spec.day_smooth->weight = 1e-2;
    const auto loose = smooth_curve(fit_penalized_logistic(build_design(data, spec)), SmoothTerm::day, 41);
    double bend = 0.0;
    for (std::size_t i = 1; i + 1 < loose.size(); ++i)
        bend = std::max(bend, std::abs(loose[i + 1].second - 2 * loose[i].second + loose[i - 1].second));
    EXPECT_GT(bend, 1e-3);
}

TEST(HotlogitFit, SmoothsAreCentred) {
    auto data = simulate(1000, 0.0, 0.5, 9, [](double day) { return 0.5 * std::cos(day / 4.0); });
    AdditiveLogisticSpec spec{{"x"}, SmoothSpec{8, 2, 1.0}, SmoothSpec{6, 2, 1.0}, SpatialSmoothSpec{4, 4, 2, 1.0}};
    const Design d = build_design(data, spec);
    const auto fit = fit_penalized_logistic(d);
    for (const auto& [term, blk] : d.layout.blocks)
        EXPECT_NEAR((d.x.middleCols(blk.first, blk.second) * fit.smooth_coefficients.at(term)).sum(), 0.0, 1e-8) << term_name(term);
    EXPECT_EQ(spatial_surface(fit, 5).size(), 25u);
}

TEST(HotlogitFit, PerfectSeparationIsReported) {
    auto data = simulate(100, 0.0, 1.0, 10);
    for (auto& o : data) o.hot = o.covariates[0] > 0 ? 1 : 0;
    EXPECT_THROW(fit_penalized_logistic(build_design(data, AdditiveLogisticSpec{{"x"}, {}, {}, {}})), ConvergenceError);
}

TEST(HotlogitPredict, ZeroLinearPredictorIsHalf) {
    std::vector<HotObservation> data{{{0, 0, 0}, {-1.0}, 0}, {{0, 0, 0}, {1.0}, 1}, {{0, 0, 0}, {1.0}, 0}, {{0, 0, 0}, {-1.0}, 1}};
    const auto fit = fit_penalized_logistic(build_design(data, AdditiveLogisticSpec{{"x"}, {}, {}, {}}));
    EXPECT_NEAR(fit.alpha, 0.0, 1e-12);
    EXPECT_NEAR(fit.beta[0], 0.0, 1e-12);
    const double x = 0.0;
    EXPECT_NEAR(predict_hot_probability(fit, {0, 0, 0}, std::span(&x, 1)), 0.5, 1e-12);
}

TEST(HotlogitPredict, TrainingPointMatchesFittedValue) {
    auto data = simulate(600, -0.2, 0.6, 11);
    AdditiveLogisticSpec spec{{"x"}, SmoothSpec{6, 2, 1.0}, SmoothSpec{6, 2, 1.0}, {}};
    const Design d = build_design(data, spec);
    const auto fit = fit_penalized_logistic(d);
    for (std::size_t i = 0; i < data.size(); i += 37)
        EXPECT_NEAR(predict_hot_probability(fit, data[i].at, data[i].covariates),
                    expit(d.x.row(static_cast<Eigen::Index>(i)).dot(fit.coefficients)), 1e-14);
}

TEST(HotlogitPredict, OutsideDaySupportThrows) {
    auto data = simulate(300, 0.0, 0.5, 12);
    const auto fit = fit_penalized_logistic(build_design(data, AdditiveLogisticSpec{{"x"}, SmoothSpec{6, 2, 1.0}, {}, {}}));
    const double x = 0.0;
    EXPECT_THROW(predict_hot_probability(fit, {139.5, 35.5, 60 * minutes_per_day}, std::span(&x, 1)), InputError);
    EXPECT_THROW(predict_hot_probability(fit, {139.5, 35.5, 60}, {}), InputError);
}

TEST(HotlogitInvariant, DevianceTraceNonIncreasing) {
    for (std::uint64_t seed = 20; seed < 30; ++seed) {
        auto data = simulate(400, 0.5, 1.5, seed, [](double day) { return std::sin(day); });
        const auto fit =
            fit_penalized_logistic(build_design(data, AdditiveLogisticSpec{{"x"}, SmoothSpec{10, 2, 0.1}, SmoothSpec{6, 2, 1.0}, {}}));
        EXPECT_LT(fit.score_max_norm, 1e-6);
        for (std::size_t i = 1; i < fit.deviance_trace.size(); ++i)
            EXPECT_LE(fit.deviance_trace[i], fit.deviance_trace[i - 1] + 1e-9) << seed;
    }
}

TEST(HotlogitInvariant, PenaltyNeverLowersDeviance) {
    auto data = simulate(700, 0.0, 0.5, 31, [](double day) { return std::sin(day / 3.0); });
    double prev = 0.0;
    for (double w : {0.0, 1e-2, 1.0, 100.0, 1e4}) {
        const auto fit = fit_penalized_logistic(build_design(data, AdditiveLogisticSpec{{"x"}, SmoothSpec{10, 2, w}, {}, {}}));
        EXPECT_GE(fit.deviance, prev - 1e-8) << w;
        prev = fit.deviance;
    }
}

TEST(HotlogitInvariant, AffineCovariateRescaling) {
    auto data = simulate(900, 0.2, 0.7, 32);
    const auto fit = fit_penalized_logistic(build_design(data, AdditiveLogisticSpec{{"x"}, SmoothSpec{6, 2, 1.0}, {}, {}}));
    auto scaled = data;
    for (auto& o : scaled) o.covariates[0] = 3.0 * o.covariates[0] - 2.0;
    const auto fit2 = fit_penalized_logistic(build_design(scaled, AdditiveLogisticSpec{{"x"}, SmoothSpec{6, 2, 1.0}, {}, {}}));
    EXPECT_NEAR(fit2.deviance, fit.deviance, 1e-8);
    EXPECT_NEAR(fit2.beta[0] * 3.0, fit.beta[0], 1e-10);
    for (std::size_t i = 0; i < data.size(); i += 50)
        EXPECT_NEAR(predict_hot_probability(fit2, scaled[i].at, scaled[i].covariates),
                    predict_hot_probability(fit, data[i].at, data[i].covariates), 1e-10);
}

TEST(HotlogitPenalty, CrossValidationPicksFromGrid) {
    auto data = simulate(600, 0.0, 0.5, 40, [](double day) { return std::sin(day / 4.0); });
    Design d = build_design(data, AdditiveLogisticSpec{{"x"}, SmoothSpec{8, 2, 1.0}, {}, {}});
    PenaltySearch search;
    search.grid = {1e-2, 1.0, 100.0};
    search.folds = 4;
    const auto sel = select_penalties(d, search);
    ASSERT_EQ(sel.weights.count(SmoothTerm::day), 1u);
    const double w = sel.weights.at(SmoothTerm::day);
    EXPECT_TRUE(w == 1e-2 || w == 1.0 || w == 100.0);
    apply_penalties(d, sel);
    EXPECT_NEAR(cv_deviance(d, 4, search.seed), sel.cv_deviance, 1e-9);
}
