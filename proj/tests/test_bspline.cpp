#include "stfuse/bspline.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace stfuse;

// Cox-de Boor recursion on an explicit knot vector.
static double cox_de_boor(const std::vector<double>& knots, int i, int degree, double x) {
    if (degree == 0) return (knots[i] <= x && x < knots[i + 1]) ? 1.0 : 0.0;
    double a = 0.0, b = 0.0;
    const double d1 = knots[i + degree] - knots[i], d2 = knots[i + degree + 1] - knots[i + 1];
    if (d1 > 0) a = (x - knots[i]) / d1 * cox_de_boor(knots, i, degree - 1, x);
    if (d2 > 0) b = (knots[i + degree + 1] - x) / d2 * cox_de_boor(knots, i + 1, degree - 1, x);
    return a + b;
}

TEST(Bspline, OpenBasisMatchesRecursion) {
    const auto basis = bspline::Basis::open(2.0, 9.0, 8);
    const double h = basis.spacing();
    std::vector<double> knots;
    for (int j = -3; j <= 8; ++j) knots.push_back(2.0 + j * h);
    for (double x = 2.0; x < 9.0; x += 0.173) {
        const auto v = basis.eval(x);
        for (int k = 0; k < 8; ++k) EXPECT_NEAR(v[k], cox_de_boor(knots, k, 3, x), 1e-12) << x << ' ' << k;
    }
}

TEST(Bspline, PartitionOfUnity) {
    const auto open = bspline::Basis::open(-1.0, 3.0, 6);
    const auto cyc = bspline::Basis::cyclic(0.0, 1440.0, 9);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        EXPECT_NEAR(open.eval(-1.0 + 4.0 * u(rng)).sum(), 1.0, 1e-12);
        EXPECT_NEAR(cyc.eval(-3000.0 + 9000.0 * u(rng)).sum(), 1.0, 1e-12);
    }
    EXPECT_NEAR(open.eval(3.0).sum(), 1.0, 1e-12);
}

TEST(Bspline, CyclicWraps) {
    const auto cyc = bspline::Basis::cyclic(0.0, 1440.0, 8);
    EXPECT_LT((cyc.eval(10.0) - cyc.eval(1450.0)).norm(), 1e-12);
    EXPECT_LT((cyc.eval(1439.999999) - cyc.eval(0.0)).norm(), 1e-5);
}

TEST(Bspline, OutsideSupportThrows) {
    const auto b = bspline::Basis::open(0.0, 1.0, 5);
    EXPECT_THROW(b.eval(1.0001), InputError);
    EXPECT_THROW(b.eval(-0.1), InputError);
    EXPECT_THROW(bspline::Basis::open(0.0, 1.0, 3), InputError);
}

TEST(Bspline, IntegralsMatchMidpointRule) {
    for (const auto& b : {bspline::Basis::open(0.0, 5.0, 7), bspline::Basis::cyclic(0.0, 2.0, 6)}) {
        const int n = 200000;
        const double dx = (b.hi() - b.lo()) / n;
        Eigen::VectorXd m = Eigen::VectorXd::Zero(b.size());
        for (int i = 0; i < n; ++i) m += dx * b.eval(b.lo() + (i + 0.5) * dx);
        EXPECT_LT((m - b.integrals()).cwiseAbs().maxCoeff(), 1e-8);
        EXPECT_NEAR(b.integrals().sum(), b.hi() - b.lo(), 1e-12);
    }
}

TEST(Bspline, DifferencePenaltyNullSpace) {
    const Eigen::MatrixXd p = bspline::difference_penalty(6, 2);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p);
    int zero = 0;
    for (auto v : es.eigenvalues()) zero += std::abs(v) < 1e-10;
    EXPECT_EQ(zero, 2);
    const Eigen::VectorXd lin = Eigen::VectorXd::LinSpaced(6, -1.0, 4.0);
    EXPECT_LT((p * lin).norm(), 1e-12);
    EXPECT_LT((p * Eigen::VectorXd::Ones(6)).norm(), 1e-12);
    // cyclic second differences keep only constants
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ec(bspline::difference_penalty(6, 2, true));
    zero = 0;
    for (auto v : ec.eigenvalues()) zero += std::abs(v) < 1e-10;
    EXPECT_EQ(zero, 1);
}

TEST(Bspline, LinearCoefficientsGiveLinearFunction) {
    const auto b = bspline::Basis::open(0.0, 10.0, 8);
    // Greville abscissae of a uniform cubic basis reproduce x exactly
    Eigen::VectorXd c(8);
    for (int k = 0; k < 8; ++k) c[k] = (k - 1) * b.spacing();
    for (double x = 0.0; x <= 10.0; x += 0.37) EXPECT_NEAR(b.eval(x).dot(c), x, 1e-11);
}

TEST(Bspline, TensorAndKron) {
    Eigen::VectorXd a(2), c(3);
    a << 1, 2;
    c << 3, 4, 5;
    Eigen::VectorXd t(6);
    t << 3, 4, 5, 6, 8, 10;
    EXPECT_EQ(bspline::tensor(a, c), t);
    Eigen::MatrixXd m = bspline::kron(Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Constant(2, 2, 3.0));
    EXPECT_EQ(m(0, 1), 3.0);
    EXPECT_EQ(m(0, 2), 0.0);
    EXPECT_EQ(m(3, 3), 3.0);
}
