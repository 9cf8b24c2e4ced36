#pragma once

#include "stfuse/core.hpp"
#include "stfuse/covariance.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace stfuse {

/// Standard-normal draws per axis, affinely rescaled so each axis spans [0, 1].
inline std::vector<SpaceTimePoint> scale_sites(std::size_t n, std::uint64_t seed) {
    require(n >= 2, "scale_sites: need at least two sites");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::vector<double> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = nd(rng);
        ys[i] = nd(rng);
    }
    auto rescale = [](std::vector<double>& v) {
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        const double a = *lo, span = *hi - *lo;
        require(span > 0, "scale_sites: degenerate draw");
        for (double& e : v) e = (e - a) / span;
        // exact endpoints regardless of rounding
        *std::min_element(v.begin(), v.end()) = 0.0;
        *std::max_element(v.begin(), v.end()) = 1.0;
    };
    rescale(xs);
    rescale(ys);
    std::vector<SpaceTimePoint> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = {xs[i], ys[i], 0.0};
    return out;
}

/// Regular g x g evaluation grid over [lo, hi]^2 at t = 0.
inline std::vector<SpaceTimePoint> regular_grid(int g, double lo, double hi) {
    require(g >= 2, "regular_grid: need at least 2 points per axis");
    std::vector<SpaceTimePoint> out;
    out.reserve(static_cast<std::size_t>(g * g));
    for (int i = 0; i < g; ++i)
        for (int j = 0; j < g; ++j) out.push_back({lo + (hi - lo) * i / (g - 1), lo + (hi - lo) * j / (g - 1), 0.0});
    return out;
}

/// Zero-mean Gaussian draw over `sites` by symmetric factorization of the
/// covariance matrix. Falls back to a pivoted LDL' factorization when the
/// matrix is only semidefinite (e.g. coincident sites).
template <class Cov>
Eigen::VectorXd sample_gp(std::span<const SpaceTimePoint> sites, const Cov& cov, std::uint64_t seed) {
    const auto n = static_cast<Eigen::Index>(sites.size());
    Eigen::MatrixXd c(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) c(i, j) = c(j, i) = cov(sites[static_cast<std::size_t>(i)], sites[static_cast<std::size_t>(j)]);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z[i] = nd(rng);

    Eigen::LLT<Eigen::MatrixXd> llt(c);
    if (llt.info() == Eigen::Success) return llt.matrixL() * z;

    Eigen::LDLT<Eigen::MatrixXd> ldlt(c);
    if (ldlt.info() != Eigen::Success) throw NumericalError("sample_gp: covariance factorization failed");
    const Eigen::VectorXd d = ldlt.vectorD();
    const double top = std::max(d.cwiseAbs().maxCoeff(), 1e-300);
    if (d.minCoeff() < -1e-10 * top) throw NumericalError("sample_gp: covariance matrix is not positive semidefinite");
    Eigen::VectorXd scaled = d.cwiseMax(0.0).cwiseSqrt().cwiseProduct(z);
    Eigen::VectorXd lz = ldlt.matrixL() * scaled;
    return ldlt.transpositionsP().transpose() * lz;
}

inline double rmse(std::span<const double> predicted, std::span<const double> truth) {
    require(predicted.size() == truth.size() && !truth.empty(), "rmse: length mismatch");
    double ss = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) ss += (predicted[i] - truth[i]) * (predicted[i] - truth[i]);
    return std::sqrt(ss / static_cast<double>(truth.size()));
}

} // namespace stfuse
