#pragma once

#include "stfuse/core.hpp"
#include "stfuse/covariance.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <variant>
#include <vector>

namespace stfuse {

// Expectation-maximization for the rank-one random-effects model
//   y_i = (b . w_i) Gamma_i + v_i,  Gamma_i ~ N(0, 1),  v_i ~ N(0, sigma2).

enum class EMInit {
    data_scaled_random, // seeded random direction
    least_squares,      // direction of the least-squares fit of y on w
};

struct EMConfig {
    int max_iterations = 500;
    double tolerance = 1e-6;   // max relative parameter change
    double init_sigma2 = 0.0;  // <= 0 selects var(y) / 2
    std::variant<EMInit, Eigen::VectorXd> init_b = EMInit::data_scaled_random;
    std::uint64_t seed = 1;
    double ridge = 0.0; // > 0 adds ridge * |b|^2 to the M-step least squares
};

struct EMResult {
    BasisCoefficients coeffs;
    std::vector<double> loglik_trace;
    int iterations = 0;
    bool converged = false;
};

struct EStep {
    double m = 0.0;
    double v = 1.0;
};

/// Conditional moments of Gamma_i given y_i.
inline EStep e_step(double y, double bw, double sigma2) {
    require(sigma2 > 0.0, "e_step: sigma2 must be positive");
    EStep r;
    r.v = 1.0 / (1.0 + bw * bw / sigma2);
    r.m = r.v / sigma2 * y * bw;
    return r;
}

struct MStep {
    Eigen::VectorXd b;
    double sigma2 = 0.0;
    Eigen::VectorXd u; // w * b at the data
};

/// Least-squares update on the 2n x q augmented system: rows m_i w_i with
/// target y_i, then sqrt(v_i) w_i with target 0. A positive ridge appends
/// sqrt(ridge) I rows (target 0); sigma2 then absorbs ridge |b|^2, which is
/// the exact maximizer of the penalized objective.
namespace detail {

// Rows hold the packed lower triangle of w_i w_i', so that
// sum_i c_i w_i w_i' is one matrix-vector product.
inline Eigen::MatrixXd packed_outer_products(const Eigen::MatrixXd& w) {
    const Eigen::Index q = w.cols();
    Eigen::MatrixXd out(q * (q + 1) / 2, w.rows());
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        Eigen::Index k = 0;
        for (Eigen::Index c = 0; c < q; ++c)
            for (Eigen::Index r = c; r < q; ++r) out(k++, i) = w(i, r) * w(i, c);
    }
    return out;
}

inline Eigen::MatrixXd unpack_symmetric(const Eigen::VectorXd& packed, Eigen::Index q) {
    Eigen::MatrixXd g(q, q);
    Eigen::Index k = 0;
    for (Eigen::Index c = 0; c < q; ++c)
        for (Eigen::Index r = c; r < q; ++r) g(r, c) = g(c, r) = packed[k++];
    return g;
}

} // namespace detail

inline MStep m_step(std::span<const double> y, const Eigen::MatrixXd& w, std::span<const double> m,
                    std::span<const double> v, double sigma2_floor = std::numeric_limits<double>::min(),
                    double ridge = 0.0, const Eigen::MatrixXd* packed_outer = nullptr) {
    const auto n = static_cast<Eigen::Index>(y.size());
    require(w.rows() == n && m.size() == y.size() && v.size() == y.size(), "m_step: dimension mismatch");
    require(n > 0, "m_step: no observations");
    require(ridge >= 0.0 && std::isfinite(ridge), "m_step: ridge must be finite and >= 0");
    const Eigen::Index q = w.cols();
    Eigen::VectorXd wgt(n), my(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto iu = static_cast<std::size_t>(i);
        require(v[iu] >= 0.0, "m_step: negative conditional variance");
        wgt[i] = m[iu] * m[iu] + v[iu];
        my[i] = m[iu] * y[iu];
    }
    MStep r;
    // normal equations of the augmented system; QR when they are ill conditioned
    Eigen::MatrixXd g(q, q);
    if (packed_outer) {
        g = detail::unpack_symmetric(*packed_outer * wgt, q);
    } else {
        const Eigen::MatrixXd wd = w.array().colwise() * wgt.array();
        g.noalias() = w.transpose() * wd;
    }
    g.diagonal().array() += ridge;
    const Eigen::LLT<Eigen::MatrixXd> llt(g);
    if (llt.info() == Eigen::Success && llt.rcond() > 1e-12) {
        r.b = llt.solve(w.transpose() * my);
    } else {
        const Eigen::Index extra = ridge > 0.0 ? q : 0;
        Eigen::MatrixXd wt(2 * n + extra, q);
        Eigen::VectorXd et = Eigen::VectorXd::Zero(2 * n + extra);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto iu = static_cast<std::size_t>(i);
            wt.row(i) = m[iu] * w.row(i);
            wt.row(n + i) = std::sqrt(v[iu]) * w.row(i);
            et[i] = y[iu];
        }
        if (extra) wt.bottomRows(q) = std::sqrt(ridge) * Eigen::MatrixXd::Identity(q, q);
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(wt);
        qr.setThreshold(1e-10);
        if (qr.rank() < q)
            throw NumericalError("m_step: augmented regressor matrix is rank deficient (rank " + std::to_string(qr.rank()) +
                                 " < " + std::to_string(q) + "); use fewer anchor points");
        r.b = qr.solve(et);
    }
    // residual sum of squares of the augmented system, term by term
    r.u.noalias() = w * r.b;
    const Eigen::VectorXd& u = r.u;
    double rss = ridge * r.b.squaredNorm();
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto iu = static_cast<std::size_t>(i);
        const double e = y[iu] - m[iu] * u[i];
        rss += e * e + v[iu] * u[i] * u[i];
    }
    r.sigma2 = std::max(rss / static_cast<double>(n), sigma2_floor);
    return r;
}

/// Marginal log-likelihood of the rank-one model given u = w * b.
inline double em_loglik(std::span<const double> y, const Eigen::VectorXd& u, double sigma2) {
    const auto n = static_cast<Eigen::Index>(y.size());
    const Eigen::Map<const Eigen::ArrayXd> ya(y.data(), n);
    const Eigen::ArrayXd s = sigma2 + u.array().square();
    return -0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi) - 0.5 * (s.log().sum() + (ya.square() / s).sum());
}

inline double em_loglik(std::span<const double> y, const Eigen::MatrixXd& w, const Eigen::VectorXd& b, double sigma2) {
    return em_loglik(y, Eigen::VectorXd(w * b), sigma2);
}

namespace detail {

inline double sample_variance(std::span<const double> y) {
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    double ss = 0.0;
    for (double v : y) ss += (v - mean) * (v - mean);
    return y.size() > 1 ? ss / static_cast<double>(y.size() - 1) : 0.0;
}

// coefficients are measured against the largest one, so a coefficient shrinking
// toward zero does not hold the loop open
inline double max_relative_change(const Eigen::VectorXd& b0, double s0, const Eigen::VectorXd& b1, double s1) {
    const double scale = std::max(b0.lpNorm<Eigen::Infinity>(), std::numeric_limits<double>::min());
    const double db = b0.size() > 0 ? (b1 - b0).lpNorm<Eigen::Infinity>() / scale : 0.0;
    return std::max(db, std::abs(s1 - s0) / s0);
}

} // namespace detail

inline EMResult fit_em(std::span<const SpaceTimePoint> points, std::span<const double> residuals,
                       const AnchorLayout& layout, const EMConfig& cfg = {}) {
    require(points.size() == residuals.size(), "fit_em: points/residuals length mismatch");
    require(points.size() >= 2, "fit_em: need at least two observations");
    require(cfg.max_iterations >= 1, "fit_em: max_iterations must be positive");
    require(cfg.tolerance > 0.0, "fit_em: tolerance must be positive");
    require(cfg.ridge >= 0.0 && std::isfinite(cfg.ridge), "fit_em: ridge must be finite and >= 0");

    const Eigen::MatrixXd w = basis_matrix(points, layout);
    const auto n = static_cast<Eigen::Index>(points.size());
    const Eigen::Index q = w.cols();
    const double var_y = detail::sample_variance(residuals);
    const double floor = std::max(1e-10 * var_y, std::numeric_limits<double>::min());

    Eigen::VectorXd b;
    if (const auto* given = std::get_if<Eigen::VectorXd>(&cfg.init_b)) {
        require(given->size() == q, "fit_em: initial coefficient length does not match the layout");
        b = *given;
    } else {
        if (std::get<EMInit>(cfg.init_b) == EMInit::least_squares) {
            Eigen::Map<const Eigen::VectorXd> yv(residuals.data(), n);
            // small ridge keeps this defined when anchors outnumber the data
            Eigen::MatrixXd gram = w.transpose() * w;
            gram.diagonal().array() += 1e-8 * std::max(gram.diagonal().maxCoeff(), 1e-300);
            b = gram.ldlt().solve(w.transpose() * yv);
        } else {
            std::mt19937_64 rng(cfg.seed);
            std::normal_distribution<double> nd;
            b.resize(q);
            for (Eigen::Index k = 0; k < q; ++k) b[k] = nd(rng);
        }
        // scale so that mean (b . w_i)^2 equals var(y) / 2
        const double ms = (w * b).squaredNorm() / static_cast<double>(n);
        if (ms > 0.0 && var_y > 0.0) b *= std::sqrt(0.5 * var_y / ms);
    }
    double sigma2 = cfg.init_sigma2 > 0.0 ? cfg.init_sigma2 : 0.5 * var_y;
    sigma2 = std::max(sigma2, floor);

    EMResult res;
    // with a ridge the monitored objective carries the matching penalty
    auto objective = [&](const Eigen::VectorXd& uu, const Eigen::VectorXd& bb, double s2) {
        return em_loglik(residuals, uu, s2) - (cfg.ridge > 0.0 ? 0.5 * cfg.ridge * bb.squaredNorm() / s2 : 0.0);
    };
    // cache the outer products when they fit in a modest budget
    std::optional<Eigen::MatrixXd> outer;
    if (static_cast<double>(n) * static_cast<double>(q * (q + 1) / 2) <= 4e6) outer = detail::packed_outer_products(w);
    Eigen::VectorXd u = w * b;
    res.loglik_trace.push_back(objective(u, b, sigma2));
    std::vector<double> m(static_cast<std::size_t>(n)), v(static_cast<std::size_t>(n));
    for (int it = 1; it <= cfg.max_iterations; ++it) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto e = e_step(residuals[static_cast<std::size_t>(i)], u[i], sigma2);
            m[static_cast<std::size_t>(i)] = e.m;
            v[static_cast<std::size_t>(i)] = e.v;
        }
        auto next = m_step(residuals, w, m, v, floor, cfg.ridge, outer ? &*outer : nullptr);

        const double change = detail::max_relative_change(b, sigma2, next.b, next.sigma2);

        b = std::move(next.b);
        u = std::move(next.u);
        sigma2 = next.sigma2;
        res.loglik_trace.push_back(objective(u, b, sigma2));
        res.iterations = it;
        if (change < cfg.tolerance) {
            res.converged = true;
            break;
        }
    }
    res.coeffs.b = b;
    res.coeffs.sigma2 = sigma2;
    return res;
}

/// Rough plug-in estimate of the latent field, b . w(x).
inline double plug_in_field(const BasisCoefficients& coeffs, const AnchorLayout& layout, const SpaceTimePoint& x) {
    require(static_cast<std::size_t>(coeffs.b.size()) == layout.dimension(),
            "plug_in_field: coefficient length does not match the layout");
    return coeffs.b.dot(basis_vector(x, layout));
}

} // namespace stfuse
