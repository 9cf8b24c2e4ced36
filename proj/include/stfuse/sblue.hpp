#pragma once

#include "stfuse/core.hpp"
#include "stfuse/covariance.hpp"
#include "stfuse/normal.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace stfuse {

/// Binary exceedance reports: the latent value crossing threshold T is
/// reported with probability p_given_exceed, otherwise with p_given_not.
struct ExceedanceSensorModel {
    double threshold = 0.0;
    double p_given_exceed = 0.7;
    double p_given_not = 0.1;

    bool valid() const {
        return std::isfinite(threshold) && p_given_exceed >= 0 && p_given_exceed <= 1 && p_given_not >= 0 &&
               p_given_not <= 1;
    }
    bool informative() const { return p_given_exceed != p_given_not; }
};

/// Pr(y_ht = 1) when the thresholded latent value is N(mean, latent_var).
inline double exceedance_prob(double mean, double latent_var, const ExceedanceSensorModel& s) {
    require(latent_var > 0.0, "exceedance_prob: latent variance must be positive");
    const double below = normal::cdf(s.threshold, mean, latent_var);
    return s.p_given_exceed * (1.0 - below) + s.p_given_not * below;
}

// ---------------------------------------------------------------------------
// Cross-moments. The thresholded latent variable at a binary site I is the
// noisy value z_I = f_I + v_I with variance s_I^2 = sigma2 + c_II.

namespace moments {

/// E[f* y_I] = c(x*, x_I) (p1 - p0) phi(T; 0, sigma2 + c_II).
inline double process_obs(double c_star_I, double c_II, double sigma2, const ExceedanceSensorModel& s) {
    const double var = sigma2 + c_II;
    if (!(var > 0.0)) throw NumericalError("cross moment: sigma2 + c(x_I, x_I) must be positive");
    if (!s.informative() || c_star_I == 0.0) return 0.0;
    return c_star_I * (s.p_given_exceed - s.p_given_not) * normal::pdf(s.threshold, 0.0, var);
}

/// E[y_i y_I] for a continuous observation i and binary report I. The
/// continuous reading enters only through its covariance with f_I, so the
/// value has the same form as the process/observation moment.
inline double obs_obs(double c_iI, double c_II, double sigma2, const ExceedanceSensorModel& s) {
    return process_obs(c_iI, c_II, sigma2, s);
}

/// E[y_i y_I] with the latent value at I fixed to a plug-in estimate:
/// (c_iI / c_II) f_I Pr(y_I = 1 | f_I).
inline double obs_obs_plugin(double c_iI, double c_II, double sigma2, double f_I, const ExceedanceSensorModel& s) {
    if (!(sigma2 + c_II > 0.0)) throw NumericalError("cross moment: sigma2 + c(x_I, x_I) must be positive");
    if (c_iI == 0.0 || f_I == 0.0) return 0.0;
    if (!(c_II > 0.0)) throw NumericalError("cross moment: c(x_I, x_I) must be positive for the plug-in form");
    return c_iI / c_II * f_I * exceedance_prob(f_I, sigma2, s);
}

/// E[y_I] = E[y_I^2] for one binary report (unconditional).
inline double binary_self(double c_II, double sigma2, const ExceedanceSensorModel& s) {
    const double var = sigma2 + c_II;
    if (!(var > 0.0)) throw NumericalError("cross moment: sigma2 + c(x_I, x_I) must be positive");
    return exceedance_prob(0.0, var, s);
}

/// E[y_I y_J] for two distinct binary reports, exact under the joint
/// Gaussian of (z_I, z_J).
inline double binary_binary(double c_II, double c_JJ, double c_IJ, double sigma2, const ExceedanceSensorModel& s) {
    const double vi = sigma2 + c_II;
    const double vj = sigma2 + c_JJ;
    if (!(vi > 0.0) || !(vj > 0.0)) throw NumericalError("cross moment: sigma2 + c(x, x) must be positive");
    const double p1 = s.p_given_exceed;
    const double p0 = s.p_given_not;
    if (!s.informative()) return p1 * p0;
    const double si = std::sqrt(vi);
    const double sj = std::sqrt(vj);
    const double r = std::clamp(c_IJ / (si * sj), -1.0, 1.0);
    const double hi = s.threshold / si;
    const double hj = s.threshold / sj;
    const double up_i = 1.0 - normal::cdf(hi);
    const double up_j = 1.0 - normal::cdf(hj);
    const double p11 = normal::bivariate_upper(hi, hj, r);
    const double p10 = up_i - p11;
    const double p01 = up_j - p11;
    const double p00 = 1.0 - up_i - up_j + p11;
    return p1 * p1 * p11 + p1 * p0 * (p10 + p01) + p0 * p0 * p00;
}

/// Plug-in form: product of the conditional report probabilities.
inline double binary_binary_plugin(double f_I, double f_J, double sigma2, const ExceedanceSensorModel& s) {
    return exceedance_prob(f_I, sigma2, s) * exceedance_prob(f_J, sigma2, s);
}

} // namespace moments

// ---------------------------------------------------------------------------
// Monte Carlo oracle for the cross-moments

enum class MomentKind {
    process_binary, // E[f* y_I]
    cont_binary,    // E[y_i y_I]
    binary_binary,  // E[y_I y_J], I != J
    binary_self,    // E[y_I^2]
    process_square, // E[f*^2]
};

struct MomentGeometry {
    SpaceTimePoint x_star;
    SpaceTimePoint x_i; // continuous site
    SpaceTimePoint x_I; // binary site I
    SpaceTimePoint x_J; // binary site J
};

struct MonteCarloEstimate {
    double estimate = 0.0;
    double standard_error = 0.0;
};

struct MonteCarloMoments {
    MonteCarloEstimate process_binary, cont_binary, binary_binary, binary_self, process_square;

    const MonteCarloEstimate& get(MomentKind k) const {
        switch (k) {
        case MomentKind::process_binary: return process_binary;
        case MomentKind::cont_binary: return cont_binary;
        case MomentKind::binary_binary: return binary_binary;
        case MomentKind::binary_self: return binary_self;
        case MomentKind::process_square: return process_square;
        }
        return process_square;
    }
};

namespace detail {

// Symmetric square root of a PSD matrix; rejects materially negative spectra.
inline Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& c) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
    const double top = std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1e-300);
    if (es.eigenvalues().minCoeff() < -1e-10 * top)
        throw NumericalError("joint covariance is not positive semidefinite (min eigenvalue " +
                             std::to_string(es.eigenvalues().minCoeff()) + ")");
    const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal();
}

struct Accumulator {
    double sum = 0.0, sumsq = 0.0;
    void add(double v) {
        sum += v;
        sumsq += v * v;
    }
    MonteCarloEstimate finish(std::size_t n) const {
        const double nd = static_cast<double>(n);
        const double mean = sum / nd;
        const double var = std::max(sumsq / nd - mean * mean, 0.0) * nd / (nd - 1.0);
        return {mean, std::sqrt(var / nd)};
    }
};

} // namespace detail

/// Samples the exact joint Gaussian of (f*, f_i, f_I, f_J), adds independent
/// observation noise, thresholds the binary latents and applies report noise.
/// All five moment kinds are estimated from one stream of draws.
template <class Cov>
MonteCarloMoments mc_moments(const MomentGeometry& g, const Cov& cov, double sigma2, const ExceedanceSensorModel& sensor,
                             std::size_t n_samples, std::uint64_t seed) {
    require(n_samples >= 10000, "mc_moment_oracle: need at least 1e4 samples");
    require(sigma2 >= 0.0, "mc_moment_oracle: sigma2 must be non-negative");
    require(sensor.valid(), "mc_moment_oracle: invalid sensor model");
    const std::array<SpaceTimePoint, 4> pts{g.x_star, g.x_i, g.x_I, g.x_J};
    Eigen::Matrix4d c;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) c(a, b) = cov(pts[static_cast<std::size_t>(a)], pts[static_cast<std::size_t>(b)]);
    const Eigen::Matrix4d l = detail::psd_factor(c);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    const double noise_sd = std::sqrt(sigma2);
    detail::Accumulator a_pb, a_cb, a_bb, a_bs, a_ps;
    Eigen::Vector4d z;
    for (std::size_t s = 0; s < n_samples; ++s) {
        for (int k = 0; k < 4; ++k) z[k] = nd(rng);
        const Eigen::Vector4d f = l * z;
        const double yi = f[1] + noise_sd * nd(rng);
        const double zI = f[2] + noise_sd * nd(rng);
        const double zJ = f[3] + noise_sd * nd(rng);
        const double pI = zI >= sensor.threshold ? sensor.p_given_exceed : sensor.p_given_not;
        const double pJ = zJ >= sensor.threshold ? sensor.p_given_exceed : sensor.p_given_not;
        const double yI = ud(rng) < pI ? 1.0 : 0.0;
        const double yJ = ud(rng) < pJ ? 1.0 : 0.0;
        a_pb.add(f[0] * yI);
        a_cb.add(yi * yI);
        a_bb.add(yI * yJ);
        a_bs.add(yI * yI);
        a_ps.add(f[0] * f[0]);
    }
    return {a_pb.finish(n_samples), a_cb.finish(n_samples), a_bb.finish(n_samples), a_bs.finish(n_samples),
            a_ps.finish(n_samples)};
}

template <class Cov>
MonteCarloEstimate mc_moment_oracle(MomentKind kind, const MomentGeometry& g, const Cov& cov, double sigma2,
                                    const ExceedanceSensorModel& sensor, std::size_t n_samples, std::uint64_t seed) {
    return mc_moments(g, cov, sigma2, sensor, n_samples, seed).get(kind);
}

/// Conditional variant for the plug-in forms: the latent values at the
/// binary sites are fixed to (f_I, f_J) and the continuous reading is drawn
/// from its Gaussian conditional on them.
template <class Cov>
MonteCarloMoments mc_moments_given_latent(const MomentGeometry& g, const Cov& cov, double sigma2,
                                          const ExceedanceSensorModel& sensor, double f_I, double f_J,
                                          std::size_t n_samples, std::uint64_t seed) {
    require(n_samples >= 10000, "mc_moment_oracle: need at least 1e4 samples");
    const std::array<SpaceTimePoint, 3> pts{g.x_i, g.x_I, g.x_J};
    Eigen::Matrix3d c;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) c(a, b) = cov(pts[static_cast<std::size_t>(a)], pts[static_cast<std::size_t>(b)]);
    const Eigen::Matrix2d cbb = c.block<2, 2>(1, 1);
    const Eigen::RowVector2d cab = c.block<1, 2>(0, 1);
    const Eigen::RowVector2d gain = cab * cbb.completeOrthogonalDecomposition().pseudoInverse();
    const double cond_mean = gain.dot(Eigen::Vector2d(f_I, f_J));
    const double cond_var = std::max(c(0, 0) - gain.dot(cab), 0.0) + sigma2;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    const double noise_sd = std::sqrt(sigma2);
    const double cond_sd = std::sqrt(cond_var);
    detail::Accumulator a_cb, a_bb, a_bs;
    for (std::size_t s = 0; s < n_samples; ++s) {
        const double yi = cond_mean + cond_sd * nd(rng);
        const double zI = f_I + noise_sd * nd(rng);
        const double zJ = f_J + noise_sd * nd(rng);
        const double yI = ud(rng) < (zI >= sensor.threshold ? sensor.p_given_exceed : sensor.p_given_not) ? 1.0 : 0.0;
        const double yJ = ud(rng) < (zJ >= sensor.threshold ? sensor.p_given_exceed : sensor.p_given_not) ? 1.0 : 0.0;
        a_cb.add(yi * yI);
        a_bb.add(yI * yJ);
        a_bs.add(yI * yI);
    }
    MonteCarloMoments out;
    out.cont_binary = a_cb.finish(n_samples);
    out.binary_binary = a_bb.finish(n_samples);
    out.binary_self = a_bs.finish(n_samples);
    return out;
}

// ---------------------------------------------------------------------------
// Fusion problem, moment assembly and the S-BLUE

struct ContinuousObservation {
    SpaceTimePoint at;
    double y = 0.0;
};

struct BinaryObservation {
    SpaceTimePoint at;
    int y = 0; // 0 or 1
};

/// Stacked observation vector Y = [y', y_ht']', continuous block first.
struct ObservationSet {
    std::vector<ContinuousObservation> continuous;
    std::vector<BinaryObservation> binary;

    std::size_t size() const { return continuous.size() + binary.size(); }

    Eigen::VectorXd stacked() const {
        Eigen::VectorXd y(static_cast<Eigen::Index>(size()));
        Eigen::Index k = 0;
        for (const auto& o : continuous) y[k++] = o.y;
        for (const auto& o : binary) y[k++] = o.y;
        return y;
    }
};

enum class MomentMode {
    exact,  // unconditional closed forms (bivariate normal for binary pairs)
    plugin, // latent values at binary sites replaced by plug-in estimates
};

struct FusionProblem {
    ObservationSet observations;
    CovarianceModel cov;
    double sigma2 = 1.0;
    ExceedanceSensorModel sensor;
    std::vector<double> plugin_field; // one per binary observation; required in plug-in mode
    MomentMode mode = MomentMode::exact;

    void validate() const {
        require(sigma2 > 0.0, "fusion problem: sigma2 must be positive");
        require(sensor.valid(), "fusion problem: invalid sensor model");
        require(plugin_field.empty() || plugin_field.size() == observations.binary.size(),
                "fusion problem: plug-in field length must match the binary observation count");
        require(mode == MomentMode::exact || plugin_field.size() == observations.binary.size(),
                "fusion problem: plug-in mode needs one plug-in value per binary observation");
        for (const auto& b : observations.binary) require(b.y == 0 || b.y == 1, "fusion problem: binary report must be 0 or 1");
    }
};

struct FieldEstimate {
    SpaceTimePoint at;
    double f_hat = 0.0;
    double mse = 0.0;
};

/// rho = E[f* Y] for one prediction site.
inline Eigen::VectorXd assemble_rho(const FusionProblem& p, const SpaceTimePoint& x_star) {
    const auto& obs = p.observations;
    Eigen::VectorXd rho(static_cast<Eigen::Index>(obs.size()));
    Eigen::Index k = 0;
    for (const auto& o : obs.continuous) rho[k++] = p.cov(x_star, o.at);
    for (const auto& o : obs.binary) rho[k++] = moments::process_obs(p.cov(x_star, o.at), p.cov(o.at, o.at), p.sigma2, p.sensor);
    return rho;
}

/// Sigma = E[Y Y'].
inline Eigen::MatrixXd assemble_sigma(const FusionProblem& p) {
    p.validate();
    const auto& obs = p.observations;
    const auto n = static_cast<Eigen::Index>(obs.continuous.size());
    const auto m = static_cast<Eigen::Index>(obs.binary.size());
    Eigen::MatrixXd sigma(n + m, n + m);

    std::vector<SpaceTimePoint> cpts, bpts;
    for (const auto& o : obs.continuous) cpts.push_back(o.at);
    for (const auto& o : obs.binary) bpts.push_back(o.at);

    sigma.topLeftCorner(n, n) = p.cov.gram(cpts);
    sigma.topLeftCorner(n, n).diagonal().array() += p.sigma2;

    std::vector<double> cbb(static_cast<std::size_t>(m));
    for (Eigen::Index a = 0; a < m; ++a) cbb[static_cast<std::size_t>(a)] = p.cov(bpts[static_cast<std::size_t>(a)], bpts[static_cast<std::size_t>(a)]);
    const bool plugin = p.mode == MomentMode::plugin;

    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index a = 0; a < m; ++a) {
            const auto au = static_cast<std::size_t>(a);
            const double c_iI = p.cov(cpts[static_cast<std::size_t>(i)], bpts[au]);
            const double v = plugin ? moments::obs_obs_plugin(c_iI, cbb[au], p.sigma2, p.plugin_field[au], p.sensor)
                                    : moments::obs_obs(c_iI, cbb[au], p.sigma2, p.sensor);
            sigma(i, n + a) = v;
            sigma(n + a, i) = v;
        }
    }
    for (Eigen::Index a = 0; a < m; ++a) {
        const auto au = static_cast<std::size_t>(a);
        sigma(n + a, n + a) = plugin ? exceedance_prob(p.plugin_field[au], p.sigma2, p.sensor)
                                     : moments::binary_self(cbb[au], p.sigma2, p.sensor);
        for (Eigen::Index b = 0; b < a; ++b) {
            const auto bu = static_cast<std::size_t>(b);
            const double v = plugin ? moments::binary_binary_plugin(p.plugin_field[au], p.plugin_field[bu], p.sigma2, p.sensor)
                                    : moments::binary_binary(cbb[au], cbb[bu], p.cov(bpts[au], bpts[bu]), p.sigma2, p.sensor);
            sigma(n + a, n + b) = v;
            sigma(n + b, n + a) = v;
        }
    }
    return sigma;
}

struct FusionMoments {
    Eigen::VectorXd rho;
    Eigen::MatrixXd sigma;
};

/// Assembles rho and Sigma and checks that Sigma is positive semidefinite.
inline FusionMoments assemble_fusion(const FusionProblem& p, const SpaceTimePoint& x_star) {
    FusionMoments fm;
    fm.sigma = assemble_sigma(p);
    fm.rho = assemble_rho(p, x_star);
    if (fm.sigma.size() > 0) {
        const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(fm.sigma, Eigen::EigenvaluesOnly).eigenvalues();
        const double tol = 1e-10 * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
        if (ev.minCoeff() < -tol)
            throw NumericalError("assembled E[YY'] is not positive semidefinite: eigenvalue " + std::to_string(ev.minCoeff()) +
                                 " (inconsistent plug-in values?)");
    }
    return fm;
}

/// Factorizes Sigma once and serves S-BLUE predictions at many sites.
/// The factorization is read-only after construction.
class FusionSolver {
public:
    static constexpr double max_condition = 1e12;

    explicit FusionSolver(FusionProblem problem) : problem_(std::move(problem)) {
        const Eigen::MatrixXd sigma = assemble_sigma(problem_);
        y_ = problem_.observations.stacked();
        factorize(sigma);
        if (y_.size() > 0) weights_ = llt_.solve(y_);
    }

    const FusionProblem& problem() const { return problem_; }
    bool regularized() const { return regularized_; }

    FieldEstimate predict(const SpaceTimePoint& x_star) const {
        FieldEstimate est;
        est.at = x_star;
        const double prior = problem_.cov(x_star, x_star);
        if (y_.size() == 0) {
            est.f_hat = 0.0;
            est.mse = std::max(prior, 0.0);
            return est;
        }
        const Eigen::VectorXd rho = assemble_rho(problem_, x_star);
        est.f_hat = rho.dot(weights_);
        const double explained = rho.dot(llt_.solve(rho));
        est.mse = std::clamp(prior - explained, 0.0, std::max(prior, 0.0));
        return est;
    }

    /// Batched predictions through one blocked triangular solve.
    std::vector<FieldEstimate> predict_many(std::span<const SpaceTimePoint> sites) const {
        std::vector<FieldEstimate> out(sites.size());
        const auto g = static_cast<Eigen::Index>(sites.size());
        if (y_.size() == 0) {
            for (std::size_t k = 0; k < sites.size(); ++k) out[k] = predict(sites[k]);
            return out;
        }
        Eigen::MatrixXd rho(y_.size(), g);
        for (Eigen::Index k = 0; k < g; ++k) rho.col(k) = assemble_rho(problem_, sites[static_cast<std::size_t>(k)]);
        const Eigen::VectorXd mean = rho.transpose() * weights_;
        llt_.matrixL().solveInPlace(rho);
        for (Eigen::Index k = 0; k < g; ++k) {
            auto& est = out[static_cast<std::size_t>(k)];
            est.at = sites[static_cast<std::size_t>(k)];
            est.f_hat = mean[k];
            const double prior = problem_.cov(est.at, est.at);
            est.mse = std::clamp(prior - rho.col(k).squaredNorm(), 0.0, std::max(prior, 0.0));
        }
        return out;
    }

    /// Point estimate only (skips the O((n+M)^2) variance solve).
    double predict_mean(const SpaceTimePoint& x_star) const {
        if (y_.size() == 0) return 0.0;
        return assemble_rho(problem_, x_star).dot(weights_);
    }

private:
    // Factorizes as assembled; a diagonal jitter of 1e-10 * mean(diag) is
    // added only when the plain factorization fails or is too ill conditioned.
    void factorize(const Eigen::MatrixXd& sigma) {
        if (sigma.size() == 0) return;
        llt_.compute(sigma);
        if (llt_.info() == Eigen::Success && llt_.rcond() > 1.0 / max_condition) return;
        Eigen::MatrixXd reg = sigma;
        reg.diagonal().array() += 1e-10 * sigma.trace() / static_cast<double>(sigma.rows());
        regularized_ = true;
        llt_.compute(reg);
        if (llt_.info() != Eigen::Success) {
            const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sigma, Eigen::EigenvaluesOnly).eigenvalues();
            throw NumericalError("E[YY'] is not positive definite: min eigenvalue " + std::to_string(ev.minCoeff()));
        }
        if (llt_.rcond() <= 1.0 / max_condition)
            throw NumericalError("E[YY'] is singular after regularization (reciprocal condition " +
                                 std::to_string(llt_.rcond()) + ")");
    }

    FusionProblem problem_;
    Eigen::VectorXd y_;
    Eigen::VectorXd weights_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    bool regularized_ = false;
};

inline FieldEstimate sblue_estimate(const FusionProblem& p, const SpaceTimePoint& x_star) {
    return FusionSolver(p).predict(x_star);
}

/// Continuous-only S-BLUE under a low-rank covariance U U' + sigma2 I,
/// solved through the r x r Woodbury system. Costs O(n r^2) to build and
/// O(r^2) per prediction.
class LowRankKriging {
public:
    LowRankKriging(LowRankModel model, std::span<const ContinuousObservation> obs) : model_(std::move(model)) {
        require(model_.coeffs.sigma2 > 0.0, "low-rank kriging: sigma2 must be positive");
        std::vector<SpaceTimePoint> pts;
        Eigen::VectorXd y(static_cast<Eigen::Index>(obs.size()));
        for (std::size_t i = 0; i < obs.size(); ++i) {
            pts.push_back(obs[i].at);
            y[static_cast<Eigen::Index>(i)] = obs[i].y;
        }
        const Eigen::MatrixXd u = lowrank_factor(pts, model_.coeffs, model_.layout);
        const double s2 = model_.coeffs.sigma2;
        const Eigen::MatrixXd utu = u.transpose() * u;
        Eigen::MatrixXd a = utu;
        a.diagonal().array() += s2;
        const Eigen::LLT<Eigen::MatrixXd> fa(a);
        if (fa.info() != Eigen::Success) throw NumericalError("low-rank kriging: Woodbury system is not positive definite");
        const Eigen::VectorXd uty = u.transpose() * y;
        weights_ = (uty - utu * fa.solve(uty)) / s2;       // U' Sigma^-1 y
        explained_ = (utu - utu * fa.solve(utu)) / s2;     // U' Sigma^-1 U
    }

    FieldEstimate predict(const SpaceTimePoint& x_star) const {
        const SpaceTimePoint one[] = {x_star};
        const Eigen::VectorXd us = lowrank_factor(one, model_.coeffs, model_.layout).row(0).transpose();
        FieldEstimate est;
        est.at = x_star;
        est.f_hat = us.dot(weights_);
        const double prior = us.squaredNorm();
        est.mse = std::clamp(prior - us.dot(explained_ * us), 0.0, prior);
        return est;
    }

private:
    LowRankModel model_;
    Eigen::VectorXd weights_;
    Eigen::MatrixXd explained_;
};

} // namespace stfuse
