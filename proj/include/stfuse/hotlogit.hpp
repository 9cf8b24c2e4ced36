#pragma once

#include "stfuse/bspline.hpp"
#include "stfuse/core.hpp"
#include "stfuse/normal.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace stfuse {

// Additive logistic model
//   logit p = alpha + x' beta + s(day) + s(time of day) + s(lon, lat)
// with cubic B-spline smooths and difference penalties.

struct SmoothSpec {
    int size = 8;
    int penalty_order = 2;
    double weight = 1.0;
};

struct SpatialSmoothSpec {
    int size_x = 5;
    int size_y = 5;
    int penalty_order = 2;
    double weight = 1.0;
};

struct AdditiveLogisticSpec {
    std::vector<std::string> linear_covariates;
    std::optional<SmoothSpec> day_smooth;
    std::optional<SmoothSpec> time_smooth; // cyclic over one day
    std::optional<SpatialSmoothSpec> spatial_smooth;

    void validate() const {
        auto check = [](const SmoothSpec& s, const char* name) {
            require(s.size >= 4, std::string(name) + ": basis size must be >= 4");
            require(s.penalty_order >= 1 && s.penalty_order < s.size, std::string(name) + ": bad penalty order");
            require(std::isfinite(s.weight) && s.weight >= 0.0, std::string(name) + ": penalty weight must be finite and >= 0");
        };
        if (day_smooth) check(*day_smooth, "day smooth");
        if (time_smooth) check(*time_smooth, "time smooth");
        if (spatial_smooth) {
            const auto& s = *spatial_smooth;
            require(s.size_x >= 4 && s.size_y >= 4, "spatial smooth: basis sizes must be >= 4");
            require(s.penalty_order >= 1 && s.penalty_order < std::min(s.size_x, s.size_y), "spatial smooth: bad penalty order");
            require(std::isfinite(s.weight) && s.weight >= 0.0, "spatial smooth: penalty weight must be finite and >= 0");
        }
    }
};

struct HotObservation {
    SpaceTimePoint at;
    std::vector<double> covariates;
    int hot = 0;
};

enum class SmoothTerm { day, time, spatial };

inline const char* term_name(SmoothTerm t) {
    switch (t) {
    case SmoothTerm::day: return "s(day)";
    case SmoothTerm::time: return "s(time)";
    case SmoothTerm::spatial: return "s(lon,lat)";
    }
    return "?";
}

struct PenaltyBlock {
    SmoothTerm term;
    Eigen::Index offset = 0;
    Eigen::MatrixXd matrix;
    double weight = 0.0;
};

/// Column layout plus the basis supports fixed at design time; prediction
/// reuses it so new points see the same bases.
struct DesignLayout {
    AdditiveLogisticSpec spec;
    std::optional<bspline::Basis> day_basis, time_basis, lon_basis, lat_basis;
    Eigen::Index n_linear = 0;
    std::map<SmoothTerm, std::pair<Eigen::Index, Eigen::Index>> blocks; // offset, width

    Eigen::Index columns() const {
        Eigen::Index c = 1 + n_linear;
        for (const auto& [t, b] : blocks) c += b.second;
        return c;
    }

    Eigen::VectorXd row(const SpaceTimePoint& at, std::span<const double> x) const {
        require(at.valid(), "design row: invalid space-time point");
        require(static_cast<Eigen::Index>(x.size()) == n_linear, "design row: covariate count does not match the spec");
        Eigen::VectorXd r = Eigen::VectorXd::Zero(columns());
        r[0] = 1.0;
        for (Eigen::Index j = 0; j < n_linear; ++j) {
            require(std::isfinite(x[static_cast<std::size_t>(j)]), "design row: non-finite covariate");
            r[1 + j] = x[static_cast<std::size_t>(j)];
        }
        if (day_basis) r.segment(blocks.at(SmoothTerm::day).first, day_basis->size()) = day_basis->eval(at.day());
        if (time_basis) r.segment(blocks.at(SmoothTerm::time).first, time_basis->size()) = time_basis->eval(at.time_of_day());
        if (lon_basis) {
            const auto& [off, width] = blocks.at(SmoothTerm::spatial);
            r.segment(off, width) = bspline::tensor(lon_basis->eval(at.lon), lat_basis->eval(at.lat));
        }
        return r;
    }
};

struct Design {
    Eigen::MatrixXd x;
    std::vector<PenaltyBlock> penalties;
    Eigen::VectorXd y;
    DesignLayout layout;

    Design subset(std::span<const Eigen::Index> rows) const {
        Design d;
        d.penalties = penalties;
        d.layout = layout;
        d.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
        d.y.resize(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            d.x.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
            d.y[static_cast<Eigen::Index>(i)] = y[rows[i]];
        }
        return d;
    }
};

class SeparationError : public ConvergenceError {
public:
    using ConvergenceError::ConvergenceError;
};

inline Design build_design(std::span<const HotObservation> data, const AdditiveLogisticSpec& spec) {
    spec.validate();
    require(!data.empty(), "build_design: no observations");
    const auto n = static_cast<Eigen::Index>(data.size());
    std::size_t hot = 0;
    for (const auto& o : data) {
        require(o.hot == 0 || o.hot == 1, "build_design: response must be 0 or 1");
        hot += static_cast<std::size_t>(o.hot);
    }
    if (hot == 0 || hot == data.size())
        throw SeparationError("build_design: response is all " + std::to_string(hot == 0 ? 0 : 1) + "; the model is separated");

    Design d;
    DesignLayout& lay = d.layout;
    lay.spec = spec;
    lay.n_linear = static_cast<Eigen::Index>(spec.linear_covariates.size());
    Eigen::Index col = 1 + lay.n_linear;

    auto range = [&](auto get) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto& o : data) {
            lo = std::min(lo, get(o));
            hi = std::max(hi, get(o));
        }
        return std::pair{lo, hi};
    };
    if (spec.day_smooth) {
        auto [lo, hi] = range([](const HotObservation& o) { return o.at.day(); });
        require(hi > lo, "build_design: day smooth needs observations on at least two days");
        lay.day_basis = bspline::Basis::open(lo, hi, spec.day_smooth->size);
        lay.blocks[SmoothTerm::day] = {col, spec.day_smooth->size};
        d.penalties.push_back({SmoothTerm::day, col, bspline::difference_penalty(spec.day_smooth->size, spec.day_smooth->penalty_order),
                               spec.day_smooth->weight});
        col += spec.day_smooth->size;
    }
    if (spec.time_smooth) {
        lay.time_basis = bspline::Basis::cyclic(0.0, minutes_per_day, spec.time_smooth->size);
        lay.blocks[SmoothTerm::time] = {col, spec.time_smooth->size};
        d.penalties.push_back({SmoothTerm::time, col,
                               bspline::difference_penalty(spec.time_smooth->size, spec.time_smooth->penalty_order, true),
                               spec.time_smooth->weight});
        col += spec.time_smooth->size;
    }
    if (spec.spatial_smooth) {
        const auto& s = *spec.spatial_smooth;
        auto [x0, x1] = range([](const HotObservation& o) { return o.at.lon; });
        auto [y0, y1] = range([](const HotObservation& o) { return o.at.lat; });
        require(x1 > x0 && y1 > y0, "build_design: spatial smooth needs spread in both coordinates");
        lay.lon_basis = bspline::Basis::open(x0, x1, s.size_x);
        lay.lat_basis = bspline::Basis::open(y0, y1, s.size_y);
        const Eigen::Index width = static_cast<Eigen::Index>(s.size_x) * s.size_y;
        lay.blocks[SmoothTerm::spatial] = {col, width};
        const Eigen::MatrixXd px = bspline::difference_penalty(s.size_x, s.penalty_order);
        const Eigen::MatrixXd py = bspline::difference_penalty(s.size_y, s.penalty_order);
        const Eigen::MatrixXd penalty = bspline::kron(px, Eigen::MatrixXd::Identity(s.size_y, s.size_y)) +
                                        bspline::kron(Eigen::MatrixXd::Identity(s.size_x, s.size_x), py);
        d.penalties.push_back({SmoothTerm::spatial, col, penalty, s.weight});
        col += width;
    }

    d.x.resize(n, col);
    d.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& o = data[static_cast<std::size_t>(i)];
        d.x.row(i) = lay.row(o.at, o.covariates);
        d.y[i] = o.hot;
    }
    return d;
}

// ---------------------------------------------------------------------------

struct CoefficientRow {
    std::string name;
    double estimate = 0.0, se = 0.0, z = 0.0, p_value = 1.0;
    std::string stars;
};

struct LogisticFit {
    double alpha = 0.0;
    Eigen::VectorXd beta;
    std::map<SmoothTerm, Eigen::VectorXd> smooth_coefficients;
    Eigen::VectorXd se; // alpha then beta
    Eigen::VectorXd z;
    double deviance = 0.0;
    bool converged = false;
    int iterations = 0;
    std::vector<double> deviance_trace; // penalized deviance per accepted step
    double score_max_norm = 0.0;
    Eigen::VectorXd coefficients; // full raw-basis vector
    DesignLayout layout;

    std::vector<CoefficientRow> table() const {
        std::vector<CoefficientRow> rows;
        for (Eigen::Index j = 0; j < se.size(); ++j) {
            CoefficientRow r;
            r.name = j == 0 ? "(Intercept)" : layout.spec.linear_covariates[static_cast<std::size_t>(j - 1)];
            r.estimate = j == 0 ? alpha : beta[j - 1];
            r.se = se[j];
            r.z = z[j];
            r.p_value = std::isfinite(r.z) ? 2.0 * normal::cdf(-std::abs(r.z)) : 1.0;
            r.stars = r.p_value < 0.01 ? "**" : r.p_value < 0.05 ? "*" : "";
            rows.push_back(r);
        }
        return rows;
    }
};

class IrlsDivergence : public ConvergenceError {
public:
    IrlsDivergence(const std::string& what, std::vector<double> trace) : ConvergenceError(what), deviance_trace(std::move(trace)) {}
    std::vector<double> deviance_trace;
};

struct IrlsOptions {
    int max_iterations = 200;
    double tolerance = 1e-8; // max |coefficient change|
    int divergence_limit = 5;
};

namespace detail {

inline double softplus(double e) { return e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e)); }
inline double expit(double e) { return e >= 0 ? 1.0 / (1.0 + std::exp(-e)) : std::exp(e) / (1.0 + std::exp(e)); }

inline double bernoulli_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& eta) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) ll += y[i] * eta[i] - softplus(eta[i]);
    return -2.0 * ll;
}

} // namespace detail

/// Penalized IRLS. Each smooth block is reparameterized onto the null space
/// of its column sums so the smooths are centred and identifiable alongside
/// the intercept.
inline LogisticFit fit_penalized_logistic(const Design& d, const IrlsOptions& opt = {}) {
    const Eigen::Index n = d.x.rows(), p = d.x.cols();
    require(n == d.y.size() && n > 0, "fit_penalized_logistic: design and response sizes differ");
    const double ybar = d.y.mean();
    if (ybar <= 0.0 || ybar >= 1.0) throw SeparationError("fit_penalized_logistic: response is constant; the model is separated");

    // constraint null-space map z: reduced (q) -> raw (p)
    Eigen::Index q = p - static_cast<Eigen::Index>(d.penalties.size());
    Eigen::MatrixXd zmap = Eigen::MatrixXd::Zero(p, q);
    const Eigen::Index lead = 1 + d.layout.n_linear;
    zmap.topLeftCorner(lead, lead).setIdentity();
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(q, q);
    Eigen::Index rc = lead;
    for (const auto& pb : d.penalties) {
        const Eigen::Index k = pb.matrix.rows();
        const Eigen::VectorXd c = d.x.middleCols(pb.offset, k).colwise().sum().transpose();
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(c);
        const Eigen::MatrixXd full = qr.householderQ() * Eigen::MatrixXd::Identity(k, k);
        const Eigen::MatrixXd zk = full.rightCols(k - 1);
        zmap.block(pb.offset, rc, k, k - 1) = zk;
        s.block(rc, rc, k - 1, k - 1) = pb.weight * zk.transpose() * pb.matrix * zk;
        rc += k - 1;
    }
    const Eigen::MatrixXd xr = d.x * zmap;

    Eigen::VectorXd theta = Eigen::VectorXd::Zero(q);
    theta[0] = std::log(ybar / (1.0 - ybar));
    Eigen::VectorXd eta = xr * theta;
    auto pen_dev = [&](const Eigen::VectorXd& th, const Eigen::VectorXd& et) {
        return detail::bernoulli_deviance(d.y, et) + th.dot(s * th);
    };
    double current = pen_dev(theta, eta);

    LogisticFit fit;
    fit.layout = d.layout;
    fit.deviance_trace.push_back(current);
    int increases = 0;
    Eigen::LDLT<Eigen::MatrixXd> hfac;
    auto score_and_hessian = [&](const Eigen::VectorXd& et, Eigen::VectorXd& g, Eigen::MatrixXd& h) {
        Eigen::VectorXd mu(n), w(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            mu[i] = detail::expit(et[i]);
            w[i] = std::max(mu[i] * (1.0 - mu[i]), 1e-300);
        }
        g = xr.transpose() * (d.y - mu) - s * theta;
        h = xr.transpose() * w.asDiagonal() * xr + s;
    };

    Eigen::VectorXd g;
    Eigen::MatrixXd h;
    int it = 0;
    for (; it < opt.max_iterations; ++it) {
        score_and_hessian(eta, g, h);
        hfac.compute(h);
        if (hfac.info() != Eigen::Success || (hfac.vectorD().array() <= 0.0).any())
            throw NumericalError("fit_penalized_logistic: penalized information matrix is singular (collinear design columns?)");
        Eigen::VectorXd step = hfac.solve(g);
        if (!step.allFinite()) throw NumericalError("fit_penalized_logistic: non-finite Newton step");
        if (step.cwiseAbs().maxCoeff() < opt.tolerance) {
            // deviance differences are below rounding here; skip the line search
            theta += step;
            eta = xr * theta;
            current = pen_dev(theta, eta);
            fit.converged = true;
            break;
        }

        double scale = 1.0;
        Eigen::VectorXd trial = theta + step, trial_eta = xr * trial;
        double trial_val = pen_dev(trial, trial_eta);
        for (int half = 0; half < 30 && !(trial_val <= current); ++half) {
            scale *= 0.5;
            trial = theta + scale * step;
            trial_eta = xr * trial;
            trial_val = pen_dev(trial, trial_eta);
        }
        const double change = (scale * step).cwiseAbs().maxCoeff();
        if (change < opt.tolerance) {
            fit.converged = true;
            if (trial_val <= current) {
                theta = trial;
                eta = trial_eta;
                current = trial_val;
            }
            break;
        }
        if (!(trial_val <= current)) {
            // halving failed; take the full step and count it
            trial = theta + step;
            trial_eta = xr * trial;
            trial_val = pen_dev(trial, trial_eta);
            if (++increases >= opt.divergence_limit || !std::isfinite(trial_val)) {
                fit.deviance_trace.push_back(trial_val);
                throw IrlsDivergence("fit_penalized_logistic: deviance increased on " + std::to_string(increases) +
                                         " consecutive steps",
                                     fit.deviance_trace);
            }
        } else {
            increases = 0;
        }
        theta = trial;
        eta = trial_eta;
        current = trial_val;
        fit.deviance_trace.push_back(current);

        if (eta.cwiseAbs().maxCoeff() > 35.0 && detail::bernoulli_deviance(d.y, eta) < 1e-6 * static_cast<double>(n))
            throw SeparationError("fit_penalized_logistic: perfect separation (fitted probabilities reached 0/1)");
    }
    fit.iterations = it;
    if (!fit.converged)
        throw IrlsDivergence("fit_penalized_logistic: no convergence after " + std::to_string(opt.max_iterations) + " iterations",
                             fit.deviance_trace);

    score_and_hessian(eta, g, h);
    hfac.compute(h);
    fit.score_max_norm = g.cwiseAbs().maxCoeff();
    fit.deviance = detail::bernoulli_deviance(d.y, eta);
    const Eigen::MatrixXd cov = hfac.solve(Eigen::MatrixXd::Identity(q, q));

    fit.coefficients = zmap * theta;
    fit.alpha = theta[0];
    fit.beta = theta.segment(1, d.layout.n_linear);
    fit.se.resize(lead);
    fit.z.resize(lead);
    for (Eigen::Index j = 0; j < lead; ++j) {
        fit.se[j] = std::sqrt(std::max(cov(j, j), 0.0));
        fit.z[j] = fit.se[j] > 0.0 ? theta[j] / fit.se[j] : std::numeric_limits<double>::quiet_NaN();
    }
    for (const auto& [term, blk] : d.layout.blocks) fit.smooth_coefficients[term] = fit.coefficients.segment(blk.first, blk.second);
    return fit;
}

inline double linear_predictor(const LogisticFit& fit, const SpaceTimePoint& at, std::span<const double> covariates) {
    return fit.layout.row(at, covariates).dot(fit.coefficients);
}

inline double predict_hot_probability(const LogisticFit& fit, const SpaceTimePoint& at, std::span<const double> covariates) {
    // keep strictly inside (0, 1)
    return std::clamp(detail::expit(linear_predictor(fit, at, covariates)), std::numeric_limits<double>::min(),
                      1.0 - std::numeric_limits<double>::epsilon() / 2);
}

/// Effect curve of a one-dimensional smooth on `points` evenly spaced values.
inline std::vector<std::pair<double, double>> smooth_curve(const LogisticFit& fit, SmoothTerm term, int points = 101) {
    require(term != SmoothTerm::spatial, "smooth_curve: use spatial_surface for the spatial term");
    require(points >= 2, "smooth_curve: need at least two points");
    const auto& basis = term == SmoothTerm::day ? fit.layout.day_basis : fit.layout.time_basis;
    require(basis.has_value(), std::string("smooth_curve: model has no ") + term_name(term));
    const Eigen::VectorXd& c = fit.smooth_coefficients.at(term);
    const double hi = basis->is_cyclic() ? basis->hi() - basis->spacing() * 1e-9 : basis->hi();
    std::vector<std::pair<double, double>> out;
    for (int i = 0; i < points; ++i) {
        const double v = basis->lo() + (hi - basis->lo()) * i / (points - 1);
        out.emplace_back(v, basis->eval(v).dot(c));
    }
    return out;
}

struct SurfacePoint {
    double lon, lat, effect;
};

inline std::vector<SurfacePoint> spatial_surface(const LogisticFit& fit, int grid = 25) {
    require(fit.layout.lon_basis.has_value(), "spatial_surface: model has no spatial smooth");
    require(grid >= 2, "spatial_surface: grid must be >= 2");
    const auto& bx = *fit.layout.lon_basis;
    const auto& by = *fit.layout.lat_basis;
    const Eigen::VectorXd& c = fit.smooth_coefficients.at(SmoothTerm::spatial);
    std::vector<SurfacePoint> out;
    for (int i = 0; i < grid; ++i)
        for (int j = 0; j < grid; ++j) {
            const double x = bx.lo() + (bx.hi() - bx.lo()) * i / (grid - 1);
            const double y = by.lo() + (by.hi() - by.lo()) * j / (grid - 1);
            out.push_back({x, y, bspline::tensor(bx.eval(x), by.eval(y)).dot(c)});
        }
    return out;
}

inline void write_coefficient_table(std::ostream& os, const LogisticFit& fit) {
    os << "name,estimate,se,z,p_value,significance\n";
    os.precision(10);
    for (const auto& r : fit.table())
        os << r.name << ',' << r.estimate << ',' << r.se << ',' << r.z << ',' << r.p_value << ',' << r.stars << '\n';
}

// ---------------------------------------------------------------------------
// Penalty selection

struct PenaltySearch {
    std::vector<double> grid = {1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1e3, 1e4};
    int folds = 5;
    int sweeps = 2;
    std::uint64_t seed = 1;
};

struct PenaltySelection {
    std::map<SmoothTerm, double> weights;
    double cv_deviance = 0.0;
};

inline double cv_deviance(const Design& d, int folds, std::uint64_t seed, const IrlsOptions& opt = {}) {
    const Eigen::Index n = d.x.rows();
    require(folds >= 2 && n >= folds, "cv_deviance: need at least `folds` observations");
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (int f = 0; f < folds; ++f) {
        std::vector<Eigen::Index> train, test;
        for (std::size_t i = 0; i < order.size(); ++i) (static_cast<int>(i % static_cast<std::size_t>(folds)) == f ? test : train).push_back(order[i]);
        const Design tr = d.subset(train);
        const LogisticFit fit = fit_penalized_logistic(tr, opt);
        const Design te = d.subset(test);
        total += detail::bernoulli_deviance(te.y, te.x * fit.coefficients);
    }
    return total;
}

/// Coordinate-wise search over a log-spaced grid, one smooth at a time.
inline PenaltySelection select_penalties(Design d, const PenaltySearch& search = {}, const IrlsOptions& opt = {}) {
    require(!search.grid.empty(), "select_penalties: empty grid");
    PenaltySelection sel;
    double best = cv_deviance(d, search.folds, search.seed, opt);
    for (int sweep = 0; sweep < search.sweeps; ++sweep) {
        bool moved = false;
        for (auto& pb : d.penalties) {
            double best_w = pb.weight;
            for (double w : search.grid) {
                if (w == best_w) continue;
                pb.weight = w;
                double dev = std::numeric_limits<double>::infinity();
                try {
                    dev = cv_deviance(d, search.folds, search.seed, opt);
                } catch (const ConvergenceError&) {
                } catch (const NumericalError&) {
                }
                if (dev < best) best = dev, best_w = w, moved = true;
            }
            pb.weight = best_w;
        }
        if (!moved) break;
    }
    for (const auto& pb : d.penalties) sel.weights[pb.term] = pb.weight;
    sel.cv_deviance = best;
    return sel;
}

inline void apply_penalties(Design& d, const PenaltySelection& sel) {
    for (auto& pb : d.penalties)
        if (auto it = sel.weights.find(pb.term); it != sel.weights.end()) pb.weight = it->second;
}

} // namespace stfuse
