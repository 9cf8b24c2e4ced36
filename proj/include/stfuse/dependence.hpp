#pragma once

#include "stfuse/bspline.hpp"
#include "stfuse/core.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace stfuse {

//! Rank-transformed sample on the unit square; u(i, j) = rank / n.
struct PseudoSample {
    Eigen::MatrixX2d u;
    std::size_t n() const { return static_cast<std::size_t>(u.rows()); }
};

namespace detail {

// Average ranks (1-based) with ties sharing the mean of their positions.
inline std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

} // namespace detail

inline PseudoSample pseudo_observations(const Eigen::MatrixX2d& samples) {
    const auto n = samples.rows();
    require(n >= 2, "pseudo_observations: need at least two samples");
    require(samples.allFinite(), "pseudo_observations: non-finite sample");
    PseudoSample ps;
    ps.u.resize(n, 2);
    for (int c = 0; c < 2; ++c) {
        std::vector<double> col(samples.col(c).data(), samples.col(c).data() + n);
        const auto r = detail::average_ranks(col);
        for (Eigen::Index i = 0; i < n; ++i) ps.u(i, c) = r[static_cast<std::size_t>(i)] / static_cast<double>(n);
    }
    return ps;
}

inline double empirical_copula(const PseudoSample& ps, double u1, double u2) {
    std::size_t count = 0;
    for (Eigen::Index i = 0; i < ps.u.rows(); ++i)
        if (ps.u(i, 0) <= u1 && ps.u(i, 1) <= u2) ++count;
    return static_cast<double>(count) / static_cast<double>(ps.n());
}

/// Survival reflection on ranks: R -> n + 1 - R.
inline PseudoSample reflect(const PseudoSample& ps) {
    PseudoSample out;
    const double n = static_cast<double>(ps.n());
    out.u = ((n + 1.0) / n) - ps.u.array();
    return out;
}

enum class Tail { upper, lower };

struct TailDependenceEstimate {
    Tail side = Tail::upper;
    std::map<int, double> per_percentile; // percentile -> lambda
    std::vector<int> zero_copula_percentiles;
    double mean_lambda = 0.0;
};

/// Percentile-averaged tail dependence. The upper tail evaluates
///   lambda(u) = 2 - min(2, log C(u, u) / log u)
/// at u = 0.80, ..., 0.99; the lower tail applies the same estimator to the
/// survival-reflected sample, i.e. original percentiles 1..20.
inline TailDependenceEstimate tail_dependence(const PseudoSample& ps, Tail side) {
    require(ps.n() >= 100, "tail_dependence: need at least 100 samples for the percentile sweep");
    const PseudoSample work = side == Tail::upper ? ps : reflect(ps);
    // sort once by the first coordinate so each evaluation is a prefix scan
    std::vector<std::pair<double, double>> pts(ps.n());
    for (std::size_t i = 0; i < ps.n(); ++i) pts[i] = {work.u(static_cast<Eigen::Index>(i), 0), work.u(static_cast<Eigen::Index>(i), 1)};
    std::sort(pts.begin(), pts.end());

    TailDependenceEstimate est;
    est.side = side;
    double sum = 0.0;
    for (int pct = 80; pct <= 99; ++pct) {
        const double u = pct / 100.0;
        std::size_t count = 0;
        for (const auto& [a, b] : pts) {
            if (a > u) break;
            if (b <= u) ++count;
        }
        const double chat = static_cast<double>(count) / static_cast<double>(ps.n());
        double lambda = 0.0;
        if (chat <= 0.0) {
            est.zero_copula_percentiles.push_back(side == Tail::upper ? pct : 100 - pct);
        } else {
            lambda = std::clamp(2.0 - std::min(2.0, std::log(chat) / std::log(u)), 0.0, 1.0);
        }
        est.per_percentile[side == Tail::upper ? pct : 100 - pct] = lambda;
        sum += lambda;
    }
    est.mean_lambda = sum / 20.0;
    return est;
}

inline double pearson_correlation(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size(), "pearson_correlation: length mismatch");
    require(x.size() >= 2, "pearson_correlation: need at least two pairs");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) throw InputError("pearson_correlation: zero variance");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// Penalized B-spline copula density

struct CopulaBasisSpec {
    int size = 10; // cubic B-splines per axis
};

/// c(u) = sum_k b_k phi_k(u) with tensor-product cubic B-splines phi_k.
/// b >= 0 and sum_k b_k * integral(phi_k) = 1.
struct CopulaDensityEstimate {
    Eigen::VectorXd coefficients;
    CopulaBasisSpec basis_spec;
    double penalty = 0.0;
    std::vector<double> objective_trace;
    int iterations = 0;

    void validate() const {
        const auto k = static_cast<Eigen::Index>(basis_spec.size) * basis_spec.size;
        require(coefficients.size() == k, "copula density: coefficient count does not match the basis");
        require((coefficients.array() >= 0.0).all(), "copula density: negative coefficient");
        const auto axis = bspline::Basis::open(0.0, 1.0, basis_spec.size);
        const Eigen::VectorXd m = bspline::tensor(axis.integrals(), axis.integrals());
        const double integral = coefficients.dot(m);
        if (std::abs(integral - 1.0) > 1e-6)
            throw InputError("copula density: coefficients do not integrate to one (" + std::to_string(integral) + ")");
    }
};

class CopulaFitError : public ConvergenceError {
public:
    CopulaFitError(const std::string& what, Eigen::VectorXd last, std::vector<double> trace)
        : ConvergenceError(what), last_iterate(std::move(last)), objective_trace(std::move(trace)) {}
    Eigen::VectorXd last_iterate;
    std::vector<double> objective_trace;
};

inline double copula_density_eval(const CopulaDensityEstimate& est, double u1, double u2) {
    if (!(u1 >= 0.0 && u1 <= 1.0 && u2 >= 0.0 && u2 <= 1.0))
        throw InputError("copula_density_eval: point outside the unit square");
    est.validate();
    const auto axis = bspline::Basis::open(0.0, 1.0, est.basis_spec.size);
    return std::max(0.0, est.coefficients.dot(bspline::tensor(axis.eval(u1), axis.eval(u2))));
}

inline Eigen::MatrixXd copula_roughness(int size) {
    const Eigen::MatrixXd p1 = bspline::difference_penalty(size, 2);
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(size, size);
    return bspline::kron(p1, id) + bspline::kron(id, p1);
}

struct CopulaFitOptions {
    int max_iterations = 2000;
    double tolerance = 1e-8; // objective improvement per iteration
};

/// Maximizes sum_i log c(u_i) - penalty * b' R b subject to b >= 0 and
/// m' b = 1 (m = basis integrals). Feasible active-set Newton ascent: each
/// step solves the equality-constrained Newton system on the free
/// coefficients and backtracks until the objective increases.
inline CopulaDensityEstimate fit_spline_copula(const PseudoSample& ps, const CopulaBasisSpec& spec, double penalty,
                                               const CopulaFitOptions& opt = {}) {
    require(spec.size >= 4, "fit_spline_copula: basis size must be >= 4");
    require(penalty >= 0.0 && std::isfinite(penalty), "fit_spline_copula: penalty must be finite and >= 0");
    const auto kk = static_cast<Eigen::Index>(spec.size) * spec.size;
    require(static_cast<Eigen::Index>(ps.n()) >= 10 * kk, "fit_spline_copula: need n >= 10 * number of basis functions");

    const auto axis = bspline::Basis::open(0.0, 1.0, spec.size);
    const Eigen::VectorXd m = bspline::tensor(axis.integrals(), axis.integrals());
    const Eigen::MatrixXd rough = copula_roughness(spec.size);
    const auto n = static_cast<Eigen::Index>(ps.n());
    // at most 16 non-zero tensor basis values per row
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(n) * 16);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd row =
            bspline::tensor(axis.eval(std::clamp(ps.u(i, 0), 0.0, 1.0)), axis.eval(std::clamp(ps.u(i, 1), 0.0, 1.0)));
        for (Eigen::Index k = 0; k < kk; ++k)
            if (row[k] != 0.0) trips.emplace_back(i, k, row[k]);
    }
    Eigen::SparseMatrix<double> phi(n, kk);
    phi.setFromTriplets(trips.begin(), trips.end());

    auto objective = [&](const Eigen::VectorXd& b) {
        const Eigen::VectorXd dens = phi * b;
        if ((dens.array() <= 0.0).any()) return -std::numeric_limits<double>::infinity();
        return dens.array().log().sum() - penalty * b.dot(rough * b);
    };

    Eigen::VectorXd b = Eigen::VectorXd::Ones(kk); // uniform density
    double value = objective(b);
    CopulaDensityEstimate est;
    est.basis_spec = spec;
    est.penalty = penalty;
    est.objective_trace.push_back(value);

    bool converged = false;
    int it = 0;
    for (; it < opt.max_iterations && !converged; ++it) {
        const Eigen::VectorXd inv = (phi * b).cwiseInverse();
        const Eigen::VectorXd g = phi.transpose() * inv - 2.0 * penalty * (rough * b);
        const Eigen::SparseMatrix<double> wphi = inv.asDiagonal() * phi;
        const Eigen::MatrixXd h = -Eigen::MatrixXd(wphi.transpose() * wphi) - 2.0 * penalty * rough;

        std::vector<bool> free(static_cast<std::size_t>(kk));
        for (Eigen::Index k = 0; k < kk; ++k) free[static_cast<std::size_t>(k)] = b[k] > 0.0;
        Eigen::VectorXd d = Eigen::VectorXd::Zero(kk);
        // first pass may release bound coefficients whose reduced gradient
        // points inward; later passes only pin free coefficients sitting at
        // zero that the step would push negative, so the loop terminates
        for (Eigen::Index pass = 0; pass <= kk; ++pass) {
            std::vector<Eigen::Index> idx;
            for (Eigen::Index k = 0; k < kk; ++k)
                if (free[static_cast<std::size_t>(k)]) idx.push_back(k);
            const auto f = static_cast<Eigen::Index>(idx.size());
            Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(f + 1, f + 1);
            Eigen::VectorXd rhs = Eigen::VectorXd::Zero(f + 1);
            for (Eigen::Index a = 0; a < f; ++a) {
                for (Eigen::Index c = 0; c < f; ++c) kkt(a, c) = h(idx[a], idx[c]);
                kkt(a, f) = kkt(f, a) = m[idx[a]];
                rhs[a] = -g[idx[a]];
            }
            const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
            const double nu = -sol[f]; // multiplier of m'b = 1
            d.setZero();
            for (Eigen::Index a = 0; a < f; ++a) d[idx[a]] = sol[a];
            bool changed = false;
            for (Eigen::Index k = 0; k < kk; ++k) {
                const auto ku = static_cast<std::size_t>(k);
                if (pass == 0 && !free[ku] && g[k] - nu * m[k] > 0.0) free[ku] = true, changed = true;
                else if (pass > 0 && free[ku] && b[k] == 0.0 && d[k] < 0.0) free[ku] = false, changed = true;
            }
            if (!changed && pass > 0) break;
        }

        const double slope = g.dot(d);
        if (!(slope > 0.0) || !d.allFinite()) {
            converged = true; // no ascent direction left
            break;
        }
        // projected arc search first (coefficients driven below zero are
        // clipped), then a step that stays inside the feasible set
        Eigen::VectorXd trial;
        double trial_value = -std::numeric_limits<double>::infinity();
        for (double t = 1.0; t > 1e-12; t *= 0.5) {
            trial = (b + t * d).cwiseMax(0.0);
            trial /= trial.dot(m);
            trial_value = objective(trial);
            if (trial_value >= value + 1e-4 * g.dot(trial - b)) break;
        }
        if (!(trial_value > value)) {
            double t_max = 1.0;
            for (Eigen::Index k = 0; k < kk; ++k)
                if (d[k] < 0.0) t_max = std::min(t_max, b[k] / -d[k]);
            for (double t = t_max; t > 1e-16 * t_max; t *= 0.5) {
                trial = (b + t * d).cwiseMax(0.0);
                trial_value = objective(trial);
                if (trial_value >= value + 1e-4 * t * slope) break;
            }
        }
        if (!(trial_value >= value)) {
            converged = true; // stationary to working precision
            break;
        }
        const double improvement = trial_value - value;
        b = trial;
        value = trial_value;
        est.objective_trace.push_back(value);
        if (improvement < opt.tolerance) converged = true;
    }
    est.iterations = it;
    if (!converged)
        throw CopulaFitError("fit_spline_copula: no convergence after " + std::to_string(opt.max_iterations) + " iterations",
                             b, est.objective_trace);
    est.coefficients = b;
    return est;
}

/// Density on a regular (grid x grid) mesh of cell centres, for export.
struct DensitySample {
    double u1, u2, density;
};

inline std::vector<DensitySample> copula_density_grid(const CopulaDensityEstimate& est, int grid) {
    require(grid >= 1, "copula_density_grid: grid must be >= 1");
    std::vector<DensitySample> out;
    for (int i = 0; i < grid; ++i)
        for (int j = 0; j < grid; ++j) {
            const double u1 = (i + 0.5) / grid, u2 = (j + 0.5) / grid;
            out.push_back({u1, u2, copula_density_eval(est, u1, u2)});
        }
    return out;
}

// ---------------------------------------------------------------------------
// Pairing hot-report probabilities with station temperatures

struct StationSample {
    std::string station_id;
    double lon = 0.0, lat = 0.0;
    double t = 0.0;
    double temperature = 0.0;
};

struct ProbabilitySample {
    double lon = 0.0, lat = 0.0;
    double t = 0.0;
    double probability = 0.0;
};

/// Joins each probability sample to its nearest station (Euclidean) and the
/// station reading in the same hour; probabilities are averaged per
/// (station, hour). Returns (mean probability, temperature) pairs in
/// station/hour order.
inline std::vector<std::pair<double, double>> pair_with_stations(std::span<const ProbabilitySample> probs,
                                                                 std::span<const StationSample> readings) {
    require(!readings.empty(), "pair_with_stations: no station readings");
    std::vector<std::string> ids;
    std::vector<std::pair<double, double>> where;
    for (const auto& r : readings) {
        if (std::find(ids.begin(), ids.end(), r.station_id) == ids.end()) {
            ids.push_back(r.station_id);
            where.emplace_back(r.lon, r.lat);
        }
    }
    std::map<std::pair<std::size_t, long long>, std::pair<double, int>> acc;
    for (const auto& p : probs) {
        std::size_t best = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < where.size(); ++s) {
            const double d = std::hypot(p.lon - where[s].first, p.lat - where[s].second);
            if (d < bd) bd = d, best = s;
        }
        auto& slot = acc[{best, static_cast<long long>(std::floor(p.t / 60.0))}];
        slot.first += p.probability;
        slot.second += 1;
    }
    std::map<std::pair<std::size_t, long long>, double> temps;
    for (const auto& r : readings) {
        const auto s = static_cast<std::size_t>(std::find(ids.begin(), ids.end(), r.station_id) - ids.begin());
        temps[{s, static_cast<long long>(std::floor(r.t / 60.0))}] = r.temperature;
    }
    std::vector<std::pair<double, double>> out;
    for (const auto& [key, sum] : acc) {
        auto it = temps.find(key);
        if (it == temps.end()) continue;
        out.emplace_back(sum.first / sum.second, it->second);
    }
    return out;
}

} // namespace stfuse
