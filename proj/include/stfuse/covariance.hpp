#pragma once

#include "stfuse/core.hpp"
#include "stfuse/optim.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace stfuse {

inline double space_kernel(double d, double r_s) {
    if (!(d >= 0.0)) throw InputError("space_kernel: negative distance");
    if (!(r_s > 0.0)) throw InputError("space_kernel: range must be positive");
    return std::exp(-d / r_s);
}

inline double time_kernel(double lag, double r_t) {
    if (!(lag >= 0.0)) throw InputError("time_kernel: negative time lag");
    if (!(r_t > 0.0)) throw InputError("time_kernel: range must be positive");
    return std::exp(-lag / r_t);
}

//! Product-sum exponential kernel:
//!   c = s2_s k(d) + s2_t k(t) + s2_st k(d) k(t),  k(h) = exp(-h / r).
struct ProductSumKernel {
    double sigma2_s = 1.0;
    double sigma2_t = 0.0;
    double sigma2_st = 0.0;
    double r_s = 1.0;
    double r_t = 1.0;

    double sill() const { return sigma2_s + sigma2_t + sigma2_st; }

    bool valid() const {
        return sigma2_s >= 0 && sigma2_t >= 0 && sigma2_st >= 0 && r_s > 0 && r_t > 0 && std::isfinite(sill()) &&
               std::isfinite(r_s) && std::isfinite(r_t);
    }

    double at_lags(double d, double lag) const {
        const double ks = space_kernel(d, r_s);
        const double kt = lag == 0.0 ? 1.0 : time_kernel(lag, r_t);
        return sigma2_s * ks + sigma2_t * kt + sigma2_st * ks * kt;
    }

    // Semivariance c(0,0) - c(h_s, h_t).
    double semivariance(double d, double lag) const { return sill() - at_lags(d, lag); }
};

inline double product_sum_cov(const SpaceTimePoint& xi, const SpaceTimePoint& xj, const ProductSumKernel& k) {
    return k.at_lags(spatial_distance(xi, xj), time_lag(xi, xj));
}

// ---------------------------------------------------------------------------
// Low-rank basis model

enum BasisBlock : unsigned {
    block_spatial = 1u,
    block_temporal = 2u,
    block_spatiotemporal = 4u,
    block_all = 7u,
};

/// Anchor points for the radial basis functions. The spatial block ranges
/// over the distinct anchor locations and the temporal block over the
/// distinct anchor times; the space-time block has one entry per anchor.
/// With anchors in general position all three blocks have A entries.
struct AnchorLayout {
    std::vector<SpaceTimePoint> anchors;
    double r_tilde_s = 1.0;
    double r_tilde_t = 1.0;
    unsigned blocks = block_all;

    std::vector<SpaceTimePoint> locations; // distinct (lon, lat), t unused
    std::vector<double> times;             // distinct anchor times
    std::vector<std::size_t> location_of;  // anchor -> location index
    std::vector<std::size_t> time_of;      // anchor -> time index

    std::size_t spatial_size() const { return (blocks & block_spatial) ? locations.size() : 0; }
    std::size_t temporal_size() const { return (blocks & block_temporal) ? times.size() : 0; }
    std::size_t spatiotemporal_size() const { return (blocks & block_spatiotemporal) ? anchors.size() : 0; }
    std::size_t dimension() const { return spatial_size() + temporal_size() + spatiotemporal_size(); }

    std::size_t spatial_offset() const { return 0; }
    std::size_t temporal_offset() const { return spatial_size(); }
    std::size_t spatiotemporal_offset() const { return spatial_size() + temporal_size(); }
};

namespace detail {

inline double min_positive_gap(std::span<const double> sorted_values) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < sorted_values.size(); ++i) {
        const double gap = sorted_values[i] - sorted_values[i - 1];
        if (gap > 0) best = std::min(best, gap);
    }
    return best;
}

} // namespace detail

/// Builds a layout from an explicit anchor list. Ranges follow the 1.5x
/// shortest-separation rule. A dimension with a single distinct value falls
/// back to 1.5x the supplied extent for that dimension.
inline AnchorLayout make_layout(std::vector<SpaceTimePoint> anchors, unsigned blocks = block_all,
                                std::optional<double> spatial_extent = std::nullopt,
                                std::optional<double> temporal_extent = std::nullopt) {
    require(!anchors.empty(), "anchor layout needs at least one anchor");
    require(blocks != 0 && blocks <= block_all, "anchor layout: invalid basis block mask");
    AnchorLayout layout;
    layout.blocks = blocks;
    layout.anchors = std::move(anchors);
    for (const auto& a : layout.anchors) {
        require(a.valid(), "anchor layout: invalid anchor point");
        auto loc = std::find_if(layout.locations.begin(), layout.locations.end(),
                                [&](const SpaceTimePoint& p) { return p.lon == a.lon && p.lat == a.lat; });
        if (loc == layout.locations.end()) {
            layout.location_of.push_back(layout.locations.size());
            layout.locations.push_back({a.lon, a.lat, 0.0});
        } else {
            layout.location_of.push_back(static_cast<std::size_t>(loc - layout.locations.begin()));
        }
        auto tt = std::find(layout.times.begin(), layout.times.end(), a.t);
        if (tt == layout.times.end()) {
            layout.time_of.push_back(layout.times.size());
            layout.times.push_back(a.t);
        } else {
            layout.time_of.push_back(static_cast<std::size_t>(tt - layout.times.begin()));
        }
    }

    if (layout.locations.size() > 1) {
        double dmin = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < layout.locations.size(); ++i)
            for (std::size_t j = i + 1; j < layout.locations.size(); ++j)
                dmin = std::min(dmin, spatial_distance(layout.locations[i], layout.locations[j]));
        layout.r_tilde_s = 1.5 * dmin;
    } else {
        if (!spatial_extent && (blocks & (block_spatial | block_spatiotemporal)))
            throw InputError("anchor layout: single anchor location needs a spatial extent for the range fallback");
        layout.r_tilde_s = 1.5 * spatial_extent.value_or(1.0);
    }

    std::vector<double> sorted_times = layout.times;
    std::sort(sorted_times.begin(), sorted_times.end());
    if (sorted_times.size() > 1) {
        layout.r_tilde_t = 1.5 * detail::min_positive_gap(sorted_times);
    } else {
        if (!temporal_extent && (blocks & (block_temporal | block_spatiotemporal)))
            throw InputError("anchor layout: single anchor time needs a temporal extent for the range fallback");
        layout.r_tilde_t = 1.5 * temporal_extent.value_or(1.0);
    }
    require(layout.r_tilde_s > 0 && layout.r_tilde_t > 0, "anchor layout: degenerate range");
    return layout;
}

/// Cartesian product of spatial anchor locations and `temporal_count`
/// equally spaced times over [t0, t1] (endpoints included; a single time
/// sits at the window centre).
inline AnchorLayout make_anchors(std::span<const SpaceTimePoint> spatial_points, int temporal_count, double t0,
                                 double t1, unsigned blocks = block_all,
                                 std::optional<double> spatial_extent = std::nullopt) {
    require(!spatial_points.empty(), "make_anchors: no spatial points");
    require(temporal_count >= 1, "make_anchors: temporal anchor count must be >= 1");
    require(t1 > t0, "make_anchors: empty time window");
    for (std::size_t i = 0; i < spatial_points.size(); ++i)
        for (std::size_t j = i + 1; j < spatial_points.size(); ++j)
            if (spatial_distance(spatial_points[i], spatial_points[j]) == 0.0)
                throw InputError("make_anchors: duplicate spatial anchor points");

    std::vector<double> times;
    if (temporal_count == 1) {
        times.push_back(0.5 * (t0 + t1));
    } else {
        for (int k = 0; k < temporal_count; ++k) times.push_back(t0 + (t1 - t0) * k / (temporal_count - 1));
    }
    std::vector<SpaceTimePoint> anchors;
    for (const auto& p : spatial_points)
        for (double t : times) anchors.push_back({p.lon, p.lat, t});
    return make_layout(std::move(anchors), blocks, spatial_extent, t1 - t0);
}

/// Regular g x g spatial-only anchor grid over [lo, hi]^2.
inline AnchorLayout make_grid_anchors(int g, double lo, double hi) {
    require(g >= 1, "grid anchors: g must be >= 1");
    std::vector<SpaceTimePoint> anchors;
    for (int i = 0; i < g; ++i) {
        for (int j = 0; j < g; ++j) {
            const double x = g == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * i / (g - 1);
            const double y = g == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * j / (g - 1);
            anchors.push_back({x, y, 0.0});
        }
    }
    return make_layout(std::move(anchors), block_spatial, hi - lo, 1.0);
}

/// Stacked basis vector [w_s, w_t, w_st] at x (disabled blocks omitted).
inline Eigen::VectorXd basis_vector(const SpaceTimePoint& x, const AnchorLayout& layout) {
    Eigen::VectorXd w(static_cast<Eigen::Index>(layout.dimension()));
    Eigen::Index k = 0;
    if (layout.blocks & block_spatial)
        for (const auto& loc : layout.locations) w[k++] = std::exp(-spatial_distance(x, loc) / layout.r_tilde_s);
    if (layout.blocks & block_temporal)
        for (double t : layout.times) w[k++] = std::exp(-std::abs(x.t - t) / layout.r_tilde_t);
    if (layout.blocks & block_spatiotemporal)
        for (const auto& a : layout.anchors)
            w[k++] = std::exp(-spatial_distance(x, a) / layout.r_tilde_s) * std::exp(-time_lag(x, a) / layout.r_tilde_t);
    return w;
}

inline Eigen::MatrixXd basis_matrix(std::span<const SpaceTimePoint> points, const AnchorLayout& layout) {
    Eigen::MatrixXd w(static_cast<Eigen::Index>(points.size()), static_cast<Eigen::Index>(layout.dimension()));
    for (std::size_t i = 0; i < points.size(); ++i) w.row(static_cast<Eigen::Index>(i)) = basis_vector(points[i], layout);
    return w;
}

struct BasisCoefficients {
    Eigen::VectorXd b;
    double sigma2 = 1.0;
};

/// Blockwise rank-one sum: sum over enabled blocks of (b_k . w_k(xi)) (b_k . w_k(xj)).
inline double lowrank_cov(const SpaceTimePoint& xi, const SpaceTimePoint& xj, const BasisCoefficients& coeffs,
                          const AnchorLayout& layout) {
    require(static_cast<std::size_t>(coeffs.b.size()) == layout.dimension(),
            "lowrank_cov: coefficient length does not match the layout");
    const Eigen::VectorXd wi = basis_vector(xi, layout);
    const Eigen::VectorXd wj = basis_vector(xj, layout);
    double c = 0.0;
    auto block = [&](std::size_t off, std::size_t len) {
        if (len == 0) return;
        const auto o = static_cast<Eigen::Index>(off);
        const auto l = static_cast<Eigen::Index>(len);
        c += coeffs.b.segment(o, l).dot(wi.segment(o, l)) * coeffs.b.segment(o, l).dot(wj.segment(o, l));
    };
    block(layout.spatial_offset(), layout.spatial_size());
    block(layout.temporal_offset(), layout.temporal_size());
    block(layout.spatiotemporal_offset(), layout.spatiotemporal_size());
    return c;
}

/// Rows U(x) with one column per enabled block, so that
/// lowrank_cov(xi, xj) = U(xi) . U(xj).
inline Eigen::MatrixXd lowrank_factor(std::span<const SpaceTimePoint> points, const BasisCoefficients& coeffs,
                                      const AnchorLayout& layout) {
    require(static_cast<std::size_t>(coeffs.b.size()) == layout.dimension(),
            "lowrank_factor: coefficient length does not match the layout");
    std::vector<std::pair<Eigen::Index, Eigen::Index>> active;
    if (layout.spatial_size()) active.emplace_back(layout.spatial_offset(), layout.spatial_size());
    if (layout.temporal_size()) active.emplace_back(layout.temporal_offset(), layout.temporal_size());
    if (layout.spatiotemporal_size()) active.emplace_back(layout.spatiotemporal_offset(), layout.spatiotemporal_size());
    Eigen::MatrixXd u(static_cast<Eigen::Index>(points.size()), static_cast<Eigen::Index>(active.size()));
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Eigen::VectorXd w = basis_vector(points[i], layout);
        for (std::size_t k = 0; k < active.size(); ++k)
            u(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
                coeffs.b.segment(active[k].first, active[k].second).dot(w.segment(active[k].first, active[k].second));
    }
    return u;
}

// ---------------------------------------------------------------------------
// Common evaluation interface

struct LowRankModel {
    BasisCoefficients coeffs;
    AnchorLayout layout;
};

/// The sole provider of c(x_i, x_j) for downstream estimators: either engine.
class CovarianceModel {
public:
    CovarianceModel(ProductSumKernel k) : engine_(k) {
        require(k.valid(), "covariance model: invalid product-sum kernel");
    }
    CovarianceModel(LowRankModel m) : engine_(std::move(m)) {
        const auto& lr = std::get<LowRankModel>(engine_);
        require(static_cast<std::size_t>(lr.coeffs.b.size()) == lr.layout.dimension(),
                "covariance model: coefficient length does not match the layout");
    }

    double operator()(const SpaceTimePoint& a, const SpaceTimePoint& b) const {
        if (const auto* k = std::get_if<ProductSumKernel>(&engine_)) return product_sum_cov(a, b, *k);
        const auto& lr = std::get<LowRankModel>(engine_);
        return lowrank_cov(a, b, lr.coeffs, lr.layout);
    }

    bool is_kernel() const { return std::holds_alternative<ProductSumKernel>(engine_); }
    const ProductSumKernel* kernel() const { return std::get_if<ProductSumKernel>(&engine_); }
    const LowRankModel* lowrank() const { return std::get_if<LowRankModel>(&engine_); }

    Eigen::MatrixXd gram(std::span<const SpaceTimePoint> pts) const {
        const auto n = static_cast<Eigen::Index>(pts.size());
        Eigen::MatrixXd c(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j <= i; ++j) {
                c(i, j) = (*this)(pts[static_cast<std::size_t>(i)], pts[static_cast<std::size_t>(j)]);
                c(j, i) = c(i, j);
            }
        }
        return c;
    }

    Eigen::MatrixXd cross(std::span<const SpaceTimePoint> rows, std::span<const SpaceTimePoint> cols) const {
        Eigen::MatrixXd c(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < cols.size(); ++j)
                c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (*this)(rows[i], cols[j]);
        return c;
    }

private:
    std::variant<ProductSumKernel, LowRankModel> engine_;
};

// ---------------------------------------------------------------------------
// Empirical variogram and weighted least squares fit

struct VariogramBin {
    double spatial_lag = 0.0;  // mean spatial lag of the pairs in the bin
    double temporal_lag = 0.0; // mean temporal lag of the pairs in the bin
    double semivariance = 0.0;
    std::size_t count = 0;
};

struct EmpiricalVariogram {
    std::vector<VariogramBin> bins;
    std::size_t dropped_empty_bins = 0;
    std::vector<std::string> warnings;
};

/// Bins are half-open [edge_k, edge_{k+1}) in each lag dimension; pairs
/// beyond the last edge are ignored.
inline EmpiricalVariogram empirical_variogram(std::span<const SpaceTimePoint> points, std::span<const double> residuals,
                                              std::span<const double> space_edges,
                                              std::span<const double> time_edges) {
    require(points.size() == residuals.size(), "empirical_variogram: points/residuals length mismatch");
    require(points.size() >= 2, "empirical_variogram: need at least two observations");
    require(space_edges.size() >= 2 && time_edges.size() >= 2, "empirical_variogram: need at least one bin per axis");
    require(std::is_sorted(space_edges.begin(), space_edges.end()) && std::is_sorted(time_edges.begin(), time_edges.end()),
            "empirical_variogram: bin edges must be sorted");
    const std::size_t ns = space_edges.size() - 1;
    const std::size_t nt = time_edges.size() - 1;
    std::vector<double> sum_g(ns * nt, 0.0), sum_s(ns * nt, 0.0), sum_t(ns * nt, 0.0);
    std::vector<std::size_t> cnt(ns * nt, 0);

    auto locate = [](std::span<const double> edges, double v) -> std::ptrdiff_t {
        if (v < edges.front() || v >= edges.back()) return -1;
        auto it = std::upper_bound(edges.begin(), edges.end(), v);
        return static_cast<std::ptrdiff_t>(it - edges.begin()) - 1;
    };

    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t j = i + 1; j < points.size(); ++j) {
            const double d = spatial_distance(points[i], points[j]);
            const double l = time_lag(points[i], points[j]);
            const auto bs = locate(space_edges, d);
            const auto bt = locate(time_edges, l);
            if (bs < 0 || bt < 0) continue;
            const std::size_t b = static_cast<std::size_t>(bs) * nt + static_cast<std::size_t>(bt);
            const double diff = residuals[i] - residuals[j];
            sum_g[b] += 0.5 * diff * diff;
            sum_s[b] += d;
            sum_t[b] += l;
            ++cnt[b];
        }
    }

    EmpiricalVariogram vg;
    for (std::size_t b = 0; b < ns * nt; ++b) {
        if (cnt[b] == 0) {
            ++vg.dropped_empty_bins;
            continue;
        }
        const double c = static_cast<double>(cnt[b]);
        vg.bins.push_back({sum_s[b] / c, sum_t[b] / c, sum_g[b] / c, cnt[b]});
    }
    if (vg.dropped_empty_bins > 0)
        vg.warnings.push_back("dropped " + std::to_string(vg.dropped_empty_bins) + " empty variogram bins");
    return vg;
}

enum KernelParam : unsigned {
    param_sigma2_s = 1u,
    param_sigma2_t = 2u,
    param_sigma2_st = 4u,
    param_r_s = 8u,
    param_r_t = 16u,
    param_nugget = 32u,
    params_spatiotemporal = 31u,
    params_spatial = param_sigma2_s | param_r_s,
};

struct WlsOptions {
    unsigned free = params_spatiotemporal; // parameters to estimate; the rest stay at init
    double init_nugget = 0.0;
    int max_iterations = 500;
};

struct WlsFit {
    ProductSumKernel kernel;
    double nugget = 0.0;
    double objective = 0.0;
    std::vector<double> objective_trace;
    bool degenerate = false;
    bool converged = true;
    std::vector<std::string> warnings;
};

/// Cressie weighted least squares objective:
///   sum_bins count * (gamma_model - gamma_emp)^2 / gamma_model^2.
/// Bins at zero total lag carry no information about the structure and are skipped.
inline double wls_objective(const EmpiricalVariogram& vg, const ProductSumKernel& k, double nugget) {
    double obj = 0.0;
    for (const auto& bin : vg.bins) {
        if (bin.spatial_lag == 0.0 && bin.temporal_lag == 0.0) continue;
        const double gm = nugget + k.semivariance(bin.spatial_lag, bin.temporal_lag);
        if (!(gm > 0.0)) return std::numeric_limits<double>::infinity();
        const double r = gm - bin.semivariance;
        obj += static_cast<double>(bin.count) * r * r / (gm * gm);
    }
    return obj;
}

/// Starting values from the empirical variogram: sill from the mean of the
/// upper half of the bins, ranges at a third of the largest lag.
inline ProductSumKernel default_wls_init(const EmpiricalVariogram& vg, unsigned free = params_spatiotemporal) {
    require(!vg.bins.empty(), "default_wls_init: empty variogram");
    std::vector<double> g;
    double max_s = 0.0, max_t = 0.0;
    for (const auto& b : vg.bins) {
        g.push_back(b.semivariance);
        max_s = std::max(max_s, b.spatial_lag);
        max_t = std::max(max_t, b.temporal_lag);
    }
    std::sort(g.begin(), g.end());
    double sill = 0.0;
    const std::size_t half = g.size() / 2;
    for (std::size_t i = half; i < g.size(); ++i) sill += g[i];
    sill /= static_cast<double>(g.size() - half);
    sill = std::max(sill, 1e-12);
    ProductSumKernel k;
    const int nvar = ((free & param_sigma2_s) ? 1 : 0) + ((free & param_sigma2_t) ? 1 : 0) + ((free & param_sigma2_st) ? 1 : 0);
    const double share = sill / std::max(nvar, 1);
    k.sigma2_s = (free & param_sigma2_s) ? share : 0.0;
    k.sigma2_t = (free & param_sigma2_t) ? share : 0.0;
    k.sigma2_st = (free & param_sigma2_st) ? share : 0.0;
    if (nvar == 0) k.sigma2_s = sill;
    k.r_s = max_s > 0 ? max_s / 3.0 : 1.0;
    k.r_t = max_t > 0 ? max_t / 3.0 : 1.0;
    return k;
}

/// Weighted least squares fit of the product-sum model to an empirical
/// variogram. Free parameters are optimized on the log scale, which keeps
/// them strictly positive.
inline WlsFit fit_product_sum_wls(const EmpiricalVariogram& vg, const ProductSumKernel& init, const WlsOptions& opt = {}) {
    std::size_t informative = 0;
    bool all_zero = true;
    for (const auto& b : vg.bins) {
        if (b.spatial_lag != 0.0 || b.temporal_lag != 0.0) ++informative;
        if (b.semivariance != 0.0) all_zero = false;
    }
    require(vg.bins.size() >= 5, "fit_product_sum_wls: need at least 5 non-empty bins");
    require(init.valid(), "fit_product_sum_wls: invalid initial kernel");

    WlsFit fit;
    fit.kernel = init;
    fit.nugget = opt.init_nugget;
    if (all_zero) {
        fit.kernel.sigma2_s = fit.kernel.sigma2_t = fit.kernel.sigma2_st = 0.0;
        fit.nugget = 0.0;
        fit.degenerate = true;
        fit.warnings.push_back("all semivariances are zero; returning a zero-variance kernel");
        return fit;
    }
    require(informative >= 1, "fit_product_sum_wls: no bins with a non-zero lag");

    struct Slot {
        unsigned flag;
        double* target;
    };
    ProductSumKernel work = init;
    double nugget = opt.init_nugget;
    const std::vector<Slot> slots{{param_sigma2_s, &work.sigma2_s}, {param_sigma2_t, &work.sigma2_t},
                                  {param_sigma2_st, &work.sigma2_st}, {param_r_s, &work.r_s},
                                  {param_r_t, &work.r_t},           {param_nugget, &nugget}};
    std::vector<double*> free_slots;
    for (const auto& s : slots) {
        if (!(opt.free & s.flag)) continue;
        free_slots.push_back(s.target);
        // log-parameterization needs a strictly positive start
        if (!(*s.target > 0.0)) *s.target = 1e-3 * std::max(init.sill(), 1e-6);
    }

    Eigen::VectorXd x0(static_cast<Eigen::Index>(free_slots.size()));
    for (std::size_t i = 0; i < free_slots.size(); ++i) x0[static_cast<Eigen::Index>(i)] = std::log(*free_slots[i]);

    auto unpack = [&](const Eigen::VectorXd& x) {
        for (std::size_t i = 0; i < free_slots.size(); ++i) *free_slots[i] = std::exp(x[static_cast<Eigen::Index>(i)]);
    };
    auto objective = [&](const Eigen::VectorXd& x) {
        for (Eigen::Index i = 0; i < x.size(); ++i)
            if (!(std::abs(x[i]) < 700.0)) return std::numeric_limits<double>::infinity();
        unpack(x);
        return wls_objective(vg, work, nugget);
    };

    optim::Options oo;
    oo.max_iterations = opt.max_iterations;
    const auto res = optim::bfgs(objective, x0, oo);
    fit.objective_trace = res.trace;
    if (!std::isfinite(res.value)) {
        std::string msg = "fit_product_sum_wls: optimizer failed; objective trace:";
        for (double v : res.trace) msg += " " + std::to_string(v);
        throw ConvergenceError(msg);
    }
    unpack(res.x);
    fit.kernel = work;
    fit.nugget = nugget;
    fit.objective = res.value;
    fit.converged = res.converged;
    if (!res.converged) fit.warnings.push_back("WLS optimizer stopped before meeting its tolerance");
    return fit;
}

} // namespace stfuse
