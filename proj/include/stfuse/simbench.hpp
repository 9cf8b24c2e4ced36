#pragma once

#include "stfuse/core.hpp"
#include "stfuse/covariance.hpp"
#include "stfuse/lowrank_em.hpp"
#include "stfuse/sblue.hpp"
#include "stfuse/simulate.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <iomanip>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace stfuse {

// ---------------------------------------------------------------------------
// Seeding and hashing

/// splitmix64 finalizer; used to derive independent per-task streams.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) {
    auto step = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    };
    return step(step(step(a) ^ b) ^ c);
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

/// Runs body(i) for i in [0, count) on up to `threads` workers. Each task
/// writes only its own slot, so results do not depend on scheduling.
inline void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body) {
    const auto workers = static_cast<std::size_t>(std::max(1, threads));
    if (workers == 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (std::size_t w = 0; w < std::min(workers, count); ++w)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next++) < count;) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// Monte Carlo study

struct SimConfig {
    int n_sites = 200;
    int grid_size = 30;
    double grid_lo = 0.1;
    double grid_hi = 0.9;
    ProductSumKernel true_cov{1.0, 0.0, 0.0, 0.4, 1.0};
    int replications = 200;
    std::uint64_t seed = 20140101;
    int anchor_grid = 3;
    int variogram_bins = 15;
    double em_ridge = 0.01;
    EMInit em_init = EMInit::least_squares;
    int threads = 1;

    void validate() const {
        require(n_sites >= 2, "sim config: n_sites must be >= 2");
        require(replications >= 1, "sim config: replications must be >= 1");
        require(grid_size >= 2 && grid_hi > grid_lo, "sim config: bad evaluation grid");
        require(true_cov.valid(), "sim config: invalid true covariance");
        require(anchor_grid >= 2, "sim config: anchor grid must be >= 2");
        require(variogram_bins >= 5, "sim config: need at least 5 variogram bins");
        require(em_ridge >= 0.0, "sim config: em_ridge must be >= 0");
    }

    std::string describe() const {
        std::ostringstream os;
        os << std::setprecision(17) << "n_sites=" << n_sites << ";grid=" << grid_size << ':' << grid_lo << ':' << grid_hi
           << ";cov=" << true_cov.sigma2_s << ',' << true_cov.sigma2_t << ',' << true_cov.sigma2_st << ',' << true_cov.r_s << ','
           << true_cov.r_t << ";reps=" << replications << ";seed=" << seed << ";anchors=" << anchor_grid
           << ";bins=" << variogram_bins << ";ridge=" << em_ridge << ";init=" << static_cast<int>(em_init);
        return os.str();
    }
};

enum class Approach {
    kernel,       // WLS variogram fit + simple kriging
    basis,        // EM on the anchor grid + low-rank kriging
    basis_plugin, // EM on the anchor grid, plug-in field b . w(x)
    oracle,       // returns the true field
    zero,         // predicts the prior mean
};

inline const char* approach_name(Approach a) {
    switch (a) {
    case Approach::kernel: return "kernel";
    case Approach::basis: return "basis";
    case Approach::basis_plugin: return "basis-plugin";
    case Approach::oracle: return "oracle";
    case Approach::zero: return "zero";
    }
    return "?";
}

struct ReplicationResult {
    double rmse = 0.0;
    double fit_seconds = 0.0;
    double predict_seconds = 0.0;
    bool failed = false;
    std::string failure;
};

struct SimulatedField {
    std::vector<SpaceTimePoint> sites;
    std::vector<double> observed;
    std::vector<SpaceTimePoint> grid;
    std::vector<double> truth;
};

inline SimulatedField simulate_replication(const SimConfig& cfg, int n_sites, int replication) {
    const auto rep = static_cast<std::uint64_t>(replication);
    SimulatedField s;
    s.sites = scale_sites(static_cast<std::size_t>(n_sites), mix_seed(cfg.seed, rep, 1));
    s.grid = regular_grid(cfg.grid_size, cfg.grid_lo, cfg.grid_hi);
    std::vector<SpaceTimePoint> all = s.sites;
    all.insert(all.end(), s.grid.begin(), s.grid.end());
    const Eigen::VectorXd f =
        sample_gp(all, [&](const SpaceTimePoint& a, const SpaceTimePoint& b) { return product_sum_cov(a, b, cfg.true_cov); },
                  mix_seed(cfg.seed, rep, 2));
    s.observed.assign(f.data(), f.data() + n_sites);
    s.truth.assign(f.data() + n_sites, f.data() + f.size());
    return s;
}

/// Spatial lag bins up to a third of the site bounding-box diagonal.
inline EmpiricalVariogram benchmark_variogram(std::span<const SpaceTimePoint> sites, std::span<const double> y, int bins) {
    double x0 = sites[0].lon, x1 = x0, y0 = sites[0].lat, y1 = y0;
    for (const auto& p : sites) {
        x0 = std::min(x0, p.lon), x1 = std::max(x1, p.lon);
        y0 = std::min(y0, p.lat), y1 = std::max(y1, p.lat);
    }
    const double cutoff = std::hypot(x1 - x0, y1 - y0) / 3.0;
    std::vector<double> edges;
    for (int k = 0; k <= bins; ++k) edges.push_back(cutoff * k / bins);
    const std::vector<double> time_edges{0.0, 1.0};
    return empirical_variogram(sites, y, edges, time_edges);
}

/// Fits one approach to a simulated field and scores it on the grid.
inline ReplicationResult evaluate_approach(const SimConfig& cfg, const SimulatedField& s, Approach approach, int anchor_grid,
                                           int replication) {
    using clock = std::chrono::steady_clock;
    auto secs = [](clock::duration d) { return std::chrono::duration<double>(d).count(); };
    ReplicationResult r;
    try {
        std::vector<double> pred(s.grid.size(), 0.0);
        const auto t0 = clock::now();
        auto t1 = t0;
        switch (approach) {
        case Approach::kernel: {
            const auto vg = benchmark_variogram(s.sites, s.observed, cfg.variogram_bins);
            WlsOptions opt;
            opt.free = params_spatial;
            const WlsFit fit = fit_product_sum_wls(vg, default_wls_init(vg, params_spatial), opt);
            if (fit.degenerate) throw NumericalError("variogram fit is degenerate");
            t1 = clock::now();
            FusionProblem p{ObservationSet{}, CovarianceModel(fit.kernel), 1e-8 * fit.kernel.sill(), {}, {}, MomentMode::exact};
            for (std::size_t i = 0; i < s.sites.size(); ++i) p.observations.continuous.push_back({s.sites[i], s.observed[i]});
            const FusionSolver solver(std::move(p));
            const auto est = solver.predict_many(s.grid);
            for (std::size_t g = 0; g < s.grid.size(); ++g) pred[g] = est[g].f_hat;
            break;
        }
        case Approach::basis:
        case Approach::basis_plugin: {
            const AnchorLayout layout = make_grid_anchors(anchor_grid, cfg.grid_lo, cfg.grid_hi);
            EMConfig ec;
            ec.init_b = cfg.em_init;
            ec.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(replication), 3);
            ec.ridge = cfg.em_ridge;
            const EMResult em = fit_em(s.sites, s.observed, layout, ec);
            t1 = clock::now();
            if (approach == Approach::basis_plugin) {
                for (std::size_t g = 0; g < s.grid.size(); ++g) pred[g] = plug_in_field(em.coeffs, layout, s.grid[g]);
            } else {
                std::vector<ContinuousObservation> obs;
                for (std::size_t i = 0; i < s.sites.size(); ++i) obs.push_back({s.sites[i], s.observed[i]});
                const LowRankKriging krig(LowRankModel{em.coeffs, layout}, obs);
                for (std::size_t g = 0; g < s.grid.size(); ++g) pred[g] = krig.predict(s.grid[g]).f_hat;
            }
            break;
        }
        case Approach::oracle:
            pred = s.truth;
            t1 = clock::now();
            break;
        case Approach::zero:
            t1 = clock::now();
            break;
        }
        const auto t2 = clock::now();
        r.fit_seconds = secs(t1 - t0);
        r.predict_seconds = secs(t2 - t1);
        r.rmse = rmse(pred, s.truth);
        if (!std::isfinite(r.rmse)) throw NumericalError("non-finite RMSE");
    } catch (const Error& e) {
        r.failed = true;
        r.failure = e.what();
    }
    return r;
}

inline ReplicationResult run_replication(const SimConfig& cfg, int n_sites, Approach approach, int replication) {
    return evaluate_approach(cfg, simulate_replication(cfg, n_sites, replication), approach, cfg.anchor_grid, replication);
}

struct BenchRow {
    std::string label;
    double mean_rmse = 0.0;
    double sd_rmse = 0.0;
    double mean_seconds = 0.0;
    double mean_fit_seconds = 0.0;
    double mean_predict_seconds = 0.0;
    int replications = 0;
    int failures = 0;
    std::vector<double> rmses;
    std::string first_failure;
};

struct BenchReport {
    std::string title;
    std::vector<BenchRow> rows;
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
    std::string environment;
    std::vector<std::string> notes;

    const BenchRow& row(const std::string& label) const {
        for (const auto& r : rows)
            if (r.label == label) return r;
        throw InputError("bench report: no row labelled '" + label + "'");
    }
};

inline std::string environment_note(int threads) {
    std::ostringstream os;
#if defined(__clang__)
    os << "clang " << __clang_major__ << '.' << __clang_minor__;
#elif defined(__GNUC__)
    os << "gcc " << __GNUC__ << '.' << __GNUC_MINOR__;
#else
    os << "unknown compiler";
#endif
    os << "; eigen " << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION << "; threads " << threads;
    return os.str();
}

/// One benchmarked configuration evaluated on shared simulated fields.
struct Arm {
    std::string label;
    Approach approach = Approach::kernel;
    int anchor_grid = 3;
};

inline BenchRow summarize(const std::string& label, std::span<const ReplicationResult> res) {
    BenchRow row;
    row.label = label;
    row.replications = static_cast<int>(res.size());
    for (const auto& r : res) {
        if (r.failed) {
            if (row.failures++ == 0) row.first_failure = r.failure;
            continue;
        }
        row.rmses.push_back(r.rmse);
        row.mean_fit_seconds += r.fit_seconds;
        row.mean_predict_seconds += r.predict_seconds;
    }
    const auto ok = static_cast<double>(row.rmses.size());
    if (ok == 0) {
        row.mean_rmse = row.sd_rmse = std::numeric_limits<double>::quiet_NaN();
        return row;
    }
    row.mean_rmse = std::accumulate(row.rmses.begin(), row.rmses.end(), 0.0) / ok;
    double ss = 0.0;
    for (double v : row.rmses) ss += (v - row.mean_rmse) * (v - row.mean_rmse);
    row.sd_rmse = ok > 1 ? std::sqrt(ss / (ok - 1)) : 0.0;
    row.mean_fit_seconds /= ok;
    row.mean_predict_seconds /= ok;
    row.mean_seconds = row.mean_fit_seconds + row.mean_predict_seconds;
    return row;
}

/// Each replication simulates its field once and runs every arm on it.
inline std::vector<BenchRow> run_arms(const SimConfig& cfg, int n_sites, std::span<const Arm> arms, int threads) {
    const auto reps = static_cast<std::size_t>(cfg.replications);
    std::vector<std::vector<ReplicationResult>> res(arms.size(), std::vector<ReplicationResult>(reps));
    parallel_for(reps, threads, [&](std::size_t i) {
        const int rep = static_cast<int>(i);
        std::optional<SimulatedField> field;
        std::string failure;
        try {
            field = simulate_replication(cfg, n_sites, rep);
        } catch (const Error& e) {
            failure = std::string("simulation: ") + e.what();
        }
        for (std::size_t a = 0; a < arms.size(); ++a) {
            if (!field) {
                res[a][i].failed = true;
                res[a][i].failure = failure;
                continue;
            }
            res[a][i] = evaluate_approach(cfg, *field, arms[a].approach, arms[a].anchor_grid, rep);
        }
    });
    std::vector<BenchRow> rows;
    for (std::size_t a = 0; a < arms.size(); ++a) rows.push_back(summarize(arms[a].label, res[a]));
    return rows;
}

inline BenchReport make_report(const SimConfig& cfg, std::string title, int threads) {
    cfg.validate();
    BenchReport rep;
    rep.title = std::move(title);
    rep.seed = cfg.seed;
    rep.config_hash = fnv1a(rep.title + '|' + cfg.describe());
    rep.environment = environment_note(threads);
    return rep;
}

inline std::string grid_label(int g) { return std::to_string(g) + "x" + std::to_string(g); }

/// Sample size sweep: kernel vs basis (fixed anchor grid) at N = 20, 200, 1000.
inline BenchReport run_table5(const SimConfig& cfg, std::vector<int> sizes = {20, 200, 1000}) {
    BenchReport rep = make_report(cfg, "sample size and RMSE", cfg.threads);
    const std::string g = grid_label(cfg.anchor_grid);
    for (int n : sizes) {
        const std::string ns = " N=" + std::to_string(n);
        const std::vector<Arm> arms{{"kernel" + ns, Approach::kernel, cfg.anchor_grid},
                                    {"basis-" + g + ns, Approach::basis, cfg.anchor_grid},
                                    {"basis-" + g + "-plugin" + ns, Approach::basis_plugin, cfg.anchor_grid}};
        for (auto& row : run_arms(cfg, n, arms, cfg.threads)) rep.rows.push_back(std::move(row));
    }
    rep.notes.push_back("basis rows predict by low-rank kriging; plugin rows report the plug-in field b.w(x)");
    return rep;
}

/// Anchor-count sweep at N = 200, with the kernel approach as reference.
inline BenchReport run_table6(const SimConfig& cfg, std::vector<int> grids = {3, 5, 7, 10, 13}) {
    BenchReport rep = make_report(cfg, "anchor count and RMSE", cfg.threads);
    std::vector<Arm> arms;
    for (int g : grids) arms.push_back({"basis-" + grid_label(g), Approach::basis, g});
    arms.push_back({"kernel", Approach::kernel, cfg.anchor_grid});
    rep.rows = run_arms(cfg, 200, arms, cfg.threads);
    return rep;
}

/// Wall time of fit + grid prediction; always single threaded.
inline BenchReport run_table7(const SimConfig& cfg, std::vector<int> sizes = {20, 200, 1000}) {
    BenchReport rep = make_report(cfg, "computational time", 1);
    const std::string g = grid_label(cfg.anchor_grid);
    for (int n : sizes) {
        const std::string ns = " N=" + std::to_string(n);
        const std::vector<Arm> arms{{"kernel" + ns, Approach::kernel, cfg.anchor_grid},
                                    {"basis-" + g + ns, Approach::basis, cfg.anchor_grid}};
        for (auto& row : run_arms(cfg, n, arms, 1)) rep.rows.push_back(std::move(row));
    }
    auto t = [&](const std::string& l) { return rep.row(l).mean_seconds; };
    if (std::find(sizes.begin(), sizes.end(), 1000) != sizes.end()) {
        std::ostringstream os;
        os << "basis/kernel time ratio at N=1000: " << t("basis-" + g + " N=1000") / t("kernel N=1000");
        rep.notes.push_back(os.str());
        if (std::find(sizes.begin(), sizes.end(), 200) != sizes.end()) {
            std::ostringstream os2;
            os2 << "kernel time ratio N=1000/N=200: " << t("kernel N=1000") / t("kernel N=200");
            rep.notes.push_back(os2.str());
        }
    }
    return rep;
}

/// Results section first (deterministic), then a labelled timing section.
inline void write_report(std::ostream& os, const BenchReport& rep) {
    os << "# " << rep.title << '\n';
    os << "# seed=" << rep.seed << " config_hash=" << std::hex << rep.config_hash << std::dec << '\n';
    os << std::setprecision(10);
    os << "label,mean_rmse,sd_rmse,replications,failures\n";
    for (const auto& r : rep.rows)
        os << r.label << ',' << r.mean_rmse << ',' << r.sd_rmse << ',' << r.replications << ',' << r.failures << '\n';
    for (const auto& n : rep.notes)
        if (n.find("time") == std::string::npos) os << "# note: " << n << '\n';
    for (const auto& r : rep.rows)
        if (r.failures) os << "# " << r.label << " first failure: " << r.first_failure << '\n';
    os << "# timing (wall clock, varies between runs)\n";
    os << "# environment: " << rep.environment << '\n';
    os << "label,mean_seconds,fit_seconds,predict_seconds\n";
    for (const auto& r : rep.rows)
        os << r.label << ',' << r.mean_seconds << ',' << r.mean_fit_seconds << ',' << r.mean_predict_seconds << '\n';
    for (const auto& n : rep.notes)
        if (n.find("time") != std::string::npos) os << "# note: " << n << '\n';
}

// ---------------------------------------------------------------------------
// Cross-validation

struct Sample {
    SpaceTimePoint at;
    double value = 0.0;
};

using Predictor = std::function<double(const SpaceTimePoint&)>;
using ModelBuilder = std::function<Predictor(std::span<const Sample>)>;

struct CvResult {
    double rmse = 0.0;
    std::vector<double> fold_rmse;
};

/// Random partition into k folds; RMSE pooled over all held-out points.
inline CvResult kfold_cv(std::span<const Sample> data, int k, const ModelBuilder& build, std::uint64_t seed) {
    require(k >= 2, "kfold_cv: k must be >= 2");
    require(data.size() >= static_cast<std::size_t>(k), "kfold_cv: need at least k observations (a fold would be empty)");
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    CvResult out;
    double ss = 0.0;
    for (int f = 0; f < k; ++f) {
        std::vector<Sample> train, test;
        for (std::size_t i = 0; i < order.size(); ++i) (static_cast<int>(i % static_cast<std::size_t>(k)) == f ? test : train).push_back(data[order[i]]);
        const Predictor pred = build(train);
        double fs = 0.0;
        for (const auto& s : test) {
            const double e = pred(s.at) - s.value;
            fs += e * e;
        }
        ss += fs;
        out.fold_rmse.push_back(std::sqrt(fs / static_cast<double>(test.size())));
    }
    out.rmse = std::sqrt(ss / static_cast<double>(data.size()));
    return out;
}

struct BasisCandidate {
    std::vector<SpaceTimePoint> spatial_points;
    int temporal_count = 1;
};

struct BasisSelection {
    std::size_t chosen = 0;
    std::vector<std::size_t> counts; // anchors per candidate
    std::vector<double> rmse;        // CV RMSE per candidate
};

/// Low-rank kriging predictor built by EM on the given layout.
inline ModelBuilder basis_model_builder(AnchorLayout layout, EMConfig em = {}) {
    return [layout = std::move(layout), em](std::span<const Sample> train) -> Predictor {
        std::vector<SpaceTimePoint> pts;
        std::vector<double> y;
        std::vector<ContinuousObservation> obs;
        for (const auto& s : train) {
            pts.push_back(s.at);
            y.push_back(s.value);
            obs.push_back({s.at, s.value});
        }
        const EMResult fit = fit_em(pts, y, layout, em);
        auto krig = std::make_shared<LowRankKriging>(LowRankModel{fit.coeffs, layout}, obs);
        return [krig](const SpaceTimePoint& x) { return krig->predict(x).f_hat; };
    };
}

/// Runs k-fold CV per candidate anchor configuration and returns the
/// smallest anchor count whose RMSE is within 1% of the best.
inline BasisSelection select_basis_count(std::span<const Sample> data, std::span<const BasisCandidate> candidates,
                                         const EMConfig& em = {}, std::uint64_t seed = 1, int folds = 5,
                                         unsigned blocks = block_all) {
    require(!candidates.empty(), "select_basis_count: no candidates");
    double t0 = std::numeric_limits<double>::infinity(), t1 = -t0;
    for (const auto& s : data) t0 = std::min(t0, s.at.t), t1 = std::max(t1, s.at.t);
    BasisSelection sel;
    for (const auto& c : candidates) {
        const AnchorLayout layout = make_anchors(c.spatial_points, c.temporal_count, t0, t1, blocks);
        sel.counts.push_back(layout.anchors.size());
        double r = std::numeric_limits<double>::infinity();
        if (candidates.size() > 1) {
            try {
                r = kfold_cv(data, folds, basis_model_builder(layout, em), seed).rmse;
            } catch (const NumericalError&) {
            } catch (const ConvergenceError&) {
            }
        }
        sel.rmse.push_back(r);
    }
    if (candidates.size() == 1) return sel;
    const double best = *std::min_element(sel.rmse.begin(), sel.rmse.end());
    if (!std::isfinite(best)) throw NumericalError("select_basis_count: every candidate failed");
    std::size_t chosen = candidates.size();
    for (std::size_t i = 0; i < candidates.size(); ++i)
        if (sel.rmse[i] <= 1.01 * best && (chosen == candidates.size() || sel.counts[i] < sel.counts[chosen])) chosen = i;
    sel.chosen = chosen;
    return sel;
}

// ---------------------------------------------------------------------------
// Leave-one-station-out

struct Station {
    std::string id;
    std::vector<Sample> readings;
};

/// Returns the covariance model and the observation noise for a training set.
using CovBuilder = std::function<std::pair<CovarianceModel, double>(std::span<const Sample>)>;

struct LosoResult {
    std::vector<std::string> station_ids;
    std::vector<double> rmse_with;
    std::vector<double> rmse_without;
    double pooled_with = 0.0;
    double pooled_without = 0.0;
    double gap() const { return pooled_without - pooled_with; }
};

inline LosoResult loso_cv(std::span<const Station> stations, std::span<const BinaryObservation> reports,
                          const ExceedanceSensorModel& sensor, const CovBuilder& cov_builder) {
    require(stations.size() >= 2, "loso_cv: need at least two stations");
    LosoResult out;
    double ss_with = 0.0, ss_without = 0.0;
    std::size_t total = 0;
    for (std::size_t h = 0; h < stations.size(); ++h) {
        require(!stations[h].readings.empty(), "loso_cv: station '" + stations[h].id + "' has no readings");
        std::vector<Sample> train;
        for (std::size_t s = 0; s < stations.size(); ++s)
            if (s != h) train.insert(train.end(), stations[s].readings.begin(), stations[s].readings.end());
        auto [cov, sigma2] = cov_builder(train);

        FusionProblem without{ObservationSet{}, cov, sigma2, sensor, {}, MomentMode::exact};
        for (const auto& s : train) without.observations.continuous.push_back({s.at, s.value});
        FusionProblem with = without;
        with.observations.binary.assign(reports.begin(), reports.end());

        const FusionSolver a(std::move(without));
        const FusionSolver b(std::move(with));
        double sw = 0.0, so = 0.0;
        for (const auto& r : stations[h].readings) {
            const double eo = a.predict_mean(r.at) - r.value;
            const double ew = b.predict_mean(r.at) - r.value;
            so += eo * eo;
            sw += ew * ew;
        }
        const auto n = static_cast<double>(stations[h].readings.size());
        out.station_ids.push_back(stations[h].id);
        out.rmse_without.push_back(std::sqrt(so / n));
        out.rmse_with.push_back(std::sqrt(sw / n));
        ss_with += sw;
        ss_without += so;
        total += stations[h].readings.size();
    }
    out.pooled_with = std::sqrt(ss_with / static_cast<double>(total));
    out.pooled_without = std::sqrt(ss_without / static_cast<double>(total));
    return out;
}

} // namespace stfuse
