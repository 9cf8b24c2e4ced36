// stfuse: command-line driver for ingestion, covariance fitting, fused
// interpolation, dependence analysis and the simulation benchmark.

#include "stfuse/config.hpp"
#include "stfuse/covariance.hpp"
#include "stfuse/dependence.hpp"
#include "stfuse/ingest.hpp"
#include "stfuse/lowrank_em.hpp"
#include "stfuse/params.hpp"
#include "stfuse/sblue.hpp"
#include "stfuse/simbench.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#ifndef STFUSE_VERSION
#define STFUSE_VERSION "0.0.0"
#endif
#ifndef STFUSE_BUILD_TYPE
#define STFUSE_BUILD_TYPE "unknown"
#endif

namespace {

using namespace stfuse;
namespace fs = std::filesystem;

enum Exit { ok = 0, usage = 2, convergence = 3, numerical = 4 };

// Every config key the CLI understands. Keys inside a [section] are
// addressed as section.key both in files and in the table below.
const std::set<std::string> known_keys{
    "run.seed", "run.threads",
    "ingest.tweets", "ingest.stations", "ingest.lexicon", "ingest.out_dir", "ingest.keep_retweets", "ingest.skip_bad_rows",
    "tweets.text", "tweets.user", "tweets.lon", "tweets.lat", "tweets.time", "tweets.retweet", "tweets.covariates",
    "stations.station", "stations.lon", "stations.lat", "stations.time", "stations.temperature", "stations.covariates",
    "fit.observations", "fit.engine", "fit.out", "fit.space_bins", "fit.time_bins", "fit.space_cutoff", "fit.time_cutoff",
    "fit.anchor_grid", "fit.anchor_times", "fit.blocks", "fit.max_iterations", "fit.tolerance", "fit.ridge", "fit.init",
    "interpolate.model", "interpolate.observations", "interpolate.binary", "interpolate.with_binary", "interpolate.out",
    "interpolate.grid_file", "interpolate.grid_x", "interpolate.grid_y", "interpolate.grid_t", "interpolate.moments",
    "sensor.threshold", "sensor.p_exceed", "sensor.p_not",
    "depend.input", "depend.x", "depend.y", "depend.out", "depend.density_grid", "depend.density_out", "depend.penalty",
    "depend.basis_size",
    "bench.table", "bench.quick", "bench.replications", "bench.out", "bench.anchor_grid",
};

/// Flag values collected per subcommand, applied on top of the config file.
struct Overrides {
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;
    std::map<std::string, bool> flags;

    void option(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
        options[key] = app->add_option(flag, values[key], help);
    }
    void flag(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
        app->add_flag(flag, flags[key], help);
    }
    void apply(Config& cfg) const {
        for (const auto& [key, o] : options)
            if (o->count() > 0) cfg.set(key, values.at(key));
        for (const auto& [key, on] : flags)
            if (on) cfg.set(key, "true");
    }
};

bool truthy(const std::string& s) { return s == "1" || s == "true" || s == "yes" || s == "on"; }

std::string required(const Config& cfg, const std::string& key) {
    const std::string v = cfg.get(key, "");
    if (v.empty()) throw ConfigError("missing required setting '" + key + "'");
    return v;
}

std::ofstream open_out(const std::string& path) {
    if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
    std::ofstream os(path);
    if (!os) throw InputError("cannot write '" + path + "'");
    return os;
}

std::vector<double> numbers(const std::vector<std::string>& items, const std::string& what) {
    std::vector<double> out;
    for (const auto& s : items) {
        const auto v = csv::parse_double(s);
        if (!v) throw ConfigError(what + ": '" + s + "' is not a number");
        out.push_back(*v);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Observation files: header lon,lat,t,y

std::vector<ContinuousObservation> read_observations(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open observation file '" + path + "'");
    std::string line;
    if (!csv::getline(in, line)) return {};
    const char delim = csv::detect_delimiter(line);
    const auto head = csv::split(line, delim);
    const std::vector<std::string> want{"lon", "lat", "t", "y"};
    if (!head || *head != want) throw InputError(path + ":1: expected header lon,lat,t,y");
    std::vector<ContinuousObservation> out;
    for (std::size_t lineno = 2; csv::getline(in, line); ++lineno) {
        if (line.empty()) continue;
        const auto f = csv::split(line, delim);
        if (!f || f->size() != 4) throw InputError(path + ":" + std::to_string(lineno) + ": expected 4 fields");
        std::array<double, 4> v{};
        for (std::size_t k = 0; k < 4; ++k) {
            const auto d = csv::parse_double((*f)[k]);
            if (!d) throw InputError(path + ":" + std::to_string(lineno) + ": non-numeric " + want[k] + " '" + (*f)[k] + "'");
            v[k] = *d;
        }
        const SpaceTimePoint at{v[0], v[1], v[2]};
        if (!at.valid() || !std::isfinite(v[3])) throw InputError(path + ":" + std::to_string(lineno) + ": invalid observation");
        out.push_back({at, v[3]});
    }
    return out;
}

void write_observations(const std::string& path, std::span<const ContinuousObservation> obs) {
    auto os = open_out(path);
    os << "lon,lat,t,y\n";
    for (const auto& o : obs)
        os << csv::format_double(o.at.lon) << ',' << csv::format_double(o.at.lat) << ',' << csv::format_double(o.at.t) << ','
           << csv::format_double(o.y) << '\n';
}

void write_trace(const std::string& path, std::span<const double> trace) {
    auto os = open_out(path);
    os << "iteration,value\n";
    for (std::size_t i = 0; i < trace.size(); ++i) os << i << ',' << csv::format_double(trace[i]) << '\n';
}

// ---------------------------------------------------------------------------
// ingest

int cmd_ingest(const Config& cfg) {
    TweetSchema ts;
    ts.text = cfg.get("tweets.text", ts.text);
    ts.user = cfg.get("tweets.user", ts.user);
    ts.lon = cfg.get("tweets.lon", ts.lon);
    ts.lat = cfg.get("tweets.lat", ts.lat);
    ts.time = cfg.get("tweets.time", ts.time);
    ts.retweet = cfg.get("tweets.retweet", ts.retweet);
    ts.covariates = cfg.get_list("tweets.covariates");
    StationSchema ss;
    ss.station = cfg.get("stations.station", ss.station);
    ss.lon = cfg.get("stations.lon", ss.lon);
    ss.lat = cfg.get("stations.lat", ss.lat);
    ss.time = cfg.get("stations.time", ss.time);
    ss.temperature = cfg.get("stations.temperature", ss.temperature);
    ss.covariates = cfg.get_list("stations.covariates");

    const std::string tweets_path = required(cfg, "ingest.tweets");
    const std::string stations_path = required(cfg, "ingest.stations");
    const std::string out_dir = cfg.get("ingest.out_dir", ".");
    const bool skip_bad = truthy(cfg.get("ingest.skip_bad_rows", "false"));

    const Lexicon lexicon = cfg.has("ingest.lexicon") ? load_lexicon(cfg.get("ingest.lexicon", "")) : default_hot_lexicon();
    if (lexicon.empty()) throw InputError("lexicon has no patterns");

    auto report_errors = [&](const std::string& path, const std::vector<RowError>& errors) {
        for (const auto& e : errors) std::cerr << path << ":" << e.line << ": " << e.message << '\n';
        if (!errors.empty() && !skip_bad) throw InputError(path + ": " + std::to_string(errors.size()) + " malformed row(s)");
    };

    std::ifstream tin(tweets_path);
    if (!tin) throw InputError("cannot open tweet file '" + tweets_path + "'");
    const auto tweets = parse_tweets(tin, ts);
    report_errors(tweets_path, tweets.errors);
    std::ifstream sin(stations_path);
    if (!sin) throw InputError("cannot open station file '" + stations_path + "'");
    const auto stations = parse_stations(sin, ss);
    report_errors(stations_path, stations.errors);

    const bool keep_rt = truthy(cfg.get("ingest.keep_retweets", "false"));
    const std::vector<TweetRecord> used = keep_rt ? tweets.records : exclude_retweets(tweets.records);
    std::vector<ContinuousObservation> binary;
    std::size_t hot = 0;
    for (const auto& t : used) {
        const int h = match_hot(t, lexicon);
        hot += static_cast<std::size_t>(h);
        binary.push_back({t.where_when, static_cast<double>(h)});
    }

    // intercept plus the configured covariates
    const auto n = static_cast<Eigen::Index>(stations.records.size());
    Eigen::MatrixXd x(n, static_cast<Eigen::Index>(ss.covariates.size() + 1));
    std::vector<double> temps;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = stations.records[static_cast<std::size_t>(i)];
        x(i, 0) = 1.0;
        for (std::size_t k = 0; k < r.covariates.size(); ++k) x(i, static_cast<Eigen::Index>(k + 1)) = r.covariates[k];
        temps.push_back(r.temperature);
    }
    std::vector<std::string> names{"intercept"};
    names.insert(names.end(), ss.covariates.begin(), ss.covariates.end());
    const DetrendResult dt = detrend(temps, x, names);
    std::vector<ContinuousObservation> continuous;
    for (std::size_t i = 0; i < stations.records.size(); ++i) continuous.push_back({stations.records[i].where_when, dt.residuals[i]});

    write_observations((fs::path(out_dir) / "continuous.csv").string(), continuous);
    write_observations((fs::path(out_dir) / "binary.csv").string(), binary);
    auto rep = open_out((fs::path(out_dir) / "ingest_report.txt").string());
    rep << "tweets_read = " << tweets.records.size() << '\n'
        << "tweets_rejected = " << tweets.errors.size() << '\n'
        << "retweets_excluded = " << tweets.records.size() - used.size() << '\n'
        << "tweets_used = " << used.size() << '\n'
        << "hot = " << hot << '\n'
        << "hot_rate = " << (used.empty() ? std::string("nan") : csv::format_double(static_cast<double>(hot) / static_cast<double>(used.size())))
        << '\n'
        << "stations_read = " << stations.records.size() << '\n'
        << "stations_rejected = " << stations.errors.size() << '\n'
        << "residual_sd = " << csv::format_double(dt.model.residual_sd) << '\n';
    for (std::size_t k = 0; k < names.size(); ++k)
        rep << "trend." << names[k] << " = " << csv::format_double(dt.model.coefficients[static_cast<Eigen::Index>(k)]) << '\n';
    return ok;
}

// ---------------------------------------------------------------------------
// fit

struct Extent {
    double x0, x1, y0, y1, t0, t1;
};

Extent extent_of(std::span<const ContinuousObservation> obs) {
    Extent e{obs[0].at.lon, obs[0].at.lon, obs[0].at.lat, obs[0].at.lat, obs[0].at.t, obs[0].at.t};
    for (const auto& o : obs) {
        e.x0 = std::min(e.x0, o.at.lon), e.x1 = std::max(e.x1, o.at.lon);
        e.y0 = std::min(e.y0, o.at.lat), e.y1 = std::max(e.y1, o.at.lat);
        e.t0 = std::min(e.t0, o.at.t), e.t1 = std::max(e.t1, o.at.t);
    }
    return e;
}

std::vector<double> even_edges(double hi, int bins) {
    std::vector<double> e;
    for (int k = 0; k <= bins; ++k) e.push_back(hi * k / bins);
    return e;
}

int cmd_fit(const Config& cfg) {
    const std::string engine = cfg.get("fit.engine", "kernel");
    if (engine != "kernel" && engine != "basis") throw ConfigError("fit: --engine must be 'kernel' or 'basis', got '" + engine + "'");
    const auto obs = read_observations(required(cfg, "fit.observations"));
    const std::string out = required(cfg, "fit.out");
    const std::string trace_path = out + ".trace";
    if (obs.size() < 3) throw InputError("fit: need at least 3 observations");
    std::vector<SpaceTimePoint> pts;
    std::vector<double> y;
    for (const auto& o : obs) pts.push_back(o.at), y.push_back(o.y);
    const Extent ext = extent_of(obs);
    const bool one_time = ext.t1 == ext.t0;

    FittedModel model;
    if (engine == "kernel") {
        const double diag = std::hypot(ext.x1 - ext.x0, ext.y1 - ext.y0);
        const double s_cut = cfg.get_double("fit.space_cutoff", diag / 3.0);
        const auto s_bins = static_cast<int>(cfg.get_int("fit.space_bins", 15));
        std::vector<double> t_edges{0.0, 1.0};
        if (!one_time)
            t_edges = even_edges(cfg.get_double("fit.time_cutoff", (ext.t1 - ext.t0) / 2.0),
                                 static_cast<int>(cfg.get_int("fit.time_bins", 10)));
        if (s_bins < 1 || !(s_cut > 0)) throw ConfigError("fit: bad spatial binning");
        const auto vg = empirical_variogram(pts, y, even_edges(s_cut, s_bins), t_edges);
        for (const auto& w : vg.warnings) std::cerr << "warning: " << w << '\n';
        WlsOptions opt;
        opt.free = (one_time ? params_spatial : params_spatiotemporal) | param_nugget;
        const WlsFit fit = fit_product_sum_wls(vg, default_wls_init(vg, opt.free & ~param_nugget), opt);
        write_trace(trace_path, fit.objective_trace);
        for (const auto& w : fit.warnings) std::cerr << "warning: " << w << '\n';
        if (fit.degenerate) throw NumericalError("fit: degenerate variogram (all semivariances zero)");
        if (!fit.converged) throw ConvergenceError("fit: WLS did not converge; trace written to " + trace_path);
        model.kernel = fit.kernel;
        model.sigma2 = std::max(fit.nugget, 1e-8 * fit.kernel.sill());
    } else {
        const auto g = static_cast<int>(cfg.get_int("fit.anchor_grid", 3));
        const auto nt = static_cast<int>(cfg.get_int("fit.anchor_times", one_time ? 1 : 3));
        if (g < 1 || nt < 1) throw ConfigError("fit: anchor_grid and anchor_times must be >= 1");
        std::vector<SpaceTimePoint> locs;
        for (int i = 0; i < g; ++i)
            for (int j = 0; j < g; ++j)
                locs.push_back({g == 1 ? 0.5 * (ext.x0 + ext.x1) : ext.x0 + (ext.x1 - ext.x0) * i / (g - 1),
                                g == 1 ? 0.5 * (ext.y0 + ext.y1) : ext.y0 + (ext.y1 - ext.y0) * j / (g - 1), 0.0});
        const auto blocks = static_cast<unsigned>(cfg.get_int("fit.blocks", one_time ? block_spatial : block_all));
        const double span_xy = std::max(ext.x1 - ext.x0, ext.y1 - ext.y0);
        const double extent = span_xy > 0 ? span_xy : 1.0;
        const AnchorLayout layout = one_time ? make_layout([&] {
            for (auto& l : locs) l.t = ext.t0;
            return locs;
        }(), blocks, extent, 1.0)
                                             : make_anchors(locs, nt, ext.t0, ext.t1, blocks, extent);
        EMConfig ec;
        ec.max_iterations = static_cast<int>(cfg.get_int("fit.max_iterations", ec.max_iterations));
        ec.tolerance = cfg.get_double("fit.tolerance", ec.tolerance);
        ec.ridge = cfg.get_double("fit.ridge", 0.0);
        ec.seed = static_cast<std::uint64_t>(cfg.get_int("run.seed", 1));
        const std::string init = cfg.get("fit.init", "random");
        if (init == "random") ec.init_b = EMInit::data_scaled_random;
        else if (init == "least_squares") ec.init_b = EMInit::least_squares;
        else throw ConfigError("fit: init must be 'random' or 'least_squares'");
        const EMResult em = fit_em(pts, y, layout, ec);
        write_trace(trace_path, em.loglik_trace);
        if (!em.converged)
            throw ConvergenceError("fit: EM did not converge in " + std::to_string(em.iterations) + " iterations; trace written to " +
                                   trace_path);
        model.lowrank = LowRankModel{em.coeffs, layout};
        model.sigma2 = em.coeffs.sigma2;
    }
    auto os = open_out(out);
    write_model(os, model);
    return ok;
}

// ---------------------------------------------------------------------------
// interpolate

std::vector<SpaceTimePoint> read_grid_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open grid file '" + path + "'");
    std::string line;
    if (!csv::getline(in, line)) return {};
    const char delim = csv::detect_delimiter(line);
    const auto head = csv::split(line, delim);
    if (!head || head->size() < 3 || (*head)[0] != "lon" || (*head)[1] != "lat" || (*head)[2] != "t")
        throw InputError(path + ":1: expected header lon,lat,t");
    std::vector<SpaceTimePoint> out;
    for (std::size_t lineno = 2; csv::getline(in, line); ++lineno) {
        if (line.empty()) continue;
        const auto f = csv::split(line, delim);
        std::optional<double> a, b, c;
        if (f && f->size() >= 3) a = csv::parse_double((*f)[0]), b = csv::parse_double((*f)[1]), c = csv::parse_double((*f)[2]);
        if (!a || !b || !c) throw InputError(path + ":" + std::to_string(lineno) + ": expected numeric lon,lat,t");
        out.push_back({*a, *b, *c});
    }
    return out;
}

std::vector<double> axis(const Config& cfg, const std::string& key) {
    const auto v = numbers(cfg.get_list(key), key);
    if (v.size() != 3 || v[2] < 0 || v[2] != std::floor(v[2])) throw ConfigError(key + " must be lo,hi,count");
    std::vector<double> out;
    const auto n = static_cast<int>(v[2]);
    for (int i = 0; i < n; ++i) out.push_back(n == 1 ? 0.5 * (v[0] + v[1]) : v[0] + (v[1] - v[0]) * i / (n - 1));
    return out;
}

int cmd_interpolate(const Config& cfg) {
    const FittedModel model = load_model(required(cfg, "interpolate.model"));
    FusionProblem p{ObservationSet{}, model.covariance(), model.sigma2, {}, {}, MomentMode::exact};
    const auto cont = read_observations(required(cfg, "interpolate.observations"));
    p.observations.continuous = cont;
    const bool with_binary = truthy(cfg.get("interpolate.with_binary", "false"));
    if (with_binary) {
        for (const auto& o : read_observations(required(cfg, "interpolate.binary"))) {
            if (o.y != 0.0 && o.y != 1.0) throw InputError("interpolate: binary observations must be 0 or 1");
            p.observations.binary.push_back({o.at, static_cast<int>(o.y)});
        }
        p.sensor.threshold = cfg.get_double("sensor.threshold", 0.0);
        p.sensor.p_given_exceed = cfg.get_double("sensor.p_exceed", p.sensor.p_given_exceed);
        p.sensor.p_given_not = cfg.get_double("sensor.p_not", p.sensor.p_given_not);
        const std::string mode = cfg.get("interpolate.moments", "exact");
        if (mode == "plugin") {
            p.mode = MomentMode::plugin;
            if (model.lowrank) {
                for (const auto& b : p.observations.binary)
                    p.plugin_field.push_back(plug_in_field(model.lowrank->coeffs, model.lowrank->layout, b.at));
            } else {
                // kernel engine: plug-in values from the continuous-only predictor
                const FusionSolver base(FusionProblem{ObservationSet{cont, {}}, p.cov, p.sigma2, {}, {}, MomentMode::exact});
                for (const auto& b : p.observations.binary) p.plugin_field.push_back(base.predict_mean(b.at));
            }
        } else if (mode != "exact") {
            throw ConfigError("interpolate: moments must be 'exact' or 'plugin'");
        }
    }

    std::vector<SpaceTimePoint> grid;
    if (cfg.has("interpolate.grid_file")) {
        grid = read_grid_file(cfg.get("interpolate.grid_file", ""));
    } else {
        const auto xs = axis(cfg, "interpolate.grid_x");
        const auto ys = axis(cfg, "interpolate.grid_y");
        auto ts = numbers(cfg.get_list("interpolate.grid_t"), "interpolate.grid_t");
        if (ts.empty()) ts.push_back(0.0);
        for (double t : ts)
            for (double yv : ys)
                for (double xv : xs) grid.push_back({xv, yv, t});
    }

    auto os = open_out(required(cfg, "interpolate.out"));
    os << "x,y,t,f_hat,mse\n";
    if (grid.empty()) return ok;
    const FusionSolver solver(std::move(p));
    for (const auto& e : solver.predict_many(grid))
        os << csv::format_double(e.at.lon) << ',' << csv::format_double(e.at.lat) << ',' << csv::format_double(e.at.t) << ','
           << csv::format_double(e.f_hat) << ',' << csv::format_double(e.mse) << '\n';
    return ok;
}

// ---------------------------------------------------------------------------
// depend

int cmd_depend(const Config& cfg) {
    const std::string path = required(cfg, "depend.input");
    std::ifstream in(path);
    if (!in) throw InputError("cannot open input file '" + path + "'");
    std::string line;
    if (!csv::getline(in, line)) throw InputError(path + ": empty file");
    const char delim = csv::detect_delimiter(line);
    const auto head = csv::split(line, delim);
    if (!head || head->size() < 2) throw InputError(path + ":1: need at least two columns");
    auto column = [&](const std::string& key, std::size_t fallback) {
        if (!cfg.has(key)) return fallback;
        const std::string name = cfg.get(key, "");
        const auto it = std::find(head->begin(), head->end(), name);
        if (it == head->end()) throw InputError(path + ": column '" + name + "' is not in the header");
        return static_cast<std::size_t>(it - head->begin());
    };
    const std::size_t cx = column("depend.x", 0), cy = column("depend.y", 1);
    std::vector<double> xs, ys;
    for (std::size_t lineno = 2; csv::getline(in, line); ++lineno) {
        if (line.empty()) continue;
        const auto f = csv::split(line, delim);
        if (!f || f->size() <= std::max(cx, cy)) throw InputError(path + ":" + std::to_string(lineno) + ": too few fields");
        const auto a = csv::parse_double((*f)[cx]);
        const auto b = csv::parse_double((*f)[cy]);
        if (!a || !b || !std::isfinite(*a) || !std::isfinite(*b))
            throw InputError(path + ":" + std::to_string(lineno) + ": non-numeric value");
        xs.push_back(*a), ys.push_back(*b);
    }
    if (xs.size() < 100)
        throw InputError("depend: tail dependence needs at least 100 paired samples (the 80th-99th percentile sweep is "
                         "meaningless below that); got " + std::to_string(xs.size()));

    Eigen::MatrixX2d samples(static_cast<Eigen::Index>(xs.size()), 2);
    for (std::size_t i = 0; i < xs.size(); ++i) samples.row(static_cast<Eigen::Index>(i)) << xs[i], ys[i];
    const PseudoSample ps = pseudo_observations(samples);
    const auto upper = tail_dependence(ps, Tail::upper);
    const auto lower = tail_dependence(ps, Tail::lower);

    auto os = open_out(required(cfg, "depend.out"));
    os << "n = " << xs.size() << '\n';
    os << "pearson = " << csv::format_double(pearson_correlation(xs, ys)) << '\n';
    os << "lambda_upper_mean = " << csv::format_double(upper.mean_lambda) << '\n';
    os << "lambda_lower_mean = " << csv::format_double(lower.mean_lambda) << '\n';
    auto zeros = [](const TailDependenceEstimate& e) {
        std::string s;
        for (int p : e.zero_copula_percentiles) s += (s.empty() ? "" : ",") + std::to_string(p);
        return s;
    };
    os << "zero_copula_upper = " << zeros(upper) << '\n';
    os << "zero_copula_lower = " << zeros(lower) << '\n';
    os << "tail,percentile,lambda\n";
    for (const auto& [pct, l] : upper.per_percentile) os << "upper," << pct << ',' << csv::format_double(l) << '\n';
    for (const auto& [pct, l] : lower.per_percentile) os << "lower," << pct << ',' << csv::format_double(l) << '\n';

    if (cfg.has("depend.density_grid")) {
        const auto g = static_cast<int>(cfg.get_int("depend.density_grid", 20));
        CopulaBasisSpec spec;
        spec.size = static_cast<int>(cfg.get_int("depend.basis_size", spec.size));
        const auto est = fit_spline_copula(ps, spec, cfg.get_double("depend.penalty", 1.0));
        auto ds = open_out(required(cfg, "depend.density_out"));
        ds << "u1,u2,density\n";
        for (const auto& c : copula_density_grid(est, g))
            ds << csv::format_double(c.u1) << ',' << csv::format_double(c.u2) << ',' << csv::format_double(c.density) << '\n';
    }
    return ok;
}

// ---------------------------------------------------------------------------
// bench

int cmd_bench(const Config& cfg) {
    SimConfig sc;
    sc.seed = static_cast<std::uint64_t>(cfg.get_int("run.seed", static_cast<long long>(sc.seed)));
    sc.threads = static_cast<int>(cfg.get_int("run.threads", 1));
    sc.anchor_grid = static_cast<int>(cfg.get_int("bench.anchor_grid", sc.anchor_grid));
    sc.replications = static_cast<int>(cfg.get_int("bench.replications", truthy(cfg.get("bench.quick", "false")) ? 20 : 200));
    sc.validate();
    const auto table = cfg.get_int("bench.table", 0);
    BenchReport rep;
    if (table == 5) rep = run_table5(sc);
    else if (table == 6) rep = run_table6(sc);
    else if (table == 7) rep = run_table7(sc);
    else throw ConfigError("bench: --table must be 5, 6 or 7");
    if (cfg.has("bench.out")) {
        auto os = open_out(cfg.get("bench.out", ""));
        write_report(os, rep);
    } else {
        write_report(std::cout, rep);
    }
    return ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spatiotemporal field fusion of station readings and binary reports"};
    app.require_subcommand(0, 1);
    app.fallthrough();
    std::string config_path;
    app.add_option("--config", config_path, "key = value config file; flags override it");
    std::string threads, seed;
    app.add_option("--threads", threads, "worker threads (1 gives bitwise reproducible output)");
    app.add_option("--seed", seed, "master seed");
    bool version = false;
    app.add_flag("--version", version, "print build metadata and exit");

    struct Sub {
        CLI::App* app;
        Overrides ov;
        int (*run)(const Config&);
    };
    std::vector<std::unique_ptr<Sub>> subs;
    auto sub = [&](const char* name, const char* help, int (*run)(const Config&)) {
        subs.push_back(std::make_unique<Sub>(Sub{app.add_subcommand(name, help), {}, run}));
        return subs.back().get();
    };
    auto opt = [](Sub* s, const std::string& flag, const std::string& key, const std::string& help) {
        s->ov.option(s->app, flag, key, help);
    };

    Sub* ingest = sub("ingest", "normalize tweets and station readings into observation files", cmd_ingest);
    opt(ingest, "--tweets", "ingest.tweets", "tweet CSV/TSV");
    opt(ingest, "--stations", "ingest.stations", "station CSV/TSV");
    opt(ingest, "--lexicon", "ingest.lexicon", "hot lexicon, one pattern per line (default: built-in)");
    opt(ingest, "--out-dir", "ingest.out_dir", "output directory");
    ingest->ov.flag(ingest->app, "--keep-retweets", "ingest.keep_retweets", "do not drop retweets");
    ingest->ov.flag(ingest->app, "--skip-bad-rows", "ingest.skip_bad_rows", "report malformed rows but continue");

    Sub* fit = sub("fit", "fit a covariance model to continuous observations", cmd_fit);
    opt(fit, "--observations", "fit.observations", "lon,lat,t,y file");
    opt(fit, "--engine", "fit.engine", "kernel | basis");
    opt(fit, "--out", "fit.out", "model file (trace goes to <out>.trace)");
    opt(fit, "--anchor-grid", "fit.anchor_grid", "basis engine: anchors per spatial axis");
    opt(fit, "--anchor-times", "fit.anchor_times", "basis engine: anchor times");
    opt(fit, "--max-iterations", "fit.max_iterations", "basis engine: EM iteration cap");
    opt(fit, "--tolerance", "fit.tolerance", "basis engine: EM stopping tolerance");

    Sub* interp = sub("interpolate", "predict the field on a grid", cmd_interpolate);
    opt(interp, "--model", "interpolate.model", "model file from fit");
    opt(interp, "--observations", "interpolate.observations", "continuous lon,lat,t,y file");
    opt(interp, "--binary", "interpolate.binary", "binary lon,lat,t,y file");
    opt(interp, "--out", "interpolate.out", "prediction file");
    opt(interp, "--grid-file", "interpolate.grid_file", "lon,lat,t prediction sites");
    opt(interp, "--grid-x", "interpolate.grid_x", "lo,hi,count");
    opt(interp, "--grid-y", "interpolate.grid_y", "lo,hi,count");
    opt(interp, "--grid-t", "interpolate.grid_t", "comma separated times");
    interp->ov.flag(interp->app, "--with-binary", "interpolate.with_binary", "fuse binary reports");

    Sub* depend = sub("depend", "correlation and tail dependence of two columns", cmd_depend);
    opt(depend, "--input", "depend.input", "two-column CSV");
    opt(depend, "--x", "depend.x", "first column name");
    opt(depend, "--y", "depend.y", "second column name");
    opt(depend, "--out", "depend.out", "report file");
    opt(depend, "--density-grid", "depend.density_grid", "cells per axis for the copula density grid");
    opt(depend, "--density-out", "depend.density_out", "copula density grid file");
    opt(depend, "--penalty", "depend.penalty", "roughness penalty for the copula density");
    opt(depend, "--basis-size", "depend.basis_size", "cubic B-splines per axis for the copula density");

    Sub* bench = sub("bench", "simulation benchmark tables", cmd_bench);
    opt(bench, "--table", "bench.table", "5 | 6 | 7");
    opt(bench, "--replications", "bench.replications", "replications per configuration");
    opt(bench, "--out", "bench.out", "report file (default stdout)");
    bench->ov.flag(bench->app, "--quick", "bench.quick", "20 replications");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : usage;
    }
    if (version) {
        std::cout << "stfuse " << STFUSE_VERSION << '\n'
                  << "build " << STFUSE_BUILD_TYPE << '\n'
                  << environment_note(1).substr(0, environment_note(1).rfind(';')) << '\n';
        return ok;
    }

    Sub* chosen = nullptr;
    for (auto& s : subs)
        if (s->app->parsed()) chosen = s.get();
    if (!chosen) {
        std::cerr << app.help();
        return usage;
    }

    try {
        Config cfg(known_keys);
        if (!config_path.empty()) cfg.load(config_path);
        if (!threads.empty()) cfg.set("run.threads", threads);
        if (!seed.empty()) cfg.set("run.seed", seed);
        chosen->ov.apply(cfg);
        std::cerr << "# resolved config\n";
        cfg.dump(std::cerr);
        return chosen->run(cfg);
    } catch (const ConvergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return convergence;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return numerical;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return usage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return usage;
    }
}
