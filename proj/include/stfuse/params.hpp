#pragma once

#include "stfuse/config.hpp"
#include "stfuse/covariance.hpp"
#include "stfuse/ingest.hpp"

#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace stfuse {

/// A fitted covariance model plus observation noise, as written by `fit`
/// and read by `interpolate`. Serialized as key = value text.
struct FittedModel {
    std::optional<ProductSumKernel> kernel;
    std::optional<LowRankModel> lowrank;
    double sigma2 = 1.0;

    CovarianceModel covariance() const {
        if (kernel) return CovarianceModel(*kernel);
        require(lowrank.has_value(), "fitted model: no engine");
        return CovarianceModel(*lowrank);
    }
};

namespace detail {

inline std::string join_numbers(std::span<const double> v, const char* sep = ",") {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += sep;
        out += csv::format_double(v[i]);
    }
    return out;
}

inline std::vector<double> numbers(const Config& c, const std::string& key) {
    std::vector<double> out;
    for (const auto& s : c.get_list(key)) {
        const auto v = csv::parse_double(s);
        if (!v) throw ConfigError("model: '" + key + "' has a non-numeric entry: " + s);
        out.push_back(*v);
    }
    return out;
}

} // namespace detail

inline const std::set<std::string>& model_keys() {
    static const std::set<std::string> keys{"engine",          "noise.sigma2",    "kernel.sigma2_s", "kernel.sigma2_t",
                                            "kernel.sigma2_st", "kernel.r_s",     "kernel.r_t",      "layout.blocks",
                                            "layout.anchors",  "layout.r_tilde_s", "layout.r_tilde_t", "basis.b"};
    return keys;
}

inline void write_model(std::ostream& os, const FittedModel& m) {
    auto num = [](double v) { return csv::format_double(v); };
    if (m.kernel) {
        const auto& k = *m.kernel;
        os << "engine = kernel\n";
        os << "noise.sigma2 = " << num(m.sigma2) << '\n';
        os << "[kernel]\n";
        os << "sigma2_s = " << num(k.sigma2_s) << "\nsigma2_t = " << num(k.sigma2_t) << "\nsigma2_st = " << num(k.sigma2_st)
           << "\nr_s = " << num(k.r_s) << "\nr_t = " << num(k.r_t) << '\n';
        return;
    }
    require(m.lowrank.has_value(), "write_model: no engine");
    const auto& lr = *m.lowrank;
    os << "engine = basis\n";
    os << "noise.sigma2 = " << num(m.sigma2) << '\n';
    os << "[layout]\n";
    os << "blocks = " << lr.layout.blocks << '\n';
    // flat lon,lat,t triples
    std::vector<double> flat;
    for (const auto& a : lr.layout.anchors) flat.insert(flat.end(), {a.lon, a.lat, a.t});
    os << "anchors = " << detail::join_numbers(flat) << '\n';
    os << "r_tilde_s = " << num(lr.layout.r_tilde_s) << "\nr_tilde_t = " << num(lr.layout.r_tilde_t) << '\n';
    os << "[basis]\n";
    os << "b = " << detail::join_numbers(std::span<const double>(lr.coeffs.b.data(), static_cast<std::size_t>(lr.coeffs.b.size())))
       << '\n';
}

inline FittedModel read_model(const Config& c) {
    FittedModel m;
    m.sigma2 = c.get_double("noise.sigma2", -1.0);
    if (!(m.sigma2 > 0.0)) throw ConfigError("model: noise.sigma2 must be positive");
    const std::string engine = c.get("engine", "");
    if (engine == "kernel") {
        ProductSumKernel k;
        k.sigma2_s = c.get_double("kernel.sigma2_s", 0.0);
        k.sigma2_t = c.get_double("kernel.sigma2_t", 0.0);
        k.sigma2_st = c.get_double("kernel.sigma2_st", 0.0);
        k.r_s = c.get_double("kernel.r_s", 1.0);
        k.r_t = c.get_double("kernel.r_t", 1.0);
        if (!k.valid()) throw ConfigError("model: invalid kernel parameters");
        m.kernel = k;
    } else if (engine == "basis") {
        const auto flat = detail::numbers(c, "layout.anchors");
        if (flat.empty() || flat.size() % 3 != 0) throw ConfigError("model: layout.anchors must hold lon,lat,t triples");
        std::vector<SpaceTimePoint> anchors;
        for (std::size_t i = 0; i < flat.size(); i += 3) anchors.push_back({flat[i], flat[i + 1], flat[i + 2]});
        const auto blocks = c.get_int("layout.blocks", block_all);
        if (blocks < 1 || blocks > block_all) throw ConfigError("model: layout.blocks must be in 1..7");
        AnchorLayout layout = make_layout(std::move(anchors), static_cast<unsigned>(blocks), 1.0, 1.0);
        layout.r_tilde_s = c.get_double("layout.r_tilde_s", layout.r_tilde_s);
        layout.r_tilde_t = c.get_double("layout.r_tilde_t", layout.r_tilde_t);
        const auto b = detail::numbers(c, "basis.b");
        if (b.size() != layout.dimension())
            throw ConfigError("model: basis.b has " + std::to_string(b.size()) + " entries, layout needs " +
                              std::to_string(layout.dimension()));
        LowRankModel lr;
        lr.layout = std::move(layout);
        lr.coeffs.b = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
        lr.coeffs.sigma2 = m.sigma2;
        m.lowrank = std::move(lr);
    } else {
        throw ConfigError("model: engine must be 'kernel' or 'basis', got '" + engine + "'");
    }
    return m;
}

inline FittedModel load_model(const std::string& path) {
    Config c(model_keys());
    c.load(path);
    return read_model(c);
}

} // namespace stfuse
