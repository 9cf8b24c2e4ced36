#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace stfuse {

// Exception hierarchy. The CLI maps each family onto a stable exit code:
// usage/config/input -> 2, convergence -> 3, numerical -> 4.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InputError : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

inline constexpr double minutes_per_day = 1440.0;

//! A location-timestamp pair. `t` is minutes since the study-window origin.
struct SpaceTimePoint {
    double lon = 0.0;
    double lat = 0.0;
    double t = 0.0;

    bool valid() const { return std::isfinite(lon) && std::isfinite(lat) && std::isfinite(t) && t >= 0.0; }

    double day() const { return std::floor(t / minutes_per_day); }
    double time_of_day() const { return std::fmod(t, minutes_per_day); }

    friend bool operator==(const SpaceTimePoint&, const SpaceTimePoint&) = default;
};

// Euclidean distance on the provided coordinates; callers pre-project
// geographic coordinates.
inline double spatial_distance(const SpaceTimePoint& a, const SpaceTimePoint& b) {
    const double dx = a.lon - b.lon, dy = a.lat - b.lat;
    return std::sqrt(dx * dx + dy * dy);
}

inline double time_lag(const SpaceTimePoint& a, const SpaceTimePoint& b) { return std::abs(a.t - b.t); }

inline void require(bool cond, const char* what) {
    if (!cond) throw InputError(what);
}

inline void require(bool cond, const std::string& what) {
    if (!cond) throw InputError(what);
}

} // namespace stfuse
