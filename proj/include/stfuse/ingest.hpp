#pragma once

#include "stfuse/core.hpp"

#include <Eigen/Dense>
#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace stfuse {

// ---------------------------------------------------------------------------
// Delimited text

namespace csv {

/// Comma unless the header line contains a tab.
inline char detect_delimiter(std::string_view header) { return header.find('\t') != std::string_view::npos ? '\t' : ','; }

/// Splits one line; double quotes enclose fields and "" escapes a quote.
/// Returns nullopt on an unterminated quote.
inline std::optional<std::vector<std::string>> split(std::string_view line, char delim) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"' && cur.empty()) {
            quoted = true;
        } else if (c == delim) {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (quoted) return std::nullopt;
    out.push_back(std::move(cur));
    return out;
}

inline std::string quote(std::string_view field, char delim) {
    if (field.find_first_of(std::string{delim, '"', '\n', '\r'}) == std::string_view::npos &&
        (field.empty() || field.front() != ' '))
        return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

inline std::optional<double> parse_double(std::string_view s) {
    while (!s.empty() && (s.front() == ' ')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

/// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

inline bool getline(std::istream& in, std::string& line) {
    if (!std::getline(in, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
}

} // namespace csv

struct RowError {
    std::size_t line = 0;
    std::string message;
};

template <class T>
struct ParseResult {
    std::vector<T> records;
    std::vector<RowError> errors;
};

class SchemaError : public InputError {
public:
    using InputError::InputError;
};

// ---------------------------------------------------------------------------
// Records

struct TweetRecord {
    std::string text;
    std::string user_id;
    SpaceTimePoint where_when;
    bool is_retweet = false;
    std::vector<double> covariates;

    friend bool operator==(const TweetRecord&, const TweetRecord&) = default;
};

struct StationReading {
    std::string station_id;
    SpaceTimePoint where_when;
    double temperature = 0.0;
    std::vector<double> covariates;

    friend bool operator==(const StationReading&, const StationReading&) = default;
};

/// Maps logical fields onto header names. An empty retweet column falls
/// back to the "RT @" text prefix.
struct TweetSchema {
    std::string text = "text";
    std::string user = "user";
    std::string lon = "lon";
    std::string lat = "lat";
    std::string time = "time";
    std::string retweet;
    std::vector<std::string> covariates;
};

struct StationSchema {
    std::string station = "station";
    std::string lon = "lon";
    std::string lat = "lat";
    std::string time = "time";
    std::string temperature = "temperature";
    std::vector<std::string> covariates;
};

namespace detail {

struct Header {
    char delim = ',';
    std::map<std::string, std::size_t> index;
    std::size_t width = 0;

    std::size_t column(const std::string& name, const char* role) const {
        auto it = index.find(name);
        if (it == index.end()) throw SchemaError(std::string("schema: ") + role + " column '" + name + "' is not in the header");
        return it->second;
    }
};

inline std::optional<Header> read_header(std::istream& in) {
    std::string line;
    if (!csv::getline(in, line)) return std::nullopt;
    if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3); // UTF-8 BOM
    Header h;
    h.delim = csv::detect_delimiter(line);
    auto cols = csv::split(line, h.delim);
    if (!cols) throw SchemaError("schema: unterminated quote in the header row");
    h.width = cols->size();
    for (std::size_t i = 0; i < cols->size(); ++i) h.index.emplace((*cols)[i], i);
    return h;
}

inline std::optional<bool> parse_flag(std::string_view s) {
    if (s == "1" || s == "true" || s == "TRUE" || s == "True" || s == "yes") return true;
    if (s == "0" || s == "false" || s == "FALSE" || s == "False" || s == "no" || s.empty()) return false;
    return std::nullopt;
}

} // namespace detail

/// One record per well-formed row; malformed rows produce a RowError with
/// the 1-based line number and do not stop the parse.
inline ParseResult<TweetRecord> parse_tweets(std::istream& in, const TweetSchema& schema) {
    const auto header = detail::read_header(in);
    if (!header) throw SchemaError("parse_tweets: missing header row");
    const auto c_text = header->column(schema.text, "text");
    const auto c_user = header->column(schema.user, "user");
    const auto c_lon = header->column(schema.lon, "lon");
    const auto c_lat = header->column(schema.lat, "lat");
    const auto c_time = header->column(schema.time, "time");
    std::optional<std::size_t> c_rt;
    if (!schema.retweet.empty()) c_rt = header->column(schema.retweet, "retweet");
    std::vector<std::size_t> c_cov;
    for (const auto& c : schema.covariates) c_cov.push_back(header->column(c, "covariate"));

    ParseResult<TweetRecord> out;
    std::string line;
    for (std::size_t lineno = 2; csv::getline(in, line); ++lineno) {
        if (line.empty()) continue;
        auto fail = [&](std::string msg) { out.errors.push_back({lineno, std::move(msg)}); };
        const auto f = csv::split(line, header->delim);
        if (!f) {
            fail("unterminated quoted field");
            continue;
        }
        if (f->size() != header->width) {
            fail("expected " + std::to_string(header->width) + " fields, found " + std::to_string(f->size()));
            continue;
        }
        TweetRecord r;
        r.text = (*f)[c_text];
        r.user_id = (*f)[c_user];
        const auto lon = csv::parse_double((*f)[c_lon]);
        const auto lat = csv::parse_double((*f)[c_lat]);
        const auto t = csv::parse_double((*f)[c_time]);
        if (!lon) { fail("non-numeric " + schema.lon + " '" + (*f)[c_lon] + "'"); continue; }
        if (!lat) { fail("non-numeric " + schema.lat + " '" + (*f)[c_lat] + "'"); continue; }
        if (!t) { fail("non-numeric " + schema.time + " '" + (*f)[c_time] + "'"); continue; }
        r.where_when = {*lon, *lat, *t};
        if (!r.where_when.valid()) { fail("time must be non-negative"); continue; }
        if (c_rt) {
            const auto flag = detail::parse_flag((*f)[*c_rt]);
            if (!flag) { fail("unrecognized retweet flag '" + (*f)[*c_rt] + "'"); continue; }
            r.is_retweet = *flag;
        } else {
            r.is_retweet = r.text.rfind("RT @", 0) == 0;
        }
        bool ok = true;
        for (std::size_t k = 0; k < c_cov.size() && ok; ++k) {
            const auto v = csv::parse_double((*f)[c_cov[k]]);
            if (!v) {
                fail("non-numeric covariate " + schema.covariates[k] + " '" + (*f)[c_cov[k]] + "'");
                ok = false;
            } else {
                r.covariates.push_back(*v);
            }
        }
        if (ok) out.records.push_back(std::move(r));
    }
    return out;
}

inline ParseResult<StationReading> parse_stations(std::istream& in, const StationSchema& schema) {
    const auto header = detail::read_header(in);
    if (!header) throw SchemaError("parse_stations: missing header row");
    const auto c_id = header->column(schema.station, "station");
    const auto c_lon = header->column(schema.lon, "lon");
    const auto c_lat = header->column(schema.lat, "lat");
    const auto c_time = header->column(schema.time, "time");
    const auto c_temp = header->column(schema.temperature, "temperature");
    std::vector<std::size_t> c_cov;
    for (const auto& c : schema.covariates) c_cov.push_back(header->column(c, "covariate"));

    ParseResult<StationReading> out;
    std::string line;
    for (std::size_t lineno = 2; csv::getline(in, line); ++lineno) {
        if (line.empty()) continue;
        const auto f = csv::split(line, header->delim);
        if (!f || f->size() != header->width) {
            out.errors.push_back({lineno, f ? "expected " + std::to_string(header->width) + " fields, found " + std::to_string(f->size())
                                            : std::string("unterminated quoted field")});
            continue;
        }
        StationReading r;
        r.station_id = (*f)[c_id];
        const auto lon = csv::parse_double((*f)[c_lon]);
        const auto lat = csv::parse_double((*f)[c_lat]);
        const auto t = csv::parse_double((*f)[c_time]);
        const auto temp = csv::parse_double((*f)[c_temp]);
        if (!lon || !lat || !t || !temp) {
            out.errors.push_back({lineno, "non-numeric coordinate, time or temperature"});
            continue;
        }
        r.where_when = {*lon, *lat, *t};
        r.temperature = *temp;
        if (!r.where_when.valid()) {
            out.errors.push_back({lineno, "time must be non-negative"});
            continue;
        }
        bool ok = true;
        for (std::size_t k = 0; k < c_cov.size() && ok; ++k) {
            const auto v = csv::parse_double((*f)[c_cov[k]]);
            if (!v) {
                out.errors.push_back({lineno, "non-numeric covariate " + schema.covariates[k]});
                ok = false;
            } else {
                r.covariates.push_back(*v);
            }
        }
        if (ok) out.records.push_back(std::move(r));
    }
    return out;
}

inline std::vector<TweetRecord> exclude_retweets(std::span<const TweetRecord> records) {
    std::vector<TweetRecord> out;
    std::copy_if(records.begin(), records.end(), std::back_inserter(out), [](const TweetRecord& r) { return !r.is_retweet; });
    return out;
}

/// Writes records under the schema's column names, in the order
/// text, user, lon, lat, time, retweet, covariates.
inline void write_tweets(std::ostream& os, std::span<const TweetRecord> records, const TweetSchema& schema, char delim = ',') {
    const std::string rt = schema.retweet.empty() ? "retweet" : schema.retweet;
    os << csv::quote(schema.text, delim) << delim << csv::quote(schema.user, delim) << delim << csv::quote(schema.lon, delim)
       << delim << csv::quote(schema.lat, delim) << delim << csv::quote(schema.time, delim) << delim << csv::quote(rt, delim);
    for (const auto& c : schema.covariates) os << delim << csv::quote(c, delim);
    os << '\n';
    for (const auto& r : records) {
        os << csv::quote(r.text, delim) << delim << csv::quote(r.user_id, delim) << delim << csv::format_double(r.where_when.lon)
           << delim << csv::format_double(r.where_when.lat) << delim << csv::format_double(r.where_when.t) << delim
           << (r.is_retweet ? 1 : 0);
        for (double v : r.covariates) os << delim << csv::format_double(v);
        os << '\n';
    }
}

// ---------------------------------------------------------------------------
// Lexicon

inline std::string nfkc(std::string_view text) {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* norm = icu::Normalizer2::getNFKCInstance(status);
    if (U_FAILURE(status)) throw NumericalError(std::string("NFKC normalizer unavailable: ") + u_errorName(status));
    const icu::UnicodeString src = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
    const icu::UnicodeString dst = norm->normalize(src, status);
    if (U_FAILURE(status)) throw InputError(std::string("NFKC normalization failed: ") + u_errorName(status));
    std::string out;
    dst.toUTF8String(out);
    return out;
}

/// Deduplicated, NFKC-normalized substring patterns.
class Lexicon {
public:
    Lexicon() = default;

    explicit Lexicon(std::span<const std::string> patterns) {
        for (const auto& p : patterns) add(p);
    }

    void add(std::string_view pattern) {
        std::string p = nfkc(pattern);
        require(!p.empty(), "lexicon: empty pattern");
        patterns_.insert(std::move(p));
    }

    bool empty() const { return patterns_.empty(); }
    std::size_t size() const { return patterns_.size(); }
    const std::set<std::string>& patterns() const { return patterns_; }

    bool matches_normalized(std::string_view normalized_text) const {
        return std::any_of(patterns_.begin(), patterns_.end(),
                           [&](const std::string& p) { return normalized_text.find(p) != std::string_view::npos; });
    }

private:
    std::set<std::string> patterns_;
};

/// One pattern per line; '#' starts a comment line; surrounding
/// whitespace is trimmed and blank lines are skipped.
inline Lexicon read_lexicon(std::istream& in) {
    Lexicon lex;
    std::string line;
    while (csv::getline(in, line)) {
        const auto b = line.find_first_not_of(" \t");
        if (b == std::string::npos || line[b] == '#') continue;
        const auto e = line.find_last_not_of(" \t");
        lex.add(std::string_view(line).substr(b, e - b + 1));
    }
    return lex;
}

inline Lexicon load_lexicon(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open lexicon file '" + path + "'");
    return read_lexicon(in);
}

/// Japanese synonyms of "hot" / "hot and uncomfortable" used as the default lexicon.
inline Lexicon default_hot_lexicon() {
    static const std::vector<std::string> words = {
        "あつい", "熱い", "暑", "猛暑", "炎天下", "真夏日", "残暑", "熱中症", "バテ", "寝苦しい",
        "夏本番", "日差し", "照り", "湿度", "湿気", "汗", "ジメジメ", "ムシムシ", "ベタベタ", "蒸し",
        "水分補給", "体調管理", "猛烈に", "だるい", "死ぬ", "異常", "不快感", "不快", "イヤ", "嫌",
        "クソ", "Orz", "きつい", "辛い", "大変", "しんどい", "厳しい", "苦手"};
    return Lexicon(words);
}

inline int match_hot(const TweetRecord& tweet, const Lexicon& lexicon) {
    require(!lexicon.empty(), "match_hot: lexicon is empty");
    return lexicon.matches_normalized(nfkc(tweet.text)) ? 1 : 0;
}

// ---------------------------------------------------------------------------
// Detrending

struct DetrendModel {
    Eigen::VectorXd coefficients;
    std::vector<std::string> covariate_names;
    double residual_sd = 0.0;

    double fitted(std::span<const double> covariates) const {
        require(static_cast<Eigen::Index>(covariates.size()) == coefficients.size(), "detrend: covariate count mismatch");
        return Eigen::Map<const Eigen::VectorXd>(covariates.data(), coefficients.size()).dot(coefficients);
    }
};

struct DetrendResult {
    DetrendModel model;
    std::vector<double> residuals;
};

/// Ordinary least squares of temperature on the covariate matrix (one row
/// per reading; include a column of ones for an intercept).
inline DetrendResult detrend(std::span<const double> temperatures, const Eigen::MatrixXd& covariates,
                             std::vector<std::string> names) {
    const auto n = static_cast<Eigen::Index>(temperatures.size());
    const Eigen::Index p = covariates.cols();
    require(covariates.rows() == n, "detrend: one covariate row per reading is required");
    require(static_cast<Eigen::Index>(names.size()) == p, "detrend: one name per covariate column is required");
    require(n > p, "detrend: need more readings than covariates");
    require(covariates.allFinite(), "detrend: non-finite covariate");
    const Eigen::Map<const Eigen::VectorXd> y(temperatures.data(), n);
    require(y.allFinite(), "detrend: non-finite temperature");

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(covariates);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) {
        std::string cols;
        const auto& perm = qr.colsPermutation().indices();
        for (Eigen::Index k = qr.rank(); k < p; ++k) cols += (cols.empty() ? "" : ", ") + names[static_cast<std::size_t>(perm[k])];
        throw InputError("detrend: covariate matrix is rank deficient; collinear column(s): " + cols);
    }
    DetrendResult r;
    r.model.coefficients = qr.solve(y);
    r.model.covariate_names = std::move(names);
    const Eigen::VectorXd res = y - covariates * r.model.coefficients;
    r.residuals.assign(res.data(), res.data() + n);
    r.model.residual_sd = std::sqrt(res.squaredNorm() / static_cast<double>(n - p));
    return r;
}

} // namespace stfuse
