#pragma once

// JSON (de)serialization for the core value types and experiment reports,
// plus the CSV writer used by the CLI. CSV files carry exactly one
// '#'-prefixed metadata line; everything below it is deterministic given
// (config, seed).

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "unisep/channels.hpp"
#include "unisep/core.hpp"
#include "unisep/oracle.hpp"
#include "unisep/stack.hpp"
#include "unisep/trials.hpp"
#include "unisep/typecalc.hpp"

namespace unisep {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Formatting
// ---------------------------------------------------------------------------

/// Fixed shortest-roundtrip-ish formatting so reruns emit identical bytes.
inline std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return std::string(buf);
}

// ---------------------------------------------------------------------------
// JSON for core types
// ---------------------------------------------------------------------------

inline Json to_json(const Pmf& p) { return Json{{"weights", p.weights()}}; }

inline Pmf pmf_from_json(const Json& j, const std::string& path) {
    if (!j.is_object() || !j.contains("weights"))
        throw ConfigError(path, "expected an object with a 'weights' array");
    const Json& w = j.at("weights");
    if (!w.is_array() || w.empty()) throw ConfigError(path + "/weights", "expected a non-empty array");
    std::vector<double> weights;
    weights.reserve(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (!w[i].is_number())
            throw ConfigError(path + "/weights/" + std::to_string(i), "expected a number");
        weights.push_back(w[i].get<double>());
    }
    try {
        return Pmf(std::move(weights));
    } catch (const std::exception& e) {
        throw ConfigError(path + "/weights", e.what());
    }
}

inline Json to_json(const DistortionSpec& d) {
    return Json{{"matrix", d.matrix()}, {"budget", d.budget()}};
}

inline DistortionSpec distortion_from_json(const Json& j, const std::string& path) {
    if (!j.is_object() || !j.contains("matrix") || !j.contains("budget"))
        throw ConfigError(path, "expected an object with 'matrix' and 'budget'");
    const Json& m = j.at("matrix");
    if (!m.is_array() || m.empty()) throw ConfigError(path + "/matrix", "expected a non-empty array of rows");
    std::vector<std::vector<double>> matrix;
    for (std::size_t r = 0; r < m.size(); ++r) {
        if (!m[r].is_array() || m[r].empty())
            throw ConfigError(path + "/matrix/" + std::to_string(r), "expected a non-empty row");
        std::vector<double> row;
        for (std::size_t c = 0; c < m[r].size(); ++c) {
            if (!m[r][c].is_number())
                throw ConfigError(path + "/matrix/" + std::to_string(r) + "/" + std::to_string(c),
                                  "expected a number");
            row.push_back(m[r][c].get<double>());
        }
        matrix.push_back(std::move(row));
    }
    if (!j.at("budget").is_number()) throw ConfigError(path + "/budget", "expected a number");
    try {
        return DistortionSpec(matrix, j.at("budget").get<double>());
    } catch (const std::exception& e) {
        throw ConfigError(path, e.what());
    }
}

// ---------------------------------------------------------------------------
// JSON for reports
// ---------------------------------------------------------------------------

inline Json to_json(const MembershipReport& r) {
    Json pts = Json::array();
    for (const auto& p : r.points)
        pts.push_back(Json{{"n", p.n},
                           {"p_hat", p.p_hat},
                           {"ci_half_width", p.ci_half_width},
                           {"trials", p.trials}});
    return Json{{"points", pts}};
}

inline Json to_json(const OutcomeHistogram& h) {
    Json tags = Json::object();
    for (std::size_t i = 0; i < kTrialTagCount; ++i) {
        const TrialTag tag = static_cast<TrialTag>(i);
        tags[std::string(to_string(tag))] =
            Json{{"count", h.count(tag)}, {"fraction", h.fraction(tag)}};
    }
    return Json{{"trials", h.total()},
                {"tags", tags},
                {"success_fraction", h.success_fraction()},
                {"error_fraction", h.error_fraction()}};
}

inline Json to_json(const RdPoint& r) {
    return Json{{"D", r.D},
                {"R", r.R},
                {"iterations", r.iterations},
                {"gap", r.gap},
                {"clamped", r.clamped}};
}

inline Json to_json(const ThresholdEstimate& t) {
    return Json{{"alpha", t.alpha},
                {"alpha_channel", t.alpha_channel},
                {"alpha_source", t.alpha_source},
                {"qY_channel", t.qY_channel.weights()},
                {"qY_source", t.qY_source.weights()},
                {"grid_step", t.grid_step},
                {"n", t.n},
                {"fit_lengths", t.fit_lengths},
                {"side_gap", t.side_gap},
                {"agreement_tolerance", t.agreement_tolerance}};
}

inline Json to_json(const LayerStack& s) {
    Json layers = Json::array();
    for (const Layer& l : s.layers)
        layers.push_back(Json{{"label", l.label}, {"seed", l.base_seed}});
    Json j{{"layers", layers}, {"block_length", s.block_length}};
    if (s.inner_channel) j["inner_channel"] = s.inner_channel->descriptor();
    if (!s.warnings.empty()) j["warnings"] = s.warnings;
    return j;
}

inline Json to_json(const std::vector<ChannelEvalReport>& reports) {
    Json arr = Json::array();
    for (const auto& r : reports)
        arr.push_back(Json{{"channel", r.descriptor},
                           {"failures", r.failures},
                           {"trials", r.trials},
                           {"failure_fraction", r.failure_fraction}});
    return arr;
}

// ---------------------------------------------------------------------------
// Channel construction from config JSON
// ---------------------------------------------------------------------------

/// Builds a channel from {"kind": "identity"|"constant"|"bsc"|"dmc"|
/// "source_code", ...}. source_code channels are blocklength-parametric and
/// derive their codebooks from the given seed.
inline GeneralChannel channel_from_json(const Json& j, const std::string& path) {
    if (!j.is_object() || !j.contains("kind")) throw ConfigError(path, "expected an object with 'kind'");
    const std::string kind = j.at("kind").get<std::string>();
    auto require = [&](const char* field) -> const Json& {
        if (!j.contains(field)) throw ConfigError(path, std::string("missing field '") + field + "'");
        return j.at(field);
    };
    try {
        if (kind == "identity") return make_identity(require("alphabet").get<std::size_t>());
        if (kind == "constant")
            return make_constant(require("alphabet").get<std::size_t>(),
                                 require("alphabet").get<std::size_t>(),
                                 require("symbol").get<Symbol>());
        if (kind == "bsc") return make_binary_symmetric(require("flip").get<double>());
        if (kind == "burst")
            return make_burst_corruptor(require("alphabet").get<std::size_t>(),
                                        require("fraction").get<double>());
        if (kind == "dmc")
            return make_dmc("dmc", require("matrix").get<std::vector<std::vector<double>>>());
        if (kind == "source_code") {
            const Pmf q = pmf_from_json(require("qY"), path + "/qY");
            const Pmf p = pmf_from_json(require("pmf"), path + "/pmf");
            const DistortionSpec d = distortion_from_json(require("distortion"), path + "/distortion");
            const double eps = require("eps").get<double>();
            const double rate = require("rate").get<double>();
            const std::uint64_t seed = require("seed").get<std::uint64_t>();
            return source_code_channel_family(rate, q, SourceCodeRule{p, d, TypicalityParams(eps)},
                                              CommonRandomness(seed));
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(path, e.what());
    }
    throw ConfigError(path + "/kind", "unknown channel kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Writes a CSV file whose first line is a single '#' comment (the only place
/// a timestamp may appear) followed by a header row and the body rows.
inline void write_csv(const std::string& file, const std::string& comment,
                      const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw Error("write_csv: cannot open " + file);
    out << "# " << comment << "\n";
    for (std::size_t i = 0; i < header.size(); ++i)
        out << header[i] << (i + 1 < header.size() ? "," : "");
    out << "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            out << row[i] << (i + 1 < row.size() ? "," : "");
        out << "\n";
    }
}

inline void write_json(const std::string& file, const Json& j) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw Error("write_json: cannot open " + file);
    out << j.dump(2) << "\n";
}

} // namespace unisep
