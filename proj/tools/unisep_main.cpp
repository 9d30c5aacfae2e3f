// Batch experiment driver. Subcommands: rd, sweep, trials, membership,
// separate. Each reads a JSON config, validates it fully before any
// computation, and writes one CSV (single '#' metadata line, deterministic
// body) plus a mirroring JSON summary into the output directory.
//
// Exit codes: 0 success, 2 config error, 3 resource limit,
// 4 oracle non-convergence.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "unisep/io.hpp"
#include "unisep/unisep.hpp"

namespace fs = std::filesystem;
using namespace unisep;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed_override;
    unsigned threads = 1;
};

Json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("/", "cannot open config file " + path);
    Json j;
    try {
        j = Json::parse(in);
    } catch (const std::exception& e) {
        throw ConfigError("/", std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("/", "config must be a JSON object");
    return j;
}

const Json& require_field(const Json& j, const std::string& base, const char* name) {
    if (!j.contains(name)) throw ConfigError(base + "/" + name, "missing required field");
    return j.at(name);
}

double require_number(const Json& j, const std::string& base, const char* name) {
    const Json& v = require_field(j, base, name);
    if (!v.is_number()) throw ConfigError(base + "/" + name, "expected a number");
    return v.get<double>();
}

std::uint64_t require_uint(const Json& j, const std::string& base, const char* name) {
    const Json& v = require_field(j, base, name);
    if (!v.is_number_unsigned())
        throw ConfigError(base + "/" + name, "expected a non-negative integer");
    return v.get<std::uint64_t>();
}

std::string require_string(const Json& j, const std::string& base, const char* name) {
    const Json& v = require_field(j, base, name);
    if (!v.is_string()) throw ConfigError(base + "/" + name, "expected a string");
    return v.get<std::string>();
}

double optional_number(const Json& j, const std::string& base, const char* name,
                       double fallback) {
    if (!j.contains(name)) return fallback;
    if (!j.at(name).is_number()) throw ConfigError(base + "/" + name, "expected a number");
    return j.at(name).get<double>();
}

std::uint64_t resolve_seed(const Json& j, const CommonArgs& args) {
    if (args.seed_override) return *args.seed_override;
    if (!j.contains("seed")) throw ConfigError("/seed", "missing (and no --seed given)");
    if (!j.at("seed").is_number_unsigned())
        throw ConfigError("/seed", "expected a non-negative integer");
    return j.at("seed").get<std::uint64_t>();
}

std::vector<double> parse_grid(const Json& j, const std::string& path) {
    std::vector<double> grid;
    if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (!j[i].is_number())
                throw ConfigError(path + "/" + std::to_string(i), "expected a number");
            grid.push_back(j[i].get<double>());
        }
    } else if (j.is_object()) {
        const double lo = require_number(j, path, "min");
        const double hi = require_number(j, path, "max");
        const std::uint64_t count = require_uint(j, path, "count");
        if (count < 2) throw ConfigError(path + "/count", "expected >= 2");
        if (!(hi >= lo)) throw ConfigError(path + "/max", "expected max >= min");
        for (std::uint64_t i = 0; i < count; ++i)
            grid.push_back(lo + (hi - lo) * double(i) / double(count - 1));
    } else {
        throw ConfigError(path, "expected an array or {min, max, count}");
    }
    if (grid.empty()) throw ConfigError(path, "empty grid");
    return grid;
}

std::string timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

std::string header_comment(const std::string& cmd, std::uint64_t seed,
                           const std::string& note = "") {
    std::string h = "unisep " + cmd + " seed=" + std::to_string(seed) +
                    " generated=" + timestamp();
    if (!note.empty()) h += " note=\"" + note + "\"";
    return h;
}

void write_outputs(const CommonArgs& args, const std::string& name,
                   const std::string& comment, const std::vector<std::string>& header,
                   const std::vector<std::vector<std::string>>& rows, const Json& summary) {
    fs::create_directories(args.out_dir);
    write_csv((fs::path(args.out_dir) / (name + ".csv")).string(), comment, header, rows);
    write_json((fs::path(args.out_dir) / (name + ".json")).string(), summary);
}

// ---------------------------------------------------------------------------
// rd: rate-distortion curve via the Blahut-Arimoto oracle
// ---------------------------------------------------------------------------

int cmd_rd(const CommonArgs& args) {
    const Json cfg = load_config(args.config_path);
    const std::uint64_t seed = resolve_seed(cfg, args);
    const Pmf p = pmf_from_json(require_field(cfg, "", "pmf"), "/pmf");
    const DistortionSpec d = distortion_from_json(require_field(cfg, "", "distortion"),
                                                  "/distortion");
    if (d.input_size() != p.size())
        throw ConfigError("/distortion/matrix", "row count must equal |pmf|");
    const std::vector<double> grid = parse_grid(require_field(cfg, "", "d_grid"), "/d_grid");
    const double tol = optional_number(cfg, "", "tol", 1e-9);
    if (!(tol > 0)) throw ConfigError("/tol", "expected > 0");

    std::vector<std::vector<std::string>> rows;
    Json points = Json::array();
    for (double D : grid) {
        const RdPoint pt = blahut_arimoto(p, d, D, tol);
        if (pt.clamped)
            std::cerr << "warning: D=" << D << " clamped to " << pt.D << "\n";
        rows.push_back({fmt_double(pt.D), fmt_double(pt.R), std::to_string(pt.iterations),
                        fmt_double(pt.gap)});
        points.push_back(to_json(pt));
    }
    Json summary{{"command", "rd"}, {"seed", seed}, {"points", points}};
    write_outputs(args, "rd", header_comment("rd", seed), {"D", "R", "iterations", "gap"},
                  rows, summary);
    return 0;
}

// ---------------------------------------------------------------------------
// sweep: q_Y optimization and phase-transition survival curve
// ---------------------------------------------------------------------------

int cmd_sweep(const CommonArgs& args) {
    const Json cfg = load_config(args.config_path);
    const std::uint64_t seed = resolve_seed(cfg, args);
    const Pmf p = pmf_from_json(require_field(cfg, "", "pmf"), "/pmf");
    const DistortionSpec d = distortion_from_json(require_field(cfg, "", "distortion"),
                                                  "/distortion");
    const double eps = require_number(cfg, "", "eps");
    if (!(eps > 0)) throw ConfigError("/eps", "expected > 0");
    const std::uint64_t n = require_uint(cfg, "", "n");
    if (n < 8) throw ConfigError("/n", "expected >= 8");
    const double grid_step = require_number(cfg, "", "grid_step");
    if (!(grid_step > 0 && grid_step <= 0.5)) throw ConfigError("/grid_step", "expected in (0, 0.5]");
    const std::vector<double> rates = parse_grid(require_field(cfg, "", "r_grid"), "/r_grid");
    std::string side = "channel";
    if (cfg.contains("side")) {
        side = require_string(cfg, "", "side");
        if (side != "channel" && side != "source")
            throw ConfigError("/side", "expected 'channel' or 'source'");
    }

    const ThresholdEstimate est =
        optimize_qY(p, d, TypicalityParams(eps), static_cast<std::size_t>(n), grid_step,
                    args.threads);
    const Pmf& qstar = side == "channel" ? est.qY_channel : est.qY_source;
    const TypeVector qcounts = quantize_type(qstar, static_cast<std::size_t>(n));
    const LogProb F = side == "channel"
                          ? exact_F_chan(static_cast<std::size_t>(n), qcounts, p, d,
                                         TypicalityParams(eps))
                          : exact_F_src(static_cast<std::size_t>(n), quantize_type(p, n),
                                        qcounts, d);
    const auto curve = phase_transition_curve(static_cast<std::size_t>(n), rates, F);

    std::vector<std::string> header;
    for (std::size_t s = 0; s < qstar.size(); ++s) header.push_back("qy" + std::to_string(s));
    header.insert(header.end(), {"n", "R", "logF", "survival"});
    std::vector<std::vector<std::string>> rows;
    for (const auto& [R, survival] : curve) {
        std::vector<std::string> row;
        for (double w : qstar.weights()) row.push_back(fmt_double(w));
        row.push_back(std::to_string(n));
        row.push_back(fmt_double(R));
        row.push_back(fmt_double(F.value));
        row.push_back(fmt_double(survival));
        rows.push_back(std::move(row));
    }
    Json summary{{"command", "sweep"},
                 {"seed", seed},
                 {"side", side},
                 {"threshold", to_json(est)},
                 {"logF", F.value},
                 {"midpoint_rate", midpoint_rate(static_cast<std::size_t>(n), F)},
                 {"curve", Json::array()}};
    for (const auto& [R, survival] : curve)
        summary["curve"].push_back(Json{{"R", R}, {"survival", survival}});
    write_outputs(args, "sweep", header_comment("sweep", seed), header, rows, summary);
    return 0;
}

// ---------------------------------------------------------------------------
// trials: channel / source / converse Monte Carlo histograms
// ---------------------------------------------------------------------------

int cmd_trials(const CommonArgs& args) {
    const Json cfg = load_config(args.config_path);
    const std::uint64_t seed = resolve_seed(cfg, args);
    const std::string mode = require_string(cfg, "", "mode");
    if (mode != "channel" && mode != "source" && mode != "converse")
        throw ConfigError("/mode", "expected 'channel', 'source', or 'converse'");
    const Pmf p = pmf_from_json(require_field(cfg, "", "pmf"), "/pmf");
    const DistortionSpec d = distortion_from_json(require_field(cfg, "", "distortion"),
                                                  "/distortion");
    const double eps = require_number(cfg, "", "eps");
    if (!(eps > 0)) throw ConfigError("/eps", "expected > 0");
    const std::size_t n = static_cast<std::size_t>(require_uint(cfg, "", "n"));
    if (n == 0) throw ConfigError("/n", "expected >= 1");
    const double R = require_number(cfg, "", "R");
    if (!(R >= 0)) throw ConfigError("/R", "expected >= 0");
    const std::uint64_t trials = require_uint(cfg, "", "trials");
    if (trials == 0) throw ConfigError("/trials", "expected >= 1");

    const CommonRandomness cr(seed);
    OutcomeHistogram hist;
    Json extra = Json::object();
    if (mode == "channel") {
        const GeneralChannel c =
            channel_from_json(require_field(cfg, "", "channel"), "/channel");
        hist = run_channel_trials(c, n, R, p, d, TypicalityParams(eps), trials,
                                  cr.derived("channel_trials"), kDefaultCodebookCap,
                                  args.threads);
        extra["channel"] = c.descriptor();
    } else if (mode == "source") {
        const Pmf q = cfg.contains("qY") ? pmf_from_json(cfg.at("qY"), "/qY") : p;
        if (q.size() != d.output_size())
            throw ConfigError("/qY", "size must match the distortion matrix columns");
        hist = run_source_trials(p, d, TypicalityParams(eps), n, R, q, trials,
                                 cr.derived("source_trials"), kDefaultCodebookCap,
                                 args.threads);
        extra["qY"] = to_json(q);
    } else {
        const double Rs = require_number(cfg, "", "Rs");
        if (!(Rs >= 0)) throw ConfigError("/Rs", "expected >= 0");
        std::optional<Pmf> q;
        if (cfg.contains("qY")) q = pmf_from_json(cfg.at("qY"), "/qY");
        const ConverseResult res = run_converse_experiment(
            Rs, R, n, p, d, TypicalityParams(eps), trials, cr.derived("converse"),
            q ? &*q : nullptr, kDefaultCodebookCap, args.threads);
        hist = res.histogram;
        extra["Rs"] = Rs;
        extra["error_fraction"] = res.error_fraction;
        extra["inner_codebook_size"] = res.inner_codebook_size;
        extra["attack_codebook_size"] = res.attack_codebook_size;
        extra["distinct_outputs"] = res.distinct_outputs;
    }

    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < kTrialTagCount; ++i) {
        const TrialTag tag = static_cast<TrialTag>(i);
        rows.push_back({std::string(to_string(tag)), std::to_string(hist.count(tag)),
                        fmt_double(hist.fraction(tag))});
    }
    Json summary{{"command", "trials"}, {"mode", mode}, {"seed", seed},
                 {"histogram", to_json(hist)}};
    for (auto& [k, v] : extra.items()) summary[k] = v;
    write_outputs(args, "trials", header_comment("trials " + mode, seed),
                  {"tag", "count", "fraction"}, rows, summary);
    return 0;
}

// ---------------------------------------------------------------------------
// membership: excess-distortion estimates across block lengths
// ---------------------------------------------------------------------------

int cmd_membership(const CommonArgs& args) {
    const Json cfg = load_config(args.config_path);
    const std::uint64_t seed = resolve_seed(cfg, args);
    const Pmf p = pmf_from_json(require_field(cfg, "", "pmf"), "/pmf");
    const DistortionSpec d = distortion_from_json(require_field(cfg, "", "distortion"),
                                                  "/distortion");
    const GeneralChannel c = channel_from_json(require_field(cfg, "", "channel"), "/channel");
    const Json& ns_json = require_field(cfg, "", "ns");
    if (!ns_json.is_array() || ns_json.empty())
        throw ConfigError("/ns", "expected a non-empty array of block lengths");
    std::vector<std::size_t> ns;
    for (std::size_t i = 0; i < ns_json.size(); ++i) {
        if (!ns_json[i].is_number_unsigned() || ns_json[i].get<std::uint64_t>() == 0)
            throw ConfigError("/ns/" + std::to_string(i), "expected a positive integer");
        ns.push_back(ns_json[i].get<std::size_t>());
    }
    const std::uint64_t trials = require_uint(cfg, "", "trials");
    if (trials == 0) throw ConfigError("/trials", "expected >= 1");
    const double threshold = optional_number(cfg, "", "threshold", 0.05);

    const MembershipReport report = estimate_membership(
        c, p, d, ns, trials, CommonRandomness(seed).derived("membership"), args.threads);

    std::vector<std::vector<std::string>> rows;
    for (const auto& pt : report.points)
        rows.push_back({std::to_string(pt.n), fmt_double(pt.p_hat),
                        fmt_double(pt.ci_half_width), std::to_string(pt.trials)});
    Json summary{{"command", "membership"},
                 {"seed", seed},
                 {"channel", c.descriptor()},
                 {"threshold", threshold},
                 {"indicates_membership", report.indicates_membership(threshold)},
                 {"report", to_json(report)}};
    write_outputs(args, "membership", header_comment("membership", seed),
                  {"n", "p_hat", "ci", "trials"}, rows, summary);
    return 0;
}

// ---------------------------------------------------------------------------
// separate: layered architectures end to end
// ---------------------------------------------------------------------------

int cmd_separate(const CommonArgs& args) {
    const Json cfg = load_config(args.config_path);
    const std::uint64_t seed = resolve_seed(cfg, args);
    const std::string mode = require_string(cfg, "", "mode");
    if (mode != "separation" && mode != "reliable_on_lossy")
        throw ConfigError("/mode", "expected 'separation' or 'reliable_on_lossy'");
    const Pmf p = pmf_from_json(require_field(cfg, "", "pmf"), "/pmf");
    const DistortionSpec d = distortion_from_json(require_field(cfg, "", "distortion"),
                                                  "/distortion");
    const double eps = require_number(cfg, "", "eps");
    if (!(eps > 0)) throw ConfigError("/eps", "expected > 0");
    const std::size_t n = static_cast<std::size_t>(require_uint(cfg, "", "n"));
    if (n == 0) throw ConfigError("/n", "expected >= 1");
    const double R = require_number(cfg, "", "R");
    const std::uint64_t trials = require_uint(cfg, "", "trials");
    if (trials == 0) throw ConfigError("/trials", "expected >= 1");
    const std::string metric_name = require_string(cfg, "", "metric");
    if (metric_name != "distortion" && metric_name != "message-error")
        throw ConfigError("/metric", "expected 'distortion' or 'message-error'");
    const EvalMetric metric = metric_name == "distortion" ? EvalMetric::ExcessDistortion
                                                          : EvalMetric::MessageError;
    const Json& set_json = require_field(cfg, "", "channel_set");
    if (!set_json.is_array() || set_json.empty())
        throw ConfigError("/channel_set", "expected a non-empty array");
    std::vector<GeneralChannel> members;
    for (std::size_t i = 0; i < set_json.size(); ++i)
        members.push_back(channel_from_json(set_json[i], "/channel_set/" + std::to_string(i)));
    const std::string note = cfg.contains("note") ? require_string(cfg, "", "note") : "";

    const CommonRandomness cr(seed);
    LayerStack stack;
    if (mode == "separation") {
        const double Rs = require_number(cfg, "", "Rs");
        std::optional<DistortionSpec> channel_d;
        if (cfg.contains("channel_budget")) {
            const double cb = require_number(cfg, "", "channel_budget");
            if (!(cb >= 0)) throw ConfigError("/channel_budget", "expected >= 0");
            channel_d = d.with_budget(cb);
        }
        std::optional<Pmf> qY;
        if (cfg.contains("qY")) qY = pmf_from_json(cfg.at("qY"), "/qY");
        stack = build_separation_system(p, d, TypicalityParams(eps), n, R, Rs,
                                        cr.derived("stack"), channel_d,
                                        qY ? &*qY : nullptr);
    } else {
        const GeneralChannel lossy =
            channel_from_json(require_field(cfg, "", "lossy"), "/lossy");
        const double mthreshold = optional_number(cfg, "", "membership_threshold", 0.25);
        const std::uint64_t mtrials = static_cast<std::uint64_t>(
            optional_number(cfg, "", "membership_trials", 200));
        stack = build_reliable_on_lossy(lossy, p, d, TypicalityParams(eps), n, R,
                                        cr.derived("stack"), nullptr, mthreshold,
                                        static_cast<std::size_t>(mtrials));
        for (const auto& w : stack.warnings) std::cerr << "warning: " << w << "\n";
    }

    const auto reports = evaluate_end_to_end(stack, ChannelSet(members), metric, trials,
                                             cr.derived("eval"), args.threads);

    std::vector<std::vector<std::string>> rows;
    for (const auto& r : reports)
        rows.push_back({r.descriptor, std::to_string(r.failures), std::to_string(r.trials),
                        fmt_double(r.failure_fraction)});
    Json summary{{"command", "separate"},
                 {"mode", mode},
                 {"seed", seed},
                 {"metric", metric_name},
                 {"stack", to_json(stack)},
                 {"reports", to_json(reports)}};
    if (!note.empty()) summary["note"] = note;
    write_outputs(args, "separate", header_comment("separate " + mode, seed, note),
                  {"channel", "failures", "trials", "failure_fraction"}, rows, summary);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"operational source-channel coding experiments"};
    app.require_subcommand(1);

    CommonArgs args;
    std::uint64_t seed_value = 0;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", args.config_path, "JSON experiment config")->required();
        sub->add_option("--out", args.out_dir, "output directory (default: .)");
        sub->add_option("--seed", seed_value, "override the config seed")
            ->each([&](const std::string& s) { args.seed_override = std::stoull(s); });
        sub->add_option("--threads", args.threads, "worker threads (default: 1)");
    };

    CLI::App* rd = app.add_subcommand("rd", "rate-distortion curve (oracle)");
    CLI::App* sweep = app.add_subcommand("sweep", "q_Y optimization and survival curve");
    CLI::App* trials = app.add_subcommand("trials", "Monte Carlo coding trials");
    CLI::App* membership = app.add_subcommand("membership", "excess-distortion estimates");
    CLI::App* separate = app.add_subcommand("separate", "layered architectures");
    for (CLI::App* sub : {rd, sweep, trials, membership, separate}) add_common(sub);

    CLI11_PARSE(app, argc, argv);

    try {
        if (rd->parsed()) return cmd_rd(args);
        if (sweep->parsed()) return cmd_sweep(args);
        if (trials->parsed()) return cmd_trials(args);
        if (membership->parsed()) return cmd_membership(args);
        if (separate->parsed()) return cmd_separate(args);
    } catch (const ConfigError& e) {
        std::cerr << "config error at " << e.what() << "\n";
        return 2;
    } catch (const ResourceLimit& e) {
        std::cerr << "resource limit: " << e.what() << "\n";
        return 3;
    } catch (const NoConvergence& e) {
        std::cerr << "no convergence: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
