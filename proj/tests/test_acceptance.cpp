// Acceptance suite: one test per criterion, each printing a single
// [PASS]/[FAIL] line with its runtime. Every tolerance is pinned here.

#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "unisep/io.hpp"
#include "unisep/unisep.hpp"
#include "test_util.hpp"

using namespace unisep;
namespace fs = std::filesystem;

namespace {

const Pmf kHalf{0.5, 0.5};
constexpr unsigned kThreads = 2;

class CriterionReport {
public:
    CriterionReport(int number, std::string title)
        : number_(number), title_(std::move(title)),
          start_(std::chrono::steady_clock::now()) {}

    void check(const std::string& what, bool ok) {
        checks_.emplace_back(what, ok);
        all_ok_ = all_ok_ && ok;
    }

    void finish(double runtime_budget_seconds = 0.0) {
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        if (runtime_budget_seconds > 0.0)
            check("runtime " + std::to_string(elapsed) + "s within " +
                      std::to_string(runtime_budget_seconds) + "s",
                  elapsed < runtime_budget_seconds);
        std::printf("[%s] criterion %d: %s (%.1fs)\n", all_ok_ ? "PASS" : "FAIL", number_,
                    title_.c_str(), elapsed);
        for (const auto& [what, ok] : checks_)
            if (!ok) std::printf("       failed: %s\n", what.c_str());
        std::fflush(stdout);
        for (const auto& [what, ok] : checks_) {
            INFO("criterion " << number_ << ": " << what);
            CHECK(ok);
        }
    }

private:
    int number_;
    std::string title_;
    std::chrono::steady_clock::time_point start_;
    std::vector<std::pair<std::string, bool>> checks_;
    bool all_ok_ = true;
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

} // namespace

TEST_CASE("criterion 1: Blahut-Arimoto oracle matches the binary closed form") {
    CriterionReport rep(1, "oracle correctness (BA vs 1 - h(D))");
    const DistortionSpec ham = DistortionSpec::hamming(2, 0.0);
    for (double D : {0.05, 0.11, 0.2, 0.3}) {
        const RdPoint pt = blahut_arimoto(kHalf, ham, D, 1e-10);
        const double want = 1.0 - testutil::binary_entropy(D);
        rep.check("R(" + fmt(D) + ") = " + fmt(pt.R) + " vs " + fmt(want) + " within 1e-3",
                  std::abs(pt.R - want) <= 1e-3);
    }
    const RdPoint at_max = blahut_arimoto(kHalf, ham, 0.5, 1e-10);
    rep.check("R(D_max) = 0 exactly", at_max.R == 0.0);
    rep.finish(1.0);
}

TEST_CASE("criterion 2: exact F equals brute-force summation") {
    CriterionReport rep(2, "exact_F_chan / exact_F_src vs exhaustive oracles");
    SplitMix64 rng(20240817);
    std::size_t instances = 0, nontrivial = 0;
    double worst = 0.0;
    while (instances < 24) {
        const std::size_t n = 2 + rng.bounded(7); // 2..8
        const std::size_t xs = 2 + rng.bounded(2);
        const std::size_t ys = 2 + rng.bounded(2);
        std::vector<double> w(xs);
        for (auto& v : w) v = 0.05 + rng.uniform01();
        const Pmf p = Pmf::normalized(std::move(w));
        std::vector<std::vector<double>> m(xs, std::vector<double>(ys));
        for (auto& row : m)
            for (auto& v : row) v = 2.0 * rng.uniform01();
        const DistortionSpec d(m, rng.uniform01() * 2.2);
        const TypicalityParams eps(0.05 + 0.55 * rng.uniform01());
        std::vector<std::uint64_t> qc(ys, 0), xc(xs, 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++qc[rng.bounded(ys)];
            ++xc[rng.bounded(xs)];
        }
        const TypeVector qY(std::move(qc)), xcounts(std::move(xc));

        const LogProb ec = exact_F_chan(n, qY, p, d, eps);
        const LogProb bc = brute_force_F_chan(n, qY, p, d, eps);
        const LogProb es = exact_F_src(n, xcounts, qY, d);
        const LogProb bs = brute_force_F_src(n, xcounts, qY, d);
        auto close = [&](double a, double b) {
            if (b == kNegInfinity || a == kNegInfinity) return a == b;
            const double diff = std::abs(a - b) / std::max(1.0, std::abs(b));
            worst = std::max(worst, diff);
            return diff <= 1e-10;
        };
        rep.check("instance " + std::to_string(instances) + " (n=" + std::to_string(n) +
                      ", |X|=" + std::to_string(xs) + ", |Y|=" + std::to_string(ys) +
                      ") channel side",
                  close(ec.value, bc.value));
        rep.check("instance " + std::to_string(instances) + " source side",
                  close(es.value, bs.value));
        if (!bc.is_impossible() && bc.value < -1e-6) ++nontrivial;
        ++instances;
    }
    rep.check("nontrivial instances observed (" + std::to_string(nontrivial) + ")",
              nontrivial >= 6);
    rep.check("worst relative log-domain deviation " + fmt(worst) + " <= 1e-10",
              worst <= 1e-10);
    rep.finish(60.0);
}

TEST_CASE("criterion 3: operational threshold matches the rate-distortion oracle") {
    CriterionReport rep(3, "q_Y-optimized decay exponent vs Blahut-Arimoto at D=0.11");
    const DistortionSpec d = DistortionSpec::hamming(2, 0.11);
    const double oracle = blahut_arimoto(kHalf, d, 0.11, 1e-10).R;
    const ThresholdEstimate est =
        optimize_qY(kHalf, d, TypicalityParams(0.02), 800, 0.02, kThreads);
    rep.check("channel-side alpha " + fmt(est.alpha_channel) + " vs R(D) " + fmt(oracle) +
                  " within 0.05",
              std::abs(est.alpha_channel - oracle) <= 0.05);
    rep.check("source-side alpha " + fmt(est.alpha_source) + " vs R(D) " + fmt(oracle) +
                  " within 0.05",
              std::abs(est.alpha_source - oracle) <= 0.05);
    rep.check("side gap " + fmt(est.side_gap) + " within reported tolerance " +
                  fmt(est.agreement_tolerance),
              est.side_gap <= est.agreement_tolerance);
    rep.finish(600.0);
}

TEST_CASE("criterion 4: the survival curve has a sharp, monotone phase transition") {
    CriterionReport rep(4, "(1 - F)^{2^{nR}} phase transition at n=400");
    const DistortionSpec d = DistortionSpec::hamming(2, 0.11);
    const TypicalityParams eps(0.02);
    const ThresholdEstimate est = optimize_qY(kHalf, d, eps, 800, 0.02, kThreads);
    const std::size_t n = 400;
    const LogProb F = exact_F_chan(n, quantize_type(est.qY_channel, n), kHalf, d, eps);
    const double below = survival_probability(n, est.alpha - 0.1, F);
    const double above = survival_probability(n, est.alpha + 0.1, F);
    rep.check("survival(alpha - 0.1) = " + fmt(below) + " > 0.99", below > 0.99);
    rep.check("survival(alpha + 0.1) = " + fmt(above) + " < 0.01", above < 0.01);

    std::vector<double> rates;
    for (int i = 0; i <= 100; ++i) rates.push_back(0.01 * i);
    const auto curve = phase_transition_curve(n, rates, F);
    bool monotone = true;
    bool in_range = true;
    for (std::size_t i = 0; i < curve.size(); ++i) {
        if (i + 1 < curve.size() && curve[i].second < curve[i + 1].second) monotone = false;
        if (curve[i].second < 0.0 || curve[i].second > 1.0) in_range = false;
    }
    rep.check("curve monotone non-increasing over the full R-grid", monotone);
    rep.check("curve values within [0, 1]", in_range);
    const double mid = midpoint_rate(n, F);
    const double at_mid = survival_probability(n, mid, F);
    rep.check("midpoint rate " + fmt(mid) + " sits inside the 0.01..0.99 window",
              at_mid > 0.01 && at_mid < 0.99);
    rep.finish(300.0);
}

TEST_CASE("criterion 5: Monte Carlo source coding achieves above R(D) and fails far below") {
    CriterionReport rep(5, "covering success at n=40, D=0.2 (R(D) ~ 0.278)");
    const DistortionSpec d = DistortionSpec::hamming(2, 0.2);
    const TypicalityParams eps(0.16);
    const CommonRandomness cr(501);
    const auto good = run_source_trials(kHalf, d, eps, 40, 0.45, kHalf, 2000,
                                        cr.derived("good"), kDefaultCodebookCap, kThreads);
    rep.check("success fraction at R=0.45: " + fmt(good.success_fraction()) + " > 0.9",
              good.success_fraction() > 0.9);
    const auto bad = run_source_trials(kHalf, d, eps, 40, 0.1, kHalf, 2000,
                                       cr.derived("bad"), kDefaultCodebookCap, kThreads);
    rep.check("success fraction at R=0.1: " + fmt(bad.success_fraction()) + " < 0.5",
              bad.success_fraction() < 0.5);
    const auto again = run_source_trials(kHalf, d, eps, 40, 0.45, kHalf, 2000,
                                         cr.derived("good"), kDefaultCodebookCap, 1);
    rep.check("rerun with the same randomness is bit-identical", again == good);
    rep.finish(0.0);
}

TEST_CASE("criterion 6: the source-code channel caps communication at its own rate") {
    CriterionReport rep(6, "converse pigeonhole at n=20");
    const DistortionSpec d = DistortionSpec::hamming(2, 0.2);
    const TypicalityParams eps(0.21);
    const std::size_t trials = 500;
    const ConverseResult wall = run_converse_experiment(
        0.3, 0.8, 20, kHalf, d, eps, trials, CommonRandomness(601), nullptr,
        kDefaultCodebookCap, kThreads);
    const double p0 = 1.0 - std::pow(2.0, -20.0 * 0.5);
    const double bound = p0 - 3.0 * std::sqrt(p0 * (1.0 - p0) / double(trials));
    rep.check("error fraction at R=0.8: " + fmt(wall.error_fraction) + " >= " + fmt(bound) +
                  " (1 - 2^{-10} minus 3 sigma)",
              wall.error_fraction >= bound);
    rep.check("error fraction >= 0.99", wall.error_fraction >= 0.99);
    rep.check("distinct outputs " + std::to_string(wall.distinct_outputs) +
                  " within the inner codebook size " +
                  std::to_string(wall.inner_codebook_size),
              wall.distinct_outputs <= wall.inner_codebook_size);
    // pigeonhole bound evaluated on this very run
    const double run_bound = 1.0 -
                             double(wall.distinct_outputs) /
                                 double(wall.attack_codebook_size) -
                             3.0 * std::sqrt(0.25 / double(trials));
    rep.check("run-specific pigeonhole bound " + fmt(run_bound) + " holds",
              wall.error_fraction >= run_bound);

    // Achievable side: a covering inner code at n=20 needs rate ~0.5; attack
    // well below the distortion threshold succeeds.
    const ConverseResult ok = run_converse_experiment(
        0.5, 0.15, 20, kHalf, d, eps, 1000, CommonRandomness(602), nullptr,
        kDefaultCodebookCap, kThreads);
    rep.check("error fraction at R=0.15 over a good rate-0.5 inner code: " +
                  fmt(ok.error_fraction) + " < 0.2",
              ok.error_fraction < 0.2);
    rep.finish(120.0);
}

TEST_CASE("criterion 7: the separation stack is a member channel at (p_X, D)") {
    CriterionReport rep(7, "source-code-then-channel-code stack over a low-noise DMC");
    const DistortionSpec d = DistortionSpec::hamming(2, 0.35);
    const TypicalityParams eps(0.31);
    const CommonRandomness cr(701);
    const LayerStack stack = build_separation_system(
        kHalf, d, eps, 80, 0.2, 0.2, cr.derived("stack"), d.with_budget(0.1));
    const GeneralChannel composite = compose(stack, make_binary_symmetric(0.02));
    const MembershipReport report = estimate_membership(
        composite, kHalf, d, {20, 40, 80}, 300, cr.derived("membership"), kThreads);
    std::string phats;
    for (const auto& pt : report.points) phats += fmt(pt.p_hat) + " ";
    rep.check("p_hat decreasing over n in {20, 40, 80}: " + phats,
              report.non_increasing(0.0));
    rep.check("p_hat at n=80 (" + fmt(report.points.back().p_hat) + ") <= 0.05",
              report.points.back().p_hat <= 0.05);
    rep.finish(0.0);
}

TEST_CASE("criterion 8: reliable transport rides a verified lossy stack") {
    CriterionReport rep(8, "build_reliable_on_lossy at R = alpha - 0.15, n=40");
    const DistortionSpec d = DistortionSpec::hamming(2, 0.2);
    const TypicalityParams eps(0.21);
    const CommonRandomness cr(801);

    // The lossy system: a rate-0.5 covering codec layered over a noiseless
    // bit pipe (its composite is a member of the distortion-compliance set).
    LayerStack lossy_stack;
    lossy_stack.block_length = 40;
    lossy_stack.source = kHalf;
    lossy_stack.distortion = d;
    lossy_stack.layers.push_back(
        make_source_codec_layer(kHalf, d, eps, 0.5, kHalf, cr.derived("lossy")));
    const GeneralChannel lossy = compose(lossy_stack, make_identity(2));

    const MembershipReport membership = estimate_membership(
        lossy, kHalf, d, {20, 40}, 300, cr.derived("verify"), kThreads);
    std::string phats;
    for (const auto& pt : membership.points) phats += fmt(pt.p_hat) + " ";
    rep.check("lossy stack verified: p_hat " + phats + "non-increasing, final <= 0.05",
              membership.indicates_membership(0.05));

    const double alpha = blahut_arimoto(kHalf, d, 0.2, 1e-10).R;
    const double R = alpha - 0.15;
    const LayerStack reliable = build_reliable_on_lossy(lossy, kHalf, d, eps, 40, R,
                                                        cr.derived("reliable"), &membership);
    rep.check("membership precondition raised no warnings", reliable.warnings.empty());
    const auto reports = evaluate_end_to_end(reliable, ChannelSet({lossy}),
                                             EvalMetric::MessageError, 2000,
                                             cr.derived("eval"), kThreads);
    rep.check("message-error fraction " + fmt(reports.front().failure_fraction) +
                  " < 0.1 at R = " + fmt(R),
              reports.front().failure_fraction < 0.1);
    rep.finish(0.0);
}

namespace {

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(UNISEP_CLI_PATH) + " " + args + " >" + log.string() +
                            " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string csv_body(const fs::path& p) {
    std::ifstream in(p);
    std::string line, body;
    while (std::getline(in, line)) {
        if (!line.empty() && line[0] == '#') continue;
        body += line;
        body += '\n';
    }
    return body;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("criterion 9: every CLI subcommand reruns byte-identically") {
    CriterionReport rep(9, "CSV bodies identical across reruns with fixed config+seed");
    const fs::path dir =
        fs::temp_directory_path() / ("unisep_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(dir);

    const std::string pmf = R"("pmf": {"weights": [0.5, 0.5]})";
    const std::string dist = R"("distortion": {"matrix": [[0,1],[1,0]], "budget": 0.2})";
    struct Sub {
        std::string name;
        std::string config;
    };
    const std::vector<Sub> subs = {
        {"rd", "{\"seed\": 11, " + pmf + ", " + dist + ", \"d_grid\": [0.11, 0.2, 0.5]}"},
        {"sweep", "{\"seed\": 12, " + pmf + ", " + dist +
                      ", \"eps\": 0.02, \"n\": 64, \"grid_step\": 0.1,"
                      " \"r_grid\": {\"min\": 0.0, \"max\": 1.0, \"count\": 11}}"},
        {"trials", "{\"seed\": 13, \"mode\": \"source\", " + pmf + ", " + dist +
                       ", \"eps\": 0.21, \"n\": 20, \"R\": 0.5, \"trials\": 200}"},
        {"membership", "{\"seed\": 14, " + pmf + ", " + dist +
                           ", \"channel\": {\"kind\": \"bsc\", \"flip\": 0.05},"
                           " \"ns\": [16, 32], \"trials\": 200}"},
        {"separate", "{\"seed\": 15, \"mode\": \"separation\", " + pmf + ", " + dist +
                         ", \"eps\": 0.21, \"n\": 16, \"R\": 0.4, \"Rs\": 0.4,"
                         " \"metric\": \"distortion\", \"trials\": 150,"
                         " \"channel_set\": [{\"kind\": \"identity\", \"alphabet\": 2},"
                         " {\"kind\": \"bsc\", \"flip\": 0.02}]}"},
    };

    for (const auto& sub : subs) {
        const fs::path cfg = dir / (sub.name + ".json");
        std::ofstream(cfg) << sub.config;
        const fs::path out1 = dir / (sub.name + "_1");
        const fs::path out2 = dir / (sub.name + "_2");
        const int rc1 = run_cli(sub.name + " --config " + cfg.string() + " --out " +
                                    out1.string(),
                                dir / (sub.name + "_1.log"));
        const int rc2 = run_cli(sub.name + " --config " + cfg.string() + " --out " +
                                    out2.string() + " --threads 2",
                                dir / (sub.name + "_2.log"));
        rep.check(sub.name + " exits 0 twice", rc1 == 0 && rc2 == 0);
        const fs::path csv1 = out1 / (sub.name + ".csv");
        const fs::path csv2 = out2 / (sub.name + ".csv");
        rep.check(sub.name + " CSV bodies byte-identical",
                  fs::exists(csv1) && fs::exists(csv2) &&
                      csv_body(csv1) == csv_body(csv2) && !csv_body(csv1).empty());
        rep.check(sub.name + " JSON summaries byte-identical",
                  slurp(out1 / (sub.name + ".json")) == slurp(out2 / (sub.name + ".json")));
    }
    fs::remove_all(dir);
    rep.finish(0.0);
}
