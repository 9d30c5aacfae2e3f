#pragma once

// Exact log-domain computation of the collision/covering probability F(n) by
// enumeration over conditional types, decay-exponent estimation, optimization
// over the output composition q_Y, and the survival quantity
// (1 - F(n))^{2^{nR}} whose sharp phase transition locates the threshold
// rate. This reaches block lengths far beyond what simulation can touch.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "unisep/codecs.hpp"
#include "unisep/core.hpp"
#include "unisep/parallel.hpp"

namespace unisep {

/// Probability in natural-log domain; -inf encodes the impossible event.
struct LogProb {
    double value = kNegInfinity;

    LogProb() = default;

    explicit LogProb(double log_value) : value(log_value) {
        if (value > 1e-9)
            throw std::invalid_argument("LogProb: log probability above 0: " +
                                        std::to_string(value));
        if (value > 0.0) value = 0.0; // rounding from log-sum-exp
    }

    static LogProb from_linear(double prob) {
        if (!(prob >= 0.0 && prob <= 1.0 + 1e-12))
            throw std::invalid_argument("LogProb: probability outside [0,1]");
        return LogProb(prob <= 0.0 ? kNegInfinity : std::min(0.0, std::log(prob)));
    }

    static LogProb impossible() { return LogProb(); }

    double linear() const { return std::exp(value); }
    bool is_impossible() const noexcept { return value == kNegInfinity; }
    double log2_value() const { return value / kLn2; }
};

inline constexpr std::size_t kMaxExactBlockLength = 2000;
inline constexpr std::size_t kMaxJointAlphabet = 9;
inline constexpr double kMaxEnumerationTerms = 2e8;
inline constexpr double kBruteForceCap = 1e7;

namespace detail {

/// lgamma(i + 1) lookup table for 0..n.
inline std::vector<double> log_factorial_table(std::size_t n) {
    std::vector<double> lg(n + 1);
    for (std::size_t i = 0; i <= n; ++i)
        lg[i] = std::lgamma(static_cast<double>(i) + 1.0);
    return lg;
}

inline double log_binomial(const std::vector<double>& lg, std::size_t n, std::size_t k) {
    return lg[n] - lg[k] - lg[n - k];
}

/// Count of weak compositions of n into k parts, as a double.
inline double composition_count(std::size_t n, std::size_t k) {
    double v = 1.0;
    for (std::size_t i = 1; i < k; ++i)
        v *= static_cast<double>(n + i) / static_cast<double>(i);
    return v;
}

inline void check_exact_limits(std::size_t n, std::size_t xs, std::size_t ys) {
    if (n == 0 || n > kMaxExactBlockLength)
        throw ResourceLimit("typecalc: block length " + std::to_string(n) +
                            " outside [1, " + std::to_string(kMaxExactBlockLength) + "]");
    if (xs * ys > kMaxJointAlphabet)
        throw ResourceLimit("typecalc: joint alphabet " + std::to_string(xs * ys) +
                            " exceeds " + std::to_string(kMaxJointAlphabet));
}

} // namespace detail

/// Probability, for a fixed block y of composition qY_counts, that a fresh
/// i.i.d.-p block Z is jointly typical with y: Z strongly typical AND average
/// distortion within the budget. Enumerates joint types with the y-marginal
/// fixed; distortion depends on (z, y) only through the joint type, so the
/// type-averaged value is exact.
inline LogProb exact_F_chan(std::size_t n, const TypeVector& qY_counts, const Pmf& p,
                            const DistortionSpec& d, TypicalityParams eps) {
    const std::size_t xs = p.size();
    const std::size_t ys = qY_counts.alphabet_size();
    detail::check_exact_limits(n, xs, ys);
    if (qY_counts.n() != n)
        throw std::invalid_argument("exact_F_chan: qY_counts must sum to n");
    if (d.input_size() != xs || d.output_size() != ys)
        throw std::invalid_argument("exact_F_chan: distortion matrix shape mismatch");

    double term_estimate = 1.0;
    for (std::uint64_t c : qY_counts.counts)
        term_estimate *= detail::composition_count(static_cast<std::size_t>(c), xs);
    if (term_estimate > kMaxEnumerationTerms)
        throw ResourceLimit("exact_F_chan: ~" + std::to_string(term_estimate) +
                            " joint types exceed the enumeration cap");

    const auto lg = detail::log_factorial_table(n);
    const double nd = static_cast<double>(n);
    const double budget = d.budget();

    std::vector<double> log_p(xs);
    for (std::size_t x = 0; x < xs; ++x) log_p[x] = p.log_weight(x);

    // Base term: sum over y-symbols of log(n_s!); the per-cell -log(c!) and
    // the i.i.d. weights accumulate during the recursion.
    double base = 0.0;
    for (std::uint64_t c : qY_counts.counts) base += lg[static_cast<std::size_t>(c)];

    std::vector<std::uint64_t> marginal(xs, 0);
    LogSumAccumulator acc;

    // Recursion over cells (y-symbol s, z-symbol x) assigning joint counts.
    auto recurse = [&](auto&& self, std::size_t s, std::size_t x, std::uint64_t row_left,
                       double log_term, double dist_sum) -> void {
        if (s == ys) {
            if (!type_within(marginal, n, p, eps.epsilon)) return;
            if (dist_sum / nd > budget) return;
            acc.add(log_term);
            return;
        }
        if (x + 1 == xs) {
            // Last cell of the row is forced.
            const std::uint64_t c = row_left;
            if (c > 0 && log_p[x] == kNegInfinity) return;
            const double cell_dist = static_cast<double>(c) * d.at(x, s);
            const double new_dist = dist_sum + cell_dist;
            if (new_dist / nd > budget) return;
            marginal[x] += c;
            const double mx = static_cast<double>(marginal[x]) / nd;
            if (mx - p[x] <= eps.epsilon) {
                const std::size_t next_s = s + 1;
                const std::uint64_t next_left =
                    next_s < ys ? qY_counts.counts[next_s] : 0;
                self(self, next_s, 0, next_left,
                     log_term - lg[static_cast<std::size_t>(c)] +
                         (c > 0 ? static_cast<double>(c) * log_p[x] : 0.0),
                     new_dist);
            }
            marginal[x] -= c;
            return;
        }
        for (std::uint64_t c = 0; c <= row_left; ++c) {
            if (c > 0 && log_p[x] == kNegInfinity) break;
            const double new_dist = dist_sum + static_cast<double>(c) * d.at(x, s);
            if (new_dist / nd > budget) break; // distortion only grows with c >= this
            marginal[x] += c;
            const double mx = static_cast<double>(marginal[x]) / nd;
            if (mx - p[x] <= eps.epsilon) {
                self(self, s, x + 1, row_left - c,
                     log_term - lg[static_cast<std::size_t>(c)] +
                         (c > 0 ? static_cast<double>(c) * log_p[x] : 0.0),
                     new_dist);
            }
            marginal[x] -= c;
            if (mx - p[x] > eps.epsilon) break; // marginal only grows with c
        }
    };
    recurse(recurse, 0, 0, qY_counts.counts.empty() ? 0 : qY_counts.counts[0], base, 0.0);

    return acc.empty() ? LogProb::impossible() : LogProb(std::min(0.0, acc.value()));
}

/// Probability that Y drawn uniformly from the type class of qY_counts lands
/// within the distortion budget of a fixed block x of composition x_counts.
/// Enumerates conditional types of y given x under the exact output
/// composition constraint; counts via per-x-symbol multinomials, normalized
/// by the full type-class size.
inline LogProb exact_F_src(std::size_t n, const TypeVector& x_counts,
                           const TypeVector& qY_counts, const DistortionSpec& d) {
    const std::size_t xs = x_counts.alphabet_size();
    const std::size_t ys = qY_counts.alphabet_size();
    detail::check_exact_limits(n, xs, ys);
    if (x_counts.n() != n || qY_counts.n() != n)
        throw std::invalid_argument("exact_F_src: compositions must sum to n");
    if (d.input_size() != xs || d.output_size() != ys)
        throw std::invalid_argument("exact_F_src: distortion matrix shape mismatch");

    double term_estimate = 1.0;
    for (std::uint64_t c : x_counts.counts)
        term_estimate *= detail::composition_count(static_cast<std::size_t>(c), ys);
    if (term_estimate > kMaxEnumerationTerms)
        throw ResourceLimit("exact_F_src: ~" + std::to_string(term_estimate) +
                            " conditional types exceed the enumeration cap");

    const auto lg = detail::log_factorial_table(n);
    const double nd = static_cast<double>(n);
    const double budget = d.budget();

    double base = 0.0;
    for (std::uint64_t c : x_counts.counts) base += lg[static_cast<std::size_t>(c)];

    std::vector<std::uint64_t> remaining = qY_counts.counts;
    LogSumAccumulator acc;

    // Recursion over cells (x-symbol t, y-symbol s); the last y-cell of each
    // x-row and the entire last x-row are forced by the remaining counts.
    auto recurse = [&](auto&& self, std::size_t t, std::size_t s, std::uint64_t row_left,
                       double log_term, double dist_sum) -> void {
        if (t == xs) {
            if (dist_sum / nd > budget) return;
            acc.add(log_term);
            return;
        }
        if (s + 1 == ys) {
            const std::uint64_t c = row_left;
            if (c > remaining[s]) return;
            const double new_dist = dist_sum + static_cast<double>(c) * d.at(t, s);
            if (new_dist / nd > budget) return;
            remaining[s] -= c;
            const std::size_t next_t = t + 1;
            const std::uint64_t next_left =
                next_t < xs ? x_counts.counts[next_t] : 0;
            self(self, next_t, 0, next_left,
                 log_term - lg[static_cast<std::size_t>(c)], new_dist);
            remaining[s] += c;
            return;
        }
        const std::uint64_t cmax = std::min<std::uint64_t>(row_left, remaining[s]);
        for (std::uint64_t c = 0; c <= cmax; ++c) {
            const double new_dist = dist_sum + static_cast<double>(c) * d.at(t, s);
            if (new_dist / nd > budget) break;
            remaining[s] -= c;
            self(self, t, s + 1, row_left - c,
                 log_term - lg[static_cast<std::size_t>(c)], new_dist);
            remaining[s] += c;
        }
    };
    recurse(recurse, 0, 0, x_counts.counts.empty() ? 0 : x_counts.counts[0], base, 0.0);

    if (acc.empty()) return LogProb::impossible();
    return LogProb(std::min(0.0, acc.value() - log_multinomial(qY_counts)));
}

// ---------------------------------------------------------------------------
// Brute-force oracles (direct summation over sequences)
// ---------------------------------------------------------------------------

namespace detail {

inline Sequence canonical_sequence(const TypeVector& counts) {
    Sequence x;
    x.symbols.reserve(static_cast<std::size_t>(counts.n()));
    for (std::size_t s = 0; s < counts.counts.size(); ++s)
        x.symbols.insert(x.symbols.end(), counts.counts[s], static_cast<Symbol>(s));
    return x;
}

} // namespace detail

/// Direct summation of exact_F_chan over all |X|^n blocks. Verification
/// oracle; independent of the type-enumeration path.
inline LogProb brute_force_F_chan(std::size_t n, const TypeVector& qY_counts, const Pmf& p,
                                  const DistortionSpec& d, TypicalityParams eps) {
    const std::size_t xs = p.size();
    if (qY_counts.n() != n)
        throw std::invalid_argument("brute_force_F_chan: qY_counts must sum to n");
    if (std::pow(static_cast<double>(xs), static_cast<double>(n)) > kBruteForceCap)
        throw ResourceLimit("brute_force_F_chan: |X|^n exceeds the cap");
    const Sequence y = detail::canonical_sequence(qY_counts);
    Sequence z;
    z.symbols.assign(n, 0);
    double sum = 0.0;
    while (true) {
        double prob = 1.0;
        for (Symbol s : z) prob *= p[s];
        if (prob > 0.0 && jointly_typical(z, y, p, d, eps)) sum += prob;
        std::size_t i = 0;
        while (i < n) {
            if (++z.symbols[i] < xs) break;
            z.symbols[i] = 0;
            ++i;
        }
        if (i == n) break;
    }
    return LogProb::from_linear(std::min(sum, 1.0));
}

/// Direct enumeration of the whole type class of qY_counts. Verification
/// oracle for exact_F_src.
inline LogProb brute_force_F_src(std::size_t n, const TypeVector& x_counts,
                                 const TypeVector& qY_counts, const DistortionSpec& d) {
    if (x_counts.n() != n || qY_counts.n() != n)
        throw std::invalid_argument("brute_force_F_src: compositions must sum to n");
    if (std::exp(log_multinomial(qY_counts)) > kBruteForceCap)
        throw ResourceLimit("brute_force_F_src: type class exceeds the cap");
    const Sequence x = detail::canonical_sequence(x_counts);
    Sequence y = detail::canonical_sequence(qY_counts);
    std::sort(y.symbols.begin(), y.symbols.end());
    std::uint64_t total = 0;
    std::uint64_t covered = 0;
    do {
        ++total;
        if (avg_distortion(x, y, d) <= d.budget()) ++covered;
    } while (std::next_permutation(y.symbols.begin(), y.symbols.end()));
    if (covered == 0) return LogProb::impossible();
    return LogProb(std::log(static_cast<double>(covered)) -
                   std::log(static_cast<double>(total)));
}

// ---------------------------------------------------------------------------
// Exponent estimation and q_Y optimization
// ---------------------------------------------------------------------------

namespace detail {

/// Least-squares slope of log2 F against n over the largest three block
/// lengths. Returns the slope (negative for decaying F).
inline double fit_log2_slope(std::vector<std::pair<std::size_t, double>> pts) {
    std::sort(pts.begin(), pts.end());
    if (pts.size() > 3) pts.erase(pts.begin(), pts.end() - 3);
    double mean_x = 0.0, mean_y = 0.0;
    for (const auto& [nn, y] : pts) {
        mean_x += static_cast<double>(nn);
        mean_y += y;
    }
    mean_x /= static_cast<double>(pts.size());
    mean_y /= static_cast<double>(pts.size());
    double sxy = 0.0, sxx = 0.0;
    for (const auto& [nn, y] : pts) {
        const double dx = static_cast<double>(nn) - mean_x;
        sxy += dx * (y - mean_y);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

} // namespace detail

/// Decay exponent -(1/n) log2 F(n), extrapolated by an unweighted linear fit
/// of log2 F against n over the largest three block lengths. Throws
/// DegenerateFit for growing F or non-finite inputs.
inline double exponent_estimate(const std::vector<std::pair<std::size_t, LogProb>>& values) {
    if (values.size() < 3)
        throw std::invalid_argument("exponent_estimate: need at least 3 block lengths");
    std::vector<std::pair<std::size_t, double>> pts;
    pts.reserve(values.size());
    for (const auto& [n, f] : values) {
        if (!std::isfinite(f.value))
            throw DegenerateFit("exponent_estimate: non-finite log F at n=" +
                                std::to_string(n));
        pts.emplace_back(n, f.log2_value());
    }
    const double slope = detail::fit_log2_slope(std::move(pts));
    if (slope > 1e-9)
        throw DegenerateFit("exponent_estimate: F grows with n (slope " +
                            std::to_string(slope) + ")");
    return std::max(0.0, -slope);
}

/// Optimized threshold estimate. Both problems pick the composition that
/// maximizes F — worst case for decoding confusion, best case for covering —
/// so both sides minimize the decay exponent over the grid.
struct ThresholdEstimate {
    double alpha = 0.0;         // combined estimate (mean of the two sides)
    double alpha_channel = 0.0; // from exact_F_chan
    double alpha_source = 0.0;  // from exact_F_src
    Pmf qY_channel;
    Pmf qY_source;
    double grid_step = 0.0;
    std::size_t n = 0; // largest block length used
    std::vector<std::size_t> fit_lengths;
    double side_gap = 0.0;            // |alpha_channel - alpha_source|
    double agreement_tolerance = 0.0; // grid quantization + finite-eps slack
};

/// Sweeps quantized q_Y candidates on a simplex grid, computing both F's at
/// block lengths {n/2, 3n/4, n}, and returns the minimized decay exponents.
inline ThresholdEstimate optimize_qY(const Pmf& p, const DistortionSpec& d,
                                     TypicalityParams eps, std::size_t n, double grid_step,
                                     unsigned threads = 1) {
    if (!(grid_step > 0.0 && grid_step <= 0.5))
        throw InvalidGrid("optimize_qY: grid_step must lie in (0, 0.5]");
    if (n < 8) throw std::invalid_argument("optimize_qY: n must be >= 8");
    const std::size_t ys = d.output_size();
    const std::size_t steps = std::max<std::size_t>(
        2, static_cast<std::size_t>(std::llround(1.0 / grid_step)));

    // Simplex grid: all compositions of `steps` into |Y| parts.
    std::vector<Pmf> candidates;
    std::vector<std::uint64_t> comp(ys, 0);
    auto emit = [&](auto&& self, std::size_t idx, std::uint64_t left) -> void {
        if (idx + 1 == ys) {
            comp[idx] = left;
            std::vector<double> w(ys);
            for (std::size_t s = 0; s < ys; ++s)
                w[s] = static_cast<double>(comp[s]) / static_cast<double>(steps);
            candidates.push_back(Pmf::normalized(std::move(w)));
            return;
        }
        for (std::uint64_t c = 0; c <= left; ++c) {
            comp[idx] = c;
            self(self, idx + 1, left - c);
        }
    };
    emit(emit, 0, steps);
    if (candidates.empty()) throw InvalidGrid("optimize_qY: empty candidate grid");

    std::vector<std::size_t> lengths = {n / 2, (3 * n) / 4, n};
    std::sort(lengths.begin(), lengths.end());
    lengths.erase(std::unique(lengths.begin(), lengths.end()), lengths.end());

    constexpr double kInfeasible = std::numeric_limits<double>::infinity();
    std::vector<double> exp_chan(candidates.size(), kInfeasible);
    std::vector<double> exp_src(candidates.size(), kInfeasible);

    parallel_for(candidates.size(), threads, [&](std::size_t ci) {
        std::vector<std::pair<std::size_t, double>> pts_chan, pts_src;
        for (std::size_t len : lengths) {
            const TypeVector qc = quantize_type(candidates[ci], len);
            const LogProb fc = exact_F_chan(len, qc, p, d, eps);
            const LogProb fs = exact_F_src(len, quantize_type(p, len), qc, d);
            if (!fc.is_impossible()) pts_chan.emplace_back(len, fc.log2_value());
            if (!fs.is_impossible()) pts_src.emplace_back(len, fs.log2_value());
        }
        if (pts_chan.size() == lengths.size())
            exp_chan[ci] = std::max(0.0, -detail::fit_log2_slope(pts_chan));
        if (pts_src.size() == lengths.size())
            exp_src[ci] = std::max(0.0, -detail::fit_log2_slope(pts_src));
    });

    const auto best_chan = std::min_element(exp_chan.begin(), exp_chan.end());
    const auto best_src = std::min_element(exp_src.begin(), exp_src.end());
    if (*best_chan == kInfeasible || *best_src == kInfeasible)
        throw DegenerateFit("optimize_qY: no feasible q_Y on the grid");

    ThresholdEstimate est;
    est.alpha_channel = *best_chan;
    est.alpha_source = *best_src;
    est.alpha = 0.5 * (est.alpha_channel + est.alpha_source);
    est.qY_channel = candidates[static_cast<std::size_t>(best_chan - exp_chan.begin())];
    est.qY_source = candidates[static_cast<std::size_t>(best_src - exp_src.begin())];
    est.grid_step = 1.0 / static_cast<double>(steps);
    est.n = n;
    est.fit_lengths = lengths;
    est.side_gap = std::abs(est.alpha_channel - est.alpha_source);
    est.agreement_tolerance =
        2.0 * est.grid_step * std::log2(static_cast<double>(std::max<std::size_t>(2, ys))) +
        2.0 * eps.epsilon * std::log2(static_cast<double>(std::max<std::size_t>(2, p.size())));
    return est;
}

// ---------------------------------------------------------------------------
// Phase transition
// ---------------------------------------------------------------------------

/// (1 - F)^{2^{nR}}, evaluated stably through logs for any magnitude of nR.
inline double survival_probability(std::size_t n, double R, LogProb F) {
    if (F.is_impossible()) return 1.0;
    const double log_one_minus_f = log1mexp(F.value);
    if (log_one_minus_f == kNegInfinity) return 0.0; // F = 1
    // survival = exp(m * L) with m = 2^{nR}, L = ln(1-F) < 0:
    // ln(-m L) = nR ln2 + ln(-L).
    const double u = static_cast<double>(n) * R * kLn2 + std::log(-log_one_minus_f);
    if (u > 700.0) return 0.0;
    return std::exp(-std::exp(u));
}

/// Survival curve over a list of rates; monotone non-increasing in R.
inline std::vector<std::pair<double, double>> phase_transition_curve(
    std::size_t n, const std::vector<double>& rates, LogProb F) {
    std::vector<std::pair<double, double>> curve;
    curve.reserve(rates.size());
    for (double r : rates) curve.emplace_back(r, survival_probability(n, r, F));
    return curve;
}

/// The rate at which 2^{nR} * F = ln 2, i.e. survival ~ 1/2; a calibration
/// point that must fall inside the transition window.
inline double midpoint_rate(std::size_t n, LogProb F) {
    return (std::log(kLn2) - F.value) / (static_cast<double>(n) * kLn2);
}

} // namespace unisep
