#pragma once

// Acceptance oracles, quarantined from the operational pipeline: the
// operational experiments never call anything in this header. Provides the
// Blahut-Arimoto rate-distortion solver (an explicitly information-theoretic
// computation used only to cross-check operational estimates) and an
// exhaustive minimal-codebook search for tiny instances.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "unisep/core.hpp"

namespace unisep {

struct RdPoint {
    double D = 0.0;        // distortion the solver was run at (after clamping)
    double R = 0.0;        // bits per symbol
    std::size_t iterations = 0;
    double gap = 0.0;      // convergence bound on R, in bits
    bool clamped = false;  // requested D fell outside [D_min, D_max]
};

inline double distortion_floor(const Pmf& p, const DistortionSpec& d) {
    double v = 0.0;
    for (std::size_t x = 0; x < p.size(); ++x) {
        double best = d.at(x, 0);
        for (std::size_t y = 1; y < d.output_size(); ++y) best = std::min(best, d.at(x, y));
        v += p[x] * best;
    }
    return v;
}

inline double distortion_ceiling(const Pmf& p, const DistortionSpec& d) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t y = 0; y < d.output_size(); ++y) {
        double v = 0.0;
        for (std::size_t x = 0; x < p.size(); ++x) v += p[x] * d.at(x, y);
        best = std::min(best, v);
    }
    return best;
}

/// Alternating minimization of the rate-distortion Lagrangian with bisection
/// over the slope multiplier to hit the target distortion. Per multiplier the
/// inner loop stops when the Arimoto-style bracketing bound max_y log g(y)
/// drops below tol (in bits).
inline RdPoint blahut_arimoto(const Pmf& p, const DistortionSpec& d, double D,
                              double tol = 1e-9) {
    const std::size_t xs = p.size();
    const std::size_t ys = d.output_size();
    if (d.input_size() != xs)
        throw std::invalid_argument("blahut_arimoto: p and d disagree on |X|");
    if (!(tol > 0.0)) throw std::invalid_argument("blahut_arimoto: tol must be > 0");

    const double dmin = distortion_floor(p, d);
    const double dmax = distortion_ceiling(p, d);
    RdPoint out;
    out.D = std::clamp(D, dmin, dmax);
    out.clamped = out.D != D;
    if (out.D >= dmax - 1e-15) {
        out.D = std::max(out.D, dmax);
        out.R = 0.0;
        return out;
    }

    const double inner_tol = tol * kLn2; // nats
    constexpr std::size_t kIterationCap = 200000;
    std::size_t iterations = 0;

    std::vector<double> log_p(xs);
    for (std::size_t x = 0; x < xs; ++x) log_p[x] = p.log_weight(x);
    std::vector<double> log_q(ys, -std::log(static_cast<double>(ys)));
    std::vector<double> log_c(xs), log_g(ys);

    struct Eval {
        double distortion;
        double rate_bits;   // tangent lower bound at the target distortion
        double gap_bits;
    };

    auto evaluate = [&](double beta) -> Eval {
        double bracket = 0.0;
        while (true) {
            if (++iterations > kIterationCap)
                throw NoConvergence("blahut_arimoto: iteration cap reached");
            for (std::size_t x = 0; x < xs; ++x) {
                LogSumAccumulator acc;
                for (std::size_t y = 0; y < ys; ++y)
                    acc.add(log_q[y] - beta * d.at(x, y));
                log_c[x] = acc.value();
            }
            bracket = kNegInfinity;
            for (std::size_t y = 0; y < ys; ++y) {
                LogSumAccumulator acc;
                for (std::size_t x = 0; x < xs; ++x) {
                    if (log_p[x] == kNegInfinity) continue;
                    acc.add(log_p[x] - beta * d.at(x, y) - log_c[x]);
                }
                log_g[y] = acc.value();
                bracket = std::max(bracket, log_g[y]);
            }
            for (std::size_t y = 0; y < ys; ++y) log_q[y] += log_g[y];
            // Renormalize to absorb rounding drift.
            LogSumAccumulator norm;
            for (double lq : log_q) norm.add(lq);
            const double z = norm.value();
            for (double& lq : log_q) lq -= z;
            if (bracket <= inner_tol) break;
        }
        double dist = 0.0;
        double lagrangian = 0.0; // min_Q [I + beta E d] = -sum_x p log c
        for (std::size_t x = 0; x < xs; ++x) {
            if (log_p[x] == kNegInfinity) continue;
            lagrangian -= p[x] * log_c[x];
            for (std::size_t y = 0; y < ys; ++y) {
                const double log_Q = log_q[y] - beta * d.at(x, y) - log_c[x];
                dist += p[x] * std::exp(log_Q) * d.at(x, y);
            }
        }
        Eval e;
        e.distortion = dist;
        e.rate_bits = std::max(0.0, (lagrangian - beta * out.D) / kLn2);
        e.gap_bits = bracket / kLn2 + beta * std::abs(dist - out.D) / kLn2;
        return e;
    };

    // Find an upper multiplier whose distortion is at or below the target.
    double lo = 0.0, hi = 1.0;
    Eval at_hi = evaluate(hi);
    std::size_t doublings = 0;
    while (at_hi.distortion > out.D && doublings++ < 60) {
        lo = hi;
        hi *= 2.0;
        at_hi = evaluate(hi);
    }

    double best_rate = at_hi.rate_bits;
    double best_gap = at_hi.gap_bits;
    for (int step = 0; step < 80; ++step) {
        const double mid = 0.5 * (lo + hi);
        const Eval e = evaluate(mid);
        if (e.rate_bits > best_rate) {
            best_rate = e.rate_bits;
            best_gap = e.gap_bits;
        }
        if (e.distortion > out.D)
            lo = mid;
        else
            hi = mid;
        if (std::abs(e.distortion - out.D) < 1e-13 && e.gap_bits < tol) break;
    }

    out.R = best_rate;
    out.gap = best_gap;
    out.iterations = iterations;
    return out;
}

// ---------------------------------------------------------------------------
// Exhaustive operational rate-distortion search (tiny instances)
// ---------------------------------------------------------------------------

struct OperationalRdResult {
    std::size_t k = 0;   // minimal codebook cardinality
    double rate = 0.0;   // log2(k) / n
};

/// Smallest k such that some k-subset of Y^n covers probability >= 1 - delta
/// of X^n within average distortion D. Exhaustive over subsets; the returned
/// k is exactly minimal.
inline OperationalRdResult brute_force_operational_rd(const Pmf& p, const DistortionSpec& d,
                                                      double D, std::size_t n, double delta,
                                                      std::size_t k_max = 4,
                                                      double enum_cap = 2e7) {
    const std::size_t xs = p.size();
    const std::size_t ys = d.output_size();
    if (n == 0 || n > 8)
        throw ResourceLimit("brute_force_operational_rd: n outside [1, 8]");
    const double x_count_f = std::pow(static_cast<double>(xs), static_cast<double>(n));
    const double y_count_f = std::pow(static_cast<double>(ys), static_cast<double>(n));
    if (x_count_f > 1e5 || y_count_f > 1e5)
        throw ResourceLimit("brute_force_operational_rd: alphabet^n too large");
    const std::size_t x_count = static_cast<std::size_t>(x_count_f);
    const std::size_t y_count = static_cast<std::size_t>(y_count_f);

    // Enumerate blocks in odometer order.
    auto unrank = [n](std::size_t rank, std::size_t alphabet) {
        Sequence s;
        s.symbols.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            s.symbols[i] = static_cast<Symbol>(rank % alphabet);
            rank /= alphabet;
        }
        return s;
    };

    std::vector<double> mass(x_count);
    std::vector<Sequence> xs_all(x_count);
    for (std::size_t r = 0; r < x_count; ++r) {
        xs_all[r] = unrank(r, xs);
        double m = 1.0;
        for (Symbol s : xs_all[r]) m *= p[s];
        mass[r] = m;
    }

    // covered[y] = bitmask over X^n of blocks within distortion D of word y.
    const std::size_t blocks = (x_count + 63) / 64;
    std::vector<std::vector<std::uint64_t>> covered(y_count,
                                                    std::vector<std::uint64_t>(blocks, 0));
    for (std::size_t ry = 0; ry < y_count; ++ry) {
        const Sequence y = unrank(ry, ys);
        for (std::size_t rx = 0; rx < x_count; ++rx)
            if (avg_distortion(xs_all[rx], y, d) <= D)
                covered[ry][rx / 64] |= std::uint64_t{1} << (rx % 64);
    }

    const double need = 1.0 - delta - 1e-12;
    std::vector<std::uint64_t> union_mask(blocks);
    auto covered_mass = [&](const std::vector<std::size_t>& subset) {
        std::fill(union_mask.begin(), union_mask.end(), 0);
        for (std::size_t y : subset)
            for (std::size_t b = 0; b < blocks; ++b) union_mask[b] |= covered[y][b];
        double m = 0.0;
        for (std::size_t rx = 0; rx < x_count; ++rx)
            if (union_mask[rx / 64] >> (rx % 64) & 1) m += mass[rx];
        return m;
    };

    for (std::size_t k = 1; k <= std::min(k_max, y_count); ++k) {
        // C(y_count, k) combinations.
        double combos = 1.0;
        for (std::size_t i = 0; i < k; ++i)
            combos *= static_cast<double>(y_count - i) / static_cast<double>(i + 1);
        if (combos > enum_cap)
            throw ResourceLimit("brute_force_operational_rd: C(" + std::to_string(y_count) +
                                "," + std::to_string(k) + ") exceeds the enumeration cap");
        std::vector<std::size_t> subset(k);
        for (std::size_t i = 0; i < k; ++i) subset[i] = i;
        while (true) {
            if (covered_mass(subset) >= need) {
                OperationalRdResult res;
                res.k = k;
                res.rate = std::log2(static_cast<double>(k)) / static_cast<double>(n);
                return res;
            }
            // next combination
            std::size_t i = k;
            while (i > 0) {
                --i;
                if (subset[i] != y_count - k + i) break;
                if (i == 0) {
                    i = k;
                    break;
                }
            }
            if (i == k) break;
            ++subset[i];
            for (std::size_t j = i + 1; j < k; ++j) subset[j] = subset[j - 1] + 1;
        }
    }
    throw ResourceLimit("brute_force_operational_rd: no covering codebook within k_max = " +
                        std::to_string(k_max));
}

} // namespace unisep
