#pragma once

// Finite-alphabet primitives shared by every other header: probability
// vectors, sequences, empirical types, typicality tests, distortion
// evaluation, and log-domain combinatorics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "unisep/errors.hpp"

namespace unisep {

using Symbol = std::uint32_t;

inline constexpr double kNegInfinity = -std::numeric_limits<double>::infinity();
inline constexpr double kLn2 = 0.6931471805599453094172321214581766;

/// Finite alphabet {0, 1, ..., size-1}.
struct Alphabet {
    std::size_t size = 0;

    explicit Alphabet(std::size_t s) : size(s) {
        if (s == 0) throw std::invalid_argument("Alphabet: size must be >= 1");
    }
};

/// Probability vector over a finite alphabet. Weights must be non-negative
/// and sum to 1 within 1e-12.
class Pmf {
public:
    Pmf() = default;

    explicit Pmf(std::vector<double> weights) : weights_(std::move(weights)) {
        if (weights_.empty()) throw std::invalid_argument("Pmf: empty weight vector");
        double sum = 0.0;
        for (double w : weights_) {
            if (!(w >= 0.0)) throw std::invalid_argument("Pmf: negative or NaN weight");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-12)
            throw std::invalid_argument("Pmf: weights sum to " + std::to_string(sum) +
                                        ", expected 1 within 1e-12");
    }

    Pmf(std::initializer_list<double> weights) : Pmf(std::vector<double>(weights)) {}

    static Pmf uniform(std::size_t k) {
        if (k == 0) throw std::invalid_argument("Pmf::uniform: k must be >= 1");
        return Pmf(std::vector<double>(k, 1.0 / static_cast<double>(k)));
    }

    /// Normalizes an arbitrary non-negative weight vector.
    static Pmf normalized(std::vector<double> raw) {
        double sum = std::accumulate(raw.begin(), raw.end(), 0.0);
        if (!(sum > 0.0)) throw std::invalid_argument("Pmf::normalized: weights sum to zero");
        for (double& w : raw) w /= sum;
        // Re-dump any residual rounding into the largest entry.
        double resid = 1.0 - std::accumulate(raw.begin(), raw.end(), 0.0);
        *std::max_element(raw.begin(), raw.end()) += resid;
        return Pmf(std::move(raw));
    }

    std::size_t size() const noexcept { return weights_.size(); }
    double operator[](std::size_t s) const { return weights_[s]; }

    /// Natural log of weight s, -inf for zero mass.
    double log_weight(std::size_t s) const {
        double w = weights_[s];
        return w > 0.0 ? std::log(w) : kNegInfinity;
    }

    const std::vector<double>& weights() const noexcept { return weights_; }

    bool operator==(const Pmf& other) const = default;

private:
    std::vector<double> weights_;
};

/// A block of symbols. Symbol validity against an alphabet is checked by the
/// operations that know the alphabet.
struct Sequence {
    std::vector<Symbol> symbols;

    Sequence() = default;
    explicit Sequence(std::vector<Symbol> s) : symbols(std::move(s)) {}
    Sequence(std::initializer_list<Symbol> s) : symbols(s) {}

    static Sequence constant(std::size_t n, Symbol s) {
        return Sequence(std::vector<Symbol>(n, s));
    }

    std::size_t size() const noexcept { return symbols.size(); }
    bool empty() const noexcept { return symbols.empty(); }
    Symbol operator[](std::size_t i) const { return symbols[i]; }
    Symbol& operator[](std::size_t i) { return symbols[i]; }

    auto begin() const noexcept { return symbols.begin(); }
    auto end() const noexcept { return symbols.end(); }

    bool operator==(const Sequence& other) const = default;
    auto operator<=>(const Sequence& other) const = default;
};

/// Empirical type: per-symbol occurrence counts of a length-n block.
struct TypeVector {
    std::vector<std::uint64_t> counts;

    TypeVector() = default;
    explicit TypeVector(std::vector<std::uint64_t> c) : counts(std::move(c)) {}
    TypeVector(std::initializer_list<std::uint64_t> c) : counts(c) {}

    std::size_t alphabet_size() const noexcept { return counts.size(); }

    std::uint64_t n() const noexcept {
        return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
    }

    Pmf to_pmf() const {
        std::uint64_t total = n();
        if (total == 0) throw std::invalid_argument("TypeVector::to_pmf: empty type");
        std::vector<double> w(counts.size());
        for (std::size_t s = 0; s < counts.size(); ++s)
            w[s] = static_cast<double>(counts[s]) / static_cast<double>(total);
        return Pmf::normalized(std::move(w));
    }

    bool operator==(const TypeVector& other) const = default;
};

/// Distortion matrix d(x, y) >= 0 together with the budget D.
class DistortionSpec {
public:
    DistortionSpec() = default;

    DistortionSpec(const std::vector<std::vector<double>>& matrix, double budget)
        : budget_(budget) {
        if (matrix.empty() || matrix.front().empty())
            throw std::invalid_argument("DistortionSpec: empty matrix");
        if (!(budget >= 0.0))
            throw std::invalid_argument("DistortionSpec: budget must be >= 0");
        nx_ = matrix.size();
        ny_ = matrix.front().size();
        entries_.reserve(nx_ * ny_);
        for (const auto& row : matrix) {
            if (row.size() != ny_)
                throw std::invalid_argument("DistortionSpec: ragged matrix");
            for (double v : row) {
                if (!(v >= 0.0))
                    throw std::invalid_argument("DistortionSpec: negative or NaN entry");
                entries_.push_back(v);
            }
        }
    }

    /// Square Hamming distortion: 0 on the diagonal, 1 elsewhere.
    static DistortionSpec hamming(std::size_t alphabet, double budget) {
        std::vector<std::vector<double>> m(alphabet, std::vector<double>(alphabet, 1.0));
        for (std::size_t s = 0; s < alphabet; ++s) m[s][s] = 0.0;
        return DistortionSpec(m, budget);
    }

    double operator()(Symbol x, Symbol y) const {
        if (x >= nx_ || y >= ny_)
            throw InvalidSequence("DistortionSpec: symbol outside matrix");
        return entries_[static_cast<std::size_t>(x) * ny_ + y];
    }

    double at(std::size_t x, std::size_t y) const { return entries_[x * ny_ + y]; }

    std::size_t input_size() const noexcept { return nx_; }
    std::size_t output_size() const noexcept { return ny_; }
    double budget() const noexcept { return budget_; }

    DistortionSpec with_budget(double d) const {
        DistortionSpec copy = *this;
        if (!(d >= 0.0)) throw std::invalid_argument("DistortionSpec: budget must be >= 0");
        copy.budget_ = d;
        return copy;
    }

    double min_entry() const { return *std::min_element(entries_.begin(), entries_.end()); }
    double max_entry() const { return *std::max_element(entries_.begin(), entries_.end()); }

    std::vector<std::vector<double>> matrix() const {
        std::vector<std::vector<double>> m(nx_, std::vector<double>(ny_));
        for (std::size_t x = 0; x < nx_; ++x)
            for (std::size_t y = 0; y < ny_; ++y) m[x][y] = at(x, y);
        return m;
    }

private:
    std::vector<double> entries_;
    std::size_t nx_ = 0, ny_ = 0;
    double budget_ = 0.0;
};

/// Strong-typicality slack.
struct TypicalityParams {
    double epsilon;

    explicit TypicalityParams(double eps) : epsilon(eps) {
        if (!(eps > 0.0)) throw std::invalid_argument("TypicalityParams: epsilon must be > 0");
    }
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Per-symbol occurrence counts of x over alphabet a.
inline TypeVector empirical_type(const Sequence& x, const Alphabet& a) {
    if (x.empty()) throw InvalidSequence("empirical_type: empty sequence");
    std::vector<std::uint64_t> counts(a.size, 0);
    for (Symbol s : x) {
        if (s >= a.size)
            throw InvalidSequence("empirical_type: symbol " + std::to_string(s) +
                                  " outside alphabet of size " + std::to_string(a.size));
        ++counts[s];
    }
    return TypeVector(std::move(counts));
}

/// Typicality predicate on raw counts: every per-symbol deviation
/// |counts[s]/n - p[s]| <= eps, plus absolute continuity (counts[s] = 0
/// wherever p[s] = 0). Shared by the sequence-level test and the exact
/// type-enumeration code so both gate identically.
inline bool type_within(const std::vector<std::uint64_t>& counts, std::size_t n,
                        const Pmf& p, double eps) {
    const double nd = static_cast<double>(n);
    for (std::size_t s = 0; s < p.size(); ++s) {
        const std::uint64_t c = s < counts.size() ? counts[s] : 0;
        if (p[s] == 0.0) {
            if (c != 0) return false;
            continue;
        }
        if (std::abs(static_cast<double>(c) / nd - p[s]) > eps) return false;
    }
    return true;
}

/// Strong typicality of a sequence w.r.t. p.
inline bool is_typical(const Sequence& x, const Pmf& p, TypicalityParams eps) {
    TypeVector t = empirical_type(x, Alphabet(p.size()));
    return type_within(t.counts, x.size(), p, eps.epsilon);
}

/// Average per-letter distortion (1/n) sum_i d(x_i, y_i).
inline double avg_distortion(const Sequence& x, const Sequence& y, const DistortionSpec& d) {
    if (x.size() != y.size())
        throw LengthMismatch("avg_distortion: lengths " + std::to_string(x.size()) + " vs " +
                             std::to_string(y.size()));
    if (x.empty()) throw InvalidSequence("avg_distortion: empty sequences");
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) sum += d(x[i], y[i]);
    return sum / static_cast<double>(x.size());
}

/// Joint typicality: x strongly typical of p AND avg distortion within the
/// budget (inclusive). The output-composition condition is enforced
/// structurally by constant-composition codebooks, not re-checked here.
inline bool jointly_typical(const Sequence& x, const Sequence& y, const Pmf& p,
                            const DistortionSpec& d, TypicalityParams eps) {
    if (x.size() != y.size())
        throw LengthMismatch("jointly_typical: lengths " + std::to_string(x.size()) + " vs " +
                             std::to_string(y.size()));
    return is_typical(x, p, eps) && avg_distortion(x, y, d) <= d.budget();
}

/// Natural log of the multinomial coefficient n! / prod_s counts[s]!.
inline double log_multinomial(const TypeVector& t) {
    const double n = static_cast<double>(t.n());
    double v = std::lgamma(n + 1.0);
    for (std::uint64_t c : t.counts) v -= std::lgamma(static_cast<double>(c) + 1.0);
    return v;
}

// ---------------------------------------------------------------------------
// Log-domain arithmetic
// ---------------------------------------------------------------------------

/// log(1 - e^x) for x <= 0, stable near both endpoints.
inline double log1mexp(double x) {
    if (x >= 0.0) return kNegInfinity;
    if (x > -kLn2) return std::log(-std::expm1(x));
    return std::log1p(-std::exp(x));
}

/// Streaming log-sum-exp with a running maximum.
class LogSumAccumulator {
public:
    void add(double log_term) {
        if (log_term == kNegInfinity) return;
        if (log_term <= max_) {
            sum_ += std::exp(log_term - max_);
            return;
        }
        if (max_ == kNegInfinity) {
            max_ = log_term;
            sum_ = 1.0;
            return;
        }
        sum_ = sum_ * std::exp(max_ - log_term) + 1.0;
        max_ = log_term;
    }

    bool empty() const noexcept { return max_ == kNegInfinity; }

    double value() const {
        if (max_ == kNegInfinity) return kNegInfinity;
        return max_ + std::log(sum_);
    }

private:
    double max_ = kNegInfinity;
    double sum_ = 0.0;
};

inline double log_sum_exp(const std::vector<double>& log_terms) {
    LogSumAccumulator acc;
    for (double t : log_terms) acc.add(t);
    return acc.value();
}

} // namespace unisep
