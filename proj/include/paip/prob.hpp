#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "paip/common.hpp"
#include "paip/rng.hpp"

namespace paip {

inline constexpr double kNormalizationTol = 1e-12;
inline constexpr double kNullEventFloor = 1e-300;
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// x*log(x) with the continuity convention 0*log 0 = 0.
inline double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

inline double log_sum_exp(const std::vector<double>& xs) {
    double m = kNegInf;
    for (double x : xs) m = std::max(m, x);
    if (m == kNegInf) return kNegInf;
    double s = 0.0;
    for (double x : xs) s += std::exp(x - m);
    return m + std::log(s);
}

/// Digamma via the asymptotic series, lifting small arguments with the
/// recurrence psi(x) = psi(x+1) - 1/x until x >= 6.
inline double digamma(double x) {
    if (!(x > 0.0)) throw IndexOutOfRange("digamma: argument must be positive");
    double result = 0.0;
    while (x < 6.0) {
        result -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    result += std::log(x) - 0.5 * inv;
    // Bernoulli tail: B_2/(2x^2), B_4/(4x^4), ...
    result -= inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))));
    return result;
}

// ---------------------------------------------------------------------------
// Categorical: a finite probability vector. Invariant: entries nonnegative and
// summing to one. Construction rejects inputs whose sum is off by more than
// kNormalizationTol; inputs within tolerance are renormalized exactly.
// ---------------------------------------------------------------------------

class Categorical {
public:
    explicit Categorical(std::vector<double> probs) : probs_(std::move(probs)) {
        if (probs_.empty()) throw ShapeMismatch("Categorical: empty support");
        double sum = 0.0;
        for (double p : probs_) {
            if (!(p >= 0.0) || !std::isfinite(p))
                throw ShapeMismatch("Categorical: entries must be finite and nonnegative");
            sum += p;
        }
        if (std::abs(sum - 1.0) > kNormalizationTol)
            throw ShapeMismatch("Categorical: entries sum to " + std::to_string(sum) +
                                ", expected 1 within 1e-12");
        for (double& p : probs_) p /= sum;
    }

    /// Normalizes an arbitrary nonnegative weight vector. For internal math
    /// where the caller guarantees nothing about the sum.
    static Categorical normalized(std::vector<double> weights) {
        double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
        if (!(sum > 0.0) || !std::isfinite(sum))
            throw ShapeMismatch("Categorical::normalized: weights must have positive finite sum");
        for (double& w : weights) {
            if (!(w >= 0.0)) throw ShapeMismatch("Categorical::normalized: negative weight");
            w /= sum;
        }
        Categorical c;
        c.probs_ = std::move(weights);
        return c;
    }

    static Categorical uniform(std::size_t n) {
        if (n == 0) throw ShapeMismatch("Categorical::uniform: empty support");
        return normalized(std::vector<double>(n, 1.0));
    }

    static Categorical delta(std::size_t n, std::size_t at) {
        if (at >= n) throw IndexOutOfRange("Categorical::delta: index out of range");
        std::vector<double> p(n, 0.0);
        p[at] = 1.0;
        return normalized(std::move(p));
    }

    std::size_t size() const { return probs_.size(); }
    double operator[](std::size_t i) const { return probs_[i]; }
    const std::vector<double>& probs() const { return probs_; }

    auto begin() const { return probs_.begin(); }
    auto end() const { return probs_.end(); }

private:
    Categorical() = default;
    std::vector<double> probs_;
};

/// -sum p log p in nats; 0*log 0 = 0.
inline double entropy(const Categorical& p) {
    double h = 0.0;
    for (double x : p) h -= xlogx(x);
    return std::max(h, 0.0);
}

/// KL[p || q] in nats. Throws when p puts mass where q has none.
inline double kl_divergence(const Categorical& p, const Categorical& q) {
    if (p.size() != q.size()) throw ShapeMismatch("kl_divergence: index sets differ");
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0) continue;
        if (q[i] < kNullEventFloor)
            throw AbsoluteContinuityViolation("kl_divergence: p has mass at index " +
                                              std::to_string(i) + " where q is zero");
        kl += p[i] * std::log(p[i] / q[i]);
    }
    return std::max(kl, 0.0);
}

/// Mutual information of a joint over an n_x * n_y product space (row-major:
/// joint[x * n_y + y]).
inline double mutual_information(const Categorical& joint, std::size_t n_x, std::size_t n_y) {
    if (joint.size() != n_x * n_y) throw ShapeMismatch("mutual_information: shape mismatch");
    std::vector<double> px(n_x, 0.0), py(n_y, 0.0);
    for (std::size_t x = 0; x < n_x; ++x)
        for (std::size_t y = 0; y < n_y; ++y) {
            px[x] += joint[x * n_y + y];
            py[y] += joint[x * n_y + y];
        }
    double mi = 0.0;
    for (std::size_t x = 0; x < n_x; ++x)
        for (std::size_t y = 0; y < n_y; ++y) {
            const double j = joint[x * n_y + y];
            if (j > 0.0) mi += j * std::log(j / (px[x] * py[y]));
        }
    return std::max(mi, 0.0);
}

inline std::size_t sample_categorical(const Categorical& p, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        acc += p[i];
        if (u < acc) return i;
    }
    // Rounding can leave acc marginally below 1; fall back to the last
    // positive entry.
    for (std::size_t i = p.size(); i-- > 0;)
        if (p[i] > 0.0) return i;
    return p.size() - 1;
}

// ---------------------------------------------------------------------------
// ConditionalTable: one Categorical row per conditioning context. Contexts are
// flat indices; composite conditioning tuples (action, state) are flattened by
// the owner.
// ---------------------------------------------------------------------------

class ConditionalTable {
public:
    ConditionalTable(std::vector<Categorical> rows) : rows_(std::move(rows)) {
        if (rows_.empty()) throw ShapeMismatch("ConditionalTable: no rows");
        for (const auto& r : rows_)
            if (r.size() != rows_.front().size())
                throw ShapeMismatch("ConditionalTable: rows disagree on target space");
    }

    std::size_t n_rows() const { return rows_.size(); }
    std::size_t target_size() const { return rows_.front().size(); }

    const Categorical& row(std::size_t context) const {
        if (context >= rows_.size()) throw IndexOutOfRange("ConditionalTable: row out of range");
        return rows_[context];
    }

    double operator()(std::size_t context, std::size_t target) const {
        return row(context)[target];
    }

private:
    std::vector<Categorical> rows_;
};

// ---------------------------------------------------------------------------
// DirichletParams: positive concentration parameters over a target space, one
// block per conditioning context. A plain prior over a single distribution is
// the one-block case.
// ---------------------------------------------------------------------------

class DirichletParams {
public:
    DirichletParams(std::vector<std::vector<double>> blocks) : blocks_(std::move(blocks)) {
        if (blocks_.empty()) throw ShapeMismatch("DirichletParams: no blocks");
        for (const auto& b : blocks_) {
            if (b.size() != blocks_.front().size())
                throw ShapeMismatch("DirichletParams: blocks disagree on target space");
            if (b.empty()) throw ShapeMismatch("DirichletParams: empty block");
            for (double a : b)
                if (!(a > 0.0) || !std::isfinite(a))
                    throw ShapeMismatch("DirichletParams: concentrations must be positive finite");
        }
    }

    /// Single-block convenience.
    explicit DirichletParams(std::vector<double> alpha)
        : DirichletParams(std::vector<std::vector<double>>{std::move(alpha)}) {}

    static DirichletParams symmetric(std::size_t n_contexts, std::size_t target, double conc) {
        return DirichletParams(
            std::vector<std::vector<double>>(n_contexts, std::vector<double>(target, conc)));
    }

    std::size_t n_contexts() const { return blocks_.size(); }
    std::size_t target_size() const { return blocks_.front().size(); }
    const std::vector<double>& block(std::size_t context) const {
        if (context >= blocks_.size()) throw IndexOutOfRange("DirichletParams: block out of range");
        return blocks_[context];
    }
    const std::vector<std::vector<double>>& blocks() const { return blocks_; }

    /// Posterior mean of the distribution in one context.
    Categorical mean(std::size_t context) const {
        return Categorical::normalized(std::vector<double>(block(context)));
    }

private:
    std::vector<std::vector<double>> blocks_;
};

namespace detail {

inline void check_counts_shape(const DirichletParams& dir,
                               const std::vector<std::vector<double>>& counts) {
    if (counts.size() != dir.n_contexts())
        throw ShapeMismatch("polya: counts context count mismatch");
    for (std::size_t c = 0; c < counts.size(); ++c) {
        if (counts[c].size() != dir.target_size())
            throw ShapeMismatch("polya: counts target size mismatch");
        for (double n : counts[c])
            if (!(n >= 0.0) || !std::isfinite(n)) throw ShapeMismatch("polya: counts must be >= 0");
    }
}

/// Log marginal likelihood of integer counts in one block, evaluated as the
/// telescoped product of sequential predictives (alpha_k + j) / (alpha0 + i).
inline double polya_log_marginal_block(const std::vector<double>& alpha,
                                       const std::vector<double>& counts) {
    double alpha0 = std::accumulate(alpha.begin(), alpha.end(), 0.0);
    double log_p = 0.0;
    double drawn = 0.0;
    for (std::size_t k = 0; k < alpha.size(); ++k) {
        for (double j = 0.0; j < counts[k]; j += 1.0) {
            log_p += std::log((alpha[k] + j) / (alpha0 + drawn));
            drawn += 1.0;
        }
    }
    return log_p;
}

}  // namespace detail

/// Log Dirichlet-multinomial (Polya) marginal likelihood of the given counts,
/// taken per block and multiplied across blocks.
inline double polya_log_predictive(const DirichletParams& dir,
                                   const std::vector<std::vector<double>>& counts) {
    detail::check_counts_shape(dir, counts);
    double log_p = 0.0;
    for (std::size_t c = 0; c < dir.n_contexts(); ++c)
        log_p += detail::polya_log_marginal_block(dir.block(c), counts[c]);
    return log_p;
}

inline double polya_predictive(const DirichletParams& dir,
                               const std::vector<std::vector<double>>& counts) {
    return std::exp(polya_log_predictive(dir, counts));
}

/// Single-block convenience overload.
inline double polya_predictive(const DirichletParams& dir, const std::vector<double>& counts) {
    return polya_predictive(dir, std::vector<std::vector<double>>{counts});
}

/// E[log theta_k] = psi(alpha_k) - psi(alpha0), per block.
inline std::vector<std::vector<double>> expected_log_prob(const DirichletParams& dir) {
    std::vector<std::vector<double>> out;
    out.reserve(dir.n_contexts());
    for (std::size_t c = 0; c < dir.n_contexts(); ++c) {
        const auto& alpha = dir.block(c);
        const double psi0 = digamma(std::accumulate(alpha.begin(), alpha.end(), 0.0));
        std::vector<double> row(alpha.size());
        for (std::size_t k = 0; k < alpha.size(); ++k) row[k] = digamma(alpha[k]) - psi0;
        out.push_back(std::move(row));
    }
    return out;
}

/// KL between two Dirichlet distributions with matching shape, summed over
/// blocks.
inline double dirichlet_kl(const DirichletParams& p, const DirichletParams& q) {
    if (p.n_contexts() != q.n_contexts() || p.target_size() != q.target_size())
        throw ShapeMismatch("dirichlet_kl: shape mismatch");
    double kl = 0.0;
    for (std::size_t c = 0; c < p.n_contexts(); ++c) {
        const auto& a = p.block(c);
        const auto& b = q.block(c);
        const double a0 = std::accumulate(a.begin(), a.end(), 0.0);
        const double b0 = std::accumulate(b.begin(), b.end(), 0.0);
        kl += std::lgamma(a0) - std::lgamma(b0);
        const double psi_a0 = digamma(a0);
        for (std::size_t k = 0; k < a.size(); ++k) {
            kl -= std::lgamma(a[k]) - std::lgamma(b[k]);
            kl += (a[k] - b[k]) * (digamma(a[k]) - psi_a0);
        }
    }
    return kl;
}

/// E_p[log q-density] - E_p[log p-density], i.e. -KL, is what vfe assembly
/// needs in pieces; this is the cross term E_{Dir(a)}[log Dir(x; b)].
inline double dirichlet_cross_log_density(const std::vector<double>& a,
                                          const std::vector<double>& b) {
    if (a.size() != b.size()) throw ShapeMismatch("dirichlet_cross_log_density: shape mismatch");
    const double a0 = std::accumulate(a.begin(), a.end(), 0.0);
    const double b0 = std::accumulate(b.begin(), b.end(), 0.0);
    double v = std::lgamma(b0);
    const double psi_a0 = digamma(a0);
    for (std::size_t k = 0; k < a.size(); ++k) {
        v -= std::lgamma(b[k]);
        v += (b[k] - 1.0) * (digamma(a[k]) - psi_a0);
    }
    return v;
}

/// Negative entropy of a Dirichlet block: E_p[log p-density].
inline double dirichlet_neg_entropy(const std::vector<double>& a) {
    return dirichlet_cross_log_density(a, a);
}

/// Draw one distribution from a single Dirichlet block.
inline Categorical sample_dirichlet(const std::vector<double>& alpha, Rng& rng) {
    std::vector<double> draws(alpha.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < alpha.size(); ++k) {
        draws[k] = rng.gamma(alpha[k]);
        sum += draws[k];
    }
    if (!(sum > 0.0)) {
        // All gammas underflowed; fall back to the mean.
        return Categorical::normalized(std::vector<double>(alpha));
    }
    for (double& d : draws) d /= sum;
    return Categorical::normalized(std::move(draws));
}

}  // namespace paip
