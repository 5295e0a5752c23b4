#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "paip/prob.hpp"

namespace paip::oracles {

// ---------------------------------------------------------------------------
// Independent verification routes. Nothing here shares code with the closed
// form sequential-predictive implementations they are checked against.
// ---------------------------------------------------------------------------

/// Log Dirichlet-multinomial marginal via lgamma: a closed form algebraically
/// distinct from the telescoped sequential product.
inline double lgamma_polya_log_marginal(const std::vector<double>& alpha,
                                        const std::vector<double>& counts) {
    if (alpha.size() != counts.size()) throw ShapeMismatch("lgamma_polya: shape mismatch");
    const double a0 = std::accumulate(alpha.begin(), alpha.end(), 0.0);
    const double n = std::accumulate(counts.begin(), counts.end(), 0.0);
    double v = std::lgamma(a0) - std::lgamma(a0 + n);
    for (std::size_t k = 0; k < alpha.size(); ++k)
        v += std::lgamma(alpha[k] + counts[k]) - std::lgamma(alpha[k]);
    return v;
}

/// Dirichlet-multinomial marginal by brute-force quadrature over the simplex,
/// midpoint rule with the given step. Supports binary and ternary targets,
/// which covers every desk-scale check we run.
inline double grid_polya_marginal(const std::vector<double>& alpha,
                                  const std::vector<double>& counts, double step = 1e-3) {
    if (alpha.size() != counts.size()) throw ShapeMismatch("grid_polya: shape mismatch");
    const auto density_log_norm = [&] {
        double a0 = std::accumulate(alpha.begin(), alpha.end(), 0.0);
        double v = std::lgamma(a0);
        for (double a : alpha) v -= std::lgamma(a);
        return v;
    }();
    const std::size_t n = static_cast<std::size_t>(std::llround(1.0 / step));
    if (alpha.size() == 1) return 1.0;
    if (alpha.size() == 2) {
        double integral = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double x = (static_cast<double>(i) + 0.5) * step;
            const double y = 1.0 - x;
            integral += std::exp(density_log_norm + (alpha[0] + counts[0] - 1.0) * std::log(x) +
                                 (alpha[1] + counts[1] - 1.0) * std::log(y)) *
                        step;
        }
        return integral;
    }
    if (alpha.size() == 3) {
        double integral = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double x = (static_cast<double>(i) + 0.5) * step;
            for (std::size_t j = 0; i + j < n; ++j) {
                const double y = (static_cast<double>(j) + 0.5) * step;
                const double z = 1.0 - x - y;
                if (z <= 0.0) continue;
                integral += std::exp(density_log_norm + (alpha[0] + counts[0] - 1.0) * std::log(x) +
                                     (alpha[1] + counts[1] - 1.0) * std::log(y) +
                                     (alpha[2] + counts[2] - 1.0) * std::log(z)) *
                            step * step;
            }
        }
        return integral;
    }
    throw OracleInfeasible("grid_polya: quadrature implemented for <= 3 categories");
}

/// Channel capacity by exhaustive search over the input simplex at the given
/// resolution. channel[x][y] are the rows p(y|x); 2 or 3 inputs supported.
inline double grid_channel_capacity(const std::vector<std::vector<double>>& channel,
                                    double step = 1e-3) {
    const std::size_t n_x = channel.size();
    if (n_x < 1) throw ShapeMismatch("grid_channel_capacity: empty channel");
    const std::size_t n_y = channel.front().size();
    const auto mi_at = [&](const std::vector<double>& p) {
        std::vector<double> q(n_y, 0.0);
        for (std::size_t x = 0; x < n_x; ++x)
            for (std::size_t y = 0; y < n_y; ++y) q[y] += p[x] * channel[x][y];
        double mi = 0.0;
        for (std::size_t x = 0; x < n_x; ++x) {
            if (p[x] <= 0.0) continue;
            for (std::size_t y = 0; y < n_y; ++y) {
                const double c = channel[x][y];
                if (c > 0.0 && q[y] > 0.0) mi += p[x] * c * std::log(c / q[y]);
            }
        }
        return mi;
    };
    const std::size_t n = static_cast<std::size_t>(std::llround(1.0 / step));
    double best = 0.0;
    if (n_x == 1) return 0.0;
    if (n_x == 2) {
        for (std::size_t i = 0; i <= n; ++i) {
            const double x = static_cast<double>(i) * step;
            best = std::max(best, mi_at({x, 1.0 - x}));
        }
        return best;
    }
    if (n_x == 3) {
        for (std::size_t i = 0; i <= n; ++i) {
            const double x = static_cast<double>(i) * step;
            for (std::size_t j = 0; i + j <= n; ++j) {
                const double y = static_cast<double>(j) * step;
                best = std::max(best, mi_at({x, y, 1.0 - x - y}));
            }
        }
        return best;
    }
    throw OracleInfeasible("grid_channel_capacity: grid search implemented for <= 3 inputs");
}

}  // namespace paip::oracles
