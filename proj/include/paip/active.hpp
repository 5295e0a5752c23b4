#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "paip/action_select.hpp"
#include "paip/motivations.hpp"
#include "paip/prob.hpp"
#include "paip/variational.hpp"
#include "paip/views.hpp"

namespace paip {

// ---------------------------------------------------------------------------
// Active inference: the softmax action prior tied to the variational
// action-value function, the coupled objective, and its block-coordinate
// optimizer, with an optional Gamma-distributed precision.
// ---------------------------------------------------------------------------

/// Variational distribution over future action sequences (lexicographic
/// sequence order).
struct ActionDistParams {
    Categorical pi;
};

/// Gamma parameters for the precision: prior xi^gamma or variational
/// phi^gamma. Expected precision is shape / rate.
struct PrecisionParams {
    double shape = 1.0;
    double rate = 1.0;

    double mean() const { return shape / rate; }
};

inline double gamma_kl(const PrecisionParams& p, const PrecisionParams& q) {
    if (!(p.shape > 0.0 && p.rate > 0.0 && q.shape > 0.0 && q.rate > 0.0))
        throw ShapeMismatch("gamma_kl: parameters must be positive");
    return (p.shape - q.shape) * digamma(p.shape) - std::lgamma(p.shape) + std::lgamma(q.shape) +
           q.shape * (std::log(p.rate) - std::log(q.rate)) + p.shape * (q.rate - p.rate) / p.rate;
}

struct ActiveOptions {
    double tol = 1e-7;
    std::size_t max_outer = 200;
    double gamma = 1.0;                  // fixed precision when the extension is off
    std::optional<PrecisionParams> gamma_prior;  // enables the precision extension
    double damping = 0.5;                // phi^gamma fixed-point damping
    double min_rate = 1e-6;
    double max_sequences = 1e6;
    double max_path_cells = 1e6;
    /// When set, the KL action target is frozen at this distribution over
    /// sequences instead of the phi-coupled softmax; the optimization then
    /// splits into independent phi and pi problems.
    std::optional<Categorical> frozen_target;
};

struct ActiveFitReport {
    std::vector<double> objective_trace;
    std::size_t outer_iterations = 0;
    bool converged = false;
};

struct ActiveResult {
    VariationalParams phi;
    Categorical pi;  // over action sequences
    std::optional<PrecisionParams> phi_gamma;
    double gamma_bar = 1.0;
    std::size_t seq_len = 0;
    ActiveFitReport report;
};

/// q(a-hat sequence | phi): softmax of the variational action-value function
/// at inverse temperature gamma.
inline Categorical action_prior(const ActionValueFn& q, double gamma, std::size_t seq_len,
                                double max_sequences = 1e6) {
    return softmax_sequence_dist(q, gamma, seq_len, max_sequences);
}

/// The coupled objective: variational free energy plus the KL between the
/// action distribution and the softmax action prior at the expected
/// precision, plus the precision KL when the Gamma extension is on.
inline double active_objective(const Categorical& pi, const VariationalParams& phi,
                               const History& h, const HyperParams& xi, const ActionValueFn& q,
                               double gamma_bar, std::size_t seq_len,
                               const std::optional<PrecisionParams>& phi_gamma = std::nullopt,
                               const std::optional<PrecisionParams>& xi_gamma = std::nullopt,
                               double max_sequences = 1e6) {
    double value = vfe(phi, h, xi);
    const Categorical target = action_prior(q, gamma_bar, seq_len, max_sequences);
    value += kl_divergence(pi, target);
    if (phi_gamma && xi_gamma) value += gamma_kl(*phi_gamma, *xi_gamma);
    return value;
}

/// Block-coordinate minimization of the coupled objective:
///   (1) one CAVI sweep on phi with the action term frozen,
///   (2) pi set to the current softmax action prior (closed-form minimizer),
///   (3) damped fixed-point update of the precision rate.
/// The coupled functional is not a variational free energy, so the trace is
/// reported rather than assumed monotone.
inline ActiveResult optimize(const History& h, const HyperParams& xi, const MotivationConfig& cfg,
                             std::size_t seq_len, const ActiveOptions& opts = {}) {
    if (seq_len == 0) throw ShapeMismatch("optimize: empty action sequence space");
    if (opts.max_outer < 1) throw ShapeMismatch("optimize: max_outer must be >= 1");
    detail::check_sequence_cap(xi.spaces.n_action, seq_len, opts.max_sequences);
    std::size_t n_sequences = 1;
    for (std::size_t i = 0; i < seq_len; ++i) n_sequences *= xi.spaces.n_action;

    VariationalParams phi = VariationalParams::uniform_init(xi, h.t());
    std::optional<PrecisionParams> phi_gamma;
    double gamma_bar = opts.gamma;
    if (opts.gamma_prior) {
        phi_gamma = *opts.gamma_prior;
        gamma_bar = phi_gamma->mean();
    }

    ActiveResult result{std::move(phi), Categorical::uniform(n_sequences), phi_gamma, gamma_bar,
                        seq_len, {}};
    double prev = kNegInf;
    bool have_prev = false;
    for (std::size_t outer = 0; outer < opts.max_outer; ++outer) {
        // (1) phi block: one coordinate-ascent sweep on the vfe term. The
        // action KL is constant in phi while its target stays frozen.
        cavi_sweep(result.phi, h, xi);

        // (2) pi block: closed-form KL minimizer.
        auto view = std::make_shared<VariationalView>(result.phi, opts.max_path_cells);
        ActionValueFn q = make_action_value(view, cfg);
        const Categorical target =
            opts.frozen_target ? *opts.frozen_target
                               : action_prior(q, gamma_bar, seq_len, opts.max_sequences);
        result.pi = target;

        // (3) precision block: match the prior rate corrected by the expected
        // action value, damped.
        if (phi_gamma) {
            double expected_q = 0.0;
            std::size_t i = 0;
            detail::for_each_sequence(q.n_actions(), seq_len,
                                      [&](const std::vector<std::size_t>& seq) {
                                          expected_q += result.pi[i++] * q(seq);
                                      });
            const double candidate = std::max(opts.gamma_prior->rate - expected_q, opts.min_rate);
            phi_gamma->rate = (1.0 - opts.damping) * phi_gamma->rate + opts.damping * candidate;
            phi_gamma->shape = opts.gamma_prior->shape;
            gamma_bar = phi_gamma->mean();
            result.phi_gamma = phi_gamma;
            result.gamma_bar = gamma_bar;
        }

        const double objective =
            vfe(result.phi, h, xi) +
            kl_divergence(result.pi, opts.frozen_target
                                         ? *opts.frozen_target
                                         : action_prior(q, gamma_bar, seq_len, opts.max_sequences)) +
            (phi_gamma ? gamma_kl(*phi_gamma, *opts.gamma_prior) : 0.0);
        result.report.objective_trace.push_back(objective);
        result.report.outer_iterations = outer + 1;
        if (have_prev && std::abs(prev - objective) < opts.tol) {
            result.report.converged = true;
            break;
        }
        prev = objective;
        have_prev = true;
    }
    if (!result.report.converged)
        log_info("active optimize: objective still moving after " +
                 std::to_string(result.report.outer_iterations) + " iterations");
    return result;
}

/// p(a_t | m_t): marginal of the optimized sequence distribution over its
/// first action.
inline Categorical act(const ActiveResult& result, std::size_t n_actions) {
    std::vector<double> mass(n_actions, 0.0);
    std::size_t i = 0;
    detail::for_each_sequence(n_actions, result.seq_len, [&](const std::vector<std::size_t>& seq) {
        mass[seq.front()] += result.pi[i++];
    });
    return Categorical::normalized(std::move(mass));
}

}  // namespace paip
