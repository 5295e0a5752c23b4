#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "paip/exact.hpp"
#include "paip/gen_model.hpp"
#include "paip/pa_loop.hpp"
#include "paip/path_enum.hpp"
#include "paip/prob.hpp"
#include "paip/rng.hpp"

namespace paip {

// ---------------------------------------------------------------------------
// Mean-field variational approximation of the posterior factor: one
// categorical per past environment state, Dirichlet blocks for the parameter
// families, coordinate-ascent fitting of the variational free energy.
// ---------------------------------------------------------------------------

struct VariationalParams {
    VariationalParams(ModelSpaces spaces, std::vector<Categorical> env_marginals,
                      DirichletParams sensor, DirichletParams transition, DirichletParams initial)
        : spaces(spaces),
          env_marginals(std::move(env_marginals)),
          sensor(std::move(sensor)),
          transition(std::move(transition)),
          initial(std::move(initial)) {
        for (const auto& m : this->env_marginals)
            if (m.size() != spaces.n_env)
                throw ShapeMismatch("VariationalParams: env marginal size mismatch");
        if (this->sensor.n_contexts() != spaces.n_env ||
            this->sensor.target_size() != spaces.n_sensor ||
            this->transition.n_contexts() != spaces.n_action * spaces.n_env ||
            this->transition.target_size() != spaces.n_env ||
            this->initial.n_contexts() != 1 || this->initial.target_size() != spaces.n_env)
            throw ShapeMismatch("VariationalParams: Dirichlet block shape mismatch");
    }

    /// Uniform state marginals, prior parameter blocks.
    static VariationalParams uniform_init(const HyperParams& xi, std::size_t t) {
        return VariationalParams(xi.spaces,
                                 std::vector<Categorical>(t, Categorical::uniform(xi.spaces.n_env)),
                                 xi.sensor, xi.transition, xi.initial);
    }

    std::size_t t() const { return env_marginals.size(); }

    ModelSpaces spaces;
    std::vector<Categorical> env_marginals;  // phi^{E_tau}, tau = 0..t-1
    DirichletParams sensor;                  // phi^1
    DirichletParams transition;              // phi^2
    DirichletParams initial;                 // phi^3
};

struct FitReport {
    double final_vfe = 0.0;
    std::size_t sweeps = 0;
    double last_delta = 0.0;
    bool converged = false;
    std::vector<double> vfe_trace;  // after each sweep
};

struct CaviOptions {
    std::size_t max_sweeps = 500;
    double tol = 1e-8;
    std::size_t random_restarts = 0;
    RngSeed seed{0};
};

namespace detail {

inline void check_phi_history(const VariationalParams& phi, const History& h,
                              const HyperParams& xi) {
    if (phi.t() != h.t()) throw ShapeMismatch("variational: phi covers a different t than the history");
    if (phi.spaces.n_env != xi.spaces.n_env || phi.spaces.n_sensor != xi.spaces.n_sensor ||
        phi.spaces.n_action != xi.spaces.n_action)
        throw ShapeMismatch("variational: phi and prior disagree on model spaces");
    for (std::size_t s : h.sensors())
        if (s >= xi.spaces.n_sensor) throw IndexOutOfRange("variational: sensor out of range");
    for (std::size_t a : h.actions())
        if (a >= xi.spaces.n_action) throw IndexOutOfRange("variational: action out of range");
}

}  // namespace detail

/// Variational free energy of phi against history h and prior xi, in closed
/// form. Bounded below by -log_evidence(h, xi).
inline double vfe(const VariationalParams& phi, const History& h, const HyperParams& xi) {
    detail::check_phi_history(phi, h, xi);
    const std::size_t t = h.t();
    const auto elog_sensor = expected_log_prob(phi.sensor);
    const auto elog_transition = expected_log_prob(phi.transition);
    const auto elog_initial = expected_log_prob(phi.initial);

    double value = 0.0;
    // E_r[log r] over environment-state marginals.
    for (const auto& m : phi.env_marginals)
        for (double p : m) value += xlogx(p);
    // Parameter-block divergences from the prior.
    value += dirichlet_kl(phi.sensor, xi.sensor);
    value += dirichlet_kl(phi.transition, xi.transition);
    value += dirichlet_kl(phi.initial, xi.initial);
    // Expected log-likelihood of the data and the latent chain.
    for (std::size_t tau = 0; tau < t; ++tau) {
        const auto& m = phi.env_marginals[tau];
        for (std::size_t e = 0; e < m.size(); ++e) {
            if (m[e] == 0.0) continue;
            value -= m[e] * elog_sensor[e][h.sensors()[tau]];
            if (tau == 0) value -= m[e] * elog_initial[0][e];
        }
        if (tau >= 1) {
            const auto& prev = phi.env_marginals[tau - 1];
            const std::size_t a = h.actions()[tau - 1];
            for (std::size_t e0 = 0; e0 < prev.size(); ++e0) {
                if (prev[e0] == 0.0) continue;
                const std::size_t ctx = phi.spaces.transition_context(a, e0);
                for (std::size_t e1 = 0; e1 < m.size(); ++e1) {
                    if (m[e1] == 0.0) continue;
                    value -= prev[e0] * m[e1] * elog_transition[ctx][e1];
                }
            }
        }
    }
    return value;
}

/// One in-place coordinate-ascent sweep: each state marginal is set to the
/// exact coordinate minimizer given its neighbours and the current parameter
/// blocks, then each block to the prior plus expected counts. Sweep order:
/// tau ascending, then initial, sensor, transition blocks.
inline void cavi_sweep(VariationalParams& phi, const History& h, const HyperParams& xi) {
    detail::check_phi_history(phi, h, xi);
    const std::size_t t = h.t();
    const ModelSpaces& spaces = xi.spaces;
    const auto elog_sensor = expected_log_prob(phi.sensor);
    const auto elog_transition = expected_log_prob(phi.transition);
    const auto elog_initial = expected_log_prob(phi.initial);
    // State marginals, tau ascending.
    for (std::size_t tau = 0; tau < t; ++tau) {
        std::vector<double> logits(spaces.n_env, 0.0);
        for (std::size_t e = 0; e < spaces.n_env; ++e) {
            double v = elog_sensor[e][h.sensors()[tau]];
            if (tau == 0) v += elog_initial[0][e];
            if (tau >= 1) {
                const auto& prev = phi.env_marginals[tau - 1];
                const std::size_t a = h.actions()[tau - 1];
                for (std::size_t e0 = 0; e0 < spaces.n_env; ++e0)
                    v += prev[e0] * elog_transition[spaces.transition_context(a, e0)][e];
            }
            if (tau + 1 < t) {
                const auto& next = phi.env_marginals[tau + 1];
                const std::size_t a = h.actions()[tau];
                const std::size_t ctx = spaces.transition_context(a, e);
                for (std::size_t e1 = 0; e1 < spaces.n_env; ++e1)
                    v += next[e1] * elog_transition[ctx][e1];
            }
            logits[e] = v;
        }
        const double m = *std::max_element(logits.begin(), logits.end());
        std::vector<double> w(spaces.n_env);
        for (std::size_t e = 0; e < spaces.n_env; ++e) w[e] = std::exp(logits[e] - m);
        phi.env_marginals[tau] = Categorical::normalized(std::move(w));
    }
    // Parameter blocks: prior plus expected counts.
    std::vector<double> init = xi.initial.block(0);
    for (std::size_t e = 0; e < spaces.n_env; ++e) init[e] += phi.env_marginals[0][e];
    phi.initial = DirichletParams(std::vector<std::vector<double>>{std::move(init)});

    auto sensor = xi.sensor.blocks();
    for (std::size_t tau = 0; tau < t; ++tau)
        for (std::size_t e = 0; e < spaces.n_env; ++e)
            sensor[e][h.sensors()[tau]] += phi.env_marginals[tau][e];
    phi.sensor = DirichletParams(std::move(sensor));

    auto trans = xi.transition.blocks();
    for (std::size_t tau = 1; tau < t; ++tau) {
        const std::size_t a = h.actions()[tau - 1];
        for (std::size_t e0 = 0; e0 < spaces.n_env; ++e0) {
            const double p0 = phi.env_marginals[tau - 1][e0];
            if (p0 == 0.0) continue;
            const std::size_t ctx = spaces.transition_context(a, e0);
            for (std::size_t e1 = 0; e1 < spaces.n_env; ++e1)
                trans[ctx][e1] += p0 * phi.env_marginals[tau][e1];
        }
    }
    phi.transition = DirichletParams(std::move(trans));
}

/// Coordinate ascent on the variational free energy until the per-sweep delta
/// drops below tol.
inline std::pair<VariationalParams, FitReport> cavi_fit(const History& h, const HyperParams& xi,
                                                        const CaviOptions& opts = {}) {
    if (opts.tol <= 0.0) throw ShapeMismatch("cavi_fit: tol must be positive");
    const std::size_t t = h.t();
    const ModelSpaces& spaces = xi.spaces;

    const auto run_from = [&](VariationalParams phi) -> std::pair<VariationalParams, FitReport> {
        FitReport report;
        double prev_vfe = vfe(phi, h, xi);
        report.vfe_trace.push_back(prev_vfe);
        for (std::size_t sweep = 0; sweep < opts.max_sweeps; ++sweep) {
            cavi_sweep(phi, h, xi);
            const double cur = vfe(phi, h, xi);
            report.vfe_trace.push_back(cur);
            report.sweeps = sweep + 1;
            report.last_delta = prev_vfe - cur;
            if (report.last_delta < -1e-9)
                log_warn("cavi_fit: VFE increased by " + std::to_string(-report.last_delta));
            if (std::abs(report.last_delta) < opts.tol) {
                report.converged = true;
                prev_vfe = cur;
                break;
            }
            prev_vfe = cur;
        }
        report.final_vfe = prev_vfe;
        if (!report.converged)
            log_info("cavi_fit: not converged after " + std::to_string(report.sweeps) + " sweeps");
        return {std::move(phi), std::move(report)};
    };

    auto best = run_from(VariationalParams::uniform_init(xi, t));
    if (opts.random_restarts > 0) {
        Rng rng(opts.seed);
        for (std::size_t r = 0; r < opts.random_restarts; ++r) {
            std::vector<Categorical> marginals;
            marginals.reserve(t);
            for (std::size_t tau = 0; tau < t; ++tau) {
                std::vector<double> w(spaces.n_env);
                for (double& x : w) x = -std::log(1.0 - rng.uniform());
                marginals.push_back(Categorical::normalized(std::move(w)));
            }
            auto candidate = run_from(VariationalParams(spaces, std::move(marginals), xi.sensor,
                                                        xi.transition, xi.initial));
            if (candidate.second.final_vfe < best.second.final_vfe) best = std::move(candidate);
        }
    }
    return best;
}

/// Components of the approximate complete posterior for path prediction: one
/// start per environment state weighted by phi^{E_{t-1}}, all sharing the
/// fitted Dirichlet blocks. phi^3 integrates out of every predictive query.
inline std::vector<PredictiveComponent> variational_components(const VariationalParams& phi) {
    if (phi.t() == 0) throw ShapeMismatch("variational_components: no state marginals");
    std::vector<PredictiveComponent> comps;
    const Categorical& last = phi.env_marginals.back();
    for (std::size_t e = 0; e < last.size(); ++e) {
        if (last[e] == 0.0) continue;
        comps.push_back({last[e], e, phi.sensor.blocks(), phi.transition.blocks(),
                         /*integrate=*/true});
    }
    return comps;
}

/// r(s-hat path | a-hat sequence, phi): the approximate posterior predictive
/// over future sensor paths.
inline Categorical approx_predictive_sensor_dist(const VariationalParams& phi,
                                                 const std::vector<std::size_t>& actions,
                                                 double max_path_cells = 1e6) {
    const PathJoint joint =
        enumerate_path_joint(variational_components(phi), phi.spaces, actions, max_path_cells);
    return detail::marginal_to_categorical(joint.sensor_marginal(),
                                           "approx_predictive_sensor_dist");
}

/// Queries against the hybrid posterior (exact predictive factor times
/// mean-field posterior factor).
struct PosteriorQuery {
    enum class Kind {
        kEPrevMarginal,     // phi^{E_{t-1}}
        kThetaSensorMean,   // Dirichlet mean of phi^1, one context
        kThetaTransitionMean,
        kThetaInitialMean,
        kJointFirstStep,    // joint over (s-hat_t, e-hat_t), row-major e * nS + s
        kSensorPath,
        kEnvPath,
    } kind = Kind::kEPrevMarginal;
    std::size_t context = 0;  // for the theta means
};

inline Categorical approx_complete_posterior_query(const VariationalParams& phi,
                                                   const std::vector<std::size_t>& actions,
                                                   const PosteriorQuery& query,
                                                   double max_path_cells = 1e6) {
    using Kind = PosteriorQuery::Kind;
    switch (query.kind) {
        case Kind::kEPrevMarginal:
            return phi.env_marginals.back();
        case Kind::kThetaSensorMean:
            return phi.sensor.mean(query.context);
        case Kind::kThetaTransitionMean:
            return phi.transition.mean(query.context);
        case Kind::kThetaInitialMean:
            return phi.initial.mean(0);
        case Kind::kJointFirstStep: {
            if (actions.empty()) throw ShapeMismatch("query: kJointFirstStep needs a future action");
            const PathJoint joint = enumerate_path_joint(variational_components(phi), phi.spaces,
                                                         actions, max_path_cells);
            return detail::marginal_to_categorical(joint.step_joint(0), "query joint step");
        }
        case Kind::kSensorPath:
            return approx_predictive_sensor_dist(phi, actions, max_path_cells);
        case Kind::kEnvPath: {
            const PathJoint joint = enumerate_path_joint(variational_components(phi), phi.spaces,
                                                         actions, max_path_cells);
            return detail::marginal_to_categorical(joint.env_marginal(), "query env path");
        }
    }
    throw UnknownQuery("approx_complete_posterior_query: unknown query kind");
}

/// KL divergence from the mean-field posterior factor to the exact one,
/// enumerated directly over environment histories. Test and diagnostic
/// support; exponential in t.
inline double kl_to_exact_posterior(const VariationalParams& phi, const History& h,
                                    const HyperParams& xi, double log_evidence_value) {
    detail::check_phi_history(phi, h, xi);
    const std::size_t t = h.t();
    const std::size_t n_env = xi.spaces.n_env;
    std::vector<std::size_t> path(t, 0);
    double kl = 0.0;
    for (;;) {
        double r_path = 1.0;
        for (std::size_t tau = 0; tau < t; ++tau) r_path *= phi.env_marginals[tau][path[tau]];
        if (r_path > 0.0) {
            // log q(path | history) via the closed-form Polya marginal.
            const SparseCounts counts = path_counts(xi.spaces, h, path);
            PosteriorEntry pseudo{1.0, 0, counts};
            EntryPosterior post = entry_posterior(xi, pseudo);
            double log_q = -log_evidence_value;
            const CountKeys keys(xi.spaces);
            // Polya marginal of the path's counts, block by block.
            {
                std::vector<std::vector<double>> sensor_counts(n_env,
                                                               std::vector<double>(xi.spaces.n_sensor, 0.0));
                std::vector<std::vector<double>> trans_counts(
                    xi.spaces.n_action * n_env, std::vector<double>(n_env, 0.0));
                std::vector<double> init_counts(n_env, 0.0);
                for (const auto& [key, n] : counts) {
                    if (keys.is_sensor(key))
                        sensor_counts[key / keys.n_sensor][key % keys.n_sensor] += n;
                    else if (keys.is_transition(key)) {
                        const std::uint64_t rel = key - keys.transition_base;
                        trans_counts[rel / keys.n_env][rel % keys.n_env] += n;
                    } else {
                        init_counts[key - keys.initial_base] += n;
                    }
                }
                log_q += polya_log_predictive(xi.sensor, sensor_counts);
                log_q += polya_log_predictive(xi.transition, trans_counts);
                log_q += polya_log_predictive(xi.initial, {init_counts});
            }
            double term = std::log(r_path) - log_q;
            // Parameter part: E_r[log r(theta) - log q(theta | path)].
            for (std::size_t c = 0; c < phi.sensor.n_contexts(); ++c)
                term += dirichlet_neg_entropy(phi.sensor.block(c)) -
                        dirichlet_cross_log_density(phi.sensor.block(c), post.sensor[c]);
            for (std::size_t c = 0; c < phi.transition.n_contexts(); ++c)
                term += dirichlet_neg_entropy(phi.transition.block(c)) -
                        dirichlet_cross_log_density(phi.transition.block(c), post.transition[c]);
            term += dirichlet_neg_entropy(phi.initial.block(0)) -
                    dirichlet_cross_log_density(phi.initial.block(0), post.initial);
            kl += r_path * term;
        }
        // next path (odometer)
        std::size_t pos = t;
        while (pos > 0) {
            if (++path[pos - 1] < n_env) break;
            path[pos - 1] = 0;
            --pos;
        }
        if (pos == 0) break;
    }
    return kl;
}

}  // namespace paip
