#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <utility>
#include <variant>
#include <vector>

#include "paip/gen_model.hpp"
#include "paip/pa_loop.hpp"
#include "paip/prob.hpp"

namespace paip {

// ---------------------------------------------------------------------------
// The universal-reinforcement-learning specialization: a finite class of
// environment components with mixture weights, the one-line Bayes weight
// update, and the embedding of the history space as the internal environment
// state space of the generic machinery.
// ---------------------------------------------------------------------------

/// One environment hypothesis: a conditional predictor p(s | a, history).
/// Either a memoryless table (rows per action) or a full environment whose
/// belief state is filtered along the history.
class EnvComponent {
public:
    /// Memoryless: p(s|a) ignores the history.
    explicit EnvComponent(ConditionalTable action_table) : model_(std::move(action_table)) {}

    /// Belief-filtering wrapper around a full environment.
    explicit EnvComponent(EnvironmentSpec env) : model_(std::move(env)) {}

    std::size_t n_sensor_values() const {
        if (const auto* table = std::get_if<ConditionalTable>(&model_))
            return table->target_size();
        return std::get<EnvironmentSpec>(model_).n_sensor_values();
    }

    std::size_t n_actions() const {
        if (const auto* table = std::get_if<ConditionalTable>(&model_)) return table->n_rows();
        return std::get<EnvironmentSpec>(model_).n_actions;
    }

    /// p(s | a, history): the predictive probability of observing s after
    /// taking a with the given past.
    double predict(std::size_t s, std::size_t a, const History& h) const {
        if (const auto* table = std::get_if<ConditionalTable>(&model_)) return (*table)(a, s);
        const auto& env = std::get<EnvironmentSpec>(model_);
        // Filter the belief over environment states along the history, then
        // push it through (a, sensor).
        std::vector<double> belief(env.n_env_states(), 0.0);
        {
            // condition e_0 on s_0, then alternate transition and emission
            double z = 0.0;
            for (std::size_t e = 0; e < belief.size(); ++e) {
                belief[e] = env.initial[e] * env.sensor(e, h.sensors()[0]);
                z += belief[e];
            }
            if (z <= 0.0) return 0.0;
            for (double& b : belief) b /= z;
            for (std::size_t r = 1; r < h.t(); ++r) {
                std::vector<double> next(belief.size(), 0.0);
                double zr = 0.0;
                for (std::size_t e1 = 0; e1 < belief.size(); ++e1) {
                    double move = 0.0;
                    for (std::size_t e0 = 0; e0 < belief.size(); ++e0)
                        move += env.transition(env.transition_row(h.actions()[r - 1], e0), e1) *
                                belief[e0];
                    next[e1] = move * env.sensor(e1, h.sensors()[r]);
                    zr += next[e1];
                }
                if (zr <= 0.0) return 0.0;
                for (double& b : next) b /= zr;
                belief = std::move(next);
            }
        }
        double p = 0.0;
        for (std::size_t e1 = 0; e1 < belief.size(); ++e1) {
            double move = 0.0;
            for (std::size_t e0 = 0; e0 < belief.size(); ++e0)
                move += env.transition(env.transition_row(a, e0), e1) * belief[e0];
            p += env.sensor(e1, s) * move;
        }
        return p;
    }

private:
    std::variant<ConditionalTable, EnvironmentSpec> model_;
};

/// A finite environment class with mixture weights over its components.
struct EnvClass {
    EnvClass(std::vector<EnvComponent> components, Categorical weights)
        : components(std::move(components)), weights(std::move(weights)) {
        if (this->components.empty()) throw ShapeMismatch("EnvClass: no components");
        if (this->weights.size() != this->components.size())
            throw ShapeMismatch("EnvClass: weight count mismatch");
        for (const auto& c : this->components)
            if (c.n_sensor_values() != this->components.front().n_sensor_values() ||
                c.n_actions() != this->components.front().n_actions())
                throw ShapeMismatch("EnvClass: components disagree on spaces");
    }

    std::size_t n_sensor_values() const { return components.front().n_sensor_values(); }
    std::size_t n_actions() const { return components.front().n_actions(); }

    /// Mixture predictive p(s | a, history) = sum_k w_k p(s | a, history, k).
    double mixture_predictive(std::size_t s, std::size_t a, const History& h) const {
        double p = 0.0;
        for (std::size_t k = 0; k < components.size(); ++k)
            p += weights[k] * components[k].predict(s, a, h);
        return p;
    }

    std::vector<EnvComponent> components;
    Categorical weights;
};

/// Bayes update of the mixture weights after observing s following action a:
/// w'(k) proportional to p(s | a, history, k) w(k).
inline EnvClass mixture_update(const EnvClass& spec, std::size_t s, std::size_t a,
                               const History& h) {
    if (s >= spec.n_sensor_values()) throw IndexOutOfRange("mixture_update: sensor out of range");
    if (a >= spec.n_actions()) throw IndexOutOfRange("mixture_update: action out of range");
    std::vector<double> w(spec.components.size());
    double z = 0.0;
    for (std::size_t k = 0; k < spec.components.size(); ++k) {
        w[k] = spec.weights[k] * spec.components[k].predict(s, a, h);
        z += w[k];
    }
    if (!(z > 0.0))
        throw ZeroEvidence("mixture_update: every component excludes the observation");
    return EnvClass(spec.components, Categorical::normalized(std::move(w)));
}

// ---------------------------------------------------------------------------
// History-space embedding. Internal environment states become the histories
// reachable from the observed initial sensor value; transitions concatenate
// one (sensor, action) pair; the sensor model reads out the last sensor
// value. Each component yields a point prior on the transition blocks, so the
// generic exact machinery reproduces the mixture's predictions and updates.
// ---------------------------------------------------------------------------

/// A history-valued internal state.
struct HistoryState {
    std::vector<std::size_t> sensors;  // s_0 .. s_d
    std::vector<std::size_t> actions;  // a_1 .. a_d

    std::size_t depth() const { return actions.size(); }
    std::size_t last_sensor() const { return sensors.back(); }

    bool operator<(const HistoryState& o) const {
        if (sensors != o.sensors) return sensors < o.sensors;
        return actions < o.actions;
    }
};

struct UrlEmbedding {
    ModelSpaces spaces;                     // n_env = number of history states
    std::vector<HistoryState> states;       // index -> history value
    std::map<HistoryState, std::size_t> index;
    std::vector<HyperParams> component_priors;  // point priors, one per component
    Categorical weights;

    /// Concentration used to encode a known table as a Dirichlet point prior.
    static constexpr double kPointConcentration = 1e14;
    static constexpr double kZeroConcentration = 1e-6;
};

/// Builds the embedded model for inference at time t (histories of up to t-1
/// concatenation steps rooted at the observed initial sensor value).
inline UrlEmbedding embed_history_env(const EnvClass& spec, std::size_t t, std::size_t s0,
                                      double max_states = 1e4) {
    if (t < 1) throw ShapeMismatch("embed_history_env: t must be >= 1");
    if (s0 >= spec.n_sensor_values()) throw IndexOutOfRange("embed_history_env: s0 out of range");
    const std::size_t n_s = spec.n_sensor_values();
    const std::size_t n_a = spec.n_actions();

    UrlEmbedding em;
    em.weights = spec.weights;
    // Breadth-first enumeration of history states, depth 0 .. t-1.
    em.states.push_back({{s0}, {}});
    std::size_t level_begin = 0;
    for (std::size_t depth = 1; depth < t; ++depth) {
        const std::size_t level_end = em.states.size();
        for (std::size_t i = level_begin; i < level_end; ++i)
            for (std::size_t s = 0; s < n_s; ++s)
                for (std::size_t a = 0; a < n_a; ++a) {
                    HistoryState next = em.states[i];
                    next.sensors.push_back(s);
                    next.actions.push_back(a);
                    em.states.push_back(std::move(next));
                }
        level_begin = level_end;
        if (static_cast<double>(em.states.size()) > max_states)
            throw ComplexityRefusal("embed_history_env: history space exceeds " +
                                    std::to_string(max_states) + " states");
    }
    for (std::size_t i = 0; i < em.states.size(); ++i) em.index[em.states[i]] = i;

    const std::size_t n_env = em.states.size();
    em.spaces = ModelSpaces{n_env, n_s, n_a, HorizonRule::fixed(t)};

    // Shared sensor read-out and initial blocks.
    std::vector<std::vector<double>> sensor_blocks(n_env,
                                                   std::vector<double>(n_s, UrlEmbedding::kZeroConcentration));
    for (std::size_t i = 0; i < n_env; ++i)
        sensor_blocks[i][em.states[i].last_sensor()] = UrlEmbedding::kPointConcentration;
    std::vector<double> initial_block(n_env, UrlEmbedding::kZeroConcentration);
    initial_block[0] = UrlEmbedding::kPointConcentration;

    for (std::size_t k = 0; k < spec.components.size(); ++k) {
        std::vector<std::vector<double>> trans_blocks(
            n_a * n_env, std::vector<double>(n_env, UrlEmbedding::kZeroConcentration));
        for (std::size_t i = 0; i < n_env; ++i) {
            const HistoryState& hs = em.states[i];
            // Reconstruct the History value for the component predictor.
            History h = History::init(hs.sensors[0]);
            for (std::size_t d = 0; d < hs.depth(); ++d)
                h = memory_append(h, hs.sensors[d + 1], hs.actions[d]);
            for (std::size_t a = 0; a < n_a; ++a) {
                const std::size_t ctx = a * n_env + i;
                if (hs.depth() + 1 < t) {
                    for (std::size_t s = 0; s < n_s; ++s) {
                        HistoryState next = hs;
                        next.sensors.push_back(s);
                        next.actions.push_back(a);
                        const double p = spec.components[k].predict(s, a, h);
                        if (p > 0.0)
                            trans_blocks[ctx][em.index.at(next)] =
                                UrlEmbedding::kPointConcentration * p;
                    }
                } else {
                    // Deepest layer: self-loop so every block stays a valid prior.
                    trans_blocks[ctx][i] = UrlEmbedding::kPointConcentration;
                }
            }
        }
        em.component_priors.push_back(HyperParams(
            em.spaces, DirichletParams(sensor_blocks), DirichletParams(std::move(trans_blocks)),
            DirichletParams(std::vector<std::vector<double>>{initial_block})));
    }
    return em;
}

}  // namespace paip
