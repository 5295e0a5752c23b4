#pragma once

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "paip/pa_loop.hpp"
#include "paip/prob.hpp"

namespace paip {

// ---------------------------------------------------------------------------
// The agent-internal hierarchical generative model: parameterized sensor,
// transition and initial-state models with Dirichlet priors.
// ---------------------------------------------------------------------------

/// Horizon rule: either the model always plans to a fixed final step, or it
/// slides a window of n steps ahead of the current time.
struct HorizonRule {
    enum class Kind { kFixed, kSliding } kind = Kind::kFixed;
    std::size_t value = 1;  // fixed: the final step; sliding: the lookahead n

    static HorizonRule fixed(std::size_t T) { return {Kind::kFixed, T}; }
    static HorizonRule sliding(std::size_t n) { return {Kind::kSliding, n}; }

    std::size_t horizon_for(std::size_t t) const {
        if (t < 1) throw IndexOutOfRange("horizon_for: t must be >= 1");
        return kind == Kind::kFixed ? value : t + value;
    }
};

/// Index-set sizes of the internal model. Sensor and action spaces must match
/// the loop's; the internal environment space may differ from the true one.
struct ModelSpaces {
    std::size_t n_env = 0;     // |E hat|
    std::size_t n_sensor = 0;  // |S hat| = |S|
    std::size_t n_action = 0;  // |A hat| = |A|
    HorizonRule horizon;

    std::size_t transition_context(std::size_t action, std::size_t env_state) const {
        return action * n_env + env_state;
    }
};

/// Dirichlet hyperparameters: one sensor block per internal state, one
/// transition block per (action, state) pair, one initial-state block.
struct HyperParams {
    HyperParams(ModelSpaces spaces, DirichletParams sensor, DirichletParams transition,
                DirichletParams initial)
        : spaces(spaces),
          sensor(std::move(sensor)),
          transition(std::move(transition)),
          initial(std::move(initial)) {
        if (this->sensor.n_contexts() != spaces.n_env ||
            this->sensor.target_size() != spaces.n_sensor)
            throw ShapeMismatch("HyperParams: sensor block shape mismatch");
        if (this->transition.n_contexts() != spaces.n_action * spaces.n_env ||
            this->transition.target_size() != spaces.n_env)
            throw ShapeMismatch("HyperParams: transition block shape mismatch");
        if (this->initial.n_contexts() != 1 || this->initial.target_size() != spaces.n_env)
            throw ShapeMismatch("HyperParams: initial block shape mismatch");
    }

    /// Symmetric prior with the same concentration everywhere.
    static HyperParams symmetric(ModelSpaces spaces, double conc) {
        return HyperParams(spaces,
                           DirichletParams::symmetric(spaces.n_env, spaces.n_sensor, conc),
                           DirichletParams::symmetric(spaces.n_action * spaces.n_env, spaces.n_env, conc),
                           DirichletParams::symmetric(1, spaces.n_env, conc));
    }

    ModelSpaces spaces;
    DirichletParams sensor;      // xi^1
    DirichletParams transition;  // xi^2
    DirichletParams initial;     // xi^3
};

/// A point value of the model parameters: concrete stochastic tables.
struct ThetaPoint {
    ThetaPoint(ModelSpaces spaces, ConditionalTable sensor, ConditionalTable transition,
               Categorical initial)
        : spaces(spaces),
          sensor(std::move(sensor)),
          transition(std::move(transition)),
          initial(std::move(initial)) {
        if (this->sensor.n_rows() != spaces.n_env || this->sensor.target_size() != spaces.n_sensor)
            throw ShapeMismatch("ThetaPoint: sensor table shape mismatch");
        if (this->transition.n_rows() != spaces.n_action * spaces.n_env ||
            this->transition.target_size() != spaces.n_env)
            throw ShapeMismatch("ThetaPoint: transition table shape mismatch");
        if (this->initial.size() != spaces.n_env)
            throw ShapeMismatch("ThetaPoint: initial distribution shape mismatch");
    }

    ModelSpaces spaces;
    ConditionalTable sensor;      // theta^1
    ConditionalTable transition;  // theta^2
    Categorical initial;          // theta^3
};

/// Externally specified prior over future sensor values. Either one
/// distribution reused at every step or an explicit per-step schedule.
struct DesiredPrior {
    explicit DesiredPrior(Categorical dist) : per_step{std::move(dist)} {}
    explicit DesiredPrior(std::vector<Categorical> schedule) : per_step(std::move(schedule)) {
        if (per_step.empty()) throw ShapeMismatch("DesiredPrior: empty schedule");
    }

    /// Distribution for the i-th future step (0-based); a single-entry prior
    /// is time-homogeneous.
    const Categorical& at(std::size_t i) const {
        return per_step.size() == 1 ? per_step.front() : per_step.at(i);
    }

    std::vector<Categorical> per_step;
};

/// The predictive factor: product over the future of sensor emission and
/// transition probabilities at a known theta. Sequences run over the steps
/// t..T-hat and share one length; e_prev is the state entering the block.
inline double predictive_factor(const ThetaPoint& theta, const std::vector<std::size_t>& sensors,
                                const std::vector<std::size_t>& env_states,
                                const std::vector<std::size_t>& actions, std::size_t e_prev) {
    if (sensors.size() != env_states.size() || sensors.size() != actions.size())
        throw ShapeMismatch("predictive_factor: sequence lengths differ");
    if (e_prev >= theta.spaces.n_env) throw IndexOutOfRange("predictive_factor: e_prev out of range");
    double p = 1.0;
    std::size_t e = e_prev;
    for (std::size_t r = 0; r < sensors.size(); ++r) {
        if (env_states[r] >= theta.spaces.n_env || sensors[r] >= theta.spaces.n_sensor ||
            actions[r] >= theta.spaces.n_action)
            throw IndexOutOfRange("predictive_factor: index out of range");
        p *= theta.transition(theta.spaces.transition_context(actions[r], e), env_states[r]);
        p *= theta.sensor(env_states[r], sensors[r]);
        e = env_states[r];
    }
    return p;
}

/// Discrete part of the model joint at a known theta: initial state, all
/// emissions and transitions, and the supplied per-step action distributions
/// q(a_t). Sequences are indexed from time 0 (states and sensors) and time 1
/// (actions); action_dists[i] is the distribution of the action at step i+1.
inline double joint_model_prob(const ThetaPoint& theta, const std::vector<std::size_t>& sensors,
                               const std::vector<std::size_t>& env_states,
                               const std::vector<std::size_t>& actions,
                               const std::vector<Categorical>& action_dists) {
    if (sensors.size() != env_states.size() || sensors.empty())
        throw ShapeMismatch("joint_model_prob: need matching s_{0:T} and e_{0:T}");
    if (actions.size() + 1 != env_states.size() || action_dists.size() != actions.size())
        throw ShapeMismatch("joint_model_prob: need T actions and action distributions");
    if (env_states[0] >= theta.spaces.n_env || sensors[0] >= theta.spaces.n_sensor)
        throw IndexOutOfRange("joint_model_prob: index out of range");
    double p = theta.initial[env_states[0]] * theta.sensor(env_states[0], sensors[0]);
    for (std::size_t r = 0; r < actions.size(); ++r) {
        if (actions[r] >= theta.spaces.n_action) throw IndexOutOfRange("joint_model_prob: action out of range");
        p *= action_dists[r][actions[r]];
        p *= predictive_factor(theta, {sensors[r + 1]}, {env_states[r + 1]}, {actions[r]},
                               env_states[r]);
    }
    return p;
}

}  // namespace paip
