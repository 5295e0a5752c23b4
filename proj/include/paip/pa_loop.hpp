#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "paip/prob.hpp"
#include "paip/rng.hpp"

namespace paip {

// ---------------------------------------------------------------------------
// The ground-truth perception-action loop: environment state, sensor emission,
// a perfect-memory agent interface, and the episode driver.
// ---------------------------------------------------------------------------

/// True environment dynamics. Transition rows are indexed by the flattened
/// pair (action, state); sensor rows by state.
struct EnvironmentSpec {
    EnvironmentSpec(Categorical initial, ConditionalTable transition, ConditionalTable sensor,
                    std::size_t n_actions)
        : initial(std::move(initial)),
          transition(std::move(transition)),
          sensor(std::move(sensor)),
          n_actions(n_actions) {
        const std::size_t n_env = this->initial.size();
        if (this->transition.n_rows() != n_actions * n_env ||
            this->transition.target_size() != n_env)
            throw ShapeMismatch("EnvironmentSpec: transition table shape mismatch");
        if (this->sensor.n_rows() != n_env) throw ShapeMismatch("EnvironmentSpec: sensor table shape mismatch");
    }

    std::size_t n_env_states() const { return initial.size(); }
    std::size_t n_sensor_values() const { return sensor.target_size(); }

    std::size_t transition_row(std::size_t action, std::size_t state) const {
        return action * n_env_states() + state;
    }

    Categorical initial;
    ConditionalTable transition;
    ConditionalTable sensor;
    std::size_t n_actions;
};

/// Perfect-memory agent state: all past sensor values s_0..s_{t-1} and past
/// actions a_1..a_{t-1}. The time index t is the number of stored sensors.
class History {
public:
    /// Memory right after the initial observation: m_1 = (s_0).
    static History init(std::size_t s0) {
        History h;
        h.sensors_.push_back(s0);
        return h;
    }

    History() = default;

    std::size_t t() const { return sensors_.size(); }
    const std::vector<std::size_t>& sensors() const { return sensors_; }
    const std::vector<std::size_t>& actions() const { return actions_; }

    bool valid() const { return sensors_.size() == actions_.size() + 1 || sensors_.empty(); }

private:
    std::vector<std::size_t> sensors_;
    std::vector<std::size_t> actions_;
    friend History memory_append(const History&, std::size_t, std::size_t);
};

/// m_{t+1} = m_t s_t a_t. Returns a new history; the original is untouched.
inline History memory_append(const History& h, std::size_t sensor, std::size_t action) {
    if (h.sensors_.empty())
        throw ShapeMismatch("memory_append: start from History::init(s0)");
    History out = h;
    out.sensors_.push_back(sensor);
    out.actions_.push_back(action);
    return out;
}

using AgentPolicy = std::function<Categorical(const History&)>;

/// One sampled environment transition followed by the sensor emission.
inline std::pair<std::size_t, std::size_t> env_step(const EnvironmentSpec& env, std::size_t e,
                                                    std::size_t a, Rng& rng) {
    if (e >= env.n_env_states()) throw IndexOutOfRange("env_step: unknown environment state");
    if (a >= env.n_actions) throw IndexOutOfRange("env_step: unknown action");
    const std::size_t e_next = sample_categorical(env.transition.row(env.transition_row(a, e)), rng);
    const std::size_t s_next = sample_categorical(env.sensor.row(e_next), rng);
    return {e_next, s_next};
}

struct TrajectoryStep {
    std::size_t t;
    std::size_t env_state;
    std::size_t sensor;
    std::optional<std::size_t> action;  // empty at t = 0
};

struct Trajectory {
    std::vector<TrajectoryStep> steps;  // t = 0 .. T
    RngSeed seed;
};

/// Runs one episode of exactly T action steps. Sampling order per the loop's
/// causal structure: e_0, s_0, then for t = 1..T the action a_t from the
/// memory m_t, the transition e_t and the emission s_t. Fully reproducible
/// from the seed.
inline Trajectory run_episode(const EnvironmentSpec& env, const AgentPolicy& agent, std::size_t T,
                              RngSeed seed) {
    if (T < 1) throw ShapeMismatch("run_episode: T must be >= 1");
    Rng rng(seed);
    Trajectory traj;
    traj.seed = seed;
    std::size_t e = sample_categorical(env.initial, rng);
    std::size_t s = sample_categorical(env.sensor.row(e), rng);
    traj.steps.push_back({0, e, s, std::nullopt});
    History memory = History::init(s);
    for (std::size_t t = 1; t <= T; ++t) {
        Categorical policy = [&] {
            try {
                return agent(memory);
            } catch (const Error& err) {
                throw Error("agent failed at step " + std::to_string(t) + ": " + err.what());
            }
        }();
        if (policy.size() != env.n_actions)
            throw ShapeMismatch("run_episode: agent policy has wrong action count at step " +
                                std::to_string(t));
        const std::size_t a = sample_categorical(policy, rng);
        auto [e_next, s_next] = env_step(env, e, a, rng);
        e = e_next;
        s = s_next;
        traj.steps.push_back({t, e, s, a});
        memory = memory_append(memory, s, a);
    }
    return traj;
}

}  // namespace paip
