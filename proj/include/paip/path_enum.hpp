#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "paip/gen_model.hpp"
#include "paip/prob.hpp"

namespace paip {

// ---------------------------------------------------------------------------
// Joint enumeration of future (environment path, sensor path) probabilities.
// One enumeration engine serves the exact, variational and point-parameter
// predictive distributions; they differ only in the mixture components fed in.
// ---------------------------------------------------------------------------

/// Joint distribution over environment paths x sensor paths of a fixed
/// length. Path indices are most-significant-first: the path (x_0,..,x_{L-1})
/// over a base-n space has index ((x_0*n + x_1)*n + ...) + x_{L-1}.
struct PathJoint {
    std::size_t steps = 0;
    std::size_t n_env = 0;
    std::size_t n_sensor = 0;
    std::vector<double> cells;  // [env_path_index * n_sensor_paths + sensor_path_index]

    std::size_t n_env_paths() const { return ipow(n_env, steps); }
    std::size_t n_sensor_paths() const { return ipow(n_sensor, steps); }

    static std::size_t ipow(std::size_t base, std::size_t exp) {
        std::size_t v = 1;
        for (std::size_t i = 0; i < exp; ++i) v *= base;
        return v;
    }

    double cell(std::size_t env_path, std::size_t sensor_path) const {
        return cells[env_path * n_sensor_paths() + sensor_path];
    }

    std::vector<double> env_marginal() const {
        const std::size_t ns = n_sensor_paths();
        std::vector<double> m(n_env_paths(), 0.0);
        for (std::size_t e = 0; e < m.size(); ++e)
            for (std::size_t s = 0; s < ns; ++s) m[e] += cells[e * ns + s];
        return m;
    }

    std::vector<double> sensor_marginal() const {
        const std::size_t ns = n_sensor_paths();
        std::vector<double> m(ns, 0.0);
        for (std::size_t e = 0; e < n_env_paths(); ++e)
            for (std::size_t s = 0; s < ns; ++s) m[s] += cells[e * ns + s];
        return m;
    }

    /// Conditional distribution over sensor paths given one environment path.
    std::vector<double> sensor_given_env(std::size_t env_path) const {
        const std::size_t ns = n_sensor_paths();
        double z = 0.0;
        for (std::size_t s = 0; s < ns; ++s) z += cells[env_path * ns + s];
        if (z < kNullEventFloor)
            throw ConditioningOnNullEvent("sensor_given_env: environment path has no mass");
        std::vector<double> out(ns);
        for (std::size_t s = 0; s < ns; ++s) out[s] = cells[env_path * ns + s] / z;
        return out;
    }

    /// Digit of a path index at a given step (0 = first step).
    std::size_t digit(std::size_t path, std::size_t step, std::size_t base) const {
        const std::size_t shift = steps - 1 - step;
        std::size_t v = path;
        for (std::size_t i = 0; i < shift; ++i) v /= base;
        return v % base;
    }

    /// Per-step joint over (e_tau, s_tau), row-major e * n_sensor + s.
    std::vector<double> step_joint(std::size_t step) const {
        std::vector<double> m(n_env * n_sensor, 0.0);
        const std::size_t ns = n_sensor_paths();
        for (std::size_t e = 0; e < n_env_paths(); ++e) {
            const std::size_t ed = digit(e, step, n_env);
            for (std::size_t s = 0; s < ns; ++s)
                m[ed * n_sensor + digit(s, step, n_sensor)] += cells[e * ns + s];
        }
        return m;
    }

    std::vector<double> sensor_step_marginal(std::size_t step) const {
        std::vector<double> m(n_sensor, 0.0);
        const auto sm = sensor_marginal();
        for (std::size_t s = 0; s < sm.size(); ++s) m[digit(s, step, n_sensor)] += sm[s];
        return m;
    }

    std::vector<double> final_sensor_marginal() const { return sensor_step_marginal(steps - 1); }

    /// Joint over two consecutive blocks of sensor steps: [first_len steps
    /// starting at 0] x [second_len steps starting at first_len]; any later
    /// steps are marginalized out. Row-major block1 * n_block2 + block2.
    std::vector<double> sensor_block_joint(std::size_t first_len, std::size_t second_len) const {
        if (first_len + second_len > steps)
            throw ShapeMismatch("sensor_block_joint: blocks exceed horizon");
        const std::size_t n1 = ipow(n_sensor, first_len);
        const std::size_t n2 = ipow(n_sensor, second_len);
        std::vector<double> m(n1 * n2, 0.0);
        const auto sm = sensor_marginal();
        const std::size_t tail = ipow(n_sensor, steps - first_len - second_len);
        for (std::size_t s = 0; s < sm.size(); ++s) {
            const std::size_t head = s / tail;  // first first_len+second_len digits
            m[head / n2 * n2 + head % n2] += sm[s];
        }
        return m;
    }
};

/// One mixture component of a predictive distribution: a weight, the state
/// entering the future block and the parameter blocks to predict with. With
/// integrate set, the alphas are Dirichlet concentrations and every step uses
/// the sequential predictive (alpha + seen) / (alpha0 + n); otherwise the rows
/// are exact probability tables.
struct PredictiveComponent {
    double weight = 1.0;
    std::size_t e_prev = 0;
    std::vector<std::vector<double>> sensor;      // [env][sensor]
    std::vector<std::vector<double>> transition;  // [action * n_env + env][env]
    bool integrate = true;
};

namespace detail {

struct PathEnumerator {
    const ModelSpaces& spaces;
    const std::vector<std::size_t>& actions;
    std::vector<std::vector<double>> alpha_sensor;
    std::vector<std::vector<double>> alpha_transition;
    std::vector<double> sensor_totals;
    std::vector<double> transition_totals;
    bool integrate = true;
    PathJoint* out = nullptr;

    void run(const PredictiveComponent& comp) {
        alpha_sensor = comp.sensor;
        alpha_transition = comp.transition;
        sensor_totals.assign(alpha_sensor.size(), 0.0);
        for (std::size_t i = 0; i < alpha_sensor.size(); ++i)
            for (double a : alpha_sensor[i]) sensor_totals[i] += a;
        transition_totals.assign(alpha_transition.size(), 0.0);
        for (std::size_t i = 0; i < alpha_transition.size(); ++i)
            for (double a : alpha_transition[i]) transition_totals[i] += a;
        integrate = comp.integrate;
        descend(0, comp.e_prev, 0, 0, comp.weight);
    }

    void descend(std::size_t step, std::size_t e_prev, std::size_t env_path,
                 std::size_t sensor_path, double prob) {
        if (step == actions.size()) {
            out->cells[env_path * out->n_sensor_paths() + sensor_path] += prob;
            return;
        }
        const std::size_t trans_ctx = spaces.transition_context(actions[step], e_prev);
        auto& trow = alpha_transition[trans_ctx];
        for (std::size_t e = 0; e < spaces.n_env; ++e) {
            const double pt = integrate ? trow[e] / transition_totals[trans_ctx] : trow[e];
            if (pt <= 0.0) continue;
            if (integrate) {
                trow[e] += 1.0;
                transition_totals[trans_ctx] += 1.0;
            }
            auto& srow = alpha_sensor[e];
            for (std::size_t s = 0; s < spaces.n_sensor; ++s) {
                const double ps = integrate ? srow[s] / sensor_totals[e] : srow[s];
                if (ps <= 0.0) continue;
                if (integrate) {
                    srow[s] += 1.0;
                    sensor_totals[e] += 1.0;
                }
                descend(step + 1, e, env_path * spaces.n_env + e,
                        sensor_path * spaces.n_sensor + s, prob * pt * ps);
                if (integrate) {
                    srow[s] -= 1.0;
                    sensor_totals[e] -= 1.0;
                }
            }
            if (integrate) {
                trow[e] -= 1.0;
                transition_totals[trans_ctx] -= 1.0;
            }
        }
    }
};

}  // namespace detail

/// Enumerates the joint path distribution of a mixture of predictive
/// components. max_cells caps the enumerated table size.
inline PathJoint enumerate_path_joint(const std::vector<PredictiveComponent>& components,
                                      const ModelSpaces& spaces,
                                      const std::vector<std::size_t>& actions,
                                      double max_cells = 1e6) {
    for (std::size_t a : actions)
        if (a >= spaces.n_action) throw IndexOutOfRange("enumerate_path_joint: action out of range");
    const double cell_count = std::pow(static_cast<double>(spaces.n_env), static_cast<double>(actions.size())) *
                              std::pow(static_cast<double>(spaces.n_sensor), static_cast<double>(actions.size()));
    if (cell_count > max_cells)
        throw ComplexityRefusal("enumerate_path_joint: " + std::to_string(cell_count) +
                                " cells exceed the cap of " + std::to_string(max_cells));
    PathJoint joint;
    joint.steps = actions.size();
    joint.n_env = spaces.n_env;
    joint.n_sensor = spaces.n_sensor;
    joint.cells.assign(static_cast<std::size_t>(cell_count), 0.0);
    detail::PathEnumerator en{spaces, actions};
    en.out = &joint;
    for (const auto& comp : components) {
        if (comp.sensor.size() != spaces.n_env ||
            comp.transition.size() != spaces.n_action * spaces.n_env)
            throw ShapeMismatch("enumerate_path_joint: component block shape mismatch");
        if (comp.e_prev >= spaces.n_env)
            throw IndexOutOfRange("enumerate_path_joint: component e_prev out of range");
        en.run(comp);
    }
    return joint;
}

}  // namespace paip
