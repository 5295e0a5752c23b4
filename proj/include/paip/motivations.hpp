#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "paip/gen_model.hpp"
#include "paip/prob.hpp"
#include "paip/views.hpp"

namespace paip {

// ---------------------------------------------------------------------------
// Intrinsic motivation functions over posterior views, and the action-value
// functions they induce.
// ---------------------------------------------------------------------------

enum class MotivationKind {
    kFep,
    kFepFriston2015,
    kEmpowerment,
    kPredictiveInfo,
    kKsa,
    kExtrinsicOnly,
    kWeightedSum,
};

struct BlahutArimotoOptions {
    double tol = 1e-9;
    std::size_t max_iterations = 1000;
};

struct MotivationConfig {
    MotivationKind kind = MotivationKind::kFep;
    std::optional<DesiredPrior> desired;  // extrinsic KL target
    bool include_info_gain = false;       // fep only
    ThetaSubset subset = ThetaSubset::all();
    bool time_summed = false;
    std::size_t emp_n = 0;  // empowerment: n+1 actions evaluated
    std::size_t emp_m = 1;  // empowerment: m-step channel into the final sensor
    std::size_t pi_k = 0;   // predictive information half horizon; 0 = half the horizon
    BlahutArimotoOptions ba;
    std::vector<std::pair<double, MotivationConfig>> terms;  // weighted_sum

    /// Prediction horizon length required for an action sequence of length
    /// len_a. Empowerment looks emp_m steps past the evaluated actions.
    std::size_t prediction_len(std::size_t len_a) const {
        if (kind == MotivationKind::kEmpowerment) return len_a + emp_m;
        if (kind == MotivationKind::kWeightedSum) {
            std::size_t len = len_a;
            for (const auto& [w, sub] : terms) len = std::max(len, sub.prediction_len(len_a));
            return len;
        }
        return len_a;
    }

    /// Whether evaluation queries the parameter posterior (which Thompson
    /// sampling cannot serve).
    bool requires_parameter_atoms() const {
        if (kind == MotivationKind::kKsa) return true;
        if (kind == MotivationKind::kFep && include_info_gain) return true;
        if (kind == MotivationKind::kWeightedSum)
            for (const auto& [w, sub] : terms)
                if (sub.requires_parameter_atoms()) return true;
        return false;
    }
};

/// Negative conditional entropy of future sensor paths given environment
/// paths, -H(S|E, actions); <= 0, zero iff emission is deterministic on every
/// reachable path. Time-summed form sums the per-step conditional entropies.
inline double fep_entropy_term(const PosteriorView& view, const std::vector<std::size_t>& actions,
                               bool time_summed = false) {
    const PathJoint joint = view.joint(actions);
    double value = 0.0;
    if (!time_summed) {
        const auto env = joint.env_marginal();
        const std::size_t ns = joint.n_sensor_paths();
        for (std::size_t e = 0; e < env.size(); ++e) {
            if (env[e] <= 0.0) continue;
            for (std::size_t s = 0; s < ns; ++s) {
                const double c = joint.cells[e * ns + s];
                if (c > 0.0) value += c * std::log(c / env[e]);
            }
        }
    } else {
        for (std::size_t tau = 0; tau < joint.steps; ++tau) {
            const auto step = joint.step_joint(tau);
            std::vector<double> env(joint.n_env, 0.0);
            for (std::size_t e = 0; e < joint.n_env; ++e)
                for (std::size_t s = 0; s < joint.n_sensor; ++s) env[e] += step[e * joint.n_sensor + s];
            for (std::size_t e = 0; e < joint.n_env; ++e) {
                if (env[e] <= 0.0) continue;
                for (std::size_t s = 0; s < joint.n_sensor; ++s) {
                    const double c = step[e * joint.n_sensor + s];
                    if (c > 0.0) value += c * std::log(c / env[e]);
                }
            }
        }
    }
    return std::min(value, 0.0);
}

/// KL from the predicted sensor distribution to the externally specified
/// desired prior; >= 0. The full-sequence form measures against the product
/// of the per-step priors.
inline double extrinsic_kl_term(const PosteriorView& view, const std::vector<std::size_t>& actions,
                                const DesiredPrior& desired, bool time_summed = false) {
    const PathJoint joint = view.joint(actions);
    double value = 0.0;
    if (time_summed) {
        for (std::size_t tau = 0; tau < joint.steps; ++tau) {
            const auto marg = joint.sensor_step_marginal(tau);
            const Categorical& pd = desired.at(tau);
            if (pd.size() != joint.n_sensor) throw ShapeMismatch("extrinsic_kl_term: desired prior size");
            for (std::size_t s = 0; s < joint.n_sensor; ++s) {
                if (marg[s] <= 0.0) continue;
                if (pd[s] < kNullEventFloor)
                    throw AbsoluteContinuityViolation(
                        "extrinsic_kl_term: desired prior is zero at a reachable sensor value");
                value += marg[s] * std::log(marg[s] / pd[s]);
            }
        }
    } else {
        const auto marg = joint.sensor_marginal();
        for (std::size_t sp = 0; sp < marg.size(); ++sp) {
            if (marg[sp] <= 0.0) continue;
            double log_pd = 0.0;
            for (std::size_t tau = 0; tau < joint.steps; ++tau) {
                const double p = desired.at(tau)[joint.digit(sp, tau, joint.n_sensor)];
                if (p < kNullEventFloor)
                    throw AbsoluteContinuityViolation(
                        "extrinsic_kl_term: desired prior is zero at a reachable sensor value");
                log_pd += std::log(p);
            }
            value += marg[sp] * (std::log(marg[sp]) - log_pd);
        }
    }
    return std::max(value, 0.0);
}

namespace detail {

/// Groups a view's components into parameter atoms under the subset and
/// returns the joint over (atom, sensor path); rows in atom order.
inline std::vector<std::vector<double>> atom_sensor_joint(const PosteriorView& view,
                                                          const std::vector<std::size_t>& actions,
                                                          const ThetaSubset& subset) {
    if (!view.supports_parameter_atoms())
        throw UnsupportedView("information gain: view has no parameter posterior");
    std::map<std::string, std::size_t> atom_of_key;
    std::vector<std::vector<double>> rows;
    for (std::size_t c = 0; c < view.n_components(); ++c) {
        const std::string key = view.component_atom_key(c, subset);
        auto [it, inserted] = atom_of_key.try_emplace(key, rows.size());
        const PathJoint joint = view.component_joint(c, actions);
        const auto marg = joint.sensor_marginal();
        if (inserted) {
            rows.emplace_back(marg.size(), 0.0);
        }
        auto& row = rows[it->second];
        const double w = view.component_weight(c);
        for (std::size_t s = 0; s < marg.size(); ++s) row[s] += w * marg[s];
    }
    return rows;
}

inline double mi_of_rows(const std::vector<std::vector<double>>& rows) {
    std::vector<double> flat;
    flat.reserve(rows.size() * rows.front().size());
    for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
    return mutual_information(Categorical::normalized(std::move(flat)), rows.size(),
                              rows.front().size());
}

}  // namespace detail

/// Information gain I(S_{t:T}: Theta-subset | actions), computed on the
/// discrete mixture atoms of the view's parameter posterior. Time-summed form
/// sums the per-step gains.
inline double info_gain(const PosteriorView& view, const std::vector<std::size_t>& actions,
                        const ThetaSubset& subset = ThetaSubset::all(), bool time_summed = false) {
    const auto rows = detail::atom_sensor_joint(view, actions, subset);
    if (rows.size() == 1) return 0.0;
    if (!time_summed) return detail::mi_of_rows(rows);
    // Per-step marginals of each atom row.
    const std::size_t n_sensor = view.spaces().n_sensor;
    const std::size_t steps = actions.size();
    double value = 0.0;
    for (std::size_t tau = 0; tau < steps; ++tau) {
        std::vector<std::vector<double>> step_rows(rows.size(), std::vector<double>(n_sensor, 0.0));
        for (std::size_t g = 0; g < rows.size(); ++g) {
            for (std::size_t sp = 0; sp < rows[g].size(); ++sp) {
                // digit of sensor path sp at step tau
                std::size_t v = sp;
                for (std::size_t i = 0; i < steps - 1 - tau; ++i) v /= n_sensor;
                step_rows[g][v % n_sensor] += rows[g][sp];
            }
        }
        value += detail::mi_of_rows(step_rows);
    }
    return value;
}

/// Knowledge-seeking value: information gain about all parameters.
inline double ksa_value(const PosteriorView& view, const std::vector<std::size_t>& actions) {
    return info_gain(view, actions, ThetaSubset::all());
}

/// Expected-free-energy style value: conditional entropy term, optional
/// information gain, optional extrinsic KL, each in full-sequence or
/// time-summed form.
inline double fep_value(const PosteriorView& view, const std::vector<std::size_t>& actions,
                        const std::optional<DesiredPrior>& desired = std::nullopt,
                        const std::optional<ThetaSubset>& gain_subset = std::nullopt,
                        bool time_summed = false) {
    double value = fep_entropy_term(view, actions, time_summed);
    if (gain_subset) value += info_gain(view, actions, *gain_subset, time_summed);
    if (desired) value -= extrinsic_kl_term(view, actions, *desired, time_summed);
    return value;
}

/// The matrix special case: known emission matrix A (one row per state),
/// known per-action transition matrices B, per-step desired priors C, belief
/// s_prev over the current state. Sums 1.(A x log A).s_tau - o_tau.(log o_tau
/// - log C_tau) over the steps.
inline double friston2015_value(const ConditionalTable& A, const std::vector<ConditionalTable>& B,
                                const std::vector<Categorical>& C, const Categorical& s_prev,
                                const std::vector<std::size_t>& actions) {
    const std::size_t n_env = A.n_rows();
    const std::size_t n_sensor = A.target_size();
    if (s_prev.size() != n_env) throw ShapeMismatch("friston2015_value: belief size mismatch");
    for (const auto& b : B)
        if (b.n_rows() != n_env || b.target_size() != n_env)
            throw ShapeMismatch("friston2015_value: transition matrix shape mismatch");
    if (C.empty()) throw ShapeMismatch("friston2015_value: no desired priors");
    std::vector<double> belief(s_prev.probs());
    double value = 0.0;
    for (std::size_t tau = 0; tau < actions.size(); ++tau) {
        if (actions[tau] >= B.size()) throw IndexOutOfRange("friston2015_value: action out of range");
        const ConditionalTable& Ba = B[actions[tau]];
        std::vector<double> next(n_env, 0.0);
        for (std::size_t e0 = 0; e0 < n_env; ++e0)
            for (std::size_t e1 = 0; e1 < n_env; ++e1) next[e1] += Ba(e0, e1) * belief[e0];
        belief = std::move(next);
        // 1.(A x log A).s_tau
        for (std::size_t e = 0; e < n_env; ++e) {
            if (belief[e] <= 0.0) continue;
            double row = 0.0;
            for (std::size_t s = 0; s < n_sensor; ++s) row += xlogx(A(e, s));
            value += belief[e] * row;
        }
        // o_tau.(log o_tau - log C_tau)
        std::vector<double> o(n_sensor, 0.0);
        for (std::size_t e = 0; e < n_env; ++e)
            for (std::size_t s = 0; s < n_sensor; ++s) o[s] += A(e, s) * belief[e];
        const Categorical& c_tau = C.size() == 1 ? C.front() : C.at(tau);
        if (c_tau.size() != n_sensor) throw ShapeMismatch("friston2015_value: desired prior size");
        for (std::size_t s = 0; s < n_sensor; ++s) {
            if (o[s] <= 0.0) continue;
            if (c_tau[s] < kNullEventFloor)
                throw AbsoluteContinuityViolation("friston2015_value: C is zero at a reachable outcome");
            value -= o[s] * (std::log(o[s]) - std::log(c_tau[s]));
        }
    }
    return value;
}

/// Channel capacity via Blahut-Arimoto. channel[x] are the rows p(y|x);
/// returns the capacity in nats once the upper/lower bound gap is below tol.
inline double blahut_arimoto_capacity(const std::vector<std::vector<double>>& channel,
                                      const BlahutArimotoOptions& opts = {}) {
    const std::size_t n_x = channel.size();
    if (n_x == 0) throw ShapeMismatch("blahut_arimoto: empty channel");
    const std::size_t n_y = channel.front().size();
    for (const auto& row : channel)
        if (row.size() != n_y) throw ShapeMismatch("blahut_arimoto: ragged channel");
    if (n_x == 1) return 0.0;
    std::vector<double> p(n_x, 1.0 / static_cast<double>(n_x));
    double lower = 0.0;
    for (std::size_t iter = 0; iter < opts.max_iterations; ++iter) {
        std::vector<double> q(n_y, 0.0);
        for (std::size_t x = 0; x < n_x; ++x)
            for (std::size_t y = 0; y < n_y; ++y) q[y] += p[x] * channel[x][y];
        std::vector<double> d(n_x, 0.0);
        for (std::size_t x = 0; x < n_x; ++x)
            for (std::size_t y = 0; y < n_y; ++y) {
                const double c = channel[x][y];
                if (c > 0.0 && q[y] > 0.0) d[x] += c * std::log(c / q[y]);
            }
        double upper = kNegInf;
        double z = 0.0;
        for (std::size_t x = 0; x < n_x; ++x) {
            upper = std::max(upper, d[x]);
            z += p[x] * std::exp(d[x]);
        }
        lower = std::log(z);
        if (upper - lower < opts.tol) return std::max(lower, 0.0);
        for (std::size_t x = 0; x < n_x; ++x) p[x] = p[x] * std::exp(d[x]) / z;
    }
    throw NonConvergence("blahut_arimoto: bound gap did not close within " +
                             std::to_string(opts.max_iterations) + " iterations",
                         lower);
}

/// Empowerment: capacity of the channel from the m actions following the
/// evaluated prefix into the final sensor value. The prefix must hold n+1
/// actions; predictions reach n+1+m steps ahead.
inline double empowerment_value(const PosteriorView& view, const std::vector<std::size_t>& prefix,
                                std::size_t n, std::size_t m,
                                const BlahutArimotoOptions& opts = {}) {
    if (m < 1) throw ShapeMismatch("empowerment_value: m must be >= 1");
    if (prefix.size() != n + 1) throw ShapeMismatch("empowerment_value: prefix must hold n+1 actions");
    const std::size_t n_action = view.spaces().n_action;
    std::size_t n_suffixes = 1;
    for (std::size_t i = 0; i < m; ++i) n_suffixes *= n_action;
    std::vector<std::vector<double>> channel;
    channel.reserve(n_suffixes);
    std::vector<std::size_t> full(prefix);
    full.resize(prefix.size() + m, 0);
    for (std::size_t suffix = 0; suffix < n_suffixes; ++suffix) {
        std::size_t v = suffix;
        for (std::size_t i = m; i-- > 0;) {
            full[prefix.size() + i] = v % n_action;
            v /= n_action;
        }
        channel.push_back(view.joint(full).final_sensor_marginal());
    }
    return blahut_arimoto_capacity(channel, opts);
}

/// Predictive information: mutual information between the next k and the
/// following k sensor values under the predictive distribution.
inline double predictive_information_value(const PosteriorView& view,
                                           const std::vector<std::size_t>& actions,
                                           std::size_t k = 0) {
    const std::size_t L = actions.size();
    if (k == 0) k = L / 2;
    if (k == 0) throw HorizonTooShort("predictive_information_value: needs a half horizon k > 0");
    if (2 * k > L)
        throw ShapeMismatch("predictive_information_value: 2k exceeds the prediction horizon");
    const PathJoint joint = view.joint(actions);
    const auto block_joint = joint.sensor_block_joint(k, k);
    const std::size_t n1 = PathJoint::ipow(joint.n_sensor, k);
    return mutual_information(Categorical::normalized(std::vector<double>(block_joint)), n1,
                              block_joint.size() / n1);
}

// ---------------------------------------------------------------------------
// Action-value functions.
// ---------------------------------------------------------------------------

/// A configured motivation bound to a view: evaluates action sequences
/// a_{t:T_a}. Evaluations are memoized per sequence; the memo is guarded so
/// evaluations may fan out across threads.
class ActionValueFn {
public:
    ActionValueFn(std::shared_ptr<const PosteriorView> view, MotivationConfig cfg)
        : view_(std::move(view)), cfg_(std::move(cfg)) {}

    std::size_t n_actions() const { return view_->spaces().n_action; }
    const MotivationConfig& config() const { return cfg_; }
    const PosteriorView& view() const { return *view_; }

    double operator()(const std::vector<std::size_t>& actions) const {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            auto it = memo_.find(actions);
            if (it != memo_.end()) return it->second;
        }
        const double v = evaluate(cfg_, actions);
        std::lock_guard<std::mutex> lock(mutex_);
        memo_.emplace(actions, v);
        return v;
    }

private:
    double evaluate(const MotivationConfig& cfg, const std::vector<std::size_t>& actions) const {
        switch (cfg.kind) {
            case MotivationKind::kFep:
                return fep_value(*view_, actions, cfg.desired,
                                 cfg.include_info_gain ? std::optional<ThetaSubset>(cfg.subset)
                                                       : std::nullopt,
                                 cfg.time_summed);
            case MotivationKind::kFepFriston2015: {
                if (!cfg.desired) throw ShapeMismatch("fep_friston2015 needs a desired prior");
                return fep_value(*view_, actions, cfg.desired, std::nullopt, /*time_summed=*/true);
            }
            case MotivationKind::kEmpowerment:
                return empowerment_value(*view_, actions, cfg.emp_n, cfg.emp_m, cfg.ba);
            case MotivationKind::kPredictiveInfo:
                return predictive_information_value(*view_, actions, cfg.pi_k);
            case MotivationKind::kKsa:
                return ksa_value(*view_, actions);
            case MotivationKind::kExtrinsicOnly: {
                if (!cfg.desired) throw ShapeMismatch("extrinsic_only needs a desired prior");
                return -extrinsic_kl_term(*view_, actions, *cfg.desired, cfg.time_summed);
            }
            case MotivationKind::kWeightedSum: {
                double v = 0.0;
                for (const auto& [w, sub] : cfg.terms) v += w * evaluate(sub, actions);
                return v;
            }
        }
        throw ShapeMismatch("ActionValueFn: unknown motivation kind");
    }

    std::shared_ptr<const PosteriorView> view_;
    MotivationConfig cfg_;
    mutable std::mutex mutex_;
    mutable std::map<std::vector<std::size_t>, double> memo_;
};

inline ActionValueFn make_action_value(std::shared_ptr<const PosteriorView> view,
                                       MotivationConfig cfg) {
    if (cfg.kind == MotivationKind::kEmpowerment && cfg.emp_m < 1)
        throw ShapeMismatch("make_action_value: empowerment needs m >= 1");
    return ActionValueFn(std::move(view), std::move(cfg));
}

}  // namespace paip
