#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "paip/gen_model.hpp"
#include "paip/pa_loop.hpp"
#include "paip/path_enum.hpp"
#include "paip/prob.hpp"

namespace paip {

// ---------------------------------------------------------------------------
// Direct Bayesian inference: the posterior factor as a mixture over
// environment-state histories, each carrying conjugate Dirichlet count
// posteriors; log evidence; exact posterior predictive distributions.
// ---------------------------------------------------------------------------

struct ExactOptions {
    /// Refuse when |E|^t exceeds this.
    double max_entries = 1e6;
    /// Environment histories whose accumulated log weight falls below this
    /// absolute floor are dropped during enumeration. e^-100 is far below any
    /// tolerance used at desk scale; 0 disables pruning.
    double prune_log_floor = -100.0;
    /// Cap on enumerated predictive tables (env paths x sensor paths).
    double max_path_cells = 1e6;
};

/// Which parameter blocks a query refers to.
struct ThetaSubset {
    bool sensor = true;
    bool transition = true;
    bool initial = true;

    static ThetaSubset all() { return {true, true, true}; }
};

/// Sparse observation counts, canonically sorted by flat key. Keys cover the
/// three block families; see CountKeys.
using SparseCounts = std::vector<std::pair<std::uint64_t, double>>;

/// Flat key layout for sparse counts over the three Dirichlet families.
struct CountKeys {
    explicit CountKeys(const ModelSpaces& spaces)
        : n_env(spaces.n_env),
          n_sensor(spaces.n_sensor),
          transition_base(spaces.n_env * spaces.n_sensor),
          initial_base(transition_base + spaces.n_action * spaces.n_env * spaces.n_env) {}

    std::uint64_t sensor_key(std::size_t env, std::size_t sensor) const {
        return env * n_sensor + sensor;
    }
    std::uint64_t transition_key(std::size_t ctx, std::size_t next) const {
        return transition_base + ctx * n_env + next;
    }
    std::uint64_t initial_key(std::size_t env) const { return initial_base + env; }

    bool is_sensor(std::uint64_t key) const { return key < transition_base; }
    bool is_transition(std::uint64_t key) const {
        return key >= transition_base && key < initial_base;
    }
    bool is_initial(std::uint64_t key) const { return key >= initial_base; }

    std::uint64_t n_env, n_sensor, transition_base, initial_base;
};

/// One mixture entry of the posterior factor: the total probability of every
/// environment history that produced this (final state, counts) pair, plus the
/// shared counts themselves. The Dirichlet posterior of the entry is the prior
/// plus these counts.
struct PosteriorEntry {
    double weight = 0.0;
    std::size_t e_prev = 0;  // final environment state of the merged histories
    SparseCounts counts;
};

/// Counts extracted from one full environment path against a history. Used by
/// oracles and the variational KL; shares nothing with the enumeration below
/// beyond the key layout.
inline SparseCounts path_counts(const ModelSpaces& spaces, const History& h,
                                const std::vector<std::size_t>& env_path) {
    if (env_path.size() != h.t()) throw ShapeMismatch("path_counts: path length != t");
    const CountKeys keys(spaces);
    std::map<std::uint64_t, double> acc;
    acc[keys.initial_key(env_path[0])] += 1.0;
    for (std::size_t tau = 0; tau < h.t(); ++tau)
        acc[keys.sensor_key(env_path[tau], h.sensors()[tau])] += 1.0;
    for (std::size_t r = 1; r < h.t(); ++r)
        acc[keys.transition_key(spaces.transition_context(h.actions()[r - 1], env_path[r - 1]),
                                env_path[r])] += 1.0;
    return SparseCounts(acc.begin(), acc.end());
}

class ExactPosteriorFactor {
public:
    ExactPosteriorFactor(std::vector<PosteriorEntry> entries, double log_evidence, std::size_t t,
                         ModelSpaces spaces)
        : entries_(std::move(entries)), log_evidence_(log_evidence), t_(t), spaces_(spaces) {}

    const std::vector<PosteriorEntry>& entries() const { return entries_; }
    double log_evidence() const { return log_evidence_; }
    std::size_t t() const { return t_; }
    const ModelSpaces& spaces() const { return spaces_; }

private:
    std::vector<PosteriorEntry> entries_;
    double log_evidence_;
    std::size_t t_;
    ModelSpaces spaces_;
};

namespace detail {

/// Dense running state for the sequential-predictive enumeration over
/// environment histories.
struct FactorEnumerator {
    const ModelSpaces& spaces;
    const HyperParams& xi;
    const History& h;
    CountKeys keys;
    double prune_log_floor;

    std::vector<std::vector<double>> n_sensor_counts;  // [env][sensor]
    std::vector<std::vector<double>> n_trans_counts;   // [ctx][env]
    std::vector<double> n_init_counts;                 // [env]
    std::vector<double> sensor_row_totals, trans_row_totals;
    double init_total = 0.0;
    std::vector<std::uint64_t> touched;  // keys along the current path

    // streaming log-sum-exp (pass A)
    double lse_max = kNegInf;
    double lse_sum = 0.0;

    explicit FactorEnumerator(const ModelSpaces& spaces, const HyperParams& xi, const History& h,
                              double floor)
        : spaces(spaces), xi(xi), h(h), keys(spaces), prune_log_floor(floor) {
        n_sensor_counts.assign(spaces.n_env, std::vector<double>(spaces.n_sensor, 0.0));
        n_trans_counts.assign(spaces.n_action * spaces.n_env,
                              std::vector<double>(spaces.n_env, 0.0));
        n_init_counts.assign(spaces.n_env, 0.0);
        sensor_row_totals.assign(spaces.n_env, 0.0);
        trans_row_totals.assign(spaces.n_action * spaces.n_env, 0.0);
    }

    double init_predictive(std::size_t e) const {
        const auto& a = xi.initial.block(0);
        double a0 = 0.0;
        for (double v : a) a0 += v;
        return (a[e] + n_init_counts[e]) / (a0 + init_total);
    }
    double trans_predictive(std::size_t ctx, std::size_t e) const {
        const auto& a = xi.transition.block(ctx);
        double a0 = 0.0;
        for (double v : a) a0 += v;
        return (a[e] + n_trans_counts[ctx][e]) / (a0 + trans_row_totals[ctx]);
    }
    double sensor_predictive(std::size_t e, std::size_t s) const {
        const auto& a = xi.sensor.block(e);
        double a0 = 0.0;
        for (double v : a) a0 += v;
        return (a[s] + n_sensor_counts[e][s]) / (a0 + sensor_row_totals[e]);
    }

    template <typename LeafFn>
    void descend(std::size_t tau, std::size_t e_prev, double log_w, const LeafFn& leaf) {
        if (tau == h.t()) {
            leaf(e_prev, log_w);
            return;
        }
        const std::size_t s_obs = h.sensors()[tau];
        for (std::size_t e = 0; e < spaces.n_env; ++e) {
            double step_log;
            std::size_t trans_ctx = 0;
            if (tau == 0) {
                step_log = std::log(init_predictive(e));
            } else {
                trans_ctx = spaces.transition_context(h.actions()[tau - 1], e_prev);
                step_log = std::log(trans_predictive(trans_ctx, e));
            }
            step_log += std::log(sensor_predictive(e, s_obs));
            const double next_log_w = log_w + step_log;
            if (prune_log_floor != 0.0 && next_log_w < prune_log_floor) continue;
            // apply counts
            if (tau == 0) {
                n_init_counts[e] += 1.0;
                init_total += 1.0;
                touched.push_back(keys.initial_key(e));
            } else {
                n_trans_counts[trans_ctx][e] += 1.0;
                trans_row_totals[trans_ctx] += 1.0;
                touched.push_back(keys.transition_key(trans_ctx, e));
            }
            n_sensor_counts[e][s_obs] += 1.0;
            sensor_row_totals[e] += 1.0;
            touched.push_back(keys.sensor_key(e, s_obs));

            descend(tau + 1, e, next_log_w, leaf);

            touched.pop_back();
            n_sensor_counts[e][s_obs] -= 1.0;
            sensor_row_totals[e] -= 1.0;
            if (tau == 0) {
                touched.pop_back();
                n_init_counts[e] -= 1.0;
                init_total -= 1.0;
            } else {
                touched.pop_back();
                n_trans_counts[trans_ctx][e] -= 1.0;
                trans_row_totals[trans_ctx] -= 1.0;
            }
        }
    }

    SparseCounts snapshot_counts() const {
        std::map<std::uint64_t, double> acc;
        for (std::uint64_t k : touched) acc[k] += 1.0;
        return SparseCounts(acc.begin(), acc.end());
    }
};

}  // namespace detail

/// The posterior factor after history h: a normalized mixture over
/// environment histories, merged by (final state, counts). Weights are the
/// normalized closed-form marginal likelihoods.
inline ExactPosteriorFactor compute_posterior_factor(const History& h, const HyperParams& xi,
                                                     const ExactOptions& opts = {}) {
    const ModelSpaces& spaces = xi.spaces;
    const std::size_t t = h.t();
    if (t == 0) throw ShapeMismatch("compute_posterior_factor: empty history");
    for (std::size_t s : h.sensors())
        if (s >= spaces.n_sensor) throw IndexOutOfRange("compute_posterior_factor: sensor out of range");
    for (std::size_t a : h.actions())
        if (a >= spaces.n_action) throw IndexOutOfRange("compute_posterior_factor: action out of range");
    const double n_paths = std::pow(static_cast<double>(spaces.n_env), static_cast<double>(t));
    if (n_paths > opts.max_entries)
        throw ComplexityRefusal("compute_posterior_factor: |E|^t = " + std::to_string(n_paths) +
                                " exceeds the cap of " + std::to_string(opts.max_entries));

    // Pass A: log evidence via streaming log-sum-exp over path weights.
    detail::FactorEnumerator en(spaces, xi, h, opts.prune_log_floor);
    en.descend(0, 0, 0.0, [&](std::size_t, double log_w) {
        if (log_w == kNegInf) return;
        if (log_w > en.lse_max) {
            en.lse_sum = en.lse_sum * std::exp(en.lse_max - log_w) + 1.0;
            en.lse_max = log_w;
        } else {
            en.lse_sum += std::exp(log_w - en.lse_max);
        }
    });
    if (en.lse_max == kNegInf)
        throw ZeroEvidence("compute_posterior_factor: history has no probability mass");
    const double log_z = en.lse_max + std::log(en.lse_sum);

    // Pass B: merge normalized weights by (final state, counts).
    std::map<std::pair<std::size_t, SparseCounts>, double> merged;
    en.descend(0, 0, 0.0, [&](std::size_t e_prev, double log_w) {
        if (log_w == kNegInf) return;
        merged[{e_prev, en.snapshot_counts()}] += std::exp(log_w - log_z);
    });

    std::vector<PosteriorEntry> entries;
    entries.reserve(merged.size());
    double total = 0.0;
    for (auto& [key, w] : merged) {
        total += w;
        entries.push_back({w, key.first, key.second});
    }
    for (auto& e : entries) e.weight /= total;  // absorb pruning losses
    return ExactPosteriorFactor(std::move(entries), log_z, t, spaces);
}

/// Log of the normalizer of compute_posterior_factor.
inline double log_evidence(const History& h, const HyperParams& xi, const ExactOptions& opts = {}) {
    return compute_posterior_factor(h, xi, opts).log_evidence();
}

/// Dense Dirichlet posterior blocks for one entry: prior plus entry counts.
struct EntryPosterior {
    std::vector<std::vector<double>> sensor;
    std::vector<std::vector<double>> transition;
    std::vector<double> initial;
};

inline EntryPosterior entry_posterior(const HyperParams& xi, const PosteriorEntry& entry) {
    EntryPosterior post;
    post.sensor = xi.sensor.blocks();
    post.transition = xi.transition.blocks();
    post.initial = xi.initial.block(0);
    const CountKeys keys(xi.spaces);
    for (const auto& [key, n] : entry.counts) {
        if (keys.is_sensor(key)) {
            post.sensor[key / keys.n_sensor][key % keys.n_sensor] += n;
        } else if (keys.is_transition(key)) {
            const std::uint64_t rel = key - keys.transition_base;
            post.transition[rel / keys.n_env][rel % keys.n_env] += n;
        } else {
            post.initial[key - keys.initial_base] += n;
        }
    }
    return post;
}

/// A posterior factor bound to its prior: the object the predictive queries
/// are answered from.
struct CompletePosterior {
    CompletePosterior(ExactPosteriorFactor factor, HyperParams hyper, ExactOptions opts = {})
        : factor(std::move(factor)), hyper(std::move(hyper)), opts(opts) {}

    ExactPosteriorFactor factor;
    HyperParams hyper;
    ExactOptions opts;

    std::vector<PredictiveComponent> components() const {
        std::vector<PredictiveComponent> comps;
        comps.reserve(factor.entries().size());
        for (const auto& e : factor.entries()) {
            EntryPosterior post = entry_posterior(hyper, e);
            comps.push_back({e.weight, e.e_prev, std::move(post.sensor), std::move(post.transition),
                             /*integrate=*/true});
        }
        return comps;
    }

    PathJoint path_joint(const std::vector<std::size_t>& actions) const {
        return enumerate_path_joint(components(), hyper.spaces, actions, opts.max_path_cells);
    }
};

inline CompletePosterior complete_posterior(const History& h, const HyperParams& xi,
                                            const ExactOptions& opts = {}) {
    return CompletePosterior(compute_posterior_factor(h, xi, opts), xi, opts);
}

namespace detail {

inline Categorical marginal_to_categorical(std::vector<double> m, const char* what) {
    double sum = 0.0;
    for (double v : m) sum += v;
    if (std::abs(sum - 1.0) > 1e-9)
        throw ShapeMismatch(std::string("internal: ") + what + " sums to " + std::to_string(sum));
    return Categorical::normalized(std::move(m));
}

}  // namespace detail

/// q(e-hat path | a-hat sequence, history): posterior predictive over future
/// environment paths, exact parameter integration via sequential predictives.
inline Categorical predictive_env_dist(const CompletePosterior& cp,
                                       const std::vector<std::size_t>& actions) {
    return detail::marginal_to_categorical(cp.path_joint(actions).env_marginal(),
                                           "predictive_env_dist");
}

/// q(s-hat path | a-hat sequence, history).
inline Categorical predictive_sensor_dist(const CompletePosterior& cp,
                                          const std::vector<std::size_t>& actions) {
    return detail::marginal_to_categorical(cp.path_joint(actions).sensor_marginal(),
                                           "predictive_sensor_dist");
}

/// q(s-hat path | e-hat path, a-hat sequence, history).
inline Categorical sensor_given_env_dist(const CompletePosterior& cp,
                                         const std::vector<std::size_t>& env_path,
                                         const std::vector<std::size_t>& actions) {
    if (env_path.size() != actions.size())
        throw ShapeMismatch("sensor_given_env_dist: path and action lengths differ");
    const PathJoint joint = cp.path_joint(actions);
    std::size_t idx = 0;
    for (std::size_t e : env_path) {
        if (e >= joint.n_env) throw IndexOutOfRange("sensor_given_env_dist: state out of range");
        idx = idx * joint.n_env + e;
    }
    return Categorical::normalized(joint.sensor_given_env(idx));
}

/// One component of a Dirichlet-mixture marginal over a parameter subset.
struct DirichletMixtureComponent {
    double weight = 0.0;
    std::optional<DirichletParams> sensor;
    std::optional<DirichletParams> transition;
    std::optional<DirichletParams> initial;
};

/// Marginal posterior over the chosen parameter blocks as a Dirichlet
/// mixture; components with identical counts on the subset are collapsed.
inline std::vector<DirichletMixtureComponent> parameter_posterior(const CompletePosterior& cp,
                                                                  const ThetaSubset& subset) {
    if (!subset.sensor && !subset.transition && !subset.initial)
        throw ShapeMismatch("parameter_posterior: empty subset");
    const CountKeys keys(cp.hyper.spaces);
    std::map<SparseCounts, double> groups;
    for (const auto& entry : cp.factor.entries()) {
        SparseCounts filtered;
        for (const auto& kv : entry.counts) {
            const bool keep = (subset.sensor && keys.is_sensor(kv.first)) ||
                              (subset.transition && keys.is_transition(kv.first)) ||
                              (subset.initial && keys.is_initial(kv.first));
            if (keep) filtered.push_back(kv);
        }
        groups[filtered] += entry.weight;
    }
    std::vector<DirichletMixtureComponent> out;
    out.reserve(groups.size());
    for (const auto& [counts, weight] : groups) {
        PosteriorEntry pseudo{weight, 0, counts};
        EntryPosterior post = entry_posterior(cp.hyper, pseudo);
        DirichletMixtureComponent comp;
        comp.weight = weight;
        if (subset.sensor) comp.sensor = DirichletParams(std::move(post.sensor));
        if (subset.transition) comp.transition = DirichletParams(std::move(post.transition));
        if (subset.initial) comp.initial = DirichletParams(std::vector<std::vector<double>>{std::move(post.initial)});
        out.push_back(std::move(comp));
    }
    return out;
}

}  // namespace paip
