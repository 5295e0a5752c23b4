#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "paip/exact.hpp"
#include "paip/motivations.hpp"
#include "paip/prob.hpp"
#include "paip/rng.hpp"
#include "paip/variational.hpp"
#include "paip/views.hpp"

namespace paip {

// ---------------------------------------------------------------------------
// Action selection over action-value functions: deterministic argmax, softmax
// marginalization over action sequences, Thompson sampling.
// ---------------------------------------------------------------------------

struct SelectionConfig {
    enum class Mode { kArgmax, kSoftmax, kThompson } mode = Mode::kArgmax;
    double gamma = 1.0;  // softmax inverse temperature
};

namespace detail {

inline void check_sequence_cap(std::size_t n_actions, std::size_t len, double cap) {
    const double count = std::pow(static_cast<double>(n_actions), static_cast<double>(len));
    if (count > cap)
        throw ComplexityRefusal("action selection: " + std::to_string(count) +
                                " sequences exceed the cap of " + std::to_string(cap));
}

/// Calls fn on every action sequence of the given length, lexicographically.
template <typename Fn>
inline void for_each_sequence(std::size_t n_actions, std::size_t len, Fn&& fn) {
    std::vector<std::size_t> seq(len, 0);
    for (;;) {
        fn(const_cast<const std::vector<std::size_t>&>(seq));
        std::size_t pos = len;
        while (pos > 0) {
            if (++seq[pos - 1] < n_actions) break;
            seq[pos - 1] = 0;
            --pos;
        }
        if (pos == 0) break;
    }
}

}  // namespace detail

struct ArgmaxResult {
    std::size_t action = 0;
    std::vector<std::size_t> best_sequence;
    double best_value = 0.0;
};

/// First action of the value-maximizing sequence of length seq_len; ties go to
/// the lexicographically smallest sequence.
inline ArgmaxResult argmax_select(const ActionValueFn& q, std::size_t seq_len,
                                  double max_sequences = 1e6) {
    if (seq_len == 0) throw ShapeMismatch("argmax_select: empty sequence space");
    detail::check_sequence_cap(q.n_actions(), seq_len, max_sequences);
    ArgmaxResult best;
    bool first = true;
    detail::for_each_sequence(q.n_actions(), seq_len, [&](const std::vector<std::size_t>& seq) {
        const double v = q(seq);
        if (first || v > best.best_value) {
            first = false;
            best.best_value = v;
            best.best_sequence = seq;
        }
    });
    best.action = best.best_sequence.front();
    return best;
}

/// Softmax policy over the next action: p(a) proportional to the sum over
/// sequences starting with a of exp(gamma * Q). Log-domain with max shift.
inline Categorical softmax_policy(const ActionValueFn& q, double gamma, std::size_t seq_len,
                                  double max_sequences = 1e6) {
    if (!(gamma > 0.0) || !std::isfinite(gamma))
        throw ShapeMismatch("softmax_policy: gamma must be positive finite");
    if (seq_len == 0) throw ShapeMismatch("softmax_policy: empty sequence space");
    detail::check_sequence_cap(q.n_actions(), seq_len, max_sequences);
    std::vector<std::vector<double>> logits_per_action(q.n_actions());
    detail::for_each_sequence(q.n_actions(), seq_len, [&](const std::vector<std::size_t>& seq) {
        logits_per_action[seq.front()].push_back(gamma * q(seq));
    });
    std::vector<double> log_mass(q.n_actions());
    for (std::size_t a = 0; a < q.n_actions(); ++a) log_mass[a] = log_sum_exp(logits_per_action[a]);
    const double m = *std::max_element(log_mass.begin(), log_mass.end());
    std::vector<double> w(q.n_actions());
    for (std::size_t a = 0; a < q.n_actions(); ++a) w[a] = std::exp(log_mass[a] - m);
    return Categorical::normalized(std::move(w));
}

/// Softmax distribution over whole action sequences, lexicographic order.
inline Categorical softmax_sequence_dist(const ActionValueFn& q, double gamma, std::size_t seq_len,
                                         double max_sequences = 1e6) {
    if (!(gamma > 0.0) || !std::isfinite(gamma))
        throw ShapeMismatch("softmax_sequence_dist: gamma must be positive finite");
    detail::check_sequence_cap(q.n_actions(), seq_len, max_sequences);
    std::vector<double> logits;
    detail::for_each_sequence(q.n_actions(), seq_len, [&](const std::vector<std::size_t>& seq) {
        logits.push_back(gamma * q(seq));
    });
    const double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> w(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) w[i] = std::exp(logits[i] - m);
    return Categorical::normalized(std::move(w));
}

namespace detail {

inline ThetaPoint sample_theta(const ModelSpaces& spaces, const EntryPosterior& post, Rng& rng) {
    std::vector<Categorical> sensor_rows, transition_rows;
    sensor_rows.reserve(spaces.n_env);
    for (const auto& block : post.sensor) sensor_rows.push_back(sample_dirichlet(block, rng));
    transition_rows.reserve(post.transition.size());
    for (const auto& block : post.transition) transition_rows.push_back(sample_dirichlet(block, rng));
    return ThetaPoint(spaces, ConditionalTable(std::move(sensor_rows)),
                      ConditionalTable(std::move(transition_rows)),
                      sample_dirichlet(post.initial, rng));
}

}  // namespace detail

/// Thompson sampling against an exact posterior factor: draw one (state,
/// theta) hypothesis, act optimally for it. Motivations that query the
/// parameter posterior are not servable from a sampled point.
inline std::size_t thompson_select(const CompletePosterior& cp, const MotivationConfig& cfg,
                                   std::size_t seq_len, Rng& rng, double max_sequences = 1e6) {
    if (cfg.requires_parameter_atoms())
        throw MotivationUnsupported(
            "thompson_select: motivation evaluates the parameter posterior");
    std::vector<double> weights;
    weights.reserve(cp.factor.entries().size());
    for (const auto& e : cp.factor.entries()) weights.push_back(e.weight);
    const std::size_t pick = sample_categorical(Categorical::normalized(std::move(weights)), rng);
    const PosteriorEntry& entry = cp.factor.entries()[pick];
    const ThetaPoint theta =
        detail::sample_theta(cp.hyper.spaces, entry_posterior(cp.hyper, entry), rng);
    auto view = std::make_shared<PointView>(theta, entry.e_prev, cp.opts.max_path_cells);
    const ActionValueFn q = make_action_value(view, cfg);
    return argmax_select(q, seq_len, max_sequences).action;
}

/// Thompson sampling from a fitted mean-field posterior: state from
/// phi^{E_{t-1}}, theta from the variational Dirichlet blocks.
inline std::size_t thompson_select(const VariationalParams& phi, const MotivationConfig& cfg,
                                   std::size_t seq_len, Rng& rng, double max_sequences = 1e6,
                                   double max_path_cells = 1e6) {
    if (cfg.requires_parameter_atoms())
        throw MotivationUnsupported(
            "thompson_select: motivation evaluates the parameter posterior");
    const std::size_t e_prev = sample_categorical(phi.env_marginals.back(), rng);
    EntryPosterior post{phi.sensor.blocks(), phi.transition.blocks(), phi.initial.block(0)};
    const ThetaPoint theta = detail::sample_theta(phi.spaces, post, rng);
    auto view = std::make_shared<PointView>(theta, e_prev, max_path_cells);
    const ActionValueFn q = make_action_value(view, cfg);
    return argmax_select(q, seq_len, max_sequences).action;
}

}  // namespace paip
