#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "paip/exact.hpp"
#include "paip/gen_model.hpp"
#include "paip/path_enum.hpp"
#include "paip/prob.hpp"
#include "paip/variational.hpp"

namespace paip {

// ---------------------------------------------------------------------------
// PosteriorView: the uniform query surface the intrinsic motivations work
// against. A view answers joint path queries for any future action sequence
// and, when it carries a parameter posterior, exposes its discrete mixture
// atoms for information-gain computations.
// ---------------------------------------------------------------------------

class PosteriorView {
public:
    virtual ~PosteriorView() = default;

    virtual const ModelSpaces& spaces() const = 0;

    /// Joint over (environment path, sensor path) for the given actions.
    virtual PathJoint joint(const std::vector<std::size_t>& actions) const = 0;

    /// Whether parameter-posterior atoms are available (information gain).
    virtual bool supports_parameter_atoms() const = 0;

    virtual std::size_t n_components() const = 0;
    virtual double component_weight(std::size_t c) const = 0;
    virtual PathJoint component_joint(std::size_t c, const std::vector<std::size_t>& actions) const = 0;

    /// Canonical grouping key of a component's parameter posterior restricted
    /// to the given subset; components with equal keys share one atom.
    virtual std::string component_atom_key(std::size_t c, const ThetaSubset& subset) const = 0;
};

/// View over the exact Bayesian complete posterior. Components are the merged
/// history entries of the posterior factor.
class ExactView final : public PosteriorView {
public:
    explicit ExactView(CompletePosterior cp) : cp_(std::move(cp)) {
        components_ = cp_.components();
    }

    const ModelSpaces& spaces() const override { return cp_.hyper.spaces; }

    PathJoint joint(const std::vector<std::size_t>& actions) const override {
        return enumerate_path_joint(components_, cp_.hyper.spaces, actions,
                                    cp_.opts.max_path_cells);
    }

    bool supports_parameter_atoms() const override { return true; }
    std::size_t n_components() const override { return components_.size(); }
    double component_weight(std::size_t c) const override { return components_[c].weight; }

    PathJoint component_joint(std::size_t c, const std::vector<std::size_t>& actions) const override {
        PredictiveComponent comp = components_[c];
        comp.weight = 1.0;
        return enumerate_path_joint({comp}, cp_.hyper.spaces, actions, cp_.opts.max_path_cells);
    }

    std::string component_atom_key(std::size_t c, const ThetaSubset& subset) const override {
        const CountKeys keys(cp_.hyper.spaces);
        std::string out;
        for (const auto& [key, n] : cp_.factor.entries()[c].counts) {
            const bool keep = (subset.sensor && keys.is_sensor(key)) ||
                              (subset.transition && keys.is_transition(key)) ||
                              (subset.initial && keys.is_initial(key));
            if (keep) out += std::to_string(key) + ":" + std::to_string(n) + ";";
        }
        return out;
    }

    const CompletePosterior& posterior() const { return cp_; }

private:
    CompletePosterior cp_;
    std::vector<PredictiveComponent> components_;
};

/// View over the approximate complete posterior: exact predictive factor on
/// top of the fitted mean-field factor. The parameter posterior is a single
/// product of Dirichlets, so it exposes exactly one atom.
class VariationalView final : public PosteriorView {
public:
    explicit VariationalView(VariationalParams phi, double max_path_cells = 1e6)
        : phi_(std::move(phi)), max_path_cells_(max_path_cells) {
        components_ = variational_components(phi_);
    }

    const ModelSpaces& spaces() const override { return phi_.spaces; }

    PathJoint joint(const std::vector<std::size_t>& actions) const override {
        return enumerate_path_joint(components_, phi_.spaces, actions, max_path_cells_);
    }

    bool supports_parameter_atoms() const override { return true; }
    std::size_t n_components() const override { return 1; }
    double component_weight(std::size_t) const override { return 1.0; }
    PathJoint component_joint(std::size_t, const std::vector<std::size_t>& actions) const override {
        return joint(actions);
    }
    std::string component_atom_key(std::size_t, const ThetaSubset&) const override { return ""; }

    const VariationalParams& params() const { return phi_; }

private:
    VariationalParams phi_;
    double max_path_cells_;
    std::vector<PredictiveComponent> components_;
};

/// View at one sampled (environment state, parameter) pair: the predictive
/// factor at a known theta. Used by Thompson sampling; refuses parameter
/// queries since theta is fixed.
class PointView final : public PosteriorView {
public:
    PointView(ThetaPoint theta, std::size_t e_prev, double max_path_cells = 1e6)
        : theta_(std::move(theta)), max_path_cells_(max_path_cells) {
        PredictiveComponent comp;
        comp.weight = 1.0;
        comp.e_prev = e_prev;
        comp.integrate = false;
        for (std::size_t e = 0; e < theta_.spaces.n_env; ++e)
            comp.sensor.push_back(theta_.sensor.row(e).probs());
        for (std::size_t c = 0; c < theta_.spaces.n_action * theta_.spaces.n_env; ++c)
            comp.transition.push_back(theta_.transition.row(c).probs());
        component_ = std::move(comp);
    }

    const ModelSpaces& spaces() const override { return theta_.spaces; }

    PathJoint joint(const std::vector<std::size_t>& actions) const override {
        return enumerate_path_joint({component_}, theta_.spaces, actions, max_path_cells_);
    }

    bool supports_parameter_atoms() const override { return false; }
    std::size_t n_components() const override { return 1; }
    double component_weight(std::size_t) const override { return 1.0; }
    PathJoint component_joint(std::size_t, const std::vector<std::size_t>& actions) const override {
        return joint(actions);
    }
    std::string component_atom_key(std::size_t, const ThetaSubset&) const override {
        throw UnsupportedView("PointView: parameter posterior not represented");
    }

private:
    ThetaPoint theta_;
    double max_path_cells_;
    PredictiveComponent component_;
};

}  // namespace paip
