#pragma once

#include <functional>
#include <string>
#include <vector>

#include "xplan/pddl.hpp"

namespace xplan::features {

// Marker feature carried by position 0 (the plan-start pseudo-action).
inline const std::string kPlanStartFeature = "plan-start";

// Sorted, deduplicated feature names for one plan position.
using FeatureSet = std::vector<std::string>;

// "at rover l4" → "at(rover,l4)"; single point of truth for feature naming so
// training data and planning-time extraction always agree.
std::string canonical_fluent(std::string_view fluent);
std::string canonical_action(const pddl::GroundAction& action);

// Extension hook: appends extra names for one position. `position` is the
// label-sequence index (0 = plan start); providers see the simulated state.
using FeatureProvider =
    std::function<void(const pddl::GroundTask&, const pddl::Plan&, std::size_t position,
                       const pddl::State&, std::vector<std::string>&)>;

class FeatureExtractor {
  public:
    void add_provider(FeatureProvider provider);

    // One FeatureSet per position a0..aN. Position 0: initial-state fluents +
    // the plan-start marker. Position i ≥ 1: the action's schema name, its
    // grounded string, and every fluent of the state reached after it.
    // Throws std::runtime_error if the plan is not applicable.
    std::vector<FeatureSet> plan_features(const pddl::GroundTask& task, const pddl::Plan& plan) const;

    // Schema name + grounded string only — delete-relaxed suffixes have no
    // trustworthy intermediate states.
    std::vector<FeatureSet> relaxed_features(const pddl::GroundTask& task,
                                             const std::vector<int>& actions) const;

  private:
    std::vector<FeatureProvider> providers_;
};

std::vector<FeatureSet> extract_plan_features(const pddl::GroundTask& task, const pddl::Plan& plan);
std::vector<FeatureSet> extract_relaxed_features(const pddl::GroundTask& task,
                                                 const std::vector<int>& actions);

}  // namespace xplan::features
