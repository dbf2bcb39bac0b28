#pragma once

#include <cstdint>
#include <vector>

#include "xplan/crf.hpp"
#include "xplan/pddl.hpp"
#include "xplan/search.hpp"

namespace xplan::expd {

struct ExpdWeights {
    double w_theta = 2.0;
    double w_beta = 2.0;
};

struct PredictedMeasures {
    double theta_hat = 1.0;
    double beta_hat = 1.0;
    std::vector<crf::CompositeLabel> labels;  // decoded labels of a0..aN over π̄
};

// Scores plans of one task against one model. Precompiles the task's fluents
// and actions to feature ids once so per-call prediction never touches
// feature strings.
class MeasurePredictor {
  public:
    MeasurePredictor(const crf::CRFModel& model, const pddl::GroundTask& task);

    // π̄ = prefix ⧺ relaxed. Prefix positions carry schema/action/state
    // features, relaxed positions action features only; the decoded labels
    // feed the explicability and predictability measures. An empty π̄ scores
    // θ̂ = β̂ = 1 (nothing left to explain).
    PredictedMeasures predict(const pddl::Plan& prefix, const std::vector<int>& relaxed) const;

  private:
    const crf::CRFModel* model_;
    const pddl::GroundTask* task_;
    std::vector<int> fluent_feature_;  // per fluent id, -1 when unknown to the model
    std::vector<int> schema_feature_;  // per action id
    std::vector<int> action_feature_;  // per action id
    int plan_start_feature_ = -1;
};

PredictedMeasures predict_measures(const crf::CRFModel& model, const pddl::GroundTask& task,
                                   const pddl::Plan& prefix, const std::vector<int>& relaxed);

// FF-EXPD: hill-climbing search shared with the FF planner, scoring nodes
//   h = h_cost + w_theta·(1−θ̂)·|π̄| + w_beta·(1−β̂)·|π̄|
// where h_cost and the relaxed suffix come from the relaxed planning graph.
// Zero weights skip prediction entirely, reducing to plain FF. Throws
// std::runtime_error if no plan is found within the expansion budget.
pddl::Plan ffexpd_plan(const pddl::GroundTask& task, const crf::CRFModel& model,
                       const ExpdWeights& weights, const search::SearchConfig& cfg = {});

enum class Criterion { kTheta, kBeta };

// Index of the candidate with the highest predicted measure (full plan, no
// relaxed suffix); ties toward the lowest index. All candidates must be plans
// of `task`'s grounding. Throws std::invalid_argument on an empty set.
std::size_t select_plan_index(const crf::CRFModel& model, const pddl::GroundTask& task,
                              const std::vector<pddl::Plan>& candidates, Criterion criterion);
const pddl::Plan& select_plan(const crf::CRFModel& model, const pddl::GroundTask& task,
                              const std::vector<pddl::Plan>& candidates, Criterion criterion);

// Seeded uniform choice.
std::size_t rand_select_index(std::size_t candidate_count, std::uint64_t seed);
const pddl::Plan& rand_select(const std::vector<pddl::Plan>& candidates, std::uint64_t seed);

}  // namespace xplan::expd
