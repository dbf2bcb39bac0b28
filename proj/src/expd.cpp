#include "xplan/expd.hpp"

#include <limits>
#include <random>
#include <stdexcept>
#include <utility>

#include "xplan/features.hpp"
#include "xplan/labels.hpp"

namespace xplan::expd {

MeasurePredictor::MeasurePredictor(const crf::CRFModel& model, const pddl::GroundTask& task)
    : model_(&model), task_(&task) {
    fluent_feature_.reserve(task.fluents.size());
    for (const auto& f : task.fluents)
        fluent_feature_.push_back(model.features.index(features::canonical_fluent(f)));
    schema_feature_.reserve(task.actions.size());
    action_feature_.reserve(task.actions.size());
    for (const auto& a : task.actions) {
        schema_feature_.push_back(model.features.index(a.schema));
        action_feature_.push_back(model.features.index(features::canonical_action(a)));
    }
    plan_start_feature_ = model.features.index(std::string(features::kPlanStartFeature));
}

PredictedMeasures MeasurePredictor::predict(const pddl::Plan& prefix,
                                            const std::vector<int>& relaxed) const {
    const auto L = static_cast<Eigen::Index>(model_->num_labels());
    const std::size_t n = prefix.size() + relaxed.size();
    const auto T = static_cast<Eigen::Index>(n + 1);
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(T, L);
    auto add = [&](Eigen::Index t, int feature) {
        if (feature >= 0)
            e.row(t) += model_->w.segment(static_cast<Eigen::Index>(feature) * L, L).transpose();
    };
    auto add_state = [&](Eigen::Index t, const pddl::State& s) {
        for (int f = 0; f < task_->num_fluents(); ++f)
            if (s.test(f)) add(t, fluent_feature_[static_cast<std::size_t>(f)]);
    };

    add(0, plan_start_feature_);
    add_state(0, task_->initial);
    pddl::State s = task_->initial;
    Eigen::Index t = 1;
    for (int aid : prefix.actions) {
        s = pddl::apply(*task_, s, aid);
        add(t, schema_feature_[static_cast<std::size_t>(aid)]);
        add(t, action_feature_[static_cast<std::size_t>(aid)]);
        add_state(t, s);
        ++t;
    }
    for (int aid : relaxed) {
        add(t, schema_feature_[static_cast<std::size_t>(aid)]);
        add(t, action_feature_[static_cast<std::size_t>(aid)]);
        ++t;
    }

    PredictedMeasures out;
    out.labels = crf::viterbi_from_emissions(*model_, e);
    if (n == 0) return out;  // nothing to score; keep θ̂ = β̂ = 1

    labels::LabeledPlan lp;
    lp.plan.actions = prefix.actions;
    lp.plan.actions.insert(lp.plan.actions.end(), relaxed.begin(), relaxed.end());
    lp.labels.reserve(out.labels.size());
    for (const auto& c : out.labels) lp.labels.push_back(crf::to_action_label(c));
    out.theta_hat = labels::explicability(lp);
    out.beta_hat = labels::predictability(lp);
    return out;
}

PredictedMeasures predict_measures(const crf::CRFModel& model, const pddl::GroundTask& task,
                                   const pddl::Plan& prefix, const std::vector<int>& relaxed) {
    return MeasurePredictor(model, task).predict(prefix, relaxed);
}

pddl::Plan ffexpd_plan(const pddl::GroundTask& task, const crf::CRFModel& model,
                       const ExpdWeights& weights, const search::SearchConfig& cfg) {
    const bool plain = weights.w_theta == 0.0 && weights.w_beta == 0.0;
    MeasurePredictor predictor(model, task);
    search::NodeEval eval = [&, plain](const pddl::State& s, const pddl::Plan& prefix) {
        auto relaxed = search::rpg_heuristic(task, s);
        if (relaxed.h_cost == search::kInfiniteCost)
            return std::numeric_limits<double>::infinity();
        double h = static_cast<double>(relaxed.h_cost);
        if (plain) return h;  // identical to the plain FF evaluation
        auto pm = predictor.predict(prefix, relaxed.actions);
        auto len = static_cast<double>(prefix.size() + relaxed.actions.size());
        return h + weights.w_theta * (1.0 - pm.theta_hat) * len +
               weights.w_beta * (1.0 - pm.beta_hat) * len;
    };
    auto result = search::ehc_search(task, eval, cfg);
    if (!result.solved) throw std::runtime_error("no plan found within the expansion limit");
    return std::move(result.plan);
}

std::size_t select_plan_index(const crf::CRFModel& model, const pddl::GroundTask& task,
                              const std::vector<pddl::Plan>& candidates, Criterion criterion) {
    if (candidates.empty()) throw std::invalid_argument("no candidate plans");
    MeasurePredictor predictor(model, task);
    std::size_t best = 0;
    double best_value = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        auto pm = predictor.predict(candidates[i], {});
        double v = criterion == Criterion::kTheta ? pm.theta_hat : pm.beta_hat;
        if (v > best_value) {
            best_value = v;
            best = i;
        }
    }
    return best;
}

const pddl::Plan& select_plan(const crf::CRFModel& model, const pddl::GroundTask& task,
                              const std::vector<pddl::Plan>& candidates, Criterion criterion) {
    return candidates[select_plan_index(model, task, candidates, criterion)];
}

std::size_t rand_select_index(std::size_t candidate_count, std::uint64_t seed) {
    if (candidate_count == 0) throw std::invalid_argument("no candidate plans");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, candidate_count - 1);
    return pick(rng);
}

const pddl::Plan& rand_select(const std::vector<pddl::Plan>& candidates, std::uint64_t seed) {
    return candidates[rand_select_index(candidates.size(), seed)];
}

}  // namespace xplan::expd
