#include "xplan/features.hpp"

#include <algorithm>

namespace xplan::features {

std::string canonical_fluent(std::string_view fluent) {
    std::string out;
    out.reserve(fluent.size() + 2);
    bool first = true;
    std::size_t i = 0;
    while (i < fluent.size()) {
        std::size_t end = fluent.find(' ', i);
        if (end == std::string_view::npos) end = fluent.size();
        if (first) {
            out.append(fluent.substr(i, end - i));
            out.push_back('(');
            first = false;
        } else {
            if (out.back() != '(') out.push_back(',');
            out.append(fluent.substr(i, end - i));
        }
        i = end + 1;
    }
    out.push_back(')');
    return out;
}

std::string canonical_action(const pddl::GroundAction& action) { return canonical_fluent(action.name); }

void FeatureExtractor::add_provider(FeatureProvider provider) { providers_.push_back(std::move(provider)); }

namespace {

void finish(std::vector<std::string>& names) {
    std::sort(names.begin(), names.end());
    names.erase(std::unique(names.begin(), names.end()), names.end());
}

void append_state_fluents(const pddl::GroundTask& task, const pddl::State& s,
                          std::vector<std::string>& out) {
    for (std::size_t f = 0; f < task.num_fluents(); ++f)
        if (s.test(static_cast<int>(f))) out.push_back(canonical_fluent(task.fluents[f]));
}

}  // namespace

std::vector<FeatureSet> FeatureExtractor::plan_features(const pddl::GroundTask& task,
                                                        const pddl::Plan& plan) const {
    std::vector<FeatureSet> out;
    out.reserve(plan.size() + 1);
    pddl::State s = task.initial;

    FeatureSet start;
    start.push_back(kPlanStartFeature);
    append_state_fluents(task, s, start);
    for (const auto& p : providers_) p(task, plan, 0, s, start);
    finish(start);
    out.push_back(std::move(start));

    for (std::size_t i = 0; i < plan.actions.size(); ++i) {
        const pddl::GroundAction& action = task.actions[static_cast<std::size_t>(plan.actions[i])];
        s = pddl::apply(task, s, action.id);
        FeatureSet fs;
        fs.push_back(action.schema);
        fs.push_back(canonical_action(action));
        append_state_fluents(task, s, fs);
        for (const auto& p : providers_) p(task, plan, i + 1, s, fs);
        finish(fs);
        out.push_back(std::move(fs));
    }
    return out;
}

std::vector<FeatureSet> FeatureExtractor::relaxed_features(const pddl::GroundTask& task,
                                                           const std::vector<int>& actions) const {
    std::vector<FeatureSet> out;
    out.reserve(actions.size());
    for (int id : actions) {
        const pddl::GroundAction& action = task.actions[static_cast<std::size_t>(id)];
        FeatureSet fs{action.schema, canonical_action(action)};
        finish(fs);
        out.push_back(std::move(fs));
    }
    return out;
}

std::vector<FeatureSet> extract_plan_features(const pddl::GroundTask& task, const pddl::Plan& plan) {
    return FeatureExtractor{}.plan_features(task, plan);
}

std::vector<FeatureSet> extract_relaxed_features(const pddl::GroundTask& task,
                                                 const std::vector<int>& actions) {
    return FeatureExtractor{}.relaxed_features(task, actions);
}

}  // namespace xplan::features
