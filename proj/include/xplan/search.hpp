#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <unordered_map>

#include "xplan/pddl.hpp"

namespace xplan::search {

// Marker for "goal unreachable" in integer-valued heuristics and distances.
inline constexpr int kInfiniteCost = std::numeric_limits<int>::max();

struct RelaxedPlanResult {
    int h_cost = kInfiniteCost;       // summed cost of the relaxed plan, kInfiniteCost if unreachable
    std::vector<int> actions;         // delete-free plan, executable in the order given
};

// Fact/action layers ignoring deletes; extraction picks the earliest-layer
// achiever per subgoal, lowest action id on ties, each action counted once.
RelaxedPlanResult rpg_heuristic(const pddl::GroundTask& task, const pddl::State& s);

enum class Fallback { kNone, kGreedyBest };

struct SearchConfig {
    std::int64_t max_expansions = 1'000'000;  // cumulative across hill climbing and fallback
    Fallback fallback = Fallback::kGreedyBest;
    std::uint64_t seed = 0;  // reserved; the search itself is deterministic
};

struct SearchResult {
    bool solved = false;
    pddl::Plan plan;
    std::int64_t expansions = 0;
    bool used_fallback = false;
};

// Node evaluation: given a reached state and the plan prefix that produced it,
// return a score to minimize. +inf marks a dead end to prune.
using NodeEval = std::function<double(const pddl::State&, const pddl::Plan&)>;

// Enforced hill climbing on `eval`: breadth-first episodes that stop at the
// first strictly better successor; on plateau exhaustion, greedy best-first
// search restarted from the initial state (same eval, shared expansion budget).
SearchResult ehc_search(const pddl::GroundTask& task, const NodeEval& eval, const SearchConfig& cfg);

// FF planner: ehc_search over rpg_heuristic's h_cost. Throws std::runtime_error
// if no plan is found within the expansion budget.
pddl::Plan ehc_plan(const pddl::GroundTask& task, const SearchConfig& cfg = {});

// Uniform-cost search with duplicate detection; nullopt if the goal is unreachable.
std::optional<pddl::Plan> optimal_plan(const pddl::GroundTask& task, const pddl::State& from);
std::optional<pddl::Plan> optimal_plan(const pddl::GroundTask& task);

// Action count of a cost-minimal plan from s, or kInfiniteCost.
int optimal_plan_length(const pddl::GroundTask& task, const pddl::State& s);

// Fluents that can influence search: every precondition plus the goal. States
// equal on this mask have identical applicable actions, goal status, and
// relaxation values, so searches deduplicate on masked states.
pddl::State relevance_mask(const pddl::GroundTask& task);

// Cost-to-goal for every state reachable from task.initial, computed once by
// a backward sweep over the masked reachable graph. Lookups for states outside
// that graph fall back to a fresh search. Equals optimal_plan_length under
// uniform action costs.
class DistanceOracle {
  public:
    explicit DistanceOracle(const pddl::GroundTask& task);
    int distance(const pddl::State& s) const;

  private:
    const pddl::GroundTask* task_;
    pddl::State mask_;
    std::unordered_map<pddl::State, int, pddl::StateHash> dist_;
};

}  // namespace xplan::search
