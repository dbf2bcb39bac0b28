#include "xplan/search.hpp"

#include <algorithm>
#include <deque>
#include <queue>
#include <stdexcept>
#include <unordered_set>

namespace xplan::search {

namespace {

using pddl::GroundTask;
using pddl::Plan;
using pddl::State;

struct PathNode {
    State s;
    int parent = -1;
    int action = -1;
};

Plan path_from(const std::vector<PathNode>& arena, int idx, const Plan& base) {
    std::vector<int> rev;
    for (int i = idx; arena[static_cast<std::size_t>(i)].parent >= 0; i = arena[static_cast<std::size_t>(i)].parent)
        rev.push_back(arena[static_cast<std::size_t>(i)].action);
    Plan p = base;
    p.actions.insert(p.actions.end(), rev.rbegin(), rev.rend());
    return p;
}

}  // namespace

pddl::State relevance_mask(const GroundTask& task) {
    State mask(task.num_fluents());
    for (const auto& a : task.actions)
        for (int f : a.pre) mask.set(f);
    for (int f : task.goal) mask.set(f);
    return mask;
}

// ---------------------------------------------------------------- relaxation

RelaxedPlanResult rpg_heuristic(const GroundTask& task, const State& s) {
    const int num_fluents = static_cast<int>(task.num_fluents());
    const int num_actions = static_cast<int>(task.actions.size());
    constexpr int kUnset = -1;

    std::vector<int> fact_layer(static_cast<std::size_t>(num_fluents), kUnset);
    std::vector<int> action_layer(static_cast<std::size_t>(num_actions), kUnset);
    std::vector<int> missing(static_cast<std::size_t>(num_actions));
    for (int a = 0; a < num_actions; ++a)
        missing[static_cast<std::size_t>(a)] = static_cast<int>(task.actions[static_cast<std::size_t>(a)].pre.size());

    // consumers[f] = actions with f in their precondition
    std::vector<std::vector<int>> consumers(static_cast<std::size_t>(num_fluents));
    for (const auto& a : task.actions)
        for (int f : a.pre) consumers[static_cast<std::size_t>(f)].push_back(a.id);

    std::vector<int> frontier;
    for (int f = 0; f < num_fluents; ++f)
        if (s.test(f)) {
            fact_layer[static_cast<std::size_t>(f)] = 0;
            frontier.push_back(f);
        }

    int pending_goals = 0;
    for (int g : task.goal)
        if (fact_layer[static_cast<std::size_t>(g)] != 0) ++pending_goals;

    int layer = 0;
    // Zero-precondition actions fire at layer 0.
    std::vector<int> ready;
    for (int a = 0; a < num_actions; ++a)
        if (missing[static_cast<std::size_t>(a)] == 0) {
            action_layer[static_cast<std::size_t>(a)] = 0;
            ready.push_back(a);
        }

    while (pending_goals > 0) {
        for (int f : frontier)
            for (int a : consumers[static_cast<std::size_t>(f)])
                if (--missing[static_cast<std::size_t>(a)] == 0) {
                    action_layer[static_cast<std::size_t>(a)] = layer;
                    ready.push_back(a);
                }
        if (ready.empty()) return {};  // fixpoint: goal unreachable in the relaxation
        frontier.clear();
        ++layer;
        for (int a : ready)
            for (int f : task.actions[static_cast<std::size_t>(a)].add)
                if (fact_layer[static_cast<std::size_t>(f)] == kUnset) {
                    fact_layer[static_cast<std::size_t>(f)] = layer;
                    frontier.push_back(f);
                    if (std::binary_search(task.goal.begin(), task.goal.end(), f)) --pending_goals;
                }
        ready.clear();
    }

    // Backward extraction: every subgoal gets its earliest achiever (lowest id
    // on ties); preconditions of chosen achievers become subgoals in turn.
    std::vector<char> fact_closed(static_cast<std::size_t>(num_fluents), 0);
    std::vector<char> selected(static_cast<std::size_t>(num_actions), 0);
    std::vector<int> stack(task.goal.begin(), task.goal.end());
    std::vector<int> chosen;
    while (!stack.empty()) {
        int f = stack.back();
        stack.pop_back();
        if (fact_layer[static_cast<std::size_t>(f)] == 0 || fact_closed[static_cast<std::size_t>(f)]) continue;
        fact_closed[static_cast<std::size_t>(f)] = 1;
        int best = -1;
        for (int a = 0; a < num_actions; ++a) {
            if (action_layer[static_cast<std::size_t>(a)] == kUnset) continue;
            const auto& add = task.actions[static_cast<std::size_t>(a)].add;
            if (!std::binary_search(add.begin(), add.end(), f)) continue;
            if (best < 0 || action_layer[static_cast<std::size_t>(a)] < action_layer[static_cast<std::size_t>(best)])
                best = a;
        }
        if (!selected[static_cast<std::size_t>(best)]) {
            selected[static_cast<std::size_t>(best)] = 1;
            chosen.push_back(best);
            for (int p : task.actions[static_cast<std::size_t>(best)].pre) stack.push_back(p);
        }
    }

    RelaxedPlanResult result;
    result.h_cost = 0;
    result.actions = std::move(chosen);
    std::sort(result.actions.begin(), result.actions.end(), [&](int a, int b) {
        int la = action_layer[static_cast<std::size_t>(a)];
        int lb = action_layer[static_cast<std::size_t>(b)];
        return la != lb ? la < lb : a < b;
    });
    for (int a : result.actions) result.h_cost += task.actions[static_cast<std::size_t>(a)].cost;
    return result;
}

// ---------------------------------------------------------------- hill climbing

SearchResult ehc_search(const GroundTask& task, const NodeEval& eval, const SearchConfig& cfg) {
    if (cfg.max_expansions <= 0) throw std::invalid_argument("max_expansions must be positive");
    SearchResult result;
    if (pddl::goal_satisfied(task, task.initial)) {
        result.solved = true;
        return result;
    }

    const State mask = relevance_mask(task);
    constexpr double kInf = std::numeric_limits<double>::infinity();

    State current = task.initial;
    Plan prefix;
    double h_current = eval(current, prefix);

    bool stuck = h_current == kInf;
    while (!stuck) {
        // One episode: breadth-first from `current` for a strictly better score.
        std::vector<PathNode> arena;
        arena.push_back({current, -1, -1});
        std::unordered_set<State, pddl::StateHash> visited;
        visited.insert(current.intersect(mask));
        std::deque<int> queue{0};
        bool improved = false;

        while (!queue.empty()) {
            if (result.expansions >= cfg.max_expansions) return result;
            int idx = queue.front();
            queue.pop_front();
            ++result.expansions;
            const State snapshot = arena[static_cast<std::size_t>(idx)].s;
            for (const auto& action : task.actions) {
                if (!snapshot.contains_all(action.pre)) continue;
                State next = pddl::apply(task, snapshot, action.id);
                if (pddl::goal_satisfied(task, next)) {
                    arena.push_back({State(), idx, action.id});
                    result.plan = path_from(arena, static_cast<int>(arena.size()) - 1, prefix);
                    result.solved = true;
                    return result;
                }
                if (!visited.insert(next.intersect(mask)).second) continue;
                arena.push_back({std::move(next), idx, action.id});
                int nidx = static_cast<int>(arena.size()) - 1;
                Plan candidate = path_from(arena, nidx, prefix);
                double h = eval(arena[static_cast<std::size_t>(nidx)].s, candidate);
                if (h == kInf) continue;  // dead end
                if (h < h_current) {
                    current = arena[static_cast<std::size_t>(nidx)].s;
                    prefix = std::move(candidate);
                    h_current = h;
                    improved = true;
                    break;
                }
                queue.push_back(nidx);
            }
            if (improved) break;
        }
        if (!improved) stuck = true;
    }

    if (cfg.fallback == Fallback::kNone) return result;

    // Greedy best-first over the whole space, restarted from the initial state.
    result.used_fallback = true;
    std::vector<PathNode> arena;
    arena.push_back({task.initial, -1, -1});
    std::unordered_set<State, pddl::StateHash> visited;
    visited.insert(task.initial.intersect(mask));

    using Entry = std::pair<double, std::int64_t>;  // (score, insertion seq) → arena index
    struct EntryLess {
        bool operator()(const std::pair<Entry, int>& a, const std::pair<Entry, int>& b) const {
            return a.first > b.first;  // min-heap
        }
    };
    std::priority_queue<std::pair<Entry, int>, std::vector<std::pair<Entry, int>>, EntryLess> open;
    std::int64_t seq = 0;
    {
        double h0 = eval(task.initial, Plan{});
        if (h0 == kInf) return result;
        open.push({{h0, seq++}, 0});
    }

    while (!open.empty()) {
        if (result.expansions >= cfg.max_expansions) return result;
        int idx = open.top().second;
        open.pop();
        ++result.expansions;
        const State snapshot = arena[static_cast<std::size_t>(idx)].s;
        for (const auto& action : task.actions) {
            if (!snapshot.contains_all(action.pre)) continue;
            State next = pddl::apply(task, snapshot, action.id);
            if (pddl::goal_satisfied(task, next)) {
                arena.push_back({State(), idx, action.id});
                result.plan = path_from(arena, static_cast<int>(arena.size()) - 1, Plan{});
                result.solved = true;
                return result;
            }
            if (!visited.insert(next.intersect(mask)).second) continue;
            arena.push_back({std::move(next), idx, action.id});
            int nidx = static_cast<int>(arena.size()) - 1;
            double h = eval(arena[static_cast<std::size_t>(nidx)].s, path_from(arena, nidx, Plan{}));
            if (h == kInf) continue;
            open.push({{h, seq++}, nidx});
        }
    }
    return result;
}

pddl::Plan ehc_plan(const GroundTask& task, const SearchConfig& cfg) {
    NodeEval ff = [&task](const State& s, const Plan&) {
        int h = rpg_heuristic(task, s).h_cost;
        return h == kInfiniteCost ? std::numeric_limits<double>::infinity() : static_cast<double>(h);
    };
    SearchResult result = ehc_search(task, ff, cfg);
    if (!result.solved) throw std::runtime_error("no plan found within the expansion limit");
    return result.plan;
}

// ---------------------------------------------------------------- optimal search

std::optional<pddl::Plan> optimal_plan(const GroundTask& task, const State& from) {
    const State mask = relevance_mask(task);

    std::vector<PathNode> arena;
    arena.push_back({from, -1, -1});
    std::unordered_map<State, int, pddl::StateHash> best;  // masked state → cost
    best.emplace(from.intersect(mask), 0);

    struct HeapEntry {
        int cost;
        std::int64_t seq;
        int idx;
        bool operator>(const HeapEntry& o) const { return cost != o.cost ? cost > o.cost : seq > o.seq; }
    };
    std::priority_queue<HeapEntry, std::vector<HeapEntry>, std::greater<>> open;
    std::int64_t seq = 0;
    open.push({0, seq++, 0});
    std::vector<int> cost_at{0};

    while (!open.empty()) {
        auto [cost, _, idx] = open.top();
        open.pop();
        const State snapshot = arena[static_cast<std::size_t>(idx)].s;
        auto it = best.find(snapshot.intersect(mask));
        if (it != best.end() && it->second < cost) continue;  // stale entry
        if (pddl::goal_satisfied(task, snapshot)) return path_from(arena, idx, Plan{});
        for (const auto& action : task.actions) {
            if (!snapshot.contains_all(action.pre)) continue;
            State next = pddl::apply(task, snapshot, action.id);
            int ncost = cost + action.cost;
            State key = next.intersect(mask);
            auto [slot, inserted] = best.emplace(key, ncost);
            if (!inserted) {
                if (slot->second <= ncost) continue;
                slot->second = ncost;
            }
            arena.push_back({std::move(next), idx, action.id});
            open.push({ncost, seq++, static_cast<int>(arena.size()) - 1});
        }
    }
    return std::nullopt;
}

std::optional<pddl::Plan> optimal_plan(const GroundTask& task) { return optimal_plan(task, task.initial); }

int optimal_plan_length(const GroundTask& task, const State& s) {
    auto plan = optimal_plan(task, s);
    return plan ? static_cast<int>(plan->actions.size()) : kInfiniteCost;
}

// ---------------------------------------------------------------- distance oracle

DistanceOracle::DistanceOracle(const GroundTask& task) : task_(&task), mask_(relevance_mask(task)) {
    // Forward sweep: enumerate the masked reachable graph with its edges.
    std::vector<State> nodes;
    std::unordered_map<State, int, pddl::StateHash> index;
    struct Edge {
        int from, to, cost;
    };
    std::vector<Edge> edges;

    State start = task.initial.intersect(mask_);
    nodes.push_back(start);
    index.emplace(start, 0);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const State snapshot = nodes[i];
        for (const auto& action : task.actions) {
            if (!snapshot.contains_all(action.pre)) continue;
            State next = pddl::apply(task, snapshot, action.id).intersect(mask_);
            auto [it, inserted] = index.emplace(next, static_cast<int>(nodes.size()));
            if (inserted) nodes.push_back(std::move(next));
            edges.push_back({static_cast<int>(i), it->second, action.cost});
        }
    }

    std::vector<std::vector<std::pair<int, int>>> reverse(nodes.size());  // to → (from, cost)
    for (const auto& e : edges) reverse[static_cast<std::size_t>(e.to)].push_back({e.from, e.cost});

    // Multi-source backward Dijkstra from every goal state.
    std::vector<int> dist(nodes.size(), kInfiniteCost);
    using Item = std::pair<int, int>;  // (dist, node)
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (pddl::goal_satisfied(task, nodes[i])) {
            dist[i] = 0;
            heap.push({0, static_cast<int>(i)});
        }
    while (!heap.empty()) {
        auto [d, u] = heap.top();
        heap.pop();
        if (d > dist[static_cast<std::size_t>(u)]) continue;
        for (auto [v, c] : reverse[static_cast<std::size_t>(u)])
            if (d + c < dist[static_cast<std::size_t>(v)]) {
                dist[static_cast<std::size_t>(v)] = d + c;
                heap.push({d + c, v});
            }
    }

    dist_.reserve(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) dist_.emplace(nodes[i], dist[i]);
}

int DistanceOracle::distance(const State& s) const {
    auto it = dist_.find(s.intersect(mask_));
    if (it != dist_.end()) return it->second;
    auto plan = optimal_plan(*task_, s);
    if (!plan) return kInfiniteCost;
    int cost = 0;
    for (int a : plan->actions) cost += task_->actions[static_cast<std::size_t>(a)].cost;
    return cost;
}

}  // namespace xplan::search
