#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace xplan::pddl {

// Thrown on malformed domain/problem/plan text. line/col are 1-based.
struct ParseError : std::runtime_error {
    ParseError(std::string msg, int line, int col);
    int line;
    int col;
};

struct Predicate {
    std::string name;
    std::vector<std::string> param_types;  // "object" when untyped
    int arity() const { return static_cast<int>(param_types.size()); }
};

// Literal inside an action schema; args index the schema's parameter list.
struct SchemaLiteral {
    int predicate = -1;
    std::vector<int> args;
};

struct ActionSchema {
    std::string name;
    std::vector<std::string> param_names;
    std::vector<std::string> param_types;
    std::vector<SchemaLiteral> precondition;  // positive conjunction
    std::vector<SchemaLiteral> add;
    std::vector<SchemaLiteral> del;
    int cost = 1;  // from (increase (total-cost) k), default 1
};

struct DomainModel {
    std::string name;
    std::vector<std::string> types;                        // declared types, "object" implicit
    std::unordered_map<std::string, std::string> supertype;  // type -> parent
    std::vector<Predicate> predicates;
    std::unordered_map<std::string, int> predicate_index;
    std::vector<ActionSchema> schemas;
    bool typed = false;

    bool is_subtype(const std::string& t, const std::string& ancestor) const;
};

// Ground atom as written in a problem file: predicate + object names.
struct GroundAtom {
    std::string predicate;
    std::vector<std::string> args;
};

struct ProblemInstance {
    std::string name;
    std::string domain_name;
    std::vector<std::pair<std::string, std::string>> objects;  // (name, type)
    std::vector<GroundAtom> init;
    std::vector<GroundAtom> goal;
};

// Fixed-width bitset over the grounded fluent universe.
class State {
public:
    State() = default;
    explicit State(std::size_t num_fluents) : bits_((num_fluents + 63) / 64, 0) {}

    bool test(int f) const { return (bits_[static_cast<std::size_t>(f) >> 6] >> (f & 63)) & 1u; }
    void set(int f) { bits_[static_cast<std::size_t>(f) >> 6] |= std::uint64_t{1} << (f & 63); }
    void reset(int f) { bits_[static_cast<std::size_t>(f) >> 6] &= ~(std::uint64_t{1} << (f & 63)); }

    bool contains_all(std::span<const int> fluents) const {
        for (int f : fluents)
            if (!test(f)) return false;
        return true;
    }

    State intersect(const State& mask) const {
        State out = *this;
        for (std::size_t i = 0; i < out.bits_.size(); ++i) out.bits_[i] &= mask.bits_[i];
        return out;
    }

    std::span<const std::uint64_t> words() const { return bits_; }
    friend bool operator==(const State&, const State&) = default;

private:
    std::vector<std::uint64_t> bits_;
};

struct StateHash {
    std::size_t operator()(const State& s) const {
        std::size_t h = 0xcbf29ce484222325ull;
        for (std::uint64_t w : s.words()) {
            h ^= w;
            h *= 0x100000001b3ull;
        }
        return h;
    }
};

struct GroundAction {
    int id = -1;
    std::string name;    // e.g. "navigate rover l5 l4"
    std::string schema;  // e.g. "navigate"
    std::vector<int> pre;  // sorted fluent ids
    std::vector<int> add;
    std::vector<int> del;  // disjoint from add
    int cost = 1;
};

struct GroundTask {
    std::vector<std::string> fluents;  // index -> "at rover l4"
    std::unordered_map<std::string, int> fluent_index;
    std::vector<GroundAction> actions;
    State initial;
    std::vector<int> goal;  // sorted fluent ids

    int num_fluents() const { return static_cast<int>(fluents.size()); }
};

// Action sequence <a1..aN>; the null plan-start marker a0 is implicit and never stored.
struct Plan {
    std::vector<int> actions;  // GroundTask action ids
    std::size_t size() const { return actions.size(); }
    bool empty() const { return actions.empty(); }
};

struct ValidationReport {
    bool valid = false;            // all steps applicable and goal satisfied
    int first_failing_index = -1;  // 0-based into plan.actions, -1 if all applicable
    bool goal_satisfied = false;
    int total_cost = 0;            // sum of action costs over the whole sequence
};

DomainModel parse_domain(std::string_view text);
ProblemInstance parse_problem(std::string_view text);

GroundTask ground(const DomainModel& domain, const ProblemInstance& problem);

bool applicable(const GroundTask& task, const State& s, int action_id);
// STRIPS step: (s \ del) | add. Throws std::runtime_error when the precondition is unmet.
State apply(const GroundTask& task, const State& s, int action_id);
bool goal_satisfied(const GroundTask& task, const State& s);

ValidationReport validate_plan(const GroundTask& task, const Plan& plan);

// Plan text: one "(name arg1 arg2 ...)" per line, ';' starts a comment, a0 never serialized.
std::string to_plan_text(const GroundTask& task, const Plan& plan);
Plan parse_plan_text(const GroundTask& task, std::string_view text);

}  // namespace xplan::pddl
