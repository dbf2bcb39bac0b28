#pragma once

#include <set>
#include <string>
#include <vector>

#include "xplan/pddl.hpp"

namespace xplan::labels {

// Reserved current-label of the plan-start marker a0.
inline const std::string kStartLabel = "START";

using TaskSet = std::set<std::string>;

struct ActionLabel {
    TaskSet current;  // tasks this action is interpreted as serving; empty = inexplicable
    TaskSet next;     // anticipated following task; empty = unpredictable / nothing left
    bool operator==(const ActionLabel&) const = default;
};

// One label per position a0..aN (labels.size() == plan.size() + 1);
// labels[0].current is {START}.
struct LabeledPlan {
    pddl::Plan plan;
    std::vector<ActionLabel> labels;
};

struct MeasureReport {
    double theta = 0.0;
    double beta = 0.0;
};

// Fraction of real actions (a1..aN) with a non-empty current label.
// Throws std::invalid_argument when the plan has no real action.
double explicability(const LabeledPlan& lp);

// Fraction of positions a0..aN whose next label correctly anticipates the
// current label of the first later action with a differing current label (the
// last action when none differs), or whose suffix carries no next label at
// all. Requires every label set to be empty or a singleton; throws
// std::invalid_argument otherwise.
double predictability(const LabeledPlan& lp);

MeasureReport measures(const LabeledPlan& lp);

// One dataset record: a labeled plan with its per-position observation
// features, serialized as a single JSON line.
struct PlanRecord {
    std::string problem_id;
    std::vector<std::string> plan;                   // grounded action strings, a0 implicit
    std::vector<ActionLabel> labels;                 // size plan.size() + 1
    std::vector<std::vector<std::string>> features;  // size plan.size() + 1
    std::string split;                               // "train" or "test"
};

std::string to_jsonl(const PlanRecord& record);            // one line, no trailing newline
PlanRecord from_jsonl(const std::string& line);            // throws std::runtime_error on malformed input
std::vector<PlanRecord> read_jsonl(const std::string& text);
std::string write_jsonl(const std::vector<PlanRecord>& records);

}  // namespace xplan::labels
