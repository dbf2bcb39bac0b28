#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "xplan/labels.hpp"
#include "xplan/pddl.hpp"
#include "xplan/search.hpp"

namespace xplan::rover {

// Task names emitted by the ground-truth labeler.
inline const std::string kCollect = "C";
inline const std::string kStore = "S";
inline const std::string kObserve = "O";

struct RoverConfig {
    int width = 4;
    int height = 4;
    int min_resources = 1, max_resources = 3;
    int min_storages = 1, max_storages = 3;
    int min_observations = 1, max_observations = 3;
    int max_hidden = 3;  // 0 disables hidden goals; otherwise count drawn from [1, max_hidden]
};

struct Cell {
    int x = 0, y = 0;
    bool operator==(const Cell&) const = default;
};

inline int manhattan(Cell a, Cell b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }

// One instance layout. The public goal G asks for every storage full and
// every observation cell observed; the full goal G' additionally requires
// visiting each hidden cell.
struct RoverProblem {
    int width = 4, height = 4;
    Cell rover;
    std::vector<Cell> resources;
    std::vector<Cell> storages;
    std::vector<Cell> observations;
    std::vector<Cell> hidden;
};

std::string domain_text();  // the embedded PDDL domain (also shipped as data/rover.pddl)
std::string cell_name(const RoverProblem& p, Cell c);
pddl::ProblemInstance to_problem(const RoverProblem& p, bool include_hidden,
                                 const std::string& name = "rover-problem");

// Both groundings share one fluent universe and one action numbering; only
// the goal differs, so plans found on full_task replay on public_task.
struct GeneratedInstance {
    RoverProblem problem;
    pddl::GroundTask public_task;
    pddl::GroundTask full_task;
};

GeneratedInstance make_instance(const RoverProblem& p);  // grounds without a solvability check

// Random layout, solvability of G' verified by the planner; deterministic per
// seed. Throws std::runtime_error when no layout fits after bounded retries.
GeneratedInstance gen_problem(const RoverConfig& cfg, std::uint64_t seed);

// Fresh hidden cells for an existing layout (used to build candidate plan
// sets that share a public goal). Drawn distinct from every non-hidden cell;
// the count is capped by the free cells remaining, so a saturated grid
// yields fewer (possibly zero) hidden cells rather than an error.
std::vector<Cell> sample_hidden_cells(const RoverProblem& p, int max_hidden, std::mt19937_64& rng);

// The scripted labeling scheme: an action gets a current task only when it
// strictly shortens the optimal plan toward the public goal, attributed via
// the nearest relevant target; next labels anticipate the task pursued after
// the current one completes.
class GroundTruthLabeler {
  public:
    GroundTruthLabeler(const RoverProblem& problem, const pddl::GroundTask& public_task);

    // Throws std::runtime_error if the plan does not apply from the initial state.
    labels::LabeledPlan label(const pddl::Plan& plan) const;

  private:
    struct Snapshot;  // logical view of one state
    struct Candidate {
        Cell cell;
        const std::string* task;
        int entity;
    };

    Snapshot snapshot(const pddl::State& s) const;
    std::vector<Candidate> candidates(const Snapshot& v) const;
    const Candidate* unique_closest(const std::vector<Candidate>& c, Cell from) const;
    labels::TaskSet anticipated_after(const Snapshot& v, Cell reference) const;

    RoverProblem problem_;
    const pddl::GroundTask* task_;
    search::DistanceOracle oracle_;
    std::vector<int> at_rover_;       // fluent id per cell index
    std::vector<int> resource_home_;  // "at resourceR <home cell>" per resource
    std::vector<int> carrying_;       // per resource
    std::vector<int> empty_;          // per storage
    std::vector<int> ob_observed_;    // "observed <cell>" per observation
};

// Stable per-instance seed derivation for batch generation.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

// n labeled instances: generate, plan for G' with ehc_plan, label against G,
// extract features. Per-instance failures are rethrown with the problem id.
std::vector<labels::PlanRecord> gen_dataset(const RoverConfig& cfg, int n, std::uint64_t seed,
                                            const std::string& split);

// dataset.jsonl + manifest.json under dir (which must exist).
void write_dataset(const std::string& dir, const std::vector<labels::PlanRecord>& records,
                   const RoverConfig& cfg, std::uint64_t seed);

}  // namespace xplan::rover
