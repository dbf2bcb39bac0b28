#include "xplan/rover.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

#include "json.hpp"
#include "xplan/features.hpp"

namespace xplan::rover {

std::string domain_text() {
    return R"((define (domain rover)
  (:requirements :strips :typing)
  (:types location locatable - object
          rover resource storage - locatable)
  (:predicates (at ?o - locatable ?l - location)
               (adjacent ?a - location ?b - location)
               (carrying ?r - rover ?re - resource)
               (unloaded ?r - rover)
               (empty ?s - storage)
               (full ?s - storage)
               (stored ?re - resource ?s - storage)
               (observed ?l - location)
               (visited ?l - location))
  (:action navigate
    :parameters (?r - rover ?from - location ?to - location)
    :precondition (and (at ?r ?from) (adjacent ?from ?to))
    :effect (and (not (at ?r ?from)) (at ?r ?to) (visited ?to)))
  (:action load
    :parameters (?r - rover ?re - resource ?l - location)
    :precondition (and (at ?r ?l) (at ?re ?l) (unloaded ?r))
    :effect (and (not (at ?re ?l)) (not (unloaded ?r)) (carrying ?r ?re)))
  (:action unload
    :parameters (?r - rover ?re - resource ?s - storage ?l - location)
    :precondition (and (at ?r ?l) (at ?s ?l) (carrying ?r ?re) (empty ?s))
    :effect (and (not (carrying ?r ?re)) (unloaded ?r) (not (empty ?s))
                 (full ?s) (stored ?re ?s)))
  (:action observe
    :parameters (?r - rover ?l - location)
    :precondition (at ?r ?l)
    :effect (observed ?l)))
)";
}

namespace {

int cell_index(const RoverProblem& p, Cell c) { return c.y * p.width + c.x; }

bool in_grid(const RoverProblem& p, Cell c) {
    return c.x >= 0 && c.x < p.width && c.y >= 0 && c.y < p.height;
}

std::vector<Cell> all_cells(const RoverProblem& p) {
    std::vector<Cell> out;
    out.reserve(static_cast<std::size_t>(p.width) * static_cast<std::size_t>(p.height));
    for (int y = 0; y < p.height; ++y)
        for (int x = 0; x < p.width; ++x) out.push_back({x, y});
    return out;
}

void check_problem(const RoverProblem& p) {
    if (p.width < 2 || p.height < 2) throw std::invalid_argument("rover grid must be at least 2x2");
    if (p.resources.empty() || p.storages.empty())
        throw std::invalid_argument("rover instance needs at least one resource and one storage");
    if (p.resources.size() < p.storages.size())
        throw std::invalid_argument("rover instance needs at least as many resources as storages");
    std::set<std::pair<int, int>> seen;
    auto claim = [&](Cell c, const char* what) {
        if (!in_grid(p, c)) throw std::invalid_argument(std::string(what) + " cell outside the grid");
        if (!seen.insert({c.x, c.y}).second)
            throw std::invalid_argument(std::string(what) + " cell collides with another entity");
    };
    claim(p.rover, "rover");
    for (Cell c : p.resources) claim(c, "resource");
    for (Cell c : p.storages) claim(c, "storage");
    for (Cell c : p.observations) claim(c, "observation");
    for (Cell c : p.hidden) claim(c, "hidden goal");
}

}  // namespace

std::string cell_name(const RoverProblem& p, Cell c) { return "l" + std::to_string(cell_index(p, c)); }

pddl::ProblemInstance to_problem(const RoverProblem& p, bool include_hidden, const std::string& name) {
    check_problem(p);
    pddl::ProblemInstance prob;
    prob.name = name;
    prob.domain_name = "rover";

    prob.objects.emplace_back("rover", "rover");
    for (std::size_t i = 0; i < p.resources.size(); ++i)
        prob.objects.emplace_back("resource" + std::to_string(i), "resource");
    for (std::size_t i = 0; i < p.storages.size(); ++i)
        prob.objects.emplace_back("storage" + std::to_string(i), "storage");
    for (Cell c : all_cells(p)) prob.objects.emplace_back(cell_name(p, c), "location");

    prob.init.push_back({"at", {"rover", cell_name(p, p.rover)}});
    prob.init.push_back({"unloaded", {"rover"}});
    for (std::size_t i = 0; i < p.resources.size(); ++i)
        prob.init.push_back({"at", {"resource" + std::to_string(i), cell_name(p, p.resources[i])}});
    for (std::size_t i = 0; i < p.storages.size(); ++i) {
        prob.init.push_back({"at", {"storage" + std::to_string(i), cell_name(p, p.storages[i])}});
        prob.init.push_back({"empty", {"storage" + std::to_string(i)}});
    }
    for (Cell c : all_cells(p))
        for (Cell d : {Cell{c.x + 1, c.y}, Cell{c.x - 1, c.y}, Cell{c.x, c.y + 1}, Cell{c.x, c.y - 1}})
            if (in_grid(p, d)) prob.init.push_back({"adjacent", {cell_name(p, c), cell_name(p, d)}});

    for (std::size_t i = 0; i < p.storages.size(); ++i)
        prob.goal.push_back({"full", {"storage" + std::to_string(i)}});
    for (Cell c : p.observations) prob.goal.push_back({"observed", {cell_name(p, c)}});
    if (include_hidden)
        for (Cell c : p.hidden) prob.goal.push_back({"visited", {cell_name(p, c)}});
    return prob;
}

GeneratedInstance make_instance(const RoverProblem& p) {
    static const pddl::DomainModel domain = pddl::parse_domain(domain_text());
    GeneratedInstance inst;
    inst.problem = p;
    inst.public_task = pddl::ground(domain, to_problem(p, false));
    inst.full_task = pddl::ground(domain, to_problem(p, true));
    return inst;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

namespace {

std::vector<Cell> draw_distinct_cells(const RoverProblem& grid, int count, std::mt19937_64& rng,
                                      const std::vector<Cell>& taken) {
    std::vector<Cell> pool;
    for (Cell c : all_cells(grid))
        if (std::find(taken.begin(), taken.end(), c) == taken.end()) pool.push_back(c);
    if (static_cast<int>(pool.size()) < count)
        throw std::runtime_error("not enough free cells on the rover grid");
    std::vector<Cell> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        std::size_t j = pick(rng);
        out.push_back(pool[j]);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(j));
    }
    return out;
}

}  // namespace

GeneratedInstance gen_problem(const RoverConfig& cfg, std::uint64_t seed) {
    if (cfg.width < 2 || cfg.height < 2) throw std::invalid_argument("rover grid must be at least 2x2");
    auto check_range = [](int lo, int hi, const char* what) {
        if (lo < 1 || hi < lo) throw std::invalid_argument(std::string("bad ") + what + " count range");
    };
    check_range(cfg.min_resources, cfg.max_resources, "resource");
    check_range(cfg.min_storages, cfg.max_storages, "storage");
    check_range(cfg.min_observations, cfg.max_observations, "observation");
    if (cfg.max_hidden < 0) throw std::invalid_argument("max_hidden must be nonnegative");

    std::mt19937_64 rng(seed);
    const int cells = cfg.width * cfg.height;
    constexpr int kAttempts = 50;
    for (int attempt = 0; attempt < kAttempts; ++attempt) {
        auto draw = [&rng](int lo, int hi) {
            return std::uniform_int_distribution<int>(lo, hi)(rng);
        };
        int n_re = draw(cfg.min_resources, cfg.max_resources);
        int n_st = draw(cfg.min_storages, cfg.max_storages);
        int n_ob = draw(cfg.min_observations, cfg.max_observations);
        if (n_re < n_st) n_re = n_st;  // every storage must be fillable
        int n_hidden = cfg.max_hidden == 0 ? 0 : draw(1, cfg.max_hidden);
        if (1 + n_re + n_st + n_ob + n_hidden > cells) continue;

        RoverProblem p;
        p.width = cfg.width;
        p.height = cfg.height;
        std::vector<Cell> picks = draw_distinct_cells(p, 1 + n_re + n_st + n_ob + n_hidden, rng, {});
        auto take = [&picks](int n) {
            std::vector<Cell> out(picks.begin(), picks.begin() + n);
            picks.erase(picks.begin(), picks.begin() + n);
            return out;
        };
        p.rover = take(1)[0];
        p.resources = take(n_re);
        p.storages = take(n_st);
        p.observations = take(n_ob);
        p.hidden = take(n_hidden);

        GeneratedInstance inst = make_instance(p);
        try {
            search::ehc_plan(inst.full_task, {});
        } catch (const std::runtime_error&) {
            continue;  // unsolvable draw; resample
        }
        return inst;
    }
    throw std::runtime_error("rover generation failed after " + std::to_string(kAttempts) +
                             " attempts (seed " + std::to_string(seed) + ")");
}

std::vector<Cell> sample_hidden_cells(const RoverProblem& p, int max_hidden, std::mt19937_64& rng) {
    if (max_hidden == 0) return {};
    std::vector<Cell> taken{p.rover};
    taken.insert(taken.end(), p.resources.begin(), p.resources.end());
    taken.insert(taken.end(), p.storages.begin(), p.storages.end());
    taken.insert(taken.end(), p.observations.begin(), p.observations.end());
    const int free_cells = p.width * p.height - static_cast<int>(taken.size());
    const int cap = std::min(max_hidden, free_cells);
    if (cap < 1) return {};
    int count = std::uniform_int_distribution<int>(1, cap)(rng);
    return draw_distinct_cells(p, count, rng, taken);
}

// ---------------------------------------------------------------- labeler

struct GroundTruthLabeler::Snapshot {
    Cell rover;
    int carried = -1;                 // resource index, -1 when unloaded
    std::vector<char> resource_here;  // still sitting at its initial cell
    std::vector<char> storage_empty;
    std::vector<char> ob_pending;     // observation cell not yet observed
};

GroundTruthLabeler::GroundTruthLabeler(const RoverProblem& problem, const pddl::GroundTask& public_task)
    : problem_(problem), task_(&public_task), oracle_(public_task) {
    auto fid = [&](const std::string& name) {
        auto it = public_task.fluent_index.find(name);
        if (it == public_task.fluent_index.end())
            throw std::invalid_argument("task is missing expected rover fluent: " + name);
        return it->second;
    };
    for (Cell c : all_cells(problem_)) at_rover_.push_back(fid("at rover " + cell_name(problem_, c)));
    for (std::size_t r = 0; r < problem_.resources.size(); ++r) {
        std::string res = "resource" + std::to_string(r);
        resource_home_.push_back(fid("at " + res + " " + cell_name(problem_, problem_.resources[r])));
        carrying_.push_back(fid("carrying rover " + res));
    }
    for (std::size_t s = 0; s < problem_.storages.size(); ++s)
        empty_.push_back(fid("empty storage" + std::to_string(s)));
    for (Cell c : problem_.observations) ob_observed_.push_back(fid("observed " + cell_name(problem_, c)));
}

GroundTruthLabeler::Snapshot GroundTruthLabeler::snapshot(const pddl::State& s) const {
    Snapshot v;
    for (std::size_t i = 0; i < at_rover_.size(); ++i)
        if (s.test(at_rover_[i])) {
            v.rover = {static_cast<int>(i) % problem_.width, static_cast<int>(i) / problem_.width};
            break;
        }
    for (std::size_t r = 0; r < carrying_.size(); ++r)
        if (s.test(carrying_[r])) {
            v.carried = static_cast<int>(r);
            break;
        }
    for (int f : resource_home_) v.resource_here.push_back(s.test(f) ? 1 : 0);
    for (int f : empty_) v.storage_empty.push_back(s.test(f) ? 1 : 0);
    for (int f : ob_observed_) v.ob_pending.push_back(s.test(f) ? 0 : 1);
    return v;
}

std::vector<GroundTruthLabeler::Candidate> GroundTruthLabeler::candidates(const Snapshot& v) const {
    std::vector<Candidate> out;
    if (v.carried >= 0) {
        for (std::size_t s = 0; s < v.storage_empty.size(); ++s)
            if (v.storage_empty[s]) out.push_back({problem_.storages[s], &kStore, static_cast<int>(s)});
    } else if (std::find(v.storage_empty.begin(), v.storage_empty.end(), 1) != v.storage_empty.end()) {
        for (std::size_t r = 0; r < v.resource_here.size(); ++r)
            if (v.resource_here[r]) out.push_back({problem_.resources[r], &kCollect, static_cast<int>(r)});
    }
    for (std::size_t o = 0; o < v.ob_pending.size(); ++o)
        if (v.ob_pending[o]) out.push_back({problem_.observations[o], &kObserve, static_cast<int>(o)});
    return out;
}

const GroundTruthLabeler::Candidate* GroundTruthLabeler::unique_closest(
    const std::vector<Candidate>& c, Cell from) const {
    const Candidate* best = nullptr;
    int best_d = 0;
    int ties = 0;
    for (const auto& cand : c) {
        int d = manhattan(from, cand.cell);
        if (!best || d < best_d) {
            best = &cand;
            best_d = d;
            ties = 1;
        } else if (d == best_d) {
            ++ties;
        }
    }
    return ties == 1 ? best : nullptr;
}

labels::TaskSet GroundTruthLabeler::anticipated_after(const Snapshot& v, Cell reference) const {
    const auto cands = candidates(v);
    const Candidate* c = unique_closest(cands, reference);
    if (!c) return {};
    return {*c->task};
}

labels::LabeledPlan GroundTruthLabeler::label(const pddl::Plan& plan) const {
    std::vector<pddl::State> states{task_->initial};
    for (int a : plan.actions) states.push_back(pddl::apply(*task_, states.back(), a));

    std::vector<int> dist;
    std::vector<Snapshot> snap;
    for (const auto& s : states) {
        dist.push_back(oracle_.distance(s));
        snap.push_back(snapshot(s));
    }

    labels::LabeledPlan lp;
    lp.plan = plan;
    lp.labels.push_back({{labels::kStartLabel}, anticipated_after(snap[0], snap[0].rover)});

    for (std::size_t i = 1; i < states.size(); ++i) {
        labels::ActionLabel out;
        if (dist[i] >= dist[i - 1]) {  // no progress toward the public goal
            lp.labels.push_back(out);
            continue;
        }
        const auto& action = task_->actions[static_cast<std::size_t>(plan.actions[i - 1])];
        const std::string* current = nullptr;
        Snapshot after = snap[i];
        Cell reference = snap[i].rover;
        if (action.schema == "load") {
            current = &kCollect;
        } else if (action.schema == "unload") {
            current = &kStore;
        } else if (action.schema == "observe") {
            current = &kObserve;
        } else {  // navigate: attribute via the unique closest target it approached
            const auto cands = candidates(snap[i]);
            const Candidate* c = unique_closest(cands, snap[i].rover);
            if (c && manhattan(snap[i].rover, c->cell) < manhattan(snap[i - 1].rover, c->cell)) {
                current = c->task;
                reference = c->cell;
                after.rover = c->cell;
                if (c->task == &kCollect) {
                    after.carried = c->entity;
                    after.resource_here[static_cast<std::size_t>(c->entity)] = 0;
                } else if (c->task == &kStore) {
                    after.carried = -1;
                    after.storage_empty[static_cast<std::size_t>(c->entity)] = 0;
                } else {
                    after.ob_pending[static_cast<std::size_t>(c->entity)] = 0;
                }
            }
        }
        if (current) {
            out.current = {*current};
            out.next = anticipated_after(after, reference);
        }
        lp.labels.push_back(out);
    }
    return lp;
}

// ---------------------------------------------------------------- datasets

std::vector<labels::PlanRecord> gen_dataset(const RoverConfig& cfg, int n, std::uint64_t seed,
                                            const std::string& split) {
    if (n < 1) throw std::invalid_argument("dataset size must be at least 1");
    std::vector<labels::PlanRecord> records;
    records.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        std::string id = "rover-s" + std::to_string(seed) + "-i" + std::to_string(k);
        try {
            GeneratedInstance inst = gen_problem(cfg, mix_seed(seed, static_cast<std::uint64_t>(k)));
            pddl::Plan plan = search::ehc_plan(inst.full_task, {});
            GroundTruthLabeler labeler(inst.problem, inst.public_task);
            labels::LabeledPlan lp = labeler.label(plan);

            labels::PlanRecord rec;
            rec.problem_id = id;
            for (int a : plan.actions) rec.plan.push_back(inst.full_task.actions[static_cast<std::size_t>(a)].name);
            rec.labels = lp.labels;
            rec.features = features::extract_plan_features(inst.full_task, plan);
            rec.split = split;
            records.push_back(std::move(rec));
        } catch (const std::exception& e) {
            throw std::runtime_error(id + ": " + e.what());
        }
    }
    return records;
}

void write_dataset(const std::string& dir, const std::vector<labels::PlanRecord>& records,
                   const RoverConfig& cfg, std::uint64_t seed) {
    std::ofstream data(dir + "/dataset.jsonl", std::ios::binary);
    if (!data) throw std::runtime_error("cannot write " + dir + "/dataset.jsonl");
    data << labels::write_jsonl(records);
    if (!data) throw std::runtime_error("failed writing " + dir + "/dataset.jsonl");

    nlohmann::ordered_json m;
    m["domain"] = "rover";
    m["width"] = cfg.width;
    m["height"] = cfg.height;
    m["resources"] = {cfg.min_resources, cfg.max_resources};
    m["storages"] = {cfg.min_storages, cfg.max_storages};
    m["observations"] = {cfg.min_observations, cfg.max_observations};
    m["max_hidden"] = cfg.max_hidden;
    m["count"] = records.size();
    m["seed"] = seed;
    std::ofstream manifest(dir + "/manifest.json", std::ios::binary);
    if (!manifest) throw std::runtime_error("cannot write " + dir + "/manifest.json");
    manifest << m.dump(2) << '\n';
}

}  // namespace xplan::rover
