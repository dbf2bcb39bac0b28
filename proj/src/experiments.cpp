#include "xplan/experiments.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "xplan/expd.hpp"
#include "xplan/labels.hpp"
#include "xplan/rover.hpp"
#include "xplan/search.hpp"
#include "xplan/stats.hpp"

namespace xplan::experiments {

namespace {

using json = nlohmann::json;

std::string f6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

void set_key(ExperimentConfig& cfg, const std::string& key, const json& value) {
    try {
        if (key == "experiment") cfg.experiment = value.get<std::string>();
        else if (key == "train_size") cfg.train_size = value.get<int>();
        else if (key == "test_size") cfg.test_size = value.get<int>();
        else if (key == "goals_per_level") cfg.goals_per_level = value.get<int>();
        else if (key == "candidates_per_goal") cfg.candidates_per_goal = value.get<int>();
        else if (key == "trials") cfg.trials = value.get<int>();
        else if (key == "problems_per_trial") cfg.problems_per_trial = value.get<int>();
        else if (key == "level_min") cfg.level_min = value.get<int>();
        else if (key == "level_max") cfg.level_max = value.get<int>();
        else if (key == "w_theta") cfg.w_theta = value.get<double>();
        else if (key == "w_beta") cfg.w_beta = value.get<double>();
        else if (key == "l2") cfg.l2 = value.get<double>();
        else if (key == "max_iters") cfg.max_iters = value.get<int>();
        else if (key == "tol") cfg.tol = value.get<double>();
        else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
        else if (key == "full_scale")
            cfg.full_scale = value.is_boolean() ? value.get<bool>() : value.get<int>() != 0;
        else if (key == "grid") cfg.grid = value.get<int>();
        else if (key == "out_dir") cfg.out_dir = value.get<std::string>();
        else throw std::invalid_argument("unknown config key: " + key);
    } catch (const json::exception&) {
        throw std::invalid_argument("bad value for config key: " + key);
    }
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    const std::string body = trim(text);
    if (!body.empty() && body.front() == '{') {
        json j;
        try {
            j = json::parse(body);
        } catch (const json::exception& e) {
            throw std::invalid_argument(std::string("malformed config JSON: ") + e.what());
        }
        if (!j.is_object()) throw std::invalid_argument("config JSON must be an object");
        for (const auto& [key, value] : j.items()) set_key(cfg, key, value);
        return cfg;
    }
    std::istringstream in(body);
    std::string line;
    while (std::getline(in, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("malformed config line: " + line);
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        json parsed;
        try {
            parsed = json::parse(value);
            if (!parsed.is_primitive() || parsed.is_null()) parsed = value;
        } catch (const json::exception&) {
            parsed = value;  // bare words are strings
        }
        set_key(cfg, key, parsed);
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

void validate(const ExperimentConfig& cfg) {
    auto need = [](bool ok, const char* what) {
        if (!ok) throw std::invalid_argument(what);
    };
    if (!cfg.experiment.empty())
        need(cfg.experiment == "prediction" || cfg.experiment == "selection" ||
                 cfg.experiment == "synthesis",
             "experiment must be prediction, selection, or synthesis");
    need(cfg.train_size >= 1, "train_size must be at least 1");
    need(cfg.test_size >= 1, "test_size must be at least 1");
    need(cfg.goals_per_level >= 1, "goals_per_level must be at least 1");
    need(cfg.candidates_per_goal >= 1, "candidates_per_goal must be at least 1");
    need(cfg.trials >= 1, "trials must be at least 1");
    need(cfg.problems_per_trial >= 1, "problems_per_trial must be at least 1");
    need(cfg.level_min >= 0 && cfg.level_max <= 10 && cfg.level_min <= cfg.level_max,
         "hidden-goal levels must satisfy 0 <= level_min <= level_max <= 10");
    need(std::isfinite(cfg.w_theta) && cfg.w_theta >= 0.0, "w_theta must be finite and nonnegative");
    need(std::isfinite(cfg.w_beta) && cfg.w_beta >= 0.0, "w_beta must be finite and nonnegative");
    need(std::isfinite(cfg.l2) && cfg.l2 >= 0.0, "l2 must be finite and nonnegative");
    need(cfg.max_iters >= 1, "max_iters must be at least 1");
    need(std::isfinite(cfg.tol) && cfg.tol > 0.0, "tol must be positive");
    need(cfg.grid >= 2, "grid must be at least 2");
}

ExperimentConfig apply_full_scale(const ExperimentConfig& cfg) {
    ExperimentConfig out = cfg;
    if (!cfg.full_scale) return out;
    if (cfg.experiment == "selection") {
        out.train_size = 1900;
        out.goals_per_level = 50;
        out.candidates_per_goal = 20;
    } else {
        out.train_size = 1000;
        out.test_size = 100;
        out.problems_per_trial = 100;
    }
    return out;
}

namespace {

rover::RoverConfig rover_config(const ExperimentConfig& cfg, int max_hidden) {
    rover::RoverConfig rc;
    rc.width = cfg.grid;
    rc.height = cfg.grid;
    rc.max_hidden = max_hidden;
    return rc;
}

ExperimentConfig scaled_for(const ExperimentConfig& raw, const char* experiment) {
    ExperimentConfig cfg = raw;
    cfg.experiment = experiment;
    cfg = apply_full_scale(cfg);
    validate(cfg);
    return cfg;
}

// Training always samples plans with at most 3 hidden goals.
crf::CRFModel train_model(const ExperimentConfig& cfg) {
    auto records =
        rover::gen_dataset(rover_config(cfg, 3), cfg.train_size, rover::mix_seed(cfg.seed, 1), "train");
    crf::TrainConfig tc;
    tc.l2 = cfg.l2;
    tc.max_iters = cfg.max_iters;
    tc.tol = cfg.tol;
    tc.seed = cfg.seed;
    return crf::train(crf::dataset_from_records(records), tc);
}

labels::LabeledPlan record_truth(const labels::PlanRecord& r) {
    labels::LabeledPlan lp;
    lp.plan.actions.assign(r.plan.size(), 0);
    lp.labels = r.labels;
    return lp;
}

labels::LabeledPlan decode_record(const crf::CRFModel& model, const labels::PlanRecord& r) {
    labels::LabeledPlan lp;
    lp.plan.actions.assign(r.plan.size(), 0);
    auto decoded = crf::viterbi(model, r.features);
    lp.labels.reserve(decoded.size());
    for (const auto& c : decoded) lp.labels.push_back(crf::to_action_label(c));
    return lp;
}

double mean_steps(const std::vector<std::array<SynthesisOutcome, 4>>& rows, std::size_t planner) {
    double sum = 0.0;
    for (const auto& row : rows) sum += static_cast<double>(row[planner].steps);
    return sum / static_cast<double>(rows.size());
}

}  // namespace

PredictionResult run_prediction(const ExperimentConfig& raw) {
    ExperimentConfig cfg = scaled_for(raw, "prediction");
    crf::CRFModel model = train_model(cfg);
    PredictionResult out;
    for (int level = cfg.level_min; level <= cfg.level_max; ++level) {
        auto records = rover::gen_dataset(rover_config(cfg, level), cfg.test_size,
                                          rover::mix_seed(cfg.seed, 100 + static_cast<std::uint64_t>(level)),
                                          "test");
        if (records.empty()) throw std::runtime_error("empty test split");
        std::vector<double> gt_theta, gt_beta, hat_theta, hat_beta;
        for (const auto& r : records) {
            auto gm = labels::measures(record_truth(r));
            auto pm = labels::measures(decode_record(model, r));
            gt_theta.push_back(gm.theta);
            gt_beta.push_back(gm.beta);
            hat_theta.push_back(pm.theta);
            hat_beta.push_back(pm.beta);
        }
        const double mt = stats::mean(gt_theta);
        const double mb = stats::mean(gt_beta);
        if (mt == 0.0 || mb == 0.0)
            throw std::runtime_error("degenerate test level: zero mean ground-truth measure");
        PredictionRow row;
        row.level = level;
        row.theta_ratio = stats::mean(hat_theta) / mt;
        row.beta_ratio = stats::mean(hat_beta) / mb;
        row.n = records.size();
        out.rows.push_back(row);
    }
    return out;
}

std::string prediction_csv(const PredictionResult& result) {
    std::string csv = "level,theta_ratio,beta_ratio,n\n";
    for (const auto& r : result.rows) {
        csv += std::to_string(r.level) + ',' + f6(r.theta_ratio) + ',' + f6(r.beta_ratio) + ',' +
               std::to_string(r.n) + '\n';
    }
    return csv;
}

SelectionResult run_selection(const ExperimentConfig& raw) {
    ExperimentConfig cfg = scaled_for(raw, "selection");
    crf::CRFModel model = train_model(cfg);
    SelectionResult out;
    for (int level = cfg.level_min; level <= cfg.level_max; ++level) {
        SelectionLevelResult lr;
        lr.level = level;
        for (int g = 0; g < cfg.goals_per_level; ++g) {
            const std::uint64_t goal_seed = rover::mix_seed(
                rover::mix_seed(cfg.seed, 200 + static_cast<std::uint64_t>(level)),
                static_cast<std::uint64_t>(g));
            auto base = rover::gen_problem(rover_config(cfg, level), goal_seed);
            rover::GroundTruthLabeler labeler(base.problem, base.public_task);
            std::mt19937_64 rng(rover::mix_seed(goal_seed, 777));
            std::vector<pddl::Plan> plans;
            std::vector<labels::MeasureReport> truth;
            for (int j = 0; j < cfg.candidates_per_goal; ++j) {
                rover::RoverProblem p = base.problem;
                p.hidden = rover::sample_hidden_cells(base.problem, level, rng);
                auto inst = rover::make_instance(p);
                auto plan = search::ehc_plan(inst.full_task);
                truth.push_back(labels::measures(labeler.label(plan)));
                plans.push_back(std::move(plan));
            }
            auto it = expd::select_plan_index(model, base.public_task, plans, expd::Criterion::kTheta);
            auto ib = expd::select_plan_index(model, base.public_task, plans, expd::Criterion::kBeta);
            auto ir = expd::rand_select_index(plans.size(), rover::mix_seed(goal_seed, 999));
            lr.expd_theta.push_back(truth[it].theta);
            lr.expd_beta.push_back(truth[ib].beta);
            lr.rand_theta.push_back(truth[ir].theta);
            lr.rand_beta.push_back(truth[ir].beta);
        }
        lr.p_theta = stats::paired_t_pvalue(lr.expd_theta, lr.rand_theta);
        lr.p_beta = stats::paired_t_pvalue(lr.expd_beta, lr.rand_beta);
        out.levels.push_back(std::move(lr));
    }
    return out;
}

std::string selection_csv(const SelectionResult& result) {
    std::string csv = "level,method,mean_theta,mean_beta,p_theta,p_beta,goals\n";
    for (const auto& l : result.levels) {
        const std::string tail =
            ',' + f6(l.p_theta) + ',' + f6(l.p_beta) + ',' + std::to_string(l.expd_theta.size()) + '\n';
        csv += std::to_string(l.level) + ",expd-select," + f6(stats::mean(l.expd_theta)) + ',' +
               f6(stats::mean(l.expd_beta)) + tail;
        csv += std::to_string(l.level) + ",rand-select," + f6(stats::mean(l.rand_theta)) + ',' +
               f6(stats::mean(l.rand_beta)) + tail;
    }
    return csv;
}

SynthesisResult run_synthesis(const ExperimentConfig& raw) {
    ExperimentConfig cfg = scaled_for(raw, "synthesis");
    crf::CRFModel model = train_model(cfg);
    const std::array<expd::ExpdWeights, 4> weights = {{
        {0.0, 0.0},                  // placeholder; FF runs through ehc_plan
        {cfg.w_theta, 0.0},          // θ only
        {0.0, cfg.w_beta},           // β only
        {cfg.w_theta, cfg.w_beta},   // both
    }};
    SynthesisResult out;
    for (int t = 0; t < cfg.trials; ++t) {
        SynthesisTrialResult tr;
        tr.trial = t;
        tr.generated = static_cast<std::size_t>(cfg.problems_per_trial);
        for (int i = 0; i < cfg.problems_per_trial; ++i) {
            const std::uint64_t seed_i = rover::mix_seed(
                rover::mix_seed(cfg.seed, 300 + static_cast<std::uint64_t>(t)),
                static_cast<std::uint64_t>(i));
            rover::GeneratedInstance inst;
            pddl::Plan ff;
            try {
                inst = rover::gen_problem(rover_config(cfg, 6), seed_i);
                ff = search::ehc_plan(inst.full_task);
            } catch (const std::runtime_error&) {
                ++tr.excluded;
                continue;
            }
            expd::MeasurePredictor predictor(model, inst.full_task);
            auto ff_pred = predictor.predict(ff, {});
            if (!(ff_pred.theta_hat < 0.85)) continue;  // only low-explicability problems compared

            std::array<pddl::Plan, 4> plans;
            plans[0] = std::move(ff);
            bool failed = false;
            for (std::size_t m = 1; m < plans.size(); ++m) {
                try {
                    plans[m] = expd::ffexpd_plan(inst.full_task, model, weights[m]);
                } catch (const std::runtime_error&) {
                    failed = true;
                    break;
                }
            }
            if (failed) {  // keep rows paired across all planners
                ++tr.excluded;
                continue;
            }
            rover::GroundTruthLabeler labeler(inst.problem, inst.public_task);
            std::array<SynthesisOutcome, 4> row;
            for (std::size_t m = 0; m < plans.size(); ++m) {
                auto gm = labels::measures(labeler.label(plans[m]));
                auto pm = m == 0 ? ff_pred : predictor.predict(plans[m], {});
                row[m].theta = gm.theta;
                row[m].beta = gm.beta;
                row[m].theta_hat = pm.theta_hat;
                row[m].beta_hat = pm.beta_hat;
                row[m].steps = plans[m].size();
            }
            tr.problems.push_back(row);
        }
        out.trials.push_back(std::move(tr));
    }
    return out;
}

std::string synthesis_csv(const SynthesisResult& result) {
    std::string csv = "trial,planner,mean_theta,mean_beta,mean_steps,mean_theta_hat,mean_beta_hat,problems,excluded\n";
    for (const auto& tr : result.trials) {
        for (std::size_t m = 0; m < kPlannerNames.size(); ++m) {
            double mt = 0.0, mb = 0.0, mth = 0.0, mbh = 0.0, ms = 0.0;
            if (!tr.problems.empty()) {
                std::vector<double> t, b, th, bh;
                for (const auto& row : tr.problems) {
                    t.push_back(row[m].theta);
                    b.push_back(row[m].beta);
                    th.push_back(row[m].theta_hat);
                    bh.push_back(row[m].beta_hat);
                }
                mt = stats::mean(t);
                mb = stats::mean(b);
                mth = stats::mean(th);
                mbh = stats::mean(bh);
                ms = mean_steps(tr.problems, m);
            }
            csv += std::to_string(tr.trial) + ',' + kPlannerNames[m] + ',' + f6(mt) + ',' + f6(mb) +
                   ',' + f6(ms) + ',' + f6(mth) + ',' + f6(mbh) + ',' +
                   std::to_string(tr.problems.size()) + ',' + std::to_string(tr.excluded) + '\n';
        }
    }
    return csv;
}

std::pair<std::string, std::string> run_experiment(const ExperimentConfig& cfg) {
    if (cfg.experiment == "prediction")
        return {"prediction.csv", prediction_csv(run_prediction(cfg))};
    if (cfg.experiment == "selection") return {"selection.csv", selection_csv(run_selection(cfg))};
    if (cfg.experiment == "synthesis")
        return {"synthesis.csv", synthesis_csv(run_synthesis(cfg))};
    throw std::invalid_argument("unknown experiment: " + cfg.experiment);
}

}  // namespace xplan::experiments
