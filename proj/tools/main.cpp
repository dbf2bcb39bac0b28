#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "xplan/expd.hpp"
#include "xplan/experiments.hpp"
#include "xplan/features.hpp"
#include "xplan/labels.hpp"
#include "xplan/pddl.hpp"
#include "xplan/rover.hpp"
#include "xplan/search.hpp"

namespace fs = std::filesystem;
using namespace xplan;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << content;
    if (!out) throw std::runtime_error("failed writing file: " + path);
}

pddl::GroundTask load_task(const std::string& domain_path, const std::string& problem_path) {
    auto domain = pddl::parse_domain(read_file(domain_path));
    auto problem = pddl::parse_problem(read_file(problem_path));
    return pddl::ground(domain, problem);
}

std::string label_or_dash(const labels::TaskSet& s) {
    if (s.empty()) return "-";
    std::string out;
    for (const auto& t : s) {
        if (!out.empty()) out += ',';
        out += t;
    }
    return out;
}

void cmd_parse(const std::string& domain_path, const std::string& problem_path) {
    auto domain = pddl::parse_domain(read_file(domain_path));
    auto problem = pddl::parse_problem(read_file(problem_path));
    auto task = pddl::ground(domain, problem);
    std::cout << "domain: " << domain.name << " (" << domain.predicates.size() << " predicates, "
              << domain.schemas.size() << " schemas)\n"
              << "problem: " << problem.name << " (" << problem.objects.size() << " objects)\n"
              << "grounded: " << task.fluents.size() << " fluents, " << task.actions.size()
              << " actions, " << task.goal.size() << " goal fluents\n";
}

void cmd_plan(const std::string& domain_path, const std::string& problem_path,
              const std::string& planner, const std::string& model_path, double w_theta,
              double w_beta, std::uint64_t seed) {
    auto task = load_task(domain_path, problem_path);
    search::SearchConfig cfg;
    cfg.seed = seed;
    pddl::Plan plan;
    if (planner == "ff") {
        plan = search::ehc_plan(task, cfg);
    } else if (planner == "opt") {
        auto found = search::optimal_plan(task);
        if (!found) throw std::runtime_error("no plan exists");
        plan = *found;
    } else if (planner == "ffexpd") {
        if (model_path.empty()) throw std::runtime_error("ffexpd requires --model");
        auto model = crf::load_model(model_path);
        plan = expd::ffexpd_plan(task, model, {w_theta, w_beta}, cfg);
    } else {
        throw std::runtime_error("unknown planner: " + planner);
    }
    auto report = pddl::validate_plan(task, plan);
    std::cout << pddl::to_plan_text(task, plan);
    std::cerr << "steps=" << plan.size() << " cost=" << report.total_cost << "\n";
}

void cmd_train(const std::string& data_path, double l2, int max_iters, double tol,
               const std::string& out_path) {
    auto records = labels::read_jsonl(read_file(data_path));
    auto dataset = crf::dataset_from_records(records);
    crf::TrainConfig cfg;
    cfg.l2 = l2;
    cfg.max_iters = max_iters;
    cfg.tol = tol;
    auto model = crf::train(dataset, cfg);
    crf::save_model(model, out_path);
    std::cerr << "trained on " << dataset.size() << " plans: " << model.num_labels() << " labels, "
              << model.num_features() << " features, " << model.iterations
              << " iterations, objective " << model.objective << "\n";
}

void cmd_label(const std::string& domain_path, const std::string& problem_path,
               const std::string& model_path, const std::string& plan_path) {
    auto task = load_task(domain_path, problem_path);
    auto model = crf::load_model(model_path);
    auto plan = pddl::parse_plan_text(task, read_file(plan_path));
    auto features = features::extract_plan_features(task, plan);
    auto decoded = crf::viterbi(model, features);
    for (std::size_t i = 0; i < decoded.size(); ++i) {
        auto l = crf::to_action_label(decoded[i]);
        std::cout << 'a' << i << ' '
                  << (i == 0 ? std::string("-")
                             : '(' + task.actions[static_cast<std::size_t>(plan.actions[i - 1])].name + ')')
                  << " cur=" << label_or_dash(l.current) << " next=" << label_or_dash(l.next)
                  << "\n";
    }
}

void cmd_score(const std::string& labeled_path) {
    auto records = labels::read_jsonl(read_file(labeled_path));
    if (records.empty()) throw std::runtime_error("no records in " + labeled_path);
    std::cout << "problem_id,theta,beta\n";
    double sum_theta = 0.0, sum_beta = 0.0;
    char buf[64];
    for (const auto& r : records) {
        labels::LabeledPlan lp;
        lp.plan.actions.assign(r.plan.size(), 0);
        lp.labels = r.labels;
        auto m = labels::measures(lp);
        sum_theta += m.theta;
        sum_beta += m.beta;
        std::snprintf(buf, sizeof buf, "%.6f,%.6f", m.theta, m.beta);
        std::cout << r.problem_id << ',' << buf << "\n";
    }
    const auto n = static_cast<double>(records.size());
    std::snprintf(buf, sizeof buf, "%.6f,%.6f", sum_theta / n, sum_beta / n);
    std::cout << "mean," << buf << "\n";
}

void cmd_gen_rover(int n, int max_hidden, int grid, std::uint64_t seed, const std::string& out_dir,
                   const std::string& split) {
    rover::RoverConfig cfg;
    cfg.width = grid;
    cfg.height = grid;
    cfg.max_hidden = max_hidden;
    auto records = rover::gen_dataset(cfg, n, seed, split);
    fs::create_directories(out_dir);
    rover::write_dataset(out_dir, records, cfg, seed);
    std::cerr << "wrote " << records.size() << " records to " << out_dir << "\n";
}

void cmd_select(const std::string& dir, const std::string& criterion, const std::string& model_path) {
    auto manifest = nlohmann::json::parse(read_file((fs::path(dir) / "manifest.json").string()));
    const auto base = fs::path(dir);
    auto task = load_task((base / manifest.at("domain").get<std::string>()).string(),
                          (base / manifest.at("problem").get<std::string>()).string());
    std::vector<std::string> plan_files = manifest.at("plans").get<std::vector<std::string>>();
    if (plan_files.empty()) throw std::runtime_error("manifest lists no plans");
    std::vector<pddl::Plan> plans;
    for (const auto& f : plan_files)
        plans.push_back(pddl::parse_plan_text(task, read_file((base / f).string())));
    auto model = crf::load_model(model_path);
    auto which = criterion == "theta" ? expd::Criterion::kTheta : expd::Criterion::kBeta;
    auto idx = expd::select_plan_index(model, task, plans, which);
    std::cout << idx << ' ' << plan_files[idx] << "\n" << pddl::to_plan_text(task, plans[idx]);
}

void cmd_experiment(const std::string& config_path, const std::string& out_dir) {
    auto cfg = experiments::load_config(config_path);
    if (cfg.experiment.empty())
        throw std::runtime_error("config must set experiment=prediction|selection|synthesis");
    cfg.out_dir = out_dir;
    experiments::validate(cfg);
    auto [name, csv] = experiments::run_experiment(cfg);
    fs::create_directories(out_dir);
    const auto path = (fs::path(out_dir) / name).string();
    write_file(path, csv);
    std::cout << path << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"plan explicability toolkit"};
    app.require_subcommand(1);

    std::string domain_path, problem_path, model_path, plan_path, data_path, out_path;
    std::string planner = "ff", criterion, split = "train", config_path, labeled_path, dir_path;
    double w_theta = 2.0, w_beta = 2.0, l2 = 1.0, tol = 1e-6;
    int max_iters = 500, n = 10, max_hidden = 3, grid = 4;
    std::uint64_t seed = 7;

    auto* parse = app.add_subcommand("parse", "parse and ground a domain/problem pair");
    parse->add_option("domain", domain_path)->required();
    parse->add_option("problem", problem_path)->required();
    parse->callback([&] { cmd_parse(domain_path, problem_path); });

    auto* plan = app.add_subcommand("plan", "find a plan");
    plan->add_option("domain", domain_path)->required();
    plan->add_option("problem", problem_path)->required();
    plan->add_option("--planner", planner)->check(CLI::IsMember({"ff", "opt", "ffexpd"}));
    plan->add_option("--model", model_path);
    plan->add_option("--w-theta", w_theta);
    plan->add_option("--w-beta", w_beta);
    plan->add_option("--seed", seed);
    plan->callback(
        [&] { cmd_plan(domain_path, problem_path, planner, model_path, w_theta, w_beta, seed); });

    auto* train = app.add_subcommand("train", "train a labeling model from a JSONL dataset");
    train->add_option("--data", data_path)->required();
    train->add_option("--l2", l2);
    train->add_option("--max-iters", max_iters);
    train->add_option("--tol", tol);
    train->add_option("--out", out_path)->required();
    train->callback([&] { cmd_train(data_path, l2, max_iters, tol, out_path); });

    auto* label = app.add_subcommand("label", "decode labels for a plan");
    label->add_option("domain", domain_path)->required();
    label->add_option("problem", problem_path)->required();
    label->add_option("--model", model_path)->required();
    label->add_option("--plan", plan_path)->required();
    label->callback([&] { cmd_label(domain_path, problem_path, model_path, plan_path); });

    auto* score = app.add_subcommand("score", "explicability/predictability of labeled plans");
    score->add_option("--labeled", labeled_path)->required();
    score->callback([&] { cmd_score(labeled_path); });

    auto* gen = app.add_subcommand("gen-rover", "generate a labeled rover dataset");
    gen->add_option("--n", n);
    gen->add_option("--max-hidden", max_hidden);
    gen->add_option("--grid", grid);
    gen->add_option("--seed", seed);
    gen->add_option("--out", out_path)->required();
    gen->add_option("--split", split);
    gen->callback([&] { cmd_gen_rover(n, max_hidden, grid, seed, out_path, split); });

    auto* select = app.add_subcommand("select", "pick the best plan from a candidate set");
    select->add_option("--candidates", dir_path)->required();
    select->add_option("--criterion", criterion)->required()->check(CLI::IsMember({"theta", "beta"}));
    select->add_option("--model", model_path)->required();
    select->callback([&] { cmd_select(dir_path, criterion, model_path); });

    auto* exp = app.add_subcommand("experiment", "run an experiment pipeline to CSV");
    exp->add_option("--config", config_path)->required();
    exp->add_option("--out", out_path)->required();
    exp->callback([&] { cmd_experiment(config_path, out_path); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
