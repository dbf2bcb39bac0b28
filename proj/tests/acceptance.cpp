// End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
// the exit code is the number of failures. Thresholds are fixed here, not
// configurable, so a green run certifies the build.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "xplan/crf.hpp"
#include "xplan/expd.hpp"
#include "xplan/experiments.hpp"
#include "xplan/labels.hpp"
#include "xplan/pddl.hpp"
#include "xplan/rover.hpp"
#include "xplan/search.hpp"
#include "xplan/stats.hpp"

using namespace xplan;

namespace {

int failures = 0;

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::runtime_error(msg);
}

template <typename Fn>
void criterion(int num, const char* label, Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::string detail;
    try {
        detail = fn();
    } catch (const std::exception& e) {
        ok = false;
        detail = e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %d %s (%.1fs)%s%s\n", ok ? "PASS" : "FAIL", num, label, secs,
                detail.empty() ? "" : " — ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

// ---------------------------------------------------------------- CRF helpers

const std::vector<crf::CompositeLabel> kLabelPool = {
    {"", ""}, {"START", "a"}, {"a", ""}, {"a", "a"}, {"a", "b"}, {"b", ""},
};

crf::CRFModel random_model(std::mt19937_64& rng, int num_labels, int num_features) {
    crf::CRFModel m;
    m.labels = crf::LabelAlphabet(
        std::vector<crf::CompositeLabel>(kLabelPool.begin(), kLabelPool.begin() + num_labels));
    std::vector<std::string> fs;
    for (int f = 0; f < num_features; ++f) fs.push_back("f" + std::to_string(f));
    m.features = crf::FeatureAlphabet(std::move(fs));
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    m.w.resize(static_cast<Eigen::Index>(m.weight_count()));
    for (Eigen::Index i = 0; i < m.w.size(); ++i) m.w[i] = u(rng);
    return m;
}

crf::ObservationSequence random_obs(std::mt19937_64& rng, int len, int num_features) {
    std::bernoulli_distribution on(0.5);
    crf::ObservationSequence x(static_cast<std::size_t>(len));
    for (auto& pos : x)
        for (int f = 0; f < num_features; ++f)
            if (on(rng)) pos.push_back("f" + std::to_string(f));
    return x;
}

crf::Dataset gradient_dataset() {
    crf::Dataset d;
    d.push_back({{{"begin"}, {"mid"}, {"end"}},
                 {{"START", "a"}, {"a", "a"}, {"a", ""}}});
    d.push_back({{{"begin"}, {"end"}}, {{"START", "a"}, {"a", ""}}});
    d.push_back({{{"begin"}, {"mid", "end"}, {"mid"}, {"end"}},
                 {{"START", "a"}, {"a", "a"}, {"a", "b"}, {"b", ""}}});
    return d;
}

// ------------------------------------------------------------- rover helpers

rover::RoverConfig small_grid() {
    rover::RoverConfig cfg;
    cfg.width = 3;
    cfg.height = 3;
    cfg.max_resources = 1;
    cfg.max_storages = 1;
    cfg.max_observations = 1;
    cfg.max_hidden = 1;
    return cfg;
}

crf::CRFModel train_small_model() {
    rover::RoverConfig cfg;  // default 4x4, hidden <= 3
    auto records = rover::gen_dataset(cfg, 30, rover::mix_seed(4040, 1), "train");
    crf::TrainConfig tc;
    tc.max_iters = 200;
    return crf::train(crf::dataset_from_records(records), tc);
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof buf, pattern, a, b, c);
    return buf;
}

// ----------------------------------------------------------------- criteria

std::string crf_oracle_equivalence() {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> nl(2, 5), nf(1, 4), len(1, 4);
    for (int trial = 0; trial < 100; ++trial) {
        auto m = random_model(rng, nl(rng), nf(rng));
        auto x = random_obs(rng, len(rng), m.num_features());

        const double lz = crf::log_partition(m, x);
        require(std::abs(lz - oracles::brute_log_partition(m, x)) <= 1e-9,
                "log partition diverges from enumeration");

        auto mg = crf::marginals(m, x);
        auto bm = oracles::brute_marginals(m, x);
        require(std::abs(mg.log_z - bm.log_z) <= 1e-9, "marginal log Z diverges");
        require((mg.unary - bm.unary).cwiseAbs().maxCoeff() <= 1e-9, "unary marginals diverge");
        for (std::size_t t = 0; t < mg.pairwise.size(); ++t)
            require((mg.pairwise[t] - bm.pairwise[t]).cwiseAbs().maxCoeff() <= 1e-9,
                    "pairwise marginals diverge");

        auto decoded = crf::viterbi(m, x);
        auto brute = oracles::brute_viterbi(m, x);
        require(decoded.size() == brute.size(), "viterbi length mismatch");
        for (std::size_t t = 0; t < brute.size(); ++t)
            require(decoded[t] == m.labels.label(brute[t]), "viterbi decode mismatch");
    }

    auto data = gradient_dataset();
    auto [la, fa] = crf::build_alphabets(data);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int point = 0; point < 10; ++point) {
        crf::CRFModel m;
        m.labels = la;
        m.features = fa;
        m.l2 = 0.5;
        m.w.resize(static_cast<Eigen::Index>(m.weight_count()));
        for (Eigen::Index i = 0; i < m.w.size(); ++i) m.w[i] = u(rng);
        const Eigen::VectorXd g = crf::objective_gradient(m, data);
        const double h = 1e-5;
        for (Eigen::Index i = 0; i < m.w.size(); ++i) {
            crf::CRFModel plus = m, minus = m;
            plus.w[i] += h;
            minus.w[i] -= h;
            const double fd =
                (crf::objective_value(plus, data) - crf::objective_value(minus, data)) / (2 * h);
            require(std::abs(g[i] - fd) <= 1e-5 * std::max(1.0, std::abs(fd)),
                    "gradient diverges from finite differences");
        }
    }
    return "100 models, 10 gradient points";
}

std::string measure_equivalence() {
    std::mt19937_64 rng(77);
    const std::vector<std::string> tasks = {"C", "S", "O"};
    std::uniform_int_distribution<int> len(1, 10);
    std::uniform_int_distribution<int> pick(0, 2);
    std::uniform_int_distribution<int> coin(0, 1);
    for (int trial = 0; trial < 1000; ++trial) {
        labels::LabeledPlan lp;
        const int n = len(rng);
        for (int i = 0; i <= n; ++i) {
            labels::ActionLabel l;
            if (i == 0 && coin(rng)) l.current.insert("START");
            else if (coin(rng)) l.current.insert(tasks[static_cast<std::size_t>(pick(rng))]);
            if (coin(rng)) l.next.insert(tasks[static_cast<std::size_t>(pick(rng))]);
            lp.labels.push_back(std::move(l));
        }
        lp.plan.actions.assign(static_cast<std::size_t>(n), 0);
        require(labels::explicability(lp) == oracles::naive_theta(lp.labels),
                "explicability diverges from the naive formula");
        require(labels::predictability(lp) == oracles::naive_beta(lp.labels),
                "predictability diverges from the naive formula");
    }

    // the worked example: four real actions, exactly one of them unexplained
    labels::LabeledPlan example;
    example.plan.actions.assign(4, 0);
    example.labels = {{{"START"}, {"C"}}, {{"C"}, {"S"}}, {{"C"}, {"S"}},
                      {{"O"}, {"S"}},     {{}, {}}};
    require(labels::explicability(example) == 0.75, "worked example does not score 0.75");
    return "1000 sequences";
}

std::string prediction_ratios() {
    experiments::ExperimentConfig cfg;
    cfg.experiment = "prediction";
    cfg.train_size = 200;
    cfg.test_size = 20;
    cfg.level_min = 1;
    cfg.level_max = 6;
    auto result = experiments::run_prediction(cfg);
    require(result.rows.size() == 6, "expected one row per level");
    std::ostringstream detail;
    for (const auto& row : result.rows) {
        require(row.n > 0, "empty test level");
        require(row.theta_ratio >= 0.4 && row.theta_ratio <= 1.6,
                fmt("level theta ratio %.3f outside [0.4, 1.6]", row.theta_ratio));
        require(row.beta_ratio >= 0.4 && row.beta_ratio <= 1.6,
                fmt("level beta ratio %.3f outside [0.4, 1.6]", row.beta_ratio));
        detail << (row.level > 1 ? " " : "") << row.level << ":"
               << fmt("%.2f/%.2f", row.theta_ratio, row.beta_ratio);
    }
    return "theta/beta ratios " + detail.str();
}

std::string selection_significance() {
    experiments::ExperimentConfig cfg;
    cfg.experiment = "selection";
    cfg.goals_per_level = 20;
    cfg.candidates_per_goal = 10;
    cfg.level_min = 1;
    cfg.level_max = 6;
    auto result = experiments::run_selection(cfg);
    require(result.levels.size() == 6, "expected one result per level");
    std::ostringstream detail;
    for (const auto& lvl : result.levels) {
        if (lvl.level < 3) continue;
        const double expd = stats::mean(lvl.expd_theta);
        const double rnd = stats::mean(lvl.rand_theta);
        require(expd > rnd, fmt("level mean theta %.3f does not beat random %.3f", expd, rnd));
        require(lvl.p_theta < 0.05, fmt("level p-value %.4f not significant", lvl.p_theta));
        detail << " L" << lvl.level << fmt(":%.2f>%.2f", expd, rnd)
               << fmt(" p=%.1e", lvl.p_theta);
    }
    return "levels >= 3" + detail.str();
}

std::string synthesis_tradeoff() {
    experiments::ExperimentConfig cfg;
    cfg.experiment = "synthesis";
    cfg.trials = 3;
    cfg.problems_per_trial = 30;
    auto result = experiments::run_synthesis(cfg);

    std::vector<double> ff_theta, theta_theta, ff_beta, beta_beta, ff_steps, theta_steps;
    for (const auto& trial : result.trials)
        for (const auto& row : trial.problems) {
            const auto& ff = row[static_cast<std::size_t>(experiments::Planner::kFF)];
            const auto& th = row[static_cast<std::size_t>(experiments::Planner::kTheta)];
            const auto& be = row[static_cast<std::size_t>(experiments::Planner::kBeta)];
            ff_theta.push_back(ff.theta);
            theta_theta.push_back(th.theta);
            ff_beta.push_back(ff.beta);
            beta_beta.push_back(be.beta);
            ff_steps.push_back(static_cast<double>(ff.steps));
            theta_steps.push_back(static_cast<double>(th.steps));
        }
    require(ff_theta.size() >= 30,
            fmt("only %.0f problems passed the filter", static_cast<double>(ff_theta.size())));

    const double p = stats::paired_t_pvalue(theta_theta, ff_theta);
    require(stats::mean(theta_theta) > stats::mean(ff_theta),
            fmt("theta mode does not improve theta: %.3f vs %.3f", stats::mean(theta_theta),
                stats::mean(ff_theta)));
    require(p < 0.05, fmt("theta improvement not significant, p=%.4f", p));

    const double overhead = stats::mean(theta_steps) / stats::mean(ff_steps);
    require(overhead >= 1.0 && overhead <= 1.25,
            fmt("step overhead %.3f outside [1.00, 1.25]", overhead));

    require(stats::mean(beta_beta) > stats::mean(ff_beta),
            fmt("beta mode does not improve beta: %.3f vs %.3f", stats::mean(beta_beta),
                stats::mean(ff_beta)));

    return fmt("%.0f problems, ", static_cast<double>(ff_theta.size())) +
           fmt("theta %.3f>%.3f ", stats::mean(theta_theta), stats::mean(ff_theta)) +
           fmt("p=%.1e overhead=%.3f", p, overhead);
}

std::string planner_soundness() {
    auto model = train_small_model();
    rover::RoverConfig cfg;  // 4x4
    for (int i = 0; i < 500; ++i) {
        auto inst = rover::gen_problem(cfg, rover::mix_seed(555, static_cast<std::uint64_t>(i)));
        auto ff = search::ehc_plan(inst.full_task, {});
        require(pddl::validate_plan(inst.full_task, ff).valid, "hill-climbing plan invalid");
        auto expd_plan = expd::ffexpd_plan(inst.full_task, model, {2.0, 2.0});
        require(pddl::validate_plan(inst.full_task, expd_plan).valid, "measure-guided plan invalid");
    }

    auto small = small_grid();
    for (int i = 0; i < 100; ++i) {
        auto inst = rover::gen_problem(small, rover::mix_seed(556, static_cast<std::uint64_t>(i)));
        auto steps = oracles::exhaustive_min_steps(inst.full_task, 100000);
        require(steps.has_value(), "exhaustive search found no plan on a generated instance");
        require(search::optimal_plan_length(inst.full_task, inst.full_task.initial) == *steps,
                "optimal plan length diverges from breadth-first search");
    }
    return "500 validated, 100 optimal";
}

std::string degeneracy_identities() {
    auto model = train_small_model();
    rover::RoverConfig cfg;  // 4x4
    for (int i = 0; i < 100; ++i) {
        auto inst = rover::gen_problem(cfg, rover::mix_seed(557, static_cast<std::uint64_t>(i)));
        auto ff = search::ehc_plan(inst.full_task, {});
        auto zero = expd::ffexpd_plan(inst.full_task, model, {0.0, 0.0});
        require(zero.actions == ff.actions, "zero weights do not reproduce the base planner");
    }

    std::mt19937_64 rng(31);
    auto m = random_model(rng, 5, 3);
    m.w.setZero();
    auto x = random_obs(rng, 4, m.num_features());
    auto mg = crf::marginals(m, x);
    const double L = 5.0;
    require((mg.unary.array() - 1.0 / L).abs().maxCoeff() <= 1e-12,
            "zero-weight unary marginals not uniform");
    for (const auto& pw : mg.pairwise)
        require((pw.array() - 1.0 / (L * L)).abs().maxCoeff() <= 1e-12,
                "zero-weight pairwise marginals not uniform");
    return "100 identical plans";
}

std::string determinism() {
    auto cfg = small_grid();
    auto a = rover::gen_dataset(cfg, 3, 99, "train");
    auto b = rover::gen_dataset(cfg, 3, 99, "train");
    require(labels::write_jsonl(a) == labels::write_jsonl(b), "dataset JSONL not reproducible");

    experiments::ExperimentConfig pc;
    pc.experiment = "prediction";
    pc.train_size = 6;
    pc.test_size = 3;
    pc.level_min = 1;
    pc.level_max = 2;
    pc.max_iters = 50;
    pc.grid = 3;
    pc.seed = 13;
    require(experiments::prediction_csv(experiments::run_prediction(pc)) ==
                experiments::prediction_csv(experiments::run_prediction(pc)),
            "prediction CSV not reproducible");

    experiments::ExperimentConfig sc = pc;
    sc.experiment = "selection";
    sc.goals_per_level = 3;
    sc.candidates_per_goal = 3;
    require(experiments::selection_csv(experiments::run_selection(sc)) ==
                experiments::selection_csv(experiments::run_selection(sc)),
            "selection CSV not reproducible");

    experiments::ExperimentConfig yc = pc;
    yc.experiment = "synthesis";
    yc.trials = 1;
    yc.problems_per_trial = 4;
    yc.grid = 4;
    require(experiments::synthesis_csv(experiments::run_synthesis(yc)) ==
                experiments::synthesis_csv(experiments::run_synthesis(yc)),
            "synthesis CSV not reproducible");
    return "JSONL + three CSV pipelines";
}

}  // namespace

int main() {
    criterion(1, "chain model inference matches enumeration", crf_oracle_equivalence);
    criterion(2, "measures match their naive formulas", measure_equivalence);
    criterion(3, "predicted/actual measure ratios stay in band", prediction_ratios);
    criterion(4, "measure-guided selection beats random where goals hide", selection_significance);
    criterion(5, "measure-guided synthesis trades few steps for explicability", synthesis_tradeoff);
    criterion(6, "planners are sound and the optimal planner is optimal", planner_soundness);
    criterion(7, "zero weights collapse to the base planner and uniform marginals",
              degeneracy_identities);
    criterion(8, "identical seeds reproduce identical artifacts", determinism);
    if (failures > 0) std::printf("%d criteria failed\n", failures);
    return failures;
}
