#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return {};
    return std::string(std::istreambuf_iterator<char>(in), {});
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    REQUIRE(out.good());
    out << text;
}

fs::path work_dir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "xplan_cli_tests";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

RunResult run(const std::string& args) {
    static int counter = 0;
    const fs::path out = work_dir() / ("stdout." + std::to_string(counter));
    const fs::path err = work_dir() / ("stderr." + std::to_string(counter));
    ++counter;
    const std::string cmd = std::string(XPLAN_CLI_PATH) + " " + args + " > " + out.string() +
                            " 2> " + err.string();
    int status = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

std::string data(const char* name) { return std::string(XPLAN_DATA_DIR) + "/" + name; }

bool contains(const std::string& hay, const std::string& needle) {
    return hay.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("parse reports grounding statistics") {
    auto r = run("parse " + data("blocksworld.pddl") + " " + data("blocksworld_p1.pddl"));
    CHECK(r.code == 0);
    CHECK(contains(r.out, "domain: blocksworld"));
    CHECK(contains(r.out, "grounded:"));
    CHECK(contains(r.out, "goal fluents"));
}

TEST_CASE("the optimal planner reports the cheapest cost") {
    auto r = run("plan " + data("blocksworld.pddl") + " " + data("blocksworld_p1.pddl") +
                 " --planner opt");
    CHECK(r.code == 0);
    CHECK(contains(r.err, "steps=6 cost=9"));
    CHECK(r.out.front() == '(');
}

TEST_CASE("the default planner solves the small rover problem") {
    auto r = run("plan " + data("rover.pddl") + " " + data("rover_p1.pddl"));
    CHECK(r.code == 0);
    CHECK(contains(r.err, "steps="));
    CHECK(contains(r.out, "(navigate rover"));
}

TEST_CASE("generate, train, label, and score chain together") {
    const fs::path ds = work_dir() / "dataset";
    auto gen = run("gen-rover --n 2 --grid 3 --max-hidden 1 --seed 11 --out " + ds.string());
    CHECK(gen.code == 0);
    REQUIRE(fs::exists(ds / "dataset.jsonl"));
    REQUIRE(fs::exists(ds / "manifest.json"));

    const fs::path model = work_dir() / "model.json";
    auto tr = run("train --data " + (ds / "dataset.jsonl").string() + " --max-iters 80 --out " +
                  model.string());
    CHECK(tr.code == 0);
    REQUIRE(fs::exists(model));
    CHECK(contains(tr.err, "trained on 2 plans"));

    const fs::path plan_file = work_dir() / "step.plan";
    spit(plan_file, "(navigate rover l0 l1)\n");
    auto lab = run("label " + data("rover.pddl") + " " + data("rover_p1.pddl") + " --model " +
                   model.string() + " --plan " + plan_file.string());
    CHECK(lab.code == 0);
    CHECK(contains(lab.out, "a0 - cur="));
    CHECK(contains(lab.out, "a1 (navigate rover l0 l1) cur="));

    auto sc = run("score --labeled " + (ds / "dataset.jsonl").string());
    CHECK(sc.code == 0);
    CHECK(contains(sc.out, "problem_id,theta,beta"));
    CHECK(contains(sc.out, "rover-s11-i0,"));
    CHECK(contains(sc.out, "mean,"));

    SUBCASE("selection picks from a candidate directory") {
        const fs::path cand = work_dir() / "candidates";
        fs::create_directories(cand);
        spit(cand / "p1.plan",
             "(unstack a b)\n(put-down a)\n(pick-up b)\n(stack b a)\n(pick-up c)\n(stack c b)\n");
        spit(cand / "p2.plan",
             "(unstack a b)\n(stack a b)\n(unstack a b)\n(put-down a)\n(pick-up b)\n(stack b a)\n"
             "(pick-up c)\n(stack c b)\n");
        spit(cand / "manifest.json", std::string("{\"domain\":\"") + data("blocksworld.pddl") +
                                         "\",\"problem\":\"" + data("blocksworld_p1.pddl") +
                                         "\",\"plans\":[\"p1.plan\",\"p2.plan\"]}");
        auto sel = run("select --candidates " + cand.string() + " --criterion theta --model " +
                       model.string());
        CHECK(sel.code == 0);
        // the rover model knows none of these features, so both tie and the
        // first candidate wins
        CHECK(contains(sel.out, "0 p1.plan"));
        CHECK(contains(sel.out, "(unstack a b)"));
    }
}

TEST_CASE("the experiment runner writes a CSV") {
    const fs::path cfg = work_dir() / "prediction.cfg";
    spit(cfg,
         "experiment=prediction\ntrain_size=3\ntest_size=2\nlevel_min=1\nlevel_max=1\n"
         "max_iters=30\ngrid=3\nseed=5\n");
    const fs::path out = work_dir() / "results";
    auto r = run("experiment --config " + cfg.string() + " --out " + out.string());
    CHECK(r.code == 0);
    const fs::path csv = out / "prediction.csv";
    CHECK(contains(r.out, csv.string()));
    REQUIRE(fs::exists(csv));
    CHECK(contains(slurp(csv), "level,theta_ratio,beta_ratio,n"));
}

TEST_CASE("failures exit nonzero with an error line") {
    auto missing = run("parse /nonexistent.pddl /nonexistent2.pddl");
    CHECK(missing.code == 1);
    CHECK(contains(missing.err, "error: cannot open file"));

    auto no_model = run("plan " + data("blocksworld.pddl") + " " + data("blocksworld_p1.pddl") +
                        " --planner ffexpd");
    CHECK(no_model.code == 1);
    CHECK(contains(no_model.err, "error: ffexpd requires --model"));

    auto bad_sub = run("frobnicate");
    CHECK(bad_sub.code != 0);

    auto bad_cfg = run("experiment --config /nonexistent.cfg --out " +
                       (work_dir() / "x").string());
    CHECK(bad_cfg.code == 1);
    CHECK(contains(bad_cfg.err, "error:"));
}
