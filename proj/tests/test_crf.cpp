#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "xplan/crf.hpp"

using namespace xplan;
using crf::CompositeLabel;

namespace {

// the composite states a tiny one-task domain can visit
const std::vector<CompositeLabel> kPool = {
    {"", ""}, {"START", "a"}, {"a", ""}, {"a", "a"}, {"a", "b"}, {"b", ""},
};

crf::CRFModel random_model(std::mt19937_64& rng, int num_labels, int num_features) {
    crf::CRFModel m;
    std::vector<CompositeLabel> ls(kPool.begin(), kPool.begin() + num_labels);
    m.labels = crf::LabelAlphabet(std::move(ls));
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
    for (auto& pos : x) {
        for (int f = 0; f < num_features; ++f)
            if (on(rng)) pos.push_back("f" + std::to_string(f));
        if (on(rng)) pos.push_back("never-seen");  // unknown names are ignored
    }
    return x;
}

crf::Dataset toy_dataset() {
    crf::Dataset d;
    d.push_back({{{"begin"}, {"mid"}, {"end"}},
                 {{"START", "go"}, {"go", "go"}, {"go", ""}}});
    d.push_back({{{"begin"}, {"end"}}, {{"START", "go"}, {"go", ""}}});
    d.push_back({{{"begin"}, {"mid"}, {"mid"}, {"end"}},
                 {{"START", "go"}, {"go", "go"}, {"go", "go"}, {"go", ""}}});
    return d;
}

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("composite labels mirror singleton task sets") {
    CHECK(crf::to_composite({{"START"}, {"C"}}) == CompositeLabel{"START", "C"});
    CHECK(crf::to_composite({{}, {}}) == CompositeLabel{"", ""});
    CHECK_THROWS_AS(crf::to_composite({{"C", "S"}, {}}), std::invalid_argument);
    labels::ActionLabel back = crf::to_action_label({"C", ""});
    CHECK(back.current == labels::TaskSet{"C"});
    CHECK(back.next.empty());
}

TEST_CASE("label alphabet sorts, deduplicates, and gates start labels") {
    crf::LabelAlphabet a({{"a", ""}, {"START", "a"}, {"a", ""}, {"", ""}});
    REQUIRE(a.size() == 3);
    CHECK(a.label(0) == CompositeLabel{"", ""});
    CHECK(a.label(1) == CompositeLabel{"START", "a"});
    CHECK(a.label(2) == CompositeLabel{"a", ""});
    CHECK(a.index({"a", ""}) == 2);
    CHECK(a.index({"zz", ""}) == -1);

    // position 0 admits only the start-marked label, later positions the rest
    CHECK(a.allowed_at(1, 0));
    CHECK_FALSE(a.allowed_at(0, 0));
    CHECK_FALSE(a.allowed_at(1, 3));
    CHECK(a.allowed_at(0, 3));

    // one-sided alphabets fall back to admitting everything
    crf::LabelAlphabet only_start(std::vector<CompositeLabel>{{"START", "a"}});
    CHECK(only_start.allowed_at(0, 0));
    CHECK(only_start.allowed_at(0, 5));
    crf::LabelAlphabet no_start({{"a", ""}, {"", ""}});
    CHECK(no_start.allowed_at(0, 0));
    CHECK(no_start.allowed_at(1, 0));
}

TEST_CASE("feature alphabet is an order-independent index") {
    crf::FeatureAlphabet f({"b", "a", "b"});
    REQUIRE(f.size() == 2);
    CHECK(f.name(0) == "a");
    CHECK(f.index("b") == 1);
    CHECK(f.index("c") == -1);
}

TEST_CASE("alphabets are built from the dataset and validated") {
    auto [la, fa] = crf::build_alphabets(toy_dataset());
    CHECK(la.size() == 3);  // (START,go), (go,go), (go,"")
    CHECK(la.index({"START", "go"}) >= 0);
    CHECK(fa.size() == 3);  // begin, mid, end
    CHECK(fa.index("mid") >= 0);

    CHECK_THROWS_AS(crf::build_alphabets({}), std::invalid_argument);
    crf::Dataset mismatch = {{{{"f"}}, {{"START", "a"}, {"a", ""}}}};
    CHECK_THROWS_AS(crf::build_alphabets(mismatch), std::invalid_argument);
    crf::Dataset late_start = {{{{"f"}, {"g"}}, {{"START", "a"}, {"START", "a"}}}};
    CHECK_THROWS_AS(crf::build_alphabets(late_start), std::invalid_argument);
    crf::Dataset start_as_next = {{{{"f"}}, {{"START", "START"}}}};
    CHECK_THROWS_AS(crf::build_alphabets(start_as_next), std::invalid_argument);
}

TEST_CASE("plan records convert directly to chain examples") {
    labels::PlanRecord r;
    r.problem_id = "p";
    r.plan = {"act"};
    r.labels = {{{"START"}, {"a"}}, {{"a"}, {}}};
    r.features = {{"begin"}, {"end"}};
    auto d = crf::dataset_from_records({r});
    REQUIRE(d.size() == 1);
    CHECK(d[0].x == r.features);
    CHECK(d[0].y == std::vector<CompositeLabel>{{"START", "a"}, {"a", ""}});

    r.labels[1].current = {"a", "b"};
    CHECK_THROWS_AS(crf::dataset_from_records({r}), std::invalid_argument);
}

TEST_CASE("emission scores sum the weights of known features") {
    crf::CRFModel m;
    m.labels = crf::LabelAlphabet({{"a", ""}, {"b", ""}});
    m.features = crf::FeatureAlphabet({"f0", "f1"});
    m.w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.weight_count()));
    m.w[0] = 1.0;  // f0, label 0
    m.w[1] = 2.0;  // f0, label 1
    m.w[2] = 3.0;  // f1, label 0
    m.w[3] = 4.0;  // f1, label 1
    auto e = crf::emission_scores(m, {{"f0"}, {"f0", "f1"}, {"mystery"}});
    REQUIRE(e.rows() == 3);
    CHECK(e(0, 0) == 1.0);
    CHECK(e(0, 1) == 2.0);
    CHECK(e(1, 0) == 4.0);
    CHECK(e(1, 1) == 6.0);
    CHECK(e(2, 0) == 0.0);
    CHECK(e(2, 1) == 0.0);
}

TEST_CASE("a zero-weight model scores every sequence equally") {
    crf::CRFModel m;
    m.labels = crf::LabelAlphabet({{"", ""}, {"a", ""}, {"a", "a"}});
    m.features = crf::FeatureAlphabet({"f0"});
    m.w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.weight_count()));
    crf::ObservationSequence x = {{"f0"}, {"f0"}};
    CHECK(crf::log_partition(m, x) == doctest::Approx(std::log(9.0)).epsilon(1e-12));
    auto mg = crf::marginals(m, x);
    for (Eigen::Index t = 0; t < 2; ++t)
        for (Eigen::Index y = 0; y < 3; ++y)
            CHECK(mg.unary(t, y) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    for (const auto& pw : mg.pairwise)
        CHECK(pw.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("inference matches brute-force enumeration on small random models") {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> nl(2, 5), nf(1, 4), len(1, 4);
    for (int trial = 0; trial < 30; ++trial) {
        auto m = random_model(rng, nl(rng), nf(rng));
        auto x = random_obs(rng, len(rng), m.num_features());

        CHECK(crf::log_partition(m, x) ==
              doctest::Approx(oracles::brute_log_partition(m, x)).epsilon(1e-9));

        auto mg = crf::marginals(m, x);
        auto bm = oracles::brute_marginals(m, x);
        CHECK(mg.log_z == doctest::Approx(bm.log_z).epsilon(1e-9));
        CHECK((mg.unary - bm.unary).cwiseAbs().maxCoeff() < 1e-9);
        REQUIRE(mg.pairwise.size() == bm.pairwise.size());
        for (std::size_t t = 0; t < mg.pairwise.size(); ++t)
            CHECK((mg.pairwise[t] - bm.pairwise[t]).cwiseAbs().maxCoeff() < 1e-9);
        for (Eigen::Index t = 0; t < mg.unary.rows(); ++t)
            CHECK(mg.unary.row(t).sum() == doctest::Approx(1.0).epsilon(1e-9));

        auto decoded = crf::viterbi(m, x);
        auto brute = oracles::brute_viterbi(m, x);
        REQUIRE(decoded.size() == brute.size());
        for (std::size_t t = 0; t < brute.size(); ++t)
            CHECK(decoded[t] == m.labels.label(brute[t]));
    }
}

TEST_CASE("decoding respects the start constraint and breaks ties low") {
    crf::CRFModel m;
    m.labels = crf::LabelAlphabet({{"", ""}, {"START", "a"}, {"a", ""}});
    m.features = crf::FeatureAlphabet({"f0"});
    m.w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.weight_count()));
    auto y = crf::viterbi(m, {{"f0"}, {"f0"}, {}});
    REQUIRE(y.size() == 3);
    CHECK(y[0] == CompositeLabel{"START", "a"});  // only start label admitted first
    CHECK(y[1] == CompositeLabel{"", ""});        // all ties resolve to the lowest index
    CHECK(y[2] == CompositeLabel{"", ""});

    // a higher-scoring non-start label still loses position 0
    m.w[0 * 3 + 2] = 5.0;  // f0 boosts ("a","")
    auto y2 = crf::viterbi(m, {{"f0"}, {"f0"}});
    CHECK(y2[0] == CompositeLabel{"START", "a"});
    CHECK(y2[1] == CompositeLabel{"a", ""});

    CHECK_THROWS_AS(crf::viterbi(m, {}), std::invalid_argument);
}

TEST_CASE("training fits a separable toy problem") {
    auto data = toy_dataset();
    crf::TrainConfig cfg;
    cfg.max_iters = 2000;
    cfg.tol = 1e-10;
    auto m = crf::train(data, cfg);
    CHECK(m.iterations > 0);
    CHECK(std::isfinite(m.objective));
    CHECK(m.objective == doctest::Approx(crf::objective_value(m, data)).epsilon(1e-9));

    // near the optimum the gradient has essentially vanished
    CHECK(crf::objective_gradient(m, data).cwiseAbs().maxCoeff() < 1e-3);

    // the trained chain decodes its own training sequences
    for (const auto& ex : data) CHECK(crf::viterbi(m, ex.x) == ex.y);

    // training from zero weights can only improve the objective
    crf::CRFModel zero = m;
    zero.w.setZero();
    CHECK(m.objective > crf::objective_value(zero, data));
}

TEST_CASE("the analytic gradient matches finite differences") {
    auto data = toy_dataset();
    auto [la, fa] = crf::build_alphabets(data);
    crf::CRFModel m;
    m.labels = la;
    m.features = fa;
    m.l2 = 0.7;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    m.w.resize(static_cast<Eigen::Index>(m.weight_count()));
    for (Eigen::Index i = 0; i < m.w.size(); ++i) m.w[i] = u(rng);

    const Eigen::VectorXd g = crf::objective_gradient(m, data);
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < m.w.size(); ++i) {
        crf::CRFModel plus = m, minus = m;
        plus.w[i] += h;
        minus.w[i] -= h;
        const double fd = (crf::objective_value(plus, data) - crf::objective_value(minus, data)) / (2 * h);
        CHECK(g[i] == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("model files round-trip exactly") {
    std::mt19937_64 rng(11);
    auto m = random_model(rng, 4, 3);
    m.l2 = 0.25;
    m.iterations = 17;
    m.objective = -3.5;
    const std::string path = temp_path("xplan_crf_roundtrip.json");
    crf::save_model(m, path);
    auto back = crf::load_model(path);
    CHECK(back.labels.all() == m.labels.all());
    CHECK(back.features.all() == m.features.all());
    REQUIRE(back.w.size() == m.w.size());
    CHECK((back.w.array() == m.w.array()).all());  // bit-exact weights
    CHECK(back.l2 == m.l2);
    CHECK(back.iterations == m.iterations);
    CHECK(back.objective == m.objective);

    auto x = random_obs(rng, 3, m.num_features());
    CHECK(crf::viterbi(back, x) == crf::viterbi(m, x));
    std::filesystem::remove(path);
}

TEST_CASE("model loading rejects junk") {
    CHECK_THROWS_AS(crf::load_model(temp_path("xplan_no_such_model.json")), std::runtime_error);

    const std::string garbled = temp_path("xplan_crf_garbled.json");
    std::ofstream(garbled) << "{ not json";
    CHECK_THROWS_AS(crf::load_model(garbled), std::runtime_error);

    const std::string wrong = temp_path("xplan_crf_wrong.json");
    std::ofstream(wrong) << R"({"format":"xplan-crf","version":999})";
    CHECK_THROWS_WITH_AS(crf::load_model(wrong), "unsupported model file version",
                         std::runtime_error);

    const std::string partial = temp_path("xplan_crf_partial.json");
    std::ofstream(partial) << R"({"format":"xplan-crf","version":1,"l2":1.0})";
    CHECK_THROWS_AS(crf::load_model(partial), std::runtime_error);

    const std::string short_w = temp_path("xplan_crf_short.json");
    std::ofstream(short_w) << R"({"format":"xplan-crf","version":1,"l2":1.0,"iterations":0,)"
                              R"("objective":0.0,"labels":[{"cur":"a","next":""}],)"
                              R"("features":["f"],"weights":[1.0]})";
    CHECK_THROWS_WITH_AS(crf::load_model(short_w), "corrupt model file: weight count mismatch",
                         std::runtime_error);
    for (const auto& p : {garbled, wrong, partial, short_w}) std::filesystem::remove(p);
}
