#include "xplan/crf.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace xplan::crf {

namespace {
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double logsumexp(const Eigen::VectorXd& v) {
    double m = v.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((v.array() - m).exp().sum());
}
}  // namespace

CompositeLabel to_composite(const labels::ActionLabel& label) {
    if (label.current.size() > 1 || label.next.size() > 1)
        throw std::invalid_argument("composite labels require singleton or empty task sets");
    CompositeLabel c;
    if (!label.current.empty()) c.current = *label.current.begin();
    if (!label.next.empty()) c.next = *label.next.begin();
    return c;
}

labels::ActionLabel to_action_label(const CompositeLabel& label) {
    labels::ActionLabel a;
    if (!label.current.empty()) a.current.insert(label.current);
    if (!label.next.empty()) a.next.insert(label.next);
    return a;
}

// ---------------------------------------------------------------- alphabets

LabelAlphabet::LabelAlphabet(std::vector<CompositeLabel> labels) : labels_(std::move(labels)) {
    std::sort(labels_.begin(), labels_.end());
    labels_.erase(std::unique(labels_.begin(), labels_.end()), labels_.end());
    for (const auto& l : labels_) (l.current == labels::kStartLabel ? has_start_ : has_nonstart_) = true;
}

int LabelAlphabet::index(const CompositeLabel& l) const {
    auto it = std::lower_bound(labels_.begin(), labels_.end(), l);
    if (it == labels_.end() || *it != l) return -1;
    return static_cast<int>(it - labels_.begin());
}

bool LabelAlphabet::allowed_at(int idx, std::size_t position) const {
    bool startish = labels_[static_cast<std::size_t>(idx)].current == labels::kStartLabel;
    if (position == 0) return has_start_ ? startish : true;
    return has_nonstart_ ? !startish : true;
}

FeatureAlphabet::FeatureAlphabet(std::vector<std::string> names) : names_(std::move(names)) {
    std::sort(names_.begin(), names_.end());
    names_.erase(std::unique(names_.begin(), names_.end()), names_.end());
    index_.reserve(names_.size());
    for (std::size_t i = 0; i < names_.size(); ++i) index_[names_[i]] = static_cast<int>(i);
}

int FeatureAlphabet::index(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
}

Dataset dataset_from_records(const std::vector<labels::PlanRecord>& records) {
    Dataset out;
    out.reserve(records.size());
    for (const auto& r : records) {
        Example ex;
        ex.x = r.features;
        ex.y.reserve(r.labels.size());
        for (const auto& l : r.labels) ex.y.push_back(to_composite(l));
        out.push_back(std::move(ex));
    }
    return out;
}

std::pair<LabelAlphabet, FeatureAlphabet> build_alphabets(const Dataset& dataset) {
    if (dataset.empty()) throw std::invalid_argument("cannot build alphabets from an empty dataset");
    std::set<CompositeLabel> labels;
    std::set<std::string> features;
    for (const auto& ex : dataset) {
        if (ex.x.empty() || ex.x.size() != ex.y.size())
            throw std::invalid_argument("example must pair equal nonzero feature and label counts");
        for (std::size_t t = 0; t < ex.y.size(); ++t) {
            const CompositeLabel& l = ex.y[t];
            if (l.next == labels::kStartLabel)
                throw std::invalid_argument("START cannot appear as a next label");
            if (l.current == labels::kStartLabel && t != 0)
                throw std::invalid_argument("START is only valid at position 0");
            labels.insert(l);
        }
        for (const auto& names : ex.x) features.insert(names.begin(), names.end());
    }
    return {LabelAlphabet({labels.begin(), labels.end()}),
            FeatureAlphabet({features.begin(), features.end()})};
}

// ---------------------------------------------------------------- inference

Eigen::MatrixXd emission_scores(const CRFModel& model, const ObservationSequence& x) {
    const int L = model.num_labels();
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(x.size()), L);
    for (std::size_t t = 0; t < x.size(); ++t)
        for (const auto& name : x[t]) {
            int f = model.features.index(name);
            if (f < 0) continue;  // unknown at test time
            e.row(static_cast<Eigen::Index>(t)) += model.w.segment(static_cast<Eigen::Index>(f) * L, L).transpose();
        }
    return e;
}

namespace {

Eigen::Map<const RowMat> transition_block(const CRFModel& model) {
    const int L = model.num_labels();
    return {model.w.data() + static_cast<std::ptrdiff_t>(model.num_features()) * L, L, L};
}

struct ForwardBackward {
    Eigen::MatrixXd alpha, beta;  // T × L, log-domain
    double log_z = 0.0;
};

ForwardBackward forward_backward(const CRFModel& model, const Eigen::MatrixXd& e) {
    const Eigen::Index T = e.rows(), L = e.cols();
    auto trans = transition_block(model);
    ForwardBackward fb;
    fb.alpha.resize(T, L);
    fb.beta.resize(T, L);
    fb.alpha.row(0) = e.row(0);
    for (Eigen::Index t = 1; t < T; ++t)
        for (Eigen::Index c = 0; c < L; ++c)
            fb.alpha(t, c) = e(t, c) + logsumexp(fb.alpha.row(t - 1).transpose() + trans.col(c));
    fb.beta.row(T - 1).setZero();
    for (Eigen::Index t = T - 2; t >= 0; --t)
        for (Eigen::Index p = 0; p < L; ++p)
            fb.beta(t, p) = logsumexp(trans.row(p).transpose() + e.row(t + 1).transpose() +
                                      fb.beta.row(t + 1).transpose());
    fb.log_z = logsumexp(fb.alpha.row(T - 1).transpose());
    return fb;
}

}  // namespace

double log_partition(const CRFModel& model, const ObservationSequence& x) {
    if (model.num_labels() == 0) throw std::runtime_error("model has an empty label alphabet");
    if (x.empty()) throw std::invalid_argument("empty observation sequence");
    Eigen::MatrixXd e = emission_scores(model, x);
    auto trans = transition_block(model);
    Eigen::VectorXd alpha = e.row(0).transpose();
    for (std::size_t t = 1; t < x.size(); ++t) {
        Eigen::VectorXd next(model.num_labels());
        for (Eigen::Index c = 0; c < next.size(); ++c)
            next(c) = e(static_cast<Eigen::Index>(t), c) + logsumexp(alpha + trans.col(c));
        alpha = std::move(next);
    }
    return logsumexp(alpha);
}

Marginals marginals(const CRFModel& model, const ObservationSequence& x) {
    if (model.num_labels() == 0) throw std::runtime_error("model has an empty label alphabet");
    if (x.empty()) throw std::invalid_argument("empty observation sequence");
    const Eigen::Index L = model.num_labels();
    Eigen::MatrixXd e = emission_scores(model, x);
    ForwardBackward fb = forward_backward(model, e);
    auto trans = transition_block(model);

    Marginals m;
    m.log_z = fb.log_z;
    m.unary = ((fb.alpha + fb.beta).array() - fb.log_z).exp().matrix();
    m.pairwise.reserve(static_cast<std::size_t>(e.rows() > 0 ? e.rows() - 1 : 0));
    for (Eigen::Index t = 0; t + 1 < e.rows(); ++t) {
        Eigen::MatrixXd pm(L, L);
        for (Eigen::Index a = 0; a < L; ++a)
            for (Eigen::Index b = 0; b < L; ++b)
                pm(a, b) = std::exp(fb.alpha(t, a) + trans(a, b) + e(t + 1, b) + fb.beta(t + 1, b) - fb.log_z);
        m.pairwise.push_back(std::move(pm));
    }
    return m;
}

std::vector<CompositeLabel> viterbi_from_emissions(const CRFModel& model, const Eigen::MatrixXd& e) {
    if (model.num_labels() == 0) throw std::runtime_error("model has an empty label alphabet");
    if (e.rows() == 0) throw std::invalid_argument("empty observation sequence");
    const Eigen::Index T = e.rows();
    const Eigen::Index L = model.num_labels();
    auto trans = transition_block(model);

    Eigen::MatrixXd delta = Eigen::MatrixXd::Constant(T, L, kNegInf);
    Eigen::MatrixXi back = Eigen::MatrixXi::Constant(T, L, -1);
    for (Eigen::Index c = 0; c < L; ++c)
        if (model.labels.allowed_at(static_cast<int>(c), 0)) delta(0, c) = e(0, c);
    for (Eigen::Index t = 1; t < T; ++t)
        for (Eigen::Index c = 0; c < L; ++c) {
            if (!model.labels.allowed_at(static_cast<int>(c), static_cast<std::size_t>(t))) continue;
            double best = kNegInf;
            int arg = -1;
            for (Eigen::Index p = 0; p < L; ++p) {
                double v = delta(t - 1, p) + trans(p, c);
                if (v > best) {  // strict: ties keep the lowest previous index
                    best = v;
                    arg = static_cast<int>(p);
                }
            }
            delta(t, c) = best + e(t, c);
            back(t, c) = arg;
        }

    Eigen::Index cur = 0;
    for (Eigen::Index c = 1; c < L; ++c)
        if (delta(T - 1, c) > delta(T - 1, cur)) cur = c;
    std::vector<CompositeLabel> out(static_cast<std::size_t>(T));
    for (Eigen::Index t = T - 1; t >= 0; --t) {
        out[static_cast<std::size_t>(t)] = model.labels.label(static_cast<int>(cur));
        if (t > 0) cur = back(t, cur);
    }
    return out;
}

std::vector<CompositeLabel> viterbi(const CRFModel& model, const ObservationSequence& x) {
    if (x.empty()) throw std::invalid_argument("empty observation sequence");
    return viterbi_from_emissions(model, emission_scores(model, x));
}

// ---------------------------------------------------------------- training

namespace {

struct CompiledExample {
    std::vector<std::vector<int>> feats;  // known feature ids per position
    std::vector<int> y;
};

std::vector<CompiledExample> compile(const CRFModel& model, const Dataset& dataset) {
    std::vector<CompiledExample> out;
    out.reserve(dataset.size());
    for (const auto& ex : dataset) {
        CompiledExample ce;
        ce.feats.reserve(ex.x.size());
        for (const auto& names : ex.x) {
            std::vector<int> ids;
            for (const auto& name : names) {
                int f = model.features.index(name);
                if (f >= 0) ids.push_back(f);
            }
            ce.feats.push_back(std::move(ids));
        }
        for (const auto& l : ex.y) {
            int idx = model.labels.index(l);
            if (idx < 0) throw std::invalid_argument("label outside the model alphabet");
            ce.y.push_back(idx);
        }
        out.push_back(std::move(ce));
    }
    return out;
}

Eigen::MatrixXd compiled_emissions(const CRFModel& model, const CompiledExample& ex) {
    const int L = model.num_labels();
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ex.feats.size()), L);
    for (std::size_t t = 0; t < ex.feats.size(); ++t)
        for (int f : ex.feats[t])
            e.row(static_cast<Eigen::Index>(t)) += model.w.segment(static_cast<Eigen::Index>(f) * L, L).transpose();
    return e;
}

// Conditional log-likelihood term of one example (needs e and the shared model).
double example_loglik(const CRFModel& model, const CompiledExample& ex, const Eigen::MatrixXd& e,
                      double log_z) {
    auto trans = transition_block(model);
    double score = 0.0;
    for (std::size_t t = 0; t < ex.y.size(); ++t) {
        score += e(static_cast<Eigen::Index>(t), ex.y[t]);
        if (t > 0) score += trans(ex.y[t - 1], ex.y[t]);
    }
    return score - log_z;
}

double compiled_objective(const CRFModel& model, const std::vector<CompiledExample>& data) {
    double obj = -0.5 * model.l2 * model.w.squaredNorm();
    for (const auto& ex : data) {
        Eigen::MatrixXd e = compiled_emissions(model, ex);
        ForwardBackward fb = forward_backward(model, e);
        obj += example_loglik(model, ex, e, fb.log_z);
    }
    return obj;
}

Eigen::VectorXd compiled_gradient(const CRFModel& model, const std::vector<CompiledExample>& data) {
    const int L = model.num_labels();
    const Eigen::Index off = static_cast<Eigen::Index>(model.num_features()) * L;
    Eigen::VectorXd g = -model.l2 * model.w;
    Eigen::Map<RowMat> gtrans(g.data() + off, L, L);
    auto trans = transition_block(model);

    for (const auto& ex : data) {
        Eigen::MatrixXd e = compiled_emissions(model, ex);
        ForwardBackward fb = forward_backward(model, e);
        const Eigen::Index T = e.rows();

        for (std::size_t t = 0; t < ex.y.size(); ++t) {
            for (int f : ex.feats[t]) g(static_cast<Eigen::Index>(f) * L + ex.y[t]) += 1.0;
            if (t > 0) gtrans(ex.y[t - 1], ex.y[t]) += 1.0;
        }
        for (Eigen::Index t = 0; t < T; ++t) {
            Eigen::VectorXd m =
                ((fb.alpha.row(t) + fb.beta.row(t)).array() - fb.log_z).exp().matrix().transpose();
            for (int f : ex.feats[static_cast<std::size_t>(t)])
                g.segment(static_cast<Eigen::Index>(f) * L, L) -= m;
        }
        for (Eigen::Index t = 0; t + 1 < T; ++t)
            for (Eigen::Index a = 0; a < L; ++a)
                for (Eigen::Index b = 0; b < L; ++b)
                    gtrans(a, b) -=
                        std::exp(fb.alpha(t, a) + trans(a, b) + e(t + 1, b) + fb.beta(t + 1, b) - fb.log_z);
    }
    return g;
}

}  // namespace

double objective_value(const CRFModel& model, const Dataset& dataset) {
    return compiled_objective(model, compile(model, dataset));
}

Eigen::VectorXd objective_gradient(const CRFModel& model, const Dataset& dataset) {
    return compiled_gradient(model, compile(model, dataset));
}

CRFModel train(const Dataset& dataset, const TrainConfig& config) {
    CRFModel model;
    std::tie(model.labels, model.features) = build_alphabets(dataset);
    model.l2 = config.l2;
    model.w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.weight_count()));
    std::vector<CompiledExample> data = compile(model, dataset);

    double objective = compiled_objective(model, data);
    double eta = 1.0;
    for (int iter = 1; iter <= config.max_iters; ++iter) {
        if (!std::isfinite(objective))
            throw std::runtime_error("non-finite objective at iteration " + std::to_string(iter));
        Eigen::VectorXd g = compiled_gradient(model, data);
        double gnorm2 = g.squaredNorm();

        Eigen::VectorXd w_old = model.w;
        double step = eta;
        double trial = kNegInf;
        bool accepted = false;
        while (step >= 1e-18) {
            model.w = w_old + step * g;
            trial = compiled_objective(model, data);
            if (std::isfinite(trial) && trial >= objective + 1e-4 * step * gnorm2) {
                accepted = true;
                break;
            }
            step /= 2;
        }
        if (!accepted) {
            model.w = std::move(w_old);
            if (!std::isfinite(trial))
                throw std::runtime_error("non-finite objective at iteration " + std::to_string(iter));
            break;  // no step improves: converged
        }
        model.iterations = iter;
        eta = std::min(step * 2.0, 1e6);
        double gain = trial - objective;
        objective = trial;
        if (gain < config.tol) break;
    }
    model.objective = objective;
    return model;
}

// ---------------------------------------------------------------- model file

namespace {
constexpr int kModelVersion = 1;
constexpr const char* kModelFormat = "xplan-crf";
}  // namespace

void save_model(const CRFModel& model, const std::string& path) {
    nlohmann::ordered_json j;
    j["format"] = kModelFormat;
    j["version"] = kModelVersion;
    j["l2"] = model.l2;
    j["iterations"] = model.iterations;
    j["objective"] = model.objective;
    nlohmann::ordered_json labels = nlohmann::ordered_json::array();
    for (const auto& l : model.labels.all()) labels.push_back({{"cur", l.current}, {"next", l.next}});
    j["labels"] = std::move(labels);
    j["features"] = model.features.all();
    j["weights"] = std::vector<double>(model.w.data(), model.w.data() + model.w.size());

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write model file: " + path);
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("failed writing model file: " + path);
}

CRFModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("corrupt model file: " + std::string(e.what()));
    }
    try {
        if (j.at("format").get<std::string>() != kModelFormat)
            throw std::runtime_error("corrupt model file: not a CRF model");
        if (j.at("version").get<int>() != kModelVersion)
            throw std::runtime_error("unsupported model file version");
        CRFModel model;
        model.l2 = j.at("l2").get<double>();
        model.iterations = j.at("iterations").get<int>();
        model.objective = j.at("objective").get<double>();
        std::vector<CompositeLabel> labels;
        for (const auto& l : j.at("labels"))
            labels.push_back({l.at("cur").get<std::string>(), l.at("next").get<std::string>()});
        model.labels = LabelAlphabet(std::move(labels));
        model.features = FeatureAlphabet(j.at("features").get<std::vector<std::string>>());
        std::vector<double> w = j.at("weights").get<std::vector<double>>();
        if (w.size() != model.weight_count())
            throw std::runtime_error("corrupt model file: weight count mismatch");
        model.w = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("corrupt model file: " + std::string(e.what()));
    }
}

}  // namespace xplan::crf
