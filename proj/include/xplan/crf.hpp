#pragma once

#include <Eigen/Dense>
#include <string>
#include <unordered_map>
#include <vector>

#include "xplan/labels.hpp"

namespace xplan::crf {

// One chain state: the (current, next) task pair of a plan position. Empty
// string encodes the empty task set; "START" appears only as a position-0
// current component.
struct CompositeLabel {
    std::string current;
    std::string next;
    bool operator==(const CompositeLabel&) const = default;
    auto operator<=>(const CompositeLabel&) const = default;
};

CompositeLabel to_composite(const labels::ActionLabel& label);  // throws on non-singleton sets
labels::ActionLabel to_action_label(const CompositeLabel& label);

class LabelAlphabet {
  public:
    LabelAlphabet() = default;
    explicit LabelAlphabet(std::vector<CompositeLabel> labels);  // sorted + deduplicated

    int size() const { return static_cast<int>(labels_.size()); }
    const CompositeLabel& label(int idx) const { return labels_[static_cast<std::size_t>(idx)]; }
    const std::vector<CompositeLabel>& all() const { return labels_; }
    int index(const CompositeLabel& l) const;  // -1 if absent

    // Decoding constraint. Position 0 admits the start-marked labels when the
    // alphabet has any (otherwise every label); later positions admit the
    // rest (falling back to every label when none remain).
    bool allowed_at(int idx, std::size_t position) const;

  private:
    std::vector<CompositeLabel> labels_;
    bool has_start_ = false;
    bool has_nonstart_ = false;
};

class FeatureAlphabet {
  public:
    FeatureAlphabet() = default;
    explicit FeatureAlphabet(std::vector<std::string> names);  // sorted + deduplicated

    int size() const { return static_cast<int>(names_.size()); }
    const std::string& name(int idx) const { return names_[static_cast<std::size_t>(idx)]; }
    const std::vector<std::string>& all() const { return names_; }
    int index(const std::string& name) const;  // -1 for unknown (dropped at test time)

  private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, int> index_;
};

// Per-position active feature names.
using ObservationSequence = std::vector<std::vector<std::string>>;

struct Example {
    ObservationSequence x;
    std::vector<CompositeLabel> y;  // same length as x
};
using Dataset = std::vector<Example>;

// Weight layout: unary block first, w[f·L + y] for feature f and label y,
// then transitions w[F·L + prev·L + cur].
struct CRFModel {
    LabelAlphabet labels;
    FeatureAlphabet features;
    Eigen::VectorXd w;
    double l2 = 1.0;
    int iterations = 0;
    double objective = 0.0;

    int num_labels() const { return labels.size(); }
    int num_features() const { return features.size(); }
    std::size_t weight_count() const {
        auto f = static_cast<std::size_t>(features.size());
        auto l = static_cast<std::size_t>(labels.size());
        return f * l + l * l;
    }
};

// Chain examples from labeled plan records: x = the stored per-position
// features, y = the composite labels. Throws on non-singleton label sets.
Dataset dataset_from_records(const std::vector<labels::PlanRecord>& records);

// Alphabets covering exactly the labels/features observed in the dataset,
// independent of example order. Throws std::invalid_argument on an empty
// dataset, a length mismatch, or a label violating the START placement rules.
std::pair<LabelAlphabet, FeatureAlphabet> build_alphabets(const Dataset& dataset);

// Unary scores per position: row t holds the summed weights of position t's
// known features for each label.
Eigen::MatrixXd emission_scores(const CRFModel& model, const ObservationSequence& x);

// log Σ_y exp(score(x, y)) over all |L|^T label sequences (unconstrained).
double log_partition(const CRFModel& model, const ObservationSequence& x);

struct Marginals {
    Eigen::MatrixXd unary;                  // T × L, rows sum to 1
    std::vector<Eigen::MatrixXd> pairwise;  // T−1 matrices, L × L
    double log_z = 0.0;
};
Marginals marginals(const CRFModel& model, const ObservationSequence& x);

// MAP decode from a precomputed emission matrix (rows = positions); same
// constraints and tie-breaking as viterbi below.
std::vector<CompositeLabel> viterbi_from_emissions(const CRFModel& model, const Eigen::MatrixXd& e);

// MAP decode under the position constraints of LabelAlphabet::allowed_at;
// ties resolved toward the lowest label index.
std::vector<CompositeLabel> viterbi(const CRFModel& model, const ObservationSequence& x);

struct TrainConfig {
    double l2 = 1.0;
    int max_iters = 500;
    double tol = 1e-6;        // stop when the objective improves by less
    std::uint64_t seed = 0;   // reserved; training is deterministic
};

// L2-regularized conditional log-likelihood, full-batch gradient ascent with
// backtracking line search from w = 0. Throws std::runtime_error (with the
// iteration number) if the objective turns non-finite.
CRFModel train(const Dataset& dataset, const TrainConfig& config = {});

// Regularized objective and its gradient at w (exposed for the
// finite-difference checks).
double objective_value(const CRFModel& model, const Dataset& dataset);
Eigen::VectorXd objective_gradient(const CRFModel& model, const Dataset& dataset);

// Versioned JSON model file; load rejects unknown versions and malformed
// content. Round-trips weights bit-exactly.
void save_model(const CRFModel& model, const std::string& path);
CRFModel load_model(const std::string& path);

}  // namespace xplan::crf
