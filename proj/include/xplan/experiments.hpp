#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "xplan/crf.hpp"

namespace xplan::experiments {

// Shared settings for the three pipelines. Defaults are desk scale;
// full_scale restores the full-size counts (1000/1900 training samples,
// 100 test plans, 50 goals x 20 candidates, 100 problems per trial).
struct ExperimentConfig {
    std::string experiment;  // prediction | selection | synthesis
    int train_size = 200;
    int test_size = 50;           // prediction: test plans per level
    int goals_per_level = 20;     // selection
    int candidates_per_goal = 10; // selection
    int trials = 3;               // synthesis
    int problems_per_trial = 30;  // synthesis
    int level_min = 1;            // hidden-goal levels (max hidden goals per problem)
    int level_max = 6;
    double w_theta = 2.0;
    double w_beta = 2.0;
    double l2 = 1.0;  // CRF training settings
    int max_iters = 500;
    double tol = 1e-6;
    std::uint64_t seed = 7;
    bool full_scale = false;
    int grid = 4;  // rover grid side length
    std::string out_dir;
};

// Reads JSON (leading '{') or key=value lines; unknown keys are errors.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);
void validate(const ExperimentConfig& cfg);  // throws std::invalid_argument

// Full-size counts for cfg.experiment when cfg.full_scale is set; identity
// otherwise.
ExperimentConfig apply_full_scale(const ExperimentConfig& cfg);

// Predicted-over-ground-truth measure ratios per hidden-goal level, each the
// ratio of the per-level means. Model trained on plans with at most 3 hidden
// goals, evaluated across level_min..level_max.
struct PredictionRow {
    int level = 0;
    double theta_ratio = 0.0;
    double beta_ratio = 0.0;
    std::size_t n = 0;
};
struct PredictionResult {
    std::vector<PredictionRow> rows;
};
PredictionResult run_prediction(const ExperimentConfig& cfg);
std::string prediction_csv(const PredictionResult& result);

// Ground-truth measures of the plans chosen per public goal by the predicted
// argmax (EXPD-SELECT) and by a seeded uniform pick (RAND-SELECT), with
// paired two-sided t-tests per level.
struct SelectionLevelResult {
    int level = 0;
    std::vector<double> expd_theta, expd_beta;  // per goal, chosen by θ̂ / β̂
    std::vector<double> rand_theta, rand_beta;  // the random pick's measures
    double p_theta = 1.0;
    double p_beta = 1.0;
};
struct SelectionResult {
    std::vector<SelectionLevelResult> levels;
};
SelectionResult run_selection(const ExperimentConfig& cfg);
std::string selection_csv(const SelectionResult& result);

// FF against FF-EXPD (θ-only, β-only, both) on problems where FF's predicted
// explicability falls below 0.85; ground-truth and predicted measures plus
// step counts per planner.
enum class Planner { kFF = 0, kTheta, kBeta, kBoth };
inline constexpr std::array<const char*, 4> kPlannerNames = {"ff", "ffexpd-theta", "ffexpd-beta",
                                                             "ffexpd-both"};
struct SynthesisOutcome {
    double theta = 0.0, beta = 0.0;          // ground truth vs the public goal
    double theta_hat = 0.0, beta_hat = 0.0;  // model predictions
    std::size_t steps = 0;
};
struct SynthesisTrialResult {
    int trial = 0;
    std::vector<std::array<SynthesisOutcome, 4>> problems;  // rows pass the θ̂ < 0.85 filter
    std::size_t generated = 0;  // problems drawn for the trial
    std::size_t excluded = 0;   // planner failures (all planners skipped to keep pairing)
};
struct SynthesisResult {
    std::vector<SynthesisTrialResult> trials;
};
SynthesisResult run_synthesis(const ExperimentConfig& cfg);
std::string synthesis_csv(const SynthesisResult& result);

// Dispatch on cfg.experiment; returns {output basename, csv text}.
std::pair<std::string, std::string> run_experiment(const ExperimentConfig& cfg);

}  // namespace xplan::experiments
