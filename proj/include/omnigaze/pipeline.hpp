#pragma once

#include <functional>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "omnigaze/adam.hpp"
#include "omnigaze/cues.hpp"
#include "omnigaze/data.hpp"
#include "omnigaze/nets.hpp"
#include "omnigaze/reward.hpp"

namespace omnigaze {

struct TrainConfig {
    float tau = 0.5f;          // confidence threshold
    int refresh_interval = 10; // K, epochs between teacher refreshes
    bool refresh_enabled = true;
    int teacher_epochs = 30;
    int ssl_epochs = 30;
    float lr_teacher = 0.005f;
    float lr_student = 0.001f;
    float lr_reward = 0.0001f;
    float weight_decay = 0.05f;
    size_t batch_size = 64;
    uint64_t seed = 42;
    Reduction unsup_reduction = Reduction::mean;
    Reduction reward_reduction = Reduction::mean;
    float weight_sup = 0.5f;
    float weight_unsup = 0.5f;

    // Ablation switches; defaults give the full method.
    bool filtering = true;    // drop samples with r < tau
    bool reweighting = true;  // weight retained samples by r
    ConfidenceVariant confidence_variant = ConfidenceVariant::full;

    // Pseudo-label corruption, injected at generation and after each refresh.
    // Models the quality spread of in-the-wild pseudo-labels and provides the
    // ground-truth "bad label" set for discrimination tests; defaults mirror
    // SyntheticSpec (rho 0.3 at >= 30 degrees). Set rho 0 for clean labels.
    float pseudo_corrupt_rho = 0.3f;
    float pseudo_corrupt_min_deg = 30.0f;

    // Network dims.
    size_t d_model = 32;
    size_t d_enc = 64;
    size_t hidden = 64;

    void validate() const;  // throws ConfigError naming the offending key
};

struct HistoryRecord {
    int epoch = 0;
    float loss_sup = 0.0f;
    float loss_unsup = 0.0f;
    float loss_reward = 0.0f;
    float retained_fraction = 0.0f;
    std::optional<float> val_error_deg;
};

struct TrainHistory {
    std::vector<HistoryRecord> records;
};

struct StepRecord {
    float loss_sup = 0.0f;
    float loss_unsup = 0.0f;
    float loss_reward = 0.0f;
    float retained_fraction = 0.0f;
};

// (1/N) sum ||pred_i - label_i||_2 over (yaw, pitch) rows.
Var supervised_loss(Tape& t, Var predictions, const Tensor& labels);

// sum_j w_j * ||pred_j - pseudo_j||_2 with w_j from the filtering/reweighting
// switches; mean reduction divides by the full batch count. Scores are
// constants: no gradient flows into the reward model here.
Var unsupervised_loss(Tape& t, Var predictions, const Tensor& pseudo_labels,
                      std::span<const float> scores, const TrainConfig& cfg);

Var total_objective(Tape& t, Var loss_sup, Var loss_unsup, const TrainConfig& cfg);

// Weights w_j as used by unsupervised_loss (exposed for tests).
std::vector<float> unsup_weights(std::span<const float> scores, const TrainConfig& cfg);

struct TeacherResult {
    GazeEstimatorParams params;
    TrainHistory history;
};

TeacherResult train_teacher(const Dataset& labeled, const TrainConfig& cfg);

PseudoLabelSet generate_pseudo_labels(GazeEstimatorParams& model, const Dataset& unlabeled,
                                      int epoch);

struct SslState {
    GazeEstimatorParams teacher;
    GazeEstimatorParams student;
    RewardModelParams reward;
    Adam student_adam;
    Adam reward_adam;
    PseudoLabelSet pseudo;
    std::unordered_set<std::string> corrupted_ids;  // empty unless corruption is on
};

// One self-training step: reward update on labeled(c=1) + unlabeled(c=0),
// then a student update on fresh scores. Exactly one update each, reward
// first.
StepRecord ssl_step(SslState& state, const Dataset& labeled, const Dataset& unlabeled,
                    const PairedBatch& batch, CueProvider& cues, const PromptTemplate& prompt,
                    const TrainConfig& cfg, int epoch);

// At epochs divisible by K: teacher <- student weights, pseudo-labels
// regenerated (and re-corrupted when configured). Returns true on refresh.
bool refresh_teacher(SslState& state, const Dataset& unlabeled, int epoch,
                     const TrainConfig& cfg);

struct RunHooks {
    // Called after each ssl epoch with the current student; the return value
    // lands in the history as the validation angular error.
    std::function<float(GazeEstimatorParams&)> eval = nullptr;
    // Called at phase boundaries and every refresh ("teacher", "pseudo",
    // "refresh:<epoch>").
    std::function<void(const std::string& tag, SslState&)> snapshot = nullptr;
};

struct RunResult {
    GazeEstimatorParams teacher;
    GazeEstimatorParams student;
    RewardModelParams reward;
    PseudoLabelSet pseudo;
    std::unordered_set<std::string> corrupted_ids;
    TrainHistory teacher_history;
    TrainHistory ssl_history;
};

// Full three-phase run: teacher supervision, pseudo-labeling, joint
// student/reward self-training. If initial_teacher is given, phase i is
// skipped and it is used directly.
RunResult run_selftraining(const Dataset& labeled, const Dataset& unlabeled,
                           const TrainConfig& cfg, CueProvider& cues,
                           const RunHooks& hooks = {},
                           const GazeEstimatorParams* initial_teacher = nullptr);

}  // namespace omnigaze
