#pragma once

#include <span>
#include <vector>

#include "omnigaze/cues.hpp"
#include "omnigaze/geometry.hpp"
#include "omnigaze/nets.hpp"
#include "omnigaze/tape.hpp"

namespace omnigaze {

// Which confidence feeds filtering/reweighting: the cue-label score alone, or
// the full score that also folds in student-prediction similarity.
enum class ConfidenceVariant { initial_only, full };

// The reward scorer: fuses visual tokens, text tokens and a candidate gaze
// label into a confidence in (0,1).
struct RewardModelParams {
    Mlp vis_proj;                   // d_v -> d
    Linear text_proj;               // d_t -> d
    CrossAttentionParams cue_attn;  // query: projected visual, kv: projected text
    Tensor ln_gain, ln_bias;        // [1 x d]
    Linear dir_proj;                // 3 -> d, the label's direction vector as one token
    CrossAttentionParams label_attn;
    Mlp conf_head;  // d -> 1
    Mlp scorer;     // 2 -> 1, inputs (r_hat, sim)

    size_t width() const { return cue_attn.width(); }
};

RewardModelParams make_reward_model(const CueProviderConfig& cues, size_t d, size_t hidden,
                                    Rng& rng);
NamedParams named_params(RewardModelParams& p, const std::string& prefix = "");

// AvgPool(LayerNorm(CrossAttn(project(visual), project(text)))) -> [1 x d].
Var semantic_representation(Tape& t, RewardModelParams& p, const VisualCue& visual,
                            const TextCue& text);

// sigmoid(MLP(CrossAttn(fhat, project(direction(label))))) -> [1 x 1].
Var initial_confidence(Tape& t, RewardModelParams& p, Var fhat, const SphericalGaze& label);

// sigmoid(MLP([r_hat, sim])) -> [1 x 1]. sim enters as a constant; no
// gradient reaches the student through this path.
Var final_confidence(Tape& t, RewardModelParams& p, Var r_hat, float sim);

// Full per-sample scoring chain on the given tape (differentiable when the
// tape has gradients enabled). student_pred is the detached student output.
Var score_sample(Tape& t, RewardModelParams& p, const VisualCue& visual, const TextCue& text,
                 const SphericalGaze& candidate_label, const SphericalGaze& student_pred,
                 ConfidenceVariant variant);

struct SampleScore {
    float r_hat;
    float sim;
    float r;  // equals r_hat under ConfidenceVariant::initial_only
};

struct ScoreRequest {
    const Sample* sample;
    SphericalGaze candidate_label;
    SphericalGaze student_pred;
};

// Inference-only scoring of a batch (fresh gradient-disabled tape inside).
std::vector<SampleScore> score_samples(RewardModelParams& p, CueProvider& cues,
                                       const PromptTemplate& prompt,
                                       std::span<const ScoreRequest> batch,
                                       ConfidenceVariant variant);

enum class Reduction { mean, sum };

// Binary cross-entropy of scores against the observability mask (1 = ground
// truth label, 0 = pseudo label); scores clamped to [1e-7, 1-1e-7] first.
Var reward_loss(Tape& t, std::span<const Var> scores, std::span<const float> masks,
                Reduction reduction = Reduction::mean);

}  // namespace omnigaze
