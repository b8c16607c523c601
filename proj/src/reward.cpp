#include "omnigaze/reward.hpp"

#include "omnigaze/errors.hpp"

namespace omnigaze {

RewardModelParams make_reward_model(const CueProviderConfig& cues, size_t d, size_t hidden,
                                    Rng& rng) {
    RewardModelParams p;
    p.vis_proj = make_mlp({cues.d_v, hidden, d}, rng);
    p.text_proj = make_linear(cues.d_t, d, rng);
    p.cue_attn = make_cross_attention(d, d, d, rng);
    p.ln_gain = Tensor::full(1, d, 1.0f);
    p.ln_gain.requires_grad = true;
    p.ln_bias = Tensor(1, d);
    p.ln_bias.requires_grad = true;
    p.dir_proj = make_linear(3, d, rng);
    p.label_attn = make_cross_attention(d, d, d, rng);
    p.conf_head = make_mlp({d, hidden, 1}, rng);
    p.scorer = make_mlp({2, hidden, 1}, rng);
    return p;
}

NamedParams named_params(RewardModelParams& p, const std::string& prefix) {
    NamedParams np = named_params(p.vis_proj, prefix + "vis_proj");
    auto append = [&np](NamedParams more) {
        np.insert(np.end(), more.begin(), more.end());
    };
    np.emplace_back(prefix + "text_proj.w", &p.text_proj.w);
    np.emplace_back(prefix + "text_proj.b", &p.text_proj.b);
    append(named_params(p.cue_attn, prefix + "cue_attn"));
    np.emplace_back(prefix + "ln.gain", &p.ln_gain);
    np.emplace_back(prefix + "ln.bias", &p.ln_bias);
    np.emplace_back(prefix + "dir_proj.w", &p.dir_proj.w);
    np.emplace_back(prefix + "dir_proj.b", &p.dir_proj.b);
    append(named_params(p.label_attn, prefix + "label_attn"));
    append(named_params(p.conf_head, prefix + "conf_head"));
    append(named_params(p.scorer, prefix + "scorer"));
    return np;
}

Var semantic_representation(Tape& t, RewardModelParams& p, const VisualCue& visual,
                            const TextCue& text) {
    Var vis_tokens = mlp_forward(t, p.vis_proj, t.constant(visual.tokens));
    Var text_tokens = linear_forward(t, p.text_proj, t.constant(text.embedding));
    Var fused = cross_attention(t, p.cue_attn, vis_tokens, text_tokens);
    Var normed = t.layer_norm(fused, t.param(p.ln_gain), t.param(p.ln_bias));
    return t.mean_pool(normed, 0);
}

Var initial_confidence(Tape& t, RewardModelParams& p, Var fhat, const SphericalGaze& label) {
    const DirectionVector v = to_direction(label);
    Var dir_token = linear_forward(t, p.dir_proj, t.constant(Tensor::row({v.x, v.y, v.z})));
    Var attended = cross_attention(t, p.label_attn, fhat, dir_token);
    return t.sigmoid(mlp_forward(t, p.conf_head, attended));
}

Var final_confidence(Tape& t, RewardModelParams& p, Var r_hat, float sim) {
    Var joined = t.concat(r_hat, t.constant(Tensor::scalar(sim)), 1);
    return t.sigmoid(mlp_forward(t, p.scorer, joined));
}

Var score_sample(Tape& t, RewardModelParams& p, const VisualCue& visual, const TextCue& text,
                 const SphericalGaze& candidate_label, const SphericalGaze& student_pred,
                 ConfidenceVariant variant) {
    Var fhat = semantic_representation(t, p, visual, text);
    Var r_hat = initial_confidence(t, p, fhat, candidate_label);
    if (variant == ConfidenceVariant::initial_only) return r_hat;
    const float sim = cosine_sim(student_pred, candidate_label);
    return final_confidence(t, p, r_hat, sim);
}

std::vector<SampleScore> score_samples(RewardModelParams& p, CueProvider& cues,
                                       const PromptTemplate& prompt,
                                       std::span<const ScoreRequest> batch,
                                       ConfidenceVariant variant) {
    std::vector<SampleScore> out;
    out.reserve(batch.size());
    for (const ScoreRequest& req : batch) {
        Tape t(false);
        const VisualCue visual = cues.visual_cue(*req.sample);
        const TextCue text = cues.text_cue(*req.sample, prompt);
        Var fhat = semantic_representation(t, p, visual, text);
        Var r_hat = initial_confidence(t, p, fhat, req.candidate_label);
        SampleScore s;
        s.r_hat = t.scalar_value(r_hat);
        s.sim = cosine_sim(req.student_pred, req.candidate_label);
        s.r = variant == ConfidenceVariant::initial_only
                  ? s.r_hat
                  : t.scalar_value(final_confidence(t, p, r_hat, s.sim));
        out.push_back(s);
    }
    return out;
}

Var reward_loss(Tape& t, std::span<const Var> scores, std::span<const float> masks,
                Reduction reduction) {
    if (scores.size() != masks.size())
        throw ShapeError("reward_loss: " + std::to_string(scores.size()) + " scores vs " +
                         std::to_string(masks.size()) + " masks");
    if (scores.empty()) throw InvalidArgument("reward_loss: empty batch");
    Var r = t.clamp(t.stack_rows(scores), 1e-7f, 1.0f - 1e-7f);
    Tensor c(scores.size(), 1), cinv(scores.size(), 1);
    for (size_t i = 0; i < masks.size(); ++i) {
        if (masks[i] != 0.0f && masks[i] != 1.0f)
            throw InvalidArgument("reward_loss: mask must be binary");
        c[i] = masks[i];
        cinv[i] = 1.0f - masks[i];
    }
    Var pos = t.mul(t.constant(std::move(c)), t.log(r));
    Var neg = t.mul(t.constant(std::move(cinv)), t.log(t.add_scalar(t.scale(r, -1.0f), 1.0f)));
    Var nll = t.scale(t.add(pos, neg), -1.0f);
    return reduction == Reduction::mean ? t.mean_all(nll) : t.sum(nll);
}

}  // namespace omnigaze
