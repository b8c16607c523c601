#include "omnigaze/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "omnigaze/errors.hpp"

namespace omnigaze {

void TrainConfig::validate() const {
    auto fail = [](const std::string& key, const std::string& why) {
        throw ConfigError("config key '" + key + "': " + why);
    };
    if (!(tau >= 0.0f && tau <= 1.0f)) fail("tau", "must be in [0,1]");
    if (refresh_interval < 1) fail("refresh_interval", "must be >= 1");
    if (teacher_epochs < 0) fail("teacher_epochs", "must be >= 0");
    if (ssl_epochs < 0) fail("ssl_epochs", "must be >= 0");
    if (!(lr_teacher > 0.0f)) fail("lr_teacher", "must be positive");
    if (!(lr_student > 0.0f) && lr_student != 0.0f) fail("lr_student", "must be >= 0");
    if (!(lr_reward > 0.0f) && lr_reward != 0.0f) fail("lr_reward", "must be >= 0");
    if (!(weight_decay >= 0.0f)) fail("weight_decay", "must be >= 0");
    if (batch_size < 2) fail("batch_size", "must be >= 2");
    if (!(weight_sup >= 0.0f) || !(weight_unsup >= 0.0f))
        fail("objective_weights", "must be >= 0");
    if (!(pseudo_corrupt_rho >= 0.0f && pseudo_corrupt_rho <= 1.0f))
        fail("pseudo_corrupt_rho", "must be in [0,1]");
    if (d_model == 0 || d_enc == 0 || hidden == 0) fail("dims", "must be positive");
}

Var supervised_loss(Tape& t, Var predictions, const Tensor& labels) {
    const Tensor& p = t.value(predictions);
    if (p.rows() == 0) throw InvalidArgument("supervised_loss: empty batch");
    if (p.rows() != labels.rows() || p.cols() != 2 || labels.cols() != 2)
        throw ShapeError("supervised_loss: predictions " + p.shape_str() + " vs labels " +
                         labels.shape_str());
    Var residual = t.sub(predictions, t.constant(labels));
    return t.mean_all(t.l2_norm_rowwise(residual));
}

std::vector<float> unsup_weights(std::span<const float> scores, const TrainConfig& cfg) {
    std::vector<float> w(scores.size(), 1.0f);
    for (size_t i = 0; i < scores.size(); ++i) {
        if (cfg.filtering && scores[i] < cfg.tau) {
            w[i] = 0.0f;
            continue;
        }
        if (cfg.reweighting) w[i] = scores[i];
    }
    return w;
}

Var unsupervised_loss(Tape& t, Var predictions, const Tensor& pseudo_labels,
                      std::span<const float> scores, const TrainConfig& cfg) {
    const Tensor& p = t.value(predictions);
    if (p.rows() != pseudo_labels.rows() || p.rows() != scores.size())
        throw ShapeError("unsupervised_loss: predictions " + p.shape_str() + " vs labels " +
                         pseudo_labels.shape_str() + " vs " + std::to_string(scores.size()) +
                         " scores");
    const std::vector<float> w = unsup_weights(scores, cfg);
    Tensor weights(w.size(), 1);
    for (size_t i = 0; i < w.size(); ++i) weights[i] = w[i];
    Var residual_norms = t.l2_norm_rowwise(t.sub(predictions, t.constant(pseudo_labels)));
    Var weighted = t.mul(residual_norms, t.constant(std::move(weights)));
    Var total = t.sum(weighted);
    if (cfg.unsup_reduction == Reduction::mean)
        total = t.scale(total, 1.0f / static_cast<float>(scores.size()));
    return total;
}

Var total_objective(Tape& t, Var loss_sup, Var loss_unsup, const TrainConfig& cfg) {
    return t.add(t.scale(loss_sup, cfg.weight_sup), t.scale(loss_unsup, cfg.weight_unsup));
}

// ---------------------------------------------------------------------------

TeacherResult train_teacher(const Dataset& labeled, const TrainConfig& cfg) {
    if (labeled.empty()) throw InvalidArgument("train_teacher: empty labeled dataset");
    Rng init_rng(Rng::mix_seed(cfg.seed, "teacher-init"));
    TeacherResult out{make_estimator(labeled.feature_width, cfg.hidden, cfg.d_enc, init_rng),
                      {}};
    NamedParams np = named_params(out.params);
    Adam adam(param_list(np), {cfg.lr_teacher, 0.9f, 0.999f, 1e-8f, cfg.weight_decay});

    std::vector<size_t> order(labeled.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 1; epoch <= cfg.teacher_epochs; ++epoch) {
        Rng erng(Rng::mix_seed(cfg.seed, "teacher-epoch", static_cast<uint64_t>(epoch)));
        erng.shuffle(order);
        float epoch_loss = 0.0f;
        size_t steps = 0;
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const size_t end = std::min(order.size(), start + cfg.batch_size);
            std::vector<size_t> idx(order.begin() + start, order.begin() + end);
            Tape t;
            Var preds = estimator_forward(t, out.params, t.constant(features_matrix(labeled, idx)));
            Var loss = supervised_loss(t, preds, labels_matrix(labeled, idx));
            const float lv = t.scalar_value(loss);
            if (!std::isfinite(lv)) throw DivergenceError("teacher", epoch);
            adam.zero_grad();
            t.backward(loss);
            adam.step();
            epoch_loss += lv;
            ++steps;
        }
        HistoryRecord rec;
        rec.epoch = epoch;
        rec.loss_sup = steps ? epoch_loss / static_cast<float>(steps) : 0.0f;
        out.history.records.push_back(rec);
    }
    return out;
}

PseudoLabelSet generate_pseudo_labels(GazeEstimatorParams& model, const Dataset& unlabeled,
                                      int epoch) {
    if (unlabeled.empty()) throw InvalidArgument("generate_pseudo_labels: empty dataset");
    std::vector<size_t> idx(unlabeled.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    const Tensor preds = estimator_predict(model, features_matrix(unlabeled, idx));
    PseudoLabelSet out;
    for (size_t i = 0; i < unlabeled.size(); ++i)
        out.entries[unlabeled.samples[i].id] = {gaze_from_row(preds, i), epoch};
    return out;
}

namespace {

void apply_pseudo_corruption(SslState& state, const TrainConfig& cfg) {
    if (cfg.pseudo_corrupt_rho <= 0.0f) return;
    CorruptionResult cr =
        corrupt_labels(state.pseudo, cfg.pseudo_corrupt_rho, cfg.pseudo_corrupt_min_deg,
                       Rng::mix_seed(cfg.seed, "pipeline-pseudo-corruption"));
    state.pseudo = std::move(cr.labels);
    state.corrupted_ids = std::move(cr.corrupted_ids);
}

}  // namespace

StepRecord ssl_step(SslState& state, const Dataset& labeled, const Dataset& unlabeled,
                    const PairedBatch& batch, CueProvider& cues, const PromptTemplate& prompt,
                    const TrainConfig& cfg, int epoch) {
    StepRecord rec;
    const size_t n_l = batch.labeled.size();
    const size_t n_u = batch.unlabeled.size();

    const Tensor feats_l = features_matrix(labeled, batch.labeled);
    const Tensor labels_l = labels_matrix(labeled, batch.labeled);
    const Tensor feats_u = features_matrix(unlabeled, batch.unlabeled);
    Tensor pseudo_u(n_u, 2);
    for (size_t i = 0; i < n_u; ++i) {
        const auto& e = state.pseudo.at(unlabeled.samples[batch.unlabeled[i]].id);
        pseudo_u.at(i, 0) = e.label.yaw;
        pseudo_u.at(i, 1) = e.label.pitch;
    }

    std::vector<float> scores_u(n_u, 1.0f);
    const bool uses_unlabeled = cfg.weight_unsup != 0.0f;
    if (uses_unlabeled) {
        // Detached student predictions for the similarity input.
        const Tensor student_on_l = estimator_predict(state.student, feats_l);
        const Tensor student_on_u = estimator_predict(state.student, feats_u);

        // (a)+(b): score labeled (c=1, ground truth) and unlabeled (c=0,
        // pseudo) on one tape and update the reward model.
        Tape rt;
        std::vector<Var> score_vars;
        std::vector<float> masks;
        score_vars.reserve(n_l + n_u);
        for (size_t i = 0; i < n_l; ++i) {
            const Sample& s = labeled.samples[batch.labeled[i]];
            score_vars.push_back(score_sample(rt, state.reward, cues.visual_cue(s),
                                              cues.text_cue(s, prompt), *s.label,
                                              gaze_from_row(student_on_l, i),
                                              cfg.confidence_variant));
            masks.push_back(1.0f);
        }
        for (size_t i = 0; i < n_u; ++i) {
            const Sample& s = unlabeled.samples[batch.unlabeled[i]];
            score_vars.push_back(score_sample(rt, state.reward, cues.visual_cue(s),
                                              cues.text_cue(s, prompt),
                                              gaze_from_row(pseudo_u, i),
                                              gaze_from_row(student_on_u, i),
                                              cfg.confidence_variant));
            masks.push_back(0.0f);
        }
        Var lg = reward_loss(rt, score_vars, masks, cfg.reward_reduction);
        rec.loss_reward = rt.scalar_value(lg);
        if (!std::isfinite(rec.loss_reward)) throw DivergenceError("ssl", epoch);
        state.reward_adam.zero_grad();
        rt.backward(lg);
        state.reward_adam.step();

        // (c): rescore the unlabeled half with the updated reward model.
        std::vector<ScoreRequest> requests;
        requests.reserve(n_u);
        for (size_t i = 0; i < n_u; ++i)
            requests.push_back({&unlabeled.samples[batch.unlabeled[i]],
                                gaze_from_row(pseudo_u, i), gaze_from_row(student_on_u, i)});
        const std::vector<SampleScore> scored =
            score_samples(state.reward, cues, prompt, requests, cfg.confidence_variant);
        for (size_t i = 0; i < n_u; ++i) scores_u[i] = scored[i].r;
    }

    size_t retained = 0;
    for (float r : scores_u)
        if (!cfg.filtering || r >= cfg.tau) ++retained;
    rec.retained_fraction = n_u ? static_cast<float>(retained) / static_cast<float>(n_u) : 0.0f;

    // Student update on the averaged objective; scores enter as constants.
    Tape st;
    Var preds_l = estimator_forward(st, state.student, st.constant(feats_l));
    Var ls = supervised_loss(st, preds_l, labels_l);
    rec.loss_sup = st.scalar_value(ls);
    Var objective;
    if (uses_unlabeled) {
        Var preds_u = estimator_forward(st, state.student, st.constant(feats_u));
        Var lu = unsupervised_loss(st, preds_u, pseudo_u, scores_u, cfg);
        rec.loss_unsup = st.scalar_value(lu);
        objective = total_objective(st, ls, lu, cfg);
    } else {
        objective = st.scale(ls, cfg.weight_sup);
    }
    if (!std::isfinite(rec.loss_sup) || !std::isfinite(rec.loss_unsup))
        throw DivergenceError("ssl", epoch);
    state.student_adam.zero_grad();
    st.backward(objective);
    state.student_adam.step();
    return rec;
}

bool refresh_teacher(SslState& state, const Dataset& unlabeled, int epoch,
                     const TrainConfig& cfg) {
    if (epoch < 1) throw InvalidArgument("refresh_teacher: epoch must be >= 1");
    if (!cfg.refresh_enabled || epoch % cfg.refresh_interval != 0) return false;
    state.teacher = clone(state.student);
    state.pseudo = generate_pseudo_labels(state.teacher, unlabeled, epoch);
    // The same noisy sources are re-corrupted after regeneration (fixed mask
    // per run seed), so the scorer's contrast signal survives refreshes.
    apply_pseudo_corruption(state, cfg);
    return true;
}

RunResult run_selftraining(const Dataset& labeled, const Dataset& unlabeled,
                           const TrainConfig& cfg, CueProvider& cues, const RunHooks& hooks,
                           const GazeEstimatorParams* initial_teacher) {
    cfg.validate();
    if (labeled.empty() || unlabeled.empty())
        throw InvalidArgument("run_selftraining: both datasets must be non-empty");

    RunResult out;

    // Phase i: teacher supervision.
    if (initial_teacher) {
        out.teacher = clone(*initial_teacher);
    } else {
        TeacherResult tr = train_teacher(labeled, cfg);
        out.teacher = std::move(tr.params);
        out.teacher_history = std::move(tr.history);
    }

    // Phase iii state. Teacher and student share the same starting weights
    // (the stand-in for a common pretrained backbone); the student is trained
    // from that shared init, not from the finished teacher.
    Rng reward_rng(Rng::mix_seed(cfg.seed, "reward-init"));
    Rng student_rng(Rng::mix_seed(cfg.seed, "teacher-init"));
    SslState state;
    state.teacher = clone(out.teacher);
    state.student = make_estimator(labeled.feature_width, cfg.hidden, cfg.d_enc, student_rng);
    state.reward = make_reward_model(cues.config(), cfg.d_model, cfg.hidden, reward_rng);
    state.student_adam = Adam(param_list(named_params(state.student)),
                              {cfg.lr_student, 0.9f, 0.999f, 1e-8f, cfg.weight_decay});
    state.reward_adam = Adam(param_list(named_params(state.reward)),
                             {cfg.lr_reward, 0.9f, 0.999f, 1e-8f, cfg.weight_decay});

    if (hooks.snapshot) hooks.snapshot("teacher", state);

    // Phase ii: pseudo-label generation.
    state.pseudo = generate_pseudo_labels(out.teacher, unlabeled, 0);
    apply_pseudo_corruption(state, cfg);
    if (hooks.snapshot) hooks.snapshot("pseudo", state);

    const PromptTemplate prompt;
    for (int epoch = 1; epoch <= cfg.ssl_epochs; ++epoch) {
        const auto batches = balanced_batches(labeled, unlabeled, cfg.batch_size, cfg.seed,
                                              static_cast<size_t>(epoch));
        HistoryRecord rec;
        rec.epoch = epoch;
        float sum_sup = 0, sum_unsup = 0, sum_reward = 0, sum_retained = 0;
        for (const PairedBatch& b : batches) {
            const StepRecord sr = ssl_step(state, labeled, unlabeled, b, cues, prompt, cfg, epoch);
            sum_sup += sr.loss_sup;
            sum_unsup += sr.loss_unsup;
            sum_reward += sr.loss_reward;
            sum_retained += sr.retained_fraction;
        }
        const float inv = batches.empty() ? 0.0f : 1.0f / static_cast<float>(batches.size());
        rec.loss_sup = sum_sup * inv;
        rec.loss_unsup = sum_unsup * inv;
        rec.loss_reward = sum_reward * inv;
        rec.retained_fraction = sum_retained * inv;
        if (hooks.eval) rec.val_error_deg = hooks.eval(state.student);
        out.ssl_history.records.push_back(rec);

        if (refresh_teacher(state, unlabeled, epoch, cfg) && hooks.snapshot)
            hooks.snapshot("refresh:" + std::to_string(epoch), state);
    }

    out.student = std::move(state.student);
    out.reward = std::move(state.reward);
    out.teacher = std::move(state.teacher);
    out.pseudo = std::move(state.pseudo);
    out.corrupted_ids = std::move(state.corrupted_ids);
    return out;
}

}  // namespace omnigaze
