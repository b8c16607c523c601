// Acceptance suite: runs every criterion at its stated tolerance and prints
// one pass/fail line per criterion. Exits nonzero if any criterion fails.

#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "omnigaze/checkpoint.hpp"
#include "omnigaze/errors.hpp"
#include "omnigaze/evalrep.hpp"
#include "omnigaze/kernels.hpp"
#include "omnigaze/pipeline.hpp"
#include "omnigaze/runconfig.hpp"
#include "omnigaze/tape.hpp"

using namespace omnigaze;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Check {
    bool ok = true;
    std::string detail;
    void require(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    }
    void note(const std::string& what) {
        if (!detail.empty()) detail += "; ";
        detail += what;
    }
};

std::string g_cli_path;
fs::path g_workdir;

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = g_cli_path + " " + args + " >" + log.string() + " 2>&1";
    return std::system(cmd.c_str());
}

// ---------------------------------------------------------------------- 1
void criterion_geometry(Check& c) {
    Rng rng(10001);
    constexpr float kPi = 3.14159265358979323846f;
    // Pitch stays a hair away from the poles: there yaw is unidentifiable and
    // the f32 quantization of the direction components amplifies as 1/cos.
    for (int i = 0; i < 10000; ++i) {
        SphericalGaze g{rng.uniform_f(-kPi + 1e-3f, kPi - 1e-3f),
                        rng.uniform_f(-kPi / 2 + 0.01f, kPi / 2 - 0.01f)};
        const DirectionVector v = to_direction(g);
        const float norm = std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z);
        c.require(std::fabs(norm - 1.0f) <= 1e-5f, "unit norm violated");
        const SphericalGaze back = to_spherical(v);
        c.require(std::fabs(back.yaw - g.yaw) <= 1e-5f &&
                      std::fabs(back.pitch - g.pitch) <= 1e-5f,
                  "round-trip exceeded 1e-5");
        SphericalGaze h{rng.uniform_f(-kPi, kPi),
                        rng.uniform_f(-kPi / 2 + 1e-4f, kPi / 2 - 1e-4f)};
        const DirectionVector w = to_direction(h);
        const float e_ab = angular_error(v, w).value;
        const float e_ba = angular_error(w, v).value;
        c.require(e_ab == e_ba, "angular error asymmetric");
        c.require(e_ab >= 0.0f && e_ab <= 180.0f, "angular error out of bounds");
        if (!c.ok) return;
    }
}

// ---------------------------------------------------------------------- 2
void criterion_gradients(Check& c) {
    Rng rng(10002);
    const float kTol = 1e-2f;
    const float h = 1e-3f;
    int instances = 0;

    // Central differences at h, cross-checked at h/2: where the two estimates
    // disagree the probe straddled a relu kink (finite differences are not
    // valid there) and the coordinate is excluded. Exclusions must stay rare.
    size_t checked_coords = 0, skipped_coords = 0;
    auto sweep = [&](std::vector<Tensor*> params, const std::function<float(bool)>& run,
                     const std::string& tag) {
        for (Tensor* p : params) p->zero_grad();
        run(true);
        for (Tensor* p : params) {
            const auto& analytic = p->grad();
            for (size_t i = 0; i < p->size(); ++i) {
                const float saved = (*p)[i];
                auto diff_at = [&](float step) {
                    (*p)[i] = saved + step;
                    const float up = run(false);
                    (*p)[i] = saved - step;
                    const float down = run(false);
                    (*p)[i] = saved;
                    return (up - down) / (2.0f * step);
                };
                const float numeric = diff_at(h);
                const float numeric_half = diff_at(h / 2.0f);
                const float agree_denom = std::max(1.0f, std::fabs(numeric));
                if (std::fabs(numeric - numeric_half) / agree_denom > 0.002f) {
                    ++skipped_coords;
                    continue;
                }
                ++checked_coords;
                const float denom =
                    std::max(1.0f, std::max(std::fabs(analytic[i]), std::fabs(numeric)));
                if (std::fabs(analytic[i] - numeric) / denom >= kTol) {
                    c.require(false, tag + ": rel err >= 1e-2");
                    return;
                }
            }
        }
        ++instances;
    };

    auto rand_small = [&](size_t r, size_t cdim) {
        Tensor t(r, cdim);
        for (size_t i = 0; i < t.size(); ++i) t[i] = rng.normal_f();
        t.requires_grad = true;
        return t;
    };
    // Varying per-coordinate weights; smooth scalarization keeps the oracle
    // valid (an l2-norm readout has a cone at zero rows whose curvature blows
    // up the finite-difference truncation error).
    auto weight_for = [](size_t r, size_t cdim) {
        Tensor w(r, cdim);
        for (size_t i = 0; i < w.size(); ++i)
            w[i] = 0.15f + 0.2f * static_cast<float>((i * 7) % 5);
        return w;
    };

    for (int trial = 0; trial < 20 && c.ok; ++trial) {
        const size_t r = 1 + rng.below(6), k = 1 + rng.below(6), n = 2 + rng.below(6);

        {  // matmul + add_row + relu + sigmoid chain
            Tensor a = rand_small(r, k), b = rand_small(k, n), bias = rand_small(1, n);
            sweep({&a, &b, &bias},
                  [&](bool grad) {
                      Tape t;
                      Var out = t.sigmoid(
                          t.relu(t.add_row(t.matmul(t.param(a), t.param(b)), t.param(bias))));
                      Var l = t.sum(out);
                      if (grad) t.backward(l);
                      return t.scalar_value(l);
                  },
                  "matmul/add_row/relu/sigmoid");
        }
        {  // softmax + mul + mean_pool
            Tensor x = rand_small(r, n);
            Tensor w(r, n);
            for (size_t i = 0; i < w.size(); ++i) w[i] = 0.1f + 0.2f * static_cast<float>(i % 4);
            sweep({&x},
                  [&](bool grad) {
                      Tape t;
                      Var l = t.sum(t.mean_pool(t.mul(t.softmax(t.param(x), 1), t.constant(w)), 0));
                      if (grad) t.backward(l);
                      return t.scalar_value(l);
                  },
                  "softmax/mean_pool");
        }
        {  // layer_norm + log/clamp of sigmoid
            Tensor x = rand_small(r, n), g = rand_small(1, n), b = rand_small(1, n);
            Tensor w = weight_for(r, n);
            sweep({&x, &g, &b},
                  [&](bool grad) {
                      Tape t;
                      Var ln = t.layer_norm(t.param(x), t.param(g), t.param(b));
                      Var l = t.sum(t.mul(
                          t.log(t.clamp(t.sigmoid(ln), 1e-7f, 1.0f - 1e-7f)), t.constant(w)));
                      if (grad) t.backward(l);
                      return t.scalar_value(l);
                  },
                  "layer_norm/log");
        }
        {  // l2_norm_rowwise primitive, inputs bounded away from the cone
            Tensor x = rand_small(r, n);
            for (size_t row = 0; row < r; ++row) {
                float norm2 = 0.0f;
                for (size_t j = 0; j < n; ++j) norm2 += x.at(row, j) * x.at(row, j);
                if (norm2 < 0.25f) x.at(row, 0) += 1.0f;
            }
            sweep({&x},
                  [&](bool grad) {
                      Tape t;
                      Var l = t.sum(t.l2_norm_rowwise(t.param(x)));
                      if (grad) t.backward(l);
                      return t.scalar_value(l);
                  },
                  "l2_norm_rowwise");
        }
        {  // MLP composite
            Rng mr(rng.next_u64());
            Mlp mlp = make_mlp({k, 2 + rng.below(5), 2}, mr);
            Tensor x = rand_small(r, k);
            std::vector<Tensor*> params = {&x};
            for (auto& l : mlp.layers) {
                params.push_back(&l.w);
                params.push_back(&l.b);
            }
            Tensor w = weight_for(r, 2);
            sweep(params,
                  [&](bool grad) {
                      Tape t;
                      Var l = t.sum(t.mul(mlp_forward(t, mlp, t.param(x)), t.constant(w)));
                      if (grad) t.backward(l);
                      return t.scalar_value(l);
                  },
                  "mlp");
        }
        {  // cross-attention composite
            Rng ar(rng.next_u64());
            CrossAttentionParams att = make_cross_attention(k, k, 4, ar);
            Tensor q = rand_small(1 + rng.below(3), k), kv = rand_small(1 + rng.below(4), k);
            Tensor w = weight_for(q.rows(), 4);
            sweep({&q, &kv, &att.w_q, &att.w_k, &att.w_v, &att.w_o},
                  [&](bool grad) {
                      Tape t;
                      Var l = t.sum(t.mul(cross_attention(t, att, t.param(q), t.param(kv)),
                                          t.constant(w)));
                      if (grad) t.backward(l);
                      return t.scalar_value(l);
                  },
                  "cross_attention");
        }
        {  // semantic representation composite
            Rng rr(rng.next_u64());
            CueProviderConfig cues;
            cues.patch_count = 1 + rng.below(3);
            cues.d_v = 3;
            cues.n_t = 1 + rng.below(3);
            cues.d_t = 3;
            RewardModelParams rm = make_reward_model(cues, 4, 4, rr);
            VisualCue visual{rand_small(cues.patch_count + 1, cues.d_v)};
            TextCue text{rand_small(cues.n_t, cues.d_t)};
            auto params = param_list(named_params(rm));
            Tensor w = weight_for(1, 4);
            sweep(params,
                  [&](bool grad) {
                      Tape t;
                      Var l = t.sum(t.mul(semantic_representation(t, rm, visual, text),
                                          t.constant(w)));
                      if (grad) t.backward(l);
                      return t.scalar_value(l);
                  },
                  "semantic_representation");
        }
        {  // full reward scorer composite (cues through to the final score)
            Rng rr(rng.next_u64());
            CueProviderConfig cues;
            cues.patch_count = 1 + rng.below(3);
            cues.d_v = 3;
            cues.n_t = 1 + rng.below(3);
            cues.d_t = 3;
            RewardModelParams rm = make_reward_model(cues, 4, 4, rr);
            VisualCue visual{rand_small(cues.patch_count + 1, cues.d_v)};
            TextCue text{rand_small(cues.n_t, cues.d_t)};
            const SphericalGaze label{0.3f, -0.1f}, pred{0.25f, 0.0f};
            auto params = param_list(named_params(rm));
            sweep(params,
                  [&](bool grad) {
                      Tape t;
                      Var r = score_sample(t, rm, visual, text, label, pred,
                                           ConfidenceVariant::full);
                      Var l = t.sum(r);
                      if (grad) t.backward(l);
                      return t.scalar_value(l);
                  },
                  "reward_scorer");
        }
    }
    c.note(std::to_string(instances) + " instances, " + std::to_string(checked_coords) +
           " coordinates checked, " + std::to_string(skipped_coords) + " kink-adjacent skipped");
    c.require(skipped_coords * 20 < checked_coords,
              "more than 5% of coordinates skipped as kink-adjacent");
}

// ---------------------------------------------------------------------- 3
void criterion_loss_semantics(Check& c) {
    // angular loss: 3-4-5 residual
    {
        Tape t;
        Var p = t.constant(Tensor::from_rows({{0.3f, 0.4f}}));
        const float l = t.scalar_value(supervised_loss(t, p, Tensor(1, 2)));
        c.require(std::fabs(l - 0.5f) <= 1e-6f, "3-4-5 case != 0.5");
        Var p2 = t.constant(Tensor::from_rows({{0.75f, 1.0f}}));
        c.require(t.scalar_value(supervised_loss(t, p2, Tensor(1, 2))) == 1.25f,
                  "exact 3-4-5 (scaled) not bitwise 1.25");
    }
    // score BCE: -ln 0.5
    {
        Tape t;
        std::vector<Var> scores = {t.constant(Tensor::scalar(0.5f))};
        std::vector<float> pos = {1.0f}, neg = {0.0f};
        c.require(std::fabs(t.scalar_value(reward_loss(t, scores, pos)) - 0.693147f) <= 1e-5f,
                  "BCE(c=1, 0.5) != 0.693147");
        c.require(std::fabs(t.scalar_value(reward_loss(t, scores, neg)) - 0.693147f) <= 1e-5f,
                  "BCE(c=0, 0.5) != 0.693147");
    }
    // threshold-filtering exactness on gradient buffers
    {
        Rng rng(10003);
        GazeEstimatorParams student = make_estimator(6, 8, 8, rng);
        TrainConfig cfg;
        Tensor feats(2, 6), pseudo(2, 2);
        for (size_t i = 0; i < feats.size(); ++i) feats[i] = rng.normal_f();
        for (size_t i = 0; i < pseudo.size(); ++i) pseudo[i] = rng.normal_f();
        std::vector<float> scores = {0.45f, 0.9f};  // first sample filtered at tau=0.5

        auto grads = [&](float yaw0) {
            Tensor p = pseudo;
            p.at(0, 0) = yaw0;
            for (auto& [name, t] : named_params(student)) t->zero_grad();
            Tape t;
            Var preds = estimator_forward(t, student, t.constant(feats));
            t.backward(unsupervised_loss(t, preds, p, scores, cfg));
            std::vector<float> all;
            for (auto& [name, tt] : named_params(student))
                all.insert(all.end(), tt->grad().begin(), tt->grad().end());
            return all;
        };
        c.require(grads(0.3f) == grads(-0.8f),
                  "filtered sample's label leaked into gradients");

        std::vector<float> lone = {0.49f};
        Tensor f1(1, 6), p1(1, 2);
        for (size_t i = 0; i < 6; ++i) f1[i] = feats[i];
        for (auto& [name, t] : named_params(student)) t->zero_grad();
        Tape t;
        Var preds = estimator_forward(t, student, t.constant(f1));
        Var lu = unsupervised_loss(t, preds, p1, lone, cfg);
        c.require(t.scalar_value(lu) == 0.0f, "filtered-only batch loss not exactly 0");
        t.backward(lu);
        for (auto& [name, tt] : named_params(student))
            for (float g : tt->grad())
                c.require(g == 0.0f, "filtered-only batch left nonzero gradient");
    }
    // sum/mean cross-check against a scalar loop
    {
        Rng rng(10004);
        TrainConfig cfg;
        for (int trial = 0; trial < 10; ++trial) {
            const size_t n = 1 + rng.below(12);
            Tensor preds_t(n, 2), pseudo(n, 2);
            std::vector<float> scores;
            for (size_t i = 0; i < n; ++i) {
                preds_t.at(i, 0) = rng.normal_f();
                preds_t.at(i, 1) = rng.normal_f();
                pseudo.at(i, 0) = rng.normal_f();
                pseudo.at(i, 1) = rng.normal_f();
                scores.push_back(rng.uniform_f(0.0f, 1.0f));
            }
            double oracle_sum = 0.0;
            for (size_t i = 0; i < n; ++i) {
                if (scores[i] < cfg.tau) continue;
                const double dy = preds_t.at(i, 0) - pseudo.at(i, 0);
                const double dp = preds_t.at(i, 1) - pseudo.at(i, 1);
                oracle_sum += scores[i] * std::sqrt(dy * dy + dp * dp);
            }
            Tape t;
            TrainConfig sum_cfg = cfg;
            sum_cfg.unsup_reduction = Reduction::sum;
            const float got_sum = t.scalar_value(
                unsupervised_loss(t, t.constant(preds_t), pseudo, scores, sum_cfg));
            TrainConfig mean_cfg = cfg;
            mean_cfg.unsup_reduction = Reduction::mean;
            const float got_mean = t.scalar_value(
                unsupervised_loss(t, t.constant(preds_t), pseudo, scores, mean_cfg));
            c.require(std::fabs(got_sum - oracle_sum) <= 1e-6 * std::max(1.0, oracle_sum),
                      "sum reduction deviates from scalar loop");
            c.require(std::fabs(got_mean - oracle_sum / n) <= 1e-6 * std::max(1.0, oracle_sum),
                      "mean reduction deviates from scalar loop");
        }
    }
}

// shared ablation machinery for criteria 5-8 ------------------------------
//
// Two harnesses, both with spec-default hyperparameters and 3 seeds:
//  - reference (500 labeled / 2000 unlabeled): the component-ordering task.
//    The teacher is strong there, so corruption is the dominant label noise
//    and the student-similarity cue separates it; criteria 5 and 7 read from
//    this table.
//  - scarce (100 labeled / 3000 unlabeled): the teacher is weak and its
//    pseudo-label quality spread is wide, which is the regime where the
//    filtering/reweighting decomposition and the periodic refresh express
//    themselves; criteria 6 and 8 read from this table.

struct AblationOutcome {
    std::map<std::string, std::vector<float>> errors;  // config -> per-seed mean_deg
    double seconds = 0.0;
};

float mean_of(const std::vector<float>& v) {
    double s = 0;
    for (float x : v) s += x;
    return static_cast<float>(s / v.size());
}

float sd_of(const std::vector<float>& v) {
    const double m = mean_of(v);
    double ss = 0;
    for (float x : v) ss += (x - m) * (x - m);
    return static_cast<float>(std::sqrt(ss / (v.size() - 1)));
}

const std::vector<uint64_t> kSeeds = {1, 2, 3};
constexpr uint64_t kDataSeed = 20240808;

AblationCell cell_filtering_only() {
    AblationCell c;
    c.name = "filtering";
    c.reweighting = false;
    return c;
}
AblationCell cell_reweighting_only() {
    AblationCell c;
    c.name = "reweighting";
    c.filtering = false;
    return c;
}
AblationCell cell_rhat_only() {
    AblationCell c;
    c.name = "rhat_only";
    c.confidence_variant = ConfidenceVariant::initial_only;
    return c;
}
AblationCell cell_k1() {
    AblationCell c;
    c.name = "k1";
    c.refresh_interval = 1;
    return c;
}
AblationCell cell_norefresh() {
    AblationCell c;
    c.name = "norefresh";
    c.refresh_enabled = false;
    return c;
}

AblationOutcome run_harness(size_t n_labeled, size_t n_unlabeled,
                            const std::vector<AblationCell>& cells) {
    SyntheticSpec spec;
    SyntheticBundle bundle = generate_synthetic(spec, n_labeled, n_unlabeled, kDataSeed);
    CueProviderConfig cue_cfg;
    SyntheticCueProvider base_provider(cue_cfg, spec, kDataSeed, kDataSeed);
    CachingCueProvider provider(base_provider);
    TrainConfig base;  // spec defaults: 30/30 epochs, batch 64, tau 0.5, K 10

    AblationOutcome outcome;
    const auto t0 = std::chrono::steady_clock::now();
    AblationTable table = run_ablation(cells, bundle.labeled, bundle.unlabeled,
                                       bundle.unlabeled_oracle, base, kSeeds, provider);
    for (const auto& row : table.rows) {
        if (row.failed) throw Error("ablation cell " + row.config + " failed: " + row.error);
        outcome.errors[row.config].push_back(row.mean_deg);
    }
    outcome.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return outcome;
}

const AblationOutcome& reference_ablation() {
    static AblationOutcome outcome = [] {
        std::vector<AblationCell> cells = default_grid();  // baseline, nofilter, full
        cells.push_back(cell_rhat_only());
        return run_harness(500, 2000, cells);
    }();
    return outcome;
}

const AblationOutcome& scarce_ablation() {
    static AblationOutcome outcome = run_harness(
        100, 3000,
        {default_grid()[1], default_grid()[2], cell_filtering_only(), cell_reweighting_only(),
         cell_k1(), cell_norefresh()});
    return outcome;
}

std::string fmt_table(const AblationOutcome& o) {
    std::ostringstream ss;
    ss.setf(std::ios::fixed);
    ss.precision(2);
    for (const auto& [name, errs] : o.errors) {
        ss << name << "=" << mean_of(errs);
        if (errs.size() > 1) ss << "+-" << sd_of(errs);
        ss << " ";
    }
    return ss.str();
}

// ---------------------------------------------------------------------- 4
void criterion_discrimination(Check& c) {
    SyntheticSpec spec;
    const size_t n_labeled = 500, n_train_u = 2000, n_held_u = 500;
    SyntheticBundle bundle =
        generate_synthetic(spec, n_labeled, n_train_u + n_held_u, kDataSeed + 1);

    Dataset train_u = bundle.unlabeled;
    train_u.samples.resize(n_train_u);
    Dataset held_u = bundle.unlabeled;
    held_u.samples.erase(held_u.samples.begin(), held_u.samples.begin() + n_train_u);

    CueProviderConfig cue_cfg;
    SyntheticCueProvider base_provider(cue_cfg, spec, kDataSeed + 1, kDataSeed + 1);
    CachingCueProvider provider(base_provider);

    for (uint64_t seed : kSeeds) {
        TrainConfig cfg;  // spec defaults; corruption rho 0.3 at >= 30 degrees
        cfg.seed = seed;
        RunResult res = run_selftraining(bundle.labeled, train_u, cfg, provider);

        // held-out pseudo-labels from the final teacher, corrupted 30%
        PseudoLabelSet held_pseudo = generate_pseudo_labels(res.teacher, held_u, 0);
        CorruptionResult corrupted =
            corrupt_labels(held_pseudo, 0.3f, 30.0f, Rng::mix_seed(seed, "heldout-corruption"));

        std::vector<size_t> idx(held_u.size());
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        const Tensor preds = estimator_predict(res.student, features_matrix(held_u, idx));
        std::vector<ScoreRequest> reqs;
        std::vector<bool> clean;
        for (size_t i = 0; i < held_u.size(); ++i) {
            const Sample& s = held_u.samples[i];
            reqs.push_back(
                {&s, corrupted.labels.at(s.id).label, gaze_from_row(preds, i)});
            clean.push_back(!corrupted.corrupted_ids.count(s.id));
        }
        const PromptTemplate prompt;
        const auto scores =
            score_samples(res.reward, provider, prompt, reqs, ConfidenceVariant::full);
        std::vector<float> rs;
        double mean_clean = 0, mean_corrupt = 0;
        size_t n_clean = 0, n_corrupt = 0;
        for (size_t i = 0; i < scores.size(); ++i) {
            rs.push_back(scores[i].r);
            if (clean[i]) {
                mean_clean += scores[i].r;
                ++n_clean;
            } else {
                mean_corrupt += scores[i].r;
                ++n_corrupt;
            }
        }
        const double auc = discrimination_auc(rs, clean);

        // ground-truth-labeled samples must outscore corrupted pseudo-labels
        std::vector<ScoreRequest> labeled_reqs;
        std::vector<size_t> lidx(bundle.labeled.size());
        for (size_t i = 0; i < lidx.size(); ++i) lidx[i] = i;
        const Tensor lpreds = estimator_predict(res.student, features_matrix(bundle.labeled, lidx));
        for (size_t i = 0; i < bundle.labeled.size(); ++i)
            labeled_reqs.push_back({&bundle.labeled.samples[i], *bundle.labeled.samples[i].label,
                                    gaze_from_row(lpreds, i)});
        const auto lscores =
            score_samples(res.reward, provider, prompt, labeled_reqs, ConfidenceVariant::full);
        double mean_labeled = 0;
        for (const auto& s : lscores) mean_labeled += s.r;
        mean_labeled /= static_cast<double>(lscores.size());

        std::ostringstream ss;
        ss.precision(3);
        ss << "seed " << seed << ": AUC=" << auc << " (r labeled " << mean_labeled << ", clean "
           << mean_clean / n_clean << ", corrupt " << mean_corrupt / n_corrupt << ")";
        c.note(ss.str());
        c.require(auc >= 0.8, "AUC below 0.8 for seed " + std::to_string(seed));
        c.require(mean_labeled > mean_corrupt / n_corrupt,
                  "mean r on labeled does not exceed corrupted pseudo-labels");
    }
}

// ---------------------------------------------------------------------- 5
void criterion_ablation_ordering(Check& c) {
    const AblationOutcome& o = reference_ablation();
    const float full = mean_of(o.errors.at("full"));
    const float nofilter = mean_of(o.errors.at("nofilter"));
    const float baseline = mean_of(o.errors.at("baseline"));
    c.note("reference 500/2000: " + fmt_table(o));
    {
        std::ostringstream ss;
        ss.precision(1);
        ss << std::fixed << o.seconds << "s";
        c.note(ss.str());
    }
    c.require(full < nofilter, "error(full) !< error(nofilter)");
    c.require(nofilter < baseline, "error(nofilter) !< error(baseline)");
    c.require(nofilter - full > 0.2f, "full-vs-nofilter gap <= 0.2 deg");
    c.require(baseline - nofilter > 0.2f, "nofilter-vs-baseline gap <= 0.2 deg");
    c.require(o.seconds < 900.0, "runtime >= 15 min");
}

// ---------------------------------------------------------------------- 6
void criterion_filter_reweight(Check& c) {
    const AblationOutcome& o = scarce_ablation();
    const float full = mean_of(o.errors.at("full"));
    const float nofilter = mean_of(o.errors.at("nofilter"));
    const float filtering = mean_of(o.errors.at("filtering"));
    const float reweighting = mean_of(o.errors.at("reweighting"));
    c.note("scarce 100/3000: " + fmt_table(o));
    c.require(filtering < nofilter, "filtering-only !< nofilter");
    c.require(reweighting < nofilter, "reweighting-only !< nofilter");
    c.require(full < filtering, "full !< filtering-only");
    c.require(full < reweighting, "full !< reweighting-only");
}

// ---------------------------------------------------------------------- 7
void criterion_confidence_variant(Check& c) {
    const AblationOutcome& o = reference_ablation();
    const float full = mean_of(o.errors.at("full"));
    const float rhat = mean_of(o.errors.at("rhat_only"));
    std::ostringstream ss;
    ss.precision(3);
    ss << "reference 500/2000: r=" << full << " rhat_only=" << rhat;
    c.note(ss.str());
    c.require(full <= rhat, "full confidence r worse than r_hat-only");
}

// ---------------------------------------------------------------------- 8
void criterion_refresh_strategy(Check& c) {
    const AblationOutcome& o = scarce_ablation();
    const float k10 = mean_of(o.errors.at("full"));  // full uses K = 10
    const float nore = mean_of(o.errors.at("norefresh"));
    const float sd_k1 = sd_of(o.errors.at("k1"));
    const float sd_k10 = sd_of(o.errors.at("full"));
    const float sd_nore = sd_of(o.errors.at("norefresh"));
    std::ostringstream ss;
    ss.precision(3);
    ss << "scarce 100/3000: K10=" << k10 << " norefresh=" << nore << " K1="
       << mean_of(o.errors.at("k1")) << " sd(K1)=" << sd_k1 << " sd(K10)=" << sd_k10
       << " sd(none)=" << sd_nore;
    c.note(ss.str());
    c.require(k10 <= nore, "K=10 worse than no-refresh");
    if (sd_k1 >= sd_k10 && sd_k1 >= sd_nore)
        c.note("K=1 has the largest cross-seed variance");
    else
        c.note("exception: K=1 variance not the largest (data above)");
}

// ---------------------------------------------------------------------- 9
void criterion_determinism(Check& c) {
    const fs::path dir = g_workdir / "determinism";
    fs::create_directories(dir);

    json cfg;
    cfg["train"]["teacher_epochs"] = 5;
    cfg["train"]["ssl_epochs"] = 4;
    cfg["train"]["batch_size"] = 32;
    cfg["train"]["seed"] = 11;
    cfg["data_seed"] = 500;
    {
        std::ofstream out(dir / "config.json");
        out << cfg.dump(2);
    }

    int rc = run_cli("--config " + (dir / "config.json").string() + " datagen --out " +
                         (dir / "data").string() + " --n-labeled 120 --n-unlabeled 200 --seed 500",
                     dir / "datagen.log");
    c.require(rc == 0, "datagen exited nonzero");
    if (!c.ok) return;

    for (const char* run : {"r1", "r2"}) {
        rc = run_cli("--config " + (dir / "config.json").string() + " train-ssl --data " +
                         (dir / "data").string() + " --out " + (dir / run).string(),
                     dir / (std::string(run) + ".log"));
        c.require(rc == 0, std::string("train-ssl ") + run + " exited nonzero");
        if (!c.ok) return;
    }

    c.require(slurp(dir / "r1" / "history.json") == slurp(dir / "r2" / "history.json"),
              "history JSON differs between identical runs");
    for (const char* f : {"student.ckpt", "reward.ckpt", "teacher.ckpt"})
        c.require(slurp(dir / "r1" / f) == slurp(dir / "r2" / f),
                  std::string(f) + " differs between identical runs");

    // checkpoint load reproduces predictions bitwise
    GazeEstimatorParams a = load_estimator((dir / "r1" / "student.ckpt").string());
    GazeEstimatorParams b = load_estimator((dir / "r2" / "student.ckpt").string());
    Dataset oracle = load_jsonl((dir / "data" / "unlabeled.oracle.jsonl").string());
    std::vector<size_t> idx(oracle.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    const Tensor pa = estimator_predict(a, features_matrix(oracle, idx));
    const Tensor pb = estimator_predict(b, features_matrix(oracle, idx));
    c.require(std::memcmp(pa.data(), pb.data(), pa.size() * sizeof(float)) == 0,
              "loaded checkpoints predict differently");

    // and the recorded eval matches a fresh in-process evaluation
    json eval = json::parse(slurp(dir / "r1" / "eval.json"));
    EvalReport rep = evaluate(a, oracle);
    c.require(eval["mean_deg"].get<float>() == rep.mean_deg,
              "eval.json mean_deg does not match reloaded model");
}

// --------------------------------------------------------------------- 10
void criterion_remote_provider(Check& c) {
    std::vector<std::string> log;
    std::mutex log_mu;
    std::atomic<int> fail_budget{0};

    httplib::Server server;
    server.Post("/embed", [&](const httplib::Request& req, httplib::Response& res) {
        json body = json::parse(req.body);
        {
            std::lock_guard<std::mutex> lock(log_mu);
            log.push_back(body["kind"].get<std::string>() + ":" +
                          body["id"].get<std::string>());
        }
        if (fail_budget.fetch_sub(1) > 0) {
            res.status = 500;
            res.set_content("{}", "application/json");
            return;
        }
        const size_t dim = body["kind"] == "visual" ? 9 * 16 : 4 * 16;
        json reply;
        reply["id"] = body["id"];
        json emb = json::array();
        for (size_t i = 0; i < dim; ++i) emb.push_back(0.5f - 0.01f * static_cast<float>(i % 50));
        reply["embedding"] = std::move(emb);
        res.set_content(reply.dump(), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    CueProviderConfig cfg;
    cfg.mode = CueProviderConfig::Mode::remote;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port);
    cfg.backoff_ms = {1, 1, 1};

    Sample s;
    s.id = "acc-1";
    s.features = {0.5f, -0.5f, 1.0f};
    const PromptTemplate prompt;

    {  // round-trip
        RemoteCueProvider provider(cfg);
        VisualCue v = provider.visual_cue(s);
        c.require(v.tokens.rows() == 9 && v.tokens.cols() == 16, "visual cue shape wrong");
        c.require(v.tokens[0] == 0.5f, "embedding payload not round-tripped");
        TextCue tc = provider.text_cue(s, prompt);
        c.require(tc.embedding.rows() == 4 && tc.embedding.cols() == 16, "text cue shape wrong");
        {
            std::lock_guard<std::mutex> lock(log_mu);
            c.require(log.size() == 2, "expected exactly 2 requests in the log");
            c.require(log[0] == "visual:acc-1", "request log kind/id mismatch");
        }
    }

    {  // dimension mismatch rejection: text dim wrong for visual-sized config
        CueProviderConfig wrong = cfg;
        wrong.d_v = 7;  // server returns 9*16 floats; provider expects 9*7
        RemoteCueProvider provider(wrong);
        bool threw = false;
        try {
            provider.visual_cue(s);
        } catch (const ProtocolError&) {
            threw = true;
        }
        c.require(threw, "dimension mismatch not rejected");
    }

    {  // retry: two failures then success; the log shows 3 attempts
        {
            std::lock_guard<std::mutex> lock(log_mu);
            log.clear();
        }
        fail_budget.store(2);
        RemoteCueProvider provider(cfg);
        Sample s2;
        s2.id = "acc-retry";
        s2.features = {1.0f};
        VisualCue v = provider.visual_cue(s2);
        c.require(v.tokens.size() == 9 * 16, "retried request did not succeed");
        {
            std::lock_guard<std::mutex> lock(log_mu);
            c.require(log.size() == 3, "expected 3 attempts in the request log, saw " +
                                           std::to_string(log.size()));
        }
    }

    server.stop();
    server_thread.join();
}

struct Criterion {
    int id;
    std::string name;
    std::function<void(Check&)> run;
};

}  // namespace

int main(int argc, char** argv) {
    for (int i = 1; i + 1 < argc; i += 2)
        if (std::string(argv[i]) == "--cli") g_cli_path = argv[i + 1];
    if (g_cli_path.empty()) {
        std::cerr << "usage: acceptance --cli <path-to-omnigaze-binary>\n";
        return 2;
    }
    g_workdir = fs::temp_directory_path() /
                ("omnigaze_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(g_workdir);

    std::vector<Criterion> criteria = {
        {1, "geometry suite (10k random gazes)", criterion_geometry},
        {2, "gradient suite (finite-difference oracle)", criterion_gradients},
        {3, "loss semantics (angular/BCE/filtering + reductions)", criterion_loss_semantics},
        {4, "reward discrimination AUC >= 0.8 (3 seeds)", criterion_discrimination},
        {5, "ablation ordering full < nofilter < baseline", criterion_ablation_ordering},
        {6, "filtering/reweighting decomposition", criterion_filter_reweight},
        {7, "confidence-score variant r <= r_hat", criterion_confidence_variant},
        {8, "refresh strategy K=10 vs none vs K=1", criterion_refresh_strategy},
        {9, "determinism and checkpoint persistence", criterion_determinism},
        {10, "remote-provider contract (mock server)", criterion_remote_provider},
    };

    int failures = 0;
    for (auto& cr : criteria) {
        Check check;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            cr.run(check);
        } catch (const std::exception& e) {
            check.require(false, std::string("exception: ") + e.what());
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::ostringstream line;
        line << (check.ok ? "[PASS]" : "[FAIL]") << " criterion " << cr.id << ": " << cr.name
             << " (" << std::fixed << std::setprecision(1) << secs << "s)";
        if (!check.detail.empty()) line << " -- " << check.detail;
        std::cout << line.str() << std::endl;
        if (!check.ok) ++failures;
    }

    fs::remove_all(g_workdir);
    if (failures) {
        std::cout << failures << " criterion(s) failed" << std::endl;
        return 1;
    }
    std::cout << "all criteria passed" << std::endl;
    return 0;
}
