// omnigaze: datagen / train-teacher / pseudo-label / train-ssl / eval /
// score / ablate. Exit codes: 0 success, 2 config error, 3 I/O error,
// 4 training divergence.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <json.hpp>

#include "omnigaze/checkpoint.hpp"
#include "omnigaze/errors.hpp"
#include "omnigaze/evalrep.hpp"
#include "omnigaze/pipeline.hpp"
#include "omnigaze/runconfig.hpp"

using namespace omnigaze;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CommonOpts {
    std::string config_path;
    std::optional<uint64_t> seed_flag;
};

// Precedence: CLI flag > env var > config file > built-in defaults.
RunConfig resolve_config(const CommonOpts& opts) {
    RunConfig cfg;
    if (!opts.config_path.empty()) cfg = load_run_config(opts.config_path);
    apply_env_overrides(cfg);
    if (opts.seed_flag) cfg.train.seed = *opts.seed_flag;
    cfg.validate();
    return cfg;
}

json history_to_json(const TrainHistory& h) {
    json arr = json::array();
    for (const auto& r : h.records) {
        json j;
        j["epoch"] = r.epoch;
        j["loss_sup"] = r.loss_sup;
        j["loss_unsup"] = r.loss_unsup;
        j["loss_reward"] = r.loss_reward;
        j["retained_fraction"] = r.retained_fraction;
        if (r.val_error_deg) j["val_error_deg"] = *r.val_error_deg;
        arr.push_back(std::move(j));
    }
    return arr;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw IoError("write failed for '" + path + "'");
}

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    ~Timer() {
        const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - start)
                            .count();
        std::cerr << "elapsed: " << ms << " ms\n";
    }
};

int run_datagen(const CommonOpts& common, const std::string& spec_path, const std::string& out_dir,
                size_t n_labeled, size_t n_unlabeled, std::optional<uint64_t> seed) {
    Timer timer;
    RunConfig cfg = resolve_config(common);
    if (!spec_path.empty()) {
        std::ifstream in(spec_path);
        if (!in) throw IoError("cannot open spec '" + spec_path + "'");
        json j;
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            throw ConfigError("spec '" + spec_path + "': " + e.what());
        }
        json wrapped;
        wrapped["synthetic"] = j;
        cfg.synth = parse_run_config(wrapped).synth;
    }
    const uint64_t s = seed.value_or(cfg.data_seed);
    fs::create_directories(out_dir);
    SyntheticBundle bundle = generate_synthetic(cfg.synth, n_labeled, n_unlabeled, s);
    save_jsonl(bundle.labeled, out_dir + "/labeled.jsonl");
    save_jsonl(bundle.unlabeled, out_dir + "/unlabeled.jsonl");
    save_jsonl(bundle.unlabeled_oracle, out_dir + "/unlabeled.oracle.jsonl");
    std::cout << "labeled: " << bundle.labeled.size() << "\n";
    std::cout << "unlabeled: " << bundle.unlabeled.size() << "\n";
    return 0;
}

std::unique_ptr<CueProvider> provider_for(const RunConfig& cfg) {
    return make_cue_provider(cfg.cues, cfg.synth, cfg.data_seed, cfg.data_seed);
}

int run_train_teacher(const CommonOpts& common, const std::string& data_dir,
                      const std::string& out_ckpt) {
    Timer timer;
    RunConfig cfg = resolve_config(common);
    Dataset labeled = load_jsonl(data_dir + "/labeled.jsonl");
    labeled.validate();
    TeacherResult res = train_teacher(labeled, cfg.train);
    save_estimator(out_ckpt, res.params, config_hash(cfg), cfg.train.teacher_epochs);
    write_text(out_ckpt + ".history.json", history_to_json(res.history).dump(2) + "\n");
    std::cout << "teacher checkpoint: " << out_ckpt << "\n";
    return 0;
}

int run_pseudo_label(const std::string& teacher_ckpt, const std::string& unlabeled_path,
                     const std::string& out_path) {
    Timer timer;
    GazeEstimatorParams teacher = load_estimator(teacher_ckpt);
    Dataset unlabeled = load_jsonl(unlabeled_path);
    unlabeled.validate();
    PseudoLabelSet pseudo = generate_pseudo_labels(teacher, unlabeled, 0);
    std::ofstream out(out_path);
    if (!out) throw IoError("cannot open '" + out_path + "' for writing");
    for (const auto& s : unlabeled.samples) {
        const auto& e = pseudo.at(s.id);
        json j;
        j["id"] = s.id;
        j["yaw"] = e.label.yaw;
        j["pitch"] = e.label.pitch;
        out << j.dump() << "\n";
    }
    std::cout << "pseudo-labels: " << pseudo.size() << "\n";
    return 0;
}

int run_train_ssl(const CommonOpts& common, const std::string& data_dir,
                  const std::string& teacher_ckpt, const std::string& out_dir) {
    Timer timer;
    RunConfig cfg = resolve_config(common);
    Dataset labeled = load_jsonl(data_dir + "/labeled.jsonl");
    Dataset unlabeled = load_jsonl(data_dir + "/unlabeled.jsonl");
    labeled.validate();
    unlabeled.validate();
    fs::create_directories(out_dir);

    std::optional<GazeEstimatorParams> teacher;
    if (!teacher_ckpt.empty()) teacher = load_estimator(teacher_ckpt);

    std::optional<Dataset> oracle;
    const std::string oracle_path = data_dir + "/unlabeled.oracle.jsonl";
    if (fs::exists(oracle_path)) {
        oracle = load_jsonl(oracle_path);
        oracle->validate();
    }

    auto provider = provider_for(cfg);
    CachingCueProvider cache(*provider);
    const uint64_t chash = config_hash(cfg);

    RunHooks hooks;
    if (oracle)
        hooks.eval = [&](GazeEstimatorParams& student) {
            return evaluate(student, *oracle).mean_deg;
        };
    hooks.snapshot = [&](const std::string& tag, SslState& state) {
        if (tag == "teacher") {
            save_estimator(out_dir + "/teacher.ckpt", state.teacher, chash, 0);
        } else if (tag == "pseudo") {
            std::ofstream out(out_dir + "/pseudo_labels.jsonl");
            for (const auto& s : unlabeled.samples) {
                const auto& e = state.pseudo.at(s.id);
                json j;
                j["id"] = s.id;
                j["yaw"] = e.label.yaw;
                j["pitch"] = e.label.pitch;
                out << j.dump() << "\n";
            }
        } else if (tag.rfind("refresh:", 0) == 0) {
            save_estimator(out_dir + "/teacher_" + tag.substr(8) + ".ckpt", state.teacher, chash,
                           std::stoi(tag.substr(8)));
        }
    };

    RunResult res = run_selftraining(labeled, unlabeled, cfg.train, cache, hooks,
                                     teacher ? &*teacher : nullptr);

    save_estimator(out_dir + "/student.ckpt", res.student, chash, cfg.train.ssl_epochs);
    save_reward(out_dir + "/reward.ckpt", res.reward, cfg.cues, chash, cfg.train.ssl_epochs);
    json hist;
    hist["teacher"] = history_to_json(res.teacher_history);
    hist["ssl"] = history_to_json(res.ssl_history);
    write_text(out_dir + "/history.json", hist.dump(2) + "\n");
    if (oracle) {
        EvalReport rep = evaluate(res.student, *oracle, chash, cfg.train.seed);
        write_text(out_dir + "/eval.json", eval_report_json(rep));
        std::cout << "final eval mean_deg: " << rep.mean_deg << "\n";
    }
    std::cout << "student checkpoint: " << out_dir << "/student.ckpt\n";
    return 0;
}

int run_eval(const CommonOpts& common, const std::string& model_ckpt, const std::string& data_path,
             const std::string& oracle_path, const std::string& out_path) {
    Timer timer;
    RunConfig cfg = resolve_config(common);
    GazeEstimatorParams model = load_estimator(model_ckpt);
    Dataset ds = load_jsonl(oracle_path.empty() ? data_path : oracle_path);
    ds.validate();
    EvalReport rep = evaluate(model, ds, config_hash(cfg), cfg.train.seed);
    write_text(out_path, eval_report_json(rep));
    std::cout << "mean_deg: " << rep.mean_deg << "\n";
    return 0;
}

int run_score(const CommonOpts& common, const std::string& reward_ckpt,
              const std::string& student_ckpt, const std::string& data_path,
              const std::string& out_path) {
    Timer timer;
    RunConfig cfg = resolve_config(common);
    RewardModelParams reward = load_reward(reward_ckpt);
    GazeEstimatorParams student = load_estimator(student_ckpt);
    Dataset ds = load_jsonl(data_path);
    ds.validate();

    auto provider = provider_for(cfg);
    CachingCueProvider cache(*provider);
    const PromptTemplate prompt;

    std::vector<size_t> idx(ds.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    const Tensor preds = estimator_predict(student, features_matrix(ds, idx));

    std::vector<ScoreRequest> requests;
    for (size_t i = 0; i < ds.size(); ++i) {
        const Sample& s = ds.samples[i];
        if (!s.label)
            throw InvalidArgument("score: sample '" + s.id +
                                  "' has no candidate label (yaw/pitch required)");
        requests.push_back({&s, *s.label, gaze_from_row(preds, i)});
    }
    const auto scores =
        score_samples(reward, cache, prompt, requests, cfg.train.confidence_variant);

    json arr = json::array();
    for (size_t i = 0; i < scores.size(); ++i) {
        json j;
        j["id"] = ds.samples[i].id;
        j["r_hat"] = scores[i].r_hat;
        j["sim"] = scores[i].sim;
        j["r"] = scores[i].r;
        arr.push_back(std::move(j));
    }
    write_text(out_path, arr.dump(2) + "\n");
    std::cout << "scored: " << scores.size() << "\n";
    return 0;
}

int run_ablate(const CommonOpts& common, const std::string& grid_path,
               const std::string& data_dir, const std::string& seeds_csv,
               const std::string& out_dir, int jobs) {
    Timer timer;
    RunConfig cfg = resolve_config(common);
    Dataset labeled = load_jsonl(data_dir + "/labeled.jsonl");
    Dataset unlabeled = load_jsonl(data_dir + "/unlabeled.jsonl");
    Dataset oracle = load_jsonl(data_dir + "/unlabeled.oracle.jsonl");
    labeled.validate();
    unlabeled.validate();
    oracle.validate();

    std::vector<AblationCell> grid = default_grid();
    if (!grid_path.empty()) {
        std::ifstream in(grid_path);
        if (!in) throw IoError("cannot open grid '" + grid_path + "'");
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        grid = parse_grid_json(text);
    }

    std::vector<uint64_t> seeds;
    std::stringstream ss(seeds_csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            seeds.push_back(std::stoull(item));
        } catch (const std::exception&) {
            throw ConfigError("ablate: --seeds entry '" + item + "' is not a u64");
        }
    }
    if (seeds.empty()) throw ConfigError("ablate: --seeds must list at least one seed");

    auto provider = provider_for(cfg);
    CachingCueProvider cache(*provider);
    fs::create_directories(out_dir);
    AblationTable table = run_ablation(grid, labeled, unlabeled, oracle, cfg.train, seeds, cache,
                                       jobs);
    write_report(table.rows, out_dir + "/rows.json", ReportFormat::json);
    write_report(table.rows, out_dir + "/rows.csv", ReportFormat::csv);
    write_report(table.rows, out_dir + "/rows.md", ReportFormat::markdown);
    write_report(table.summary, out_dir + "/summary.json", ReportFormat::json);
    for (const auto& s : table.summary) {
        std::cout << s.config << ": mean_deg=" << s.mean_deg;
        if (s.sd_deg) std::cout << " sd=" << *s.sd_deg;
        if (s.failed) std::cout << " FAILED (" << s.error << ")";
        std::cout << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "omnigaze: reward-gated semi-supervised self-training for 3D gaze regression"};
    app.require_subcommand(1);
    app.footer(
        "Defaults (override via --config / env): tau 0.5, refresh interval K 10,\n"
        "teacher epochs 30 (lr 0.005), ssl epochs 30 (student lr 0.001, reward lr\n"
        "0.0001), weight decay 0.05, batch size 64, objective weights 0.5/0.5,\n"
        "unsup/reward reduction mean, pseudo-label corruption rho 0.3 at >= 30 deg.\n"
        "Config precedence: CLI flag > env var > config file > built-in default.\n"
        "Environment: OMNIGAZE_SEED (default training seed), OMNIGAZE_EMBED_URL\n"
        "(remote cue endpoint), OMNIGAZE_KERNELS (scalar|avx2|neon|auto).");

    CommonOpts common;
    app.add_option("--config", common.config_path, "run config JSON (see README for schema)");
    uint64_t seed_flag = 0;
    auto* seed_opt = app.add_option(
        "--seed", seed_flag, "training seed; overrides config and OMNIGAZE_SEED");

    // datagen
    auto* datagen = app.add_subcommand("datagen", "generate a synthetic gaze dataset");
    std::string spec_path, out_dir;
    size_t n_labeled = 500, n_unlabeled = 2000;
    uint64_t dg_seed = 0;
    bool dg_seed_set = false;
    datagen->add_option("--spec", spec_path, "SyntheticSpec JSON file");
    datagen->add_option("--out", out_dir, "output directory")->required();
    datagen->add_option("--n-labeled", n_labeled, "labeled sample count")
        ->capture_default_str();
    datagen->add_option("--n-unlabeled", n_unlabeled, "unlabeled sample count")
        ->capture_default_str();
    datagen->add_option("--seed", dg_seed, "generator seed (default: config data_seed)")
        ->each([&](const std::string&) { dg_seed_set = true; });

    // train-teacher
    auto* teach = app.add_subcommand("train-teacher",
                                     "phase i: supervised teacher on labeled data "
                                     "(Adam, lr 0.005, weight decay 0.05)");
    std::string tt_data, tt_out;
    teach->add_option("--data", tt_data, "data directory containing labeled.jsonl")->required();
    teach->add_option("--out", tt_out, "output checkpoint path")->required();

    // pseudo-label
    auto* plabel = app.add_subcommand("pseudo-label",
                                      "phase ii: teacher pseudo-labels for an unlabeled set");
    std::string pl_teacher, pl_unlabeled, pl_out;
    plabel->add_option("--teacher", pl_teacher, "teacher checkpoint")->required();
    plabel->add_option("--unlabeled", pl_unlabeled, "unlabeled JSONL")->required();
    plabel->add_option("--out", pl_out, "output JSONL of {id, yaw, pitch}")->required();

    // train-ssl
    auto* ssl = app.add_subcommand(
        "train-ssl",
        "phase iii: joint student/reward self-training (tau 0.5, refresh every K=10 epochs)");
    std::string ssl_data, ssl_teacher, ssl_out;
    ssl->add_option("--data", ssl_data, "data directory")->required();
    ssl->add_option("--teacher", ssl_teacher, "teacher checkpoint (omit to train phase i here)");
    ssl->add_option("--out", ssl_out, "output directory")->required();

    // eval
    auto* ev = app.add_subcommand("eval", "mean angular error of a checkpoint on a dataset");
    std::string ev_model, ev_data, ev_oracle, ev_out;
    ev->add_option("--model", ev_model, "estimator checkpoint")->required();
    ev->add_option("--data", ev_data, "labeled JSONL")->required();
    ev->add_option("--oracle", ev_oracle, "oracle JSONL for unlabeled data");
    ev->add_option("--out", ev_out, "report JSON path")->required();

    // score
    auto* sc = app.add_subcommand("score", "reward-model confidence for (sample, label) pairs");
    std::string sc_reward, sc_student, sc_data, sc_out;
    sc->add_option("--reward", sc_reward, "reward checkpoint")->required();
    sc->add_option("--student", sc_student, "student checkpoint")->required();
    sc->add_option("--data", sc_data, "JSONL with candidate labels")->required();
    sc->add_option("--out", sc_out, "scores JSON path")->required();

    // ablate
    auto* ab = app.add_subcommand("ablate",
                                  "run the ablation grid (default: baseline/nofilter/full)");
    std::string ab_grid, ab_data, ab_seeds = "1,2,3", ab_out;
    int ab_jobs = 1;
    ab->add_option("--grid", ab_grid, "grid JSON (default grid when omitted)");
    ab->add_option("--data", ab_data, "data directory")->required();
    ab->add_option("--seeds", ab_seeds, "comma-separated seeds")->capture_default_str();
    ab->add_option("--out", ab_out, "output directory")->required();
    ab->add_option("--jobs", ab_jobs, "parallel workers over cells")->capture_default_str();

    CLI11_PARSE(app, argc, argv);
    if (seed_opt->count() > 0) common.seed_flag = seed_flag;

    try {
        if (*datagen)
            return run_datagen(common, spec_path, out_dir, n_labeled, n_unlabeled,
                               dg_seed_set ? std::optional<uint64_t>(dg_seed) : std::nullopt);
        if (*teach) return run_train_teacher(common, tt_data, tt_out);
        if (*plabel) return run_pseudo_label(pl_teacher, pl_unlabeled, pl_out);
        if (*ssl) return run_train_ssl(common, ssl_data, ssl_teacher, ssl_out);
        if (*ev) return run_eval(common, ev_model, ev_data, ev_oracle, ev_out);
        if (*sc) return run_score(common, sc_reward, sc_student, sc_data, sc_out);
        if (*ab) return run_ablate(common, ab_grid, ab_data, ab_seeds, ab_out, ab_jobs);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 3;
    } catch (const ProviderError& e) {
        std::cerr << "provider error: " << e.what() << "\n";
        return 3;
    } catch (const ProtocolError& e) {
        std::cerr << "protocol error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
