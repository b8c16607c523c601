#include "omnigaze/runconfig.hpp"

#include <cstdlib>
#include <fstream>
#include <unordered_set>

#include "omnigaze/errors.hpp"
#include "omnigaze/rng.hpp"

using nlohmann::json;

namespace omnigaze {

namespace {

[[noreturn]] void bad_key(const std::string& section, const std::string& key) {
    throw ConfigError("config: unknown key '" + (section.empty() ? key : section + "." + key) +
                      "'");
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) {
        try {
            out = j.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(std::string("config key '") + key + "': wrong type");
        }
    }
}

Reduction parse_reduction(const json& j, const char* key, Reduction fallback) {
    if (!j.contains(key)) return fallback;
    const std::string v = j.at(key).get<std::string>();
    if (v == "mean") return Reduction::mean;
    if (v == "sum") return Reduction::sum;
    throw ConfigError(std::string("config key '") + key + "': must be mean|sum");
}

const char* reduction_name(Reduction r) { return r == Reduction::mean ? "mean" : "sum"; }

TrainConfig parse_train(const json& j) {
    static const std::unordered_set<std::string> known = {
        "tau",           "refresh_interval", "refresh_enabled",   "teacher_epochs",
        "ssl_epochs",    "lr_teacher",       "lr_student",        "lr_reward",
        "weight_decay",  "batch_size",       "seed",              "unsup_reduction",
        "reward_reduction", "weight_sup",    "weight_unsup",      "filtering",
        "reweighting",   "confidence_variant", "pseudo_corrupt_rho",
        "pseudo_corrupt_min_deg", "d_model", "d_enc",             "hidden"};
    for (const auto& [key, value] : j.items())
        if (!known.count(key)) bad_key("train", key);
    TrainConfig c;
    read(j, "tau", c.tau);
    read(j, "refresh_interval", c.refresh_interval);
    read(j, "refresh_enabled", c.refresh_enabled);
    read(j, "teacher_epochs", c.teacher_epochs);
    read(j, "ssl_epochs", c.ssl_epochs);
    read(j, "lr_teacher", c.lr_teacher);
    read(j, "lr_student", c.lr_student);
    read(j, "lr_reward", c.lr_reward);
    read(j, "weight_decay", c.weight_decay);
    read(j, "batch_size", c.batch_size);
    read(j, "seed", c.seed);
    c.unsup_reduction = parse_reduction(j, "unsup_reduction", c.unsup_reduction);
    c.reward_reduction = parse_reduction(j, "reward_reduction", c.reward_reduction);
    read(j, "weight_sup", c.weight_sup);
    read(j, "weight_unsup", c.weight_unsup);
    read(j, "filtering", c.filtering);
    read(j, "reweighting", c.reweighting);
    if (j.contains("confidence_variant")) {
        const std::string v = j.at("confidence_variant").get<std::string>();
        if (v == "full")
            c.confidence_variant = ConfidenceVariant::full;
        else if (v == "initial_only")
            c.confidence_variant = ConfidenceVariant::initial_only;
        else
            throw ConfigError("config key 'confidence_variant': must be full|initial_only");
    }
    read(j, "pseudo_corrupt_rho", c.pseudo_corrupt_rho);
    read(j, "pseudo_corrupt_min_deg", c.pseudo_corrupt_min_deg);
    read(j, "d_model", c.d_model);
    read(j, "d_enc", c.d_enc);
    read(j, "hidden", c.hidden);
    return c;
}

SyntheticSpec parse_synth(const json& j) {
    static const std::unordered_set<std::string> known = {
        "d_x",     "d_z",        "yaw_min",   "yaw_max", "pitch_min",
        "pitch_max", "sigma_x",  "delta_norm", "rho",    "corrupt_min_deg"};
    for (const auto& [key, value] : j.items())
        if (!known.count(key)) bad_key("synthetic", key);
    SyntheticSpec s;
    read(j, "d_x", s.d_x);
    read(j, "d_z", s.d_z);
    read(j, "yaw_min", s.yaw_min);
    read(j, "yaw_max", s.yaw_max);
    read(j, "pitch_min", s.pitch_min);
    read(j, "pitch_max", s.pitch_max);
    read(j, "sigma_x", s.sigma_x);
    read(j, "delta_norm", s.delta_norm);
    read(j, "rho", s.rho);
    read(j, "corrupt_min_deg", s.corrupt_min_deg);
    return s;
}

CueProviderConfig parse_cues(const json& j) {
    static const std::unordered_set<std::string> known = {
        "mode", "patch_count", "d_v", "n_t", "d_t", "p_desc", "endpoint", "timeout_ms",
        "inflight_cap", "backoff_ms"};
    for (const auto& [key, value] : j.items())
        if (!known.count(key)) bad_key("cues", key);
    CueProviderConfig c;
    if (j.contains("mode")) {
        const std::string m = j.at("mode").get<std::string>();
        if (m == "synthetic")
            c.mode = CueProviderConfig::Mode::synthetic;
        else if (m == "remote")
            c.mode = CueProviderConfig::Mode::remote;
        else
            throw ConfigError("config key 'cues.mode': must be synthetic|remote");
    }
    read(j, "patch_count", c.patch_count);
    read(j, "d_v", c.d_v);
    read(j, "n_t", c.n_t);
    read(j, "d_t", c.d_t);
    read(j, "p_desc", c.p_desc);
    read(j, "endpoint", c.endpoint);
    read(j, "timeout_ms", c.timeout_ms);
    read(j, "inflight_cap", c.inflight_cap);
    read(j, "backoff_ms", c.backoff_ms);
    return c;
}

}  // namespace

void RunConfig::validate() const {
    train.validate();
    if (synth.d_x == 0 || synth.d_z == 0) throw ConfigError("config key 'synthetic.d_x/d_z': must be positive");
    if (!(synth.yaw_min < synth.yaw_max)) throw ConfigError("config key 'synthetic.yaw_min/yaw_max': degenerate range");
    if (!(synth.pitch_min < synth.pitch_max))
        throw ConfigError("config key 'synthetic.pitch_min/pitch_max': degenerate range");
    if (!(synth.rho >= 0.0f && synth.rho <= 1.0f))
        throw ConfigError("config key 'synthetic.rho': must be in [0,1]");
    if (cues.patch_count == 0 || cues.d_v == 0 || cues.n_t == 0 || cues.d_t == 0)
        throw ConfigError("config key 'cues.dims': must be positive");
    if (!(cues.p_desc >= 0.0f && cues.p_desc <= 1.0f))
        throw ConfigError("config key 'cues.p_desc': must be in [0,1]");
    if (cues.inflight_cap < 1) throw ConfigError("config key 'cues.inflight_cap': must be >= 1");
}

RunConfig parse_run_config(const json& j) {
    static const std::unordered_set<std::string> known = {"train", "synthetic", "cues",
                                                          "data_dir", "data_seed"};
    for (const auto& [key, value] : j.items())
        if (!known.count(key)) bad_key("", key);
    RunConfig c;
    if (j.contains("train")) c.train = parse_train(j.at("train"));
    if (j.contains("synthetic")) c.synth = parse_synth(j.at("synthetic"));
    if (j.contains("cues")) c.cues = parse_cues(j.at("cues"));
    read(j, "data_dir", c.data_dir);
    read(j, "data_seed", c.data_seed);
    c.validate();
    return c;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config '" + path + "': " + e.what());
    }
    return parse_run_config(j);
}

json run_config_to_json(const RunConfig& cfg) {
    json t;
    t["tau"] = cfg.train.tau;
    t["refresh_interval"] = cfg.train.refresh_interval;
    t["refresh_enabled"] = cfg.train.refresh_enabled;
    t["teacher_epochs"] = cfg.train.teacher_epochs;
    t["ssl_epochs"] = cfg.train.ssl_epochs;
    t["lr_teacher"] = cfg.train.lr_teacher;
    t["lr_student"] = cfg.train.lr_student;
    t["lr_reward"] = cfg.train.lr_reward;
    t["weight_decay"] = cfg.train.weight_decay;
    t["batch_size"] = cfg.train.batch_size;
    t["seed"] = cfg.train.seed;
    t["unsup_reduction"] = reduction_name(cfg.train.unsup_reduction);
    t["reward_reduction"] = reduction_name(cfg.train.reward_reduction);
    t["weight_sup"] = cfg.train.weight_sup;
    t["weight_unsup"] = cfg.train.weight_unsup;
    t["filtering"] = cfg.train.filtering;
    t["reweighting"] = cfg.train.reweighting;
    t["confidence_variant"] =
        cfg.train.confidence_variant == ConfidenceVariant::full ? "full" : "initial_only";
    t["pseudo_corrupt_rho"] = cfg.train.pseudo_corrupt_rho;
    t["pseudo_corrupt_min_deg"] = cfg.train.pseudo_corrupt_min_deg;
    t["d_model"] = cfg.train.d_model;
    t["d_enc"] = cfg.train.d_enc;
    t["hidden"] = cfg.train.hidden;

    json s;
    s["d_x"] = cfg.synth.d_x;
    s["d_z"] = cfg.synth.d_z;
    s["yaw_min"] = cfg.synth.yaw_min;
    s["yaw_max"] = cfg.synth.yaw_max;
    s["pitch_min"] = cfg.synth.pitch_min;
    s["pitch_max"] = cfg.synth.pitch_max;
    s["sigma_x"] = cfg.synth.sigma_x;
    s["delta_norm"] = cfg.synth.delta_norm;
    s["rho"] = cfg.synth.rho;
    s["corrupt_min_deg"] = cfg.synth.corrupt_min_deg;

    json c;
    c["mode"] = cfg.cues.mode == CueProviderConfig::Mode::synthetic ? "synthetic" : "remote";
    c["patch_count"] = cfg.cues.patch_count;
    c["d_v"] = cfg.cues.d_v;
    c["n_t"] = cfg.cues.n_t;
    c["d_t"] = cfg.cues.d_t;
    c["p_desc"] = cfg.cues.p_desc;
    c["endpoint"] = cfg.cues.endpoint;
    c["timeout_ms"] = cfg.cues.timeout_ms;
    c["inflight_cap"] = cfg.cues.inflight_cap;
    c["backoff_ms"] = cfg.cues.backoff_ms;

    json j;
    j["train"] = std::move(t);
    j["synthetic"] = std::move(s);
    j["cues"] = std::move(c);
    j["data_dir"] = cfg.data_dir;
    j["data_seed"] = cfg.data_seed;
    return j;
}

uint64_t config_hash(const RunConfig& cfg) {
    const std::string s = run_config_to_json(cfg).dump();
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ull;
    return h;
}

void apply_env_overrides(RunConfig& cfg) {
    if (const char* seed = std::getenv("OMNIGAZE_SEED")) {
        try {
            cfg.train.seed = std::stoull(seed);
        } catch (const std::exception&) {
            throw ConfigError("OMNIGAZE_SEED: not a valid u64");
        }
    }
    if (const char* url = std::getenv("OMNIGAZE_EMBED_URL")) cfg.cues.endpoint = url;
}

}  // namespace omnigaze
