#pragma once

#include <string>

#include <json.hpp>

#include "omnigaze/cues.hpp"
#include "omnigaze/data.hpp"
#include "omnigaze/pipeline.hpp"

namespace omnigaze {

// Everything a run needs: training hyperparameters, the synthetic data spec,
// cue provider settings and data locations. Mirrored 1:1 by the JSON config
// file; unknown keys are rejected. Precedence: CLI flag > env var > config
// file > built-in defaults.
struct RunConfig {
    TrainConfig train;
    SyntheticSpec synth;
    CueProviderConfig cues;
    std::string data_dir;
    uint64_t data_seed = 7;  // generator and cue-provider world seed

    void validate() const;
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

// Canonical JSON (keys sorted by nlohmann's object ordering); basis of
// config_hash.
nlohmann::json run_config_to_json(const RunConfig& cfg);
uint64_t config_hash(const RunConfig& cfg);

// OMNIGAZE_SEED overrides train.seed; OMNIGAZE_EMBED_URL overrides
// cues.endpoint.
void apply_env_overrides(RunConfig& cfg);

}  // namespace omnigaze
