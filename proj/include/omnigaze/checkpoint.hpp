#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "omnigaze/nets.hpp"
#include "omnigaze/reward.hpp"

namespace omnigaze {

// Binary layout: magic "OGZC", version u32 LE, metadata length u64 LE, UTF-8
// JSON metadata, then f32 LE payload concatenated in metadata tensor order.
inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const NamedParams& params,
                     const nlohmann::json& extra_metadata);

struct LoadedCheckpoint {
    nlohmann::json metadata;
    std::vector<std::pair<std::string, Tensor>> tensors;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

// Copies tensors into params by name; missing or shape-mismatched entries are
// errors.
void load_into(const LoadedCheckpoint& ckpt, const NamedParams& params);

// Model-specific helpers; metadata records the architecture so loading can
// reconstruct the parameter structs.
void save_estimator(const std::string& path, GazeEstimatorParams& model, uint64_t config_hash,
                    int epoch);
GazeEstimatorParams load_estimator(const std::string& path);

void save_reward(const std::string& path, RewardModelParams& model,
                 const CueProviderConfig& cues, uint64_t config_hash, int epoch);
RewardModelParams load_reward(const std::string& path);

}  // namespace omnigaze
