#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "omnigaze/geometry.hpp"
#include "omnigaze/tensor.hpp"

namespace omnigaze {

struct Sample {
    std::string id;
    std::vector<float> features;
    std::optional<SphericalGaze> label;
    std::string source;
};

struct Dataset {
    std::string name;
    size_t feature_width = 0;
    uint64_t spec_hash = 0;
    std::vector<Sample> samples;

    size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
    void validate() const;  // unique ids, uniform feature width, all-or-nothing labels
};

// Controls the synthetic generator. Features are a fixed random linear mix of
// the gaze direction and an appearance latent z; the unlabeled domain draws z
// around mean delta instead of zero, producing a controllable domain shift.
struct SyntheticSpec {
    size_t d_x = 24;
    size_t d_z = 8;
    float yaw_min = -1.5707963f, yaw_max = 1.5707963f;     // [-pi/2, pi/2]
    float pitch_min = -1.0471976f, pitch_max = 1.0471976f;  // [-pi/3, pi/3]
    float sigma_x = 0.05f;
    float delta_norm = 1.0f;
    float rho = 0.3f;
    float corrupt_min_deg = 30.0f;
};

struct SyntheticBundle {
    Dataset labeled;
    Dataset unlabeled;          // labels stripped
    Dataset unlabeled_oracle;   // same samples with the true labels; evaluation only
};

SyntheticBundle generate_synthetic(const SyntheticSpec& spec, size_t n_labeled,
                                   size_t n_unlabeled, uint64_t seed);

// The generator's mixing matrix [d_x x (3 + d_z)], reproducible from
// (spec, seed); the synthetic cue provider re-derives it to decode features.
Tensor synthetic_mixing_matrix(const SyntheticSpec& spec, uint64_t seed);

// Pseudo-labels keyed by sample id, with the epoch they were generated at.
struct PseudoLabelSet {
    struct Entry {
        SphericalGaze label;
        int epoch = 0;
    };
    std::unordered_map<std::string, Entry> entries;

    const Entry& at(const std::string& id) const;
    size_t size() const { return entries.size(); }
};

struct CorruptionResult {
    PseudoLabelSet labels;
    std::unordered_set<std::string> corrupted_ids;
};

// Rotates an exact floor(rho*N) subset of labels by at least magnitude_deg
// about a random axis perpendicular to the direction, so the injected angular
// error is guaranteed. Selection is without replacement and deterministic.
CorruptionResult corrupt_labels(const PseudoLabelSet& pseudo, float rho, float magnitude_deg,
                                uint64_t seed);

// JSONL schema: {"id", "features":[...], "yaw"?, "pitch"?, "source"}.
// Both yaw and pitch present -> labeled; both absent -> unlabeled;
// exactly one -> validation error.
Dataset load_jsonl(const std::string& path);
void save_jsonl(const Dataset& ds, const std::string& path);

// One self-training step's worth of indices: floor(batch/2) labeled and
// ceil(batch/2) unlabeled. The larger pool defines the epoch (every one of
// its samples appears exactly once); the smaller pool recycles, reshuffled.
struct PairedBatch {
    std::vector<size_t> labeled;    // indices into the labeled dataset
    std::vector<size_t> unlabeled;  // indices into the unlabeled dataset
};

std::vector<PairedBatch> balanced_batches(const Dataset& labeled, const Dataset& unlabeled,
                                          size_t batch_size, uint64_t seed, size_t epoch);

// [n x d_x] matrix view of selected samples.
Tensor features_matrix(const Dataset& ds, const std::vector<size_t>& indices);
// [n x 2] (yaw, pitch) rows from ground-truth labels; throws if any missing.
Tensor labels_matrix(const Dataset& ds, const std::vector<size_t>& indices);

}  // namespace omnigaze
