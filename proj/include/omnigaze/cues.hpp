#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "omnigaze/data.hpp"
#include "omnigaze/tensor.hpp"

namespace omnigaze {

// One class-style token plus M patch-style tokens, [(M+1) x d_v].
struct VisualCue {
    Tensor tokens;
};

// Token embeddings of the gaze description, [n_t x d_t].
struct TextCue {
    Tensor embedding;
};

// Question sent to the description generator.
struct PromptTemplate {
    std::string text =
        "In 3D space, where is the person looking, including details about horizontal "
        "(left/right) direction, vertical (up/down) direction, and forward/backward relative "
        "to the viewer?";
};

struct CueProviderConfig {
    enum class Mode { synthetic, remote };
    Mode mode = Mode::synthetic;
    size_t patch_count = 8;  // M
    size_t d_v = 16;
    size_t n_t = 4;
    size_t d_t = 16;
    float p_desc = 0.15f;  // probability a description's direction class is corrupted
    std::string endpoint;
    int timeout_ms = 5000;
    int inflight_cap = 8;
    std::vector<int> backoff_ms = {100, 400, 1600};
};

class CueProvider {
public:
    virtual ~CueProvider() = default;
    virtual VisualCue visual_cue(const Sample& s) = 0;
    virtual TextCue text_cue(const Sample& s, const PromptTemplate& prompt) = 0;
    virtual const CueProviderConfig& config() const = 0;
};

// Deterministic stand-in for the real visual/text encoders. Visual tokens are
// fixed random linear projections of the feature vector; text tokens encode a
// 3x3 direction class of the gaze decoded from the features (the generator's
// noisy view), corrupted with probability p_desc.
class SyntheticCueProvider : public CueProvider {
public:
    SyntheticCueProvider(const CueProviderConfig& cfg, const SyntheticSpec& gen_spec,
                         uint64_t gen_seed, uint64_t provider_seed);

    VisualCue visual_cue(const Sample& s) override;
    TextCue text_cue(const Sample& s, const PromptTemplate& prompt) override;
    const CueProviderConfig& config() const override { return cfg_; }

    // Exposed for tests and diagnostics.
    SphericalGaze decoded_gaze(const Sample& s) const;
    int quantized_class(const Sample& s) const;  // pre-corruption, 0..8
    int emitted_class(const Sample& s) const;    // post-corruption
    static std::string class_name(int cls);      // e.g. "right-center"

private:
    CueProviderConfig cfg_;
    uint64_t provider_seed_;
    std::vector<Tensor> token_proj_;    // (M+1) matrices [d_x x d_v]
    std::vector<Tensor> token_offset_;  // (M+1) rows [1 x d_v]
    std::vector<Tensor> class_emb_;     // 9 tables [n_t x d_t]
    Tensor decoder_;                    // [(3+d_z) x d_x], least-squares inverse of the mixer
};

// HTTP client for an external embedding service: POST {endpoint}/embed with
// {"kind","id","payload"}, expecting {"id","embedding":[...]}. Transport
// faults and 5xx are retried up to 3 times with the configured backoff.
class RemoteEmbedClient {
public:
    explicit RemoteEmbedClient(const CueProviderConfig& cfg);
    std::vector<float> embed(const std::string& kind, const std::string& id,
                             const std::string& payload_json);

private:
    CueProviderConfig cfg_;
};

class RemoteCueProvider : public CueProvider {
public:
    explicit RemoteCueProvider(const CueProviderConfig& cfg);

    VisualCue visual_cue(const Sample& s) override;
    TextCue text_cue(const Sample& s, const PromptTemplate& prompt) override;
    const CueProviderConfig& config() const override { return cfg_; }

private:
    Tensor fetch(const std::string& kind, const Sample& s, const std::string& payload_json,
                 size_t rows, size_t cols);

    CueProviderConfig cfg_;
    RemoteEmbedClient client_;
    struct Cache;
    std::shared_ptr<Cache> cache_;
};

// Memoizes an underlying provider per sample id for the lifetime of a run.
// Thread-safe; cues are fixed per (provider, sample), so caching cannot
// change results.
class CachingCueProvider : public CueProvider {
public:
    explicit CachingCueProvider(CueProvider& inner) : inner_(inner) {}

    VisualCue visual_cue(const Sample& s) override;
    TextCue text_cue(const Sample& s, const PromptTemplate& prompt) override;
    const CueProviderConfig& config() const override { return inner_.config(); }

private:
    CueProvider& inner_;
    std::mutex mu_;
    std::unordered_map<std::string, VisualCue> visual_;
    std::unordered_map<std::string, TextCue> text_;
};

// Builds a provider for the configured mode. OMNIGAZE_EMBED_URL overrides the
// configured endpoint for remote mode.
std::unique_ptr<CueProvider> make_cue_provider(const CueProviderConfig& cfg,
                                               const SyntheticSpec& gen_spec, uint64_t gen_seed,
                                               uint64_t provider_seed);

}  // namespace omnigaze
