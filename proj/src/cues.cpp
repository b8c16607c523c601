#include "omnigaze/cues.hpp"

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <unordered_map>

#include <httplib.h>
#include <json.hpp>

#include "omnigaze/errors.hpp"
#include "omnigaze/geometry.hpp"
#include "omnigaze/kernels.hpp"
#include "omnigaze/rng.hpp"

using nlohmann::json;

namespace omnigaze {

namespace {

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ull;
    return h;
}

// Least-squares inverse P = (A^T A + eps I)^-1 A^T via Gauss-Jordan; the
// normal matrix is tiny ((3+d_z) square) and well conditioned for the
// generator's Gaussian mixer.
Tensor least_squares_inverse(const Tensor& a) {
    const size_t m = a.rows(), n = a.cols();
    Tensor at(n, m);
    kernels::active().transpose(a.data(), at.data(), m, n);
    Tensor ata(n, n);
    kernels::active().gemm(at.data(), a.data(), ata.data(), n, m, n, false);
    for (size_t i = 0; i < n; ++i) ata.at(i, i) += 1e-6f;

    // Invert ata in double for stability.
    std::vector<double> aug(n * 2 * n, 0.0);
    for (size_t r = 0; r < n; ++r) {
        for (size_t c = 0; c < n; ++c) aug[r * 2 * n + c] = ata.at(r, c);
        aug[r * 2 * n + n + r] = 1.0;
    }
    for (size_t col = 0; col < n; ++col) {
        size_t piv = col;
        for (size_t r = col + 1; r < n; ++r)
            if (std::abs(aug[r * 2 * n + col]) > std::abs(aug[piv * 2 * n + col])) piv = r;
        if (std::abs(aug[piv * 2 * n + col]) < 1e-12)
            throw InvalidArgument("cue decoder: singular normal matrix");
        if (piv != col)
            for (size_t c = 0; c < 2 * n; ++c) std::swap(aug[piv * 2 * n + c], aug[col * 2 * n + c]);
        const double d = aug[col * 2 * n + col];
        for (size_t c = 0; c < 2 * n; ++c) aug[col * 2 * n + c] /= d;
        for (size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = aug[r * 2 * n + col];
            if (f == 0.0) continue;
            for (size_t c = 0; c < 2 * n; ++c) aug[r * 2 * n + c] -= f * aug[col * 2 * n + c];
        }
    }
    Tensor inv(n, n);
    for (size_t r = 0; r < n; ++r)
        for (size_t c = 0; c < n; ++c) inv.at(r, c) = static_cast<float>(aug[r * 2 * n + n + c]);

    Tensor p(n, m);
    kernels::active().gemm(inv.data(), at.data(), p.data(), n, n, m, false);
    return p;
}

int direction_class(const SphericalGaze& g) {
    // horizontal: left / center / right, vertical: down / center / up
    int h = 1, v = 1;
    if (g.yaw < -0.2f) h = 0;
    if (g.yaw > 0.2f) h = 2;
    if (g.pitch < -0.2f) v = 0;
    if (g.pitch > 0.2f) v = 2;
    return h * 3 + v;
}

}  // namespace

SyntheticCueProvider::SyntheticCueProvider(const CueProviderConfig& cfg,
                                           const SyntheticSpec& gen_spec, uint64_t gen_seed,
                                           uint64_t provider_seed)
    : cfg_(cfg), provider_seed_(provider_seed) {
    if (cfg_.patch_count < 1 || cfg_.d_v == 0 || cfg_.n_t == 0 || cfg_.d_t == 0)
        throw InvalidArgument("cue provider: dims must be positive");
    Rng rng(Rng::mix_seed(provider_seed, "synthetic-cues"));
    const size_t n_tokens = cfg_.patch_count + 1;
    const float proj_scale = 1.0f / std::sqrt(static_cast<float>(gen_spec.d_x));
    for (size_t t = 0; t < n_tokens; ++t) {
        Tensor proj(gen_spec.d_x, cfg_.d_v);
        for (size_t i = 0; i < proj.size(); ++i) proj[i] = rng.normal_f() * proj_scale;
        token_proj_.push_back(std::move(proj));
        Tensor off(1, cfg_.d_v);
        for (size_t i = 0; i < off.size(); ++i) off[i] = 0.5f * rng.normal_f();
        token_offset_.push_back(std::move(off));
    }
    for (int c = 0; c < 9; ++c) {
        Tensor emb(cfg_.n_t, cfg_.d_t);
        for (size_t i = 0; i < emb.size(); ++i) emb[i] = rng.normal_f();
        class_emb_.push_back(std::move(emb));
    }
    decoder_ = least_squares_inverse(synthetic_mixing_matrix(gen_spec, gen_seed));
}

VisualCue SyntheticCueProvider::visual_cue(const Sample& s) {
    if (s.features.size() != token_proj_[0].rows())
        throw ShapeError("visual_cue: sample width " + std::to_string(s.features.size()) +
                         " vs expected " + std::to_string(token_proj_[0].rows()));
    const size_t n_tokens = cfg_.patch_count + 1;
    VisualCue cue{Tensor(n_tokens, cfg_.d_v)};
    for (size_t t = 0; t < n_tokens; ++t) {
        kernels::active().gemm(s.features.data(), token_proj_[t].data(),
                               cue.tokens.data() + t * cfg_.d_v, 1, s.features.size(), cfg_.d_v,
                               false);
        kernels::active().add(cue.tokens.data() + t * cfg_.d_v, token_offset_[t].data(),
                              cue.tokens.data() + t * cfg_.d_v, cfg_.d_v);
    }
    return cue;
}

SphericalGaze SyntheticCueProvider::decoded_gaze(const Sample& s) const {
    if (s.features.size() != decoder_.cols())
        throw ShapeError("decoded_gaze: sample width " + std::to_string(s.features.size()) +
                         " vs decoder " + decoder_.shape_str());
    float dir[3] = {0.0f, 0.0f, 0.0f};
    for (size_t r = 0; r < 3; ++r) {
        float acc = 0.0f;
        const float* row = decoder_.data() + r * decoder_.cols();
        for (size_t c = 0; c < decoder_.cols(); ++c) acc += row[c] * s.features[c];
        dir[r] = acc;
    }
    const float norm = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
    if (norm < 1e-6f) return SphericalGaze{0.0f, 0.0f};
    return to_spherical(DirectionVector{dir[0] / norm, dir[1] / norm, dir[2] / norm});
}

int SyntheticCueProvider::quantized_class(const Sample& s) const {
    return direction_class(decoded_gaze(s));
}

int SyntheticCueProvider::emitted_class(const Sample& s) const {
    const int cls = quantized_class(s);
    if (cfg_.p_desc <= 0.0f) return cls;
    Rng rng(Rng::mix_seed(provider_seed_, "text-corruption", fnv1a(s.id)));
    if (rng.uniform() < cfg_.p_desc) return static_cast<int>(rng.below(9));
    return cls;
}

TextCue SyntheticCueProvider::text_cue(const Sample& s, const PromptTemplate& prompt) {
    if (prompt.text.empty()) throw InvalidArgument("text_cue: empty prompt");
    const int cls = emitted_class(s);
    TextCue cue{class_emb_[cls]};
    Rng jitter(Rng::mix_seed(provider_seed_, "text-jitter", fnv1a(s.id)));
    for (size_t i = 0; i < cue.embedding.size(); ++i)
        cue.embedding[i] += 0.01f * jitter.normal_f();
    return cue;
}

std::string SyntheticCueProvider::class_name(int cls) {
    static const char* h[] = {"left", "center", "right"};
    static const char* v[] = {"down", "center", "up"};
    if (cls < 0 || cls > 8) throw InvalidArgument("class_name: class out of range");
    return std::string(h[cls / 3]) + "-" + v[cls % 3];
}

// ---------------------------------------------------------------------------

RemoteEmbedClient::RemoteEmbedClient(const CueProviderConfig& cfg) : cfg_(cfg) {
    if (cfg_.endpoint.empty()) throw ConfigError("remote cue provider: endpoint not configured");
}

std::vector<float> RemoteEmbedClient::embed(const std::string& kind, const std::string& id,
                                            const std::string& payload_json) {
    json body;
    body["kind"] = kind;
    body["id"] = id;
    body["payload"] = json::parse(payload_json);
    const std::string body_str = body.dump();

    const size_t max_retries = std::min<size_t>(3, cfg_.backoff_ms.size());
    std::string last_error;
    for (size_t attempt = 0;; ++attempt) {
        httplib::Client cli(cfg_.endpoint);
        cli.set_connection_timeout(0, cfg_.timeout_ms * 1000);
        cli.set_read_timeout(0, cfg_.timeout_ms * 1000);
        auto res = cli.Post("/embed", body_str, "application/json");
        if (res) {
            if (res->status == 200) {
                json reply;
                try {
                    reply = json::parse(res->body);
                } catch (const json::exception& e) {
                    throw ProtocolError(std::string("embed: malformed response JSON: ") + e.what());
                }
                if (!reply.contains("id") || reply["id"].get<std::string>() != id)
                    throw ProtocolError("embed: response id does not match request id '" + id +
                                        "'");
                if (!reply.contains("embedding") || !reply["embedding"].is_array())
                    throw ProtocolError("embed: response missing embedding array");
                std::vector<float> out;
                for (const auto& v : reply["embedding"]) out.push_back(v.get<float>());
                return out;
            }
            if (res->status < 500)
                throw ProviderError("embed: HTTP " + std::to_string(res->status), res->status,
                                    false);
            last_error = "HTTP " + std::to_string(res->status);
        } else {
            last_error = httplib::to_string(res.error());
        }
        if (attempt >= max_retries)
            throw ProviderError("embed: " + last_error + " after " +
                                    std::to_string(attempt + 1) + " attempts",
                                res ? res->status : 0, true);
        std::this_thread::sleep_for(std::chrono::milliseconds(cfg_.backoff_ms[attempt]));
    }
}

struct RemoteCueProvider::Cache {
    std::mutex mu;
    std::unordered_map<std::string, Tensor> entries;  // keyed by kind + ':' + id
    // Bounds concurrent embed calls to the configured cap.
    std::condition_variable cv;
    int in_flight = 0;
};

RemoteCueProvider::RemoteCueProvider(const CueProviderConfig& cfg)
    : cfg_(cfg), client_(cfg), cache_(std::make_shared<Cache>()) {}

Tensor RemoteCueProvider::fetch(const std::string& kind, const Sample& s,
                                const std::string& payload_json, size_t rows, size_t cols) {
    const std::string key = kind + ":" + s.id;
    {
        std::lock_guard<std::mutex> lock(cache_->mu);
        auto it = cache_->entries.find(key);
        if (it != cache_->entries.end()) return it->second;
    }
    {
        std::unique_lock<std::mutex> lock(cache_->mu);
        cache_->cv.wait(lock, [&] { return cache_->in_flight < cfg_.inflight_cap; });
        ++cache_->in_flight;
    }
    std::vector<float> emb;
    try {
        emb = client_.embed(kind, s.id, payload_json);
    } catch (...) {
        std::lock_guard<std::mutex> lock(cache_->mu);
        --cache_->in_flight;
        cache_->cv.notify_one();
        throw;
    }
    {
        std::lock_guard<std::mutex> lock(cache_->mu);
        --cache_->in_flight;
        cache_->cv.notify_one();
    }
    if (emb.size() != rows * cols)
        throw ProtocolError("embed(" + kind + "): dimension mismatch, got " +
                            std::to_string(emb.size()) + ", expected " +
                            std::to_string(rows * cols));
    Tensor t(rows, cols);
    for (size_t i = 0; i < emb.size(); ++i) t[i] = emb[i];
    {
        std::lock_guard<std::mutex> lock(cache_->mu);
        cache_->entries.emplace(key, t);
    }
    return t;
}

VisualCue RemoteCueProvider::visual_cue(const Sample& s) {
    json payload = json::array();
    for (float f : s.features) payload.push_back(f);
    return VisualCue{fetch("visual", s, payload.dump(), cfg_.patch_count + 1, cfg_.d_v)};
}

TextCue RemoteCueProvider::text_cue(const Sample& s, const PromptTemplate& prompt) {
    if (prompt.text.empty()) throw InvalidArgument("text_cue: empty prompt");
    return TextCue{fetch("text", s, json(prompt.text).dump(), cfg_.n_t, cfg_.d_t)};
}

VisualCue CachingCueProvider::visual_cue(const Sample& s) {
    {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = visual_.find(s.id);
        if (it != visual_.end()) return it->second;
    }
    VisualCue cue = inner_.visual_cue(s);
    std::lock_guard<std::mutex> lock(mu_);
    visual_.emplace(s.id, cue);
    return cue;
}

TextCue CachingCueProvider::text_cue(const Sample& s, const PromptTemplate& prompt) {
    {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = text_.find(s.id);
        if (it != text_.end()) return it->second;
    }
    TextCue cue = inner_.text_cue(s, prompt);
    std::lock_guard<std::mutex> lock(mu_);
    text_.emplace(s.id, cue);
    return cue;
}

std::unique_ptr<CueProvider> make_cue_provider(const CueProviderConfig& cfg,
                                               const SyntheticSpec& gen_spec, uint64_t gen_seed,
                                               uint64_t provider_seed) {
    CueProviderConfig effective = cfg;
    if (const char* env = std::getenv("OMNIGAZE_EMBED_URL")) effective.endpoint = env;
    if (effective.mode == CueProviderConfig::Mode::remote)
        return std::make_unique<RemoteCueProvider>(effective);
    return std::make_unique<SyntheticCueProvider>(effective, gen_spec, gen_seed, provider_seed);
}

}  // namespace omnigaze
