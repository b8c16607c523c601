#include "omnigaze/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "omnigaze/errors.hpp"

using nlohmann::json;

namespace omnigaze {

namespace {

constexpr char kMagic[4] = {'O', 'G', 'Z', 'C'};

void put_u32_le(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64_le(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t get_u32_le(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint64_t get_u64_le(const unsigned char* p) {
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const NamedParams& params,
                     const json& extra_metadata) {
    json meta = extra_metadata;
    json tensors = json::array();
    for (const auto& [name, t] : params) {
        json tj;
        tj["name"] = name;
        tj["rows"] = t->rows();
        tj["cols"] = t->cols();
        tensors.push_back(std::move(tj));
    }
    meta["tensors"] = std::move(tensors);
    meta["dtype"] = "f32";
    const std::string meta_str = meta.dump();

    std::string body;
    body.append(kMagic, 4);
    put_u32_le(body, kCheckpointVersion);
    put_u64_le(body, meta_str.size());
    body += meta_str;
    for (const auto& [name, t] : params)
        for (size_t i = 0; i < t->size(); ++i) {
            const uint32_t bits = std::bit_cast<uint32_t>((*t)[i]);
            put_u32_le(body, bits);
        }

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!out) throw IoError("write failed for '" + path + "'");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto* p = reinterpret_cast<const unsigned char*>(body.data());
    if (body.size() < 16 || std::memcmp(p, kMagic, 4) != 0)
        throw ParseError("checkpoint '" + path + "': bad magic");
    const uint32_t version = get_u32_le(p + 4);
    if (version != kCheckpointVersion)
        throw ParseError("checkpoint '" + path + "': version " + std::to_string(version) +
                         " unsupported (want " + std::to_string(kCheckpointVersion) + ")");
    const uint64_t meta_len = get_u64_le(p + 8);
    if (meta_len > body.size() - 16)
        throw ParseError("checkpoint '" + path + "': truncated metadata");
    json meta;
    try {
        meta = json::parse(body.substr(16, meta_len));
    } catch (const json::exception& e) {
        throw ParseError("checkpoint '" + path + "': metadata: " + e.what());
    }
    if (meta.value("dtype", "") != "f32")
        throw ParseError("checkpoint '" + path + "': unsupported dtype");

    LoadedCheckpoint out;
    size_t offset = 16 + meta_len;
    uint64_t declared = 0;
    for (const auto& tj : meta.at("tensors"))
        declared += tj.at("rows").get<uint64_t>() * tj.at("cols").get<uint64_t>();
    if (offset + declared * 4 != body.size())
        throw ParseError("checkpoint '" + path + "': payload length " +
                         std::to_string(body.size() - offset) + " does not match declared " +
                         std::to_string(declared * 4));
    for (const auto& tj : meta.at("tensors")) {
        const size_t rows = tj.at("rows").get<size_t>();
        const size_t cols = tj.at("cols").get<size_t>();
        Tensor t(rows, cols);
        for (size_t i = 0; i < t.size(); ++i) {
            t[i] = std::bit_cast<float>(get_u32_le(p + offset));
            offset += 4;
        }
        out.tensors.emplace_back(tj.at("name").get<std::string>(), std::move(t));
    }
    out.metadata = std::move(meta);
    return out;
}

void load_into(const LoadedCheckpoint& ckpt, const NamedParams& params) {
    if (ckpt.tensors.size() != params.size())
        throw ParseError("checkpoint: " + std::to_string(ckpt.tensors.size()) +
                         " tensors vs model's " + std::to_string(params.size()));
    for (size_t i = 0; i < params.size(); ++i) {
        const auto& [name, loaded] = ckpt.tensors[i];
        const auto& [want_name, dst] = params[i];
        if (name != want_name)
            throw ParseError("checkpoint: tensor '" + name + "' where '" + want_name +
                             "' expected");
        if (!loaded.same_shape(*dst))
            throw ShapeError("checkpoint: tensor '" + name + "' is " + loaded.shape_str() +
                             ", model wants " + dst->shape_str());
        for (size_t k = 0; k < dst->size(); ++k) (*dst)[k] = loaded[k];
    }
}

void save_estimator(const std::string& path, GazeEstimatorParams& model, uint64_t config_hash,
                    int epoch) {
    json meta;
    meta["model"] = "gaze_estimator";
    meta["config_hash"] = config_hash;
    meta["epoch"] = epoch;
    json arch;
    arch["d_x"] = model.feature_width();
    arch["hidden"] = model.encoder.layers.front().w.cols();
    arch["d_enc"] = model.encoder.out_width();
    meta["arch"] = std::move(arch);
    save_checkpoint(path, named_params(model), meta);
}

GazeEstimatorParams load_estimator(const std::string& path) {
    LoadedCheckpoint ckpt = load_checkpoint(path);
    if (ckpt.metadata.value("model", "") != "gaze_estimator")
        throw ParseError("checkpoint '" + path + "': not a gaze estimator");
    const auto& arch = ckpt.metadata.at("arch");
    Rng rng(0);  // values are overwritten below
    GazeEstimatorParams model = make_estimator(arch.at("d_x").get<size_t>(),
                                               arch.at("hidden").get<size_t>(),
                                               arch.at("d_enc").get<size_t>(), rng);
    load_into(ckpt, named_params(model));
    return model;
}

void save_reward(const std::string& path, RewardModelParams& model,
                 const CueProviderConfig& cues, uint64_t config_hash, int epoch) {
    json meta;
    meta["model"] = "reward";
    meta["config_hash"] = config_hash;
    meta["epoch"] = epoch;
    json arch;
    arch["d_v"] = cues.d_v;
    arch["d_t"] = cues.d_t;
    arch["d"] = model.width();
    arch["hidden"] = model.conf_head.layers.front().w.cols();
    meta["arch"] = std::move(arch);
    save_checkpoint(path, named_params(model), meta);
}

RewardModelParams load_reward(const std::string& path) {
    LoadedCheckpoint ckpt = load_checkpoint(path);
    if (ckpt.metadata.value("model", "") != "reward")
        throw ParseError("checkpoint '" + path + "': not a reward model");
    const auto& arch = ckpt.metadata.at("arch");
    CueProviderConfig cues;
    cues.d_v = arch.at("d_v").get<size_t>();
    cues.d_t = arch.at("d_t").get<size_t>();
    Rng rng(0);
    RewardModelParams model =
        make_reward_model(cues, arch.at("d").get<size_t>(), arch.at("hidden").get<size_t>(), rng);
    load_into(ckpt, named_params(model));
    return model;
}

}  // namespace omnigaze
