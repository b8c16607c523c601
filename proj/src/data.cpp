#include "omnigaze/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "omnigaze/errors.hpp"
#include "omnigaze/rng.hpp"

using nlohmann::json;

namespace omnigaze {

void Dataset::validate() const {
    std::unordered_set<std::string> seen;
    for (const auto& s : samples) {
        if (!seen.insert(s.id).second)
            throw InvalidArgument("dataset '" + name + "': duplicate id '" + s.id + "'");
        if (s.features.size() != feature_width)
            throw InvalidArgument("dataset '" + name + "': sample '" + s.id + "' has width " +
                                  std::to_string(s.features.size()) + ", expected " +
                                  std::to_string(feature_width));
    }
}

Tensor synthetic_mixing_matrix(const SyntheticSpec& spec, uint64_t seed) {
    Rng rng = Rng(Rng::mix_seed(seed, "synthetic-mixing-matrix"));
    const size_t latent = 3 + spec.d_z;
    Tensor a(spec.d_x, latent);
    const float scale = 1.0f / std::sqrt(static_cast<float>(latent));
    for (size_t i = 0; i < a.size(); ++i) a[i] = rng.normal_f() * scale;
    return a;
}

namespace {

std::vector<float> unit_vector(size_t n, Rng& rng) {
    std::vector<float> v(n);
    float norm2 = 0.0f;
    for (auto& x : v) {
        x = rng.normal_f();
        norm2 += x * x;
    }
    const float inv = 1.0f / std::sqrt(std::max(norm2, 1e-12f));
    for (auto& x : v) x *= inv;
    return v;
}

Sample make_sample(const SyntheticSpec& spec, const Tensor& a, const std::string& id,
                   const std::string& source, const std::vector<float>& delta, Rng& rng) {
    SphericalGaze g{rng.uniform_f(spec.yaw_min, spec.yaw_max),
                    rng.uniform_f(spec.pitch_min, spec.pitch_max)};
    const DirectionVector d = to_direction(g);
    std::vector<float> latent(3 + spec.d_z);
    latent[0] = d.x;
    latent[1] = d.y;
    latent[2] = d.z;
    for (size_t i = 0; i < spec.d_z; ++i) latent[3 + i] = delta[i] + rng.normal_f();
    Sample s;
    s.id = id;
    s.source = source;
    s.label = g;
    s.features.resize(spec.d_x);
    for (size_t r = 0; r < spec.d_x; ++r) {
        float acc = 0.0f;
        for (size_t c = 0; c < latent.size(); ++c) acc += a.at(r, c) * latent[c];
        s.features[r] = acc + spec.sigma_x * rng.normal_f();
    }
    return s;
}

}  // namespace

SyntheticBundle generate_synthetic(const SyntheticSpec& spec, size_t n_labeled,
                                   size_t n_unlabeled, uint64_t seed) {
    const Tensor a = synthetic_mixing_matrix(spec, seed);
    const uint64_t spec_hash = Rng::mix_seed(seed, "synthetic-spec", spec.d_x * 1000 + spec.d_z);

    std::vector<float> zero_delta(spec.d_z, 0.0f);
    Rng delta_rng(Rng::mix_seed(seed, "domain-shift"));
    std::vector<float> delta = unit_vector(spec.d_z, delta_rng);
    for (auto& x : delta) x *= spec.delta_norm;

    SyntheticBundle out;
    out.labeled.name = "synthetic-labeled";
    out.labeled.feature_width = spec.d_x;
    out.labeled.spec_hash = spec_hash;
    Rng lrng(Rng::mix_seed(seed, "labeled-samples"));
    for (size_t i = 0; i < n_labeled; ++i)
        out.labeled.samples.push_back(
            make_sample(spec, a, "L" + std::to_string(i), "synthetic-source", zero_delta, lrng));

    out.unlabeled_oracle.name = "synthetic-unlabeled-oracle";
    out.unlabeled_oracle.feature_width = spec.d_x;
    out.unlabeled_oracle.spec_hash = spec_hash;
    Rng urng(Rng::mix_seed(seed, "unlabeled-samples"));
    for (size_t i = 0; i < n_unlabeled; ++i)
        out.unlabeled_oracle.samples.push_back(
            make_sample(spec, a, "U" + std::to_string(i), "synthetic-shifted", delta, urng));

    out.unlabeled = out.unlabeled_oracle;
    out.unlabeled.name = "synthetic-unlabeled";
    for (auto& s : out.unlabeled.samples) s.label.reset();
    return out;
}

const PseudoLabelSet::Entry& PseudoLabelSet::at(const std::string& id) const {
    auto it = entries.find(id);
    if (it == entries.end()) throw InvalidArgument("pseudo-labels: unknown id '" + id + "'");
    return it->second;
}

CorruptionResult corrupt_labels(const PseudoLabelSet& pseudo, float rho, float magnitude_deg,
                                uint64_t seed) {
    if (rho < 0.0f || rho > 1.0f) throw InvalidArgument("corrupt_labels: rho outside [0,1]");
    CorruptionResult out;
    out.labels = pseudo;
    if (pseudo.entries.empty() || rho == 0.0f) return out;

    std::vector<std::string> ids;
    ids.reserve(pseudo.entries.size());
    for (const auto& [id, e] : pseudo.entries) ids.push_back(id);
    std::sort(ids.begin(), ids.end());  // map order is not deterministic; id order is

    Rng rng(Rng::mix_seed(seed, "label-corruption"));
    rng.shuffle(ids);
    const size_t n_corrupt = static_cast<size_t>(rho * static_cast<double>(ids.size()));

    const double deg_to_rad = 3.14159265358979323846 / 180.0;
    for (size_t i = 0; i < n_corrupt; ++i) {
        const std::string& id = ids[i];
        auto& entry = out.labels.entries.at(id);
        const DirectionVector v = to_direction(entry.label);

        // Random axis in the tangent plane at v, so rotating by alpha moves
        // the direction by exactly alpha.
        Rng srng = rng.fork("corrupt-sample", i);
        float ax = srng.normal_f(), ay = srng.normal_f(), az = srng.normal_f();
        const float dotv = ax * v.x + ay * v.y + az * v.z;
        ax -= dotv * v.x;
        ay -= dotv * v.y;
        az -= dotv * v.z;
        float an = std::sqrt(ax * ax + ay * ay + az * az);
        if (an < 1e-6f) {  // re-draw once; twice-degenerate is not practically reachable
            ax = v.y;
            ay = -v.x;
            az = 0.0f;
            an = std::sqrt(ax * ax + ay * ay + az * az);
            if (an < 1e-6f) {
                ax = 0.0f;
                ay = v.z;
                az = -v.y;
                an = std::sqrt(ax * ax + ay * ay + az * az);
            }
        }
        ax /= an;
        ay /= an;
        az /= an;

        const double alpha =
            (magnitude_deg + srng.uniform() * 10.0) * deg_to_rad;  // [mag, mag+10) degrees
        const double c = std::cos(alpha), s = std::sin(alpha);
        // Rodrigues with axis k perpendicular to v: v' = v c + (k x v) s
        const double kx = ax, ky = ay, kz = az;
        DirectionVector rotated{
            static_cast<float>(v.x * c + (ky * v.z - kz * v.y) * s),
            static_cast<float>(v.y * c + (kz * v.x - kx * v.z) * s),
            static_cast<float>(v.z * c + (kx * v.y - ky * v.x) * s)};
        entry.label = to_spherical(rotated);
        out.corrupted_ids.insert(id);
    }
    return out;
}

// ---------------------------------------------------------------------------

Dataset load_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    Dataset ds;
    ds.name = path;
    std::string line;
    long lineno = 0;
    std::unordered_set<std::string> seen;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(std::string("jsonl: ") + e.what(), lineno);
        }
        if (!j.is_object()) throw ParseError("jsonl: line is not an object", lineno);
        Sample s;
        try {
            s.id = j.at("id").get<std::string>();
            for (const auto& f : j.at("features")) s.features.push_back(f.get<float>());
            if (j.contains("source")) s.source = j.at("source").get<std::string>();
        } catch (const json::exception& e) {
            throw ParseError(std::string("jsonl: ") + e.what(), lineno);
        }
        const bool has_yaw = j.contains("yaw");
        const bool has_pitch = j.contains("pitch");
        if (has_yaw != has_pitch)
            throw ParseError("jsonl: labels are all-or-nothing; sample '" + s.id +
                                 "' has only one of yaw/pitch",
                             lineno);
        if (has_yaw)
            s.label = SphericalGaze{j.at("yaw").get<float>(), j.at("pitch").get<float>()};
        if (!seen.insert(s.id).second)
            throw ParseError("jsonl: duplicate id '" + s.id + "'", lineno);
        if (ds.samples.empty())
            ds.feature_width = s.features.size();
        else if (s.features.size() != ds.feature_width)
            throw ParseError("jsonl: feature width " + std::to_string(s.features.size()) +
                                 " differs from first record's " +
                                 std::to_string(ds.feature_width),
                             lineno);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

void save_jsonl(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    for (const auto& s : ds.samples) {
        json j;
        j["id"] = s.id;
        json feats = json::array();
        for (float f : s.features) feats.push_back(f);
        j["features"] = std::move(feats);
        if (s.label) {
            j["yaw"] = s.label->yaw;
            j["pitch"] = s.label->pitch;
        }
        j["source"] = s.source;
        out << j.dump() << "\n";
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------

std::vector<PairedBatch> balanced_batches(const Dataset& labeled, const Dataset& unlabeled,
                                          size_t batch_size, uint64_t seed, size_t epoch) {
    if (batch_size < 2) throw InvalidArgument("balanced_batches: batch_size must be >= 2");
    if (labeled.empty() || unlabeled.empty())
        throw InvalidArgument("balanced_batches: empty pool");
    const size_t quota_l = batch_size / 2;
    const size_t quota_u = batch_size - quota_l;

    struct Pool {
        size_t n;
        std::vector<size_t> order;
        size_t cursor = 0;
        Rng rng;
        Pool(size_t n, uint64_t seed) : n(n), rng(seed) {
            order.resize(n);
            for (size_t i = 0; i < n; ++i) order[i] = i;
            rng.shuffle(order);
        }
        // Takes k indices, reshuffling when the pool wraps.
        void take(size_t k, std::vector<size_t>& out) {
            for (size_t i = 0; i < k; ++i) {
                if (cursor == n) {
                    cursor = 0;
                    rng.shuffle(order);
                }
                out.push_back(order[cursor++]);
            }
        }
    };

    Pool pl(labeled.size(), Rng::mix_seed(seed, "batch-labeled", epoch));
    Pool pu(unlabeled.size(), Rng::mix_seed(seed, "batch-unlabeled", epoch));

    // The epoch ends when the larger pool is exhausted; its final, possibly
    // partial quota still forms a step so every one of its samples appears.
    const size_t steps_l = (labeled.size() + quota_l - 1) / quota_l;
    const size_t steps_u = (unlabeled.size() + quota_u - 1) / quota_u;
    const bool unlabeled_defines = unlabeled.size() >= labeled.size();
    const size_t steps = unlabeled_defines ? steps_u : steps_l;

    std::vector<PairedBatch> out;
    out.reserve(steps);
    for (size_t s = 0; s < steps; ++s) {
        PairedBatch b;
        size_t take_l = quota_l, take_u = quota_u;
        if (s + 1 == steps) {
            if (unlabeled_defines)
                take_u = unlabeled.size() - s * quota_u;
            else
                take_l = labeled.size() - s * quota_l;
        }
        pl.take(take_l, b.labeled);
        pu.take(take_u, b.unlabeled);
        out.push_back(std::move(b));
    }
    return out;
}

Tensor features_matrix(const Dataset& ds, const std::vector<size_t>& indices) {
    Tensor t(indices.size(), ds.feature_width);
    for (size_t r = 0; r < indices.size(); ++r) {
        const Sample& s = ds.samples.at(indices[r]);
        for (size_t c = 0; c < ds.feature_width; ++c) t.at(r, c) = s.features[c];
    }
    return t;
}

Tensor labels_matrix(const Dataset& ds, const std::vector<size_t>& indices) {
    Tensor t(indices.size(), 2);
    for (size_t r = 0; r < indices.size(); ++r) {
        const Sample& s = ds.samples.at(indices[r]);
        if (!s.label) throw InvalidArgument("labels_matrix: sample '" + s.id + "' is unlabeled");
        t.at(r, 0) = s.label->yaw;
        t.at(r, 1) = s.label->pitch;
    }
    return t;
}

}  // namespace omnigaze
