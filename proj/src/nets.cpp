#include "omnigaze/nets.hpp"

#include <cmath>

#include "omnigaze/errors.hpp"

namespace omnigaze {

Linear make_linear(size_t in, size_t out, Rng& rng) {
    if (in == 0 || out == 0) throw InvalidArgument("make_linear: zero width");
    Linear l{Tensor(in, out), Tensor(1, out)};
    const float bound = std::sqrt(6.0f / static_cast<float>(in + out));
    for (size_t i = 0; i < l.w.size(); ++i) l.w[i] = rng.uniform_f(-bound, bound);
    l.w.requires_grad = true;
    l.b.requires_grad = true;
    return l;
}

Mlp make_mlp(const std::vector<size_t>& dims, Rng& rng) {
    if (dims.size() < 2) throw InvalidArgument("make_mlp: need at least input and output widths");
    Mlp m;
    for (size_t i = 0; i + 1 < dims.size(); ++i) m.layers.push_back(make_linear(dims[i], dims[i + 1], rng));
    return m;
}

CrossAttentionParams make_cross_attention(size_t d_q, size_t d_kv, size_t d, Rng& rng) {
    if (d == 0) throw InvalidArgument("make_cross_attention: zero model width");
    auto mat = [&rng](size_t r, size_t c) {
        Tensor t(r, c);
        const float bound = std::sqrt(6.0f / static_cast<float>(r + c));
        for (size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform_f(-bound, bound);
        t.requires_grad = true;
        return t;
    };
    return CrossAttentionParams{mat(d_q, d), mat(d_kv, d), mat(d_kv, d), mat(d, d)};
}

GazeEstimatorParams make_estimator(size_t d_x, size_t hidden, size_t d_enc, Rng& rng) {
    GazeEstimatorParams p;
    p.encoder = make_mlp({d_x, hidden, d_enc}, rng);
    p.head = make_mlp({d_enc, hidden, 2}, rng);
    return p;
}

Var linear_forward(Tape& t, Linear& p, Var x) {
    return t.add_row(t.matmul(x, t.param(p.w)), t.param(p.b));
}

Var mlp_forward(Tape& t, Mlp& p, Var x) {
    const Tensor& in = t.value(x);
    if (in.cols() != p.in_width())
        throw ShapeError("mlp_forward: input " + in.shape_str() + " vs first layer [" +
                         std::to_string(p.in_width()) + "x" +
                         std::to_string(p.layers.front().w.cols()) + "]");
    Var h = x;
    for (size_t i = 0; i < p.layers.size(); ++i) {
        h = linear_forward(t, p.layers[i], h);
        if (i + 1 < p.layers.size()) h = t.relu(h);
    }
    return h;
}

Var cross_attention(Tape& t, CrossAttentionParams& p, Var query_tokens, Var kv_tokens) {
    const Tensor& q = t.value(query_tokens);
    const Tensor& kv = t.value(kv_tokens);
    if (q.rows() == 0 || kv.rows() == 0)
        throw InvalidArgument("cross_attention: empty token set");
    if (q.cols() != p.w_q.rows())
        throw ShapeError("cross_attention: query " + q.shape_str() + " vs W_q " +
                         p.w_q.shape_str());
    if (kv.cols() != p.w_k.rows())
        throw ShapeError("cross_attention: kv " + kv.shape_str() + " vs W_k " +
                         p.w_k.shape_str());
    Var Q = t.matmul(query_tokens, t.param(p.w_q));
    Var K = t.matmul(kv_tokens, t.param(p.w_k));
    Var V = t.matmul(kv_tokens, t.param(p.w_v));
    const float inv_sqrt_d = 1.0f / std::sqrt(static_cast<float>(p.width()));
    Var scores = t.scale(t.matmul(Q, t.transpose(K)), inv_sqrt_d);
    Var weights = t.softmax(scores, 1);
    return t.matmul(t.matmul(weights, V), t.param(p.w_o));
}

Var estimator_forward(Tape& t, GazeEstimatorParams& p, Var features) {
    return mlp_forward(t, p.head, mlp_forward(t, p.encoder, features));
}

Tensor estimator_predict(GazeEstimatorParams& p, const Tensor& features) {
    Tape t(false);
    return t.value(estimator_forward(t, p, t.constant(features)));
}

SphericalGaze gaze_from_row(const Tensor& predictions, size_t row) {
    if (predictions.cols() != 2)
        throw ShapeError("gaze_from_row: expected [Bx2], got " + predictions.shape_str());
    return SphericalGaze{predictions.at(row, 0), predictions.at(row, 1)};
}

NamedParams named_params(Mlp& p, const std::string& prefix) {
    NamedParams np;
    for (size_t i = 0; i < p.layers.size(); ++i) {
        np.emplace_back(prefix + ".l" + std::to_string(i) + ".w", &p.layers[i].w);
        np.emplace_back(prefix + ".l" + std::to_string(i) + ".b", &p.layers[i].b);
    }
    return np;
}

NamedParams named_params(CrossAttentionParams& p, const std::string& prefix) {
    return {{prefix + ".w_q", &p.w_q},
            {prefix + ".w_k", &p.w_k},
            {prefix + ".w_v", &p.w_v},
            {prefix + ".w_o", &p.w_o}};
}

NamedParams named_params(GazeEstimatorParams& p, const std::string& prefix) {
    NamedParams np = named_params(p.encoder, prefix + "encoder");
    NamedParams head = named_params(p.head, prefix + "head");
    np.insert(np.end(), head.begin(), head.end());
    return np;
}

std::vector<Tensor*> param_list(const NamedParams& np) {
    std::vector<Tensor*> out;
    out.reserve(np.size());
    for (const auto& [name, t] : np) out.push_back(t);
    return out;
}

GazeEstimatorParams clone(const GazeEstimatorParams& p) {
    GazeEstimatorParams c = p;
    for (auto& mlp : {&c.encoder, &c.head})
        for (auto& l : mlp->layers) {
            l.w.zero_grad();
            l.b.zero_grad();
        }
    return c;
}

}  // namespace omnigaze
