#pragma once

#include <string>
#include <utility>
#include <vector>

#include "omnigaze/geometry.hpp"
#include "omnigaze/rng.hpp"
#include "omnigaze/tape.hpp"
#include "omnigaze/tensor.hpp"

namespace omnigaze {

using NamedParams = std::vector<std::pair<std::string, Tensor*>>;

struct Linear {
    Tensor w;  // [in x out]
    Tensor b;  // [1 x out]
};

// Affine chain with relu on hidden layers and identity on the output.
struct Mlp {
    std::vector<Linear> layers;
    size_t in_width() const { return layers.front().w.rows(); }
    size_t out_width() const { return layers.back().w.cols(); }
};

// Single-head cross-attention: softmax(Q K^T / sqrt(d)) V followed by W_o.
struct CrossAttentionParams {
    Tensor w_q;  // [d_q x d]
    Tensor w_k;  // [d_kv x d]
    Tensor w_v;  // [d_kv x d]
    Tensor w_o;  // [d x d]
    size_t width() const { return w_q.cols(); }
};

// Teacher and student share this architecture: feature encoder plus a
// two-output head regressing (yaw, pitch).
struct GazeEstimatorParams {
    Mlp encoder;
    Mlp head;
    size_t feature_width() const { return encoder.in_width(); }
};

// Xavier-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases.
Linear make_linear(size_t in, size_t out, Rng& rng);
Mlp make_mlp(const std::vector<size_t>& dims, Rng& rng);
CrossAttentionParams make_cross_attention(size_t d_q, size_t d_kv, size_t d, Rng& rng);
GazeEstimatorParams make_estimator(size_t d_x, size_t hidden, size_t d_enc, Rng& rng);

Var linear_forward(Tape& t, Linear& p, Var x);
Var mlp_forward(Tape& t, Mlp& p, Var x);
Var cross_attention(Tape& t, CrossAttentionParams& p, Var query_tokens, Var kv_tokens);
// features [B x d_x] -> predictions [B x 2], differentiable end to end.
Var estimator_forward(Tape& t, GazeEstimatorParams& p, Var features);

// Inference-only forward on a gradient-disabled tape.
Tensor estimator_predict(GazeEstimatorParams& p, const Tensor& features);
SphericalGaze gaze_from_row(const Tensor& predictions, size_t row);

NamedParams named_params(Mlp& p, const std::string& prefix);
NamedParams named_params(CrossAttentionParams& p, const std::string& prefix);
NamedParams named_params(GazeEstimatorParams& p, const std::string& prefix = "");
std::vector<Tensor*> param_list(const NamedParams& np);

// Deep copy that preserves values but not gradient buffers.
GazeEstimatorParams clone(const GazeEstimatorParams& p);

}  // namespace omnigaze
