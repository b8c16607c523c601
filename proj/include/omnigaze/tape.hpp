#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "omnigaze/tensor.hpp"

namespace omnigaze {

// Handle to a node on a Tape.
struct Var {
    uint32_t idx = UINT32_MAX;
    bool valid() const { return idx != UINT32_MAX; }
};

// Reverse-mode tape. Nodes are recorded in execution order; backward walks
// them once in reverse, which is a valid topological order because an op can
// only consume already-created nodes. A tape is confined to one thread.
//
// Parameters enter through param(&t) (cached by address, so reusing a weight
// across samples accumulates into one node) and receive their gradients in
// t.grad() when backward finishes. Calling backward again without zeroing
// accumulates, as optimizers expect.
class Tape {
public:
    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var param(Tensor& t);
    Var constant(Tensor v);

    // -- primitives ---------------------------------------------------------
    Var matmul(Var a, Var b);
    Var transpose(Var a);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);  // elementwise
    Var add_row(Var a, Var bias_row);
    Var scale(Var a, float s);
    Var add_scalar(Var a, float s);
    Var concat(Var a, Var b, int axis);
    Var stack_rows(std::span<const Var> rows);  // k tensors [1 x c] -> [k x c]
    Var mean_pool(Var a, int axis);             // axis 0: [1 x c]; axis 1: [r x 1]
    Var l2_norm_rowwise(Var a);                 // [r x c] -> [r x 1]
    Var softmax(Var a, int axis);
    Var layer_norm(Var x, Var gain, Var bias);  // per-row, eps 1e-5
    Var sigmoid(Var a);
    Var relu(Var a);
    Var log(Var a);  // requires strictly positive input
    Var clamp(Var a, float lo, float hi);
    Var sum(Var a);       // -> 1x1
    Var mean_all(Var a);  // -> 1x1

    // -- access -------------------------------------------------------------
    const Tensor& value(Var v) const;
    float scalar_value(Var v) const;
    // Node-local gradient after backward (empty if the node needs no grad).
    const std::vector<float>& node_grad(Var v) const;

    void backward(Var loss);

    size_t node_count() const { return nodes_.size(); }
    bool grad_enabled() const { return grad_enabled_; }

private:
    struct Node {
        Tensor value;
        std::vector<float> grad;
        bool requires_grad = false;
        Tensor* bound = nullptr;
        std::function<void(Tape&)> back;
    };

    Var push(Tensor value, bool requires_grad, std::function<void(Tape&)> back);
    Node& node(Var v);
    const Node& node(Var v) const;
    bool needs_grad(Var v) const { return node(v).requires_grad; }
    float* grad_ptr(Var v);

    // deque: node references stay valid while new ops are recorded
    std::deque<Node> nodes_;
    std::unordered_map<const Tensor*, uint32_t> param_cache_;
    bool grad_enabled_;
};

}  // namespace omnigaze
