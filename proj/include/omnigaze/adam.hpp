#pragma once

#include <cstdint>
#include <vector>

#include "omnigaze/tensor.hpp"

namespace omnigaze {

struct AdamConfig {
    float lr = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
    float weight_decay = 0.0f;  // decoupled: params scaled by (1 - lr*wd) each step
};

// Adam with bias correction and decoupled weight decay. Moment buffers live
// here, matched one-to-one with the registered parameter tensors.
class Adam {
public:
    Adam() = default;
    Adam(std::vector<Tensor*> params, const AdamConfig& cfg);

    // Consumes the parameters' grad buffers; missing buffers count as zero.
    void step();
    void zero_grad();

    int64_t step_count() const { return step_count_; }
    const AdamConfig& config() const { return cfg_; }

private:
    std::vector<Tensor*> params_;
    std::vector<std::vector<float>> m_, v_;
    AdamConfig cfg_;
    int64_t step_count_ = 0;
};

}  // namespace omnigaze
