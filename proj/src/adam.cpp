#include "omnigaze/adam.hpp"

#include <cmath>

#include "omnigaze/errors.hpp"
#include "omnigaze/kernels.hpp"

namespace omnigaze {

Adam::Adam(std::vector<Tensor*> params, const AdamConfig& cfg) : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (Tensor* p : params_) {
        m_.emplace_back(p->size(), 0.0f);
        v_.emplace_back(p->size(), 0.0f);
    }
}

void Adam::step() {
    ++step_count_;
    // Bias corrections once per step in double, identically on every ISA lane.
    const float inv_bc1 =
        static_cast<float>(1.0 / (1.0 - std::pow(static_cast<double>(cfg_.beta1), step_count_)));
    const float inv_bc2 =
        static_cast<float>(1.0 / (1.0 - std::pow(static_cast<double>(cfg_.beta2), step_count_)));
    const float wd_mult = 1.0f - cfg_.lr * cfg_.weight_decay;
    const auto& K = kernels::active();
    for (size_t i = 0; i < params_.size(); ++i) {
        Tensor* p = params_[i];
        if (m_[i].size() != p->size())
            throw ShapeError("adam: parameter " + std::to_string(i) + " changed size");
        auto& g = p->grad();  // zeros if never written
        K.adam_update(p->data(), g.data(), m_[i].data(), v_[i].data(), p->size(), cfg_.lr,
                      cfg_.beta1, cfg_.beta2, cfg_.eps, wd_mult, inv_bc1, inv_bc2);
    }
}

void Adam::zero_grad() {
    for (Tensor* p : params_) p->zero_grad();
}

}  // namespace omnigaze
