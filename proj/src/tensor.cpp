#include "omnigaze/tensor.hpp"

#include <cmath>

#include "omnigaze/errors.hpp"

namespace omnigaze {

Tensor Tensor::full(size_t rows, size_t cols, float v) {
    Tensor t(rows, cols);
    for (auto& x : t.data_) x = v;
    return t;
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<float>> rows) {
    const size_t r = rows.size();
    const size_t c = r ? rows.begin()->size() : 0;
    Tensor t(r, c);
    size_t i = 0;
    for (const auto& row : rows) {
        if (row.size() != c) throw ShapeError("Tensor::from_rows: ragged rows");
        for (float v : row) t.data_[i++] = v;
    }
    return t;
}

Tensor Tensor::row(std::initializer_list<float> values) {
    Tensor t(1, values.size());
    size_t i = 0;
    for (float v : values) t.data_[i++] = v;
    return t;
}

Tensor Tensor::row(const std::vector<float>& values) {
    Tensor t(1, values.size());
    for (size_t i = 0; i < values.size(); ++i) t.data_[i] = values[i];
    return t;
}

Tensor Tensor::scalar(float v) {
    Tensor t(1, 1);
    t.data_[0] = v;
    return t;
}

std::string Tensor::shape_str() const {
    return "[" + std::to_string(rows_) + "x" + std::to_string(cols_) + "]";
}

bool Tensor::all_finite() const {
    for (float v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

std::vector<float>& Tensor::grad() {
    if (grad_.empty()) grad_.assign(data_.size(), 0.0f);
    return grad_;
}

void Tensor::zero_grad() { grad_.assign(data_.size(), 0.0f); }

}  // namespace omnigaze
