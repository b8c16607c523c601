#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace omnigaze {

// Dense row-major f32 matrix. Vectors are 1 x n, scalars 1 x 1. Carries an
// optional gradient buffer of identical shape, filled by Tape::backward for
// tensors marked requires_grad.
class Tensor {
public:
    Tensor() = default;
    Tensor(size_t rows, size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0f) {}

    static Tensor full(size_t rows, size_t cols, float v);
    static Tensor from_rows(std::initializer_list<std::initializer_list<float>> rows);
    static Tensor row(std::initializer_list<float> values);
    static Tensor row(const std::vector<float>& values);
    static Tensor scalar(float v);

    size_t rows() const { return rows_; }
    size_t cols() const { return cols_; }
    size_t size() const { return data_.size(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }

    float& at(size_t r, size_t c) { return data_[r * cols_ + c]; }
    float at(size_t r, size_t c) const { return data_[r * cols_ + c]; }
    float& operator[](size_t i) { return data_[i]; }
    float operator[](size_t i) const { return data_[i]; }

    bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
    std::string shape_str() const;

    bool all_finite() const;

    // Gradient buffer; allocated zeroed on first access.
    bool requires_grad = false;
    std::vector<float>& grad();
    const std::vector<float>& grad() const { return grad_; }
    bool has_grad() const { return !grad_.empty(); }
    void zero_grad();

private:
    size_t rows_ = 0, cols_ = 0;
    std::vector<float> data_;
    std::vector<float> grad_;
};

}  // namespace omnigaze
