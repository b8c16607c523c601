#include "omnigaze/tape.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "omnigaze/errors.hpp"
#include "omnigaze/kernels.hpp"

namespace omnigaze {

namespace {
constexpr float kLayerNormEps = 1e-5f;

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                         b.shape_str());
}
}  // namespace

Var Tape::push(Tensor value, bool requires_grad, std::function<void(Tape&)> back) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad && grad_enabled_;
    if (n.requires_grad) n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{static_cast<uint32_t>(nodes_.size() - 1)};
}

Tape::Node& Tape::node(Var v) { return nodes_.at(v.idx); }
const Tape::Node& Tape::node(Var v) const { return nodes_.at(v.idx); }

float* Tape::grad_ptr(Var v) {
    Node& n = node(v);
    if (!n.requires_grad) return nullptr;
    if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0f);
    return n.grad.data();
}

Var Tape::param(Tensor& t) {
    auto it = param_cache_.find(&t);
    if (it != param_cache_.end()) return Var{it->second};
    Node n;
    n.value = t;  // copy; the live parameter may be updated while the tape lingers
    n.requires_grad = t.requires_grad && grad_enabled_;
    n.bound = &t;
    nodes_.push_back(std::move(n));
    Var v{static_cast<uint32_t>(nodes_.size() - 1)};
    param_cache_.emplace(&t, v.idx);
    return v;
}

Var Tape::constant(Tensor v) { return push(std::move(v), false, nullptr); }

const Tensor& Tape::value(Var v) const { return node(v).value; }

float Tape::scalar_value(Var v) const {
    const Tensor& t = node(v).value;
    if (t.size() != 1) throw ShapeError("scalar_value: tensor " + t.shape_str() + " is not 1x1");
    return t[0];
}

const std::vector<float>& Tape::node_grad(Var v) const { return node(v).grad; }

// ---------------------------------------------------------------------------

Var Tape::matmul(Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.cols() != B.rows())
        throw ShapeError("matmul: inner dims differ, lhs " + A.shape_str() + " rhs " +
                         B.shape_str());
    const auto& K = kernels::active();
    Tensor C(A.rows(), B.cols());
    K.gemm(A.data(), B.data(), C.data(), A.rows(), A.cols(), B.cols(), false);
    const bool rg = needs_grad(a) || needs_grad(b);
    Var out = push(std::move(C), rg, nullptr);
    if (node(out).requires_grad) {
        node(out).back = [a, b, out](Tape& t) {
            const auto& K = kernels::active();
            const Tensor& A = t.value(a);
            const Tensor& B = t.value(b);
            const float* g = t.node(out).grad.data();
            const size_t m = A.rows(), k = A.cols(), n = B.cols();
            if (float* ga = t.grad_ptr(a)) {
                std::vector<float> bt(B.size());
                K.transpose(B.data(), bt.data(), k, n);
                K.gemm(g, bt.data(), ga, m, n, k, true);
            }
            if (float* gb = t.grad_ptr(b)) {
                std::vector<float> at(A.size());
                K.transpose(A.data(), at.data(), m, k);
                K.gemm(at.data(), g, gb, k, m, n, true);
            }
        };
    }
    return out;
}

Var Tape::transpose(Var a) {
    const Tensor& A = value(a);
    const auto& K = kernels::active();
    Tensor C(A.cols(), A.rows());
    K.transpose(A.data(), C.data(), A.rows(), A.cols());
    Var out = push(std::move(C), needs_grad(a), nullptr);
    if (node(out).requires_grad) {
        node(out).back = [a, out](Tape& t) {
            if (float* ga = t.grad_ptr(a)) {
                const Tensor& C = t.value(out);
                const float* g = t.node(out).grad.data();
                std::vector<float> gt(C.size());
                kernels::active().transpose(g, gt.data(), C.rows(), C.cols());
                kernels::active().add(ga, gt.data(), ga, gt.size());
            }
        };
    }
    return out;
}

Var Tape::add(Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    check_same_shape(A, B, "add");
    const auto& K = kernels::active();
    Tensor C(A.rows(), A.cols());
    K.add(A.data(), B.data(), C.data(), A.size());
    Var out = push(std::move(C), needs_grad(a) || needs_grad(b), nullptr);
    if (node(out).requires_grad) {
        node(out).back = [a, b, out](Tape& t) {
            const float* g = t.node(out).grad.data();
            const size_t n = t.value(out).size();
            if (float* ga = t.grad_ptr(a)) kernels::active().add(ga, g, ga, n);
            if (float* gb = t.grad_ptr(b)) kernels::active().add(gb, g, gb, n);
        };
    }
    return out;
}

Var Tape::sub(Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    check_same_shape(A, B, "sub");
    const auto& K = kernels::active();
    Tensor C(A.rows(), A.cols());
    K.sub(A.data(), B.data(), C.data(), A.size());
    Var out = push(std::move(C), needs_grad(a) || needs_grad(b), nullptr);
    if (node(out).requires_grad) {
        node(out).back = [a, b, out](Tape& t) {
            const float* g = t.node(out).grad.data();
            const size_t n = t.value(out).size();
            if (float* ga = t.grad_ptr(a)) kernels::active().add(ga, g, ga, n);
            if (float* gb = t.grad_ptr(b)) kernels::active().axpy(-1.0f, g, gb, n);
        };
    }
    return out;
}

Var Tape::mul(Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    check_same_shape(A, B, "mul");
    const auto& K = kernels::active();
    Tensor C(A.rows(), A.cols());
    K.mul(A.data(), B.data(), C.data(), A.size());
    Var out = push(std::move(C), needs_grad(a) || needs_grad(b), nullptr);
    if (node(out).requires_grad) {
        node(out).back = [a, b, out](Tape& t) {
            const auto& K = kernels::active();
            const float* g = t.node(out).grad.data();
            const size_t n = t.value(out).size();
            std::vector<float> scratch(n);
            if (float* ga = t.grad_ptr(a)) {
                K.mul(g, t.value(b).data(), scratch.data(), n);
                K.add(ga, scratch.data(), ga, n);
            }
            if (float* gb = t.grad_ptr(b)) {
                K.mul(g, t.value(a).data(), scratch.data(), n);
                K.add(gb, scratch.data(), gb, n);
            }
        };
    }
    return out;
}

Var Tape::add_row(Var a, Var bias_row) {
    const Tensor& A = value(a);
    const Tensor& B = value(bias_row);
    if (B.rows() != 1 || B.cols() != A.cols())
        throw ShapeError("add_row: bias " + B.shape_str() + " does not broadcast over " +
                         A.shape_str());
    const auto& K = kernels::active();
    Tensor C(A.rows(), A.cols());
    for (size_t r = 0; r < A.rows(); ++r)
        K.add(A.data() + r * A.cols(), B.data(), C.data() + r * A.cols(), A.cols());
    Var out = push(std::move(C), needs_grad(a) || needs_grad(bias_row), nullptr);
    if (node(out).requires_grad) {
        node(out).back = [a, bias_row, out](Tape& t) {
            const Tensor& C = t.value(out);
            const float* g = t.node(out).grad.data();
            if (float* ga = t.grad_ptr(a)) kernels::active().add(ga, g, ga, C.size());
            if (float* gb = t.grad_ptr(bias_row)) {
                // column sums, rows in order
                for (size_t r = 0; r < C.rows(); ++r)
                    kernels::active().add(gb, g + r * C.cols(), gb, C.cols());
            }
        };
    }
    return out;
}

Var Tape::scale(Var a, float s) {
    const Tensor& A = value(a);
    const auto& K = kernels::active();
    Tensor C(A.rows(), A.cols());
    K.scale(A.data(), s, C.data(), A.size());
    Var out = push(std::move(C), needs_grad(a), nullptr);
    if (node(out).requires_grad) {
        node(out).back = [a, s, out](Tape& t) {
            if (float* ga = t.grad_ptr(a))
                kernels::active().axpy(s, t.node(out).grad.data(), ga, t.value(out).size());
        };
    }
    return out;
}

Var Tape::add_scalar(Var a, float s) {
    const Tensor& A = value(a);
    Tensor C(A.rows(), A.cols());
    for (size_t i = 0; i < A.size(); ++i) C[i] = A[i] + s;
    Var out = push(std::move(C), needs_grad(a), nullptr);
    if (node(out).requires_grad) {
        node(out).back = [a, out](Tape& t) {
            if (float* ga = t.grad_ptr(a))
                kernels::active().add(ga, t.node(out).grad.data(), ga, t.value(out).size());
        };
    }
    return out;
}

Var Tape::concat(Var a, Var b, int axis) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    Tensor C;
    if (axis == 0) {
        if (A.cols() != B.cols())
            throw ShapeError("concat(axis=0): " + A.shape_str() + " vs " + B.shape_str());
        C = Tensor(A.rows() + B.rows(), A.cols());
        std::memcpy(C.data(), A.data(), A.size() * sizeof(float));
        std::memcpy(C.data() + A.size(), B.data(), B.size() * sizeof(float));
    } else if (axis == 1) {
        if (A.rows() != B.rows())
            throw ShapeError("concat(axis=1): " + A.shape_str() + " vs " + B.shape_str());
        C = Tensor(A.rows(), A.cols() + B.cols());
        for (size_t r = 0; r < A.rows(); ++r) {
            std::memcpy(C.data() + r * C.cols(), A.data() + r * A.cols(),
                        A.cols() * sizeof(float));
            std::memcpy(C.data() + r * C.cols() + A.cols(), B.data() + r * B.cols(),
                        B.cols() * sizeof(float));
        }
    } else {
        throw InvalidArgument("concat: axis must be 0 or 1");
    }
    Var out = push(std::move(C), needs_grad(a) || needs_grad(b), nullptr);
    if (node(out).requires_grad) {
        node(out).back = [a, b, axis, out](Tape& t) {
            const Tensor& A = t.value(a);
            const Tensor& B = t.value(b);
            const Tensor& C = t.value(out);
            const float* g = t.node(out).grad.data();
            float* ga = t.grad_ptr(a);
            float* gb = t.grad_ptr(b);
            if (axis == 0) {
                if (ga) kernels::active().add(ga, g, ga, A.size());
                if (gb) kernels::active().add(gb, g + A.size(), gb, B.size());
            } else {
                for (size_t r = 0; r < C.rows(); ++r) {
                    if (ga)
                        kernels::active().add(ga + r * A.cols(), g + r * C.cols(),
                                              ga + r * A.cols(), A.cols());
                    if (gb)
                        kernels::active().add(gb + r * B.cols(), g + r * C.cols() + A.cols(),
                                              gb + r * B.cols(), B.cols());
                }
            }
        };
    }
    return out;
}

Var Tape::stack_rows(std::span<const Var> rows) {
    if (rows.empty()) throw InvalidArgument("stack_rows: empty input");
    const size_t c = value(rows[0]).cols();
    bool rg = false;
    for (Var v : rows) {
        const Tensor& t = value(v);
        if (t.rows() != 1 || t.cols() != c)
            throw ShapeError("stack_rows: expected [1x" + std::to_string(c) + "], got " +
                             t.shape_str());
        rg = rg || needs_grad(v);
    }
    Tensor C(rows.size(), c);
    for (size_t r = 0; r < rows.size(); ++r)
        std::memcpy(C.data() + r * c, value(rows[r]).data(), c * sizeof(float));
    std::vector<Var> parents(rows.begin(), rows.end());
    Var out = push(std::move(C), rg, nullptr);
    if (node(out).requires_grad) {
        node(out).back = [parents, out](Tape& t) {
            const Tensor& C = t.value(out);
            const float* g = t.node(out).grad.data();
            for (size_t r = 0; r < parents.size(); ++r)
                if (float* gp = t.grad_ptr(parents[r]))
                    kernels::active().add(gp, g + r * C.cols(), gp, C.cols());
        };
    }
    return out;
}

Var Tape::mean_pool(Var a, int axis) {
    const Tensor& A = value(a);
    if (axis != 0 && axis != 1) throw InvalidArgument("mean_pool: axis must be 0 or 1");
    Tensor C;
    if (axis == 0) {
        C = Tensor(1, A.cols());
        for (size_t r = 0; r < A.rows(); ++r)
            kernels::active().add(C.data(), A.data() + r * A.cols(), C.data(), A.cols());
        kernels::active().scale(C.data(), 1.0f / static_cast<float>(A.rows()), C.data(),
                                A.cols());
    } else {
        C = Tensor(A.rows(), 1);
        for (size_t r = 0; r < A.rows(); ++r) {
            float s = 0.0f;
            const float* row = A.data() + r * A.cols();
            for (size_t j = 0; j < A.cols(); ++j) s += row[j];
            C[r] = s / static_cast<float>(A.cols());
        }
    }
    Var out = push(std::move(C), needs_grad(a), nullptr);
    if (node(out).requires_grad) {
        node(out).back = [a, axis, out](Tape& t) {
            float* ga = t.grad_ptr(a);
            if (!ga) return;
            const Tensor& A = t.value(a);
            const float* g = t.node(out).grad.data();
            if (axis == 0) {
                const float inv = 1.0f / static_cast<float>(A.rows());
                for (size_t r = 0; r < A.rows(); ++r)
                    kernels::active().axpy(inv, g, ga + r * A.cols(), A.cols());
            } else {
                const float inv = 1.0f / static_cast<float>(A.cols());
                for (size_t r = 0; r < A.rows(); ++r)
                    for (size_t j = 0; j < A.cols(); ++j) ga[r * A.cols() + j] += g[r] * inv;
            }
        };
    }
    return out;
}

Var Tape::l2_norm_rowwise(Var a) {
    const Tensor& A = value(a);
    Tensor C(A.rows(), 1);
    for (size_t r = 0; r < A.rows(); ++r) {
        float s = 0.0f;
        const float* row = A.data() + r * A.cols();
        for (size_t j = 0; j < A.cols(); ++j) s += row[j] * row[j];
        C[r] = std::sqrt(s);
    }
    Var out = push(std::move(C), needs_grad(a), nullptr);
    if (node(out).requires_grad) {
        node(out).back = [a, out](Tape& t) {
            float* ga = t.grad_ptr(a);
            if (!ga) return;
            const Tensor& A = t.value(a);
            const Tensor& Y = t.value(out);
            const float* g = t.node(out).grad.data();
            for (size_t r = 0; r < A.rows(); ++r) {
                const float denom = std::max(Y[r], 1e-12f);
                const float coeff = g[r] / denom;
                kernels::active().axpy(coeff, A.data() + r * A.cols(), ga + r * A.cols(),
                                       A.cols());
            }
        };
    }
    return out;
}

Var Tape::softmax(Var a, int axis) {
    const Tensor& A = value(a);
    if (axis != 0 && axis != 1) throw InvalidArgument("softmax: axis must be 0 or 1");
    Tensor C(A.rows(), A.cols());
    const size_t outer = axis == 1 ? A.rows() : A.cols();
    const size_t inner = axis == 1 ? A.cols() : A.rows();
    const size_t ostride = axis == 1 ? A.cols() : 1;
    const size_t istride = axis == 1 ? 1 : A.cols();
    for (size_t o = 0; o < outer; ++o) {
        const float* src = A.data() + o * ostride;
        float* dst = C.data() + o * ostride;
        float mx = src[0];
        for (size_t i = 1; i < inner; ++i) mx = std::max(mx, src[i * istride]);
        float sum = 0.0f;
        for (size_t i = 0; i < inner; ++i) {
            const float e = std::exp(src[i * istride] - mx);
            dst[i * istride] = e;
            sum += e;
        }
        const float inv = 1.0f / sum;
        for (size_t i = 0; i < inner; ++i) dst[i * istride] *= inv;
    }
    Var out = push(std::move(C), needs_grad(a), nullptr);
    if (node(out).requires_grad) {
        node(out).back = [a, axis, out](Tape& t) {
            float* ga = t.grad_ptr(a);
            if (!ga) return;
            const Tensor& Y = t.value(out);
            const float* g = t.node(out).grad.data();
            const size_t outer = axis == 1 ? Y.rows() : Y.cols();
            const size_t inner = axis == 1 ? Y.cols() : Y.rows();
            const size_t ostride = axis == 1 ? Y.cols() : 1;
            const size_t istride = axis == 1 ? 1 : Y.cols();
            for (size_t o = 0; o < outer; ++o) {
                const float* y = Y.data() + o * ostride;
                const float* gy = g + o * ostride;
                float dot = 0.0f;
                for (size_t i = 0; i < inner; ++i) dot += gy[i * istride] * y[i * istride];
                for (size_t i = 0; i < inner; ++i)
                    ga[o * ostride + i * istride] += y[i * istride] * (gy[i * istride] - dot);
            }
        };
    }
    return out;
}

Var Tape::layer_norm(Var x, Var gain, Var bias) {
    const Tensor& X = value(x);
    const Tensor& G = value(gain);
    const Tensor& B = value(bias);
    if (X.cols() < 2)
        throw InvalidArgument("layer_norm: normalized extent must be >= 2, got " +
                              X.shape_str());
    if (G.rows() != 1 || G.cols() != X.cols() || B.rows() != 1 || B.cols() != X.cols())
        throw ShapeError("layer_norm: gain/bias " + G.shape_str() + "/" + B.shape_str() +
                         " vs input " + X.shape_str());
    const size_t R = X.rows(), C = X.cols();
    Tensor Y(R, C);
    std::vector<float> xhat(R * C), inv_std(R);
    for (size_t r = 0; r < R; ++r) {
        const float* row = X.data() + r * C;
        float mean = 0.0f;
        for (size_t j = 0; j < C; ++j) mean += row[j];
        mean /= static_cast<float>(C);
        float var = 0.0f;
        for (size_t j = 0; j < C; ++j) {
            const float d = row[j] - mean;
            var += d * d;
        }
        var /= static_cast<float>(C);
        const float inv = 1.0f / std::sqrt(var + kLayerNormEps);
        inv_std[r] = inv;
        for (size_t j = 0; j < C; ++j) {
            const float xh = (row[j] - mean) * inv;
            xhat[r * C + j] = xh;
            Y.at(r, j) = xh * G[j] + B[j];
        }
    }
    const bool rg = needs_grad(x) || needs_grad(gain) || needs_grad(bias);
    Var out = push(std::move(Y), rg, nullptr);
    if (node(out).requires_grad) {
        node(out).back = [x, gain, bias, out, xhat = std::move(xhat),
                          inv_std = std::move(inv_std)](Tape& t) {
            const Tensor& X = t.value(x);
            const Tensor& G = t.value(gain);
            const size_t R = X.rows(), C = X.cols();
            const float* g = t.node(out).grad.data();
            float* gx = t.grad_ptr(x);
            float* gg = t.grad_ptr(gain);
            float* gb = t.grad_ptr(bias);
            for (size_t r = 0; r < R; ++r) {
                const float* gy = g + r * C;
                const float* xh = xhat.data() + r * C;
                if (gg)
                    for (size_t j = 0; j < C; ++j) gg[j] += gy[j] * xh[j];
                if (gb)
                    for (size_t j = 0; j < C; ++j) gb[j] += gy[j];
                if (gx) {
                    float sum_dxhat = 0.0f, sum_dxhat_xhat = 0.0f;
                    for (size_t j = 0; j < C; ++j) {
                        const float dxh = gy[j] * G[j];
                        sum_dxhat += dxh;
                        sum_dxhat_xhat += dxh * xh[j];
                    }
                    const float invC = 1.0f / static_cast<float>(C);
                    for (size_t j = 0; j < C; ++j) {
                        const float dxh = gy[j] * G[j];
                        gx[r * C + j] +=
                            inv_std[r] * (dxh - sum_dxhat * invC - xh[j] * sum_dxhat_xhat * invC);
                    }
                }
            }
        };
    }
    return out;
}

Var Tape::sigmoid(Var a) {
    const Tensor& A = value(a);
    Tensor C(A.rows(), A.cols());
    for (size_t i = 0; i < A.size(); ++i) {
        const float v = A[i];
        if (v >= 0.0f) {
            C[i] = 1.0f / (1.0f + std::exp(-v));
        } else {
            const float e = std::exp(v);
            C[i] = e / (1.0f + e);
        }
    }
    Var out = push(std::move(C), needs_grad(a), nullptr);
    if (node(out).requires_grad) {
        node(out).back = [a, out](Tape& t) {
            float* ga = t.grad_ptr(a);
            if (!ga) return;
            const Tensor& Y = t.value(out);
            const float* g = t.node(out).grad.data();
            for (size_t i = 0; i < Y.size(); ++i) ga[i] += g[i] * Y[i] * (1.0f - Y[i]);
        };
    }
    return out;
}

Var Tape::relu(Var a) {
    const Tensor& A = value(a);
    Tensor C(A.rows(), A.cols());
    kernels::active().relu(A.data(), C.data(), A.size());
    Var out = push(std::move(C), needs_grad(a), nullptr);
    if (node(out).requires_grad) {
        node(out).back = [a, out](Tape& t) {
            if (float* ga = t.grad_ptr(a))
                kernels::active().relu_bwd_acc(t.value(a).data(), t.node(out).grad.data(), ga,
                                               t.value(a).size());
        };
    }
    return out;
}

Var Tape::log(Var a) {
    const Tensor& A = value(a);
    Tensor C(A.rows(), A.cols());
    for (size_t i = 0; i < A.size(); ++i) {
        if (!(A[i] > 0.0f)) throw InvalidArgument("log: non-positive input; clamp first");
        C[i] = std::log(A[i]);
    }
    Var out = push(std::move(C), needs_grad(a), nullptr);
    if (node(out).requires_grad) {
        node(out).back = [a, out](Tape& t) {
            float* ga = t.grad_ptr(a);
            if (!ga) return;
            const Tensor& A = t.value(a);
            const float* g = t.node(out).grad.data();
            for (size_t i = 0; i < A.size(); ++i) ga[i] += g[i] / A[i];
        };
    }
    return out;
}

Var Tape::clamp(Var a, float lo, float hi) {
    const Tensor& A = value(a);
    Tensor C(A.rows(), A.cols());
    for (size_t i = 0; i < A.size(); ++i) C[i] = std::clamp(A[i], lo, hi);
    Var out = push(std::move(C), needs_grad(a), nullptr);
    if (node(out).requires_grad) {
        node(out).back = [a, lo, hi, out](Tape& t) {
            float* ga = t.grad_ptr(a);
            if (!ga) return;
            const Tensor& A = t.value(a);
            const float* g = t.node(out).grad.data();
            for (size_t i = 0; i < A.size(); ++i)
                if (A[i] > lo && A[i] < hi) ga[i] += g[i];
        };
    }
    return out;
}

Var Tape::sum(Var a) {
    const Tensor& A = value(a);
    float s = 0.0f;
    for (size_t i = 0; i < A.size(); ++i) s += A[i];
    Var out = push(Tensor::scalar(s), needs_grad(a), nullptr);
    if (node(out).requires_grad) {
        node(out).back = [a, out](Tape& t) {
            float* ga = t.grad_ptr(a);
            if (!ga) return;
            const float g = t.node(out).grad[0];
            for (size_t i = 0; i < t.value(a).size(); ++i) ga[i] += g;
        };
    }
    return out;
}

Var Tape::mean_all(Var a) {
    const size_t n = value(a).size();
    return scale(sum(a), 1.0f / static_cast<float>(n));
}

// ---------------------------------------------------------------------------

void Tape::backward(Var loss) {
    if (!grad_enabled_) throw InvalidArgument("backward: tape was built with gradients disabled");
    const Tensor& L = value(loss);
    if (L.size() != 1)
        throw InvalidArgument("backward: loss must be a scalar, got " + L.shape_str());
    if (!node(loss).requires_grad) return;  // loss does not depend on any parameter

    // Fresh node-local gradients each call; parameter buffers accumulate.
    for (uint32_t i = 0; i <= loss.idx; ++i) {
        Node& n = nodes_[i];
        if (n.requires_grad) n.grad.assign(n.value.size(), 0.0f);
    }
    node(loss).grad[0] = 1.0f;
    for (uint32_t i = loss.idx + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.requires_grad && n.back) n.back(*this);
    }
    for (uint32_t i = 0; i <= loss.idx; ++i) {
        Node& n = nodes_[i];
        if (n.requires_grad && n.bound) {
            auto& g = n.bound->grad();
            kernels::active().add(g.data(), n.grad.data(), g.data(), g.size());
        }
    }
}

}  // namespace omnigaze
