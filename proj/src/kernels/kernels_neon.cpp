// NEON lane for aarch64, mirroring the AVX2 lane with 4-wide vectors and the
// same bit-exactness contract (vmlaq would fuse, so mul and add stay split).

#include "kernels_detail.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

#include <cmath>
#include <cstring>

namespace omnigaze::kernels {
namespace neon {

void add(const float* a, const float* b, float* c, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4) vst1q_f32(c + i, vaddq_f32(vld1q_f32(a + i), vld1q_f32(b + i)));
    for (; i < n; ++i) c[i] = a[i] + b[i];
}

void sub(const float* a, const float* b, float* c, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4) vst1q_f32(c + i, vsubq_f32(vld1q_f32(a + i), vld1q_f32(b + i)));
    for (; i < n; ++i) c[i] = a[i] - b[i];
}

void mul(const float* a, const float* b, float* c, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4) vst1q_f32(c + i, vmulq_f32(vld1q_f32(a + i), vld1q_f32(b + i)));
    for (; i < n; ++i) c[i] = a[i] * b[i];
}

void scale(const float* a, float s, float* c, size_t n) {
    const float32x4_t vs = vdupq_n_f32(s);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) vst1q_f32(c + i, vmulq_f32(vld1q_f32(a + i), vs));
    for (; i < n; ++i) c[i] = a[i] * s;
}

void axpy(float a, const float* x, float* y, size_t n) {
    const float32x4_t va = vdupq_n_f32(a);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        float32x4_t prod = vmulq_f32(va, vld1q_f32(x + i));
        vst1q_f32(y + i, vaddq_f32(vld1q_f32(y + i), prod));
    }
    for (; i < n; ++i) y[i] = y[i] + a * x[i];
}

void relu(const float* a, float* c, size_t n) {
    const float32x4_t zero = vdupq_n_f32(0.0f);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) vst1q_f32(c + i, vmaxq_f32(vld1q_f32(a + i), zero));
    for (; i < n; ++i) c[i] = a[i] > 0.0f ? a[i] : 0.0f;
}

void relu_bwd_acc(const float* x, const float* dy, float* dx, size_t n) {
    const float32x4_t zero = vdupq_n_f32(0.0f);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        uint32x4_t mask = vcgtq_f32(vld1q_f32(x + i), zero);
        float32x4_t gated =
            vreinterpretq_f32_u32(vandq_u32(vreinterpretq_u32_f32(vld1q_f32(dy + i)), mask));
        vst1q_f32(dx + i, vaddq_f32(vld1q_f32(dx + i), gated));
    }
    for (; i < n; ++i)
        if (x[i] > 0.0f) dx[i] = dx[i] + dy[i];
}

void gemm(const float* a, const float* b, float* c, size_t m, size_t k, size_t n,
          bool accumulate) {
    if (!accumulate) std::memset(c, 0, m * n * sizeof(float));
    for (size_t i = 0; i < m; ++i) {
        const float* arow = a + i * k;
        float* crow = c + i * n;
        for (size_t p = 0; p < k; ++p) {
            const float av = arow[p];
            const float* brow = b + p * n;
            const float32x4_t vav = vdupq_n_f32(av);
            size_t j = 0;
            for (; j + 4 <= n; j += 4) {
                float32x4_t prod = vmulq_f32(vav, vld1q_f32(brow + j));
                vst1q_f32(crow + j, vaddq_f32(vld1q_f32(crow + j), prod));
            }
            for (; j < n; ++j) crow[j] = crow[j] + av * brow[j];
        }
    }
}

void transpose(const float* a, float* out, size_t rows, size_t cols) {
    for (size_t r = 0; r < rows; ++r)
        for (size_t c = 0; c < cols; ++c) out[c * rows + r] = a[r * cols + c];
}

void adam_update(float* p, const float* g, float* m, float* v, size_t n, float lr, float beta1,
                 float beta2, float eps, float wd_mult, float inv_bc1, float inv_bc2) {
    const float32x4_t vb1 = vdupq_n_f32(beta1);
    const float32x4_t vb1c = vdupq_n_f32(1.0f - beta1);
    const float32x4_t vb2 = vdupq_n_f32(beta2);
    const float32x4_t vb2c = vdupq_n_f32(1.0f - beta2);
    const float32x4_t vlr = vdupq_n_f32(lr);
    const float32x4_t veps = vdupq_n_f32(eps);
    const float32x4_t vwd = vdupq_n_f32(wd_mult);
    const float32x4_t vbc1 = vdupq_n_f32(inv_bc1);
    const float32x4_t vbc2 = vdupq_n_f32(inv_bc2);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t vg = vld1q_f32(g + i);
        float32x4_t vm = vaddq_f32(vmulq_f32(vb1, vld1q_f32(m + i)), vmulq_f32(vb1c, vg));
        float32x4_t vv =
            vaddq_f32(vmulq_f32(vb2, vld1q_f32(v + i)), vmulq_f32(vb2c, vmulq_f32(vg, vg)));
        vst1q_f32(m + i, vm);
        vst1q_f32(v + i, vv);
        const float32x4_t mhat = vmulq_f32(vm, vbc1);
        const float32x4_t vhat = vmulq_f32(vv, vbc2);
        const float32x4_t denom = vaddq_f32(vsqrtq_f32(vhat), veps);
        const float32x4_t step = vmulq_f32(vlr, vdivq_f32(mhat, denom));
        vst1q_f32(p + i, vsubq_f32(vmulq_f32(vld1q_f32(p + i), vwd), step));
    }
    for (; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0f - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0f - beta2) * (g[i] * g[i]);
        const float mhat = m[i] * inv_bc1;
        const float vhat = v[i] * inv_bc2;
        p[i] = p[i] * wd_mult - lr * (mhat / (std::sqrt(vhat) + eps));
    }
}

}  // namespace neon

namespace {
const KernelTable kNeonTable = {
    Isa::neon,   neon::add,       neon::sub,  neon::mul,
    neon::scale, neon::axpy,      neon::relu, neon::relu_bwd_acc,
    neon::gemm,  neon::transpose, neon::adam_update,
};
}

const KernelTable* detail_neon_table() { return &kNeonTable; }

}  // namespace omnigaze::kernels

#else

namespace omnigaze::kernels {
const KernelTable* detail_neon_table() { return nullptr; }
}  // namespace omnigaze::kernels

#endif
