// AVX2 lane. Bit-exactness contract with the scalar reference:
//  - elementwise ops map lane-for-lane onto the same IEEE operations;
//  - gemm keeps the k-reduction sequential per output element and vectorizes
//    across output columns, with separate mul and add (no FMA);
//  - adam_update uses only correctly-rounded primitives (+,-,*,/,sqrt).
// Tails fall back to the same scalar expressions.

#include "kernels_detail.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>
#include <cstring>

namespace omnigaze::kernels {
namespace avx2 {

void add(const float* a, const float* b, float* c, size_t n) {
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(c + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) c[i] = a[i] + b[i];
}

void sub(const float* a, const float* b, float* c, size_t n) {
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(c + i, _mm256_sub_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) c[i] = a[i] - b[i];
}

void mul(const float* a, const float* b, float* c, size_t n) {
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(c + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) c[i] = a[i] * b[i];
}

void scale(const float* a, float s, float* c, size_t n) {
    const __m256 vs = _mm256_set1_ps(s);
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(c + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), vs));
    for (; i < n; ++i) c[i] = a[i] * s;
}

void axpy(float a, const float* x, float* y, size_t n) {
    const __m256 va = _mm256_set1_ps(a);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 prod = _mm256_mul_ps(va, _mm256_loadu_ps(x + i));
        _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), prod));
    }
    for (; i < n; ++i) y[i] = y[i] + a * x[i];
}

void relu(const float* a, float* c, size_t n) {
    const __m256 zero = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(c + i, _mm256_max_ps(_mm256_loadu_ps(a + i), zero));
    for (; i < n; ++i) c[i] = a[i] > 0.0f ? a[i] : 0.0f;
}

void relu_bwd_acc(const float* x, const float* dy, float* dx, size_t n) {
    const __m256 zero = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
        __m256 gated = _mm256_and_ps(_mm256_loadu_ps(dy + i), mask);
        _mm256_storeu_ps(dx + i, _mm256_add_ps(_mm256_loadu_ps(dx + i), gated));
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
            const __m256 vav = _mm256_set1_ps(av);
            size_t j = 0;
            for (; j + 8 <= n; j += 8) {
                __m256 prod = _mm256_mul_ps(vav, _mm256_loadu_ps(brow + j));
                _mm256_storeu_ps(crow + j, _mm256_add_ps(_mm256_loadu_ps(crow + j), prod));
            }
            for (; j < n; ++j) crow[j] = crow[j] + av * brow[j];
        }
    }
}

void transpose(const float* a, float* out, size_t rows, size_t cols) {
    // Pure data movement; nothing to gain from lanes at these sizes.
    for (size_t r = 0; r < rows; ++r)
        for (size_t c = 0; c < cols; ++c) out[c * rows + r] = a[r * cols + c];
}

void adam_update(float* p, const float* g, float* m, float* v, size_t n, float lr, float beta1,
                 float beta2, float eps, float wd_mult, float inv_bc1, float inv_bc2) {
    const __m256 vb1 = _mm256_set1_ps(beta1);
    const __m256 vb1c = _mm256_set1_ps(1.0f - beta1);
    const __m256 vb2 = _mm256_set1_ps(beta2);
    const __m256 vb2c = _mm256_set1_ps(1.0f - beta2);
    const __m256 vlr = _mm256_set1_ps(lr);
    const __m256 veps = _mm256_set1_ps(eps);
    const __m256 vwd = _mm256_set1_ps(wd_mult);
    const __m256 vbc1 = _mm256_set1_ps(inv_bc1);
    const __m256 vbc2 = _mm256_set1_ps(inv_bc2);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 vg = _mm256_loadu_ps(g + i);
        __m256 vm = _mm256_add_ps(_mm256_mul_ps(vb1, _mm256_loadu_ps(m + i)),
                                  _mm256_mul_ps(vb1c, vg));
        __m256 vv = _mm256_add_ps(_mm256_mul_ps(vb2, _mm256_loadu_ps(v + i)),
                                  _mm256_mul_ps(vb2c, _mm256_mul_ps(vg, vg)));
        _mm256_storeu_ps(m + i, vm);
        _mm256_storeu_ps(v + i, vv);
        const __m256 mhat = _mm256_mul_ps(vm, vbc1);
        const __m256 vhat = _mm256_mul_ps(vv, vbc2);
        const __m256 denom = _mm256_add_ps(_mm256_sqrt_ps(vhat), veps);
        const __m256 step = _mm256_mul_ps(vlr, _mm256_div_ps(mhat, denom));
        _mm256_storeu_ps(p + i, _mm256_sub_ps(_mm256_mul_ps(_mm256_loadu_ps(p + i), vwd), step));
    }
    for (; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0f - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0f - beta2) * (g[i] * g[i]);
        const float mhat = m[i] * inv_bc1;
        const float vhat = v[i] * inv_bc2;
        p[i] = p[i] * wd_mult - lr * (mhat / (std::sqrt(vhat) + eps));
    }
}

}  // namespace avx2

namespace {
const KernelTable kAvx2Table = {
    Isa::avx2,   avx2::add,       avx2::sub,  avx2::mul,
    avx2::scale, avx2::axpy,      avx2::relu, avx2::relu_bwd_acc,
    avx2::gemm,  avx2::transpose, avx2::adam_update,
};
}

const KernelTable* detail_avx2_table() {
    return __builtin_cpu_supports("avx2") ? &kAvx2Table : nullptr;
}

}  // namespace omnigaze::kernels

#else

namespace omnigaze::kernels {
const KernelTable* detail_avx2_table() { return nullptr; }
}  // namespace omnigaze::kernels

#endif
