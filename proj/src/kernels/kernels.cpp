#include "omnigaze/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <string>

#include "kernels_detail.hpp"
#include "omnigaze/errors.hpp"

namespace omnigaze::kernels {

namespace scalar {

void add(const float* a, const float* b, float* c, size_t n) {
    for (size_t i = 0; i < n; ++i) c[i] = a[i] + b[i];
}

void sub(const float* a, const float* b, float* c, size_t n) {
    for (size_t i = 0; i < n; ++i) c[i] = a[i] - b[i];
}

void mul(const float* a, const float* b, float* c, size_t n) {
    for (size_t i = 0; i < n; ++i) c[i] = a[i] * b[i];
}

void scale(const float* a, float s, float* c, size_t n) {
    for (size_t i = 0; i < n; ++i) c[i] = a[i] * s;
}

void axpy(float a, const float* x, float* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] = y[i] + a * x[i];
}

void relu(const float* a, float* c, size_t n) {
    for (size_t i = 0; i < n; ++i) c[i] = a[i] > 0.0f ? a[i] : 0.0f;
}

void relu_bwd_acc(const float* x, const float* dy, float* dx, size_t n) {
    for (size_t i = 0; i < n; ++i)
        if (x[i] > 0.0f) dx[i] = dx[i] + dy[i];
}

// Reference gemm: the p-loop is the reduction; every output element
// accumulates in p order. Vector lanes must preserve exactly this order.
void gemm(const float* a, const float* b, float* c, size_t m, size_t k, size_t n,
          bool accumulate) {
    if (!accumulate) std::memset(c, 0, m * n * sizeof(float));
    for (size_t i = 0; i < m; ++i) {
        const float* arow = a + i * k;
        float* crow = c + i * n;
        for (size_t p = 0; p < k; ++p) {
            const float av = arow[p];
            const float* brow = b + p * n;
            for (size_t j = 0; j < n; ++j) crow[j] = crow[j] + av * brow[j];
        }
    }
}

void transpose(const float* a, float* out, size_t rows, size_t cols) {
    for (size_t r = 0; r < rows; ++r)
        for (size_t c = 0; c < cols; ++c) out[c * rows + r] = a[r * cols + c];
}

void adam_update(float* p, const float* g, float* m, float* v, size_t n, float lr, float beta1,
                 float beta2, float eps, float wd_mult, float inv_bc1, float inv_bc2) {
    for (size_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0f - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0f - beta2) * (g[i] * g[i]);
        const float mhat = m[i] * inv_bc1;
        const float vhat = v[i] * inv_bc2;
        p[i] = p[i] * wd_mult - lr * (mhat / (std::sqrt(vhat) + eps));
    }
}

}  // namespace scalar

namespace {

const KernelTable kScalarTable = {
    Isa::scalar,     scalar::add,       scalar::sub,  scalar::mul,
    scalar::scale,   scalar::axpy,      scalar::relu, scalar::relu_bwd_acc,
    scalar::gemm,    scalar::transpose, scalar::adam_update,
};

Isa detect_best() {
#if defined(__x86_64__) || defined(_M_X64)
    if (__builtin_cpu_supports("avx2")) return Isa::avx2;
#elif defined(__aarch64__)
    return Isa::neon;
#endif
    return Isa::scalar;
}

Isa parse_env(const char* value) {
    std::string v(value);
    if (v == "scalar") return Isa::scalar;
    if (v == "avx2") return Isa::avx2;
    if (v == "neon") return Isa::neon;
    if (v == "auto") return detect_best();
    throw ConfigError("OMNIGAZE_KERNELS: unknown value '" + v + "' (want scalar|avx2|neon|auto)");
}

std::atomic<const KernelTable*> g_active{nullptr};

const KernelTable* resolve_default() {
    Isa isa = detect_best();
    if (const char* env = std::getenv("OMNIGAZE_KERNELS")) isa = parse_env(env);
    return &table_for(isa);
}

}  // namespace

const KernelTable& table_for(Isa isa) {
    switch (isa) {
        case Isa::scalar:
            return kScalarTable;
        case Isa::avx2: {
            const KernelTable* t = detail_avx2_table();
            if (!t) throw InvalidArgument("kernels: avx2 not supported on this CPU/build");
            return *t;
        }
        case Isa::neon: {
            const KernelTable* t = detail_neon_table();
            if (!t) throw InvalidArgument("kernels: neon not supported on this CPU/build");
            return *t;
        }
    }
    throw InvalidArgument("kernels: bad isa");
}

bool supported(Isa isa) {
    switch (isa) {
        case Isa::scalar:
            return true;
        case Isa::avx2:
            return detail_avx2_table() != nullptr;
        case Isa::neon:
            return detail_neon_table() != nullptr;
    }
    return false;
}

std::string_view isa_name(Isa isa) {
    switch (isa) {
        case Isa::scalar:
            return "scalar";
        case Isa::avx2:
            return "avx2";
        case Isa::neon:
            return "neon";
    }
    return "?";
}

const KernelTable& active() {
    const KernelTable* t = g_active.load(std::memory_order_acquire);
    if (!t) {
        t = resolve_default();
        g_active.store(t, std::memory_order_release);
    }
    return *t;
}

void force(Isa isa) { g_active.store(&table_for(isa), std::memory_order_release); }

void reset_to_default() { g_active.store(resolve_default(), std::memory_order_release); }

}  // namespace omnigaze::kernels
