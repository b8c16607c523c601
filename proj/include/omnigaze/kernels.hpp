#pragma once

#include <cstddef>
#include <string_view>

// Dense f32 inner loops behind a runtime-dispatched kernel table. Every
// vector variant is required to produce bit-identical output to the scalar
// reference: kernels vectorize only along non-reduction axes and use separate
// multiply and add (no FMA), so each output element sees the same operations
// in the same order at the same precision regardless of ISA. Equivalence
// tests assert memcmp-equality, and dispatch can never change training
// results.
namespace omnigaze::kernels {

enum class Isa { scalar, avx2, neon };

struct KernelTable {
    Isa isa;

    // c = a + b / a - b / a * b, elementwise over n floats.
    void (*add)(const float* a, const float* b, float* c, size_t n);
    void (*sub)(const float* a, const float* b, float* c, size_t n);
    void (*mul)(const float* a, const float* b, float* c, size_t n);
    // c = a * s
    void (*scale)(const float* a, float s, float* c, size_t n);
    // y += a * x
    void (*axpy)(float a, const float* x, float* y, size_t n);
    // c = max(a, 0)
    void (*relu)(const float* a, float* c, size_t n);
    // dx += (x > 0) ? dy : 0
    void (*relu_bwd_acc)(const float* x, const float* dy, float* dx, size_t n);
    // C[m x n] = (accumulate ? C : 0) + A[m x k] * B[k x n], row-major.
    // Accumulation order over k is fixed (sequential), vectorized over n.
    void (*gemm)(const float* a, const float* b, float* c, size_t m, size_t k, size_t n,
                 bool accumulate);
    // out[cols x rows] = transpose of a[rows x cols]
    void (*transpose)(const float* a, float* out, size_t rows, size_t cols);
    // Fused Adam update with decoupled weight decay:
    //   m = b1*m + (1-b1)*g;  v = b2*v + (1-b2)*g*g
    //   p = p*wd_mult - lr * (m*inv_bc1) / (sqrt(v*inv_bc2) + eps)
    // All elementwise IEEE ops (incl. sqrt/div), so vector forms stay exact.
    void (*adam_update)(float* p, const float* g, float* m, float* v, size_t n, float lr,
                        float beta1, float beta2, float eps, float wd_mult, float inv_bc1,
                        float inv_bc2);
};

// Active table. Resolved once: OMNIGAZE_KERNELS=scalar|avx2|neon|auto wins,
// otherwise the best ISA the CPU supports.
const KernelTable& active();

// Table for a specific ISA; throws InvalidArgument if unsupported here.
const KernelTable& table_for(Isa isa);

// Overrides the active table (tests use this to compare lanes).
void force(Isa isa);
void reset_to_default();

bool supported(Isa isa);
std::string_view isa_name(Isa isa);

}  // namespace omnigaze::kernels
