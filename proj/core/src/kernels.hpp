#pragma once

// Dense real/complex matrix kernels on raw row-major planes. Internal to the
// core library; all loops run in a fixed order so results are bit-stable.

#include <cstddef>

namespace ctfa::kernels {

// C[M x N] += alpha * op(A) * op(B), op(A) is M x K, op(B) is K x N.
// A is stored M x K (or K x M when trans_a), B is K x N (or N x K when trans_b).
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, double alpha, const double* a,
          const double* b, double* c);

// How an operand enters a complex product.
enum class Op { N, T, H, C };  // as-is, transpose, conjugate transpose, conjugate

// How real and imaginary planes combine.
//   Complex:   full complex product
//   Partwise:  re = Ar*Br, im = Ai*Bi (two independent real products)
//   RealLeft:  re = Ar*Br, im = Ar*Bi (real left operand applied to both parts)
enum class Mode { Complex, Partwise, RealLeft };

struct CPlanes {
    const double* re;
    const double* im;
};

struct MutPlanes {
    double* re;
    double* im;
};

// C += op(A) * op(B) under the given mode. Conjugation only affects Complex
// and the right operand of RealLeft.
void cgemm(Op op_a, Op op_b, Mode mode, std::size_t m, std::size_t n, std::size_t k, CPlanes a, CPlanes b,
           MutPlanes c);

}  // namespace ctfa::kernels
