#pragma once

#include <cstddef>
#include <vector>

#include "ctfa/autodiff.hpp"

namespace ctfa {

// How the real and imaginary planes of two operands combine in a product.
enum class ProductMode {
    Complex,   // (Ar + jAi)(Br + jBi)
    Partwise,  // Ar*Br + j Ai*Bi: two independent real products
    RealLeft,  // Ar*Br + j Ar*Bi: the real plane of A applied to both parts of B
};

// ---- elementwise -----------------------------------------------------------

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scale(const Var& a, double alpha);
// Complex elementwise product.
Var mul(const Var& a, const Var& b);
// Hadamard product applied to each part separately.
Var mul_partwise(const Var& a, const Var& b);
Var conj(const Var& a);

Var crelu(const Var& x);
Var sigmoid_parts(const Var& x);
Var tanh_parts(const Var& x);
// |x| in the real plane, zero imaginary plane. Gradient at 0 is taken as 0.
Var modulus(const Var& x);

// Adds a 1-D bias of length x.dim(axis), broadcast along every other axis.
Var add_bias(const Var& x, const Var& bias, std::size_t axis);

// ---- reductions ------------------------------------------------------------

// Real scalar: sum of every real and imaginary entry.
Var sum_parts(const Var& x);
// Real scalar: sum(x.re * w.re + x.im * w.im) with a fixed weight tensor.
Var inner(const Var& x, const ComplexTensor& weights);

// ---- layout ----------------------------------------------------------------

Var reshape(const Var& x, Shape shape);
Var permute(const Var& x, const std::vector<std::size_t>& axes);
Var concat(const std::vector<Var>& parts, std::size_t axis);
Var slice(const Var& x, std::size_t axis, std::size_t start, std::size_t length);
// Swaps the last two axes of a rank-2 or rank-3 tensor; conjugates when asked.
Var transpose(const Var& x, bool conjugate = false);
Var hermitian_transpose(const Var& x);

// ---- products --------------------------------------------------------------

// [M,K] x [K,N] or batched [B,M,K] x [B,K,N]; a rank-2 operand is shared by
// every batch entry of a rank-3 partner.
Var matmul(const Var& a, const Var& b, ProductMode mode = ProductMode::Complex);

// Row-wise softmax over the last axis with per-row max subtraction. With
// both_parts the imaginary plane gets its own independent softmax, otherwise
// only the real plane is used and the output imaginary plane is zero.
Var softmax_last(const Var& x, bool both_parts);

// ---- convolution -----------------------------------------------------------

struct Conv2dGeometry {
    std::size_t stride_t = 1;
    std::size_t stride_f = 1;
    std::size_t pad_t = 0;
    std::size_t pad_f = 0;
};

// x: [B, C_in, T, F] complex channels; weight: [C_out, C_in, K_t, K_f];
// bias: [C_out] (may be undefined). Complex mode computes
// (A*Xr - B*Xi) + j(A*Xi + B*Xr) with weight = A + jB; Partwise mode runs
// two real convolutions, A on the real part and B on the imaginary part.
Var conv2d(const Var& x, const Var& weight, const Var& bias, const Conv2dGeometry& geo,
           ProductMode mode = ProductMode::Complex);

// Transposed complex convolution. weight: [C_in, C_out, K_t, K_f].
// Output size: (in - 1) * stride - 2 * pad + kernel.
Var conv_transpose2d(const Var& x, const Var& weight, const Var& bias, const Conv2dGeometry& geo);

std::size_t conv_out_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad);

}  // namespace ctfa
