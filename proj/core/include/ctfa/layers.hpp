#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctfa/autodiff.hpp"
#include "ctfa/ops.hpp"

namespace ctfa {

struct NamedParameter {
    std::string name;
    Var var;
    bool real_valued = false;  // only the real plane is trainable
};
using ParameterList = std::vector<NamedParameter>;

// Non-trainable state that still belongs in a checkpoint.
struct NamedBuffer {
    std::string name;
    ComplexTensor* tensor;
};
using BufferList = std::vector<NamedBuffer>;

// Number of trainable real scalars (real and imaginary planes count separately).
std::size_t count_trainable(const ParameterList& params);

void append(ParameterList& into, const ParameterList& from);
void append(BufferList& into, const BufferList& from);

// ---- unitary initialisation -----------------------------------------------

// Complex rows x cols matrix with orthonormal rows (rows <= cols) or
// orthonormal columns (rows > cols), from a QR factorisation of a complex
// Gaussian matrix. Deterministic per seed.
ComplexTensor unitary_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed);

// Kernel of the given shape whose reshape to [shape[0], rest] is semi-unitary.
ComplexTensor unitary_kernel(const Shape& shape, std::uint64_t seed);

// ---- layers ----------------------------------------------------------------

// Complex 2-D convolution with weight A + jB of shape [C_out, C_in, K_t, K_f]
// counted in complex channels.
class ComplexConv2d {
public:
    ComplexConv2d() = default;
    ComplexConv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_t, std::size_t kernel_f,
                  Conv2dGeometry geometry, std::uint64_t seed, bool with_bias = true);

    Var forward(const Var& x) const { return conv2d(x, weight, bias, geometry); }
    ParameterList parameters(const std::string& prefix) const;

    Var weight;
    Var bias;
    Conv2dGeometry geometry;
};

class ComplexConvTranspose2d {
public:
    ComplexConvTranspose2d() = default;
    ComplexConvTranspose2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_t,
                           std::size_t kernel_f, Conv2dGeometry geometry, std::uint64_t seed);

    Var forward(const Var& x) const { return conv_transpose2d(x, weight, bias, geometry); }
    ParameterList parameters(const std::string& prefix) const;

    Var weight;  // [C_in, C_out, K_t, K_f]
    Var bias;
    Conv2dGeometry geometry;
};

// Complex batch normalisation by 2x2 covariance whitening of (re, im):
//   z = V^{-1/2} (x - mean),  y = Gamma z + beta
// with V the per-channel real/imaginary covariance plus eps*I and Gamma a
// symmetric 2x2 scale stored as rows (g_rr, g_ri, g_ii) of `gamma`.
class ComplexBatchNorm {
public:
    ComplexBatchNorm() = default;
    explicit ComplexBatchNorm(std::size_t channels, double momentum = 0.1, double eps = 1e-5);

    // x: [B, C, T, F]. Training mode uses batch statistics and updates the
    // running estimates; inference mode uses the running estimates.
    Var forward(const Var& x, bool training);
    ParameterList parameters(const std::string& prefix) const;
    BufferList buffers(const std::string& prefix);

    Var gamma;                    // [3, C], real plane only
    Var beta;                     // [C]
    ComplexTensor running_mean;   // [C]
    ComplexTensor running_cov;    // [3, C] real plane: V_rr, V_ri, V_ii
    double momentum = 0.1;
    double eps = 1e-5;
};

// Functional form; running statistics are updated in place when training.
Var complex_batchnorm(const Var& x, const Var& gamma, const Var& beta, ComplexTensor& running_mean,
                      ComplexTensor& running_cov, bool training, double momentum, double eps);

// x [.., in] -> x W + b with a complex [in, out] weight.
class ComplexLinear {
public:
    ComplexLinear() = default;
    ComplexLinear(std::size_t in_features, std::size_t out_features, std::uint64_t seed);

    Var forward(const Var& x) const;
    ParameterList parameters(const std::string& prefix) const;

    Var weight;
    Var bias;
};

// Split-complex GRU: complex matrix products, gate nonlinearities applied to
// real and imaginary pre-activations independently,
//   z = sig(x Wz + h Uz + bz), r = sig(x Wr + h Ur + br)
//   c = tanh(x Wh + (r . h) Uh + bh),  h' = (1 - z) . h + z . c
// where "." multiplies real with real and imaginary with imaginary parts.
class ComplexGru {
public:
    ComplexGru() = default;
    ComplexGru(std::size_t input_dim, std::size_t hidden_dim, std::uint64_t seed);

    // x_t: [B, D], h: [B, H] -> [B, H]
    Var step(const Var& x_t, const Var& h) const;
    // seq: [B, T, D] -> [B, T, H], zero initial state.
    Var forward(const Var& seq) const;
    ParameterList parameters(const std::string& prefix) const;

    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    Var w_z, w_r, w_h;  // [D, H]
    Var u_z, u_r, u_h;  // [H, H]
    Var b_z, b_r, b_h;  // [H]
};

}  // namespace ctfa
