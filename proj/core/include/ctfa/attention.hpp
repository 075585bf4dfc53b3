#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctfa/layers.hpp"

namespace ctfa {

enum class AttentionVariant { None, Sdab, Conventional, Complex };

// Accepts none|sdab|conventional|complex; anything else is a ConfigError.
AttentionVariant parse_attention_variant(const std::string& name);
std::string to_string(AttentionVariant v);

enum class Axis { Time, Frequency };

// Attention weights of one branch, real plane [B, L, L]; row = query position.
struct AttentionMap {
    Axis axis = Axis::Time;
    ComplexTensor weights;
};

// 1x1 projection kernels [C, C, 1, 1]. The conventional mechanism uses the
// real plane on the real part and the imaginary plane on the imaginary part;
// the complex mechanism uses the full complex kernel.
struct AttentionProjections {
    Var query, key, value;

    static AttentionProjections init(std::size_t channels, std::uint64_t seed);
    ParameterList parameters(const std::string& prefix) const;
};

// Fully-connected weights along one axis: [L, L] and bias [L]. Real plane acts
// on the real part, imaginary plane on the imaginary part.
struct SdabWeights {
    Var weight, bias;

    static SdabWeights init(std::size_t length, std::uint64_t seed);
    ParameterList parameters(const std::string& prefix) const;
};

// All mechanisms take and return x: [B, C, T, F]. Along the time axis rows are
// time frames and each row holds F*C features; along frequency the roles swap.
// `scaled` divides the correlations by sqrt(row feature count).
Var conventional_sa(const Var& x, const AttentionProjections& p, Axis axis, bool scaled = false,
                    AttentionMap* map = nullptr);
Var complex_tf_sa(const Var& x, const AttentionProjections& p, Axis axis, bool scaled = false,
                  AttentionMap* map = nullptr);
// Throws ContractError if the axis length differs from the FC size.
Var sdab_attention(const Var& x, const SdabWeights& w, Axis axis);

// Time and frequency branches in parallel: x + (time + freq) / 2.
class TfAttentionBlock {
public:
    TfAttentionBlock() = default;
    TfAttentionBlock(AttentionVariant variant, std::size_t channels, std::size_t time_len, std::size_t freq_len,
                     std::uint64_t seed, bool scaled = false);

    // Appends the time and frequency maps of SA variants to `maps` if given.
    Var forward(const Var& x, std::vector<AttentionMap>* maps = nullptr) const;
    ParameterList parameters(const std::string& prefix) const;

    AttentionVariant variant = AttentionVariant::None;
    bool scaled = false;
    AttentionProjections time_proj, freq_proj;
    SdabWeights time_fc, freq_fc;
};

}  // namespace ctfa
