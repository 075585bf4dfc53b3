#include "ctfa/attention.hpp"

#include <cmath>

#include "ctfa/errors.hpp"

namespace ctfa {

AttentionVariant parse_attention_variant(const std::string& name) {
    if (name == "none") return AttentionVariant::None;
    if (name == "sdab") return AttentionVariant::Sdab;
    if (name == "conventional") return AttentionVariant::Conventional;
    if (name == "complex") return AttentionVariant::Complex;
    throw ConfigError("unknown attention variant '" + name + "' (expected none|sdab|conventional|complex)");
}

std::string to_string(AttentionVariant v) {
    switch (v) {
        case AttentionVariant::None: return "none";
        case AttentionVariant::Sdab: return "sdab";
        case AttentionVariant::Conventional: return "conventional";
        case AttentionVariant::Complex: return "complex";
    }
    return "none";
}

AttentionProjections AttentionProjections::init(std::size_t channels, std::uint64_t seed) {
    return {parameter(unitary_kernel({channels, channels, 1, 1}, seed)),
            parameter(unitary_kernel({channels, channels, 1, 1}, seed + 1)),
            parameter(unitary_kernel({channels, channels, 1, 1}, seed + 2))};
}

ParameterList AttentionProjections::parameters(const std::string& prefix) const {
    return {{prefix + ".query", query}, {prefix + ".key", key}, {prefix + ".value", value}};
}

SdabWeights SdabWeights::init(std::size_t length, std::uint64_t seed) {
    const double s = 1.0 / std::sqrt(double(length));
    return {parameter(ComplexTensor::random_uniform({length, length}, seed, s)),
            parameter(ComplexTensor::zeros({length}))};
}

ParameterList SdabWeights::parameters(const std::string& prefix) const {
    return {{prefix + ".weight", weight}, {prefix + ".bias", bias}};
}

namespace {

void require_feature_map(const Var& x, const char* who) {
    if (x.shape().size() != 4) {
        throw ShapeError(std::string(who) + ": expected [B, C, T, F], got " + to_string(x.shape()));
    }
}

// [B, C, T, F] -> [B, L, M] with L the attended axis and M the remaining features.
Var to_rows(const Var& x, Axis axis) {
    const Shape& s = x.shape();
    if (axis == Axis::Time) return reshape(permute(x, {0, 2, 3, 1}), {s[0], s[2], s[3] * s[1]});
    return reshape(permute(x, {0, 3, 2, 1}), {s[0], s[3], s[2] * s[1]});
}

Var from_rows(const Var& rows, const Shape& s, Axis axis) {
    if (axis == Axis::Time) return permute(reshape(rows, {s[0], s[2], s[3], s[1]}), {0, 3, 1, 2});
    return permute(reshape(rows, {s[0], s[3], s[2], s[1]}), {0, 3, 2, 1});
}

Var sa_common(const Var& x, const AttentionProjections& p, Axis axis, bool scaled, AttentionMap* map,
              bool complex_mode) {
    const ProductMode proj_mode = complex_mode ? ProductMode::Complex : ProductMode::Partwise;
    Var q = to_rows(conv2d(x, p.query, Var{}, {}, proj_mode), axis);
    Var k = to_rows(conv2d(x, p.key, Var{}, {}, proj_mode), axis);
    Var v = to_rows(conv2d(x, p.value, Var{}, {}, proj_mode), axis);

    Var w;
    if (complex_mode) {
        Var corr = modulus(matmul(q, transpose(k, true), ProductMode::Complex));
        if (scaled) corr = scale(corr, 1.0 / std::sqrt(double(q.dim(2))));
        w = softmax_last(corr, false);
    } else {
        Var corr = matmul(q, transpose(k, false), ProductMode::Partwise);
        if (scaled) corr = scale(corr, 1.0 / std::sqrt(double(q.dim(2))));
        w = softmax_last(corr, true);
    }
    if (map != nullptr) *map = {axis, w.value()};
    Var a = matmul(w, v, complex_mode ? ProductMode::RealLeft : ProductMode::Partwise);
    return from_rows(a, x.shape(), axis);
}

}  // namespace

Var conventional_sa(const Var& x, const AttentionProjections& p, Axis axis, bool scaled, AttentionMap* map) {
    require_feature_map(x, "conventional_sa");
    return sa_common(x, p, axis, scaled, map, false);
}

Var complex_tf_sa(const Var& x, const AttentionProjections& p, Axis axis, bool scaled, AttentionMap* map) {
    require_feature_map(x, "complex_tf_sa");
    return sa_common(x, p, axis, scaled, map, true);
}

Var sdab_attention(const Var& x, const SdabWeights& w, Axis axis) {
    require_feature_map(x, "sdab_attention");
    const std::size_t len = axis == Axis::Time ? x.dim(2) : x.dim(3);
    if (w.weight.dim(0) != len) {
        throw ContractError("sdab_attention: axis length " + std::to_string(len) + " does not match FC size " +
                            std::to_string(w.weight.dim(0)));
    }
    Var rows = to_rows(x, axis);
    Var y = add_bias(matmul(w.weight, rows, ProductMode::Partwise), w.bias, 1);
    return from_rows(y, x.shape(), axis);
}

TfAttentionBlock::TfAttentionBlock(AttentionVariant variant_, std::size_t channels, std::size_t time_len,
                                   std::size_t freq_len, std::uint64_t seed, bool scaled_)
    : variant(variant_), scaled(scaled_) {
    switch (variant) {
        case AttentionVariant::None: break;
        case AttentionVariant::Sdab:
            time_fc = SdabWeights::init(time_len, seed);
            freq_fc = SdabWeights::init(freq_len, seed + 1);
            break;
        case AttentionVariant::Conventional:
        case AttentionVariant::Complex:
            time_proj = AttentionProjections::init(channels, seed);
            freq_proj = AttentionProjections::init(channels, seed + 3);
            break;
    }
}

Var TfAttentionBlock::forward(const Var& x, std::vector<AttentionMap>* maps) const {
    Var t, f;
    AttentionMap mt, mf;
    switch (variant) {
        case AttentionVariant::None: return x;
        case AttentionVariant::Sdab:
            t = sdab_attention(x, time_fc, Axis::Time);
            f = sdab_attention(x, freq_fc, Axis::Frequency);
            break;
        case AttentionVariant::Conventional:
            t = conventional_sa(x, time_proj, Axis::Time, scaled, &mt);
            f = conventional_sa(x, freq_proj, Axis::Frequency, scaled, &mf);
            break;
        case AttentionVariant::Complex:
            t = complex_tf_sa(x, time_proj, Axis::Time, scaled, &mt);
            f = complex_tf_sa(x, freq_proj, Axis::Frequency, scaled, &mf);
            break;
    }
    if (maps != nullptr && variant != AttentionVariant::Sdab) {
        maps->push_back(std::move(mt));
        maps->push_back(std::move(mf));
    }
    return add(x, scale(add(t, f), 0.5));
}

ParameterList TfAttentionBlock::parameters(const std::string& prefix) const {
    ParameterList out;
    if (variant == AttentionVariant::Sdab) {
        append(out, time_fc.parameters(prefix + ".time"));
        append(out, freq_fc.parameters(prefix + ".freq"));
    } else if (variant != AttentionVariant::None) {
        append(out, time_proj.parameters(prefix + ".time"));
        append(out, freq_proj.parameters(prefix + ".freq"));
    }
    return out;
}

}  // namespace ctfa
