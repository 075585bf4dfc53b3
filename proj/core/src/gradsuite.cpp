#include "ctfa/gradsuite.hpp"

#include <functional>
#include <string>

#include "ctfa/attention.hpp"
#include "ctfa/layers.hpp"
#include "ctfa/model.hpp"
#include "ctfa/ops.hpp"

namespace ctfa {

namespace {

std::vector<Var> leaves_of(const Var& input, const ParameterList& params) {
    std::vector<Var> out{input};
    for (const auto& p : params) out.push_back(p.var);
    return out;
}

struct Case {
    const char* name;
    // Builds a layer from the seed and returns (leaves, loss_fn).
    std::function<std::pair<std::vector<Var>, std::function<Var()>>(std::uint64_t)> make;
};

// Random real functional of y, fixed per seed.
Var probe(const Var& y, std::uint64_t seed) {
    return inner(y, ComplexTensor::random_normal(y.shape(), seed ^ 0x5eedULL));
}

std::vector<Case> cases() {
    std::vector<Case> out;
    out.push_back({"complex_conv2d", [](std::uint64_t s) {
                       auto layer = std::make_shared<ComplexConv2d>(2, 3, 3, 2, Conv2dGeometry{1, 2, 1, 1}, s);
                       Var x = parameter(ComplexTensor::random_normal({2, 2, 5, 6}, s + 1));
                       return std::make_pair(leaves_of(x, layer->parameters("conv")),
                                             std::function<Var()>([=] { return probe(layer->forward(x), s); }));
                   }});
    out.push_back({"complex_conv_transpose2d", [](std::uint64_t s) {
                       auto layer = std::make_shared<ComplexConvTranspose2d>(2, 3, 3, 4, Conv2dGeometry{1, 2, 1, 1}, s);
                       Var x = parameter(ComplexTensor::random_normal({2, 2, 4, 3}, s + 1));
                       return std::make_pair(leaves_of(x, layer->parameters("deconv")),
                                             std::function<Var()>([=] { return probe(layer->forward(x), s); }));
                   }});
    out.push_back({"complex_batchnorm", [](std::uint64_t s) {
                       auto layer = std::make_shared<ComplexBatchNorm>(3);
                       layer->gamma.mutable_value() = ComplexTensor::random_uniform({3, 3}, s + 2, 0.5);
                       layer->gamma.mutable_value().im().assign(9, 0.0);
                       layer->beta.mutable_value() = ComplexTensor::random_normal({3}, s + 3);
                       Var x = parameter(ComplexTensor::random_normal({2, 3, 3, 4}, s + 1));
                       return std::make_pair(
                           leaves_of(x, layer->parameters("bn")),
                           std::function<Var()>([=] { return probe(layer->forward(x, true), s); }));
                   }});
    out.push_back({"crelu_conv", [](std::uint64_t s) {
                       auto layer = std::make_shared<ComplexConv2d>(2, 2, 3, 3, Conv2dGeometry{1, 1, 1, 1}, s);
                       Var x = parameter(ComplexTensor::random_normal({1, 2, 4, 5}, s + 1));
                       return std::make_pair(
                           leaves_of(x, layer->parameters("conv")),
                           std::function<Var()>([=] { return probe(crelu(layer->forward(crelu(x))), s); }));
                   }});
    out.push_back({"dense_block", [](std::uint64_t s) {
                       auto layer = std::make_shared<DenseBlock>(2, 3, s);
                       Var x = parameter(ComplexTensor::random_normal({1, 2, 4, 4}, s + 1));
                       return std::make_pair(leaves_of(x, layer->parameters("dense")),
                                             std::function<Var()>([=] { return probe(layer->forward(x), s); }));
                   }});
    out.push_back({"complex_linear", [](std::uint64_t s) {
                       auto layer = std::make_shared<ComplexLinear>(4, 3, s);
                       Var x = parameter(ComplexTensor::random_normal({2, 5, 4}, s + 1));
                       return std::make_pair(leaves_of(x, layer->parameters("linear")),
                                             std::function<Var()>([=] { return probe(layer->forward(x), s); }));
                   }});
    out.push_back({"gru_step", [](std::uint64_t s) {
                       auto layer = std::make_shared<ComplexGru>(3, 4, s);
                       Var x = parameter(ComplexTensor::random_normal({2, 3}, s + 1));
                       Var h = parameter(ComplexTensor::random_normal({2, 4}, s + 2, 0.5));
                       auto leaves = leaves_of(x, layer->parameters("gru"));
                       leaves.push_back(h);
                       return std::make_pair(leaves,
                                             std::function<Var()>([=] { return probe(layer->step(x, h), s); }));
                   }});
    out.push_back({"gru_sequence", [](std::uint64_t s) {
                       auto layer = std::make_shared<ComplexGru>(3, 2, s);
                       Var x = parameter(ComplexTensor::random_normal({2, 4, 3}, s + 1));
                       return std::make_pair(leaves_of(x, layer->parameters("gru")),
                                             std::function<Var()>([=] { return probe(layer->forward(x), s); }));
                   }});
    for (auto v : {AttentionVariant::Sdab, AttentionVariant::Conventional, AttentionVariant::Complex}) {
        const char* name = v == AttentionVariant::Sdab           ? "sdab"
                           : v == AttentionVariant::Conventional ? "conventional_sa"
                                                                 : "complex_tf_sa";
        out.push_back({name, [v](std::uint64_t s) {
                           auto block = std::make_shared<TfAttentionBlock>(v, 2, 4, 5, s);
                           Var x = parameter(ComplexTensor::random_normal({2, 2, 4, 5}, s + 1, 0.5));
                           return std::make_pair(
                               leaves_of(x, block->parameters("attn")),
                               std::function<Var()>([=] { return probe(block->forward(x), s); }));
                       }});
    }
    out.push_back({"complex_loss", [](std::uint64_t s) {
                       Var e = parameter(ComplexTensor::random_normal({3, 4}, s + 1));
                       const ComplexTensor target = ComplexTensor::random_normal({3, 4}, s + 2);
                       return std::make_pair(std::vector<Var>{e}, std::function<Var()>([=] {
                                                 return complex_loss(e, target, 0.3, 0.3);
                                             }));
                   }});
    return out;
}

}  // namespace

std::vector<GradCheckResult> layer_gradient_suite(std::uint64_t seed, std::size_t instances,
                                                  const GradCheckOptions& options) {
    std::vector<GradCheckResult> results;
    for (const auto& c : cases()) {
        for (std::size_t i = 0; i < instances; ++i) {
            const std::uint64_t s = seed * 1000003ULL + i * 7919ULL;
            auto [leaves, loss] = c.make(s);
            results.push_back(check_gradients(std::string(c.name) + "#" + std::to_string(i), leaves, loss, options));
        }
    }
    return results;
}

}  // namespace ctfa
