#include "ctfa/model.hpp"

#include "ctfa/errors.hpp"

namespace ctfa {

namespace {

// splitmix64 stream for per-component initialisation seeds
class SeedStream {
public:
    explicit SeedStream(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t state_;
};

}  // namespace

DenseBlock::DenseBlock(std::size_t channels, std::size_t kernel, std::uint64_t seed) {
    const std::size_t p = kernel / 2;
    conv_a = ComplexConv2d(channels, channels, kernel, kernel, {1, 1, p, p}, seed);
    conv_b = ComplexConv2d(2 * channels, channels, kernel, kernel, {1, 1, p, p}, seed + 7);
}

Var DenseBlock::forward(const Var& x) const {
    Var d = crelu(conv_a.forward(x));
    return crelu(conv_b.forward(concat({x, d}, 1)));
}

ParameterList DenseBlock::parameters(const std::string& prefix) const {
    ParameterList out = conv_a.parameters(prefix + ".conv_a");
    append(out, conv_b.parameters(prefix + ".conv_b"));
    return out;
}

DccrnModel::DccrnModel(const ModelConfig& config) : config_(config) {
    config_.validate();
    SeedStream seeds(config_.seed);
    const Conv2dGeometry geo{config_.stride_t, config_.stride_f, config_.pad_t, config_.pad_f};
    const std::size_t layers = config_.num_enc_layers();

    std::vector<std::size_t> width(layers + 1), t(layers + 1), f(layers + 1);
    width[0] = 1;
    t[0] = config_.image_frames;
    f[0] = config_.image_bins();
    for (std::size_t i = 0; i < layers; ++i) {
        width[i + 1] = config_.channels[i] / 2;
        t[i + 1] = conv_out_size(t[i], config_.kernel_t, config_.stride_t, config_.pad_t);
        f[i + 1] = conv_out_size(f[i], config_.kernel_f, config_.stride_f, config_.pad_f);
    }

    for (std::size_t i = 0; i < layers; ++i) {
        Encoder e;
        e.conv = ComplexConv2d(width[i], width[i + 1], config_.kernel_t, config_.kernel_f, geo, seeds.next());
        e.attention = TfAttentionBlock(config_.attention, width[i + 1], t[i + 1], f[i + 1], seeds.next(),
                                       config_.attention_scaled);
        e.dense = DenseBlock(width[i + 1], config_.dense_kernel, seeds.next());
        e.bn = ComplexBatchNorm(width[i + 1]);
        encoders_.push_back(std::move(e));
    }

    std::size_t dim = width[layers] * f[layers];
    for (std::size_t g = 0; g < config_.gru_layers; ++g) {
        grus_.emplace_back(g == 0 ? dim : config_.gru_hidden, config_.gru_hidden, seeds.next());
    }
    gru_out_ = ComplexLinear(config_.gru_hidden, dim, seeds.next());

    // Decoder for level i consumes [previous, skip_i] and restores level i - 1.
    for (std::size_t i = layers; i >= 1; --i) {
        const std::size_t out = i == 1 ? width[1] : width[i - 1];
        Decoder d;
        d.conv = ComplexConvTranspose2d(2 * width[i], out, config_.kernel_t, config_.kernel_f, geo, seeds.next());
        d.attention = TfAttentionBlock(config_.attention, out, t[i - 1], f[i - 1], seeds.next(),
                                       config_.attention_scaled);
        d.dense = DenseBlock(out, config_.dense_kernel, seeds.next());
        d.bn = ComplexBatchNorm(out);
        decoders_.push_back(std::move(d));
    }
    mask_out_ = ComplexConv2d(width[1], 1, 1, 1, {}, seeds.next());
}

Var DccrnModel::forward(const Var& images, bool training) {
    const Shape& s = images.shape();
    if (s.size() != 3 || s[1] != config_.image_frames || s[2] != config_.image_bins()) {
        throw ShapeError("DccrnModel: expected [B, " + std::to_string(config_.image_frames) + ", " +
                         std::to_string(config_.image_bins()) + "] images, got " + to_string(s));
    }
    maps_.clear();
    std::vector<AttentionMap>* maps = trace_ ? &maps_ : nullptr;
    const std::size_t batch = s[0];

    Var h = reshape(images, {batch, 1, s[1], s[2]});
    std::vector<Var> skips;
    for (std::size_t i = 0; i < encoders_.size(); ++i) {
        Encoder& e = encoders_[i];
        if (i > 0) h = crelu(h);
        h = e.conv.forward(h);
        h = e.attention.forward(h, maps);
        h = e.dense.forward(h);
        h = e.bn.forward(h, training);
        skips.push_back(h);
    }

    const Shape b = h.shape();  // [B, C, T, F]
    Var seq = reshape(permute(h, {0, 2, 1, 3}), {b[0], b[2], b[1] * b[3]});
    for (const auto& g : grus_) seq = g.forward(seq);
    seq = gru_out_.forward(seq);
    h = permute(reshape(seq, {b[0], b[2], b[1], b[3]}), {0, 2, 1, 3});

    for (std::size_t j = 0; j < decoders_.size(); ++j) {
        Decoder& d = decoders_[j];
        h = crelu(concat({h, skips[skips.size() - 1 - j]}, 1));
        h = d.conv.forward(h);
        h = d.attention.forward(h, maps);
        h = d.dense.forward(h);
        h = d.bn.forward(h, training);
    }
    Var mask = reshape(mask_out_.forward(h), s);
    if (config_.bounded_mask) mask = tanh_parts(mask);
    return mask;
}

ParameterList DccrnModel::parameters() const {
    ParameterList out;
    for (std::size_t i = 0; i < encoders_.size(); ++i) {
        const std::string p = "enc" + std::to_string(i);
        append(out, encoders_[i].conv.parameters(p + ".conv"));
        append(out, encoders_[i].attention.parameters(p + ".attn"));
        append(out, encoders_[i].dense.parameters(p + ".dense"));
        append(out, encoders_[i].bn.parameters(p + ".bn"));
    }
    for (std::size_t g = 0; g < grus_.size(); ++g) append(out, grus_[g].parameters("gru" + std::to_string(g)));
    append(out, gru_out_.parameters("gru_out"));
    for (std::size_t j = 0; j < decoders_.size(); ++j) {
        const std::string p = "dec" + std::to_string(j);
        append(out, decoders_[j].conv.parameters(p + ".conv"));
        append(out, decoders_[j].attention.parameters(p + ".attn"));
        append(out, decoders_[j].dense.parameters(p + ".dense"));
        append(out, decoders_[j].bn.parameters(p + ".bn"));
    }
    append(out, mask_out_.parameters("mask_out"));
    return out;
}

BufferList DccrnModel::buffers() {
    BufferList out;
    for (std::size_t i = 0; i < encoders_.size(); ++i) append(out, encoders_[i].bn.buffers("enc" + std::to_string(i) + ".bn"));
    for (std::size_t j = 0; j < decoders_.size(); ++j) append(out, decoders_[j].bn.buffers("dec" + std::to_string(j) + ".bn"));
    return out;
}

Checkpoint DccrnModel::to_checkpoint() {
    Checkpoint ck;
    ck.metadata = config_.serialize();
    for (const auto& p : parameters()) ck.entries.push_back({p.name, p.var.value()});
    for (const auto& b : buffers()) ck.entries.push_back({b.name, *b.tensor});
    return ck;
}

void DccrnModel::load_state(const Checkpoint& ck) {
    std::size_t used = 0;
    auto take = [&](const std::string& name, ComplexTensor& dst) {
        const ComplexTensor* src = ck.find(name);
        if (src == nullptr) throw DataError("checkpoint is missing '" + name + "'");
        if (src->shape() != dst.shape()) {
            throw DataError("checkpoint entry '" + name + "' has shape " + to_string(src->shape()) + ", model expects " +
                            to_string(dst.shape()));
        }
        dst = *src;
        ++used;
    };
    for (auto& p : parameters()) take(p.name, p.var.mutable_value());
    for (auto& b : buffers()) take(b.name, *b.tensor);
    if (used != ck.entries.size()) throw DataError("checkpoint has entries the model does not use");
}

void DccrnModel::save(const std::filesystem::path& path) {
    save_checkpoint(path, to_checkpoint());
}

DccrnModel DccrnModel::load(const std::filesystem::path& path) {
    const Checkpoint ck = load_checkpoint(path);
    DccrnModel model(ModelConfig::parse(ck.metadata));
    model.load_state(ck);
    return model;
}

}  // namespace ctfa
