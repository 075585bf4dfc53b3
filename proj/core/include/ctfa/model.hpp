#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "ctfa/attention.hpp"
#include "ctfa/checkpoint.hpp"
#include "ctfa/layers.hpp"
#include "ctfa/signal.hpp"

namespace ctfa {

// Every architecture, signal and training setting. Text form is one
// `key = value` per line, `#` starts a comment; unknown keys are rejected.
struct ModelConfig {
    // framing
    std::size_t sample_rate = 8000;
    std::size_t frame_len = 128;
    std::size_t hop = 32;
    std::size_t fft_size = 128;
    std::size_t image_frames = 64;  // image bins are fft_size / 2

    // network; channel widths count real and imaginary feature maps, so each
    // entry is twice the number of complex channels
    std::vector<std::size_t> channels{4, 8, 16, 32};
    std::size_t kernel_t = 3, kernel_f = 4;
    std::size_t stride_t = 1, stride_f = 2;
    std::size_t pad_t = 1, pad_f = 1;
    std::size_t dense_kernel = 3;
    std::size_t gru_layers = 2;
    std::size_t gru_hidden = 32;
    AttentionVariant attention = AttentionVariant::Complex;
    bool attention_scaled = false;
    bool bounded_mask = false;  // tanh on both parts of the mask

    // loss
    double c = 0.3;
    double beta = 0.3;

    // training
    double learning_rate = 1e-3;
    std::size_t batch_size = 4;
    std::size_t epochs = 20;
    std::uint64_t seed = 1;
    std::size_t max_steps = 0;         // 0 = no limit
    std::size_t checkpoint_every = 0;  // steps; 0 = final checkpoint only
    bool shuffle = true;
    bool psd_smoothing = false;  // smooths the network input only
    double psd_alpha = 0.8;

    std::size_t image_bins() const { return fft_size / 2; }
    std::size_t num_enc_layers() const { return channels.size(); }
    StftConfig stft() const { return {sample_rate, frame_len, hop, fft_size}; }

    // Throws ConfigError on violated invariants.
    void validate() const;

    void set(const std::string& key, const std::string& value);
    // "key=value"
    void apply_override(const std::string& assignment);
    std::map<std::string, std::string> to_map() const;
    std::string serialize() const;

    static ModelConfig parse(const std::string& text);
    static ModelConfig load(const std::filesystem::path& path);
    static std::vector<std::string> keys();
};

// Complex dense block: d = crelu(conv_a(x)), out = crelu(conv_b([x, d])).
class DenseBlock {
public:
    DenseBlock() = default;
    DenseBlock(std::size_t channels, std::size_t kernel, std::uint64_t seed);
    Var forward(const Var& x) const;
    ParameterList parameters(const std::string& prefix) const;

    ComplexConv2d conv_a, conv_b;
};

class DccrnModel {
public:
    explicit DccrnModel(const ModelConfig& config);

    // images: [B, image_frames, image_bins] complex spectra -> mask of the
    // same shape. Training mode uses batch statistics in every batch norm.
    Var forward(const Var& images, bool training);
    // Attention maps of the most recent forward pass, in layer order.
    const std::vector<AttentionMap>& attention_maps() const { return maps_; }
    void set_trace(bool on) { trace_ = on; }

    ParameterList parameters() const;
    BufferList buffers();
    std::size_t trainable_count() const { return count_trainable(parameters()); }
    const ModelConfig& config() const { return config_; }

    Checkpoint to_checkpoint();
    void load_state(const Checkpoint& checkpoint);
    void save(const std::filesystem::path& path);
    static DccrnModel load(const std::filesystem::path& path);

private:
    struct Encoder {
        ComplexConv2d conv;
        TfAttentionBlock attention;
        DenseBlock dense;
        ComplexBatchNorm bn;
    };
    struct Decoder {
        ComplexConvTranspose2d conv;
        TfAttentionBlock attention;
        DenseBlock dense;
        ComplexBatchNorm bn;
    };

    ModelConfig config_;
    std::vector<Encoder> encoders_;
    std::vector<Decoder> decoders_;
    std::vector<ComplexGru> grus_;
    ComplexLinear gru_out_;
    ComplexConv2d mask_out_;
    bool trace_ = false;
    std::vector<AttentionMap> maps_;
};

// (1 - beta) sum (|S|^c - |E|^c)^2 + beta sum ||S|^c e^{j arg S} - |E|^c e^{j arg E}|^2
// for estimate E and fixed target S. The backward pass floors |E| at 1e-6.
Var complex_loss(const Var& estimate, const ComplexTensor& target, double c, double beta);
double complex_loss_value(const ComplexTensor& estimate, const ComplexTensor& target, double c, double beta);

struct AdamOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected Adam on real and imaginary planes independently; real-valued
// parameters leave their imaginary plane untouched.
class Adam {
public:
    Adam(ParameterList params, AdamOptions options);
    // Throws NumericalError naming the parameter on a non-finite gradient or
    // a non-finite value after the update.
    void step();
    void zero_grad();
    std::size_t steps() const { return t_; }

private:
    ParameterList params_;
    AdamOptions opt_;
    std::vector<ComplexTensor> m_, v_;
    std::size_t t_ = 0;
};

struct TrainingExample {
    ComplexTensor input;   // reverberant image, after optional smoothing
    ComplexTensor mixture; // reverberant image the mask is applied to
    ComplexTensor target;  // clean image
};

// Reads manifest pairs, converts them to spectral images. Unreadable pairs
// are skipped and reported through `warn`.
std::vector<TrainingExample> load_training_examples(const std::filesystem::path& manifest, const ModelConfig& cfg,
                                                    const std::function<void(const std::string&)>& warn);
std::vector<TrainingExample> examples_from_pair(const WaveForm& clean, const WaveForm& reverb, const ModelConfig& cfg);

struct TrainRecord {
    std::size_t step;
    std::size_t epoch;
    double loss;
};

struct TrainResult {
    std::vector<TrainRecord> log;
    std::filesystem::path final_checkpoint;
};

struct TrainOptions {
    std::filesystem::path out_dir;  // empty: no files written
    std::function<void(const std::string&)> warn;
    std::function<void(const TrainRecord&)> on_step;
    // Checked after each step; true ends training (final checkpoint still written).
    std::function<bool(const TrainRecord&)> stop;
};

// Iterates epochs of shuffled batches: forward, mask, loss, backward, Adam.
// Writes train_log.csv (step,epoch,loss), ckpt_step_N.bin and model.ckpt to
// out_dir when set. A non-finite loss is a NumericalError.
TrainResult train(DccrnModel& model, const std::vector<TrainingExample>& data, const TrainOptions& options);

// Masks every spectral image of x with mask_fn and resynthesises; output length
// equals input length. Rate mismatch with the framing is a ContractError.
using MaskFunction = std::function<ComplexTensor(const ComplexTensor& images)>;
WaveForm enhance_with_mask(const WaveForm& x, const ModelConfig& cfg, const MaskFunction& mask_fn);
WaveForm enhance_waveform(DccrnModel& model, const WaveForm& x);

}  // namespace ctfa
