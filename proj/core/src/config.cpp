#include <charconv>
#include <fstream>
#include <sstream>

#include "ctfa/errors.hpp"
#include "ctfa/model.hpp"

namespace ctfa {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::size_t to_size(const std::string& key, const std::string& v) {
    std::size_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) throw ConfigError(key + ": expected an unsigned integer, got '" + v + "'");
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    double out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::string fmt(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string fmt(bool v) {
    return v ? "true" : "false";
}

}  // namespace

void ModelConfig::set(const std::string& key, const std::string& raw) {
    const std::string v = trim(raw);
    if (key == "sample_rate") sample_rate = to_size(key, v);
    else if (key == "frame_len") frame_len = to_size(key, v);
    else if (key == "hop") hop = to_size(key, v);
    else if (key == "fft_size") fft_size = to_size(key, v);
    else if (key == "image_frames") image_frames = to_size(key, v);
    else if (key == "channels") {
        channels.clear();
        std::stringstream ss(v);
        std::string item;
        while (std::getline(ss, item, ',')) channels.push_back(to_size(key, trim(item)));
    } else if (key == "kernel_t") kernel_t = to_size(key, v);
    else if (key == "kernel_f") kernel_f = to_size(key, v);
    else if (key == "stride_t") stride_t = to_size(key, v);
    else if (key == "stride_f") stride_f = to_size(key, v);
    else if (key == "pad_t") pad_t = to_size(key, v);
    else if (key == "pad_f") pad_f = to_size(key, v);
    else if (key == "dense_kernel") dense_kernel = to_size(key, v);
    else if (key == "gru_layers") gru_layers = to_size(key, v);
    else if (key == "gru_hidden") gru_hidden = to_size(key, v);
    else if (key == "attention") attention = parse_attention_variant(v);
    else if (key == "attention_scaled") attention_scaled = to_bool(key, v);
    else if (key == "bounded_mask") bounded_mask = to_bool(key, v);
    else if (key == "c") c = to_double(key, v);
    else if (key == "beta") beta = to_double(key, v);
    else if (key == "learning_rate") learning_rate = to_double(key, v);
    else if (key == "batch_size") batch_size = to_size(key, v);
    else if (key == "epochs") epochs = to_size(key, v);
    else if (key == "seed") seed = to_u64(key, v);
    else if (key == "max_steps") max_steps = to_size(key, v);
    else if (key == "checkpoint_every") checkpoint_every = to_size(key, v);
    else if (key == "shuffle") shuffle = to_bool(key, v);
    else if (key == "psd_smoothing") psd_smoothing = to_bool(key, v);
    else if (key == "psd_alpha") psd_alpha = to_double(key, v);
    else throw ConfigError("unknown config key '" + key + "'");
}

std::map<std::string, std::string> ModelConfig::to_map() const {
    std::string ch;
    for (std::size_t i = 0; i < channels.size(); ++i) ch += (i ? "," : "") + std::to_string(channels[i]);
    return {
        {"sample_rate", std::to_string(sample_rate)},
        {"frame_len", std::to_string(frame_len)},
        {"hop", std::to_string(hop)},
        {"fft_size", std::to_string(fft_size)},
        {"image_frames", std::to_string(image_frames)},
        {"channels", ch},
        {"kernel_t", std::to_string(kernel_t)},
        {"kernel_f", std::to_string(kernel_f)},
        {"stride_t", std::to_string(stride_t)},
        {"stride_f", std::to_string(stride_f)},
        {"pad_t", std::to_string(pad_t)},
        {"pad_f", std::to_string(pad_f)},
        {"dense_kernel", std::to_string(dense_kernel)},
        {"gru_layers", std::to_string(gru_layers)},
        {"gru_hidden", std::to_string(gru_hidden)},
        {"attention", to_string(attention)},
        {"attention_scaled", fmt(attention_scaled)},
        {"bounded_mask", fmt(bounded_mask)},
        {"c", fmt(c)},
        {"beta", fmt(beta)},
        {"learning_rate", fmt(learning_rate)},
        {"batch_size", std::to_string(batch_size)},
        {"epochs", std::to_string(epochs)},
        {"seed", std::to_string(seed)},
        {"max_steps", std::to_string(max_steps)},
        {"checkpoint_every", std::to_string(checkpoint_every)},
        {"shuffle", fmt(shuffle)},
        {"psd_smoothing", fmt(psd_smoothing)},
        {"psd_alpha", fmt(psd_alpha)},
    };
}

std::vector<std::string> ModelConfig::keys() {
    std::vector<std::string> out;
    for (const auto& [k, v] : ModelConfig{}.to_map()) out.push_back(k);
    return out;
}

std::string ModelConfig::serialize() const {
    std::string out;
    for (const auto& [k, v] : to_map()) out += k + " = " + v + "\n";
    return out;
}

void ModelConfig::apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
    set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

ModelConfig ModelConfig::parse(const std::string& text) {
    ModelConfig cfg;
    std::stringstream ss(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        try {
            cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

ModelConfig ModelConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

void ModelConfig::validate() const {
    auto fail = [](const std::string& why) { throw ConfigError("invalid config: " + why); };
    if (sample_rate == 0) fail("sample_rate must be positive");
    try {
        stft().validate();
    } catch (const ContractError& e) {
        fail(e.what());
    }
    if (image_frames == 0) fail("image_frames must be positive");
    if (channels.empty()) fail("at least one encoder layer is required");
    for (std::size_t ch : channels) {
        if (ch == 0 || ch % 2 != 0) fail("channel widths must be positive and even");
    }
    if (kernel_t == 0 || kernel_f == 0 || stride_t == 0 || stride_f == 0) fail("kernel and stride must be positive");
    if (dense_kernel % 2 == 0) fail("dense_kernel must be odd");
    if (gru_layers == 0 || gru_hidden == 0) fail("gru_layers and gru_hidden must be positive");
    if (!(c > 0.0)) fail("c must be positive");
    if (!(beta >= 0.0 && beta <= 1.0)) fail("beta must lie in [0, 1]");
    if (!(learning_rate >= 0.0)) fail("learning_rate must be non-negative");
    if (batch_size == 0) fail("batch_size must be positive");
    if (!(psd_alpha >= 0.0 && psd_alpha < 1.0)) fail("psd_alpha must lie in [0, 1)");

    // Every encoder stage must be exactly undone by the mirrored transposed conv.
    std::size_t t = image_frames, f = image_bins();
    for (std::size_t i = 0; i < channels.size(); ++i) {
        auto down = [&](std::size_t n, std::size_t k, std::size_t s, std::size_t p, const char* axis) {
            if (n + 2 * p < k) fail(std::string(axis) + " axis too small at layer " + std::to_string(i + 1));
            const std::size_t out = (n + 2 * p - k) / s + 1;
            if ((out - 1) * s + k < 2 * p || (out - 1) * s + k - 2 * p != n) {
                fail(std::string(axis) + " size " + std::to_string(n) + " at layer " + std::to_string(i + 1) +
                     " is not restored by the decoder");
            }
            return out;
        };
        t = down(t, kernel_t, stride_t, pad_t, "time");
        f = down(f, kernel_f, stride_f, pad_f, "frequency");
    }
}

}  // namespace ctfa
