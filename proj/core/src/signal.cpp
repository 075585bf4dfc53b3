#include "ctfa/signal.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <mutex>
#include <numbers>

#include "ctfa/errors.hpp"

namespace ctfa {

void StftConfig::validate() const {
    if (hop == 0 || frame_len == 0 || hop > frame_len || frame_len > fft_size || fft_size % 2 != 0) {
        throw ContractError("stft: inconsistent framing (frame " + std::to_string(frame_len) + ", hop " +
                            std::to_string(hop) + ", fft " + std::to_string(fft_size) + ")");
    }
}

std::vector<double> hann_window(std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * double(i) / double(n));
    return w;
}

namespace {

// FFTW planning is not thread-safe; execution with new-array functions is.
std::mutex g_plan_mutex;

class RealFft {
public:
    explicit RealFft(std::size_t n) : n_(n) {
        in_ = fftw_alloc_real(n);
        out_ = fftw_alloc_complex(n / 2 + 1);
        std::lock_guard lock(g_plan_mutex);
        forward_ = fftw_plan_dft_r2c_1d(int(n), in_, out_, FFTW_ESTIMATE);
        inverse_ = fftw_plan_dft_c2r_1d(int(n), out_, in_, FFTW_ESTIMATE);
    }
    ~RealFft() {
        {
            std::lock_guard lock(g_plan_mutex);
            fftw_destroy_plan(forward_);
            fftw_destroy_plan(inverse_);
        }
        fftw_free(in_);
        fftw_free(out_);
    }
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;

    double* real() { return in_; }
    fftw_complex* spectrum() { return out_; }
    void forward() { fftw_execute(forward_); }
    // Unnormalised: the result is n times the true inverse.
    void inverse() { fftw_execute(inverse_); }

private:
    std::size_t n_;
    double* in_;
    fftw_complex* out_;
    fftw_plan forward_;
    fftw_plan inverse_;
};

std::size_t front_pad(const StftConfig& c) {
    return c.frame_len - c.hop;
}

}  // namespace

std::size_t stft_frame_count(std::size_t length, const StftConfig& config) {
    return (length - 1 + front_pad(config)) / config.hop + 1;
}

Spectrogram stft(const WaveForm& x, const StftConfig& config) {
    config.validate();
    if (x.samples.empty()) throw ContractError("stft: empty signal");
    const std::size_t frames = stft_frame_count(x.samples.size(), config);
    const std::size_t bins = config.bins(), pad = front_pad(config);
    const auto window = hann_window(config.frame_len);

    Spectrogram s{ComplexTensor({frames, bins}), config, x.samples.size()};
    RealFft fft(config.fft_size);
    for (std::size_t t = 0; t < frames; ++t) {
        double* buf = fft.real();
        std::fill(buf, buf + config.fft_size, 0.0);
        for (std::size_t n = 0; n < config.frame_len; ++n) {
            const long idx = long(t * config.hop + n) - long(pad);
            if (idx >= 0 && std::size_t(idx) < x.samples.size()) buf[n] = window[n] * x.samples[std::size_t(idx)];
        }
        fft.forward();
        for (std::size_t k = 0; k < bins; ++k) {
            s.data.re()[t * bins + k] = fft.spectrum()[k][0];
            s.data.im()[t * bins + k] = fft.spectrum()[k][1];
        }
    }
    return s;
}

WaveForm istft(const Spectrogram& s) {
    const StftConfig& c = s.config;
    c.validate();
    if (s.data.rank() != 2 || s.data.dim(1) != c.bins()) {
        throw ContractError("istft: spectrogram width " + to_string(s.data.shape()) + " does not match fft size " +
                            std::to_string(c.fft_size));
    }
    const std::size_t frames = s.frames(), bins = c.bins(), pad = front_pad(c);
    if (s.length > 0 && stft_frame_count(s.length, c) != frames) {
        throw ContractError("istft: " + std::to_string(frames) + " frames cannot describe " +
                            std::to_string(s.length) + " samples");
    }
    const std::size_t total = frames == 0 ? 0 : (frames - 1) * c.hop + c.frame_len;
    const auto window = hann_window(c.frame_len);
    std::vector<double> acc(total, 0.0), norm(total, 0.0);
    RealFft fft(c.fft_size);
    const double inv_n = 1.0 / double(c.fft_size);
    for (std::size_t t = 0; t < frames; ++t) {
        for (std::size_t k = 0; k < bins; ++k) {
            fft.spectrum()[k][0] = s.data.re()[t * bins + k];
            fft.spectrum()[k][1] = s.data.im()[t * bins + k];
        }
        fft.inverse();
        for (std::size_t n = 0; n < c.frame_len; ++n) {
            acc[t * c.hop + n] += window[n] * fft.real()[n] * inv_n;
            norm[t * c.hop + n] += window[n] * window[n];
        }
    }
    const std::size_t length = s.length > 0 ? s.length : (total > pad ? total - pad : 0);
    WaveForm out{std::vector<double>(length, 0.0), c.sample_rate};
    for (std::size_t i = 0; i < length && i + pad < total; ++i) {
        const double w = norm[i + pad];
        if (w > 1e-12) out.samples[i] = acc[i + pad] / w;
    }
    return out;
}

std::vector<SpectralImage> make_spectral_images(const Spectrogram& s, std::size_t image_frames) {
    if (image_frames == 0) throw ContractError("make_spectral_images: zero image length");
    const std::size_t frames = s.frames(), bins = s.data.dim(1), half = s.config.fft_size / 2;
    if (bins < half) throw ContractError("make_spectral_images: spectrogram narrower than fft_size / 2");
    std::vector<SpectralImage> images;
    for (std::size_t start = 0; start < frames; start += image_frames) {
        SpectralImage img{ComplexTensor({image_frames, half}), start};
        const std::size_t n = std::min(image_frames, frames - start);
        for (std::size_t t = 0; t < n; ++t)
            for (std::size_t f = 0; f < half; ++f) {
                img.data.re()[t * half + f] = s.data.re()[(start + t) * bins + f];
                img.data.im()[t * half + f] = s.data.im()[(start + t) * bins + f];
            }
        images.push_back(std::move(img));
    }
    return images;
}

Spectrogram reassemble_images(const std::vector<SpectralImage>& images, const Spectrogram& layout) {
    const std::size_t frames = layout.frames(), bins = layout.config.bins(), half = layout.config.fft_size / 2;
    Spectrogram out{ComplexTensor({frames, bins}), layout.config, layout.length};
    for (const auto& img : images) {
        if (img.data.rank() != 2 || img.data.dim(1) != half) {
            throw ShapeError("reassemble_images: image " + to_string(img.data.shape()) + " does not have " +
                             std::to_string(half) + " bins");
        }
        const std::size_t rows = img.data.dim(0);
        for (std::size_t t = 0; t < rows && img.frame_offset + t < frames; ++t)
            for (std::size_t f = 0; f < half; ++f) {
                out.data.re()[(img.frame_offset + t) * bins + f] = img.data.re()[t * half + f];
                out.data.im()[(img.frame_offset + t) * bins + f] = img.data.im()[t * half + f];
            }
    }
    return out;
}

ComplexTensor apply_mask(const ComplexTensor& mask, const ComplexTensor& x) {
    if (mask.shape() != x.shape()) {
        throw ShapeError("apply_mask: mask " + to_string(mask.shape()) + " vs input " + to_string(x.shape()));
    }
    ComplexTensor y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double mr = mask.re()[i], mi = mask.im()[i], xr = x.re()[i], xi = x.im()[i];
        y.re()[i] = mr * xr - mi * xi;
        y.im()[i] = mr * xi + mi * xr;
    }
    return y;
}

ComplexTensor compress_magnitude(const ComplexTensor& s, double c) {
    if (!(c > 0.0)) throw ContractError("compress_magnitude: exponent must be positive");
    ComplexTensor y(s.shape());
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double mag = std::hypot(s.re()[i], s.im()[i]);
        if (mag == 0.0) continue;
        const double k = std::pow(mag, c) / mag;
        y.re()[i] = k * s.re()[i];
        y.im()[i] = k * s.im()[i];
    }
    return y;
}

ComplexTensor psd_smooth(const ComplexTensor& s, double alpha) {
    if (!(alpha >= 0.0 && alpha < 1.0)) throw ContractError("psd_smooth: alpha must lie in [0, 1)");
    if (s.rank() == 0) throw ShapeError("psd_smooth: scalar input");
    const std::size_t frames = s.dim(0), width = frames == 0 ? 0 : s.size() / frames;
    ComplexTensor y(s.shape());
    std::vector<double> p(width, 0.0);
    for (std::size_t t = 0; t < frames; ++t)
        for (std::size_t f = 0; f < width; ++f) {
            const std::size_t i = t * width + f;
            const double mag = std::hypot(s.re()[i], s.im()[i]);
            p[f] = t == 0 ? mag * mag : alpha * p[f] + (1.0 - alpha) * mag * mag;
            if (mag == 0.0) {
                y.re()[i] = std::sqrt(p[f]);
                continue;
            }
            const double k = std::sqrt(p[f]) / mag;
            y.re()[i] = k * s.re()[i];
            y.im()[i] = k * s.im()[i];
        }
    return y;
}

// ---- WAV -------------------------------------------------------------------

namespace {

std::uint32_t read_u32(const char* p) {
    return std::uint32_t(std::uint8_t(p[0])) | std::uint32_t(std::uint8_t(p[1])) << 8 |
           std::uint32_t(std::uint8_t(p[2])) << 16 | std::uint32_t(std::uint8_t(p[3])) << 24;
}

std::uint16_t read_u16(const char* p) {
    return std::uint16_t(std::uint8_t(p[0]) | std::uint8_t(p[1]) << 8);
}

void put_u32(std::string& s, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(char((v >> (8 * i)) & 0xff));
}

void put_u16(std::string& s, std::uint16_t v) {
    s.push_back(char(v & 0xff));
    s.push_back(char(v >> 8));
}

}  // namespace

WaveForm read_wav(const std::filesystem::path& path, std::optional<std::size_t> expected_rate) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    auto fail = [&](const std::string& why) { return DataError(path.string() + ": " + why); };
    if (bytes.size() < 12 || bytes.compare(0, 4, "RIFF") != 0 || bytes.compare(8, 4, "WAVE") != 0) {
        throw fail("not a RIFF/WAVE file");
    }
    std::size_t pos = 12;
    bool have_fmt = false;
    std::size_t rate = 0;
    while (pos + 8 <= bytes.size()) {
        const std::string id = bytes.substr(pos, 4);
        const std::size_t size = read_u32(bytes.data() + pos + 4);
        const std::size_t body = pos + 8;
        if (body + size > bytes.size()) throw fail("truncated chunk '" + id + "'");
        if (id == "fmt ") {
            if (size < 16) throw fail("short fmt chunk");
            const auto format = read_u16(bytes.data() + body);
            const auto channels = read_u16(bytes.data() + body + 2);
            rate = read_u32(bytes.data() + body + 4);
            const auto bits = read_u16(bytes.data() + body + 14);
            if (format != 1 || channels != 1 || bits != 16) throw fail("only 16-bit PCM mono is supported");
            have_fmt = true;
        } else if (id == "data") {
            if (!have_fmt) throw fail("data chunk before fmt chunk");
            if (expected_rate && *expected_rate != rate) {
                throw fail("sample rate " + std::to_string(rate) + " differs from configured " +
                           std::to_string(*expected_rate));
            }
            WaveForm w{std::vector<double>(size / 2), rate};
            for (std::size_t i = 0; i < w.samples.size(); ++i) {
                w.samples[i] = double(std::int16_t(read_u16(bytes.data() + body + 2 * i))) / 32768.0;
            }
            return w;
        }
        pos = body + size + (size & 1);
    }
    throw fail("no data chunk");
}

void write_wav(const std::filesystem::path& path, const WaveForm& w) {
    const std::uint32_t data_bytes = std::uint32_t(w.samples.size() * 2);
    std::string out;
    out.reserve(44 + data_bytes);
    out += "RIFF";
    put_u32(out, 36 + data_bytes);
    out += "WAVEfmt ";
    put_u32(out, 16);
    put_u16(out, 1);
    put_u16(out, 1);
    put_u32(out, std::uint32_t(w.sample_rate));
    put_u32(out, std::uint32_t(w.sample_rate * 2));
    put_u16(out, 2);
    put_u16(out, 16);
    out += "data";
    put_u32(out, data_bytes);
    for (double v : w.samples) {
        const double clipped = std::clamp(v, -1.0, 1.0);
        put_u16(out, std::uint16_t(std::int16_t(std::lround(std::min(clipped * 32768.0, 32767.0)))));
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write " + path.string());
    f.write(out.data(), std::streamsize(out.size()));
    if (!f) throw DataError("write failed for " + path.string());
}

}  // namespace ctfa
