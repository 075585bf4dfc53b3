#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include "ctfa/tensor.hpp"

namespace ctfa {

struct WaveForm {
    std::vector<double> samples;  // nominally in [-1, 1]
    std::size_t sample_rate = 16000;
};

struct StftConfig {
    std::size_t sample_rate = 16000;
    std::size_t frame_len = 512;
    std::size_t hop = 128;
    std::size_t fft_size = 512;

    // Throws ContractError unless 0 < hop <= frame_len <= fft_size, fft_size even.
    void validate() const;
    std::size_t bins() const { return fft_size / 2 + 1; }
};

struct Spectrogram {
    ComplexTensor data;  // [frames, fft_size / 2 + 1]
    StftConfig config;
    std::size_t length = 0;  // samples of the analysed signal

    std::size_t frames() const { return data.dim(0); }
};

// Periodic Hann window of length n.
std::vector<double> hann_window(std::size_t n);

// Frames start frame_len - hop samples before the signal so every sample lies
// under frame_len / hop windows; the tail is zero-padded. frame i covers padded
// samples [i * hop, i * hop + frame_len), zero-filled up to fft_size.
Spectrogram stft(const WaveForm& x, const StftConfig& config);
std::size_t stft_frame_count(std::size_t length, const StftConfig& config);

// Weighted overlap-add with the Hann window, normalised by the summed squared
// window, trimmed to the analysed length.
WaveForm istft(const Spectrogram& s);

struct SpectralImage {
    ComplexTensor data;  // [image_frames, fft_size / 2]
    std::size_t frame_offset = 0;
};

// Lower-half bins [0, fft_size / 2) in consecutive blocks of image_frames; the
// last block is zero-padded.
std::vector<SpectralImage> make_spectral_images(const Spectrogram& s, std::size_t image_frames);
// Inverse of make_spectral_images for a spectrogram shaped like `layout`
// (frames and config are taken from it, its data is ignored). Padding frames
// are dropped and the Nyquist bin is zero.
Spectrogram reassemble_images(const std::vector<SpectralImage>& images, const Spectrogram& layout);

// (Mr Xr - Mi Xi) + j(Mr Xi + Mi Xr) elementwise.
ComplexTensor apply_mask(const ComplexTensor& mask, const ComplexTensor& x);
// |S|^c e^{j arg S}; zero stays zero. Requires c > 0.
ComplexTensor compress_magnitude(const ComplexTensor& s, double c);
// P(t) = alpha P(t-1) + (1 - alpha) |S(t)|^2 along axis 0 with P(0) = |S(0)|^2;
// output magnitude sqrt(P), phase of S. Requires 0 <= alpha < 1.
ComplexTensor psd_smooth(const ComplexTensor& s, double alpha);

// 16-bit PCM mono RIFF. Reading rejects other formats and, when given, a
// sample rate different from expected_rate (DataError). Writing clips to [-1, 1].
WaveForm read_wav(const std::filesystem::path& path, std::optional<std::size_t> expected_rate = std::nullopt);
void write_wav(const std::filesystem::path& path, const WaveForm& w);

}  // namespace ctfa
