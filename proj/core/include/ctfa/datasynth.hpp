#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ctfa/signal.hpp"

namespace ctfa {

struct RirSpec {
    double t60 = 0.5;            // seconds
    std::size_t length = 0;      // samples; 0 means ceil(t60 * fs) + 1
    double direct_path_gain = 1.0;
    std::uint64_t seed = 0;
    std::size_t sample_rate = 16000;
    double tail_gain = 1.0;  // scales every h[n > 0]
};

// Amplitude decay constant in seconds: the envelope falls 60 dB over t60.
double rir_tau(double t60);
// exp(-n / (fs * tau))
double rir_envelope(const RirSpec& spec, std::size_t n);
std::size_t rir_length(const RirSpec& spec);

// h[0] = direct_path_gain, h[n] = tail_gain * N(0, 1) * envelope(n). Deterministic per seed.
WaveForm synth_rir(const RirSpec& spec);

// s convolved with h, truncated to len(s), plus white Gaussian noise scaled so
// that the realised signal-to-noise power ratio equals snr_db exactly.
WaveForm reverberate(const WaveForm& s, const WaveForm& h, std::optional<double> snr_db = std::nullopt,
                     std::uint64_t noise_seed = 0);

// Speech-like test signal: voiced segments of harmonic tones with vibrato and
// syllable-rate amplitude modulation separated by silent pauses. Peak 0.5.
WaveForm synth_clean(std::size_t samples, std::size_t sample_rate, std::uint64_t seed);

struct SynthConfig {
    std::size_t sample_rate = 16000;
    double duration_s = 2.0;
    double t60_min = 0.3;
    double t60_max = 0.7;
    std::optional<double> snr_db = 30.0;
    // Direct path energy relative to the expected tail energy; the direct
    // path keeps unit gain so clean and reverberant share a level.
    double drr_db = 0.0;
    double peak = 0.9;  // file peak after joint normalisation of a pair
};

struct ManifestRow {
    std::filesystem::path clean_path;
    std::filesystem::path reverb_path;
    double t60_s = 0.0;
    std::optional<double> snr_db;
    std::uint64_t seed = 0;
};

struct PairAudio {
    WaveForm clean;
    WaveForm reverb;
};

// Per-pair seed from (master seed, index); independent of generation order.
std::uint64_t pair_seed(std::uint64_t master_seed, std::size_t index);
// Tail gain giving the configured DRR for a given T60 with unit direct path.
double tail_gain_for(const SynthConfig& cfg, double t60);
// Regenerates one pair from its seed and T60: clean from `seed`, RIR from
// seed + 1, noise from seed + 2 (generate_dataset draws T60 from seed + 3).
// Both signals share one gain that sets their joint peak to cfg.peak.
PairAudio synthesize_pair(std::uint64_t seed, double t60, const SynthConfig& cfg);

// Writes clean_NNNN.wav, reverb_NNNN.wav and manifest.csv into dir. Manifest
// paths are relative to dir.
std::vector<ManifestRow> generate_dataset(const std::filesystem::path& dir, std::size_t n_pairs,
                                          std::uint64_t seed, const SynthConfig& cfg);

inline constexpr const char* kManifestHeader = "clean_path,reverb_path,t60_s,snr_db,seed";
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows);
// Relative paths are resolved against the manifest's directory.
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

}  // namespace ctfa
