#include "ctfa/datasynth.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "ctfa/errors.hpp"

namespace ctfa {

double rir_tau(double t60) {
    return t60 / (3.0 * std::log(10.0));
}

double rir_envelope(const RirSpec& spec, std::size_t n) {
    return std::exp(-double(n) / (double(spec.sample_rate) * rir_tau(spec.t60)));
}

std::size_t rir_length(const RirSpec& spec) {
    if (spec.length > 0) return spec.length;
    return std::size_t(std::ceil(spec.t60 * double(spec.sample_rate))) + 1;
}

WaveForm synth_rir(const RirSpec& spec) {
    if (!(spec.t60 > 0.0) || spec.sample_rate == 0) throw ContractError("synth_rir: t60 and sample rate must be positive");
    const std::size_t len = rir_length(spec);
    WaveForm h{std::vector<double>(len), spec.sample_rate};
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    h.samples[0] = spec.direct_path_gain;
    for (std::size_t n = 1; n < len; ++n) h.samples[n] = spec.tail_gain * gauss(rng) * rir_envelope(spec, n);
    return h;
}

WaveForm reverberate(const WaveForm& s, const WaveForm& h, std::optional<double> snr_db, std::uint64_t noise_seed) {
    if (s.sample_rate != h.sample_rate) {
        throw ContractError("reverberate: signal rate " + std::to_string(s.sample_rate) + " != RIR rate " +
                            std::to_string(h.sample_rate));
    }
    const std::size_t n = s.samples.size(), taps = h.samples.size();
    WaveForm x{std::vector<double>(n, 0.0), s.sample_rate};
    for (std::size_t i = 0; i < n; ++i) {
        const double si = s.samples[i];
        if (si == 0.0) continue;
        const std::size_t kmax = std::min(taps, n - i);
        double* out = x.samples.data() + i;
        const double* hk = h.samples.data();
        for (std::size_t k = 0; k < kmax; ++k) out[k] += si * hk[k];
    }
    if (!snr_db) return x;

    double p_sig = 0.0;
    for (double v : x.samples) p_sig += v * v;
    if (p_sig == 0.0) throw ContractError("reverberate: SNR is undefined for a silent signal");
    std::mt19937_64 rng(noise_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> noise(n);
    double p_noise = 0.0;
    for (double& v : noise) {
        v = gauss(rng);
        p_noise += v * v;
    }
    const double g = std::sqrt(p_sig / (p_noise * std::pow(10.0, *snr_db / 10.0)));
    for (std::size_t i = 0; i < n; ++i) x.samples[i] += g * noise[i];
    return x;
}

WaveForm synth_clean(std::size_t samples, std::size_t sample_rate, std::uint64_t seed) {
    WaveForm w{std::vector<double>(samples, 0.0), sample_rate};
    std::mt19937_64 rng(seed);
    auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    const double fs = double(sample_rate);
    const double two_pi = 2.0 * std::numbers::pi;

    // the leading pause never exceeds a quarter of the clip, so short clips are voiced
    const double lead = std::min(uniform(0.05, 0.2), 0.25 * double(samples) / fs);
    std::size_t pos = std::size_t(lead * fs);
    while (pos < samples) {
        const std::size_t len = std::min(samples - pos, std::size_t(uniform(0.15, 0.4) * fs));
        const double f0 = uniform(100.0, 220.0);
        const double vib_rate = uniform(4.0, 7.0), vib_depth = uniform(0.01, 0.04) * f0;
        const double am_rate = uniform(3.0, 6.0), am_phase = uniform(0.0, two_pi);
        const double f1 = uniform(300.0, 800.0), f2 = uniform(900.0, 2200.0);
        const std::size_t harmonics = std::max<std::size_t>(1, std::size_t(0.4 * fs / (f0 + vib_depth)));
        std::vector<double> amp(harmonics), phase(harmonics);
        for (std::size_t k = 0; k < harmonics; ++k) {
            const double fk = double(k + 1) * f0;
            amp[k] = std::exp(-std::pow((fk - f1) / 150.0, 2)) + 0.7 * std::exp(-std::pow((fk - f2) / 250.0, 2)) +
                     0.15 / double(k + 1);
            phase[k] = uniform(0.0, two_pi);
        }
        const double ramp = 0.02 * fs;
        double theta = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
            const double t = double(i) / fs;
            theta += two_pi * (f0 + vib_depth * std::sin(two_pi * vib_rate * t)) / fs;
            double v = 0.0;
            for (std::size_t k = 0; k < harmonics; ++k) v += amp[k] * std::sin(double(k + 1) * theta + phase[k]);
            double env = 0.6 + 0.4 * std::sin(two_pi * am_rate * t + am_phase);
            const double edge = std::min(double(i), double(len - 1 - i));
            if (edge < ramp) env *= 0.5 - 0.5 * std::cos(std::numbers::pi * edge / ramp);
            w.samples[pos + i] = env * v;
        }
        pos += len + std::size_t(uniform(0.05, 0.25) * fs);
    }
    double peak = 0.0;
    for (double v : w.samples) peak = std::max(peak, std::abs(v));
    if (peak > 0.0) {
        for (double& v : w.samples) v *= 0.5 / peak;
    }
    return w;
}

std::uint64_t pair_seed(std::uint64_t master_seed, std::size_t index) {
    // splitmix64 of the master seed advanced by index + 1 increments
    std::uint64_t z = master_seed + 0x9e3779b97f4a7c15ULL * (std::uint64_t(index) + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double tail_gain_for(const SynthConfig& cfg, double t60) {
    RirSpec spec{t60, 0, 1.0, 0, cfg.sample_rate};
    const std::size_t len = rir_length(spec);
    double tail = 0.0;
    for (std::size_t n = 1; n < len; ++n) tail += std::pow(rir_envelope(spec, n), 2);
    return std::sqrt(std::pow(10.0, -cfg.drr_db / 10.0) / tail);
}

PairAudio synthesize_pair(std::uint64_t seed, double t60, const SynthConfig& cfg) {
    const std::size_t n = std::size_t(std::llround(cfg.duration_s * double(cfg.sample_rate)));
    if (n == 0) throw ConfigError("synth: duration too short");
    PairAudio pair{synth_clean(n, cfg.sample_rate, seed), {}};
    const WaveForm h = synth_rir({t60, 0, 1.0, seed + 1, cfg.sample_rate, tail_gain_for(cfg, t60)});
    pair.reverb = reverberate(pair.clean, h, cfg.snr_db, seed + 2);
    double peak = 0.0;
    for (double v : pair.clean.samples) peak = std::max(peak, std::abs(v));
    for (double v : pair.reverb.samples) peak = std::max(peak, std::abs(v));
    if (peak > 0.0) {
        const double g = cfg.peak / peak;
        for (double& v : pair.clean.samples) v *= g;
        for (double& v : pair.reverb.samples) v *= g;
    }
    return pair;
}

namespace {

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string numbered(const char* stem, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_%04zu.wav", stem, i);
    return buf;
}

}  // namespace

std::vector<ManifestRow> generate_dataset(const std::filesystem::path& dir, std::size_t n_pairs, std::uint64_t seed,
                                          const SynthConfig& cfg) {
    if (!(cfg.t60_min > 0.0) || cfg.t60_max < cfg.t60_min) throw ConfigError("synth: invalid T60 range");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
    std::vector<ManifestRow> rows;
    for (std::size_t i = 0; i < n_pairs; ++i) {
        const std::uint64_t s = pair_seed(seed, i);
        std::mt19937_64 rng(s + 3);
        const double t60 = std::uniform_real_distribution<double>(cfg.t60_min, cfg.t60_max)(rng);
        const PairAudio pair = synthesize_pair(s, t60, cfg);
        ManifestRow row{numbered("clean", i), numbered("reverb", i), t60, cfg.snr_db, s};
        write_wav(dir / row.clean_path, pair.clean);
        write_wav(dir / row.reverb_path, pair.reverb);
        rows.push_back(row);
    }
    write_manifest(dir / "manifest.csv", rows);
    return rows;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << kManifestHeader << '\n';
    for (const auto& r : rows) {
        out << r.clean_path.generic_string() << ',' << r.reverb_path.generic_string() << ',' << format_double(r.t60_s)
            << ',' << (r.snr_db ? format_double(*r.snr_db) : std::string()) << ',' << r.seed << '\n';
    }
    if (!out) throw DataError("write failed for " + path.string());
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kManifestHeader) {
        throw DataError(path.string() + ": expected header '" + kManifestHeader + "'");
    }
    const auto base = path.parent_path();
    std::vector<ManifestRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (line.back() == ',') f.emplace_back();
        if (f.size() != 5) throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected 5 fields");
        auto bad = [&](const std::string& what) {
            return DataError(path.string() + ":" + std::to_string(lineno) + ": bad " + what);
        };
        ManifestRow r;
        r.clean_path = base / f[0];
        r.reverb_path = base / f[1];
        if (std::from_chars(f[2].data(), f[2].data() + f[2].size(), r.t60_s).ec != std::errc{}) throw bad("t60_s");
        if (!f[3].empty()) {
            double v = 0;
            if (std::from_chars(f[3].data(), f[3].data() + f[3].size(), v).ec != std::errc{}) throw bad("snr_db");
            r.snr_db = v;
        }
        if (std::from_chars(f[4].data(), f[4].data() + f[4].size(), r.seed).ec != std::errc{}) throw bad("seed");
        rows.push_back(r);
    }
    return rows;
}

}  // namespace ctfa
