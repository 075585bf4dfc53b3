#include "ctfa/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <fftw3.h>
#include <mutex>
#include <numbers>

#include "ctfa/errors.hpp"

namespace ctfa {

namespace {

struct Framing {
    std::size_t frame = 0, hop = 0, count = 0;
    std::vector<double> window;
};

Framing make_framing(std::size_t length, std::size_t rate, const MetricConfig& cfg) {
    Framing f;
    f.frame = std::size_t(std::llround(cfg.frame_ms * 1e-3 * double(rate)));
    f.hop = std::size_t(std::llround(cfg.hop_ms * 1e-3 * double(rate)));
    if (f.frame == 0 || f.hop == 0) throw ConfigError("metrics: frame or hop rounds to zero samples");
    f.count = length < f.frame ? 0 : (length - f.frame) / f.hop + 1;
    f.window = hann_window(f.frame);
    return f;
}

std::vector<double> frame_at(const std::vector<double>& x, const Framing& f, std::size_t i) {
    std::vector<double> out(f.frame);
    for (std::size_t n = 0; n < f.frame; ++n) out[n] = f.window[n] * x[i * f.hop + n];
    return out;
}

struct Prepared {
    std::vector<double> ref, test;
    Framing framing;
    std::vector<std::size_t> active;  // frames passing the reference energy gate
};

Prepared prepare(const WaveForm& ref, const WaveForm& test, const MetricConfig& cfg) {
    if (ref.sample_rate != test.sample_rate) {
        throw ContractError("metrics: sample rates differ (" + std::to_string(ref.sample_rate) + " vs " +
                            std::to_string(test.sample_rate) + ")");
    }
    const std::size_t n = std::min(ref.samples.size(), test.samples.size());
    Prepared p{{ref.samples.begin(), ref.samples.begin() + long(n)},
               {test.samples.begin(), test.samples.begin() + long(n)},
               make_framing(n, ref.sample_rate, cfg),
               {}};
    std::vector<double> energy(p.framing.count);
    double peak = 0.0;
    for (std::size_t i = 0; i < p.framing.count; ++i) {
        for (double v : frame_at(p.ref, p.framing, i)) energy[i] += v * v;
        peak = std::max(peak, energy[i]);
    }
    const double gate = peak * std::pow(10.0, -cfg.gate_db / 10.0);
    for (std::size_t i = 0; i < p.framing.count; ++i) {
        if (energy[i] > 0.0 && energy[i] >= gate) p.active.push_back(i);
    }
    if (p.active.empty()) throw DataError("metrics: reference has no active frames");
    return p;
}

LpcFit fit(const std::vector<double>& frame, const MetricConfig& cfg, std::vector<double>* r_out = nullptr) {
    auto r = autocorrelation(frame, cfg.lpc_order);
    r[0] *= 1.0 + cfg.lpc_regularisation;
    if (r_out) *r_out = r;
    return levinson_durbin(r, cfg.lpc_order);
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / double(v.size());
}

}  // namespace

std::vector<double> autocorrelation(const std::vector<double>& frame, std::size_t order) {
    std::vector<double> r(order + 1, 0.0);
    for (std::size_t k = 0; k <= order && k < frame.size(); ++k)
        for (std::size_t n = k; n < frame.size(); ++n) r[k] += frame[n] * frame[n - k];
    return r;
}

LpcFit levinson_durbin(const std::vector<double>& r, std::size_t order) {
    LpcFit out{std::vector<double>(order + 1, 0.0), r.at(0), false};
    out.a[0] = 1.0;
    if (!(r[0] > 0.0)) return out;
    std::vector<double> prev(order + 1);
    for (std::size_t i = 1; i <= order; ++i) {
        double acc = r[i];
        for (std::size_t j = 1; j < i; ++j) acc += out.a[j] * r[i - j];
        const double k = -acc / out.error;
        if (!(std::abs(k) < 1.0)) return out;
        prev = out.a;
        for (std::size_t j = 1; j < i; ++j) out.a[j] = prev[j] + k * prev[i - j];
        out.a[i] = k;
        out.error *= 1.0 - k * k;
        if (!(out.error > 0.0)) return out;
    }
    out.ok = true;
    return out;
}

std::vector<double> lpc_cepstrum(const std::vector<double>& a) {
    const std::size_t p = a.size() - 1;
    std::vector<double> c(p + 1, 0.0);
    for (std::size_t n = 1; n <= p; ++n) {
        double acc = -a[n];
        for (std::size_t k = 1; k < n; ++k) acc -= double(k) / double(n) * c[k] * a[n - k];
        c[n] = acc;
    }
    return c;
}

std::vector<std::vector<double>> mel_filterbank(std::size_t bands, std::size_t fft_size, std::size_t sample_rate) {
    auto mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
    auto hz = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
    const std::size_t bins = fft_size / 2 + 1;
    const double top = mel(double(sample_rate) / 2.0);
    std::vector<double> edges(bands + 2);
    for (std::size_t i = 0; i < edges.size(); ++i) edges[i] = hz(top * double(i) / double(bands + 1));
    std::vector<std::vector<double>> fb(bands, std::vector<double>(bins, 0.0));
    for (std::size_t b = 0; b < bands; ++b) {
        const double lo = edges[b], mid = edges[b + 1], hi = edges[b + 2];
        for (std::size_t k = 0; k < bins; ++k) {
            const double f = double(k) * double(sample_rate) / double(fft_size);
            if (f > lo && f < mid) fb[b][k] = (f - lo) / (mid - lo);
            else if (f >= mid && f < hi) fb[b][k] = (hi - f) / (hi - mid);
        }
    }
    return fb;
}

MetricValue cepstral_distance(const WaveForm& ref, const WaveForm& test, const MetricConfig& cfg) {
    const Prepared p = prepare(ref, test, cfg);
    const double scale = 10.0 / std::log(10.0);
    std::vector<double> values;
    MetricValue out;
    for (std::size_t i : p.active) {
        const LpcFit fr = fit(frame_at(p.ref, p.framing, i), cfg);
        const LpcFit ft = fit(frame_at(p.test, p.framing, i), cfg);
        if (!fr.ok || !ft.ok) {
            ++out.skipped;
            continue;
        }
        const auto cr = lpc_cepstrum(fr.a), ct = lpc_cepstrum(ft.a);
        double s = 0.0;
        for (std::size_t k = 1; k < cr.size(); ++k) s += (cr[k] - ct[k]) * (cr[k] - ct[k]);
        values.push_back(scale * std::sqrt(2.0 * s));
    }
    out.frames = values.size();
    out.value = mean(values);
    return out;
}

MetricValue llr(const WaveForm& ref, const WaveForm& test, const MetricConfig& cfg) {
    const Prepared p = prepare(ref, test, cfg);
    std::vector<double> values;
    MetricValue out;
    auto quad = [](const std::vector<double>& a, const std::vector<double>& r) {
        // a R a^T with R the symmetric Toeplitz matrix of r
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
            for (std::size_t j = 0; j < a.size(); ++j) s += a[i] * r[i > j ? i - j : j - i] * a[j];
        return s;
    };
    for (std::size_t i : p.active) {
        std::vector<double> r_ref;
        const LpcFit fr = fit(frame_at(p.ref, p.framing, i), cfg, &r_ref);
        const LpcFit ft = fit(frame_at(p.test, p.framing, i), cfg);
        if (!fr.ok || !ft.ok) {
            ++out.skipped;
            continue;
        }
        const double num = quad(ft.a, r_ref), den = quad(fr.a, r_ref);
        if (!(num > 0.0 && den > 0.0)) {
            ++out.skipped;
            continue;
        }
        values.push_back(std::log(num / den));
    }
    std::sort(values.begin(), values.end());
    const std::size_t keep = std::size_t(std::ceil(cfg.llr_keep_fraction * double(values.size())));
    values.resize(std::min(keep, values.size()));
    out.frames = values.size();
    out.value = mean(values);
    return out;
}

namespace {
std::mutex g_metric_plan_mutex;

std::vector<double> magnitude_spectrum(const std::vector<double>& frame, std::size_t nfft) {
    std::vector<double> in(nfft, 0.0);
    std::copy(frame.begin(), frame.end(), in.begin());
    std::vector<std::complex<double>> out(nfft / 2 + 1);
    fftw_plan plan;
    {
        std::lock_guard lock(g_metric_plan_mutex);
        plan = fftw_plan_dft_r2c_1d(int(nfft), in.data(), reinterpret_cast<fftw_complex*>(out.data()), FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard lock(g_metric_plan_mutex);
        fftw_destroy_plan(plan);
    }
    std::vector<double> mag(out.size());
    for (std::size_t k = 0; k < out.size(); ++k) mag[k] = std::abs(out[k]);
    return mag;
}
}  // namespace

MetricValue fwsegsnr(const WaveForm& ref, const WaveForm& test, const MetricConfig& cfg) {
    const Prepared p = prepare(ref, test, cfg);
    std::size_t nfft = 1;
    while (nfft < p.framing.frame) nfft *= 2;
    const auto fb = mel_filterbank(cfg.mel_bands, nfft, ref.sample_rate);
    std::vector<double> values;
    for (std::size_t i : p.active) {
        const auto xr = magnitude_spectrum(frame_at(p.ref, p.framing, i), nfft);
        const auto xt = magnitude_spectrum(frame_at(p.test, p.framing, i), nfft);
        double num = 0.0, den = 0.0;
        for (const auto& filt : fb) {
            double br = 0.0, bt = 0.0;
            for (std::size_t k = 0; k < filt.size(); ++k) {
                br += filt[k] * xr[k];
                bt += filt[k] * xt[k];
            }
            const double w = std::pow(br, cfg.weight_exponent);
            if (w == 0.0) continue;
            const double err = std::max((br - bt) * (br - bt), cfg.error_floor);
            num += w * 10.0 * std::log10(br * br / err);
            den += w;
        }
        const double v = den > 0.0 ? num / den : cfg.snr_min_db;
        values.push_back(std::clamp(v, cfg.snr_min_db, cfg.snr_max_db));
    }
    return {mean(values), values.size(), 0};
}

UtteranceMetrics evaluate_pair(const std::string& id, const WaveForm& ref, const WaveForm& test,
                               const MetricConfig& cfg) {
    return {id, cepstral_distance(ref, test, cfg), llr(ref, test, cfg), fwsegsnr(ref, test, cfg)};
}

void MetricReport::add(UtteranceMetrics u) {
    utterances.push_back(std::move(u));
    double cd = 0, l = 0, fw = 0;
    for (const auto& x : utterances) {
        cd += x.cd.value;
        l += x.llr.value;
        fw += x.fwsegsnr.value;
    }
    const double n = double(utterances.size());
    mean_cd = cd / n;
    mean_llr = l / n;
    mean_fwsegsnr = fw / n;
}

namespace {
std::string num(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 6);
    return std::string(buf, res.ptr);
}
}  // namespace

std::string MetricReport::to_csv() const {
    std::string out = "utt_id,cd,llr,fwsegsnr\n";
    for (const auto& u : utterances) {
        out += u.id + "," + num(u.cd.value) + "," + num(u.llr.value) + "," + num(u.fwsegsnr.value) + "\n";
    }
    out += "mean," + num(mean_cd) + "," + num(mean_llr) + "," + num(mean_fwsegsnr) + "\n";
    return out;
}

}  // namespace ctfa
