#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ctfa/signal.hpp"

namespace ctfa {

struct MetricConfig {
    double frame_ms = 32.0;
    double hop_ms = 8.0;
    std::size_t lpc_order = 12;
    double lpc_regularisation = 1e-10;  // relative to R[0]
    std::size_t mel_bands = 23;
    double weight_exponent = 0.2;
    double snr_min_db = -10.0;
    double snr_max_db = 35.0;
    double error_floor = 1e-20;
    // Frames whose reference energy is this far below the loudest frame are
    // excluded from every metric.
    double gate_db = 40.0;
    double llr_keep_fraction = 0.95;
};

// Frames actually scored and frames dropped because an LPC fit failed.
struct MetricValue {
    double value = 0.0;
    std::size_t frames = 0;
    std::size_t skipped = 0;
};

// Both signals are trimmed to the shorter length. Rate mismatch is a
// ContractError; a reference without any frame above the gate is a DataError.
MetricValue cepstral_distance(const WaveForm& ref, const WaveForm& test, const MetricConfig& cfg = {});
MetricValue llr(const WaveForm& ref, const WaveForm& test, const MetricConfig& cfg = {});
MetricValue fwsegsnr(const WaveForm& ref, const WaveForm& test, const MetricConfig& cfg = {});

// Building blocks, exposed for reuse and testing.
struct LpcFit {
    std::vector<double> a;  // a[0] = 1, prediction error filter coefficients
    double error = 0.0;
    bool ok = false;        // false if the autocorrelation is not positive definite
};
std::vector<double> autocorrelation(const std::vector<double>& frame, std::size_t order);
LpcFit levinson_durbin(const std::vector<double>& r, std::size_t order);
// Cepstral coefficients c[1..order] of the all-pole model 1 / A(z); c[0] = 0.
std::vector<double> lpc_cepstrum(const std::vector<double>& a);
// Triangular filters [bands, fft_size / 2 + 1] equally spaced on the mel scale.
std::vector<std::vector<double>> mel_filterbank(std::size_t bands, std::size_t fft_size, std::size_t sample_rate);

struct UtteranceMetrics {
    std::string id;
    MetricValue cd, llr, fwsegsnr;
};

struct MetricReport {
    std::vector<UtteranceMetrics> utterances;
    double mean_cd = 0.0;
    double mean_llr = 0.0;
    double mean_fwsegsnr = 0.0;

    void add(UtteranceMetrics u);
    // utt_id,cd,llr,fwsegsnr rows followed by a "mean" row.
    std::string to_csv() const;
};

UtteranceMetrics evaluate_pair(const std::string& id, const WaveForm& ref, const WaveForm& test,
                               const MetricConfig& cfg = {});

}  // namespace ctfa
