#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "ctfa/datasynth.hpp"
#include "ctfa/errors.hpp"
#include "ctfa/model.hpp"
#include "ctfa/ops.hpp"

namespace ctfa {

namespace {

constexpr double kMagnitudeFloor = 1e-6;

double loss_at(double er, double ei, double sr, double si, double c, double beta) {
    const double m = std::hypot(er, ei);
    const double s = std::hypot(sr, si);
    const double sc = std::pow(s, c), ec = std::pow(m, c);
    const double mag = (sc - ec) * (sc - ec);
    // compressed target and estimate, zero stays zero
    const double ar = s > 0 ? sr * sc / s : 0.0, ai = s > 0 ? si * sc / s : 0.0;
    const double br = m > 0 ? er * ec / m : 0.0, bi = m > 0 ? ei * ec / m : 0.0;
    const double cplx = (ar - br) * (ar - br) + (ai - bi) * (ai - bi);
    return (1.0 - beta) * mag + beta * cplx;
}

// Stacks selected images along a new leading axis.
ComplexTensor stack(const std::vector<const ComplexTensor*>& parts) {
    const Shape& s = parts.front()->shape();
    Shape out{parts.size()};
    out.insert(out.end(), s.begin(), s.end());
    ComplexTensor t(out);
    const std::size_t n = parts.front()->size();
    for (std::size_t i = 0; i < parts.size(); ++i) {
        std::copy(parts[i]->re().begin(), parts[i]->re().end(), t.re().begin() + long(i * n));
        std::copy(parts[i]->im().begin(), parts[i]->im().end(), t.im().begin() + long(i * n));
    }
    return t;
}

ComplexTensor network_input(const Spectrogram& spec, const ModelConfig& cfg) {
    return cfg.psd_smoothing ? psd_smooth(spec.data, cfg.psd_alpha) : spec.data;
}

}  // namespace

double complex_loss_value(const ComplexTensor& estimate, const ComplexTensor& target, double c, double beta) {
    if (estimate.shape() != target.shape()) {
        throw ShapeError("complex_loss: estimate " + to_string(estimate.shape()) + " vs target " +
                         to_string(target.shape()));
    }
    double total = 0.0;
    for (std::size_t i = 0; i < estimate.size(); ++i) {
        total += loss_at(estimate.re()[i], estimate.im()[i], target.re()[i], target.im()[i], c, beta);
    }
    return total;
}

Var complex_loss(const Var& estimate, const ComplexTensor& target, double c, double beta) {
    const double value = complex_loss_value(estimate.value(), target, c, beta);
    ComplexTensor out({1});
    out.re()[0] = value;
    return make_result(
        std::move(out), {estimate},
        [target, c, beta](Node& self) {
            Node& e = *self.parents[0];
            if (!e.requires_grad) return;
            const double g = self.grad.re()[0];
            ComplexTensor& de = e.grad_buffer();
            for (std::size_t i = 0; i < e.value.size(); ++i) {
                const double er = e.value.re()[i], ei = e.value.im()[i];
                const double sr = target.re()[i], si = target.im()[i];
                const double m = std::max(std::hypot(er, ei), kMagnitudeFloor);
                const double s = std::hypot(sr, si);
                const double sc = std::pow(s, c);
                const double ar = s > 0 ? sr * sc / s : 0.0, ai = s > 0 ? si * sc / s : 0.0;
                const double u = std::pow(m, c);

                const double k_mag = -2.0 * (sc - u) * c * std::pow(m, c - 2.0);
                const double k_b2 = 2.0 * c * std::pow(m, 2.0 * c - 2.0);
                const double mc1 = std::pow(m, c - 1.0);
                const double proj = (c - 1.0) * std::pow(m, c - 3.0) * (ar * er + ai * ei);
                const double dre_r = mc1 * ar + proj * er;
                const double dre_i = mc1 * ai + proj * ei;

                de.re()[i] += g * (beta * (-2.0 * dre_r + k_b2 * er) + (1.0 - beta) * k_mag * er);
                de.im()[i] += g * (beta * (-2.0 * dre_i + k_b2 * ei) + (1.0 - beta) * k_mag * ei);
            }
        },
        "complex_loss");
}

Adam::Adam(ParameterList params, AdamOptions options) : params_(std::move(params)), opt_(options) {
    for (const auto& p : params_) {
        m_.emplace_back(p.var.shape());
        v_.emplace_back(p.var.shape());
    }
}

void Adam::zero_grad() {
    for (auto& p : params_) p.var.zero_grad();
}

void Adam::step() {
    ++t_;
    const double c1 = 1.0 - std::pow(opt_.beta1, double(t_));
    const double c2 = 1.0 - std::pow(opt_.beta2, double(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        NamedParameter& p = params_[k];
        const ComplexTensor g = p.var.grad();
        if (!g.all_finite()) throw NumericalError("non-finite gradient in parameter '" + p.name + "'");
        ComplexTensor& w = p.var.mutable_value();
        auto update = [&](std::vector<double>& wv, const std::vector<double>& gv, std::vector<double>& mv,
                          std::vector<double>& vv) {
            for (std::size_t i = 0; i < wv.size(); ++i) {
                mv[i] = opt_.beta1 * mv[i] + (1.0 - opt_.beta1) * gv[i];
                vv[i] = opt_.beta2 * vv[i] + (1.0 - opt_.beta2) * gv[i] * gv[i];
                wv[i] -= opt_.lr * (mv[i] / c1) / (std::sqrt(vv[i] / c2) + opt_.eps);
            }
        };
        update(w.re(), g.re(), m_[k].re(), v_[k].re());
        if (!p.real_valued) update(w.im(), g.im(), m_[k].im(), v_[k].im());
        if (!w.all_finite()) throw NumericalError("non-finite value in parameter '" + p.name + "' after update");
    }
}

std::vector<TrainingExample> examples_from_pair(const WaveForm& clean, const WaveForm& reverb, const ModelConfig& cfg) {
    if (clean.sample_rate != cfg.sample_rate || reverb.sample_rate != cfg.sample_rate) {
        throw ContractError("training pair sample rate does not match config (" + std::to_string(cfg.sample_rate) +
                            " Hz)");
    }
    const StftConfig sc = cfg.stft();
    const Spectrogram s = stft(clean, sc);
    const Spectrogram x = stft(reverb, sc);
    if (s.frames() != x.frames()) throw DataError("clean and reverberant lengths differ");
    Spectrogram xin = x;
    xin.data = network_input(x, cfg);

    const auto ts = make_spectral_images(s, cfg.image_frames);
    const auto tx = make_spectral_images(x, cfg.image_frames);
    const auto ti = make_spectral_images(xin, cfg.image_frames);
    std::vector<TrainingExample> out;
    for (std::size_t i = 0; i < ts.size(); ++i) out.push_back({ti[i].data, tx[i].data, ts[i].data});
    return out;
}

std::vector<TrainingExample> load_training_examples(const std::filesystem::path& manifest, const ModelConfig& cfg,
                                                    const std::function<void(const std::string&)>& warn) {
    std::vector<TrainingExample> out;
    for (const auto& row : read_manifest(manifest)) {
        try {
            const WaveForm clean = read_wav(row.clean_path, cfg.sample_rate);
            const WaveForm reverb = read_wav(row.reverb_path, cfg.sample_rate);
            for (auto& e : examples_from_pair(clean, reverb, cfg)) out.push_back(std::move(e));
        } catch (const DataError& e) {
            if (warn) warn("skipping " + row.reverb_path.string() + ": " + e.what());
        }
    }
    return out;
}

TrainResult train(DccrnModel& model, const std::vector<TrainingExample>& data, const TrainOptions& options) {
    if (data.empty()) throw DataError("no training examples");
    const ModelConfig& cfg = model.config();
    Adam adam(model.parameters(), AdamOptions{cfg.learning_rate});
    TrainResult result;

    std::ofstream log;
    if (!options.out_dir.empty()) {
        std::filesystem::create_directories(options.out_dir);
        log.open(options.out_dir / "train_log.csv");
        if (!log) throw DataError("cannot write " + (options.out_dir / "train_log.csv").string());
        log << "step,epoch,loss\n";
    }

    std::vector<std::size_t> order(data.size());
    std::size_t step = 0;
    bool done = false;
    for (std::size_t epoch = 0; epoch < cfg.epochs && !done; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        if (cfg.shuffle) {
            std::mt19937_64 rng(cfg.seed + epoch);
            std::shuffle(order.begin(), order.end(), rng);
        }
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            // batch membership is shuffled, layout inside a batch is canonical
            std::sort(order.begin() + long(start), order.begin() + long(end));
            std::vector<const ComplexTensor*> in, mix, tgt;
            for (std::size_t i = start; i < end; ++i) {
                in.push_back(&data[order[i]].input);
                mix.push_back(&data[order[i]].mixture);
                tgt.push_back(&data[order[i]].target);
            }

            adam.zero_grad();
            Tape tape;
            double loss_value = 0.0;
            {
                TapeScope scope(tape);
                const Var mask = model.forward(constant(stack(in)), true);
                const Var estimate = mul(mask, constant(stack(mix)));
                // mean over images in the batch
                const Var loss = scale(complex_loss(estimate, stack(tgt), cfg.c, cfg.beta), 1.0 / double(end - start));
                loss_value = loss.value().re()[0];
                if (!std::isfinite(loss_value)) {
                    throw NumericalError("non-finite loss at step " + std::to_string(step + 1));
                }
                tape.backward(loss);
            }
            adam.step();
            ++step;

            const TrainRecord rec{step, epoch, loss_value};
            result.log.push_back(rec);
            if (log) {
                char buf[64];
                std::snprintf(buf, sizeof buf, "%.17g", loss_value);
                log << step << ',' << epoch << ',' << buf << '\n';
            }
            if (options.on_step) options.on_step(rec);
            if (!options.out_dir.empty() && cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0) {
                model.save(options.out_dir / ("ckpt_step_" + std::to_string(step) + ".bin"));
            }
            if ((cfg.max_steps > 0 && step >= cfg.max_steps) || (options.stop && options.stop(rec))) {
                done = true;
                break;
            }
        }
    }
    if (!options.out_dir.empty()) {
        result.final_checkpoint = options.out_dir / "model.ckpt";
        model.save(result.final_checkpoint);
    }
    return result;
}

WaveForm enhance_with_mask(const WaveForm& x, const ModelConfig& cfg, const MaskFunction& mask_fn) {
    if (x.sample_rate != cfg.sample_rate) {
        throw ContractError("sample rate mismatch: model expects " + std::to_string(cfg.sample_rate) +
                            " Hz, input is " + std::to_string(x.sample_rate) + " Hz");
    }
    if (x.samples.empty()) return x;
    const Spectrogram spec = stft(x, cfg.stft());
    Spectrogram smoothed = spec;
    smoothed.data = network_input(spec, cfg);

    auto raw = make_spectral_images(spec, cfg.image_frames);
    const auto in = make_spectral_images(smoothed, cfg.image_frames);
    std::vector<const ComplexTensor*> ptrs;
    for (const auto& im : in) ptrs.push_back(&im.data);
    const ComplexTensor masks = mask_fn(stack(ptrs));
    const std::size_t per = raw.front().data.size();
    if (masks.size() != per * raw.size()) {
        throw ShapeError("mask function returned " + to_string(masks.shape()));
    }
    for (std::size_t i = 0; i < raw.size(); ++i) {
        ComplexTensor m(raw[i].data.shape());
        std::copy_n(masks.re().begin() + long(i * per), per, m.re().begin());
        std::copy_n(masks.im().begin() + long(i * per), per, m.im().begin());
        raw[i].data = apply_mask(m, raw[i].data);
    }
    WaveForm out = istft(reassemble_images(raw, spec));
    out.sample_rate = x.sample_rate;
    return out;
}

WaveForm enhance_waveform(DccrnModel& model, const WaveForm& x) {
    return enhance_with_mask(x, model.config(), [&](const ComplexTensor& images) {
        NoGradScope no_grad;
        return model.forward(constant(images), false).value();
    });
}

}  // namespace ctfa
