#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <map>
#include <optional>
#include <ostream>

#include "ctfa/datasynth.hpp"
#include "ctfa/errors.hpp"
#include "ctfa/gradsuite.hpp"
#include "ctfa/metrics.hpp"
#include "ctfa/model.hpp"

namespace ctfa::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct ConfigOptions {
    std::string config_path;
    std::vector<std::string> overrides;
};

void add_config_options(CLI::App* app, ConfigOptions& o) {
    app->add_option("--config", o.config_path, "model config file (key = value lines)");
    app->add_option("--set", o.overrides, "override one config key, key=value; repeatable")->take_all();
}

// config file, then --seed, then --set overrides
ModelConfig resolve_config(const ConfigOptions& o, std::optional<std::uint64_t> seed) {
    ModelConfig cfg = o.config_path.empty() ? ModelConfig{} : ModelConfig::load(o.config_path);
    if (seed) cfg.seed = *seed;
    for (const auto& kv : o.overrides) cfg.apply_override(kv);
    cfg.validate();
    return cfg;
}

json config_json(const ModelConfig& cfg) {
    json j = json::object();
    for (const auto& [k, v] : cfg.to_map()) j[k] = v;
    return j;
}

void write_run_record(const fs::path& path, const std::string& command, const std::vector<std::string>& args,
                      json settings) {
    json j;
    j["command"] = command;
    j["argv"] = args;
    j["settings"] = std::move(settings);
    j["version"] = kVersion;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path);
    if (!f) throw DataError("cannot write " + path.string());
    f << j.dump(2) << '\n';
}

// For file outputs the record sits next to the file as <file>.run.json.
fs::path record_for_file(const fs::path& output) {
    return output.string() + ".run.json";
}

// Utterance id: the stem after its last underscore, or the whole stem.
std::string utterance_id(const fs::path& p) {
    const std::string stem = p.stem().string();
    const auto us = stem.rfind('_');
    return us == std::string::npos ? stem : stem.substr(us + 1);
}

// Groups WAVs by utterance id. When several files share an id (a synth output
// directory holds clean_N and reverb_N), the clean_ file is the reference.
std::map<std::string, fs::path> wavs_by_id(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
    std::map<std::string, std::vector<fs::path>> groups;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".wav") groups[utterance_id(e.path())].push_back(e.path());
    }
    std::map<std::string, fs::path> out;
    for (auto& [id, paths] : groups) {
        if (paths.size() > 1) {
            std::erase_if(paths, [](const fs::path& p) { return p.filename().string().rfind("clean_", 0) != 0; });
        }
        if (paths.size() != 1) throw DataError("utterance id '" + id + "' is ambiguous in " + dir.string());
        out.emplace(id, paths.front());
    }
    return out;
}

std::string fixed(double v, int digits) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Complex time-frequency attention speech dereverberation toolkit", "ctfa"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    // synth
    auto* synth = app.add_subcommand("synth", "generate synthetic clean/reverberant pairs and a manifest");
    std::size_t n_pairs = 0;
    std::uint64_t synth_seed = 1;
    std::string synth_out;
    SynthConfig sc;
    std::string snr_text = "30";
    ConfigOptions synth_cfg;
    synth->add_option("--n", n_pairs, "number of pairs")->required()->check(CLI::PositiveNumber);
    synth->add_option("--seed", synth_seed, "master seed")->capture_default_str();
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--duration", sc.duration_s, "seconds per utterance")->capture_default_str();
    synth->add_option("--t60-min", sc.t60_min, "lower T60 bound, seconds")->capture_default_str();
    synth->add_option("--t60-max", sc.t60_max, "upper T60 bound, seconds")->capture_default_str();
    synth->add_option("--snr", snr_text, "noise SNR in dB relative to the reverberant signal, or 'none'")
        ->capture_default_str();
    synth->add_option("--drr", sc.drr_db, "direct-to-reverberant ratio, dB")->capture_default_str();
    add_config_options(synth, synth_cfg);

    // train
    auto* train_cmd = app.add_subcommand("train", "train a model on a manifest");
    ConfigOptions train_cfg;
    std::string manifest, train_out;
    std::optional<std::uint64_t> train_seed;
    std::size_t log_every = 50;
    add_config_options(train_cmd, train_cfg);
    train_cmd->add_option("--data", manifest, "manifest.csv from synth")->required();
    train_cmd->add_option("--out", train_out, "output directory")->required();
    train_cmd->add_option("--seed", train_seed, "shorthand for --set seed=S");
    train_cmd->add_option("--log-every", log_every, "print every N steps (0: never)")->capture_default_str();

    // enhance
    auto* enhance = app.add_subcommand("enhance", "dereverberate one WAV file");
    std::string ckpt, in_wav, out_wav;
    enhance->add_option("--ckpt", ckpt, "model checkpoint")->required();
    enhance->add_option("--in", in_wav, "input WAV")->required();
    enhance->add_option("--out", out_wav, "output WAV")->required();

    // eval
    auto* eval = app.add_subcommand("eval", "score test WAVs against references (CD, LLR, FWSegSNR)");
    std::string ref_dir, test_dir, csv_out;
    eval->add_option("--ref-dir", ref_dir, "reference WAV directory")->required();
    eval->add_option("--test-dir", test_dir, "test WAV directory")->required();
    eval->add_option("--out", csv_out, "output CSV")->required();

    // gradcheck
    auto* grad = app.add_subcommand("gradcheck", "finite-difference check of every layer and attention variant");
    std::uint64_t grad_seed = 1;
    std::size_t instances = 5;
    std::string grad_out = ".";
    grad->add_option("--seed", grad_seed, "seed")->capture_default_str();
    grad->add_option("--instances", instances, "random instances per layer")->capture_default_str();
    grad->add_option("--out", grad_out, "directory for run.json")->capture_default_str();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (synth->parsed()) {
            if (snr_text == "none") sc.snr_db.reset();
            else {
                try {
                    sc.snr_db = std::stod(snr_text);
                } catch (const std::exception&) {
                    throw ConfigError("--snr expects a number or 'none', got '" + snr_text + "'");
                }
            }
            if (!(sc.t60_min > 0.0 && sc.t60_max >= sc.t60_min)) throw ConfigError("need 0 < t60-min <= t60-max");
            const ModelConfig cfg = resolve_config(synth_cfg, std::nullopt);
            sc.sample_rate = cfg.sample_rate;
            const auto rows = generate_dataset(synth_out, n_pairs, synth_seed, sc);
            json s{{"n", n_pairs},           {"seed", synth_seed},   {"out", synth_out},
                   {"sample_rate", sc.sample_rate}, {"duration_s", sc.duration_s}, {"t60_min", sc.t60_min},
                   {"t60_max", sc.t60_max},  {"drr_db", sc.drr_db}, {"peak", sc.peak}};
            s["snr_db"] = sc.snr_db ? json(*sc.snr_db) : json(nullptr);
            write_run_record(fs::path(synth_out) / "run.json", "synth", args, s);
            out << "wrote " << rows.size() << " pairs to " << synth_out << "\n";
            return kOk;
        }

        if (train_cmd->parsed()) {
            const ModelConfig cfg = resolve_config(train_cfg, train_seed);
            fs::create_directories(train_out);
            write_run_record(fs::path(train_out) / "run.json", "train", args,
                             {{"data", manifest}, {"out", train_out}, {"config", config_json(cfg)}});
            std::ofstream(fs::path(train_out) / "config.cfg") << cfg.serialize();
            const auto data = load_training_examples(manifest, cfg, [&](const std::string& w) {
                err << "warning: " << w << "\n";
            });
            if (data.empty()) throw DataError("every pair in " + manifest + " was skipped");
            DccrnModel model(cfg);
            out << "training " << model.trainable_count() << " parameters on " << data.size() << " images, attention "
                << to_string(cfg.attention) << "\n";
            TrainOptions opt;
            opt.out_dir = train_out;
            opt.warn = [&](const std::string& w) { err << "warning: " << w << "\n"; };
            opt.on_step = [&](const TrainRecord& r) {
                if (log_every > 0 && r.step % log_every == 0) {
                    out << "step " << r.step << " epoch " << r.epoch << " loss " << r.loss << "\n";
                }
            };
            const TrainResult result = train(model, data, opt);
            out << "finished " << result.log.size() << " steps, final loss " << result.log.back().loss
                << ", checkpoint " << result.final_checkpoint.string() << "\n";
            return kOk;
        }

        if (enhance->parsed()) {
            DccrnModel model = DccrnModel::load(ckpt);
            const WaveForm x = read_wav(in_wav);
            const WaveForm y = enhance_waveform(model, x);
            if (fs::path(out_wav).has_parent_path()) fs::create_directories(fs::path(out_wav).parent_path());
            write_wav(out_wav, y);
            write_run_record(record_for_file(out_wav), "enhance", args,
                             {{"ckpt", ckpt}, {"in", in_wav}, {"out", out_wav}, {"config", config_json(model.config())}});
            out << "wrote " << out_wav << " (" << y.samples.size() << " samples)\n";
            return kOk;
        }

        if (eval->parsed()) {
            const auto refs = wavs_by_id(ref_dir);
            const auto tests = wavs_by_id(test_dir);
            if (tests.empty()) throw DataError("no WAV files in " + test_dir);
            MetricReport report;
            for (const auto& [id, path] : tests) {
                const auto r = refs.find(id);
                if (r == refs.end()) throw DataError("no reference for utterance '" + id + "' in " + ref_dir);
                const WaveForm ref = read_wav(r->second);
                const WaveForm test = read_wav(path);
                report.add(evaluate_pair(id, ref, test));
            }
            if (fs::path(csv_out).has_parent_path()) fs::create_directories(fs::path(csv_out).parent_path());
            std::ofstream f(csv_out);
            if (!f) throw DataError("cannot write " + csv_out);
            f << report.to_csv();
            write_run_record(record_for_file(csv_out), "eval", args,
                             {{"ref_dir", ref_dir}, {"test_dir", test_dir}, {"out", csv_out}});
            out << "scored " << report.utterances.size() << " utterances: cd " << fixed(report.mean_cd, 4) << " llr "
                << fixed(report.mean_llr, 4) << " fwsegsnr " << fixed(report.mean_fwsegsnr, 4) << "\n";
            return kOk;
        }

        if (grad->parsed()) {
            const GradCheckOptions opt;
            const auto results = layer_gradient_suite(grad_seed, instances, opt);
            std::size_t failed = 0;
            out << std::left << std::setw(32) << "check" << std::setw(14) << "max_rel_err" << std::setw(10)
                << "entries"
                << "result\n";
            for (const auto& r : results) {
                char err_buf[32];
                std::snprintf(err_buf, sizeof err_buf, "%.3e", r.max_rel_error);
                out << std::left << std::setw(32) << r.name << std::setw(14) << err_buf << std::setw(10) << r.checked
                    << (r.passed ? "PASS" : "FAIL") << "\n";
                failed += r.passed ? 0 : 1;
            }
            out << (results.size() - failed) << "/" << results.size() << " checks passed (tolerance "
                << opt.tolerance << ")\n";
            write_run_record(fs::path(grad_out) / "run.json", "gradcheck", args,
                             {{"seed", grad_seed},
                              {"instances", instances},
                              {"epsilon", opt.epsilon},
                              {"tolerance", opt.tolerance},
                              {"failed", failed}});
            return failed == 0 ? kOk : kNumerical;
        }
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << "\n";
        return kNumerical;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kDataOrConfig;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << "\n";
        return kDataOrConfig;
    } catch (const ContractError& e) {
        err << "error: " << e.what() << "\n";
        return kDataOrConfig;
    } catch (const ShapeError& e) {
        err << "error: " << e.what() << "\n";
        return kDataOrConfig;
    } catch (const fs::filesystem_error& e) {
        err << "file error: " << e.what() << "\n";
        return kDataOrConfig;
    }
    return kUsage;
}

}  // namespace ctfa::cli
