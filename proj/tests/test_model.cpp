#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include "ctfa/datasynth.hpp"
#include "ctfa/errors.hpp"
#include "ctfa/gradcheck.hpp"
#include "ctfa/model.hpp"
#include "ctfa/ops.hpp"

namespace ctfa {
namespace {

using cd = std::complex<double>;

ModelConfig tiny_config(AttentionVariant v = AttentionVariant::Complex) {
    ModelConfig cfg;
    cfg.sample_rate = 8000;
    cfg.frame_len = 16;
    cfg.hop = 4;
    cfg.fft_size = 16;
    cfg.image_frames = 8;
    cfg.channels = {4, 4};
    cfg.gru_layers = 1;
    cfg.gru_hidden = 4;
    cfg.attention = v;
    return cfg;
}

ModelConfig small_train_config() {
    ModelConfig cfg;
    cfg.sample_rate = 8000;
    cfg.frame_len = 64;
    cfg.hop = 16;
    cfg.fft_size = 64;
    cfg.image_frames = 32;
    cfg.channels = {4, 8};
    cfg.gru_hidden = 16;
    return cfg;
}

std::vector<TrainingExample> small_dataset(const ModelConfig& cfg, std::size_t pairs, double seconds) {
    SynthConfig sc;
    sc.sample_rate = cfg.sample_rate;
    sc.duration_s = seconds;
    std::vector<TrainingExample> out;
    for (std::size_t i = 0; i < pairs; ++i) {
        const PairAudio p = synthesize_pair(pair_seed(11, i), 0.4, sc);
        for (auto& e : examples_from_pair(p.clean, p.reverb, cfg)) out.push_back(std::move(e));
    }
    return out;
}

std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("ctfa_test_model_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

double rms_diff(const std::vector<double>& a, const std::vector<double>& b, std::size_t from, std::size_t to) {
    double s = 0.0;
    for (std::size_t i = from; i < to; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s / double(to - from));
}

// config

TEST(ModelConfig, DefaultsAreValid) {
    ModelConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    EXPECT_EQ(cfg.num_enc_layers(), 4u);
    EXPECT_EQ(cfg.gru_layers, 2u);
    EXPECT_DOUBLE_EQ(cfg.c, 0.3);
    EXPECT_DOUBLE_EQ(cfg.beta, 0.3);
    EXPECT_EQ(cfg.batch_size, 4u);
    EXPECT_EQ(cfg.epochs, 20u);
    EXPECT_EQ(cfg.image_frames, 64u);
    EXPECT_EQ(cfg.image_bins(), 64u);
}

TEST(ModelConfig, SerializeParseRoundTrip) {
    ModelConfig cfg = tiny_config(AttentionVariant::Sdab);
    cfg.c = 0.25;
    cfg.learning_rate = 3.3e-4;
    cfg.seed = 12345678901234ULL;
    cfg.psd_smoothing = true;
    const ModelConfig back = ModelConfig::parse(cfg.serialize());
    EXPECT_EQ(back.serialize(), cfg.serialize());
    EXPECT_EQ(back.channels, cfg.channels);
    EXPECT_EQ(back.attention, AttentionVariant::Sdab);
    EXPECT_EQ(back.learning_rate, 3.3e-4);
    EXPECT_EQ(back.seed, 12345678901234ULL);
}

TEST(ModelConfig, ParseCommentsAndWhitespace) {
    const auto cfg = ModelConfig::parse("# header\n\n  attention = conventional  # trailing\nchannels=2, 6\n");
    EXPECT_EQ(cfg.attention, AttentionVariant::Conventional);
    EXPECT_EQ(cfg.channels, (std::vector<std::size_t>{2, 6}));
}

TEST(ModelConfig, UnknownKeyRejectedWithLine) {
    try {
        ModelConfig::parse("c = 0.3\nlearnin_rate = 1\n");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("learnin_rate"), std::string::npos);
    }
    ModelConfig cfg;
    EXPECT_THROW(cfg.apply_override("nope=1"), ConfigError);
    EXPECT_THROW(cfg.apply_override("c"), ConfigError);
    EXPECT_THROW(cfg.apply_override("epochs=-1"), ConfigError);
    EXPECT_THROW(cfg.apply_override("shuffle=maybe"), ConfigError);
    cfg.apply_override(" beta = 0.5 ");
    EXPECT_DOUBLE_EQ(cfg.beta, 0.5);
}

TEST(ModelConfig, ValidationRejectsBadValues) {
    auto bad = [](auto mutate) {
        ModelConfig cfg;
        mutate(cfg);
        EXPECT_THROW(cfg.validate(), ConfigError);
    };
    bad([](ModelConfig& c) { c.beta = 1.5; });
    bad([](ModelConfig& c) { c.beta = -0.1; });
    bad([](ModelConfig& c) { c.c = 0.0; });
    bad([](ModelConfig& c) { c.channels = {4, 7}; });
    bad([](ModelConfig& c) { c.channels.clear(); });
    bad([](ModelConfig& c) { c.batch_size = 0; });
    bad([](ModelConfig& c) { c.hop = 0; });
    bad([](ModelConfig& c) { c.frame_len = 200; });  // longer than fft_size
    bad([](ModelConfig& c) {                          // 50 bins do not survive two halvings
        c.fft_size = 100;
        c.frame_len = 100;
    });
}

TEST(ModelConfig, KeysCoverSerializedForm) {
    const auto keys = ModelConfig::keys();
    const std::string text = ModelConfig{}.serialize();
    for (const auto& k : keys) EXPECT_NE(text.find(k + " = "), std::string::npos) << k;
}

// forward

TEST(DccrnModel, OutputShapeMatchesInput) {
    for (auto v : {AttentionVariant::None, AttentionVariant::Sdab, AttentionVariant::Conventional,
                   AttentionVariant::Complex}) {
        DccrnModel m(tiny_config(v));
        const Var x = constant(ComplexTensor::random_normal({3, 8, 8}, 2));
        const Var y = m.forward(x, true);
        EXPECT_EQ(y.shape(), x.shape()) << to_string(v);
        EXPECT_TRUE(y.value().all_finite());
    }
    ModelConfig cfg;
    DccrnModel big(cfg);
    const Var x = constant(ComplexTensor::random_normal({1, 64, 64}, 3));
    EXPECT_EQ(big.forward(x, false).shape(), x.shape());
}

TEST(DccrnModel, WrongImageShapeThrows) {
    DccrnModel m(tiny_config());
    EXPECT_THROW(m.forward(constant(ComplexTensor({2, 8, 9})), false), ShapeError);
    EXPECT_THROW(m.forward(constant(ComplexTensor({8, 8})), false), ShapeError);
}

TEST(DccrnModel, DeterministicForFixedSeed) {
    const ComplexTensor x = ComplexTensor::random_normal({2, 8, 8}, 5);
    DccrnModel a(tiny_config()), b(tiny_config());
    EXPECT_EQ(a.forward(constant(x), true).value(), b.forward(constant(x), true).value());
    EXPECT_EQ(a.forward(constant(x), false).value(), a.forward(constant(x), false).value());
    ModelConfig other = tiny_config();
    other.seed = 2;
    DccrnModel c(other);
    EXPECT_NE(a.forward(constant(x), false).value(), c.forward(constant(x), false).value());
}

TEST(DccrnModel, EqualParameterCountForBothSelfAttentionVariants) {
    DccrnModel conv(ModelConfig{}), cplx([] {
        ModelConfig c;
        c.attention = AttentionVariant::Conventional;
        return c;
    }());
    EXPECT_EQ(conv.trainable_count(), cplx.trainable_count());
    DccrnModel none([] {
        ModelConfig c;
        c.attention = AttentionVariant::None;
        return c;
    }());
    EXPECT_LT(none.trainable_count(), conv.trainable_count());
}

TEST(DccrnModel, ParameterNamesAreUnique) {
    DccrnModel m(ModelConfig{});
    std::set<std::string> names;
    for (const auto& p : m.parameters()) EXPECT_TRUE(names.insert(p.name).second) << p.name;
    for (const auto& b : m.buffers()) EXPECT_TRUE(names.insert(b.name).second) << b.name;
}

TEST(DccrnModel, TracesOneMapPerBranchAndLayer) {
    DccrnModel m(tiny_config(AttentionVariant::Conventional));
    m.set_trace(true);
    m.forward(constant(ComplexTensor::random_normal({2, 8, 8}, 9)), false);
    const auto& maps = m.attention_maps();
    ASSERT_EQ(maps.size(), 2u * 2u * 2u);  // (time, freq) x (enc, dec) x layers
    for (const auto& map : maps) EXPECT_EQ(map.weights.dim(0), 2u);
    m.set_trace(false);
    m.forward(constant(ComplexTensor::random_normal({2, 8, 8}, 9)), false);
    EXPECT_TRUE(m.attention_maps().empty());
}

TEST(DccrnModel, BoundedMaskStaysInUnitBox) {
    ModelConfig cfg = tiny_config();
    cfg.bounded_mask = true;
    DccrnModel m(cfg);
    const auto y = m.forward(constant(ComplexTensor::random_normal({2, 8, 8}, 4, 50.0)), false).value();
    for (std::size_t i = 0; i < y.size(); ++i) {
        EXPECT_LE(std::abs(y.re()[i]), 1.0);
        EXPECT_LE(std::abs(y.im()[i]), 1.0);
    }
}

// End-to-end gradient of the loss through the whole network.
TEST(DccrnModel, EndToEndGradientMatchesFiniteDifferences) {
    for (auto v : {AttentionVariant::Complex, AttentionVariant::Conventional, AttentionVariant::Sdab}) {
        DccrnModel m(tiny_config(v));
        const ComplexTensor x = ComplexTensor::random_normal({2, 8, 8}, 21);
        const ComplexTensor s = ComplexTensor::random_normal({2, 8, 8}, 22);
        std::vector<Var> leaves;
        for (const auto& p : m.parameters()) leaves.push_back(p.var);
        GradCheckOptions opt;
        opt.max_entries_per_leaf = 24;
        const auto r = check_gradients(
            to_string(v), leaves,
            [&] {
                const Var mask = m.forward(constant(x), true);
                return complex_loss(mul(mask, constant(x)), s, 0.3, 0.3);
            },
            opt);
        EXPECT_TRUE(r.passed) << to_string(v) << " max rel error " << r.max_rel_error;
        EXPECT_GT(r.checked, 100u);
    }
}

// loss

TEST(ComplexLoss, IdenticalSpectraGiveZero) {
    const ComplexTensor s = ComplexTensor::random_normal({4, 5}, 1);
    EXPECT_EQ(complex_loss_value(s, s, 0.3, 0.3), 0.0);
    EXPECT_EQ(complex_loss_value(s, s, 1.0, 1.0), 0.0);
}

TEST(ComplexLoss, SingleBinExamples) {
    const auto s = ComplexTensor::from_values({1}, {cd(1, 0)});
    EXPECT_EQ(complex_loss_value(ComplexTensor::from_values({1}, {cd(0, 0)}), s, 0.3, 0.3), 1.0);
    EXPECT_DOUBLE_EQ(complex_loss_value(ComplexTensor::from_values({1}, {cd(0, 1)}), s, 1.0, 0.3), 0.6);
}

TEST(ComplexLoss, BetaEndpointsReduceToSingleTerms) {
    const ComplexTensor e = ComplexTensor::random_normal({6, 7}, 3);
    const ComplexTensor s = ComplexTensor::random_normal({6, 7}, 4);
    const double c = 0.3;
    double mag = 0.0, cplx = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
        const cd ev = e.at(i), sv = s.at(i);
        const double me = std::pow(std::abs(ev), c), ms = std::pow(std::abs(sv), c);
        mag += (ms - me) * (ms - me);
        cplx += std::norm(std::polar(ms, std::arg(sv)) - std::polar(me, std::arg(ev)));
    }
    EXPECT_NEAR(complex_loss_value(e, s, c, 0.0), mag, 1e-12 * mag);
    EXPECT_NEAR(complex_loss_value(e, s, c, 1.0), cplx, 1e-12 * cplx);
    EXPECT_NEAR(complex_loss_value(e, s, c, 0.4), 0.6 * mag + 0.4 * cplx, 1e-12 * cplx);
}

TEST(ComplexLoss, NonNegativeAndZeroOnlyForEqualCompressedSpectra) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const ComplexTensor e = ComplexTensor::random_normal({3, 3}, seed);
        const ComplexTensor s = ComplexTensor::random_normal({3, 3}, seed + 1000);
        EXPECT_GT(complex_loss_value(e, s, 0.3, double(seed % 11) / 10.0), 0.0);
    }
}

TEST(ComplexLoss, ShapeMismatchThrows) {
    EXPECT_THROW(complex_loss_value(ComplexTensor({2, 2}), ComplexTensor({2, 3}), 0.3, 0.3), ShapeError);
}

TEST(ComplexLoss, GradientMatchesFiniteDifferences) {
    for (double c : {0.3, 0.5, 1.0}) {
        for (double beta : {0.0, 0.3, 1.0}) {
            Var e = parameter(ComplexTensor::random_normal({4, 6}, 7));
            const ComplexTensor s = ComplexTensor::random_normal({4, 6}, 8);
            const auto r = check_gradients("loss", {e}, [&] { return complex_loss(e, s, c, beta); });
            EXPECT_TRUE(r.passed) << "c=" << c << " beta=" << beta << " err " << r.max_rel_error;
        }
    }
}

TEST(ComplexLoss, GradientFiniteAtZeroEstimate) {
    Var e = parameter(ComplexTensor({2, 2}));
    Tape tape;
    {
        TapeScope scope(tape);
        tape.backward(complex_loss(e, ComplexTensor::random_normal({2, 2}, 1), 0.3, 0.3));
    }
    EXPECT_TRUE(e.grad().all_finite());
}

// Adam

TEST(Adam, FirstStepMatchesHandComputedUpdate) {
    Var w = parameter(ComplexTensor::from_values({1}, {cd(0.5, -0.25)}));
    Adam adam({{"w", w, false}}, AdamOptions{});
    w.mutable_grad().re()[0] = 1.0;
    w.mutable_grad().im()[0] = -2.0;
    adam.step();
    // m_hat = g, v_hat = g^2
    const double eps = 1e-8;
    EXPECT_NEAR(w.value().re()[0], 0.5 - 1e-3 * 1.0 / (1.0 + eps), 1e-12);
    EXPECT_NEAR(w.value().im()[0], -0.25 + 1e-3 * 2.0 / (2.0 + eps), 1e-12);
    EXPECT_EQ(adam.steps(), 1u);
}

TEST(Adam, SecondStepMatchesRecurrence) {
    Var w = parameter(ComplexTensor::from_values({1}, {cd(0.0, 0.0)}));
    AdamOptions o;
    o.lr = 0.01;
    Adam adam({{"w", w, false}}, o);
    const double g1 = 0.3, g2 = -0.7;
    w.mutable_grad().re()[0] = g1;
    adam.step();
    adam.zero_grad();
    w.mutable_grad().re()[0] = g2;
    adam.step();
    double m = 0.1 * g1, v = 0.001 * g1 * g1, x = -0.01 * (m / 0.1) / (std::sqrt(v / 0.001) + 1e-8);
    m = 0.9 * m + 0.1 * g2;
    v = 0.999 * v + 0.001 * g2 * g2;
    x -= 0.01 * (m / (1 - 0.81)) / (std::sqrt(v / (1 - 0.999 * 0.999)) + 1e-8);
    EXPECT_NEAR(w.value().re()[0], x, 1e-15);
    EXPECT_EQ(w.value().im()[0], 0.0);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
    const ComplexTensor init = ComplexTensor::random_normal({3, 4}, 2);
    Var w = parameter(init);
    Adam adam({{"w", w, false}}, AdamOptions{});
    for (int i = 0; i < 5; ++i) adam.step();
    EXPECT_EQ(w.value(), init);
}

TEST(Adam, IdenticalParametersStayIdentical) {
    const ComplexTensor init = ComplexTensor::random_normal({5}, 3);
    Var a = parameter(init), b = parameter(init);
    Adam adam({{"a", a, false}, {"b", b, false}}, AdamOptions{});
    for (std::uint64_t s = 0; s < 20; ++s) {
        adam.zero_grad();
        const ComplexTensor g = ComplexTensor::random_normal({5}, 100 + s);
        a.mutable_grad() = g;
        b.mutable_grad() = g;
        adam.step();
        ASSERT_EQ(a.value(), b.value());
    }
}

TEST(Adam, RealValuedParameterKeepsImaginaryPlane) {
    Var w = parameter(ComplexTensor::from_values({1}, {cd(1.0, 0.0)}));
    Adam adam({{"gamma", w, true}}, AdamOptions{});
    w.mutable_grad().im()[0] = 5.0;
    w.mutable_grad().re()[0] = 1.0;
    adam.step();
    EXPECT_EQ(w.value().im()[0], 0.0);
    EXPECT_LT(w.value().re()[0], 1.0);
}

TEST(Adam, NonFiniteGradientThrowsWithName) {
    Var w = parameter(ComplexTensor({2}));
    Adam adam({{"enc0.conv.weight", w, false}}, AdamOptions{});
    w.mutable_grad().re()[1] = std::nan("");
    try {
        adam.step();
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("enc0.conv.weight"), std::string::npos);
    }
}

// training

TEST(Training, ZeroLearningRateKeepsLossConstant) {
    ModelConfig cfg = small_train_config();
    cfg.learning_rate = 0.0;
    cfg.max_steps = 5;
    const auto data = small_dataset(cfg, 2, 0.25);
    cfg.batch_size = data.size();
    DccrnModel m(cfg);
    const auto r = train(m, data, {});
    ASSERT_EQ(r.log.size(), 5u);
    for (const auto& rec : r.log) EXPECT_NEAR(rec.loss, r.log.front().loss, 1e-12);
}

TEST(Training, LossDecreasesOnSmallSet) {
    ModelConfig cfg = small_train_config();
    cfg.learning_rate = 3e-3;
    cfg.max_steps = 25;
    cfg.shuffle = false;
    const auto data = small_dataset(cfg, 2, 0.25);
    cfg.batch_size = data.size();
    DccrnModel m(cfg);
    const auto r = train(m, data, {});
    EXPECT_LT(r.log.back().loss, 0.6 * r.log.front().loss);
    for (const auto& p : m.parameters()) EXPECT_TRUE(p.var.value().all_finite()) << p.name;
}

TEST(Training, SameSeedGivesIdenticalCurveAndCheckpoint) {
    ModelConfig cfg = small_train_config();
    cfg.max_steps = 4;
    cfg.batch_size = 3;
    cfg.checkpoint_every = 2;
    const auto data = small_dataset(cfg, 2, 0.25);
    const auto d1 = scratch_dir("det1"), d2 = scratch_dir("det2");
    DccrnModel a(cfg), b(cfg);
    const auto ra = train(a, data, {d1, {}, {}, {}});
    const auto rb = train(b, data, {d2, {}, {}, {}});
    ASSERT_EQ(ra.log.size(), rb.log.size());
    for (std::size_t i = 0; i < ra.log.size(); ++i) EXPECT_EQ(ra.log[i].loss, rb.log[i].loss);
    EXPECT_EQ(serialize_checkpoint(load_checkpoint(d1 / "model.ckpt")),
              serialize_checkpoint(load_checkpoint(d2 / "model.ckpt")));
    EXPECT_TRUE(std::filesystem::exists(d1 / "ckpt_step_2.bin"));
    EXPECT_TRUE(std::filesystem::exists(d1 / "ckpt_step_4.bin"));
    EXPECT_TRUE(std::filesystem::exists(d1 / "train_log.csv"));
}

TEST(Training, StopsAtMaxStepsAndWritesLog) {
    ModelConfig cfg = small_train_config();
    cfg.max_steps = 3;
    cfg.batch_size = 1;
    const auto data = small_dataset(cfg, 1, 0.25);
    const auto dir = scratch_dir("log");
    DccrnModel m(cfg);
    std::size_t seen = 0;
    const auto r = train(m, data, {dir, {}, [&](const TrainRecord&) { ++seen; }, {}});
    EXPECT_EQ(r.log.size(), 3u);
    EXPECT_EQ(seen, 3u);
    std::ifstream in(dir / "train_log.csv");
    std::string header, line;
    std::getline(in, header);
    EXPECT_EQ(header, "step,epoch,loss");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 3u);
}

TEST(Training, EmptyDataIsDataError) {
    DccrnModel m(small_train_config());
    EXPECT_THROW(train(m, {}, {}), DataError);
}

TEST(Training, CorruptFilesAreSkippedWithWarning) {
    const auto dir = scratch_dir("corrupt");
    SynthConfig sc;
    sc.sample_rate = 8000;
    sc.duration_s = 0.25;
    generate_dataset(dir, 2, 3, sc);
    {
        std::ofstream f(dir / "reverb_0000.wav", std::ios::binary | std::ios::trunc);
        f << "garbage";
    }
    std::vector<std::string> warnings;
    const auto ex = load_training_examples(dir / "manifest.csv", small_train_config(),
                                           [&](const std::string& w) { warnings.push_back(w); });
    EXPECT_EQ(warnings.size(), 1u);
    EXPECT_FALSE(ex.empty());
}

// checkpoint

TEST(DccrnModel, CheckpointRoundTripIsBitIdentical) {
    ModelConfig cfg = tiny_config();
    cfg.max_steps = 2;
    cfg.batch_size = 2;
    DccrnModel m(cfg);
    // move batch-norm running statistics away from their initial values
    m.forward(constant(ComplexTensor::random_normal({2, 8, 8}, 3)), true);
    const auto dir = scratch_dir("ckpt");
    m.save(dir / "m.ckpt");
    DccrnModel back = DccrnModel::load(dir / "m.ckpt");
    EXPECT_EQ(back.config().serialize(), cfg.serialize());
    const ComplexTensor x = ComplexTensor::random_normal({2, 8, 8}, 4);
    EXPECT_EQ(m.forward(constant(x), false).value(), back.forward(constant(x), false).value());
}

TEST(DccrnModel, LoadStateRejectsMismatch) {
    DccrnModel small(tiny_config());
    ModelConfig wider = tiny_config();
    wider.channels = {4, 8};
    DccrnModel other(wider);
    EXPECT_THROW(other.load_state(small.to_checkpoint()), DataError);
    Checkpoint ck = small.to_checkpoint();
    ck.entries.pop_back();
    EXPECT_THROW(small.load_state(ck), DataError);
}

// enhancement

TEST(Enhance, ZeroInputGivesZeroOutput) {
    DccrnModel m(small_train_config());
    WaveForm x{std::vector<double>(1234, 0.0), 8000};
    const WaveForm y = enhance_waveform(m, x);
    ASSERT_EQ(y.samples.size(), x.samples.size());
    for (double v : y.samples) EXPECT_EQ(v, 0.0);
}

TEST(Enhance, OutputLengthEqualsInputLength) {
    DccrnModel m(small_train_config());
    for (std::size_t n : {1u, 17u, 500u, 2049u, 4000u}) {
        WaveForm x{std::vector<double>(n), 8000};
        for (std::size_t i = 0; i < n; ++i) x.samples[i] = std::sin(0.01 * double(i * i));
        EXPECT_EQ(enhance_waveform(m, x).samples.size(), n);
    }
}

TEST(Enhance, SampleRateMismatchIsContractError) {
    DccrnModel m(small_train_config());
    try {
        enhance_waveform(m, WaveForm{std::vector<double>(100, 0.1), 16000});
        FAIL() << "expected ContractError";
    } catch (const ContractError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("8000"), std::string::npos);
        EXPECT_NE(msg.find("16000"), std::string::npos);
    }
}

TEST(Enhance, IdentityMaskReproducesInputUpToNyquist) {
    const ModelConfig cfg = small_train_config();
    auto ones = [](const ComplexTensor& images) { return ComplexTensor::filled(images.shape(), {1.0, 0.0}); };

    // a tone leaks a little energy into the Nyquist bin through the window;
    // the reconstruction error is bounded by that component
    WaveForm tone{std::vector<double>(8000), 8000};
    for (std::size_t i = 0; i < tone.samples.size(); ++i) {
        const double t = double(i) / 8000.0;
        tone.samples[i] = 0.5 * std::sin(2 * std::numbers::pi * 440.0 * t) + 0.2 * std::cos(2 * std::numbers::pi * 1234.5 * t);
    }
    const WaveForm y = enhance_with_mask(tone, cfg, ones);
    Spectrogram only_nyquist = stft(tone, cfg.stft());
    for (std::size_t f = 0; f < only_nyquist.frames(); ++f)
        for (std::size_t k = 0; k < cfg.fft_size / 2; ++k) only_nyquist.data.set({f, k}, 0.0);
    const std::vector<double> zeros(tone.samples.size(), 0.0);
    const double nyquist_rms = rms_diff(istft(only_nyquist).samples, zeros, 0, zeros.size());
    EXPECT_LT(rms_diff(y.samples, tone.samples, 0, tone.samples.size()), 1e-6 + nyquist_rms);

    // broadband input: the output equals the input with the Nyquist bin removed
    WaveForm noise{ComplexTensor::random_normal({3000}, 5).re(), 8000};
    Spectrogram s = stft(noise, cfg.stft());
    for (std::size_t f = 0; f < s.frames(); ++f) s.data.set({f, cfg.fft_size / 2}, 0.0);
    const WaveForm expected = istft(s);
    const WaveForm got = enhance_with_mask(noise, cfg, ones);
    EXPECT_LT(rms_diff(got.samples, expected.samples, 0, noise.samples.size()), 1e-12);
}

TEST(Enhance, MaskAppliedToRawSpectrumWhenSmoothing) {
    ModelConfig cfg = small_train_config();
    cfg.psd_smoothing = true;
    WaveForm x{ComplexTensor::random_normal({2000}, 6).re(), 8000};
    ComplexTensor seen;
    const WaveForm y = enhance_with_mask(x, cfg, [&](const ComplexTensor& images) {
        seen = images;
        return ComplexTensor::filled(images.shape(), {1.0, 0.0});
    });
    // the network sees smoothed input but the mask multiplies the raw spectrum
    Spectrogram s = stft(x, cfg.stft());
    const auto raw = make_spectral_images(s, cfg.image_frames);
    ComplexTensor first(raw.front().data.shape());
    std::copy_n(seen.re().begin(), first.size(), first.re().begin());
    std::copy_n(seen.im().begin(), first.size(), first.im().begin());
    EXPECT_GT(max_abs_diff(first, raw.front().data), 1e-6);
    for (std::size_t f = 0; f < s.frames(); ++f) s.data.set({f, cfg.fft_size / 2}, 0.0);
    EXPECT_LT(rms_diff(y.samples, istft(s).samples, 0, x.samples.size()), 1e-12);
}

}  // namespace
}  // namespace ctfa
