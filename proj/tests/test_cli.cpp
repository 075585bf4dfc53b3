#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "cli.hpp"
#include "ctfa/datasynth.hpp"
#include "ctfa/model.hpp"

namespace ctfa {
namespace {

namespace fs = std::filesystem;

struct Result {
    int code;
    std::string out, err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("ctfa_test_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), {}};
}

const std::string kTinyConfig = std::string(CTFA_SOURCE_DIR) + "/configs/tiny.cfg";

TEST(Cli, UsageErrorsExitOne) {
    EXPECT_EQ(run({}).code, cli::kUsage);
    EXPECT_EQ(run({"frobnicate"}).code, cli::kUsage);
    EXPECT_EQ(run({"synth", "--n", "2"}).code, cli::kUsage);  // --out missing
    EXPECT_EQ(run({"synth", "--n", "2", "--out", "x", "--bogus"}).code, cli::kUsage);
    EXPECT_EQ(run({"synth", "--n", "zero", "--out", "x"}).code, cli::kUsage);
}

TEST(Cli, HelpExitsZero) {
    const auto r = run({"--help"});
    EXPECT_EQ(r.code, cli::kOk);
    EXPECT_NE(r.out.find("gradcheck"), std::string::npos);
}

TEST(Cli, SynthWritesPairsManifestAndRecord) {
    const auto dir = scratch("synth");
    const auto r = run({"synth", "--n", "4", "--seed", "7", "--out", dir.string(), "--duration", "0.25"});
    ASSERT_EQ(r.code, cli::kOk) << r.err;
    std::size_t wavs = 0;
    for (const auto& e : fs::directory_iterator(dir)) wavs += e.path().extension() == ".wav";
    EXPECT_EQ(wavs, 8u);
    EXPECT_EQ(read_manifest(dir / "manifest.csv").size(), 4u);
    const std::string record = slurp(dir / "run.json");
    EXPECT_NE(record.find("\"command\": \"synth\""), std::string::npos);
    EXPECT_NE(record.find("\"sample_rate\": 8000"), std::string::npos);
}

TEST(Cli, IdenticalArgvGivesByteIdenticalArtifacts) {
    const auto dir = scratch("repeat");
    const std::vector<std::string> argv{"synth", "--n", "2", "--seed", "3", "--out", dir.string(), "--duration", "0.25"};
    ASSERT_EQ(run(argv).code, 0);
    std::map<std::string, std::string> first;
    for (const auto& e : fs::directory_iterator(dir)) first[e.path().filename().string()] = slurp(e.path());
    ASSERT_EQ(run(argv).code, 0);
    for (const auto& [name, bytes] : first) EXPECT_EQ(slurp(dir / name), bytes) << name;
}

TEST(Cli, ConfigErrorsExitTwo) {
    const auto dir = scratch("cfgerr");
    auto r = run({"synth", "--n", "1", "--out", dir.string(), "--set", "nonsense=3"});
    EXPECT_EQ(r.code, cli::kDataOrConfig);
    EXPECT_NE(r.err.find("nonsense"), std::string::npos);
    EXPECT_EQ(run({"synth", "--n", "1", "--out", dir.string(), "--config", (dir / "missing.cfg").string()}).code,
              cli::kDataOrConfig);
    EXPECT_EQ(run({"synth", "--n", "1", "--out", dir.string(), "--snr", "loud"}).code, cli::kDataOrConfig);
    EXPECT_EQ(run({"train", "--data", (dir / "none.csv").string(), "--out", dir.string()}).code, cli::kDataOrConfig);
}

TEST(Cli, GradcheckPassesAndPrintsTable) {
    const auto dir = scratch("grad");
    const auto r = run({"gradcheck", "--seed", "1", "--out", dir.string()});
    EXPECT_EQ(r.code, cli::kOk) << r.out;
    for (const char* name : {"complex_conv2d#0", "complex_batchnorm#4", "gru_step#2", "sdab#0", "conventional_sa#3",
                             "complex_tf_sa#1", "dense_block#0"}) {
        EXPECT_NE(r.out.find(name), std::string::npos) << name;
    }
    EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
    EXPECT_TRUE(fs::exists(dir / "run.json"));
}

class CliPipeline : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = scratch("pipeline");
        ASSERT_EQ(run({"synth", "--n", "3", "--seed", "5", "--out", (dir_ / "data").string(), "--duration", "0.3"}).code,
                  0);
        const auto r = run({"train", "--config", kTinyConfig, "--data", (dir_ / "data" / "manifest.csv").string(),
                            "--out", (dir_ / "run").string(), "--set", "epochs=1", "--set", "checkpoint_every=2"});
        ASSERT_EQ(r.code, 0) << r.err;
    }
    static fs::path dir_;
};
fs::path CliPipeline::dir_;

TEST_F(CliPipeline, TrainWritesLogCheckpointsAndRecord) {
    const auto run_dir = dir_ / "run";
    EXPECT_TRUE(fs::exists(run_dir / "model.ckpt"));
    EXPECT_TRUE(fs::exists(run_dir / "ckpt_step_2.bin"));
    const std::string log = slurp(run_dir / "train_log.csv");
    EXPECT_EQ(log.rfind("step,epoch,loss\n", 0), 0u);
    const std::string record = slurp(run_dir / "run.json");
    EXPECT_NE(record.find("\"learning_rate\": \"0.003\""), std::string::npos);
    EXPECT_NE(record.find("\"checkpoint_every\": \"2\""), std::string::npos);
    // the resolved config round-trips through the checkpoint
    EXPECT_EQ(DccrnModel::load(run_dir / "model.ckpt").config().serialize(), slurp(run_dir / "config.cfg"));
}

TEST_F(CliPipeline, EnhanceKeepsLengthAndWritesRecord) {
    const auto out = dir_ / "enh" / "enhanced_0001.wav";
    const auto r = run({"enhance", "--ckpt", (dir_ / "run" / "model.ckpt").string(), "--in",
                        (dir_ / "data" / "reverb_0001.wav").string(), "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_wav(out).samples.size(), read_wav(dir_ / "data" / "reverb_0001.wav").samples.size());
    EXPECT_TRUE(fs::exists(out.string() + ".run.json"));
}

TEST_F(CliPipeline, EnhanceRateMismatchExitsTwoNamingRates) {
    const auto other = dir_ / "r16";
    ASSERT_EQ(run({"synth", "--n", "1", "--out", other.string(), "--duration", "0.2", "--set", "sample_rate=16000"}).code,
              0);
    const auto r = run({"enhance", "--ckpt", (dir_ / "run" / "model.ckpt").string(), "--in",
                        (other / "reverb_0000.wav").string(), "--out", (dir_ / "bad.wav").string()});
    EXPECT_EQ(r.code, cli::kDataOrConfig);
    EXPECT_NE(r.err.find("8000"), std::string::npos);
    EXPECT_NE(r.err.find("16000"), std::string::npos);
    EXPECT_FALSE(fs::exists(dir_ / "bad.wav"));
}

TEST_F(CliPipeline, EvalWritesPerUtteranceRowsAndMean) {
    const auto test_dir = dir_ / "unprocessed";
    fs::create_directories(test_dir);
    for (int i = 0; i < 3; ++i) {
        const std::string name = "reverb_000" + std::to_string(i) + ".wav";
        fs::copy_file(dir_ / "data" / name, test_dir / name, fs::copy_options::overwrite_existing);
    }
    const auto csv = dir_ / "eval.csv";
    const auto r = run({"eval", "--ref-dir", (dir_ / "data").string(), "--test-dir", test_dir.string(), "--out",
                        csv.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream in(slurp(csv));
    std::vector<std::string> lines;
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    ASSERT_EQ(lines.size(), 5u);
    EXPECT_EQ(lines[0], "utt_id,cd,llr,fwsegsnr");
    EXPECT_EQ(lines[1].rfind("0000,", 0), 0u);
    EXPECT_EQ(lines[4].rfind("mean,", 0), 0u);
}

TEST_F(CliPipeline, EvalMissingReferenceExitsTwo) {
    const auto test_dir = dir_ / "orphans";
    fs::create_directories(test_dir);
    fs::copy_file(dir_ / "data" / "reverb_0000.wav", test_dir / "reverb_0099.wav", fs::copy_options::overwrite_existing);
    EXPECT_EQ(run({"eval", "--ref-dir", (dir_ / "data").string(), "--test-dir", test_dir.string(), "--out",
                   (dir_ / "e.csv").string()})
                  .code,
              cli::kDataOrConfig);
}

TEST_F(CliPipeline, DivergentTrainingExitsThree) {
    const auto r = run({"train", "--config", kTinyConfig, "--data", (dir_ / "data" / "manifest.csv").string(), "--out",
                        (dir_ / "diverge").string(), "--set", "learning_rate=1e300", "--set", "max_steps=5"});
    EXPECT_EQ(r.code, cli::kNumerical);
    EXPECT_NE(r.err.find("non-finite"), std::string::npos);
}

TEST_F(CliPipeline, AllPairsCorruptExitsTwo) {
    const auto bad = dir_ / "corrupt";
    fs::create_directories(bad);
    std::ofstream(bad / "clean_0000.wav") << "x";
    std::ofstream(bad / "reverb_0000.wav") << "x";
    write_manifest(bad / "manifest.csv", {{"clean_0000.wav", "reverb_0000.wav", 0.4, 30.0, 1}});
    const auto r = run({"train", "--config", kTinyConfig, "--data", (bad / "manifest.csv").string(), "--out",
                        (dir_ / "corrupt_run").string()});
    EXPECT_EQ(r.code, cli::kDataOrConfig);
    EXPECT_NE(r.err.find("warning"), std::string::npos);
}

TEST(Cli, ShippedConfigsAreValid) {
    for (const char* name : {"desk.cfg", "tiny.cfg", "full.cfg"}) {
        const auto cfg = ModelConfig::load(fs::path(CTFA_SOURCE_DIR) / "configs" / name);
        EXPECT_NO_THROW(cfg.validate()) << name;
    }
    EXPECT_EQ(ModelConfig::load(fs::path(CTFA_SOURCE_DIR) / "configs" / "desk.cfg").serialize(),
              ModelConfig{}.serialize());
    EXPECT_EQ(ModelConfig::load(fs::path(CTFA_SOURCE_DIR) / "configs" / "full.cfg").num_enc_layers(), 6u);
}

}  // namespace
}  // namespace ctfa
