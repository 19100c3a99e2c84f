#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "distractnet/cli/app.hpp"

using namespace distractnet;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "distractnet");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("distractnet_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // One trial per level and a 20 s inter-session rest: 62 s of data.
  std::string small_config(const std::string& extra = "", const std::string& synth_extra = "") {
    const auto path = dir_ / "run.toml";
    std::ofstream os(path);
    os << "[synth]\ntrials_per_level = 1\ninter_session_rest_s = 20.0\n"
       << synth_extra << "[evaluate]\nfolds = 3\nmodels = [\"PSD-SVM\", \"Majority\"]\n"
       << extra;
    return path.string();
  }

  std::string p(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST(Toml, ParsesSupportedSubset) {
  const auto j = toml::parse(
      "# comment\n"
      "top = 1\n"
      "[run]\n"
      "seed = 42  # trailing\n"
      "ratio = -2.5e-1\n"
      "name = \"a # b\"\n"
      "flag = true\n"
      "list = [1, 2, 3]\n"
      "[a.b]\n"
      "c.d = \"x\"\n");
  EXPECT_EQ(j["top"], 1);
  EXPECT_EQ(j["run"]["seed"], 42);
  EXPECT_TRUE(j["run"]["seed"].is_number_integer());
  EXPECT_EQ(j["run"]["ratio"], -0.25);
  EXPECT_EQ(j["run"]["name"], "a # b");
  EXPECT_EQ(j["run"]["flag"], true);
  EXPECT_EQ(j["run"]["list"], nlohmann::json({1, 2, 3}));
  EXPECT_EQ(j["a"]["b"]["c"]["d"], "x");
}

TEST(Toml, ErrorsNameTheLine) {
  auto fails_at = [](const std::string& text, const std::string& line) {
    try {
      toml::parse(text);
    } catch (const InputError& e) {
      return std::string(e.what()).find("line " + line) != std::string::npos;
    }
    return false;
  };
  EXPECT_TRUE(fails_at("a = 1\na = 2\n", "2"));
  EXPECT_TRUE(fails_at("[run]\nseed = \n", "2"));
  EXPECT_TRUE(fails_at("x = [1, 2\n", "1"));
  EXPECT_TRUE(fails_at("x = 1 2\n", "1"));
  EXPECT_TRUE(fails_at("[t\n", "1"));
  EXPECT_TRUE(fails_at("a = 1\n[a]\n", "2"));
}

TEST(Config, DefaultsMatchLibraryDefaults) {
  const auto c = cli::run_config_from_json(nlohmann::json::object());
  EXPECT_EQ(c.hybrid.to_json(), HybridConfig{}.to_json());
  EXPECT_EQ(c.train.learning_rate, 1e-3);
  EXPECT_EQ(c.train.batch_size, 64u);
  EXPECT_EQ(c.train.max_epochs, 100u);
  EXPECT_EQ(c.train.patience, 10u);
  EXPECT_EQ(c.folds, 5u);
  EXPECT_EQ(c.synth.trials_per_level, 40u);
  EXPECT_EQ(c.preprocess.decimate_factor, 10);
}

TEST(Config, ReadsTablesAndRejectsUnknownKeys) {
  const auto c = cli::run_config_from_json(toml::parse(
      "[run]\nseed = 9\nprecision = 64\n[hybrid]\nmaps = [4, 4, 8, 8, 8]\n[topo]\nband = \"alpha\"\n"
      "[synth]\nrest_post_count = 7\n"));
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.precision, Precision::F64);
  EXPECT_EQ(c.train.precision, Precision::F64);
  EXPECT_EQ(c.hybrid.blocks[2].maps, 8u);
  EXPECT_EQ(c.topo_band.name, BandName::Alpha);
  EXPECT_EQ(c.synth.rests(), 7u);

  EXPECT_THROW(cli::run_config_from_json(toml::parse("[run]\nsede = 1\n")), InputError);
  EXPECT_THROW(cli::run_config_from_json(toml::parse("[runn]\nseed = 1\n")), InputError);
  EXPECT_THROW(cli::run_config_from_json(toml::parse("[run]\nseed = \"x\"\n")), InputError);
  EXPECT_THROW(cli::run_config_from_json(toml::parse("[run]\nprecision = 16\n")), InputError);
  EXPECT_THROW(cli::run_config_from_json(toml::parse("[hybrid]\nmaps = [1, 2]\n")), InputError);
  EXPECT_THROW(cli::run_config_from_json(toml::parse("[topo]\nband = \"gamma\"\n")), InputError);
  EXPECT_THROW(cli::run_config_from_json(toml::parse("[evaluate]\nmodels = [\"SVM\"]\n")).validate(), InputError);
}

TEST_F(CliTest, UsageErrorsExitWithTwo) {
  EXPECT_EQ(run({}).code, cli::kExitInput);
  EXPECT_EQ(run({"bogus"}).code, cli::kExitInput);
  EXPECT_EQ(run({"synth"}).code, cli::kExitInput);  // --out is required
  EXPECT_EQ(run({"synth", "--out", p("x"), "--precision", "16"}).code, cli::kExitInput);
  EXPECT_EQ(run({"synth", "--out", p("x"), "--config", p("missing.toml")}).code, cli::kExitInput);
  EXPECT_EQ(run({"preprocess", "--in", p("nowhere"), "--out", p("y")}).code, cli::kExitInput);
  EXPECT_EQ(run({"--help"}).code, cli::kExitOk);

  std::ofstream(dir_ / "bad.toml") << "[train]\nlearning_rat = 0.1\n";
  const auto r = run({"synth", "--out", p("x"), "--config", p("bad.toml")});
  EXPECT_EQ(r.code, cli::kExitInput);
  EXPECT_NE(r.err.find("train.learning_rat"), std::string::npos);
}

TEST_F(CliTest, SynthIsByteIdenticalPerSeed) {
  const auto cfg = small_config();
  ASSERT_EQ(run({"synth", "--config", cfg, "--out", p("a"), "--seed", "4"}).code, 0);
  ASSERT_EQ(run({"synth", "--config", cfg, "--out", p("b"), "--seed", "4"}).code, 0);
  ASSERT_EQ(run({"synth", "--config", cfg, "--out", p("c"), "--seed", "5"}).code, 0);
  for (const auto& entry : fs::directory_iterator(dir_ / "a")) {
    const auto name = entry.path().filename();
    EXPECT_EQ(slurp(entry.path()), slurp(dir_ / "b" / name)) << name;
  }
  ASSERT_FALSE(slurp(dir_ / "a" / "recording.bin").empty());
  EXPECT_NE(slurp(dir_ / "a" / "recording.bin"), slurp(dir_ / "c" / "recording.bin"));

  // Existing results are protected unless --force is given.
  EXPECT_EQ(run({"synth", "--config", cfg, "--out", p("a")}).code, cli::kExitInput);
  EXPECT_EQ(run({"synth", "--config", cfg, "--out", p("a"), "--force"}).code, 0);
}

TEST_F(CliTest, PipelineRunsEndToEnd) {
  const auto cfg = small_config("[topo]\nband = \"alpha\"\n");
  ASSERT_EQ(run({"synth", "--config", cfg, "--out", p("raw"), "--subjects", "2"}).code, 0);
  EXPECT_TRUE(fs::exists(dir_ / "raw" / "subject-02" / "recording.json"));

  auto r = run({"preprocess", "--config", cfg, "--in", p("raw"), "--out", p("epochs")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("62 epochs, 30 after balancing"), std::string::npos) << r.out;
  const auto manifest = io::read_json(dir_ / "epochs" / "subject-01" / "manifest.json");
  EXPECT_EQ(manifest["census"]["RestInterSession"], 20);
  EXPECT_EQ(manifest["upstream_hash"], io::read_json(dir_ / "raw" / "subject-01" / "manifest.json")["config_hash"]);

  r = run({"evaluate", "--config", cfg, "--in", p("epochs"), "--out", p("eval")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("Subject"), std::string::npos);
  const auto report = io::read_json(dir_ / "eval" / "cv_report.json");
  EXPECT_EQ(report["unit"], "subject");
  EXPECT_EQ(report["models"].size(), 2u);
  EXPECT_TRUE(fs::exists(dir_ / "eval" / "subject-02" / "cv_report.json"));

  r = run({"train", "--config", cfg, "--in", p("epochs/subject-01"), "--out", p("model"), "--model", "PSD-SVM"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(io::read_json(dir_ / "model" / "model.meta.json")["summary"]["model"]["weights"].size(), 3u);

  r = run({"topo", "--config", cfg, "--in", p("epochs/subject-01"), "--out", p("topo")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(dir_ / "topo" / "topography.csv").rfind("channel,x,y,", 0), 0u);
  EXPECT_NE(r.out.find("alpha band"), std::string::npos);
}

TEST_F(CliTest, NeuralTrainingWritesCheckpoint) {
  const auto cfg = small_config(
      "[train]\nmax_epochs = 2\n[hybrid]\nmaps = [2, 2, 2, 2, 2]\nlstm_hidden = [4, 4]\nfc_hidden = [4, 4]\n");
  ASSERT_EQ(run({"synth", "--config", cfg, "--out", p("raw")}).code, 0);
  ASSERT_EQ(run({"preprocess", "--config", cfg, "--in", p("raw"), "--out", p("epochs")}).code, 0);
  const auto r = run({"train", "--config", cfg, "--in", p("epochs"), "--out", p("model"), "--precision", "64"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("trained Proposed on 30 epochs"), std::string::npos);
  const auto meta = io::read_json(dir_ / "model" / "model.meta.json");
  EXPECT_EQ(meta["summary"]["history"].size(), 2u);
  bool has_checkpoint = false;
  for (const auto& e : fs::directory_iterator(dir_ / "model"))
    has_checkpoint = has_checkpoint || e.path().filename().string().rfind("model", 0) == 0;
  EXPECT_TRUE(has_checkpoint);
}

TEST_F(CliTest, NumericalFailureExitsWithThree) {
  // Silent EEG leaves ICA nothing to whiten.
  const auto cfg =
      small_config("", "background_uv = 0.0\ntheta_uv = 0.0\nalpha_uv = 0.0\nline_uv = 0.0\nblink_rate_hz = 0.0\n");

  ASSERT_EQ(run({"synth", "--config", cfg, "--out", p("raw")}).code, 0);
  const auto r = run({"preprocess", "--config", cfg, "--in", p("raw"), "--out", p("epochs")});
  EXPECT_EQ(r.code, cli::kExitNumerical) << r.err;
  EXPECT_NE(r.err.find("numerical failure"), std::string::npos);
}
