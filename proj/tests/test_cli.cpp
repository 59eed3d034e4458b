#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "cli.hpp"
#include "spike/checkpoint.hpp"
#include "spike/errors.hpp"
#include "spike/model.hpp"

using namespace spike;
using namespace spike::cli;
namespace fs = std::filesystem;

namespace {

const char* kToy =
    "seq_len=2\nnum_points=64\nnum_volumes=8\nnum_samples=4\nchannels=16\nconv_channels=16\n"
    "key_channels=16\nvalue_channels=16\nheads=2\nblocks=1\njoints=15\nbatch_size=4\nepochs=2\n"
    "points_per_frame=128\nframes_per_recording=3\nrecordings=4\nsubjects=2\n";

class CliRun : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("spike_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream(dir_ / "toy.cfg") << kToy << "out=" << (dir_ / "out").string() << "\n";
  }
  void TearDown() override { fs::remove_all(dir_); }

  int spike(std::vector<std::string> args) {
    args.insert(args.begin(), "spike");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    out_.str("");
    err_.str("");
    return run(static_cast<int>(argv.size()), argv.data(), out_, err_);
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::string config() const { return path("toy.cfg"); }

  void synth() { ASSERT_EQ(spike({"synth", "--config", config(), "--out", path("data")}), 0) << err_.str(); }

  fs::path dir_;
  std::ostringstream out_;
  std::ostringstream err_;
};

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);) lines.push_back(line);
  return lines;
}

std::string strip_wall(const std::string& log) {
  return std::regex_replace(log, std::regex(" wall_ms=[0-9]+"), "");
}

std::string read_all(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST(RunConfigResolve, Precedence) {
  const RunConfig cfg = resolve_config("epochs=7\nbatch_size=3\n", {{"epochs", "9"}});
  EXPECT_EQ(cfg.train.epochs, 9u);
  EXPECT_EQ(cfg.train.batch_size, 3u);
  EXPECT_EQ(cfg.train.momentum, 0.9);
  EXPECT_EQ(cfg.source("epochs"), Source::kFlag);
  EXPECT_EQ(cfg.source("batch_size"), Source::kFile);
  EXPECT_EQ(cfg.source("momentum"), Source::kDefault);
}

TEST(RunConfigResolve, CommentsAndBlankLines) {
  const RunConfig cfg = resolve_config("# header\n\n  heads = 4  # trailing\n", {});
  EXPECT_EQ(cfg.hp.heads, 4u);
}

TEST(RunConfigResolve, UnknownKeyRejected) {
  try {
    resolve_config("epoch=3\n", {});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("'epoch'"), std::string::npos);
  }
  EXPECT_THROW(resolve_config("", {{"nope", "1"}}), ConfigError);
}

TEST(RunConfigResolve, RepeatedKeyRejected) {
  EXPECT_THROW(resolve_config("seed=1\nseed=2\n", {}), ConfigError);
}

TEST(RunConfigResolve, BadValuesNameTheKey) {
  for (const auto& [key, value] : std::vector<std::pair<std::string, std::string>>{
           {"epochs", "-1"}, {"radius", "abc"}, {"augment", "yes"}, {"window_mode", "future"},
           {"learning_rate", "inf"}, {"split", "val"}, {"heads", "3"}}) {
    try {
      resolve_config(key + "=" + value + "\n", {});
      FAIL() << key;
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find(key), std::string::npos) << e.what();
    }
  }
}

TEST(RunConfigResolve, MissingLineSeparatorRejected) {
  EXPECT_THROW(resolve_config("epochs 3\n", {}), ConfigError);
}

TEST(RunConfigResolve, DumpRoundTrips) {
  const RunConfig a = resolve_config("learning_rate=0.0123\nwindow_mode=past-future\nocclusion=hide-arm-current-frame\n",
                                     {{"radius", "0.15"}, {"out", "x y"}});
  const std::string dump = a.dump();
  EXPECT_NE(dump.find("learning_rate=0.0123  # file"), std::string::npos);
  EXPECT_NE(dump.find("radius=0.15  # flag"), std::string::npos);
  EXPECT_NE(dump.find("momentum=0.9  # default"), std::string::npos);
  EXPECT_EQ(lines_of(dump).size(), config_keys().size());
  const RunConfig b = resolve_config(dump, {});
  EXPECT_EQ(b.hp, a.hp);
  EXPECT_EQ(b.train.learning_rate, a.train.learning_rate);
  EXPECT_EQ(b.out, a.out);
  EXPECT_EQ(b.synth.occlusion, a.synth.occlusion);
  // Values survive; every key now comes from the file.
  const std::string again = b.dump();
  EXPECT_EQ(std::regex_replace(again, std::regex("# .*"), ""), std::regex_replace(dump, std::regex("# .*"), ""));
}

TEST(RunConfigResolve, ThreadsCappedByEnvironment) {
  ::setenv("SPIKE_THREADS", "2", 1);
  EXPECT_EQ(effective_threads(8), 2u);
  EXPECT_EQ(effective_threads(1), 1u);
  ::setenv("SPIKE_THREADS", "zero", 1);
  EXPECT_THROW(effective_threads(4), ConfigError);
  ::unsetenv("SPIKE_THREADS");
  EXPECT_EQ(effective_threads(8), 8u);
}

TEST(SkeletonPlot, WellFormed) {
  std::vector<Vec3> joints;
  for (std::size_t j = 0; j < kNumItopJoints; ++j) joints.push_back({0.1 * j, -0.05 * j, 3.0});
  const std::string svg = skeleton_svg(joints);
  EXPECT_EQ(svg.rfind("<?xml", 0), 0u);
  EXPECT_NE(svg.find("</svg>\n"), std::string::npos);
  auto count = [&](const std::string& tag) {
    std::size_t n = 0;
    for (auto p = svg.find(tag); p != std::string::npos; p = svg.find(tag, p + 1)) ++n;
    return n;
  };
  EXPECT_EQ(count("<line "), kBones.size());
  EXPECT_EQ(count("<circle "), kNumItopJoints);
  EXPECT_EQ(count("<circle "), count("</circle>"));
  EXPECT_THROW(skeleton_svg({{0, 0, 0}}), ConfigError);
}

TEST_F(CliRun, TrainWritesLogAndCheckpoints) {
  synth();
  ASSERT_EQ(spike({"train", "--config", config(), "--data", path("data"), "--out", path("run")}), 0) << err_.str();
  EXPECT_EQ(lines_of(out_.str()).size(), 2u);
  EXPECT_EQ(lines_of(read_all(dir_ / "run" / "train.log")).size(), 2u);
  for (const char* f : {"last.spik", "best.spik", "train_state.bin", "resolved_config.txt"}) {
    EXPECT_TRUE(fs::exists(dir_ / "run" / f)) << f;
  }
}

TEST_F(CliRun, RerunAndResolvedConfigReproduce) {
  synth();
  ASSERT_EQ(spike({"train", "--config", config(), "--data", path("data"), "--out", path("a"), "--seed", "5"}), 0);
  const std::string first = strip_wall(out_.str());
  ASSERT_EQ(spike({"train", "--config", config(), "--data", path("data"), "--out", path("b"), "--seed", "5"}), 0);
  EXPECT_EQ(strip_wall(out_.str()), first);
  ASSERT_EQ(spike({"train", "--config", path("a/resolved_config.txt"), "--out", path("c")}), 0) << err_.str();
  EXPECT_EQ(strip_wall(out_.str()), first);
}

TEST_F(CliRun, MissingDataDirIsConfigError) {
  EXPECT_EQ(spike({"train", "--config", config(), "--data", path("nowhere")}), 2);
  EXPECT_NE(err_.str().find(path("nowhere")), std::string::npos);
}

TEST_F(CliRun, UnknownFlagIsConfigError) {
  EXPECT_EQ(spike({"train", "--config", config(), "--no_such_key", "1"}), 2);
  EXPECT_EQ(spike({"frobnicate"}), 2);
}

TEST_F(CliRun, CorruptCheckpointIsDataError) {
  synth();
  std::ofstream(path("bad.spik")) << "SPIKgarbage";
  EXPECT_EQ(spike({"eval", "--config", config(), "--data", path("data"), "--checkpoint", path("bad.spik")}), 3);
}

TEST_F(CliRun, EvalReportRowsAndThresholdMonotone) {
  synth();
  ASSERT_EQ(spike({"train", "--config", config(), "--data", path("data"), "--out", path("run")}), 0);
  ASSERT_EQ(spike({"eval", "--config", config(), "--data", path("data"), "--checkpoint", path("run/last.spik"),
                   "--out", path("ev")}),
            0)
      << err_.str();
  const auto rows = lines_of(out_.str());
  ASSERT_EQ(rows.size(), 14u);
  const char* expected[] = {"head", "neck", "shoulders", "elbows", "hands", "torso", "hips",
                            "knees", "feet", "upper_body", "lower_body", "mean", "mean_of_joints"};
  for (std::size_t i = 0; i < 13; ++i) EXPECT_EQ(rows[i + 1].substr(2, rows[i + 1].find(' ', 2) - 2), expected[i]);
  EXPECT_TRUE(fs::exists(dir_ / "ev" / "eval_report.txt"));

  auto mean_of = [&](const std::string& threshold) {
    EXPECT_EQ(spike({"eval", "--config", config(), "--data", path("data"), "--checkpoint",
                     path("run/last.spik"), "--threshold", threshold}),
              0);
    const std::string row = lines_of(out_.str())[12];
    return std::stod(row.substr(row.find_last_of(' ') + 1));
  };
  EXPECT_LE(mean_of("0.05"), mean_of("0.10"));
}

TEST_F(CliRun, EvalPerfectOracleScoresHundred) {
  // Dense frames keep the sampled-cloud centroid within a few mm of the pose.
  const std::map<std::string, std::string> dense = {
      {"motion_amplitude", "0"}, {"num_points", "1024"}, {"points_per_frame", "1024"}};
  RunConfig cfg = resolve_config(kToy, dense);
  const SequenceDataset data = generate_synthetic(cfg.synth, 1, 3);
  write_native(data, dir_ / "static");
  // Zero weights: the output is head2_b, set to the centered pose.
  ModelParams params = ModelParams::zeros(cfg.hp);
  const Example ex = make_example(data.recordings[0], 0, cfg.hp, 0, false);
  auto bias = params.head2_b.mutable_data();
  for (std::size_t j = 0; j < ex.target.size(); ++j) {
    bias[3 * j] = static_cast<float>(ex.target.joints[j].x);
    bias[3 * j + 1] = static_cast<float>(ex.target.joints[j].y);
    bias[3 * j + 2] = static_cast<float>(ex.target.joints[j].z);
  }
  save_checkpoint(params, cfg.hp, dir_ / "oracle.spik");
  ASSERT_EQ(spike({"eval", "--config", config(), "--data", path("static"), "--checkpoint", path("oracle.spik"),
                   "--num_points", "1024"}),
            0)
      << err_.str();
  EXPECT_TRUE(std::regex_search(out_.str(), std::regex("\n  mean +100\\.00\n"))) << out_.str();
}

TEST_F(CliRun, EvalArchitectureMismatch) {
  synth();
  ASSERT_EQ(spike({"train", "--config", config(), "--data", path("data"), "--out", path("run")}), 0);
  EXPECT_EQ(spike({"eval", "--config", config(), "--data", path("data"), "--checkpoint", path("run/last.spik"),
                   "--channels", "32"}),
            2);
  EXPECT_NE(err_.str().find("channels"), std::string::npos);

  HyperParams hp = resolve_config(kToy, {}).hp;
  hp.joints = 3;
  ModelParams p = ModelParams::init(hp, 1);
  save_checkpoint(p, hp, dir_ / "three.spik");
  std::ofstream(path("plain.cfg")) << "points_per_frame=128\nframes_per_recording=3\nrecordings=2\nout=" << path("out") << "\n";
  EXPECT_EQ(spike({"eval", "--config", path("plain.cfg"), "--data", path("data"), "--checkpoint", path("three.spik")}), 3);
}

TEST_F(CliRun, PredictUncentersAndPlots) {
  synth();
  const RunConfig cfg = resolve_config(kToy, {});
  ModelParams params = ModelParams::init(cfg.hp, 4);
  save_checkpoint(params, cfg.hp, dir_ / "m.spik");
  const SequenceDataset data = load_native(dir_ / "data");
  const Recording& rec = data.recordings[1];
  write_point_file(rec.frames[0].cloud, dir_ / "f0.sppc");
  write_point_file(rec.frames[1].cloud, dir_ / "f1.sppc");

  ASSERT_EQ(spike({"predict", "--config", config(), "--checkpoint", path("m.spik"), "--sequence",
                   path("f0.sppc") + "," + path("f1.sppc"), "--plot", path("p.svg"), "--seed", "8"}),
            0)
      << err_.str();
  const auto rows = lines_of(out_.str());
  ASSERT_EQ(rows.size(), 15u);

  Recording two = rec;
  two.frames.resize(2);
  const Example ex = make_example(two, 1, cfg.hp, 8, false);
  const auto joints = to_joints(forward(ex.sequence, cfg.hp, params, 8));
  for (std::size_t j = 0; j < 15; ++j) {
    std::istringstream is(rows[j]);
    double x, y, z;
    ASSERT_TRUE(is >> x >> y >> z);
    std::string extra;
    EXPECT_FALSE(is >> extra);
    EXPECT_NEAR(x, joints[j].x + ex.centroid.x, 1e-7);
    EXPECT_NEAR(y, joints[j].y + ex.centroid.y, 1e-7);
    EXPECT_NEAR(z, joints[j].z + ex.centroid.z, 1e-7);
  }
  const std::string svg = read_all(dir_ / "p.svg");
  EXPECT_EQ(svg.rfind("<?xml", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

TEST_F(CliRun, PredictWrongFrameCount) {
  const RunConfig cfg = resolve_config(kToy, {});
  ModelParams params = ModelParams::init(cfg.hp, 4);
  save_checkpoint(params, cfg.hp, dir_ / "m.spik");
  PointCloud pc;
  pc.points = {{0, 0, 1}, {0.1, 0, 1}};
  write_point_file(pc, dir_ / "f0.sppc");
  EXPECT_EQ(spike({"predict", "--config", config(), "--checkpoint", path("m.spik"), "--sequence", path("f0.sppc")}), 3);
  std::ofstream(path("junk.sppc")) << "nope";
  EXPECT_EQ(spike({"predict", "--config", config(), "--checkpoint", path("m.spik"), "--sequence",
                   path("junk.sppc") + "," + path("f0.sppc")}),
            3);
}

TEST_F(CliRun, BenchReportFormat) {
  ASSERT_EQ(spike({"bench", "--config", config(), "--warmup", "2", "--iters", "15"}), 0) << err_.str();
  std::smatch m;
  const std::string text = out_.str();
  ASSERT_TRUE(std::regex_match(text, m, std::regex("median_ms=([0-9.]+) p95_ms=([0-9.]+)\n")));
  EXPECT_LE(std::stod(m[1]), std::stod(m[2]));
}

TEST_F(CliRun, AblationGrid) {
  synth();
  RunConfig cfg = resolve_config(kToy, {{"epochs", "1"}, {"val_fraction", "0.5"}});
  const SequenceDataset data = load_native(dir_ / "data");
  const auto cells = run_ablation(data, cfg);
  ASSERT_EQ(cells.size(), 16u);
  for (const auto& cell : cells) {
    EXPECT_GE(cell.mean_ap, 0.0);
    EXPECT_LE(cell.mean_ap, 100.0);
    EXPECT_GT(cell.peak_bytes, 0u);
    const std::size_t expected_kt = cell.conv_mode == ConvMode::kSpatioTemporal && cell.seq_len >= 3 ? 3 : 1;
    EXPECT_EQ(cell.temporal_kernel, expected_kt);
    EXPECT_NE(cell.line().find("peak_bytes="), std::string::npos);
  }
  EXPECT_EQ(cells.front().seq_len, 1u);
  EXPECT_EQ(cells.back().seq_len, 4u);
}
