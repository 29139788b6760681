#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "posecam/cli.hpp"
#include "posecam/io.hpp"
#include "posecam/pipeline.hpp"

using namespace posecam;
using posecam::cli::cli_main;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli_main(args, out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("posecam_cli_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

const char* kTraj =
    "0 0 0 0 0 0 0 1\n"
    "1 1 0 0 0 0 0 1\n"
    "2 2 1 0 0 0 0.38268343 0.92387953\n"
    "3 2 2 0.5 0 0 0.70710678 0.70710678\n";

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override { unsetenv("POSECAM_SEED"); }
  void TearDown() override { unsetenv("POSECAM_SEED"); }
};

}  // namespace

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run({}).code, cli::kExitUsage);
  EXPECT_EQ(run({"nonsense"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"sample", "--frames", "10"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"sample", "--frames", "10", "--n", "4", "--mode", "bogus"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"sample", "--frames", "ten", "--n", "4"}).code, cli::kExitUsage);
}

TEST_F(CliTest, SampleUniform) {
  const auto r = run({"sample", "--mode", "uniform", "--frames", "10", "--n", "4"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "0,3,6,9\n");
}

TEST_F(CliTest, SampleSeedFromEnvironment) {
  const std::vector<std::string> args{"sample", "--mode", "dynamic", "--frames", "500", "--n", "8"};
  setenv("POSECAM_SEED", "42", 1);
  const auto a = run(args);
  const auto b = run(args);
  EXPECT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  auto explicit_seed = args;
  explicit_seed.insert(explicit_seed.end(), {"--seed", "42"});
  EXPECT_EQ(run(explicit_seed).out, a.out);
  setenv("POSECAM_SEED", "43", 1);
  EXPECT_NE(run(args).out, a.out);
  setenv("POSECAM_SEED", "forty", 1);
  EXPECT_EQ(run(args).code, cli::kExitUsage);
}

TEST_F(CliTest, SampleDataErrors) {
  EXPECT_EQ(run({"sample", "--mode", "uniform", "--frames", "3", "--n", "5"}).code, cli::kExitData);
  const auto dir = temp_dir("covis");
  io::write_file(dir / "c.csv", "1,0\n0,1\n");
  EXPECT_EQ(run({"sample", "--mode", "covis", "--frames", "2", "--n", "2", "--covis", (dir / "c.csv").string()}).code,
            cli::kExitData);
  EXPECT_EQ(run({"sample", "--mode", "covis", "--frames", "2", "--n", "2", "--covis", (dir / "none.csv").string()}).code,
            cli::kExitData);
}

TEST_F(CliTest, EvalTrajIdentical) {
  const auto dir = temp_dir("eval");
  io::write_file(dir / "gt.txt", kTraj);
  const auto r = run({"eval-traj", "--pred", (dir / "gt.txt").string(), "--gt", (dir / "gt.txt").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string header, row;
  std::getline(lines, header);
  std::getline(lines, row);
  EXPECT_EQ(header, "sequence,ate,rpe_trans,rpe_rot");
  std::istringstream cols(row);
  std::string name, ate;
  std::getline(cols, name, ',');
  std::getline(cols, ate, ',');
  EXPECT_LT(std::stod(ate), 1e-9);
}

TEST_F(CliTest, EvalTrajDataErrors) {
  const auto dir = temp_dir("evalbad");
  io::write_file(dir / "gt.txt", kTraj);
  io::write_file(dir / "short.txt", "0 0 0 0 0 0 0 1\n1 1 0 0 0 0 0 1\n");
  io::write_file(dir / "bad.txt", "0 0 0 0 0 0 1\n");
  const auto gt = (dir / "gt.txt").string();
  EXPECT_EQ(run({"eval-traj", "--pred", (dir / "short.txt").string(), "--gt", gt}).code, cli::kExitData);
  EXPECT_EQ(run({"eval-traj", "--pred", (dir / "bad.txt").string(), "--gt", gt}).code, cli::kExitData);
  EXPECT_EQ(run({"eval-traj", "--pred", (dir / "missing.txt").string(), "--gt", gt}).code, cli::kExitData);
}

TEST_F(CliTest, AlignWritesAlignedTrajectory) {
  const auto dir = temp_dir("align");
  io::write_file(dir / "gt.txt", kTraj);
  // Prediction is the ground truth at twice the scale.
  auto traj = io::parse_tum(kTraj);
  std::vector<geom::TimedPose> scaled = traj.poses();
  for (auto& p : scaled) p.pose.translation *= 2.0;
  io::write_file(dir / "pred.txt", io::write_tum(geom::Trajectory(scaled)));
  const auto r = run({"align", "--pred", (dir / "pred.txt").string(), "--gt", (dir / "gt.txt").string(), "--out",
                      (dir / "aligned.txt").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("\"scale\""), std::string::npos);
  const auto aligned = io::parse_tum(io::read_file(dir / "aligned.txt"));
  for (std::size_t i = 0; i < aligned.size(); ++i)
    EXPECT_LT((aligned[i].pose.translation - traj[i].pose.translation).norm(), 1e-6);
}

TEST_F(CliTest, SceneCutOnFrames) {
  const auto dir = temp_dir("frames");
  for (int i = 0; i < 100; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "f%03d.ppm", i);
    const bool blue = i >= 50;
    pipeline::write_ppm(dir / name, pipeline::Image::solid(8, 6, blue ? 0 : 255, 0, blue ? 255 : 0));
  }
  const auto r = run({"scene-cut", "--frames-dir", dir.string(), "--fps", "25"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("\"cuts\":[50]"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("\"accepted\":false"), std::string::npos) << r.out;
  EXPECT_EQ(run({"scene-cut", "--frames-dir", (dir / "nope").string()}).code, cli::kExitData);
}

TEST_F(CliTest, GenSynthThenTrain) {
  const auto dir = temp_dir("gen");
  const auto g = run({"gen-synth", "--out", (dir / "data").string(), "--n-scenes", "3", "--frames", "20", "--seed", "1",
                      "--covis"});
  ASSERT_EQ(g.code, 0) << g.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "data" / "manifest.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "data" / "scene_0000" / "covis.csv"));

  const std::string cfg = R"({"epochs":1,"batch_size":2,"net":{"hidden_dim":16,"n_layers":1,"n_heads":2,)"
                          R"("head_layers":1,"visual_tokens_per_frame":2},"data":{"n_train_scenes":3,)"
                          R"("n_eval_scenes":2,"frames_per_sample":4,"scene":{"n_frames":20}},)"
                          R"("sampler":{"i_min":1,"i_max":3}})";
  io::write_file(dir / "cfg.json", cfg);
  const std::vector<std::string> args{"train-synth", "--config", (dir / "cfg.json").string(), "--seed", "3", "--out",
                                      (dir / "m1.csv").string(), "--checkpoint", (dir / "ck.json").string()};
  ASSERT_EQ(run(args).code, 0);
  auto again = args;
  again[6] = (dir / "m2.csv").string();
  ASSERT_EQ(run(again).code, 0);
  EXPECT_EQ(io::read_file(dir / "m1.csv"), io::read_file(dir / "m2.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "ck.json"));

  io::write_file(dir / "bad.json", R"({"epochz":1})");
  EXPECT_EQ(run({"train-synth", "--config", (dir / "bad.json").string()}).code, cli::kExitUsage);
}

TEST_F(CliTest, GradCheckPasses) {
  const auto dir = temp_dir("gc");
  io::write_file(dir / "cfg.json", R"({"net":{"hidden_dim":16,"n_layers":1,"n_heads":2,"head_layers":1}})");
  const auto r = run({"grad-check", "--config", (dir / "cfg.json").string(), "--seed", "2"});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_NE(r.out.find("PASS"), std::string::npos);
}
