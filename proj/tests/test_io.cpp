#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "posecam/errors.hpp"
#include "posecam/io.hpp"
#include "posecam/train.hpp"

using namespace posecam;
using namespace posecam::io;

TEST(Tum, ParsesRecordsAndComments) {
  const std::string text =
      "# timestamp tx ty tz qx qy qz qw\n"
      "\n"
      "1.0 1 2 3 0 0 0 1\n"
      "  1.5\t4 5 6 0 0 0.7071067811865476 0.7071067811865476  \n";
  const auto traj = parse_tum(text);
  ASSERT_EQ(traj.size(), 2u);
  EXPECT_DOUBLE_EQ(traj[0].timestamp, 1.0);
  EXPECT_EQ(traj[0].pose.translation, Vec3(1, 2, 3));
  EXPECT_EQ(traj[0].pose.rotation, geom::Quat::identity());
  EXPECT_DOUBLE_EQ(traj[1].pose.rotation.z, 0.7071067811865476);
  EXPECT_DOUBLE_EQ(traj[1].pose.rotation.w, 0.7071067811865476);
}

TEST(Tum, Errors) {
  try {
    parse_tum_records("0 0 0 0 0 0 0 1\n1 0 0 0 0 0 1\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_tum_records("0 0 0 0 0 0 0 x\n"), ParseError);
  EXPECT_THROW(parse_tum_records("0 0 0 0 0 0 0 nan\n"), ParseError);
  EXPECT_THROW(parse_tum_records("0 0 0 0 0 0 0 0\n"), ParseError);
  EXPECT_THROW(parse_tum("1 0 0 0 0 0 0 1\n1 0 0 0 0 0 0 1\n"), FormatError);
  EXPECT_EQ(parse_tum_records("2 0 0 0 0 0 0 1\n1 0 0 0 0 0 0 1\n").size(), 2u);
  EXPECT_TRUE(parse_tum("# only a header\n").empty());
}

TEST(Tum, WriteRoundTrip) {
  std::vector<geom::TimedPose> poses;
  for (int i = 0; i < 5; ++i) {
    const auto q = geom::quat_from_axis_angle(Vec3(1, 2, 3).normalized(), 0.3 * i);
    poses.push_back({0.1 * i, {q, Vec3(0.123456789 * i, -1.5, 2e-3 * i)}});
  }
  const geom::Trajectory traj(poses);
  const std::string text = write_tum(traj);
  EXPECT_EQ(text.substr(0, text.find('\n')), "# timestamp tx ty tz qx qy qz qw");
  const auto back = parse_tum(text);
  ASSERT_EQ(back.size(), traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) {
    EXPECT_NEAR(back[i].timestamp, traj[i].timestamp, 1e-9);
    EXPECT_LT((back[i].pose.translation - traj[i].pose.translation).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((back[i].pose.rotation.coeffs() - traj[i].pose.rotation.coeffs()).cwiseAbs().maxCoeff(), 1e-9);
  }
  EXPECT_EQ(write_tum(back), text);
  EXPECT_EQ(write_tum(geom::Trajectory{}), "# timestamp tx ty tz qx qy qz qw\n");
  EXPECT_EQ(format_float(0.1), "0.1");
  EXPECT_EQ(format_float(1.0 / 3.0), "0.333333333");
}

TEST(Tum, RecordQuaternionOrder) {
  const TumRecord r{0.0, 1, 2, 3, 0.1, 0.2, 0.3, 0.9};
  const auto p = r.to_pose();
  EXPECT_DOUBLE_EQ(p.pose.rotation.w, 0.9);
  EXPECT_DOUBLE_EQ(p.pose.rotation.x, 0.1);
  const auto back = TumRecord::from_pose(p);
  EXPECT_DOUBLE_EQ(back.qw, 0.9);
  EXPECT_DOUBLE_EQ(back.qz, 0.3);
}

TEST(Covis, CsvParsing) {
  const auto g = parse_covis_csv("1,0.5,0\n0.5,1,0.25\n0,0.25,1\n");
  ASSERT_EQ(g.n_frames(), 3u);
  EXPECT_DOUBLE_EQ(g.covis(1, 2), 0.25);
  EXPECT_THROW(parse_covis_csv("1,0.5\n0.4,1\n"), FormatError);
  EXPECT_THROW(parse_covis_csv("1,0.5,0\n0.5,1\n"), ParseError);
  EXPECT_THROW(parse_covis_csv("1,a\na,1\n"), Error);
}

TEST(FeatureBlob, RoundTripAndValidation) {
  FrameFeatures f{3, 2, Eigen::MatrixXd::Random(6, 5)};
  const std::string blob = encode_feature_blob(f);
  EXPECT_EQ(blob.substr(0, 4), "PCFB");
  EXPECT_EQ(blob.size(), 4u + 4u + 24u + 30u * 8u);
  const auto back = decode_feature_blob(blob);
  EXPECT_EQ(back.n_frames, 3u);
  EXPECT_EQ(back.tokens_per_frame, 2u);
  EXPECT_EQ(back.data, f.data);

  std::string bad_magic = blob;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_feature_blob(bad_magic), FormatError);
  std::string bad_version = blob;
  bad_version[4] = 9;
  EXPECT_THROW(decode_feature_blob(bad_version), FormatError);
  EXPECT_THROW(decode_feature_blob(blob.substr(0, blob.size() - 1)), FormatError);
}

TEST(Config, StrictParsing) {
  const auto c = parse_run_config(
      R"({"variant":"pose_only","seed":5,"epochs":3,"beta":2.5,"net":{"hidden_dim":32},)"
      R"("optimizer":{"head_lr_ratio":10},"sampler":{"preset":"scannet"},)"
      R"("data":{"n_train_scenes":7,"scene":{"kind":"arc","n_frames":30}}})");
  EXPECT_EQ(c.variant, train::Variant::pose_only);
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(c.epochs, 3u);
  EXPECT_DOUBLE_EQ(c.beta, 2.5);
  EXPECT_EQ(c.net.hidden_dim, 32);
  EXPECT_EQ(c.data.n_train_scenes, 7u);
  EXPECT_EQ(c.data.scene.kind, synth::TrajectoryKind::arc);
  EXPECT_EQ(c.dynamic.i_min, 30u);

  EXPECT_THROW(parse_run_config(R"({"epoch":3})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"net":{"hiden_dim":3}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"seed":"five"})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"beta":-1})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"variant":"both"})"), ConfigError);
  EXPECT_THROW(parse_run_config("[1,2]"), ConfigError);
  EXPECT_THROW(parse_run_config("{"), ConfigError);
}

TEST(Config, JsonRoundTrip) {
  train::RunConfig c;
  c.seed = 17;
  c.beta = 3;
  c.net.hidden_dim = 24;
  c.net.n_heads = 3;
  c.data.scene.world_yaw_range = 1.5;
  c.variant = train::Variant::no_pose;
  const auto back = parse_run_config(run_config_to_json(c));
  EXPECT_EQ(run_config_to_json(back), run_config_to_json(c));
  EXPECT_EQ(back.net.n_heads, 3);
  EXPECT_DOUBLE_EQ(back.data.scene.world_yaw_range, 1.5);
}

TEST(SceneDir, RoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "posecam_test_scene";
  std::filesystem::remove_all(dir);
  const auto maps = synth::FeatureMaps::make(2, 8, 1);
  sampling::Rng rng(3);
  synth::SceneConfig sc;
  sc.n_frames = 12;
  auto scene = synth::gen_scene(sc, maps, rng);
  scene.covis = synth::covisibility_from_trajectory(scene.trajectory);
  train::write_scene_dir(dir, scene);
  const auto back = train::read_scene_dir(dir);
  EXPECT_EQ(back.metric, scene.metric);
  EXPECT_EQ(back.qa, scene.qa);
  EXPECT_EQ(back.features.data, scene.features.data);
  EXPECT_NEAR(back.fov_h, scene.fov_h, 1e-9);
  ASSERT_TRUE(back.covis);
  EXPECT_LT((back.covis->covis - scene.covis->covis).cwiseAbs().maxCoeff(), 1e-8);
  ASSERT_EQ(back.trajectory.size(), scene.trajectory.size());
  EXPECT_LT((back.trajectory[5].pose.translation - scene.trajectory[5].pose.translation).norm(), 1e-8);
  EXPECT_THROW(train::read_scene_dir(dir / "missing"), Error);
}
