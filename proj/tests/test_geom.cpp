#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "posecam/errors.hpp"
#include "posecam/geom.hpp"

using namespace posecam;
using geom::Quat;

namespace {

geom::RigidPose random_pose(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return {oracle::random_quat(rng), Vec3(n(rng), n(rng), n(rng))};
}

void expect_quat_eq(const Quat& a, const Quat& b) {
  EXPECT_EQ(a.w, b.w);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.y, b.y);
  EXPECT_EQ(a.z, b.z);
}

}  // namespace

TEST(Canonicalize, FlipsNegativeScalar) {
  expect_quat_eq(geom::canonicalize_quat({-0.5, 0.5, 0.5, 0.5}), {0.5, -0.5, -0.5, -0.5});
  expect_quat_eq(geom::canonicalize_quat({1, 0, 0, 0}), {1, 0, 0, 0});
}

TEST(Canonicalize, ZeroScalarTieRule) {
  expect_quat_eq(geom::canonicalize_quat({0, 0, 0, -1}), {0, 0, 0, 1});
  expect_quat_eq(geom::canonicalize_quat({0, 0, -1, 1}), {0, 0, 1, -1});
  expect_quat_eq(geom::canonicalize_quat({0, -1, 0, 0}), {0, 1, 0, 0});
}

TEST(Canonicalize, RejectsZero) { EXPECT_THROW(geom::canonicalize_quat({0, 0, 0, 0}), InvalidInput); }

TEST(Canonicalize, IdempotentAndRotationPreserving) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const Quat q{n(rng), n(rng), n(rng), n(rng)};
    const Quat c = geom::canonicalize_quat(q);
    expect_quat_eq(geom::canonicalize_quat(c), c);
    EXPECT_GE(c.w, 0.0);
    EXPECT_LT((geom::quat_to_rotmat(c) - geom::quat_to_rotmat(q)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(QuatToRotmat, Examples) {
  EXPECT_TRUE(geom::quat_to_rotmat({1, 0, 0, 0}).isApprox(Mat3::Identity(), 0.0));
  EXPECT_LT((geom::quat_to_rotmat({2, 0, 0, 0}) - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-15);
  const Mat3 expected = oracle::axis_angle(Vec3::UnitZ(), M_PI);
  EXPECT_LT((geom::quat_to_rotmat({0, 0, 0, 1}) - expected).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((expected - Eigen::Vector3d(-1, -1, 1).asDiagonal().toDenseMatrix()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(QuatToRotmat, MatchesAxisAngleOracle) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ang(-M_PI, M_PI);
  for (int i = 0; i < 500; ++i) {
    const Vec3 axis = oracle::random_unit(rng);
    const double a = ang(rng);
    const Mat3 r = geom::quat_to_rotmat(geom::quat_from_axis_angle(axis, a));
    EXPECT_LT((r - oracle::axis_angle(axis, a)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(QuatToRotmat, ScaleInvariant) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> mag(0.01, 100.0);
  for (int i = 0; i < 1000; ++i) {
    const Quat q{n(rng), n(rng), n(rng), n(rng)};
    const double c = (i % 2 ? -1.0 : 1.0) * mag(rng);
    EXPECT_LT((geom::quat_to_rotmat(q * c) - geom::quat_to_rotmat(q)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(RotmatToQuat, RoundTrip) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 500; ++i) {
    const Quat q = geom::canonicalize_quat(oracle::random_quat(rng));
    const Quat back = geom::rotmat_to_quat(geom::quat_to_rotmat(q));
    EXPECT_NEAR(back.w, q.w, 1e-12);
    EXPECT_NEAR(back.x, q.x, 1e-12);
    EXPECT_NEAR(back.y, q.y, 1e-12);
    EXPECT_NEAR(back.z, q.z, 1e-12);
  }
}

TEST(RotationAngle, ClampedAcos) {
  EXPECT_EQ(geom::rotation_angle(Mat3::Identity()), 0.0);
  EXPECT_NEAR(geom::rotation_angle(oracle::axis_angle(Vec3::UnitX(), 0.3)), 0.3, 1e-12);
  EXPECT_NEAR(geom::rotation_angle(oracle::axis_angle(Vec3::UnitY(), M_PI)), M_PI, 1e-7);
}

TEST(RelativePose, Examples) {
  std::mt19937_64 rng(1);
  const auto p = random_pose(rng);
  const auto id = geom::relative_pose(p, p);
  EXPECT_LT((geom::quat_to_rotmat(id.rotation) - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(id.translation.norm(), 1e-12);

  const auto b = random_pose(rng);
  const auto same = geom::relative_pose(geom::RigidPose::identity(), b);
  EXPECT_LT((same.translation - b.translation).norm(), 1e-15);

  const geom::RigidPose a1{{}, Vec3(1, 0, 0)}, b1{{}, Vec3(1, 1, 0)};
  EXPECT_LT((geom::relative_pose(a1, b1).translation - Vec3(0, 1, 0)).norm(), 1e-15);
}

TEST(RelativePose, ComposeRecovers) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 1000; ++i) {
    const auto a = random_pose(rng);
    const auto b = random_pose(rng);
    const auto back = geom::compose(a, geom::relative_pose(a, b));
    EXPECT_LT((back.translation - b.translation).norm(), 1e-12);
    EXPECT_LT((geom::quat_to_rotmat(back.rotation) - geom::quat_to_rotmat(b.rotation)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(RigidPose, ApplyMatchesMatrixForm) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 100; ++i) {
    const auto p = random_pose(rng);
    const Vec3 x = oracle::random_unit(rng);
    EXPECT_LT((p.apply(x) - (geom::quat_to_rotmat(p.rotation) * x + p.translation)).norm(), 1e-14);
    EXPECT_LT((p.inverse().apply(p.apply(x)) - x).norm(), 1e-12);
  }
}

TEST(Trajectory, RejectsNonIncreasingTimestamps) {
  EXPECT_THROW(geom::Trajectory({{0.0, {}}, {0.0, {}}}), FormatError);
  EXPECT_THROW(geom::Trajectory({{1.0, {}}, {0.5, {}}}), FormatError);
  EXPECT_NO_THROW(geom::Trajectory({{0.0, {}}, {0.1, {}}}));
}

TEST(FirstFrame, Examples) {
  const geom::Trajectory a({{0.0, {}}, {1.0, {{}, Vec3(1, 2, 3)}}});
  const auto out = geom::to_first_frame_coords(a);
  EXPECT_EQ(out[1].pose.translation, Vec3(1, 2, 3));

  std::mt19937_64 rng(6);
  const auto p = random_pose(rng);
  const auto same = geom::to_first_frame_coords(geom::Trajectory({{0.0, p}, {1.0, p}}));
  for (const auto& tp : same) {
    EXPECT_LT(tp.pose.translation.norm(), 1e-12);
    EXPECT_LT((geom::quat_to_rotmat(tp.pose.rotation) - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
  }

  const geom::Trajectory c({{0.0, {{}, Vec3(1, 0, 0)}}, {1.0, {{}, Vec3(3, 0, 0)}}});
  const auto cc = geom::to_first_frame_coords(c);
  EXPECT_EQ(cc[0].pose.translation, Vec3(0, 0, 0));
  EXPECT_EQ(cc[1].pose.translation, Vec3(2, 0, 0));

  EXPECT_THROW(geom::to_first_frame_coords(geom::Trajectory()), InvalidInput);
}

TEST(FirstFrame, Idempotent) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<geom::TimedPose> poses;
    for (int i = 0; i < 6; ++i) poses.push_back({static_cast<double>(i), random_pose(rng)});
    const auto once = geom::to_first_frame_coords(geom::Trajectory(poses));
    const auto twice = geom::to_first_frame_coords(once);
    for (std::size_t i = 0; i < once.size(); ++i) {
      EXPECT_LT((once[i].pose.translation - twice[i].pose.translation).norm(), 1e-12);
      EXPECT_LT((once[i].pose.rotation.coeffs() - twice[i].pose.rotation.coeffs()).norm(), 1e-12);
      EXPECT_GE(once[i].pose.rotation.w, 0.0);
    }
  }
}

TEST(PoseEncoding, ArrayRoundTrip) {
  geom::PoseEncoding e{Vec3(1, 2, 3), {0.5, 0.5, -0.5, 0.5}, 1.1, 0.8};
  const auto arr = e.to_array();
  EXPECT_EQ(arr, (std::array<double, 9>{1, 2, 3, 0.5, 0.5, -0.5, 0.5, 1.1, 0.8}));
  const auto back = geom::PoseEncoding::from_array(arr);
  EXPECT_EQ(back.to_array(), arr);
}

TEST(PoseEncoding, EncodeTrajectoryUsesFirstFrame) {
  const geom::Trajectory t({{0.0, {{}, Vec3(1, 0, 0)}}, {1.0, {{}, Vec3(3, 0, 0)}}});
  const auto enc = geom::encode_trajectory(t, 1.0, 0.75);
  ASSERT_EQ(enc.size(), 2u);
  EXPECT_EQ(enc[1].t, Vec3(2, 0, 0));
  EXPECT_EQ(enc[1].fov_h, 1.0);
  EXPECT_EQ(enc[1].fov_w, 0.75);
}
