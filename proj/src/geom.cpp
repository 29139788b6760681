#include "posecam/geom.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Geometry>

#include "posecam/errors.hpp"

namespace posecam::geom {

double Quat::norm() const { return std::sqrt(squared_norm()); }

Quat Quat::normalized() const {
  const double n = norm();
  if (n == 0.0) throw InvalidInput("cannot normalize the zero quaternion");
  return {w / n, x / n, y / n, z / n};
}

Quat operator*(const Quat& a, const Quat& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

Quat canonicalize_quat(const Quat& q) {
  if (q.squared_norm() == 0.0) throw InvalidInput("zero quaternion");
  if (q.w > 0.0) return q;
  if (q.w < 0.0) return -q;
  for (double c : {q.x, q.y, q.z}) {
    if (c > 0.0) return q;
    if (c < 0.0) return -q;
  }
  return q;  // unreachable: norm is nonzero
}

Mat3 quat_to_rotmat(const Quat& q) {
  const double n2 = q.squared_norm();
  if (n2 == 0.0) throw InvalidInput("zero quaternion");
  const double s = 2.0 / n2;
  const auto [w, x, y, z] = q;
  Mat3 r;
  r << 1.0 - s * (y * y + z * z), s * (x * y - w * z), s * (x * z + w * y),
      s * (x * y + w * z), 1.0 - s * (x * x + z * z), s * (y * z - w * x),
      s * (x * z - w * y), s * (y * z + w * x), 1.0 - s * (x * x + y * y);
  return r;
}

Quat rotmat_to_quat(const Mat3& r) {
  const Eigen::Quaterniond e(r);
  return canonicalize_quat(Quat{e.w(), e.x(), e.y(), e.z()}.normalized());
}

Quat quat_from_axis_angle(const Vec3& axis, double angle_rad) {
  const double n = axis.norm();
  if (n == 0.0) throw InvalidInput("zero rotation axis");
  const Vec3 u = axis / n;
  const double s = std::sin(angle_rad / 2.0);
  return {std::cos(angle_rad / 2.0), u.x() * s, u.y() * s, u.z() * s};
}

double rotation_angle(const Mat3& r) {
  const double c = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c);
}

Vec3 RigidPose::apply(const Vec3& p) const {
  return quat_to_rotmat(rotation) * p + translation;
}

RigidPose RigidPose::inverse() const {
  const Quat inv = rotation.conjugate() * (1.0 / rotation.squared_norm());
  return {inv, -(quat_to_rotmat(inv) * translation)};
}

RigidPose compose(const RigidPose& a, const RigidPose& b) {
  return {a.rotation * b.rotation, quat_to_rotmat(a.rotation) * b.translation + a.translation};
}

RigidPose relative_pose(const RigidPose& a, const RigidPose& b) {
  return compose(a.inverse(), b);
}

Trajectory::Trajectory(std::vector<TimedPose> poses) : poses_(std::move(poses)) {
  for (std::size_t i = 1; i < poses_.size(); ++i) {
    if (!(poses_[i].timestamp > poses_[i - 1].timestamp)) {
      throw FormatError("timestamps not strictly increasing at frame " + std::to_string(i));
    }
  }
}

std::vector<Vec3> Trajectory::translations() const {
  std::vector<Vec3> out;
  out.reserve(poses_.size());
  for (const auto& p : poses_) out.push_back(p.pose.translation);
  return out;
}

Trajectory to_first_frame_coords(const Trajectory& traj) {
  if (traj.empty()) throw InvalidInput("empty trajectory");
  const RigidPose first_inv = traj[0].pose.inverse();
  std::vector<TimedPose> out;
  out.reserve(traj.size());
  for (const auto& tp : traj) {
    RigidPose p = compose(first_inv, tp.pose);
    p.rotation = canonicalize_quat(p.rotation);
    out.push_back({tp.timestamp, p});
  }
  return Trajectory(std::move(out));
}

Trajectory select_frames(const Trajectory& traj, std::span<const std::size_t> indices) {
  std::vector<TimedPose> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= traj.size()) throw InvalidInput("frame index out of range");
    out.push_back(traj[i]);
  }
  return Trajectory(std::move(out));
}

std::array<double, PoseEncoding::kDim> PoseEncoding::to_array() const {
  return {t.x(), t.y(), t.z(), q.w, q.x, q.y, q.z, fov_h, fov_w};
}

PoseEncoding PoseEncoding::from_array(std::span<const double> v) {
  if (v.size() != kDim) throw InvalidInput("pose encoding needs 9 values");
  return {Vec3(v[0], v[1], v[2]), Quat{v[3], v[4], v[5], v[6]}, v[7], v[8]};
}

std::vector<PoseEncoding> encode_trajectory(const Trajectory& traj, double fov_h,
                                            double fov_w) {
  const Trajectory rel = to_first_frame_coords(traj);
  std::vector<PoseEncoding> out;
  out.reserve(rel.size());
  for (const auto& tp : rel) {
    out.push_back({tp.pose.translation, canonicalize_quat(tp.pose.rotation), fov_h, fov_w});
  }
  return out;
}

}  // namespace posecam::geom
