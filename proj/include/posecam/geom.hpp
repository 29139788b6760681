#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace posecam {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

namespace geom {

/// Quaternion with components stored in (w, x, y, z) order.
struct Quat {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  static Quat identity() { return {}; }

  double squared_norm() const { return w * w + x * x + y * y + z * z; }
  double norm() const;
  Quat conjugate() const { return {w, -x, -y, -z}; }
  Quat normalized() const;
  Eigen::Vector4d coeffs() const { return {w, x, y, z}; }

  Quat operator-() const { return {-w, -x, -y, -z}; }
  Quat operator*(double s) const { return {w * s, x * s, y * s, z * s}; }
  friend bool operator==(const Quat&, const Quat&) = default;
};

/// Hamilton product.
Quat operator*(const Quat& a, const Quat& b);

/// Representative of {q, -q} with w >= 0. For w == 0 the first nonzero of
/// (x, y, z) is made positive. Throws InvalidInput on the zero quaternion.
Quat canonicalize_quat(const Quat& q);

/// Rotation matrix of any nonzero quaternion; the 2/|q|^2 factor makes the
/// result independent of the quaternion's magnitude.
Mat3 quat_to_rotmat(const Quat& q);

/// Unit quaternion (canonical hemisphere) of a rotation matrix.
Quat rotmat_to_quat(const Mat3& r);

Quat quat_from_axis_angle(const Vec3& axis, double angle_rad);

/// Rotation angle of a rotation matrix in radians, in [0, pi].
double rotation_angle(const Mat3& r);

/// Camera-to-world rigid transform.
struct RigidPose {
  Quat rotation;
  Vec3 translation = Vec3::Zero();

  static RigidPose identity() { return {}; }
  Vec3 apply(const Vec3& p) const;
  RigidPose inverse() const;
};

/// a ∘ b: apply b first, then a.
RigidPose compose(const RigidPose& a, const RigidPose& b);

/// a⁻¹ ∘ b.
RigidPose relative_pose(const RigidPose& a, const RigidPose& b);

struct TimedPose {
  double timestamp = 0.0;
  RigidPose pose;
};

/// Timestamped poses with strictly increasing timestamps.
class Trajectory {
 public:
  Trajectory() = default;
  /// Throws FormatError when timestamps are not strictly increasing.
  explicit Trajectory(std::vector<TimedPose> poses);

  std::size_t size() const { return poses_.size(); }
  bool empty() const { return poses_.empty(); }
  const TimedPose& operator[](std::size_t i) const { return poses_[i]; }
  const std::vector<TimedPose>& poses() const { return poses_; }
  auto begin() const { return poses_.begin(); }
  auto end() const { return poses_.end(); }

  std::vector<Vec3> translations() const;

 private:
  std::vector<TimedPose> poses_;
};

/// Re-expresses every pose in the coordinate frame of the first camera.
/// Output rotations are canonicalized. Throws InvalidInput when empty.
Trajectory to_first_frame_coords(const Trajectory& traj);

/// Subsequence at the given frame indices (must be strictly increasing).
Trajectory select_frames(const Trajectory& traj, std::span<const std::size_t> indices);

/// Per-frame camera target [t, q, fov_h, fov_w]; FoV in radians.
struct PoseEncoding {
  Vec3 t = Vec3::Zero();
  Quat q;
  double fov_h = 0.0;
  double fov_w = 0.0;

  static constexpr std::size_t kDim = 9;
  std::array<double, kDim> to_array() const;
  static PoseEncoding from_array(std::span<const double> v);
};

/// Pose encodings of a trajectory in first-frame coordinates with canonical
/// quaternions and a shared field of view.
std::vector<PoseEncoding> encode_trajectory(const Trajectory& traj, double fov_h,
                                            double fov_w);

}  // namespace geom
}  // namespace posecam
