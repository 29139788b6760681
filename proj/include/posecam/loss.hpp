#pragma once

#include <optional>
#include <span>

#include "posecam/geom.hpp"

namespace posecam::loss {

/// Threshold below which the mean step length counts as a static trajectory.
inline constexpr double kStaticEpsilon = 1e-8;
/// Threshold on sum |pred_t|^2 below which the least-squares scale falls back to 1.
inline constexpr double kScaleEpsilon = 1e-12;

struct LossWeights {
  double w_translation = 1.0;
  double w_rotation = 1.0;
  double w_fov = 1.0;
  double lambda_pose = 0.2;

  /// Throws ConfigError on negative or non-finite entries.
  void validate() const;
};

/// Breakdown of the pose loss. The three terms are unweighted frame means:
/// total = w_T * translation_term + w_R * rotation_term + w_f * fov_term.
struct PoseLossBreakdown {
  double total = 0.0;
  double translation_term = 0.0;
  double rotation_term = 0.0;
  double fov_term = 0.0;
  double d_bar = 0.0;
  double s_star = 1.0;
  bool scale_degenerate = false;
};

/// Mean Euclidean distance between consecutive positions. Throws InvalidInput
/// for fewer than two positions and DegenerateTrajectory for static ones.
double mean_consecutive_distance(std::span<const Vec3> positions);
double mean_consecutive_distance(const geom::Trajectory& gt);

struct ScaleEstimate {
  double value = 1.0;
  bool degenerate = false;
};

/// Closed-form s minimizing sum |s * pred_i - gt_i|^2. Treated as a constant
/// by every differentiable caller.
ScaleEstimate ls_scale(std::span<const Vec3> pred_t, std::span<const Vec3> gt_t);

/// Weighted L1 pose loss with trajectory-length normalization. Ground-truth
/// quaternions are canonicalized before comparison; predicted quaternions are
/// used as-is. When `metric` is false the predicted translations are rescaled
/// by the least-squares scale, or by `pinned_scale` when given.
PoseLossBreakdown pose_loss(std::span<const geom::PoseEncoding> pred,
                            std::span<const geom::PoseEncoding> gt, const LossWeights& weights,
                            bool metric, std::optional<double> pinned_scale = std::nullopt);

/// ntp + lambda_pose * pose.
double total_loss(double ntp, double pose, const LossWeights& weights);

}  // namespace posecam::loss
