#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "posecam/geom.hpp"

namespace posecam::metrics {

/// x -> scale * rotation * x + translation.
struct Sim3Transform {
  double scale = 1.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }
  /// Applies the transform to every pose of a camera-to-world trajectory.
  geom::Trajectory apply(const geom::Trajectory& traj) const;
};

/// Least-squares similarity transform mapping src onto dst (Umeyama).
/// Throws AlignmentDegenerate for fewer than three points or rank-deficient
/// (collinear) configurations.
Sim3Transform umeyama_sim3(std::span<const Vec3> src, std::span<const Vec3> dst);

/// RMSE of translation residuals after Sim(3) alignment of pred onto gt.
double ate(const geom::Trajectory& pred, const geom::Trajectory& gt);

enum class Aggregation { rmse, mean };

struct RpeResult {
  double trans = 0.0;
  double rot_deg = 0.0;
};

/// Relative pose error over frame pairs (i, i + delta). The prediction is
/// first rescaled by the ATE Sim(3) scale.
RpeResult rpe(const geom::Trajectory& pred, const geom::Trajectory& gt, std::size_t delta = 1,
              Aggregation rot_aggregation = Aggregation::rmse);

struct TrajMetrics {
  double ate = 0.0;
  double rpe_trans = 0.0;
  double rpe_rot = 0.0;
};

TrajMetrics evaluate(const geom::Trajectory& pred, const geom::Trajectory& gt,
                     std::size_t delta = 1, Aggregation rot_aggregation = Aggregation::rmse);

enum class EvalProtocol { scannet, tum_dynamic, sintel, none };

/// Frame indices kept by a benchmark protocol: ScanNet and TUM-dynamic use
/// the first 90 frames at stride 3; Sintel and `none` keep every frame.
std::vector<std::size_t> eval_frame_protocol(std::size_t total_frames, EvalProtocol protocol);

}  // namespace posecam::metrics
