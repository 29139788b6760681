#include "posecam/loss.hpp"

#include <cmath>
#include <vector>

#include "posecam/errors.hpp"

namespace posecam::loss {

void LossWeights::validate() const {
  for (double v : {w_translation, w_rotation, w_fov, lambda_pose}) {
    if (!std::isfinite(v) || v < 0.0) throw ConfigError("loss weights must be finite and >= 0");
  }
}

double mean_consecutive_distance(std::span<const Vec3> positions) {
  if (positions.size() < 2) throw InvalidInput("mean step length needs at least two frames");
  double sum = 0.0;
  for (std::size_t i = 1; i < positions.size(); ++i) sum += (positions[i] - positions[i - 1]).norm();
  const double d_bar = sum / static_cast<double>(positions.size() - 1);
  if (d_bar < kStaticEpsilon) throw DegenerateTrajectory("static ground-truth trajectory");
  return d_bar;
}

double mean_consecutive_distance(const geom::Trajectory& gt) {
  const auto t = gt.translations();
  return mean_consecutive_distance(t);
}

ScaleEstimate ls_scale(std::span<const Vec3> pred_t, std::span<const Vec3> gt_t) {
  if (pred_t.size() != gt_t.size() || pred_t.empty()) {
    throw InvalidInput("scale fit needs equal, nonempty translation lists");
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < pred_t.size(); ++i) {
    num += pred_t[i].dot(gt_t[i]);
    den += pred_t[i].squaredNorm();
  }
  if (den < kScaleEpsilon) return {1.0, true};
  return {num / den, false};
}

PoseLossBreakdown pose_loss(std::span<const geom::PoseEncoding> pred,
                            std::span<const geom::PoseEncoding> gt, const LossWeights& weights,
                            bool metric, std::optional<double> pinned_scale) {
  if (pred.size() != gt.size()) throw InvalidInput("pose loss: length mismatch");
  if (gt.size() < 2) throw InvalidInput("pose loss needs at least two frames");

  std::vector<Vec3> pred_t;
  std::vector<Vec3> gt_t;
  pred_t.reserve(pred.size());
  gt_t.reserve(gt.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    pred_t.push_back(pred[i].t);
    gt_t.push_back(gt[i].t);
  }

  PoseLossBreakdown out;
  out.d_bar = mean_consecutive_distance(gt_t);
  if (metric) {
    out.s_star = 1.0;
  } else if (pinned_scale) {
    out.s_star = *pinned_scale;
  } else {
    const ScaleEstimate s = ls_scale(pred_t, gt_t);
    out.s_star = s.value;
    out.scale_degenerate = s.degenerate;
  }

  const double n = static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    out.translation_term += (out.s_star * pred_t[i] - gt_t[i]).lpNorm<1>();
    out.rotation_term +=
        (pred[i].q.coeffs() - geom::canonicalize_quat(gt[i].q).coeffs()).lpNorm<1>();
    out.fov_term += std::abs(pred[i].fov_h - gt[i].fov_h) + std::abs(pred[i].fov_w - gt[i].fov_w);
  }
  out.translation_term /= n * out.d_bar;
  out.rotation_term /= n;
  out.fov_term /= n;
  out.total = weights.w_translation * out.translation_term + weights.w_rotation * out.rotation_term +
              weights.w_fov * out.fov_term;
  return out;
}

double total_loss(double ntp, double pose, const LossWeights& weights) {
  return ntp + weights.lambda_pose * pose;
}

}  // namespace posecam::loss
