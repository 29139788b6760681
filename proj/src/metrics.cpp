#include "posecam/metrics.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "posecam/errors.hpp"

namespace posecam::metrics {

namespace {

// Relative floor on the second singular value of the cross-covariance.
constexpr double kRankTolerance = 1e-12;

void check_lengths(const geom::Trajectory& pred, const geom::Trajectory& gt) {
  if (pred.size() != gt.size()) throw InvalidInput("pred and gt frame counts differ");
}

}  // namespace

geom::Trajectory Sim3Transform::apply(const geom::Trajectory& traj) const {
  const geom::Quat q = geom::rotmat_to_quat(rotation);
  std::vector<geom::TimedPose> out;
  out.reserve(traj.size());
  for (const auto& tp : traj) {
    geom::RigidPose p{q * tp.pose.rotation, apply(tp.pose.translation)};
    p.rotation = geom::canonicalize_quat(p.rotation);
    out.push_back({tp.timestamp, p});
  }
  return geom::Trajectory(std::move(out));
}

Sim3Transform umeyama_sim3(std::span<const Vec3> src, std::span<const Vec3> dst) {
  if (src.size() != dst.size()) throw InvalidInput("alignment: point counts differ");
  if (src.size() < 3) throw AlignmentDegenerate("alignment needs at least three points");

  const double n = static_cast<double>(src.size());
  Vec3 mu_src = Vec3::Zero();
  Vec3 mu_dst = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    mu_src += src[i];
    mu_dst += dst[i];
  }
  mu_src /= n;
  mu_dst /= n;

  Mat3 cov = Mat3::Zero();
  double var_src = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Vec3 a = src[i] - mu_src;
    cov += (dst[i] - mu_dst) * a.transpose();
    var_src += a.squaredNorm();
  }
  cov /= n;
  var_src /= n;

  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 d = svd.singularValues();
  if (var_src <= 0.0 || !(d(1) > kRankTolerance * d(0))) {
    throw AlignmentDegenerate("rank-deficient point configuration");
  }

  Vec3 s_diag(1.0, 1.0, 1.0);
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) s_diag(2) = -1.0;

  Sim3Transform out;
  out.rotation = svd.matrixU() * s_diag.asDiagonal() * svd.matrixV().transpose();
  out.scale = d.dot(s_diag) / var_src;
  out.translation = mu_dst - out.scale * out.rotation * mu_src;
  return out;
}

double ate(const geom::Trajectory& pred, const geom::Trajectory& gt) {
  check_lengths(pred, gt);
  const auto p = pred.translations();
  const auto g = gt.translations();
  const Sim3Transform t = umeyama_sim3(p, g);
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += (t.apply(p[i]) - g[i]).squaredNorm();
  return std::sqrt(sum / static_cast<double>(p.size()));
}

RpeResult rpe(const geom::Trajectory& pred, const geom::Trajectory& gt, std::size_t delta,
              Aggregation rot_aggregation) {
  check_lengths(pred, gt);
  if (delta == 0) throw InvalidInput("RPE step must be >= 1");
  if (gt.size() < delta + 1) throw InvalidInput("trajectory too short for RPE step");

  const double scale = umeyama_sim3(pred.translations(), gt.translations()).scale;

  double trans_sq = 0.0;
  double rot_acc = 0.0;
  const std::size_t pairs = gt.size() - delta;
  for (std::size_t i = 0; i < pairs; ++i) {
    geom::RigidPose a = pred[i].pose;
    geom::RigidPose b = pred[i + delta].pose;
    a.translation *= scale;
    b.translation *= scale;
    const geom::RigidPose rel_pred = geom::relative_pose(a, b);
    const geom::RigidPose rel_gt = geom::relative_pose(gt[i].pose, gt[i + delta].pose);
    const geom::RigidPose err = geom::relative_pose(rel_gt, rel_pred);
    trans_sq += err.translation.squaredNorm();
    const double angle_deg =
        geom::rotation_angle(geom::quat_to_rotmat(err.rotation)) * 180.0 / std::numbers::pi;
    rot_acc += rot_aggregation == Aggregation::rmse ? angle_deg * angle_deg : angle_deg;
  }
  const double m = static_cast<double>(pairs);
  RpeResult out;
  out.trans = std::sqrt(trans_sq / m);
  out.rot_deg = rot_aggregation == Aggregation::rmse ? std::sqrt(rot_acc / m) : rot_acc / m;
  return out;
}

TrajMetrics evaluate(const geom::Trajectory& pred, const geom::Trajectory& gt, std::size_t delta,
                     Aggregation rot_aggregation) {
  const RpeResult r = rpe(pred, gt, delta, rot_aggregation);
  return {ate(pred, gt), r.trans, r.rot_deg};
}

std::vector<std::size_t> eval_frame_protocol(std::size_t total_frames, EvalProtocol protocol) {
  std::vector<std::size_t> out;
  switch (protocol) {
    case EvalProtocol::scannet:
    case EvalProtocol::tum_dynamic:
      for (std::size_t i = 0; i < 90 && i < total_frames; i += 3) out.push_back(i);
      break;
    case EvalProtocol::sintel:
    case EvalProtocol::none:
      for (std::size_t i = 0; i < total_frames; ++i) out.push_back(i);
      break;
  }
  return out;
}

}  // namespace posecam::metrics
