#include "posecam/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "posecam/errors.hpp"

namespace posecam::synth {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double clipped_normal(double sigma, double limit, Rng& rng) {
  return std::clamp(std::normal_distribution<double>(0.0, sigma)(rng), -limit, limit);
}

double uniform(double lo, double hi, Rng& rng) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

geom::Quat yaw(double a) { return geom::quat_from_axis_angle(Vec3::UnitZ(), a); }

}  // namespace

TrajectoryKind parse_kind(std::string_view s) {
  if (s == "line") return TrajectoryKind::line;
  if (s == "arc") return TrajectoryKind::arc;
  if (s == "random_walk") return TrajectoryKind::random_walk;
  throw ConfigError("unknown trajectory kind '" + std::string(s) + "'");
}

std::string_view to_string(TrajectoryKind k) {
  switch (k) {
    case TrajectoryKind::line: return "line";
    case TrajectoryKind::arc: return "arc";
    case TrajectoryKind::random_walk: return "random_walk";
  }
  return "?";
}

geom::Trajectory gen_trajectory(const TrajectorySpec& spec, Rng& rng) {
  if (spec.n_frames < 2) throw InvalidInput("trajectory needs at least two frames");
  if (!(spec.step_scale > 0.0)) throw InvalidInput("step_scale must be > 0");
  if (!(spec.fps > 0.0)) throw InvalidInput("fps must be > 0");

  const std::size_t n = spec.n_frames;
  std::vector<geom::TimedPose> poses(n);
  for (std::size_t i = 0; i < n; ++i) poses[i].timestamp = static_cast<double>(i) / spec.fps;

  switch (spec.kind) {
    case TrajectoryKind::line:
      for (std::size_t i = 0; i < n; ++i) poses[i].pose.translation = Vec3(spec.step_scale * static_cast<double>(i), 0, 0);
      break;

    case TrajectoryKind::arc: {
      const double total = spec.arc_total_rad ? *spec.arc_total_rad : uniform(-120 * kDeg, 120 * kDeg, rng);
      const double per_step = total / static_cast<double>(n - 1);
      if (std::abs(per_step) >= kMaxStepRotationDeg * kDeg) throw InvalidInput("arc turns too fast per frame");
      for (std::size_t i = 1; i < n; ++i) {
        const double heading = per_step * static_cast<double>(i - 1);
        poses[i].pose.translation =
            poses[i - 1].pose.translation + spec.step_scale * Vec3(std::cos(heading), std::sin(heading), 0);
        poses[i].pose.rotation = yaw(per_step * static_cast<double>(i));
      }
      break;
    }

    case TrajectoryKind::random_walk: {
      double direction = uniform(-std::numbers::pi, std::numbers::pi, rng);
      for (std::size_t i = 1; i < n; ++i) {
        direction += clipped_normal(10 * kDeg, 25 * kDeg, rng);
        const double len = spec.step_scale * uniform(0.8, 1.2, rng);
        const Vec3 step(len * std::cos(direction), len * std::sin(direction),
                        clipped_normal(0.05 * spec.step_scale, 0.15 * spec.step_scale, rng));
        poses[i].pose.translation = poses[i - 1].pose.translation + step;
        const geom::Quat delta = yaw(clipped_normal(8 * kDeg, 20 * kDeg, rng)) *
                                 geom::quat_from_axis_angle(Vec3::UnitY(), clipped_normal(2 * kDeg, 4 * kDeg, rng)) *
                                 geom::quat_from_axis_angle(Vec3::UnitX(), clipped_normal(2 * kDeg, 4 * kDeg, rng));
        poses[i].pose.rotation = geom::canonicalize_quat((poses[i - 1].pose.rotation * delta).normalized());
      }
      break;
    }
  }
  return geom::Trajectory(std::move(poses));
}

Answer qa_label(const geom::Trajectory& traj) {
  if (traj.size() < 2) throw InvalidInput("direction label needs at least two frames");
  const Vec3 d = relative_pose(traj[0].pose, traj[traj.size() - 1].pose).translation;
  if (std::hypot(d.x(), d.y()) < 1e-9) throw DegenerateTrajectory("no net planar displacement");
  const double scores[kAnswerCount] = {d.x(), -d.x(), d.y(), -d.y()};
  int best = 0;
  for (int a = 1; a < kAnswerCount; ++a) {
    if (scores[a] > scores[best]) best = a;
  }
  return static_cast<Answer>(best);
}

FeatureMaps FeatureMaps::make(std::size_t tokens_per_frame, std::size_t dim, std::uint64_t projection_seed) {
  Rng rng(projection_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  FeatureMaps maps;
  for (std::size_t k = 0; k < tokens_per_frame; ++k) {
    Eigen::MatrixXd a(static_cast<Eigen::Index>(dim), 9);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = normal(rng) / 3.0;
    Eigen::VectorXd b(static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = 0.1 * normal(rng);
    maps.weights.push_back(std::move(a));
    maps.biases.push_back(std::move(b));
  }
  return maps;
}

FrameFeatures render_features(const geom::Trajectory& traj, const FeatureMaps& maps, double fov_h, double fov_w,
                              double noise_sigma, Rng& rng) {
  const std::size_t k_tokens = maps.tokens_per_frame();
  if (k_tokens == 0) throw InvalidInput("feature maps are empty");
  FrameFeatures out{traj.size(), k_tokens,
                    Eigen::MatrixXd(static_cast<Eigen::Index>(traj.size() * k_tokens),
                                    static_cast<Eigen::Index>(maps.dim()))};
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const auto& p = traj[i].pose;
    const geom::Quat q = geom::canonicalize_quat(p.rotation);
    Eigen::Matrix<double, 9, 1> params;
    params << p.translation, q.w, q.x, q.y, q.z, fov_h, fov_w;
    for (std::size_t k = 0; k < k_tokens; ++k) {
      Eigen::VectorXd v = maps.weights[k] * params + maps.biases[k];
      if (noise_sigma > 0.0) {
        for (Eigen::Index c = 0; c < v.size(); ++c) v(c) += noise_sigma * normal(rng);
      }
      out.token(i, k) = v.transpose();
    }
  }
  return out;
}

sampling::CovisGraph covisibility_from_trajectory(const geom::Trajectory& traj) {
  const std::size_t n = traj.size();
  double d_bar = 0.0;
  for (std::size_t i = 1; i < n; ++i) d_bar += (traj[i].pose.translation - traj[i - 1].pose.translation).norm();
  d_bar = n > 1 ? d_bar / static_cast<double>(n - 1) : 1.0;
  const double radius = 4.0 * std::max(d_bar, 1e-9);

  sampling::CovisGraph g{Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n))};
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 ai = geom::quat_to_rotmat(traj[i].pose.rotation).col(0);
    for (std::size_t j = i + 1; j < n; ++j) {
      const Vec3 aj = geom::quat_to_rotmat(traj[j].pose.rotation).col(0);
      const double dist = (traj[i].pose.translation - traj[j].pose.translation).norm();
      const double s = std::exp(-dist / radius) * std::clamp(ai.dot(aj), 0.0, 1.0);
      g.covis(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s;
      g.covis(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = s;
    }
  }
  return g;
}

SynthScene gen_scene(const SceneConfig& config, const FeatureMaps& maps, Rng& rng) {
  SynthScene scene;
  scene.noise_sigma = config.noise_sigma;
  scene.metric = uniform(0.0, 1.0, rng) < config.metric_fraction;
  scene.fov_h = uniform(config.fov_h_min, config.fov_h_max, rng);
  scene.fov_w = 0.75 * scene.fov_h;

  const double world_yaw = uniform(-config.world_yaw_range / 2, config.world_yaw_range / 2, rng);
  const Vec3 offset(uniform(-config.world_offset, config.world_offset, rng),
                    uniform(-config.world_offset, config.world_offset, rng),
                    uniform(-config.world_offset, config.world_offset, rng));
  const double scale =
      scene.metric ? 1.0
                   : std::exp(uniform(-std::log(config.nonmetric_scale_spread), std::log(config.nonmetric_scale_spread), rng));

  for (int attempt = 0;; ++attempt) {
    if (attempt == 100) throw InvalidInput("could not generate a trajectory with net displacement");
    TrajectorySpec spec{config.kind, config.n_frames, config.step_scale, std::nullopt, config.fps};
    geom::Trajectory local = gen_trajectory(spec, rng);
    const Vec3 net = local[local.size() - 1].pose.translation;
    // The direction label needs a clear net displacement.
    if (std::hypot(net.x(), net.y()) < 0.5 * config.step_scale) continue;

    const geom::RigidPose placement{yaw(world_yaw), offset};
    std::vector<geom::TimedPose> world;
    world.reserve(local.size());
    for (const auto& tp : local) {
      geom::RigidPose p = geom::compose(placement, tp.pose);
      p.rotation = geom::canonicalize_quat(p.rotation);
      p.translation *= scale;
      world.push_back({tp.timestamp, p});
    }
    scene.trajectory = geom::Trajectory(std::move(world));
    break;
  }
  scene.qa = qa_label(scene.trajectory);
  scene.features = render_features(scene.trajectory, maps, scene.fov_h, scene.fov_w, config.noise_sigma, rng);
  return scene;
}

void augment_features(FrameFeatures& features, const AugmentConfig& config, Rng& rng) {
  auto& x = features.data;
  if (config.color_jitter > 0.0) {
    const double gain = uniform(1.0 - config.color_jitter, 1.0 + config.color_jitter, rng);
    Eigen::RowVectorXd shift(x.cols());
    for (Eigen::Index c = 0; c < shift.size(); ++c) shift(c) = uniform(-config.color_jitter, config.color_jitter, rng);
    x = (x * gain).rowwise() + shift;
  }
  if (uniform(0.0, 1.0, rng) < config.blur_prob) {
    const auto k = static_cast<Eigen::Index>(features.tokens_per_frame);
    for (std::size_t f = 0; f < features.n_frames; ++f) {
      auto block = x.middleRows(features.row_of(f, 0), k);
      const Eigen::RowVectorXd mean = block.colwise().mean();
      block = (1.0 - config.blur_strength) * block + config.blur_strength * mean.replicate(k, 1);
    }
  }
  if (uniform(0.0, 1.0, rng) < config.grayscale_prob) {
    for (Eigen::Index c = 0; c + 2 < x.cols(); c += 3) {
      const Eigen::VectorXd mean = x.middleCols(c, 3).rowwise().mean();
      x.middleCols(c, 3) = mean.replicate(1, 3);
    }
  }
}

}  // namespace posecam::synth
