#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "posecam/features.hpp"
#include "posecam/geom.hpp"
#include "posecam/sampling.hpp"

namespace posecam::synth {

using sampling::Rng;

enum class TrajectoryKind { line, arc, random_walk };
TrajectoryKind parse_kind(std::string_view s);
std::string_view to_string(TrajectoryKind k);

/// Upper bound (exclusive) on the rotation between consecutive frames.
inline constexpr double kMaxStepRotationDeg = 30.0;

struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::random_walk;
  std::size_t n_frames = 8;
  double step_scale = 1.0;
  /// Total heading change of an arc; drawn at random when unset.
  std::optional<double> arc_total_rad;
  double fps = 30.0;
};

/// Smooth camera path starting at the identity pose. Lines advance along +x
/// without rotating; arcs turn about +z at a constant rate while moving along
/// the current heading; random walks drift in a random planar direction while
/// the camera yaws (and slightly pitches/rolls) independently.
geom::Trajectory gen_trajectory(const TrajectorySpec& spec, Rng& rng);

/// Camera-movement answer tokens; the order is the tie-break order.
enum class Answer : int { pos_x = 0, neg_x = 1, pos_y = 2, neg_y = 3 };
inline constexpr int kAnswerCount = 4;
/// Vocabulary id of the direction question.
inline constexpr int kQuestionToken = 4;

/// Dominant direction of the last frame's displacement in the first camera's
/// frame. Throws DegenerateTrajectory when the net planar displacement vanishes.
Answer qa_label(const geom::Trajectory& traj);

/// K fixed random affine maps from the 9 pose parameters to feature space.
struct FeatureMaps {
  std::vector<Eigen::MatrixXd> weights;  ///< each dim × 9
  std::vector<Eigen::VectorXd> biases;   ///< each dim

  static FeatureMaps make(std::size_t tokens_per_frame, std::size_t dim, std::uint64_t projection_seed);
  std::size_t tokens_per_frame() const { return weights.size(); }
  std::size_t dim() const { return weights.empty() ? 0 : static_cast<std::size_t>(weights[0].rows()); }
};

/// Token k of frame i = A_k [t_i, q_i, fov_h, fov_w] + b_k + noise, using the
/// absolute (world) pose of frame i.
FrameFeatures render_features(const geom::Trajectory& traj, const FeatureMaps& maps, double fov_h,
                              double fov_w, double noise_sigma, Rng& rng);

struct SceneConfig {
  TrajectoryKind kind = TrajectoryKind::random_walk;
  std::size_t n_frames = 96;
  double step_scale = 0.05;
  double noise_sigma = 0.05;
  /// Probability that a scene keeps metric units.
  double metric_fraction = 0.5;
  /// Range (radians) of the random world yaw applied to each scene.
  double world_yaw_range = 6.283185307179586;
  double world_offset = 1.0;
  /// Non-metric scenes are rescaled by a log-uniform factor in [1/s, s].
  double nonmetric_scale_spread = 2.0;
  double fov_h_min = 0.9;
  double fov_h_max = 1.2;
  double fps = 30.0;
};

struct SynthScene {
  geom::Trajectory trajectory;  ///< world frame
  FrameFeatures features;
  bool metric = true;
  Answer qa = Answer::pos_x;
  double noise_sigma = 0.0;
  double fov_h = 1.0;
  double fov_w = 0.75;
  std::optional<sampling::CovisGraph> covis;
};

SynthScene gen_scene(const SceneConfig& config, const FeatureMaps& maps, Rng& rng);

/// Covisibility from camera proximity and viewing-direction agreement.
sampling::CovisGraph covisibility_from_trajectory(const geom::Trajectory& traj);

struct AugmentConfig {
  double color_jitter = 0.2;
  double blur_prob = 0.3;
  double blur_strength = 0.5;
  double grayscale_prob = 0.2;
};

/// Photometric-style perturbation of synthetic features: gain/offset jitter,
/// token blur toward the frame mean and channel-group "grayscale" collapse.
void augment_features(FrameFeatures& features, const AugmentConfig& config, Rng& rng);

}  // namespace posecam::synth
