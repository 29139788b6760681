#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "posecam/loss.hpp"
#include "posecam/net.hpp"
#include "posecam/sampling.hpp"
#include "posecam/synth.hpp"

namespace posecam::train {

/// Which objectives a training run optimizes.
enum class Variant {
  joint,      ///< VQA + pose on every source, plus interleaved pose-only samples
  no_pose,    ///< VQA only
  pose_only,  ///< pose only
};
Variant parse_variant(std::string_view s);
std::string_view to_string(Variant v);

struct DataConfig {
  std::size_t n_train_scenes = 64;
  std::size_t n_eval_scenes = 32;
  std::size_t frames_per_sample = 8;
  synth::SceneConfig scene;
  std::uint64_t projection_seed = 1234;
  /// Fraction of training sources whose pose-only samples use the covisibility walk.
  double covis_fraction = 0.0;
};

struct RunConfig {
  net::NetConfig net;
  loss::LossWeights loss;
  net::OptimizerConfig optimizer;
  sampling::DynSampleParams dynamic{0.6, 0.6, 2, 10};
  double covis_tau = 0.2;
  double alpha = 0.005;
  double beta = 1.0;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
  std::size_t epochs = 10;
  Variant variant = Variant::joint;
  DataConfig data;
  synth::AugmentConfig augment;
  /// Scene directories written by gen-synth; replaces generated training scenes.
  std::vector<std::string> manifest;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

}  // namespace posecam::train
