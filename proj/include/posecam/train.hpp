#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "posecam/config.hpp"
#include "posecam/net.hpp"
#include "posecam/schedule.hpp"
#include "posecam/synth.hpp"

namespace posecam::train {

struct Dataset {
  synth::FeatureMaps maps;
  std::vector<synth::SynthScene> train;
  std::vector<synth::SynthScene> eval;
};

/// Training and held-out scenes; depends on the seed and data settings only,
/// so every variant of one seed sees the same data.
Dataset make_dataset(const RunConfig& config);

/// Manifest entries describing which labels each training scene contributes.
std::vector<schedule::SourceEntry> make_manifest(const RunConfig& config, std::size_t n_sources);

/// Effective interleaving ratio (0 when the variant has no pose labels).
double effective_beta(const RunConfig& config);

/// Draws frames, labels and augmentation for one planned sample.
net::TrainSample materialize(const schedule::SampleSpec& spec, const synth::SynthScene& scene,
                             const RunConfig& config, const synth::AugmentConfig& augment, sampling::Rng& rng);

/// One joint sample (frames, pose labels, question and answer) from a fresh
/// scene, for gradient checks.
net::TrainSample probe_sample(const RunConfig& config, bool metric, std::uint64_t seed);

struct EvalResult {
  double ate = 0.0;
  double rpe_trans = 0.0;
  double rpe_rot = 0.0;
  double qa_acc = 0.0;
};

/// Mean trajectory errors and direction-QA accuracy over held-out scenes,
/// each read at uniformly spaced frames.
EvalResult evaluate_model(const net::TinyNet& model, std::span<const synth::SynthScene> scenes,
                          std::size_t frames_per_sample);

struct EpochMetrics {
  std::size_t epoch = 0;
  std::size_t samples = 0;
  std::size_t pose_only_samples = 0;
  double loss = 0.0;
  double ntp_loss = 0.0;
  double pose_loss = 0.0;
  EvalResult eval;
};

struct RunResult {
  std::vector<EpochMetrics> epochs;  ///< epoch 0 is the untrained model
  net::TinyNet model;
};

RunResult run_training(const RunConfig& config,
                       const std::function<void(const EpochMetrics&)>& on_epoch = {});

/// Header plus one row per epoch; floats use "%.9g".
std::string metrics_csv(std::span<const EpochMetrics> rows);

/// Scene directory layout: trajectory.txt (TUM, world frame), features.bin,
/// meta.json and, when present, covis.csv.
void write_scene_dir(const std::filesystem::path& dir, const synth::SynthScene& scene);
synth::SynthScene read_scene_dir(const std::filesystem::path& dir);

}  // namespace posecam::train
