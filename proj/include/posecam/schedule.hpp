#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "posecam/sampling.hpp"

namespace posecam::schedule {

enum class Supervision { vqa_only, pose_only, joint };
enum class SamplerKind { uniform_jitter, dynamic_temporal, covis_walk };

std::string_view to_string(Supervision s);
std::string_view to_string(SamplerKind s);

struct SampleSpec {
  std::size_t source_id = 0;
  Supervision supervision = Supervision::joint;
  SamplerKind sampler = SamplerKind::uniform_jitter;
  bool augmentation = false;

  /// Throws InvalidInput when supervision, sampler and augmentation disagree.
  void validate() const;
  friend bool operator==(const SampleSpec&, const SampleSpec&) = default;
};

/// One training source (a video) and the labels it carries.
struct SourceEntry {
  std::size_t source_id = 0;
  bool has_pose = false;
  bool has_vqa = true;
  /// Sampler used for this source's pose-only samples.
  SamplerKind pose_sampler = SamplerKind::dynamic_temporal;
};

struct LossMask {
  double ntp_weight = 1.0;
  double pose_weight = 1.0;
};

LossMask loss_mask_for(const SampleSpec& spec);

/// floor(beta * pose_sources), tolerant to round-off in the product.
std::size_t augmented_count(double beta, std::size_t pose_sources);

/// Every manifest source once (joint with pose labels, vqa_only without, pose_only
/// when the source has no VQA labels) plus floor(beta * M) pose-only samples
/// drawn from the M pose-annotated sources; the result is shuffled.
std::vector<SampleSpec> build_interleaved_plan(std::span<const SourceEntry> manifest, double beta,
                                               sampling::Rng& rng);

struct Batch {
  std::vector<SampleSpec> samples;
  std::vector<LossMask> masks;
};

/// Shuffles the plan and cuts it into batches; the last batch may be short.
std::vector<Batch> make_batches(std::span<const SampleSpec> plan, std::size_t batch_size,
                                sampling::Rng& rng);

/// Mean over samples of ntp_weight * ntp + lambda_pose * pose_weight * pose.
double batch_loss(std::span<const LossMask> masks, std::span<const double> ntp,
                  std::span<const double> pose, double lambda_pose);

}  // namespace posecam::schedule
