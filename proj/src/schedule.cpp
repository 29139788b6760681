#include "posecam/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "posecam/errors.hpp"

namespace posecam::schedule {

std::string_view to_string(Supervision s) {
  switch (s) {
    case Supervision::vqa_only: return "vqa_only";
    case Supervision::pose_only: return "pose_only";
    case Supervision::joint: return "joint";
  }
  return "?";
}

std::string_view to_string(SamplerKind s) {
  switch (s) {
    case SamplerKind::uniform_jitter: return "uniform_jitter";
    case SamplerKind::dynamic_temporal: return "dynamic_temporal";
    case SamplerKind::covis_walk: return "covis_walk";
  }
  return "?";
}

void SampleSpec::validate() const {
  if (supervision == Supervision::pose_only) {
    if (sampler == SamplerKind::uniform_jitter || !augmentation) {
      throw InvalidInput("pose-only samples use pose-style sampling and augmentation");
    }
  } else if (sampler != SamplerKind::uniform_jitter || augmentation) {
    throw InvalidInput("VQA and joint samples use uniform jitter sampling without augmentation");
  }
}

LossMask loss_mask_for(const SampleSpec& spec) {
  switch (spec.supervision) {
    case Supervision::vqa_only: return {1.0, 0.0};
    case Supervision::pose_only: return {0.0, 1.0};
    case Supervision::joint: return {1.0, 1.0};
  }
  return {1.0, 1.0};
}

std::size_t augmented_count(double beta, std::size_t pose_sources) {
  return static_cast<std::size_t>(std::floor(beta * static_cast<double>(pose_sources) + 1e-9));
}

std::vector<SampleSpec> build_interleaved_plan(std::span<const SourceEntry> manifest, double beta,
                                               sampling::Rng& rng) {
  if (manifest.empty()) throw ConfigError("empty manifest");
  if (!std::isfinite(beta) || beta < 0.0) throw ConfigError("beta must be >= 0");

  std::vector<SampleSpec> plan;
  std::vector<const SourceEntry*> pose_sources;
  for (const auto& src : manifest) {
    if (!src.has_pose && !src.has_vqa) throw ConfigError("source carries no labels");
    if (src.has_pose && src.pose_sampler == SamplerKind::uniform_jitter) {
      throw ConfigError("pose sampler must be dynamic_temporal or covis_walk");
    }
    if (src.has_pose) pose_sources.push_back(&src);
    if (src.has_vqa) {
      plan.push_back({src.source_id, src.has_pose ? Supervision::joint : Supervision::vqa_only,
                      SamplerKind::uniform_jitter, false});
    } else {
      plan.push_back({src.source_id, Supervision::pose_only, src.pose_sampler, true});
    }
  }
  if (beta > 0.0 && pose_sources.empty()) {
    throw ConfigError("beta > 0 requires pose-annotated sources");
  }

  const std::size_t m_hat = pose_sources.size();
  const std::size_t extra = augmented_count(beta, m_hat);
  auto push_pose_only = [&](const SourceEntry& src) {
    plan.push_back({src.source_id, Supervision::pose_only, src.pose_sampler, true});
  };
  if (extra <= m_hat) {
    std::vector<std::size_t> order(m_hat);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < extra; ++i) push_pose_only(*pose_sources[order[i]]);
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, m_hat - 1);
    for (std::size_t i = 0; i < extra; ++i) push_pose_only(*pose_sources[pick(rng)]);
  }

  std::shuffle(plan.begin(), plan.end(), rng);
  return plan;
}

std::vector<Batch> make_batches(std::span<const SampleSpec> plan, std::size_t batch_size,
                                sampling::Rng& rng) {
  if (batch_size == 0) throw InvalidInput("batch size must be >= 1");
  std::vector<SampleSpec> order(plan.begin(), plan.end());
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Batch> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    Batch b;
    const std::size_t end = std::min(order.size(), i + batch_size);
    for (std::size_t j = i; j < end; ++j) {
      b.samples.push_back(order[j]);
      b.masks.push_back(loss_mask_for(order[j]));
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

double batch_loss(std::span<const LossMask> masks, std::span<const double> ntp,
                  std::span<const double> pose, double lambda_pose) {
  if (masks.size() != ntp.size() || masks.size() != pose.size() || masks.empty()) {
    throw InvalidInput("batch loss: mismatched or empty inputs");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (masks[i].ntp_weight != 0.0) sum += masks[i].ntp_weight * ntp[i];
    if (masks[i].pose_weight != 0.0) sum += lambda_pose * masks[i].pose_weight * pose[i];
  }
  return sum / static_cast<double>(masks.size());
}

}  // namespace posecam::schedule
