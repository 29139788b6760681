#pragma once

#include <cstddef>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace posecam::sampling {

using Rng = std::mt19937_64;
using Indices = std::vector<std::size_t>;

struct JitterConfig {
  double alpha = 0.005;
  void validate() const;
};

/// Two-mode (video / collection) temporal sampling parameters.
struct DynSampleParams {
  double p_video = 0.6;
  double p_fix = 0.6;
  std::size_t i_min = 30;
  std::size_t i_max = 100;

  void validate() const;
  /// Presets for "scannet", "scannetpp" and "arkitscenes".
  static DynSampleParams preset(std::string_view dataset);
};

/// Symmetric pairwise covisibility scores in [0, 1].
struct CovisGraph {
  Eigen::MatrixXd covis;

  std::size_t n_frames() const { return static_cast<std::size_t>(covis.rows()); }
  /// Throws InvalidInput on non-square, asymmetric or out-of-range matrices.
  void validate() const;
};

/// floor((i-1)(L-1)/(N-1)) for i = 1..N; [0] when N == 1.
Indices uniform_indices(std::size_t total_frames, std::size_t n_frames);

/// Perturbs each index by a uniform integer offset in [-floor(L*alpha), floor(L*alpha)],
/// clips intermediate indices to [0, u_{i+1} - 1] (pre-jitter neighbour) and
/// the last to [0, L - 1], then enforces monotonicity.
Indices jitter_indices(const Indices& indices, std::size_t total_frames, double alpha, Rng& rng);

/// Video mode (random start, fixed or per-step intervals) with probability
/// p_video, otherwise N distinct sorted indices drawn without replacement.
Indices dynamic_temporal_sample(std::size_t total_frames, std::size_t n_frames,
                                const DynSampleParams& params, Rng& rng);

/// Collection mode on its own.
Indices collection_sample(std::size_t total_frames, std::size_t n_frames, Rng& rng);

inline constexpr int kMaxWalkRestarts = 4;

struct CovisWalkResult {
  Indices indices;                                         ///< sorted ascending
  Indices walk_order;                                      ///< visit order
  std::vector<std::pair<std::size_t, std::size_t>> edges;  ///< forward walk steps
  int restarts = 0;
};

/// Random walk with backtracking over edges whose covisibility exceeds tau.
/// Restarts up to four times from nodes outside previously visited
/// components; throws SamplingFailed (restarts() == 4) when N frames cannot
/// be collected. Once every component has been tried, the remaining restarts
/// count as spent.
CovisWalkResult covis_walk_sample(const CovisGraph& graph, std::size_t n_frames, double tau,
                                  Rng& rng);

}  // namespace posecam::sampling
