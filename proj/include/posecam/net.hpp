#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "posecam/autodiff.hpp"
#include "posecam/features.hpp"
#include "posecam/geom.hpp"
#include "posecam/loss.hpp"
#include "posecam/schedule.hpp"

namespace posecam::net {

struct NetConfig {
  int hidden_dim = 64;
  int n_layers = 4;
  int n_heads = 4;
  int visual_tokens_per_frame = 4;
  int vocab_size = 16;
  int head_layers = 4;
  /// Camera-head width; 0 means hidden_dim.
  int head_dim = 0;
  /// Input feature width; 0 means hidden_dim.
  int feature_dim = 0;
  int mlp_ratio = 4;
  bool projector_bias = false;
  bool head_positional = false;

  int resolved_head_dim() const { return head_dim > 0 ? head_dim : hidden_dim; }
  int resolved_feature_dim() const { return feature_dim > 0 ? feature_dim : hidden_dim; }
  /// Throws ConfigError on inconsistent sizes.
  void validate() const;
};

/// Sequence positions of one assembled input: per frame K visual tokens then
/// its pose token, all frame blocks before the text tokens.
struct TokenLayout {
  std::size_t n_frames = 0;
  std::size_t tokens_per_frame = 0;
  std::size_t n_text = 0;
  bool pose_tokens = true;

  std::size_t block_size() const { return tokens_per_frame + (pose_tokens ? 1 : 0); }
  std::size_t length() const { return n_frames * block_size() + n_text; }
  std::size_t visual_position(std::size_t frame, std::size_t k) const { return frame * block_size() + k; }
  /// (i)(K+1) + K for 0-based frame i.
  std::size_t pose_position(std::size_t frame) const;
  std::size_t text_position(std::size_t j) const { return n_frames * block_size() + j; }
  std::vector<std::size_t> pose_positions() const;
};

struct AssembledTokens {
  Mat sequence;  ///< length × H
  TokenLayout layout;
};

/// Interleaves projected visual tokens (N·K × H, frame-major) with the pose
/// queries (c_first for frame 0, c_rest after) and appends text embeddings.
AssembledTokens assemble_tokens(const Mat& visual, std::size_t n_frames, const Mat& c_first,
                                const Mat& c_rest, const Mat& text, bool pose_tokens = true);

/// Rows of `hidden` at the layout's pose-token positions, in frame order.
/// Throws InvalidInput when the layout does not match `hidden`.
Mat slice_pose_hidden(const Mat& hidden, const TokenLayout& layout);

struct ForwardOptions {
  bool pose_tokens = true;
  bool run_camera_head = true;
};

struct ForwardOutput {
  TokenLayout layout;
  Var tokens;       ///< assembled input sequence incl. positional encoding
  Var hidden;       ///< final-layer hidden states
  Var pose_hidden;  ///< N × H
  Var pose_pred;    ///< N × 9
  Var logits;       ///< 1 × vocab at the last text token
};

/// Desk-scale causal transformer with pose queries, linear pose projector and
/// a self-attention camera head.
class TinyNet {
 public:
  TinyNet(const NetConfig& config, std::uint64_t seed);
  TinyNet(const NetConfig& config, ParameterStore params);

  const NetConfig& config() const { return config_; }
  ParameterStore& parameters() { return params_; }
  const ParameterStore& parameters() const { return params_; }

  ForwardOutput forward(Tape& tape, const FrameFeatures& features, std::span<const int> text_tokens,
                        const ForwardOptions& options = {}) const;

  /// Causal transformer stack; returns final-layer hidden states.
  Var backbone(Tape& tape, Var tokens) const;
  Var pose_projector(Tape& tape, Var pose_hidden) const;
  /// Non-causal self-attention blocks followed by a linear 9-way output.
  Var camera_head(Tape& tape, Var projected) const;

  // Tape-free conveniences.
  Mat hidden_states(const Mat& tokens) const;
  Mat project(const Mat& pose_hidden) const;
  std::vector<geom::PoseEncoding> decode_poses(const Mat& projected) const;
  std::vector<geom::PoseEncoding> predict_poses(const FrameFeatures& features) const;
  /// Argmax answer id among the first `n_answers` vocabulary entries.
  int predict_answer(const FrameFeatures& features, std::span<const int> text_tokens, int n_answers,
                     bool pose_tokens = true) const;

 private:
  Var linear(Tape& tape, Var x, const std::string& prefix, bool bias) const;
  Var block(Tape& tape, Var x, const std::string& prefix, int n_heads, bool causal) const;
  void init(std::uint64_t seed);

  NetConfig config_;
  ParameterStore params_;
};

/// Sinusoidal positional encoding, rows = positions.
Mat positional_encoding(std::size_t length, int dim);

/// Rows of an N × 9 matrix as pose encodings.
std::vector<geom::PoseEncoding> rows_to_poses(const Mat& m);

struct PoseLossOutput {
  Var loss;
  loss::PoseLossBreakdown breakdown;
};

/// Differentiable pose loss over an N × 9 prediction. The least-squares scale
/// is a constant on the tape (or `pinned_scale` when given).
PoseLossOutput pose_loss_op(Tape& tape, Var pred, std::span<const geom::PoseEncoding> gt,
                            const loss::LossWeights& weights, bool metric,
                            std::optional<double> pinned_scale = std::nullopt);

/// One supervised example as seen by the network.
struct TrainSample {
  FrameFeatures features;
  std::vector<geom::PoseEncoding> gt;  ///< first-frame coordinates
  bool metric = true;
  std::vector<int> text_tokens;        ///< question tokens (empty for pose-only)
  std::optional<int> answer;
  schedule::LossMask mask;
};

struct SampleLoss {
  Var root;
  double total = 0.0;
  double ntp = 0.0;
  double pose = 0.0;
  double s_star = 1.0;
};

/// Masked ntp_weight * NTP + lambda_pose * pose_weight * pose on `tape`.
SampleLoss sample_loss(Tape& tape, const TinyNet& model, const TrainSample& sample,
                       const loss::LossWeights& weights,
                       std::optional<double> pinned_scale = std::nullopt);

struct OptimizerConfig {
  double lr_backbone = 1e-3;
  /// Head learning rate = ratio × backbone rate.
  double head_lr_ratio = 10.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  /// Global-norm clip; 0 disables.
  double grad_clip = 1.0;
};

class AdamW {
 public:
  AdamW(const ParameterStore& params, const OptimizerConfig& config);
  void step(ParameterStore& params, const Gradients& grads);
  const OptimizerConfig& config() const { return config_; }
  long steps() const { return steps_; }

 private:
  OptimizerConfig config_;
  std::vector<Mat> m_;
  std::vector<Mat> v_;
  long steps_ = 0;
};

struct StepResult {
  double loss = 0.0;
  double ntp = 0.0;
  double pose = 0.0;
  double grad_norm = 0.0;
};

/// Mean masked loss over the batch, one optimizer update. Throws
/// TrainingError on non-finite losses or gradients.
StepResult train_step(TinyNet& model, AdamW& optimizer, std::span<const TrainSample> batch,
                      const loss::LossWeights& weights);

struct GradCheckOptions {
  /// Entries sampled per parameter tensor.
  std::size_t entries_per_tensor = 3;
  double h = 1e-5;
  std::uint64_t seed = 0;
};

/// Max over sampled entries of |g_a - g_fd| / max(1e-8, |g_a| + |g_fd|) with
/// central differences.
double grad_check(ParameterStore& params, const std::function<Var(Tape&)>& loss_fn,
                  const GradCheckOptions& options = {});

enum class CheckedLoss { pose, total };

/// Gradient check of the full model on one sample with s* pinned at its
/// base-point value.
double grad_check_model(TinyNet& model, const TrainSample& sample, const loss::LossWeights& weights,
                        CheckedLoss which, const GradCheckOptions& options = {});

/// JSON checkpoint of configuration and named tensors.
std::string save_checkpoint(const TinyNet& model);
TinyNet load_checkpoint(const std::string& json_text);

}  // namespace posecam::net
