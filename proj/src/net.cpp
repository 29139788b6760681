#include "posecam/net.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "posecam/errors.hpp"

namespace posecam::net {

namespace {

std::string key(const std::string& prefix, const char* name) { return prefix + "." + name; }

}  // namespace

void NetConfig::validate() const {
  if (hidden_dim <= 0 || n_heads <= 0 || hidden_dim % n_heads != 0) {
    throw ConfigError("hidden_dim must be a positive multiple of n_heads");
  }
  if (resolved_head_dim() % n_heads != 0) throw ConfigError("head_dim must be a multiple of n_heads");
  if (n_layers < 0 || head_layers < 0) throw ConfigError("layer counts must be >= 0");
  if (visual_tokens_per_frame < 1) throw ConfigError("need at least one visual token per frame");
  if (vocab_size < 1) throw ConfigError("vocab_size must be >= 1");
  if (mlp_ratio < 1) throw ConfigError("mlp_ratio must be >= 1");
}

std::size_t TokenLayout::pose_position(std::size_t frame) const {
  if (!pose_tokens) throw InvalidInput("layout carries no pose tokens");
  return frame * block_size() + tokens_per_frame;
}

std::vector<std::size_t> TokenLayout::pose_positions() const {
  std::vector<std::size_t> out;
  if (!pose_tokens) return out;
  for (std::size_t i = 0; i < n_frames; ++i) out.push_back(pose_position(i));
  return out;
}

AssembledTokens assemble_tokens(const Mat& visual, std::size_t n_frames, const Mat& c_first,
                                const Mat& c_rest, const Mat& text, bool pose_tokens) {
  if (n_frames == 0 || visual.rows() % static_cast<Eigen::Index>(n_frames) != 0) {
    throw InvalidInput("visual tokens do not split evenly into frames");
  }
  const Eigen::Index h = visual.cols();
  if (c_first.size() != h || c_rest.size() != h || (text.rows() > 0 && text.cols() != h)) {
    throw InvalidInput("token width mismatch");
  }
  AssembledTokens out;
  out.layout = {n_frames, static_cast<std::size_t>(visual.rows()) / n_frames,
                static_cast<std::size_t>(text.rows()), pose_tokens};
  const TokenLayout& l = out.layout;
  out.sequence.resize(static_cast<Eigen::Index>(l.length()), h);
  for (std::size_t i = 0; i < n_frames; ++i) {
    for (std::size_t k = 0; k < l.tokens_per_frame; ++k) {
      out.sequence.row(static_cast<Eigen::Index>(l.visual_position(i, k))) =
          visual.row(static_cast<Eigen::Index>(i * l.tokens_per_frame + k));
    }
    if (pose_tokens) {
      const Mat& c = i == 0 ? c_first : c_rest;
      out.sequence.row(static_cast<Eigen::Index>(l.pose_position(i))) = c.reshaped(1, h);
    }
  }
  for (std::size_t j = 0; j < l.n_text; ++j) {
    out.sequence.row(static_cast<Eigen::Index>(l.text_position(j))) = text.row(static_cast<Eigen::Index>(j));
  }
  return out;
}

Mat slice_pose_hidden(const Mat& hidden, const TokenLayout& layout) {
  if (static_cast<std::size_t>(hidden.rows()) != layout.length() || !layout.pose_tokens) {
    throw InvalidInput("stale token layout for these hidden states");
  }
  Mat out(static_cast<Eigen::Index>(layout.n_frames), hidden.cols());
  for (std::size_t i = 0; i < layout.n_frames; ++i) {
    out.row(static_cast<Eigen::Index>(i)) = hidden.row(static_cast<Eigen::Index>(layout.pose_position(i)));
  }
  return out;
}

Mat positional_encoding(std::size_t length, int dim) {
  Mat pe(static_cast<Eigen::Index>(length), dim);
  for (std::size_t p = 0; p < length; ++p) {
    for (int c = 0; c < dim; ++c) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (c / 2)) / dim);
      const double a = static_cast<double>(p) * freq;
      pe(static_cast<Eigen::Index>(p), c) = c % 2 == 0 ? std::sin(a) : std::cos(a);
    }
  }
  return pe;
}

std::vector<geom::PoseEncoding> rows_to_poses(const Mat& m) {
  if (m.cols() != static_cast<Eigen::Index>(geom::PoseEncoding::kDim)) {
    throw InvalidInput("pose rows must have 9 columns");
  }
  std::vector<geom::PoseEncoding> out;
  out.reserve(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const Eigen::RowVectorXd r = m.row(i);
    out.push_back(geom::PoseEncoding::from_array({r.data(), 9}));
  }
  return out;
}

// ---------------------------------------------------------------------------
// TinyNet

TinyNet::TinyNet(const NetConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  init(seed);
}

TinyNet::TinyNet(const NetConfig& config, ParameterStore params)
    : config_(config), params_(std::move(params)) {
  config_.validate();
  const TinyNet reference(config_, 0);
  if (reference.params_.size() != params_.size()) throw FormatError("parameter set does not match config");
  for (const auto& p : reference.params_) {
    if (!params_.contains(p.name)) throw FormatError("parameter " + p.name + " is missing");
    const auto& q = params_.get(p.name);
    if (q.value.rows() != p.value.rows() || q.value.cols() != p.value.cols()) {
      throw FormatError("parameter " + p.name + " has the wrong shape");
    }
    params_[params_.index_of(p.name)].group = p.group;
  }
}

void TinyNet::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto randn = [&](int rows, int cols, double std) {
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng) * std;
    return m;
  };
  auto dense = [&](const std::string& prefix, int in, int out, bool bias, ParamGroup g, double gain = 1.0) {
    params_.add(key(prefix, "w"), randn(in, out, gain / std::sqrt(static_cast<double>(in))), g);
    if (bias) params_.add(key(prefix, "b"), Mat::Zero(1, out), g);
  };
  auto norm = [&](const std::string& prefix, int dim, ParamGroup g) {
    params_.add(key(prefix, "g"), Mat::Ones(1, dim), g);
    params_.add(key(prefix, "b"), Mat::Zero(1, dim), g);
  };
  auto blocks = [&](const std::string& prefix, int layers, int dim, ParamGroup g) {
    const double out_gain = 1.0 / std::sqrt(2.0 * std::max(1, layers));
    for (int l = 0; l < layers; ++l) {
      const std::string b = prefix + "blk" + std::to_string(l);
      norm(b + ".ln1", dim, g);
      dense(b + ".attn.q", dim, dim, false, g);
      dense(b + ".attn.k", dim, dim, false, g);
      dense(b + ".attn.v", dim, dim, false, g);
      dense(b + ".attn.o", dim, dim, false, g, out_gain);
      norm(b + ".ln2", dim, g);
      dense(b + ".mlp.up", dim, dim * config_.mlp_ratio, true, g);
      dense(b + ".mlp.down", dim * config_.mlp_ratio, dim, true, g, out_gain);
    }
  };

  const int h = config_.hidden_dim;
  const int d = config_.resolved_head_dim();
  const auto bb = ParamGroup::backbone;
  const auto hd = ParamGroup::head;

  dense("vis_proj", config_.resolved_feature_dim(), h, true, bb);
  params_.add("tok_embed", randn(config_.vocab_size, h, 1.0), bb);
  params_.add("pose_query.first", randn(1, h, 1.0), hd);
  params_.add("pose_query.rest", randn(1, h, 1.0), hd);
  blocks("", config_.n_layers, h, bb);
  norm("lm.ln", h, bb);
  dense("lm", h, config_.vocab_size, true, bb);

  dense("pose_proj", h, d, config_.projector_bias, hd);
  blocks("head.", config_.head_layers, d, hd);
  norm("head.ln", d, hd);
  dense("head.out", d, static_cast<int>(geom::PoseEncoding::kDim), true, hd, 0.1);
  // Identity rotation as the initial quaternion guess.
  params_.get("head.out.b").value(0, 3) = 1.0;
}

Var TinyNet::linear(Tape& tape, Var x, const std::string& prefix, bool bias) const {
  Var y = ops::matmul(tape, x, tape.parameter(params_, key(prefix, "w")));
  if (bias) y = ops::add_row(tape, y, tape.parameter(params_, key(prefix, "b")));
  return y;
}

Var TinyNet::block(Tape& tape, Var x, const std::string& prefix, int n_heads, bool causal) const {
  Var n1 = ops::layer_norm(tape, x, tape.parameter(params_, prefix + ".ln1.g"),
                           tape.parameter(params_, prefix + ".ln1.b"));
  Var q = linear(tape, n1, prefix + ".attn.q", false);
  Var k = linear(tape, n1, prefix + ".attn.k", false);
  Var v = linear(tape, n1, prefix + ".attn.v", false);
  Var a = ops::attention(tape, q, k, v, n_heads, causal);
  x = ops::add(tape, x, linear(tape, a, prefix + ".attn.o", false));
  Var n2 = ops::layer_norm(tape, x, tape.parameter(params_, prefix + ".ln2.g"),
                           tape.parameter(params_, prefix + ".ln2.b"));
  Var up = ops::gelu(tape, linear(tape, n2, prefix + ".mlp.up", true));
  return ops::add(tape, x, linear(tape, up, prefix + ".mlp.down", true));
}

Var TinyNet::backbone(Tape& tape, Var tokens) const {
  Var x = tokens;
  for (int l = 0; l < config_.n_layers; ++l) x = block(tape, x, "blk" + std::to_string(l), config_.n_heads, true);
  return x;
}

Var TinyNet::pose_projector(Tape& tape, Var pose_hidden) const {
  return linear(tape, pose_hidden, "pose_proj", config_.projector_bias);
}

Var TinyNet::camera_head(Tape& tape, Var projected) const {
  Var x = projected;
  if (config_.head_positional) {
    const Mat& v = tape.value(x);
    x = ops::add(tape, x, tape.constant(positional_encoding(static_cast<std::size_t>(v.rows()),
                                                            static_cast<int>(v.cols()))));
  }
  for (int l = 0; l < config_.head_layers; ++l) {
    x = block(tape, x, "head.blk" + std::to_string(l), config_.n_heads, false);
  }
  x = ops::layer_norm(tape, x, tape.parameter(params_, "head.ln.g"), tape.parameter(params_, "head.ln.b"));
  return linear(tape, x, "head.out", true);
}

ForwardOutput TinyNet::forward(Tape& tape, const FrameFeatures& features, std::span<const int> text_tokens,
                               const ForwardOptions& options) const {
  if (features.n_frames == 0) throw InvalidInput("no frames");
  if (static_cast<int>(features.tokens_per_frame) != config_.visual_tokens_per_frame ||
      static_cast<int>(features.dim()) != config_.resolved_feature_dim() ||
      static_cast<std::size_t>(features.data.rows()) != features.n_frames * features.tokens_per_frame) {
    throw InvalidInput("frame features do not match the network configuration");
  }
  for (int tok : text_tokens) {
    if (tok < 0 || tok >= config_.vocab_size) throw InvalidInput("text token outside vocabulary");
  }

  ForwardOutput out;
  out.layout = {features.n_frames, features.tokens_per_frame, text_tokens.size(), options.pose_tokens};
  const TokenLayout& l = out.layout;

  Var visual = linear(tape, tape.constant(features.data), "vis_proj", true);
  Var c_first = tape.parameter(params_, "pose_query.first");
  Var c_rest = tape.parameter(params_, "pose_query.rest");
  Var text;
  if (!text_tokens.empty()) {
    std::vector<Eigen::Index> ids(text_tokens.begin(), text_tokens.end());
    text = ops::gather_rows(tape, tape.parameter(params_, "tok_embed"), ids);
  }

  std::vector<ops::RowRef> rows;
  rows.reserve(l.length());
  for (std::size_t i = 0; i < l.n_frames; ++i) {
    for (std::size_t k = 0; k < l.tokens_per_frame; ++k) {
      rows.push_back({visual, static_cast<Eigen::Index>(i * l.tokens_per_frame + k)});
    }
    if (l.pose_tokens) rows.push_back({i == 0 ? c_first : c_rest, 0});
  }
  for (std::size_t j = 0; j < l.n_text; ++j) rows.push_back({text, static_cast<Eigen::Index>(j)});

  Var seq = ops::stack_rows(tape, rows);
  out.tokens = ops::add(tape, seq, tape.constant(positional_encoding(l.length(), config_.hidden_dim)));
  out.hidden = backbone(tape, out.tokens);

  if (l.pose_tokens && options.run_camera_head) {
    const auto pos = l.pose_positions();
    out.pose_hidden = ops::gather_rows(tape, out.hidden, {pos.begin(), pos.end()});
    out.pose_pred = camera_head(tape, pose_projector(tape, out.pose_hidden));
  }
  if (l.n_text > 0) {
    Var last = ops::gather_rows(tape, out.hidden, {static_cast<Eigen::Index>(l.text_position(l.n_text - 1))});
    last = ops::layer_norm(tape, last, tape.parameter(params_, "lm.ln.g"), tape.parameter(params_, "lm.ln.b"));
    out.logits = linear(tape, last, "lm", true);
  }
  return out;
}

Mat TinyNet::hidden_states(const Mat& tokens) const {
  Tape tape(false);
  return tape.value(backbone(tape, tape.constant(tokens)));
}

Mat TinyNet::project(const Mat& pose_hidden) const {
  Tape tape(false);
  return tape.value(pose_projector(tape, tape.constant(pose_hidden)));
}

std::vector<geom::PoseEncoding> TinyNet::decode_poses(const Mat& projected) const {
  Tape tape(false);
  return rows_to_poses(tape.value(camera_head(tape, tape.constant(projected))));
}

std::vector<geom::PoseEncoding> TinyNet::predict_poses(const FrameFeatures& features) const {
  Tape tape(false);
  const ForwardOutput out = forward(tape, features, {});
  return rows_to_poses(tape.value(out.pose_pred));
}

int TinyNet::predict_answer(const FrameFeatures& features, std::span<const int> text_tokens, int n_answers,
                            bool pose_tokens) const {
  if (text_tokens.empty()) throw InvalidInput("answer prediction needs a question token");
  Tape tape(false);
  const ForwardOutput out = forward(tape, features, text_tokens, {pose_tokens, false});
  const Mat& logits = tape.value(out.logits);
  Eigen::Index best = 0;
  logits.leftCols(std::min<Eigen::Index>(n_answers, logits.cols())).row(0).maxCoeff(&best);
  return static_cast<int>(best);
}

// ---------------------------------------------------------------------------
// Losses

PoseLossOutput pose_loss_op(Tape& tape, Var pred, std::span<const geom::PoseEncoding> gt,
                            const loss::LossWeights& weights, bool metric,
                            std::optional<double> pinned_scale) {
  const std::vector<geom::PoseEncoding> pred_poses = rows_to_poses(tape.value(pred));
  PoseLossOutput out;
  out.breakdown = loss::pose_loss(pred_poses, gt, weights, metric, pinned_scale);
  const auto& b = out.breakdown;

  const Mat& pv = tape.value(pred);
  const double n = static_cast<double>(pv.rows());
  Mat d(pv.rows(), pv.cols());
  auto sign = [](double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); };
  for (Eigen::Index i = 0; i < pv.rows(); ++i) {
    const auto& g = gt[static_cast<std::size_t>(i)];
    const Eigen::Vector4d gq = geom::canonicalize_quat(g.q).coeffs();
    for (int c = 0; c < 3; ++c) {
      d(i, c) = weights.w_translation / (n * b.d_bar) * b.s_star * sign(b.s_star * pv(i, c) - g.t(c));
    }
    for (int c = 0; c < 4; ++c) d(i, 3 + c) = weights.w_rotation / n * sign(pv(i, 3 + c) - gq(c));
    d(i, 7) = weights.w_fov / n * sign(pv(i, 7) - g.fov_h);
    d(i, 8) = weights.w_fov / n * sign(pv(i, 8) - g.fov_w);
  }
  Mat value(1, 1);
  value(0, 0) = b.total;
  out.loss = tape.push(std::move(value), {pred},
                       [pred, d = std::move(d)](Tape& tp, const Mat& g) { tp.accumulate(pred, d * g(0, 0)); });
  return out;
}

SampleLoss sample_loss(Tape& tape, const TinyNet& model, const TrainSample& sample,
                       const loss::LossWeights& weights, std::optional<double> pinned_scale) {
  const bool use_ntp = sample.mask.ntp_weight != 0.0;
  const bool use_pose = sample.mask.pose_weight != 0.0;
  if (!use_ntp && !use_pose) throw InvalidInput("loss mask disables every objective");
  if (use_ntp && (!sample.answer || sample.text_tokens.empty())) {
    throw InvalidInput("NTP supervision needs a question and an answer");
  }

  std::span<const int> text;
  if (use_ntp) text = sample.text_tokens;
  const ForwardOutput out = model.forward(tape, sample.features, text, {true, use_pose});

  SampleLoss res;
  std::vector<std::pair<Var, double>> terms;
  if (use_ntp) {
    Var ce = ops::cross_entropy(tape, out.logits, *sample.answer);
    res.ntp = tape.scalar(ce);
    terms.emplace_back(ce, sample.mask.ntp_weight);
  }
  if (use_pose) {
    const PoseLossOutput pl = pose_loss_op(tape, out.pose_pred, sample.gt, weights, sample.metric, pinned_scale);
    res.pose = pl.breakdown.total;
    res.s_star = pl.breakdown.s_star;
    terms.emplace_back(pl.loss, weights.lambda_pose * sample.mask.pose_weight);
  }
  res.root = ops::weighted_sum(tape, terms);
  res.total = tape.scalar(res.root);
  return res;
}

// ---------------------------------------------------------------------------
// Optimization

AdamW::AdamW(const ParameterStore& params, const OptimizerConfig& config) : config_(config) {
  if (config_.lr_backbone < 0.0 || config_.head_lr_ratio < 0.0) throw ConfigError("learning rates must be >= 0");
  for (const auto& p : params) {
    m_.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
    v_.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
  }
}

void AdamW::step(ParameterStore& params, const Gradients& grads) {
  if (grads.size() != params.size() || m_.size() != params.size()) throw InvalidInput("optimizer/parameter mismatch");
  ++steps_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    const double lr = p.group == ParamGroup::head ? config_.lr_backbone * config_.head_lr_ratio
                                                  : config_.lr_backbone;
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * grads[i];
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * grads[i].cwiseAbs2();
    if (config_.weight_decay != 0.0) p.value *= 1.0 - lr * config_.weight_decay;
    p.value.array() -= lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + config_.eps);
  }
}

StepResult train_step(TinyNet& model, AdamW& optimizer, std::span<const TrainSample> batch,
                      const loss::LossWeights& weights) {
  if (batch.empty()) throw InvalidInput("empty batch");
  Gradients grads(model.parameters());
  StepResult res;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (const auto& sample : batch) {
    Tape tape;
    const SampleLoss sl = sample_loss(tape, model, sample, weights);
    if (!std::isfinite(sl.total)) {
      throw TrainingError("non-finite loss (ntp=" + std::to_string(sl.ntp) + ", pose=" + std::to_string(sl.pose) +
                          ", s*=" + std::to_string(sl.s_star) + ")");
    }
    Gradients g(model.parameters());
    tape.backward(sl.root, g);
    grads.add_scaled(g, inv_b);
    res.loss += sl.total * inv_b;
    res.ntp += sl.ntp * inv_b;
    res.pose += sl.pose * inv_b;
  }
  if (const long bad = grads.first_non_finite(); bad >= 0) {
    throw TrainingError("non-finite gradient in " + model.parameters()[static_cast<std::size_t>(bad)].name);
  }
  res.grad_norm = grads.global_norm();
  const double clip = optimizer.config().grad_clip;
  if (clip > 0.0 && res.grad_norm > clip) grads.scale(clip / res.grad_norm);
  optimizer.step(model.parameters(), grads);
  return res;
}

// ---------------------------------------------------------------------------
// Gradient checking

double grad_check(ParameterStore& params, const std::function<Var(Tape&)>& loss_fn,
                  const GradCheckOptions& options) {
  Gradients analytic(params);
  {
    Tape tape;
    tape.backward(loss_fn(tape), analytic);
  }
  auto eval = [&] {
    Tape tape(false);
    return tape.scalar(loss_fn(tape));
  };

  std::mt19937_64 rng(options.seed);
  double worst = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Mat& value = params[p].value;
    const auto n = static_cast<std::size_t>(value.size());
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    const std::size_t count = std::min(options.entries_per_tensor, n);
    for (std::size_t e = 0; e < count; ++e) {
      const std::size_t idx = pick(rng);
      const double orig = value.data()[idx];
      value.data()[idx] = orig + options.h;
      const double up = eval();
      value.data()[idx] = orig - options.h;
      const double down = eval();
      value.data()[idx] = orig;
      const double fd = (up - down) / (2.0 * options.h);
      const double ga = analytic[p].data()[idx];
      worst = std::max(worst, std::abs(ga - fd) / std::max(1e-8, std::abs(ga) + std::abs(fd)));
    }
  }
  return worst;
}

double grad_check_model(TinyNet& model, const TrainSample& sample, const loss::LossWeights& weights,
                        CheckedLoss which, const GradCheckOptions& options) {
  TrainSample s = sample;
  if (which == CheckedLoss::pose) s.mask = {0.0, 1.0};
  std::optional<double> pinned;
  {
    Tape tape(false);
    pinned = sample_loss(tape, model, s, weights).s_star;
  }
  return grad_check(
      model.parameters(), [&](Tape& tape) { return sample_loss(tape, model, s, weights, pinned).root; }, options);
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr const char* kCheckpointFormat = "posecam-checkpoint";
constexpr int kCheckpointVersion = 1;

nlohmann::json config_to_json(const NetConfig& c) {
  return {{"hidden_dim", c.hidden_dim},     {"n_layers", c.n_layers},
          {"n_heads", c.n_heads},           {"visual_tokens_per_frame", c.visual_tokens_per_frame},
          {"vocab_size", c.vocab_size},     {"head_layers", c.head_layers},
          {"head_dim", c.head_dim},         {"feature_dim", c.feature_dim},
          {"mlp_ratio", c.mlp_ratio},       {"projector_bias", c.projector_bias},
          {"head_positional", c.head_positional}};
}

NetConfig config_from_json(const nlohmann::json& j) {
  NetConfig c;
  c.hidden_dim = j.at("hidden_dim");
  c.n_layers = j.at("n_layers");
  c.n_heads = j.at("n_heads");
  c.visual_tokens_per_frame = j.at("visual_tokens_per_frame");
  c.vocab_size = j.at("vocab_size");
  c.head_layers = j.at("head_layers");
  c.head_dim = j.at("head_dim");
  c.feature_dim = j.at("feature_dim");
  c.mlp_ratio = j.at("mlp_ratio");
  c.projector_bias = j.at("projector_bias");
  c.head_positional = j.at("head_positional");
  return c;
}

}  // namespace

std::string save_checkpoint(const TinyNet& model) {
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& p : model.parameters()) {
    std::vector<double> data(static_cast<std::size_t>(p.value.size()));
    // Row-major on disk.
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        data.data(), p.value.rows(), p.value.cols()) = p.value;
    tensors.push_back({{"name", p.name}, {"shape", {p.value.rows(), p.value.cols()}}, {"data", data}});
  }
  const nlohmann::json j = {{"format", kCheckpointFormat},
                            {"version", kCheckpointVersion},
                            {"config", config_to_json(model.config())},
                            {"tensors", tensors}};
  return j.dump();
}

TinyNet load_checkpoint(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  if (j.value("format", "") != kCheckpointFormat || j.value("version", 0) != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint format or version");
  }
  try {
    const NetConfig config = config_from_json(j.at("config"));
    ParameterStore store;
    for (const auto& t : j.at("tensors")) {
      const auto rows = t.at("shape").at(0).get<Eigen::Index>();
      const auto cols = t.at("shape").at(1).get<Eigen::Index>();
      const auto data = t.at("data").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw FormatError("tensor size mismatch");
      Mat m = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          data.data(), rows, cols);
      store.add(t.at("name").get<std::string>(), std::move(m), ParamGroup::backbone);
    }
    return TinyNet(config, std::move(store));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace posecam::net
