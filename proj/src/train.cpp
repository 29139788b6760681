#include "posecam/train.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include <nlohmann/json.hpp>

#include "posecam/errors.hpp"
#include "posecam/geom.hpp"
#include "posecam/io.hpp"
#include "posecam/metrics.hpp"

namespace posecam::train {

namespace {

// Independent streams for data, initialization and the training loop.
constexpr std::uint64_t kTrainDataStream = 0x9e3779b97f4a7c15ull;
constexpr std::uint64_t kEvalDataStream = 0xbf58476d1ce4e5b9ull;
constexpr std::uint64_t kLoopStream = 0x94d049bb133111ebull;

geom::Trajectory to_trajectory(const std::vector<geom::PoseEncoding>& enc, const geom::Trajectory& like) {
  std::vector<geom::TimedPose> poses;
  poses.reserve(enc.size());
  for (std::size_t i = 0; i < enc.size(); ++i) {
    geom::RigidPose p;
    p.translation = enc[i].t;
    // A vanishing quaternion carries no orientation; read it as identity.
    p.rotation = enc[i].q.squared_norm() > 1e-24 ? enc[i].q.normalized() : geom::Quat::identity();
    poses.push_back({like[i].timestamp, p});
  }
  return geom::Trajectory(std::move(poses));
}

}  // namespace

Variant parse_variant(std::string_view s) {
  if (s == "joint") return Variant::joint;
  if (s == "no_pose") return Variant::no_pose;
  if (s == "pose_only") return Variant::pose_only;
  throw ConfigError("unknown variant '" + std::string(s) + "'");
}

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::joint: return "joint";
    case Variant::no_pose: return "no_pose";
    case Variant::pose_only: return "pose_only";
  }
  return "?";
}

void RunConfig::validate() const {
  net.validate();
  loss.validate();
  dynamic.validate();
  if (!(alpha >= 0.0 && alpha < 1.0)) throw ConfigError("alpha must be in [0, 1)");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be a finite value >= 0");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (!(covis_tau >= 0.0 && covis_tau < 1.0)) throw ConfigError("covis_tau must be in [0, 1)");
  if (!(data.covis_fraction >= 0.0 && data.covis_fraction <= 1.0))
    throw ConfigError("covis_fraction must be in [0, 1]");
  if (data.frames_per_sample < 3) throw ConfigError("frames_per_sample must be >= 3");
  if (data.scene.n_frames < data.frames_per_sample)
    throw ConfigError("scenes must have at least frames_per_sample frames");
  if (manifest.empty() && data.n_train_scenes == 0) throw ConfigError("no training scenes");
  if (data.n_eval_scenes == 0) throw ConfigError("n_eval_scenes must be >= 1");
  if (net.vocab_size <= synth::kQuestionToken) throw ConfigError("vocab_size must cover the answer and question tokens");
  if (!(optimizer.lr_backbone >= 0.0) || !(optimizer.head_lr_ratio >= 0.0))
    throw ConfigError("learning rates must be >= 0");
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0) || !(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0))
    throw ConfigError("optimizer betas must be in [0, 1)");
  if (!(optimizer.eps > 0.0) || !(optimizer.weight_decay >= 0.0) || !(optimizer.grad_clip >= 0.0))
    throw ConfigError("optimizer eps must be > 0 and weight_decay, grad_clip >= 0");
  const auto& s = data.scene;
  if (!(s.step_scale > 0.0) || !(s.noise_sigma >= 0.0) || !(s.fps > 0.0))
    throw ConfigError("scene step_scale and fps must be > 0, noise_sigma >= 0");
  if (!(s.metric_fraction >= 0.0 && s.metric_fraction <= 1.0)) throw ConfigError("metric_fraction must be in [0, 1]");
  if (!(s.nonmetric_scale_spread >= 1.0)) throw ConfigError("nonmetric_scale_spread must be >= 1");
  if (!(s.fov_h_min > 0.0 && s.fov_h_min <= s.fov_h_max)) throw ConfigError("need 0 < fov_h_min <= fov_h_max");
}

Dataset make_dataset(const RunConfig& config) {
  const auto& net = config.net;
  Dataset d{synth::FeatureMaps::make(static_cast<std::size_t>(net.visual_tokens_per_frame),
                                     static_cast<std::size_t>(net.resolved_feature_dim()), config.data.projection_seed),
            {},
            {}};
  if (config.manifest.empty()) {
    sampling::Rng rng(config.seed ^ kTrainDataStream);
    for (std::size_t i = 0; i < config.data.n_train_scenes; ++i)
      d.train.push_back(synth::gen_scene(config.data.scene, d.maps, rng));
  } else {
    for (const auto& dir : config.manifest) {
      auto scene = read_scene_dir(dir);
      if (scene.features.tokens_per_frame != d.maps.tokens_per_frame() || scene.features.dim() != d.maps.dim())
        throw FormatError("scene " + dir + " does not match the network feature layout");
      if (scene.trajectory.size() < config.data.frames_per_sample)
        throw FormatError("scene " + dir + " has fewer frames than frames_per_sample");
      d.train.push_back(std::move(scene));
    }
  }
  sampling::Rng eval_rng(config.seed ^ kEvalDataStream);
  for (std::size_t i = 0; i < config.data.n_eval_scenes; ++i)
    d.eval.push_back(synth::gen_scene(config.data.scene, d.maps, eval_rng));
  return d;
}

double effective_beta(const RunConfig& config) { return config.variant == Variant::no_pose ? 0.0 : config.beta; }

std::vector<schedule::SourceEntry> make_manifest(const RunConfig& config, std::size_t n_sources) {
  const auto n_covis = static_cast<std::size_t>(std::floor(config.data.covis_fraction * static_cast<double>(n_sources)));
  std::vector<schedule::SourceEntry> m;
  m.reserve(n_sources);
  for (std::size_t i = 0; i < n_sources; ++i) {
    schedule::SourceEntry e;
    e.source_id = i;
    e.has_pose = config.variant != Variant::no_pose;
    e.has_vqa = config.variant != Variant::pose_only;
    e.pose_sampler = i < n_covis ? schedule::SamplerKind::covis_walk : schedule::SamplerKind::dynamic_temporal;
    m.push_back(e);
  }
  return m;
}

net::TrainSample materialize(const schedule::SampleSpec& spec, const synth::SynthScene& scene,
                             const RunConfig& config, const synth::AugmentConfig& augment, sampling::Rng& rng) {
  const std::size_t total = scene.trajectory.size();
  const std::size_t n = config.data.frames_per_sample;
  sampling::Indices idx;
  switch (spec.sampler) {
    case schedule::SamplerKind::uniform_jitter:
      idx = sampling::jitter_indices(sampling::uniform_indices(total, n), total, config.alpha, rng);
      break;
    case schedule::SamplerKind::dynamic_temporal:
      idx = sampling::dynamic_temporal_sample(total, n, config.dynamic, rng);
      break;
    case schedule::SamplerKind::covis_walk: {
      const auto graph = scene.covis ? *scene.covis : synth::covisibility_from_trajectory(scene.trajectory);
      idx = sampling::covis_walk_sample(graph, n, config.covis_tau, rng).indices;
      break;
    }
  }
  // Jitter may merge neighbours; duplicates would break the strict time order.
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());

  const geom::Trajectory sub = geom::select_frames(scene.trajectory, idx);
  net::TrainSample s;
  s.features = scene.features.select(idx);
  if (spec.augmentation) synth::augment_features(s.features, augment, rng);
  s.gt = geom::encode_trajectory(sub, scene.fov_h, scene.fov_w);
  s.metric = scene.metric;
  s.mask = schedule::loss_mask_for(spec);
  if (s.mask.ntp_weight != 0.0) {
    s.text_tokens = {synth::kQuestionToken};
    s.answer = static_cast<int>(synth::qa_label(sub));
  }
  return s;
}

net::TrainSample probe_sample(const RunConfig& config, bool metric, std::uint64_t seed) {
  const auto maps = synth::FeatureMaps::make(static_cast<std::size_t>(config.net.visual_tokens_per_frame),
                                             static_cast<std::size_t>(config.net.resolved_feature_dim()),
                                             config.data.projection_seed);
  auto scene_cfg = config.data.scene;
  scene_cfg.metric_fraction = metric ? 1.0 : 0.0;
  sampling::Rng rng(seed);
  const auto scene = synth::gen_scene(scene_cfg, maps, rng);
  const schedule::SampleSpec spec{0, schedule::Supervision::joint, schedule::SamplerKind::uniform_jitter, false};
  return materialize(spec, scene, config, {0.0, 0.0, 0.0, 0.0}, rng);
}

EvalResult evaluate_model(const net::TinyNet& model, std::span<const synth::SynthScene> scenes,
                          std::size_t frames_per_sample) {
  EvalResult r;
  if (scenes.empty()) return r;
  const int question[] = {synth::kQuestionToken};
  std::size_t correct = 0;
  for (const auto& scene : scenes) {
    const auto idx = sampling::uniform_indices(scene.trajectory.size(), frames_per_sample);
    const geom::Trajectory gt = geom::to_first_frame_coords(geom::select_frames(scene.trajectory, idx));
    const FrameFeatures feats = scene.features.select(idx);
    const geom::Trajectory pred = to_trajectory(model.predict_poses(feats), gt);
    try {
      const auto m = metrics::evaluate(pred, gt);
      r.ate += m.ate;
      r.rpe_trans += m.rpe_trans;
      r.rpe_rot += m.rpe_rot;
    } catch (const AlignmentDegenerate&) {
      // A collapsed prediction aligns to the ground-truth centroid at best.
      const auto t = gt.translations();
      Vec3 mean = Vec3::Zero();
      for (const auto& p : t) mean += p;
      mean /= static_cast<double>(t.size());
      double sq = 0.0;
      for (const auto& p : t) sq += (p - mean).squaredNorm();
      const double spread = std::sqrt(sq / static_cast<double>(t.size()));
      r.ate += spread;
      r.rpe_trans += spread;
      r.rpe_rot += 180.0;
    }
    if (model.predict_answer(feats, question, synth::kAnswerCount) == static_cast<int>(synth::qa_label(gt)))
      ++correct;
  }
  const auto n = static_cast<double>(scenes.size());
  r.ate /= n;
  r.rpe_trans /= n;
  r.rpe_rot /= n;
  r.qa_acc = static_cast<double>(correct) / n;
  return r;
}

RunResult run_training(const RunConfig& config, const std::function<void(const EpochMetrics&)>& on_epoch) {
  config.validate();
  const Dataset data = make_dataset(config);
  RunResult result{{}, net::TinyNet(config.net, config.seed)};
  net::AdamW optimizer(result.model.parameters(), config.optimizer);
  const auto manifest = make_manifest(config, data.train.size());
  const double beta = effective_beta(config);
  const synth::AugmentConfig no_augment{0.0, 0.0, 0.0, 0.0};
  sampling::Rng rng(config.seed ^ kLoopStream);

  auto record = [&](EpochMetrics m) {
    m.eval = evaluate_model(result.model, data.eval, config.data.frames_per_sample);
    if (on_epoch) on_epoch(m);
    result.epochs.push_back(m);
  };

  const double nan = std::numeric_limits<double>::quiet_NaN();
  record({0, 0, 0, nan, nan, nan, {}});
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto plan = schedule::build_interleaved_plan(manifest, beta, rng);
    const auto batches = schedule::make_batches(plan, config.batch_size, rng);
    EpochMetrics m;
    m.epoch = epoch;
    m.samples = plan.size();
    for (const auto& s : plan) m.pose_only_samples += s.supervision == schedule::Supervision::pose_only;
    for (const auto& batch : batches) {
      std::vector<net::TrainSample> samples;
      samples.reserve(batch.samples.size());
      for (const auto& spec : batch.samples) {
        samples.push_back(materialize(spec, data.train[spec.source_id], config,
                                      spec.augmentation ? config.augment : no_augment, rng));
      }
      const auto step = net::train_step(result.model, optimizer, samples, config.loss);
      const auto w = static_cast<double>(samples.size());
      m.loss += step.loss * w;
      m.ntp_loss += step.ntp * w;
      m.pose_loss += step.pose * w;
    }
    const auto total = static_cast<double>(m.samples);
    m.loss /= total;
    m.ntp_loss /= total;
    m.pose_loss /= total;
    record(m);
  }
  return result;
}

std::string metrics_csv(std::span<const EpochMetrics> rows) {
  std::string out = "epoch,samples,pose_only_samples,loss,ntp_loss,pose_loss,ate,rpe_trans,rpe_rot,qa_acc\n";
  for (const auto& r : rows) {
    out += std::to_string(r.epoch) + "," + std::to_string(r.samples) + "," + std::to_string(r.pose_only_samples);
    for (double v : {r.loss, r.ntp_loss, r.pose_loss, r.eval.ate, r.eval.rpe_trans, r.eval.rpe_rot, r.eval.qa_acc})
      out += "," + io::format_float(v);
    out += "\n";
  }
  return out;
}

void write_scene_dir(const std::filesystem::path& dir, const synth::SynthScene& scene) {
  std::filesystem::create_directories(dir);
  io::write_file(dir / "trajectory.txt", io::write_tum(scene.trajectory));
  io::write_file(dir / "features.bin", io::encode_feature_blob(scene.features));
  nlohmann::ordered_json meta{{"metric", scene.metric},       {"qa", static_cast<int>(scene.qa)},
                              {"fov_h", scene.fov_h},         {"fov_w", scene.fov_w},
                              {"noise_sigma", scene.noise_sigma}};
  io::write_file(dir / "meta.json", meta.dump(2) + "\n");
  if (scene.covis) {
    std::string csv;
    const auto& c = scene.covis->covis;
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
      for (Eigen::Index j = 0; j < c.cols(); ++j) csv += (j ? "," : "") + io::format_float(c(i, j));
      csv += "\n";
    }
    io::write_file(dir / "covis.csv", csv);
  }
}

synth::SynthScene read_scene_dir(const std::filesystem::path& dir) {
  synth::SynthScene s;
  s.trajectory = io::parse_tum(io::read_file(dir / "trajectory.txt"));
  s.features = io::decode_feature_blob(io::read_file(dir / "features.bin"));
  if (s.features.n_frames != s.trajectory.size()) throw FormatError("features and trajectory differ in frame count");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(io::read_file(dir / "meta.json"));
    s.metric = meta.at("metric").get<bool>();
    s.fov_h = meta.at("fov_h").get<double>();
    s.fov_w = meta.at("fov_w").get<double>();
    s.noise_sigma = meta.value("noise_sigma", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad meta.json in " + dir.string() + ": " + e.what());
  }
  s.qa = synth::qa_label(s.trajectory);
  if (std::filesystem::exists(dir / "covis.csv")) s.covis = io::parse_covis_csv(io::read_file(dir / "covis.csv"));
  return s;
}

}  // namespace posecam::train
