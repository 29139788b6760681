#include "posecam/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "posecam/errors.hpp"
#include "posecam/io.hpp"
#include "posecam/metrics.hpp"
#include "posecam/net.hpp"
#include "posecam/pipeline.hpp"
#include "posecam/sampling.hpp"
#include "posecam/train.hpp"

namespace posecam::cli {

namespace fs = std::filesystem;

namespace {

struct UsageError : Error {
  using Error::Error;
};

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, std::uint64_t fallback) {
  if (flag) return *flag;
  if (const char* env = std::getenv("POSECAM_SEED"); env != nullptr && *env != '\0') {
    std::uint64_t v = 0;
    const std::string s(env);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw UsageError("POSECAM_SEED is not an unsigned integer");
    return v;
  }
  return fallback;
}

void emit(std::ostream& out, const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    out << text;
  } else {
    io::write_file(out_path, text);
  }
}

std::string join(const sampling::Indices& idx) {
  std::string s;
  for (std::size_t i = 0; i < idx.size(); ++i) s += (i ? "," : "") + std::to_string(idx[i]);
  return s;
}

metrics::EvalProtocol parse_protocol(const std::string& s) {
  if (s == "none") return metrics::EvalProtocol::none;
  if (s == "scannet") return metrics::EvalProtocol::scannet;
  if (s == "tum_dynamic") return metrics::EvalProtocol::tum_dynamic;
  if (s == "sintel") return metrics::EvalProtocol::sintel;
  throw UsageError("unknown protocol " + s);
}

train::RunConfig load_config(const std::string& path) {
  if (path.empty()) return {};
  return io::parse_run_config(io::read_file(path));
}

// ---------------------------------------------------------------------------

struct EvalTrajArgs {
  std::string pred, gt, out, protocol = "none", rot_agg = "rmse", sequence;
  std::size_t delta = 1;
};

std::string eval_row(const std::string& name, const geom::Trajectory& pred_in, const geom::Trajectory& gt_in,
                     const EvalTrajArgs& a) {
  if (pred_in.size() != gt_in.size())
    throw FormatError(name + ": prediction has " + std::to_string(pred_in.size()) + " poses, ground truth " +
                      std::to_string(gt_in.size()));
  const auto keep = metrics::eval_frame_protocol(gt_in.size(), parse_protocol(a.protocol));
  const auto pred = geom::select_frames(pred_in, keep);
  const auto gt = geom::select_frames(gt_in, keep);
  const auto m = metrics::evaluate(pred, gt, a.delta,
                                   a.rot_agg == "mean" ? metrics::Aggregation::mean : metrics::Aggregation::rmse);
  return name + "," + io::format_float(m.ate) + "," + io::format_float(m.rpe_trans) + "," +
         io::format_float(m.rpe_rot) + "\n";
}

int run_eval_traj(const EvalTrajArgs& a, std::ostream& out) {
  std::string csv = "sequence,ate,rpe_trans,rpe_rot\n";
  if (fs::is_directory(a.pred) && fs::is_directory(a.gt)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(a.gt)) {
      if (e.is_regular_file() && e.path().extension() == ".txt" && fs::exists(fs::path(a.pred) / e.path().filename()))
        files.push_back(e.path().filename());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw FormatError("no matching trajectory files in " + a.pred + " and " + a.gt);
    for (const auto& f : files) {
      csv += eval_row(f.stem().string(), io::parse_tum(io::read_file(fs::path(a.pred) / f)),
                      io::parse_tum(io::read_file(fs::path(a.gt) / f)), a);
    }
  } else {
    const std::string name = a.sequence.empty() ? fs::path(a.gt).stem().string() : a.sequence;
    csv += eval_row(name, io::parse_tum(io::read_file(a.pred)), io::parse_tum(io::read_file(a.gt)), a);
  }
  emit(out, a.out, csv);
  return kExitOk;
}

struct AlignArgs {
  std::string pred, gt, out;
};

int run_align(const AlignArgs& a, std::ostream& out) {
  const auto pred = io::parse_tum(io::read_file(a.pred));
  const auto gt = io::parse_tum(io::read_file(a.gt));
  if (pred.size() != gt.size()) throw FormatError("prediction and ground truth differ in length");
  const auto sim = metrics::umeyama_sim3(pred.translations(), gt.translations());
  const auto q = geom::rotmat_to_quat(sim.rotation);
  nlohmann::ordered_json j;
  j["scale"] = sim.scale;
  j["rotation_wxyz"] = {q.w, q.x, q.y, q.z};
  j["translation"] = {sim.translation.x(), sim.translation.y(), sim.translation.z()};
  j["ate"] = metrics::ate(pred, gt);
  out << j.dump() << "\n";
  if (!a.out.empty()) io::write_file(a.out, io::write_tum(sim.apply(pred)));
  return kExitOk;
}

struct SampleArgs {
  std::string mode = "uniform", preset, covis;
  std::size_t frames = 0, n = 0;
  double alpha = 0.005, tau = 0.2;
  std::optional<double> p_video, p_fix;
  std::optional<std::size_t> i_min, i_max;
  std::optional<std::uint64_t> seed;
};

int run_sample(const SampleArgs& a, std::ostream& out) {
  sampling::Rng rng(resolve_seed(a.seed, 0));
  sampling::Indices idx;
  if (a.mode == "uniform") {
    idx = sampling::uniform_indices(a.frames, a.n);
  } else if (a.mode == "jitter") {
    idx = sampling::jitter_indices(sampling::uniform_indices(a.frames, a.n), a.frames, a.alpha, rng);
  } else if (a.mode == "dynamic" || a.mode == "collection") {
    if (a.mode == "collection") {
      idx = sampling::collection_sample(a.frames, a.n, rng);
    } else {
      auto p = a.preset.empty() ? sampling::DynSampleParams{} : sampling::DynSampleParams::preset(a.preset);
      if (a.p_video) p.p_video = *a.p_video;
      if (a.p_fix) p.p_fix = *a.p_fix;
      if (a.i_min) p.i_min = *a.i_min;
      if (a.i_max) p.i_max = *a.i_max;
      idx = sampling::dynamic_temporal_sample(a.frames, a.n, p, rng);
    }
  } else if (a.mode == "covis") {
    if (a.covis.empty()) throw UsageError("--mode covis needs --covis");
    idx = sampling::covis_walk_sample(io::parse_covis_csv(io::read_file(a.covis)), a.n, a.tau, rng).indices;
  } else {
    throw UsageError("unknown sampling mode " + a.mode);
  }
  out << join(idx) << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string config, out, checkpoint, variant;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  bool verbose = false;
};

int run_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  auto cfg = load_config(a.config);
  cfg.seed = resolve_seed(a.seed, cfg.seed);
  if (a.epochs) cfg.epochs = *a.epochs;
  if (!a.variant.empty()) cfg.variant = train::parse_variant(a.variant);
  std::function<void(const train::EpochMetrics&)> progress;
  if (a.verbose) {
    progress = [&err](const train::EpochMetrics& m) {
      err << "epoch " << m.epoch << " loss " << io::format_float(m.loss) << " ate " << io::format_float(m.eval.ate)
          << " qa " << io::format_float(m.eval.qa_acc) << "\n";
    };
  }
  const auto result = train::run_training(cfg, progress);
  emit(out, a.out, train::metrics_csv(result.epochs));
  if (!a.checkpoint.empty()) io::write_file(a.checkpoint, net::save_checkpoint(result.model));
  return kExitOk;
}

struct SceneCutArgs {
  std::string frames_dir;
  std::optional<double> fps;
  pipeline::CutConfig cut;
  bool disjunctive = false;
};

int run_scene_cut(const SceneCutArgs& a, std::ostream& out) {
  auto cfg = a.cut;
  cfg.conjunctive = !a.disjunctive;
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  const auto seq = pipeline::load_frames_dir(a.frames_dir, a.fps);
  const auto cuts = seq.frames.size() >= 2 ? pipeline::detect_cuts(seq, cfg) : std::vector<std::size_t>{};
  const auto verdict = pipeline::clip_gate(seq, cuts, cfg);
  nlohmann::ordered_json j;
  j["frames"] = seq.frames.size();
  j["fps"] = seq.fps;
  j["duration_s"] = seq.duration_s();
  j["cuts"] = cuts;
  j["accepted"] = verdict.accepted;
  j["reason"] = verdict.reason;
  out << j.dump() << "\n";
  return kExitOk;
}

struct GenSynthArgs {
  std::string out, config, kind;
  std::size_t n_scenes = 8;
  std::optional<std::size_t> frames;
  std::optional<std::uint64_t> seed;
  bool covis = false;
};

int run_gen_synth(const GenSynthArgs& a, std::ostream& out) {
  auto cfg = load_config(a.config);
  const std::uint64_t seed = resolve_seed(a.seed, cfg.seed);
  auto scene_cfg = cfg.data.scene;
  if (a.frames) scene_cfg.n_frames = *a.frames;
  if (!a.kind.empty()) scene_cfg.kind = synth::parse_kind(a.kind);
  const auto maps = synth::FeatureMaps::make(static_cast<std::size_t>(cfg.net.visual_tokens_per_frame),
                                             static_cast<std::size_t>(cfg.net.resolved_feature_dim()),
                                             cfg.data.projection_seed);
  sampling::Rng rng(seed);
  nlohmann::ordered_json manifest = nlohmann::ordered_json::array();
  fs::create_directories(a.out);
  for (std::size_t i = 0; i < a.n_scenes; ++i) {
    auto scene = synth::gen_scene(scene_cfg, maps, rng);
    if (a.covis) scene.covis = synth::covisibility_from_trajectory(scene.trajectory);
    char name[32];
    std::snprintf(name, sizeof name, "scene_%04zu", i);
    train::write_scene_dir(fs::path(a.out) / name, scene);
    manifest.push_back((fs::path(a.out) / name).string());
  }
  io::write_file(fs::path(a.out) / "manifest.json", manifest.dump(2) + "\n");
  out << manifest.dump() << "\n";
  return kExitOk;
}

struct GradCheckArgs {
  std::string config, loss = "total";
  std::optional<std::uint64_t> seed;
  std::size_t entries = 3;
  double h = 1e-5, tolerance = 1e-4;
  bool metric = false;
};

int run_grad_check(const GradCheckArgs& a, std::ostream& out) {
  auto cfg = load_config(a.config);
  const std::uint64_t seed = resolve_seed(a.seed, cfg.seed);
  net::TinyNet model(cfg.net, seed);
  const auto sample = train::probe_sample(cfg, a.metric, seed + 1);
  net::GradCheckOptions opts{a.entries, a.h, seed};
  const double err = net::grad_check_model(model, sample, cfg.loss,
                                           a.loss == "pose" ? net::CheckedLoss::pose : net::CheckedLoss::total, opts);
  const bool ok = err < a.tolerance;
  out << "max_rel_error=" << io::format_float(err) << " tolerance=" << io::format_float(a.tolerance) << " "
      << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? kExitOk : kExitData;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Camera-pose supervision toolkit", "posecam"};
  app.require_subcommand(1);

  EvalTrajArgs eval_a;
  auto* eval = app.add_subcommand("eval-traj", "ATE/RPE of predicted TUM trajectories as CSV");
  eval->add_option("--pred", eval_a.pred, "predicted trajectory file or directory")->required();
  eval->add_option("--gt", eval_a.gt, "ground-truth trajectory file or directory")->required();
  eval->add_option("--delta", eval_a.delta, "RPE frame offset")->check(CLI::PositiveNumber);
  eval->add_option("--protocol", eval_a.protocol, "frame protocol")
      ->check(CLI::IsMember({"none", "scannet", "tum_dynamic", "sintel"}));
  eval->add_option("--rot-agg", eval_a.rot_agg, "RPE rotation aggregation")->check(CLI::IsMember({"rmse", "mean"}));
  eval->add_option("--sequence", eval_a.sequence, "sequence name in the CSV row");
  eval->add_option("--out", eval_a.out, "CSV output path");

  AlignArgs align_a;
  auto* align = app.add_subcommand("align", "Sim(3) alignment of a prediction onto ground truth");
  align->add_option("--pred", align_a.pred)->required();
  align->add_option("--gt", align_a.gt)->required();
  align->add_option("--out", align_a.out, "aligned prediction (TUM)");

  SampleArgs sample_a;
  auto* sample = app.add_subcommand("sample", "Print sampled frame indices");
  sample->add_option("--mode", sample_a.mode)
      ->check(CLI::IsMember({"uniform", "jitter", "dynamic", "collection", "covis"}));
  sample->add_option("--frames", sample_a.frames, "total frames")->required();
  sample->add_option("--n", sample_a.n, "frames to draw")->required();
  sample->add_option("--alpha", sample_a.alpha);
  sample->add_option("--preset", sample_a.preset)->check(CLI::IsMember({"scannet", "scannetpp", "arkitscenes"}));
  sample->add_option("--p-video", sample_a.p_video);
  sample->add_option("--p-fix", sample_a.p_fix);
  sample->add_option("--i-min", sample_a.i_min);
  sample->add_option("--i-max", sample_a.i_max);
  sample->add_option("--covis", sample_a.covis, "covisibility CSV");
  sample->add_option("--tau", sample_a.tau);
  sample->add_option("--seed", sample_a.seed);

  TrainArgs train_a;
  auto* trainc = app.add_subcommand("train-synth", "Train the toy model on synthetic scenes");
  trainc->add_option("--config", train_a.config, "run configuration JSON");
  trainc->add_option("--seed", train_a.seed);
  trainc->add_option("--epochs", train_a.epochs);
  trainc->add_option("--variant", train_a.variant)->check(CLI::IsMember({"joint", "no_pose", "pose_only"}));
  trainc->add_option("--out", train_a.out, "metrics CSV path");
  trainc->add_option("--checkpoint", train_a.checkpoint, "checkpoint JSON path");
  trainc->add_flag("--verbose", train_a.verbose, "per-epoch progress on stderr");

  SceneCutArgs cut_a;
  auto* cut = app.add_subcommand("scene-cut", "Scene cuts and duration gate of a PPM frame directory");
  cut->add_option("--frames-dir", cut_a.frames_dir)->required();
  cut->add_option("--fps", cut_a.fps);
  cut->add_option("--content-th", cut_a.cut.content_threshold);
  cut->add_option("--bhatt-th", cut_a.cut.bhattacharyya_threshold);
  cut->add_option("--min-s", cut_a.cut.min_duration_s);
  cut->add_option("--bins", cut_a.cut.histogram_bins);
  cut->add_flag("--disjunctive", cut_a.disjunctive, "cut when either detector fires");

  GenSynthArgs gen_a;
  auto* gen = app.add_subcommand("gen-synth", "Write synthetic scenes and a manifest");
  gen->add_option("--out", gen_a.out, "output directory")->required();
  gen->add_option("--n-scenes", gen_a.n_scenes);
  gen->add_option("--frames", gen_a.frames);
  gen->add_option("--kind", gen_a.kind)->check(CLI::IsMember({"line", "arc", "random_walk"}));
  gen->add_option("--config", gen_a.config);
  gen->add_option("--seed", gen_a.seed);
  gen->add_flag("--covis", gen_a.covis, "also write covisibility matrices");

  GradCheckArgs gc_a;
  auto* gc = app.add_subcommand("grad-check", "Finite-difference check of the model gradients");
  gc->add_option("--config", gc_a.config);
  gc->add_option("--seed", gc_a.seed);
  gc->add_option("--loss", gc_a.loss)->check(CLI::IsMember({"total", "pose"}));
  gc->add_option("--entries", gc_a.entries);
  gc->add_option("--step", gc_a.h, "finite-difference step");
  gc->add_option("--tolerance", gc_a.tolerance);
  gc->add_flag("--metric", gc_a.metric, "use a metric-scale sample");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (eval->parsed()) return run_eval_traj(eval_a, out);
    if (align->parsed()) return run_align(align_a, out);
    if (sample->parsed()) return run_sample(sample_a, out);
    if (trainc->parsed()) return run_train(train_a, out, err);
    if (cut->parsed()) return run_scene_cut(cut_a, out);
    if (gen->parsed()) return run_gen_synth(gen_a, out);
    if (gc->parsed()) return run_grad_check(gc_a, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  err << app.help();
  return kExitUsage;
}

int cli_main(const std::vector<std::string>& args) { return cli_main(args, std::cout, std::cerr); }

}  // namespace posecam::cli
