#include "posecam/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "posecam/errors.hpp"
#include "posecam/io.hpp"
#include "posecam/loss.hpp"

namespace posecam::pipeline {

namespace {

constexpr std::array<const char*, 9> kFlagNames = {
    "synthetic", "text_overlay", "screen_recording", "blur",         "compression",
    "lighting",  "reflection",   "dynamic_scene",    "low_parallax",
};

std::array<bool*, 9> flag_refs(FilterVerdict& v) {
  return {&v.synthetic,   &v.text_overlay, &v.screen_recording, &v.blur,        &v.compression,
          &v.lighting,    &v.reflection,   &v.dynamic_scene,    &v.low_parallax};
}

void check_same_dims(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height) throw InvalidInput("frame dimensions differ");
  if (a.rgb.size() != a.pixel_count() * 3 || b.rgb.size() != b.pixel_count() * 3)
    throw InvalidInput("pixel buffer does not match dimensions");
}

std::vector<std::array<double, 3>> to_hsv(const Image& img) {
  std::vector<std::array<double, 3>> out(img.pixel_count());
  for (std::size_t p = 0; p < out.size(); ++p)
    out[p] = rgb_to_hsv(img.rgb[3 * p], img.rgb[3 * p + 1], img.rgb[3 * p + 2]);
  return out;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

Image Image::solid(std::size_t width, std::size_t height, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  Image img{width, height, std::vector<std::uint8_t>(width * height * 3)};
  for (std::size_t p = 0; p < width * height; ++p) {
    img.rgb[3 * p] = r;
    img.rgb[3 * p + 1] = g;
    img.rgb[3 * p + 2] = b;
  }
  return img;
}

void FrameSeq::validate() const {
  if (!(fps > 0.0) || !std::isfinite(fps)) throw InvalidInput("fps must be positive");
  for (const auto& f : frames) {
    if (f.width != frames.front().width || f.height != frames.front().height)
      throw InvalidInput("frames have inconsistent dimensions");
    if (f.rgb.size() != f.pixel_count() * 3) throw InvalidInput("pixel buffer does not match dimensions");
  }
}

void CutConfig::validate() const {
  if (!(content_threshold > 0.0)) throw ConfigError("content_threshold must be positive");
  if (!(bhattacharyya_threshold > 0.0)) throw ConfigError("bhattacharyya_threshold must be positive");
  if (!(min_duration_s > 0.0)) throw ConfigError("min_duration_s must be positive");
  if (histogram_bins < 1 || histogram_bins > 256) throw ConfigError("histogram_bins must be in [1, 256]");
}

std::array<double, 3> rgb_to_hsv(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const double rd = r, gd = g, bd = b;
  const double mx = std::max({rd, gd, bd});
  const double mn = std::min({rd, gd, bd});
  const double delta = mx - mn;
  const double v = mx;
  const double s = mx > 0.0 ? 255.0 * delta / mx : 0.0;
  double h_deg = 0.0;
  if (delta > 0.0) {
    if (mx == rd) {
      h_deg = 60.0 * (gd - bd) / delta;
    } else if (mx == gd) {
      h_deg = 60.0 * (bd - rd) / delta + 120.0;
    } else {
      h_deg = 60.0 * (rd - gd) / delta + 240.0;
    }
    if (h_deg < 0.0) h_deg += 360.0;
  }
  return {h_deg * 255.0 / 360.0, s, v};
}

double hsv_content_score(const Image& a, const Image& b) {
  check_same_dims(a, b);
  const std::size_t n = a.pixel_count();
  if (n == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    const auto ha = rgb_to_hsv(a.rgb[3 * p], a.rgb[3 * p + 1], a.rgb[3 * p + 2]);
    const auto hb = rgb_to_hsv(b.rgb[3 * p], b.rgb[3 * p + 1], b.rgb[3 * p + 2]);
    sum += std::abs(ha[0] - hb[0]) + std::abs(ha[1] - hb[1]) + std::abs(ha[2] - hb[2]);
  }
  return sum / (3.0 * static_cast<double>(n));
}

double bhattacharyya_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidInput("histograms differ in bin count");
  double sa = 0.0, sb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < 0.0 || b[i] < 0.0) throw InvalidInput("negative histogram bin");
    sa += a[i];
    sb += b[i];
  }
  if (!(sa > 0.0) || !(sb > 0.0)) throw InvalidInput("empty histogram");
  double bc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) bc += std::sqrt((a[i] / sa) * (b[i] / sb));
  return std::sqrt(std::max(0.0, 1.0 - bc));
}

std::vector<double> hsv_histogram(const Image& image, int bins) {
  if (bins < 1) throw InvalidInput("bins must be positive");
  const auto nb = static_cast<std::size_t>(bins);
  std::vector<double> hist(3 * nb, 0.0);
  const auto hsv = to_hsv(image);
  for (const auto& px : hsv) {
    for (std::size_t c = 0; c < 3; ++c) {
      auto bin = static_cast<std::size_t>(px[c] / 256.0 * static_cast<double>(nb));
      hist[c * nb + std::min(bin, nb - 1)] += 1.0;
    }
  }
  if (!hsv.empty()) {
    for (auto& h : hist) h /= static_cast<double>(hsv.size());
  }
  return hist;
}

double histogram_distance(const Image& a, const Image& b, int bins) {
  check_same_dims(a, b);
  if (a.pixel_count() == 0) return 0.0;
  const auto ha = hsv_histogram(a, bins);
  const auto hb = hsv_histogram(b, bins);
  const auto nb = static_cast<std::size_t>(bins);
  double worst = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    worst = std::max(worst, bhattacharyya_distance(std::span(ha).subspan(c * nb, nb),
                                                   std::span(hb).subspan(c * nb, nb)));
  }
  return worst;
}

std::vector<std::size_t> detect_cuts(const FrameSeq& seq, const CutConfig& config) {
  seq.validate();
  config.validate();
  std::vector<std::size_t> cuts;
  for (std::size_t i = 1; i < seq.frames.size(); ++i) {
    const bool content = hsv_content_score(seq.frames[i - 1], seq.frames[i]) > config.content_threshold;
    if (config.conjunctive && !content) continue;
    const bool hist =
        histogram_distance(seq.frames[i - 1], seq.frames[i], config.histogram_bins) > config.bhattacharyya_threshold;
    if (config.conjunctive ? (content && hist) : (content || hist)) cuts.push_back(i);
  }
  return cuts;
}

Verdict clip_gate(const FrameSeq& seq, std::span<const std::size_t> cuts, const CutConfig& config) {
  if (!cuts.empty()) return {false, "scene cut at frame " + std::to_string(cuts.front())};
  const double duration = seq.duration_s();
  if (duration < config.min_duration_s) {
    std::ostringstream os;
    os << "duration " << duration << " s below minimum " << config.min_duration_s << " s";
    return {false, os.str()};
  }
  return {true, "ok"};
}

bool FilterVerdict::any_rejection() const {
  return synthetic || text_overlay || screen_recording || blur || compression || lighting || reflection;
}

std::string FilterVerdict::to_json() const {
  nlohmann::ordered_json j;
  auto copy = *this;
  const auto refs = flag_refs(copy);
  for (std::size_t i = 0; i < kFlagNames.size(); ++i) j[kFlagNames[i]] = *refs[i];
  j["suitable_for_pose"] = !any_rejection();
  return j.dump();
}

FilterVerdict FilterVerdict::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("filter reply is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("filter reply is not a JSON object");
  FilterVerdict v;
  const auto refs = flag_refs(v);
  for (std::size_t i = 0; i < kFlagNames.size(); ++i) {
    auto it = j.find(kFlagNames[i]);
    if (it == j.end() || !it->is_boolean())
      throw FormatError(std::string("filter reply lacks boolean field ") + kFlagNames[i]);
    *refs[i] = it->get<bool>();
  }
  if (auto it = j.find("suitable_for_pose"); it != j.end() && !it->is_boolean())
    throw FormatError("suitable_for_pose must be boolean");
  v.suitable_for_pose = !v.any_rejection();
  return v;
}

std::string RecordedFilterClient::query(const Clip& clip) {
  auto it = responses_.find(clip.id);
  if (it == responses_.end()) throw InvalidInput("no recorded response for clip " + clip.id);
  return it->second;
}

std::string SerializedFilterClient::query(const Clip& clip) {
  std::lock_guard lock(mutex_);
  return inner_.query(clip);
}

FilterOutcome vlm_filter(FilterClient& client, const Clip& clip) {
  FilterOutcome out;
  try {
    auto verdict = FilterVerdict::from_json(client.query(clip));
    out.status = verdict.suitable_for_pose ? FilterStatus::suitable : FilterStatus::unsuitable;
    out.verdict = verdict;
  } catch (const std::exception& e) {
    out.status = FilterStatus::unprocessed;
    out.error = e.what();
  }
  return out;
}

std::vector<geom::TimedPose> FilePoseEngine::estimate(const Clip& clip) {
  return io::parse_tum_records(io::read_file(dir_ / (clip.id + ".txt")));
}

std::vector<geom::TimedPose> SynthPoseEngine::estimate(const Clip& clip) {
  if (clip.frames == nullptr) throw InvalidInput("clip has no frames");
  synth::TrajectorySpec spec{kind_, clip.frames->frames.size(), step_scale_, std::nullopt, clip.frames->fps};
  synth::Rng rng(seed_ ^ fnv1a(clip.id));
  return synth::gen_trajectory(spec, rng).poses();
}

Verdict trajectory_qc(std::span<const geom::TimedPose> poses) {
  if (poses.size() < 2) return {false, "too few frames"};
  for (const auto& p : poses) {
    const auto& q = p.pose.rotation;
    const bool finite = std::isfinite(p.timestamp) && p.pose.translation.allFinite() && std::isfinite(q.w) &&
                        std::isfinite(q.x) && std::isfinite(q.y) && std::isfinite(q.z);
    if (!finite) return {false, "non-finite value"};
  }
  for (std::size_t i = 1; i < poses.size(); ++i) {
    if (!(poses[i].timestamp > poses[i - 1].timestamp)) return {false, "non-increasing timestamps"};
  }
  for (const auto& p : poses) {
    if (p.pose.rotation.squared_norm() == 0.0) return {false, "zero-norm quaternion"};
  }
  std::vector<Vec3> t;
  t.reserve(poses.size());
  for (const auto& p : poses) t.push_back(p.pose.translation);
  double d_bar = 0.0;
  try {
    d_bar = loss::mean_consecutive_distance(t);
  } catch (const DegenerateTrajectory&) {
    return {false, "degenerate mean step length"};
  }
  if (!(d_bar >= loss::kStaticEpsilon)) return {false, "degenerate mean step length"};
  return {true, "ok"};
}

Verdict trajectory_qc(const geom::Trajectory& traj) { return trajectory_qc(traj.poses()); }

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string ppm_token(std::istream& in) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string rest;
      std::getline(in, rest);
      if (!tok.empty()) break;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(c);
  }
  return tok;
}

std::size_t ppm_number(std::istream& in, const std::filesystem::path& path) {
  const auto tok = ppm_token(in);
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](char c) { return c >= '0' && c <= '9'; }))
    throw FormatError("bad PPM header in " + path.string());
  return std::stoul(tok);
}

}  // namespace

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  const auto magic = ppm_token(in);
  if (magic != "P6" && magic != "P3") throw FormatError("not a PPM file: " + path.string());
  Image img;
  img.width = ppm_number(in, path);
  img.height = ppm_number(in, path);
  const auto maxval = ppm_number(in, path);
  if (maxval == 0 || maxval > 255) throw FormatError("unsupported PPM maxval in " + path.string());
  img.rgb.resize(img.pixel_count() * 3);
  if (magic == "P6") {
    in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.rgb.size()))
      throw FormatError("truncated PPM data in " + path.string());
  } else {
    for (auto& v : img.rgb) {
      const auto x = ppm_number(in, path);
      if (x > maxval) throw FormatError("PPM sample exceeds maxval in " + path.string());
      v = static_cast<std::uint8_t>(x);
    }
  }
  if (maxval != 255) {
    for (auto& v : img.rgb) v = static_cast<std::uint8_t>(std::lround(v * 255.0 / static_cast<double>(maxval)));
  }
  return img;
}

void write_ppm(const std::filesystem::path& path, const Image& image) {
  if (image.rgb.size() != image.pixel_count() * 3) throw InvalidInput("pixel buffer does not match dimensions");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out << "P6\n" << image.width << " " << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.rgb.data()), static_cast<std::streamsize>(image.rgb.size()));
}

FrameSeq load_frames_dir(const std::filesystem::path& dir, std::optional<double> fps) {
  if (!std::filesystem::is_directory(dir)) throw InvalidInput("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".ppm") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  FrameSeq seq;
  if (fps) {
    seq.fps = *fps;
  } else {
    const auto sidecar = dir / "fps.txt";
    if (!std::filesystem::exists(sidecar)) throw InvalidInput("no fps given and no fps.txt in " + dir.string());
    std::istringstream in(io::read_file(sidecar));
    if (!(in >> seq.fps)) throw FormatError("fps.txt does not hold a number");
  }
  for (const auto& f : files) seq.frames.push_back(read_ppm(f));
  seq.validate();
  return seq;
}

}  // namespace posecam::pipeline
