#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "posecam/geom.hpp"
#include "posecam/synth.hpp"

namespace posecam::pipeline {

/// 8-bit RGB image, pixels interleaved row-major.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb;

  static Image solid(std::size_t width, std::size_t height, std::uint8_t r, std::uint8_t g, std::uint8_t b);
  std::size_t pixel_count() const { return width * height; }
};

struct FrameSeq {
  std::vector<Image> frames;
  double fps = 30.0;

  /// Throws InvalidInput on mixed dimensions or non-positive fps.
  void validate() const;
  double duration_s() const { return static_cast<double>(frames.size()) / fps; }
};

struct CutConfig {
  double content_threshold = 45.0;
  double bhattacharyya_threshold = 0.65;
  double min_duration_s = 3.0;
  /// Require both detectors to fire (true) or either (false).
  bool conjunctive = true;
  int histogram_bins = 32;

  void validate() const;
};

/// HSV of an RGB pixel with every channel scaled to [0, 255].
std::array<double, 3> rgb_to_hsv(std::uint8_t r, std::uint8_t g, std::uint8_t b);

/// Mean absolute per-pixel change averaged over the H, S and V channels.
double hsv_content_score(const Image& a, const Image& b);

/// sqrt(1 - sum_i sqrt(a_i b_i)) after L1-normalizing both histograms.
double bhattacharyya_distance(std::span<const double> a, std::span<const double> b);

/// Per-channel HSV histograms (bins each), each L1-normalized, concatenated H|S|V.
std::vector<double> hsv_histogram(const Image& image, int bins);

/// Largest per-channel Bhattacharyya distance between two frames' HSV histograms.
double histogram_distance(const Image& a, const Image& b, int bins);

/// Frame indices i where the transition (i-1 -> i) is a scene cut.
std::vector<std::size_t> detect_cuts(const FrameSeq& seq, const CutConfig& config);

struct Verdict {
  bool accepted = false;
  std::string reason;
};

/// Accepts only cut-free clips lasting at least min_duration_s.
Verdict clip_gate(const FrameSeq& seq, std::span<const std::size_t> cuts, const CutConfig& config);

/// Nine yes/no answers of the pose-suitability screen. Flags 1-7 reject;
/// dynamic_scene and low_parallax are metadata only.
struct FilterVerdict {
  bool synthetic = false;
  bool text_overlay = false;
  bool screen_recording = false;
  bool blur = false;
  bool compression = false;
  bool lighting = false;
  bool reflection = false;
  bool dynamic_scene = false;
  bool low_parallax = false;
  bool suitable_for_pose = true;

  bool any_rejection() const;
  std::string to_json() const;
  /// Parses the wire format; suitable_for_pose is recomputed from the flags.
  /// Throws FormatError on missing or non-boolean fields.
  static FilterVerdict from_json(const std::string& text);
};

struct Clip {
  std::string id;
  const FrameSeq* frames = nullptr;
};

/// Source of wire-format screening answers for a clip.
class FilterClient {
 public:
  virtual ~FilterClient() = default;
  /// JSON object with the nine flags and suitable_for_pose; may throw.
  virtual std::string query(const Clip& clip) = 0;
  virtual bool concurrent_safe() const { return false; }
};

/// Returns the same verdict for every clip.
class StubFilterClient : public FilterClient {
 public:
  explicit StubFilterClient(FilterVerdict verdict) : verdict_(verdict) {}
  std::string query(const Clip&) override { return verdict_.to_json(); }
  bool concurrent_safe() const override { return true; }

 private:
  FilterVerdict verdict_;
};

/// Replays stored responses keyed by clip id; unknown ids throw.
class RecordedFilterClient : public FilterClient {
 public:
  explicit RecordedFilterClient(std::map<std::string, std::string> responses) : responses_(std::move(responses)) {}
  std::string query(const Clip& clip) override;
  bool concurrent_safe() const override { return true; }

 private:
  std::map<std::string, std::string> responses_;
};

/// At most one in-flight request to the wrapped client.
class SerializedFilterClient : public FilterClient {
 public:
  explicit SerializedFilterClient(FilterClient& inner) : inner_(inner) {}
  std::string query(const Clip& clip) override;
  bool concurrent_safe() const override { return true; }

 private:
  FilterClient& inner_;
  std::mutex mutex_;
};

enum class FilterStatus { suitable, unsuitable, unprocessed };

struct FilterOutcome {
  FilterStatus status = FilterStatus::unprocessed;
  std::optional<FilterVerdict> verdict;
  std::string error;
};

/// Client failures and malformed replies leave the clip unprocessed.
FilterOutcome vlm_filter(FilterClient& client, const Clip& clip);

/// Produces a per-frame camera trajectory for a clip.
class PoseEngine {
 public:
  virtual ~PoseEngine() = default;
  virtual std::vector<geom::TimedPose> estimate(const Clip& clip) = 0;
};

/// Reads precomputed `<dir>/<clip id>.txt` TUM trajectories.
class FilePoseEngine : public PoseEngine {
 public:
  explicit FilePoseEngine(std::filesystem::path dir) : dir_(std::move(dir)) {}
  std::vector<geom::TimedPose> estimate(const Clip& clip) override;

 private:
  std::filesystem::path dir_;
};

/// Deterministic synthetic trajectories seeded from the clip id.
class SynthPoseEngine : public PoseEngine {
 public:
  SynthPoseEngine(synth::TrajectoryKind kind, double step_scale, std::uint64_t seed)
      : kind_(kind), step_scale_(step_scale), seed_(seed) {}
  std::vector<geom::TimedPose> estimate(const Clip& clip) override;

 private:
  synth::TrajectoryKind kind_;
  double step_scale_;
  std::uint64_t seed_;
};

/// Rejects non-finite values, non-increasing timestamps, zero quaternions and
/// static trajectories.
Verdict trajectory_qc(std::span<const geom::TimedPose> poses);
Verdict trajectory_qc(const geom::Trajectory& traj);

/// Binary (P6) or ASCII (P3) PPM with maxval <= 255.
Image read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Image& image);

/// All *.ppm files of a directory in name order. fps comes from the argument
/// or, when absent, from an `fps.txt` sidecar.
FrameSeq load_frames_dir(const std::filesystem::path& dir, std::optional<double> fps);

}  // namespace posecam::pipeline
