#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "posecam/config.hpp"
#include "posecam/features.hpp"
#include "posecam/geom.hpp"
#include "posecam/sampling.hpp"

namespace posecam::io {

/// One "timestamp tx ty tz qx qy qz qw" line.
struct TumRecord {
  double timestamp = 0.0;
  double tx = 0.0, ty = 0.0, tz = 0.0;
  double qx = 0.0, qy = 0.0, qz = 0.0, qw = 1.0;

  geom::TimedPose to_pose() const;
  static TumRecord from_pose(const geom::TimedPose& p);
};

/// Parses TUM lines without checking timestamp order. `#` lines and blank
/// lines are skipped. Throws ParseError naming the offending line.
std::vector<geom::TimedPose> parse_tum_records(std::string_view text);

/// As above, then enforces strictly increasing timestamps (FormatError).
geom::Trajectory parse_tum(std::string_view text);

/// Header comment plus one line per pose, every number fixed to 9 decimals,
/// quaternion in (qx qy qz qw) order.
std::string write_tum(const geom::Trajectory& traj);

/// "%.9g".
std::string format_float(double v);

/// Row-major n × n CSV of covisibility scores.
sampling::CovisGraph parse_covis_csv(std::string_view text);

/// Versioned little-endian blob: "PCFB", u32 version, u64 frames, u64 tokens,
/// u64 dim, then row-major doubles.
std::string encode_feature_blob(const FrameFeatures& features);
FrameFeatures decode_feature_blob(std::string_view bytes);

/// Strict JSON run configuration: unknown keys are ConfigErrors.
train::RunConfig parse_run_config(std::string_view json_text);
std::string run_config_to_json(const train::RunConfig& config);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace posecam::io
