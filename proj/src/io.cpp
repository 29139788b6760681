#include "posecam/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "posecam/errors.hpp"

namespace posecam::io {

using nlohmann::json;
using nlohmann::ordered_json;

geom::TimedPose TumRecord::to_pose() const {
  geom::TimedPose p;
  p.timestamp = timestamp;
  p.pose.translation = Vec3(tx, ty, tz);
  p.pose.rotation = geom::Quat{qw, qx, qy, qz};
  return p;
}

TumRecord TumRecord::from_pose(const geom::TimedPose& p) {
  const auto& q = p.pose.rotation;
  const auto& t = p.pose.translation;
  return {p.timestamp, t.x(), t.y(), t.z(), q.x, q.y, q.z, q.w};
}

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    fn(line, line_no);
    if (nl == text.size()) break;
    pos = nl + 1;
  }
}

}  // namespace

std::vector<geom::TimedPose> parse_tum_records(std::string_view text) {
  std::vector<geom::TimedPose> poses;
  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    const auto fields = split_ws(line);
    if (fields.empty() || fields.front().front() == '#') return;
    if (fields.size() != 8)
      throw ParseError("expected 8 fields, found " + std::to_string(fields.size()), line_no);
    std::array<double, 8> v{};
    for (std::size_t i = 0; i < 8; ++i) {
      if (!parse_double(fields[i], v[i]) || !std::isfinite(v[i]))
        throw ParseError("not a finite number: '" + std::string(fields[i]) + "'", line_no);
    }
    TumRecord r{v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7]};
    if (r.qx == 0.0 && r.qy == 0.0 && r.qz == 0.0 && r.qw == 0.0) throw ParseError("zero quaternion", line_no);
    poses.push_back(r.to_pose());
  });
  return poses;
}

geom::Trajectory parse_tum(std::string_view text) { return geom::Trajectory(parse_tum_records(text)); }

std::string write_tum(const geom::Trajectory& traj) {
  std::string out = "# timestamp tx ty tz qx qy qz qw\n";
  char buf[320];
  for (const auto& p : traj) {
    const auto r = TumRecord::from_pose(p);
    std::snprintf(buf, sizeof buf, "%.9f %.9f %.9f %.9f %.9f %.9f %.9f %.9f\n", r.timestamp, r.tx, r.ty, r.tz, r.qx,
                  r.qy, r.qz, r.qw);
    out += buf;
  }
  return out;
}

std::string format_float(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

sampling::CovisGraph parse_covis_csv(std::string_view text) {
  std::vector<std::vector<double>> rows;
  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    if (split_ws(line).empty() || line.find_first_not_of(" \t") == std::string_view::npos) return;
    if (line.front() == '#') return;
    std::vector<double> row;
    std::size_t pos = 0;
    while (true) {
      auto comma = line.find(',', pos);
      auto cell = line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
      while (!cell.empty() && std::isspace(static_cast<unsigned char>(cell.front()))) cell.remove_prefix(1);
      while (!cell.empty() && std::isspace(static_cast<unsigned char>(cell.back()))) cell.remove_suffix(1);
      double v = 0.0;
      if (!parse_double(cell, v)) throw ParseError("not a number: '" + std::string(cell) + "'", line_no);
      row.push_back(v);
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ParseError("row length differs from the first row", line_no);
    rows.push_back(std::move(row));
  });
  if (rows.empty()) throw FormatError("empty covisibility matrix");
  if (rows.size() != rows.front().size()) throw FormatError("covisibility matrix is not square");
  sampling::CovisGraph g;
  const auto n = static_cast<Eigen::Index>(rows.size());
  g.covis.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) g.covis(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  try {
    g.validate();
  } catch (const InvalidInput& e) {
    throw FormatError(e.what());
  }
  return g;
}

namespace {

static_assert(std::endian::native == std::endian::little, "feature blobs assume a little-endian host");

constexpr char kBlobMagic[4] = {'P', 'C', 'F', 'B'};
constexpr std::uint32_t kBlobVersion = 1;
constexpr std::size_t kBlobHeader = 4 + 4 + 3 * 8;

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(std::string_view bytes, std::size_t& pos) {
  T v;
  std::memcpy(&v, bytes.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

std::string encode_feature_blob(const FrameFeatures& features) {
  if (static_cast<std::size_t>(features.data.rows()) != features.n_frames * features.tokens_per_frame)
    throw InvalidInput("feature rows do not match frames x tokens");
  std::string out(kBlobMagic, 4);
  put<std::uint32_t>(out, kBlobVersion);
  put<std::uint64_t>(out, features.n_frames);
  put<std::uint64_t>(out, features.tokens_per_frame);
  put<std::uint64_t>(out, features.dim());
  for (Eigen::Index r = 0; r < features.data.rows(); ++r)
    for (Eigen::Index c = 0; c < features.data.cols(); ++c) put<double>(out, features.data(r, c));
  return out;
}

FrameFeatures decode_feature_blob(std::string_view bytes) {
  if (bytes.size() < kBlobHeader || std::memcmp(bytes.data(), kBlobMagic, 4) != 0)
    throw FormatError("not a feature blob");
  std::size_t pos = 4;
  const auto version = take<std::uint32_t>(bytes, pos);
  if (version != kBlobVersion) throw FormatError("unsupported feature blob version " + std::to_string(version));
  const auto frames = take<std::uint64_t>(bytes, pos);
  const auto tokens = take<std::uint64_t>(bytes, pos);
  const auto dim = take<std::uint64_t>(bytes, pos);
  const auto rows = frames * tokens;
  if (dim != 0 && rows > (bytes.size() - kBlobHeader) / 8 / dim) throw FormatError("truncated feature blob");
  if (bytes.size() != kBlobHeader + rows * dim * 8) throw FormatError("feature blob size mismatch");
  FrameFeatures f{frames, tokens, Eigen::MatrixXd(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim))};
  for (Eigen::Index r = 0; r < f.data.rows(); ++r)
    for (Eigen::Index c = 0; c < f.data.cols(); ++c) f.data(r, c) = take<double>(bytes, pos);
  return f;
}

namespace {

// Reads fields of one JSON object and rejects any key that was not consumed.
class StrictObject {
 public:
  StrictObject(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  void read(const char* key, double& out) {
    if (const auto* v = find(key)) {
      if (!v->is_number()) throw ConfigError(where(key) + " must be a number");
      out = v->get<double>();
    }
  }
  void read(const char* key, int& out) {
    if (const auto* v = find(key)) {
      if (!v->is_number_integer()) throw ConfigError(where(key) + " must be an integer");
      out = v->get<int>();
    }
  }
  void read(const char* key, std::size_t& out) {
    if (const auto* v = find(key)) {
      if (!v->is_number_unsigned()) throw ConfigError(where(key) + " must be a non-negative integer");
      out = v->get<std::size_t>();
    }
  }
  void read(const char* key, bool& out) {
    if (const auto* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(where(key) + " must be a boolean");
      out = v->get<bool>();
    }
  }
  void read(const char* key, std::string& out) {
    if (const auto* v = find(key)) {
      if (!v->is_string()) throw ConfigError(where(key) + " must be a string");
      out = v->get<std::string>();
    }
  }
  void read(const char* key, std::vector<std::string>& out) {
    if (const auto* v = find(key)) {
      if (!v->is_array()) throw ConfigError(where(key) + " must be an array of strings");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_string()) throw ConfigError(where(key) + " must be an array of strings");
        out.push_back(e.get<std::string>());
      }
    }
  }
  template <typename Fn>
  void object(const char* key, Fn&& fn) {
    if (const auto* v = find(key)) {
      StrictObject child(*v, where(key));
      fn(child);
      child.finish();
    }
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError("unknown key " + where(k.c_str()));
    }
  }

 private:
  const json* find(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  std::string where() const { return path_.empty() ? "config" : path_; }
  std::string where(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

train::RunConfig parse_run_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  train::RunConfig c;
  StrictObject root(j, "");
  std::string variant{train::to_string(c.variant)};
  root.read("variant", variant);
  c.variant = train::parse_variant(variant);
  root.read("seed", c.seed);
  root.read("epochs", c.epochs);
  root.read("beta", c.beta);
  root.read("alpha", c.alpha);
  root.read("lambda_pose", c.loss.lambda_pose);
  root.read("batch_size", c.batch_size);
  root.read("manifest", c.manifest);
  root.object("net", [&](StrictObject& o) {
    o.read("hidden_dim", c.net.hidden_dim);
    o.read("n_layers", c.net.n_layers);
    o.read("n_heads", c.net.n_heads);
    o.read("visual_tokens_per_frame", c.net.visual_tokens_per_frame);
    o.read("vocab_size", c.net.vocab_size);
    o.read("head_layers", c.net.head_layers);
    o.read("head_dim", c.net.head_dim);
    o.read("feature_dim", c.net.feature_dim);
    o.read("mlp_ratio", c.net.mlp_ratio);
    o.read("projector_bias", c.net.projector_bias);
    o.read("head_positional", c.net.head_positional);
  });
  root.object("loss", [&](StrictObject& o) {
    o.read("w_translation", c.loss.w_translation);
    o.read("w_rotation", c.loss.w_rotation);
    o.read("w_fov", c.loss.w_fov);
  });
  root.object("optimizer", [&](StrictObject& o) {
    o.read("lr_backbone", c.optimizer.lr_backbone);
    o.read("head_lr_ratio", c.optimizer.head_lr_ratio);
    o.read("beta1", c.optimizer.beta1);
    o.read("beta2", c.optimizer.beta2);
    o.read("eps", c.optimizer.eps);
    o.read("weight_decay", c.optimizer.weight_decay);
    o.read("grad_clip", c.optimizer.grad_clip);
  });
  root.object("sampler", [&](StrictObject& o) {
    std::string preset;
    o.read("preset", preset);
    if (!preset.empty()) {
      try {
        c.dynamic = sampling::DynSampleParams::preset(preset);
      } catch (const Error& e) {
        throw ConfigError(e.what());
      }
    }
    o.read("p_video", c.dynamic.p_video);
    o.read("p_fix", c.dynamic.p_fix);
    o.read("i_min", c.dynamic.i_min);
    o.read("i_max", c.dynamic.i_max);
    o.read("covis_tau", c.covis_tau);
  });
  root.object("augment", [&](StrictObject& o) {
    o.read("color_jitter", c.augment.color_jitter);
    o.read("blur_prob", c.augment.blur_prob);
    o.read("blur_strength", c.augment.blur_strength);
    o.read("grayscale_prob", c.augment.grayscale_prob);
  });
  root.object("data", [&](StrictObject& o) {
    o.read("n_train_scenes", c.data.n_train_scenes);
    o.read("n_eval_scenes", c.data.n_eval_scenes);
    o.read("frames_per_sample", c.data.frames_per_sample);
    o.read("projection_seed", c.data.projection_seed);
    o.read("covis_fraction", c.data.covis_fraction);
    o.object("scene", [&](StrictObject& s) {
      auto& sc = c.data.scene;
      std::string kind{synth::to_string(sc.kind)};
      s.read("kind", kind);
      try {
        sc.kind = synth::parse_kind(kind);
      } catch (const Error& e) {
        throw ConfigError(e.what());
      }
      s.read("n_frames", sc.n_frames);
      s.read("step_scale", sc.step_scale);
      s.read("noise_sigma", sc.noise_sigma);
      s.read("metric_fraction", sc.metric_fraction);
      s.read("world_yaw_range", sc.world_yaw_range);
      s.read("world_offset", sc.world_offset);
      s.read("nonmetric_scale_spread", sc.nonmetric_scale_spread);
      s.read("fov_h_min", sc.fov_h_min);
      s.read("fov_h_max", sc.fov_h_max);
      s.read("fps", sc.fps);
    });
  });
  root.finish();
  try {
    c.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return c;
}

std::string run_config_to_json(const train::RunConfig& c) {
  ordered_json j;
  j["variant"] = std::string(train::to_string(c.variant));
  j["seed"] = c.seed;
  j["epochs"] = c.epochs;
  j["beta"] = c.beta;
  j["alpha"] = c.alpha;
  j["lambda_pose"] = c.loss.lambda_pose;
  j["batch_size"] = c.batch_size;
  j["manifest"] = c.manifest;
  j["net"] = {{"hidden_dim", c.net.hidden_dim},
              {"n_layers", c.net.n_layers},
              {"n_heads", c.net.n_heads},
              {"visual_tokens_per_frame", c.net.visual_tokens_per_frame},
              {"vocab_size", c.net.vocab_size},
              {"head_layers", c.net.head_layers},
              {"head_dim", c.net.head_dim},
              {"feature_dim", c.net.feature_dim},
              {"mlp_ratio", c.net.mlp_ratio},
              {"projector_bias", c.net.projector_bias},
              {"head_positional", c.net.head_positional}};
  j["loss"] = {{"w_translation", c.loss.w_translation},
               {"w_rotation", c.loss.w_rotation},
               {"w_fov", c.loss.w_fov}};
  j["optimizer"] = {{"lr_backbone", c.optimizer.lr_backbone},   {"head_lr_ratio", c.optimizer.head_lr_ratio},
                    {"beta1", c.optimizer.beta1},               {"beta2", c.optimizer.beta2},
                    {"eps", c.optimizer.eps},                   {"weight_decay", c.optimizer.weight_decay},
                    {"grad_clip", c.optimizer.grad_clip}};
  j["sampler"] = {{"p_video", c.dynamic.p_video},
                  {"p_fix", c.dynamic.p_fix},
                  {"i_min", c.dynamic.i_min},
                  {"i_max", c.dynamic.i_max},
                  {"covis_tau", c.covis_tau}};
  j["augment"] = {{"color_jitter", c.augment.color_jitter},
                  {"blur_prob", c.augment.blur_prob},
                  {"blur_strength", c.augment.blur_strength},
                  {"grayscale_prob", c.augment.grayscale_prob}};
  const auto& sc = c.data.scene;
  j["data"] = {{"n_train_scenes", c.data.n_train_scenes},
               {"n_eval_scenes", c.data.n_eval_scenes},
               {"frames_per_sample", c.data.frames_per_sample},
               {"projection_seed", c.data.projection_seed},
               {"covis_fraction", c.data.covis_fraction},
               {"scene",
                {{"kind", std::string(synth::to_string(sc.kind))},
                 {"n_frames", sc.n_frames},
                 {"step_scale", sc.step_scale},
                 {"noise_sigma", sc.noise_sigma},
                 {"metric_fraction", sc.metric_fraction},
                 {"world_yaw_range", sc.world_yaw_range},
                 {"world_offset", sc.world_offset},
                 {"nonmetric_scale_spread", sc.nonmetric_scale_spread},
                 {"fov_h_min", sc.fov_h_min},
                 {"fov_h_max", sc.fov_h_max},
                 {"fps", sc.fps}}}};
  return j.dump(2) + "\n";
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw InvalidInput("write failed for " + path.string());
}

}  // namespace posecam::io
