#include "posecam/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "posecam/errors.hpp"

namespace posecam::sampling {

namespace {

std::size_t uniform_int(std::size_t lo, std::size_t hi, Rng& rng) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

bool bernoulli(double p, Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

}  // namespace

void JitterConfig::validate() const {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw ConfigError("jitter alpha must lie in [0, 1)");
}

void DynSampleParams::validate() const {
  if (!(p_video >= 0.0 && p_video <= 1.0) || !(p_fix >= 0.0 && p_fix <= 1.0)) {
    throw ConfigError("sampling probabilities must lie in [0, 1]");
  }
  if (i_min < 1 || i_min > i_max) throw ConfigError("need 1 <= i_min <= i_max");
}

DynSampleParams DynSampleParams::preset(std::string_view dataset) {
  if (dataset == "scannet") return {0.6, 0.6, 30, 100};
  if (dataset == "scannetpp" || dataset == "arkitscenes") return {0.8, 0.5, 30, 100};
  throw ConfigError("no sampling preset for dataset '" + std::string(dataset) + "'");
}

void CovisGraph::validate() const {
  if (covis.rows() != covis.cols()) throw InvalidInput("covisibility matrix must be square");
  for (Eigen::Index i = 0; i < covis.rows(); ++i) {
    for (Eigen::Index j = 0; j < covis.cols(); ++j) {
      const double v = covis(i, j);
      if (!(v >= 0.0 && v <= 1.0)) throw InvalidInput("covisibility scores must lie in [0, 1]");
      if (v != covis(j, i)) throw InvalidInput("covisibility matrix must be symmetric");
    }
  }
}

Indices uniform_indices(std::size_t total_frames, std::size_t n_frames) {
  if (n_frames == 0 || n_frames > total_frames) {
    throw InvalidInput("uniform sampling needs 1 <= N <= L");
  }
  if (n_frames == 1) return {0};
  Indices out(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) out[i] = i * (total_frames - 1) / (n_frames - 1);
  return out;
}

Indices jitter_indices(const Indices& indices, std::size_t total_frames, double alpha, Rng& rng) {
  JitterConfig{alpha}.validate();
  if (indices.empty()) return {};
  const auto delta = static_cast<long long>(std::floor(static_cast<double>(total_frames) * alpha));
  if (delta == 0) return indices;

  std::uniform_int_distribution<long long> offset(-delta, delta);
  const auto last = static_cast<long long>(total_frames) - 1;
  const std::size_t n = indices.size();
  Indices out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const long long u = static_cast<long long>(indices[i]) + offset(rng);
    const long long hi =
        i + 1 < n ? std::max(0LL, static_cast<long long>(indices[i + 1]) - 1) : last;
    out[i] = static_cast<std::size_t>(std::clamp(u, 0LL, hi));
  }
  for (std::size_t i = 1; i < n; ++i) out[i] = std::max(out[i], out[i - 1]);
  return out;
}

Indices collection_sample(std::size_t total_frames, std::size_t n_frames, Rng& rng) {
  if (n_frames > total_frames) throw InvalidInput("cannot draw more frames than the video has");
  Indices pool(total_frames);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < n_frames; ++i) {
    std::swap(pool[i], pool[uniform_int(i, total_frames - 1, rng)]);
  }
  pool.resize(n_frames);
  std::sort(pool.begin(), pool.end());
  return pool;
}

Indices dynamic_temporal_sample(std::size_t total_frames, std::size_t n_frames,
                                const DynSampleParams& params, Rng& rng) {
  params.validate();
  if (n_frames == 0) throw InvalidInput("need at least one frame");
  if (total_frames < n_frames) throw InvalidInput("video shorter than requested frame count");

  const bool video = bernoulli(params.p_video, rng);
  const std::size_t max_span = (n_frames - 1) * params.i_max;
  if (!video || max_span > total_frames - 1) return collection_sample(total_frames, n_frames, rng);

  const bool fixed = bernoulli(params.p_fix, rng);
  Indices out(n_frames);
  out[0] = uniform_int(0, total_frames - 1 - max_span, rng);
  const std::size_t interval = fixed ? uniform_int(params.i_min, params.i_max, rng) : 0;
  for (std::size_t i = 1; i < n_frames; ++i) {
    out[i] = out[i - 1] + (fixed ? interval : uniform_int(params.i_min, params.i_max, rng));
  }
  return out;
}

CovisWalkResult covis_walk_sample(const CovisGraph& graph, std::size_t n_frames, double tau,
                                  Rng& rng) {
  if (n_frames == 0) throw InvalidInput("need at least one frame");
  if (!(tau >= 0.0 && tau < 1.0)) throw InvalidInput("tau must lie in [0, 1)");
  const std::size_t n = graph.n_frames();
  if (graph.covis.cols() != graph.covis.rows()) throw InvalidInput("covisibility matrix must be square");

  std::vector<bool> excluded(n, false);
  for (int attempt = 0; attempt <= kMaxWalkRestarts; ++attempt) {
    Indices starts;
    for (std::size_t i = 0; i < n; ++i) {
      if (!excluded[i]) starts.push_back(i);
    }
    // Every component has been tried; the remaining restarts cannot succeed.
    if (starts.empty()) break;

    CovisWalkResult res;
    res.restarts = attempt;
    std::vector<bool> visited(n, false);
    const std::size_t start = starts[uniform_int(0, starts.size() - 1, rng)];
    visited[start] = true;
    res.walk_order.push_back(start);
    Indices stack{start};

    Indices candidates;
    while (res.walk_order.size() < n_frames && !stack.empty()) {
      const std::size_t cur = stack.back();
      candidates.clear();
      for (std::size_t j = 0; j < n; ++j) {
        if (j != cur && !visited[j] && !excluded[j] &&
            graph.covis(static_cast<Eigen::Index>(cur), static_cast<Eigen::Index>(j)) > tau) {
          candidates.push_back(j);
        }
      }
      if (candidates.empty()) {
        stack.pop_back();
        continue;
      }
      const std::size_t next = candidates[uniform_int(0, candidates.size() - 1, rng)];
      visited[next] = true;
      res.walk_order.push_back(next);
      res.edges.emplace_back(cur, next);
      stack.push_back(next);
    }

    if (res.walk_order.size() == n_frames) {
      res.indices = res.walk_order;
      std::sort(res.indices.begin(), res.indices.end());
      return res;
    }
    for (std::size_t v : res.walk_order) excluded[v] = true;
  }
  throw SamplingFailed("covisibility walk: frame budget not reached after restarts",
                       kMaxWalkRestarts);
}

}  // namespace posecam::sampling
