#include <algorithm>
#include <set>

#include <gtest/gtest.h>

#include "posecam/errors.hpp"
#include "posecam/sampling.hpp"

using namespace posecam;
using sampling::Indices;
using sampling::Rng;

namespace {

sampling::CovisGraph two_components(double tau) {
  // Nodes 0-2 and 3-7 form two chains; scores across components stay at tau.
  sampling::CovisGraph g{Eigen::MatrixXd::Constant(8, 8, tau)};
  for (int i = 0; i < 8; ++i) g.covis(i, i) = 1.0;
  for (int i = 0; i < 2; ++i) g.covis(i, i + 1) = g.covis(i + 1, i) = 0.9;
  for (int i = 3; i < 7; ++i) g.covis(i, i + 1) = g.covis(i + 1, i) = 0.9;
  return g;
}

}  // namespace

TEST(Uniform, Examples) {
  EXPECT_EQ(sampling::uniform_indices(10, 4), (Indices{0, 3, 6, 9}));
  EXPECT_EQ(sampling::uniform_indices(4, 4), (Indices{0, 1, 2, 3}));
  EXPECT_EQ(sampling::uniform_indices(50, 1), (Indices{0}));
  EXPECT_THROW(sampling::uniform_indices(3, 4), InvalidInput);
  EXPECT_THROW(sampling::uniform_indices(3, 0), InvalidInput);
}

TEST(Uniform, EndpointsAndFormula) {
  for (std::size_t l = 2; l < 60; ++l) {
    for (std::size_t n = 2; n <= l; ++n) {
      const auto idx = sampling::uniform_indices(l, n);
      ASSERT_EQ(idx.size(), n);
      EXPECT_EQ(idx.front(), 0u);
      EXPECT_EQ(idx.back(), l - 1);
      for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(idx[i], (i * (l - 1)) / (n - 1));
      EXPECT_EQ(idx, sampling::uniform_indices(l, n));
    }
  }
}

TEST(Jitter, IdentityCases) {
  Rng rng(1);
  const auto u = sampling::uniform_indices(100, 8);
  EXPECT_EQ(sampling::jitter_indices(u, 100, 0.0, rng), u);
  EXPECT_EQ(sampling::jitter_indices(u, 100, 0.005, rng), u);
  const auto w = sampling::uniform_indices(1000, 8);
  EXPECT_EQ(sampling::jitter_indices(w, 1000, 0.0, rng), w);
}

TEST(Jitter, PropertiesOverSeededTrials) {
  const std::size_t l = 1000;
  const auto u = sampling::uniform_indices(l, 16);
  bool moved = false;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    Rng rng(seed);
    const auto out = sampling::jitter_indices(u, l, 0.005, rng);
    ASSERT_EQ(out.size(), u.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      ASSERT_LT(out[i], l);
      if (i) ASSERT_LE(out[i - 1], out[i]);
      moved |= out[i] != u[i];
    }
  }
  EXPECT_TRUE(moved);
}

TEST(Jitter, OffsetsBoundedBeforeMonotonePass) {
  // With well separated indices the monotone pass never fires, so the output
  // shows the raw clipped offsets.
  const std::size_t l = 1000;
  const auto u = sampling::uniform_indices(l, 10);
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    Rng rng(seed);
    const auto out = sampling::jitter_indices(u, l, 0.005, rng);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const long long d = static_cast<long long>(out[i]) - static_cast<long long>(u[i]);
      ASSERT_LE(std::abs(d), 5);
    }
  }
}

TEST(Jitter, ClipsAgainstNextPreJitterIndex) {
  const Indices u{0, 1, 2, 3};
  for (std::uint64_t seed = 0; seed < 2000; ++seed) {
    Rng rng(seed);
    const auto out = sampling::jitter_indices(u, 400, 0.01, rng);
    for (std::size_t i = 0; i + 1 < u.size(); ++i) ASSERT_LE(out[i], u[i + 1] - 1);
    ASSERT_LE(out.back(), 399u);
  }
}

TEST(Jitter, RejectsBadAlpha) {
  Rng rng(0);
  EXPECT_THROW(sampling::jitter_indices({0, 1}, 10, -0.1, rng), ConfigError);
}

TEST(Dynamic, FixedProgression) {
  Rng rng(3);
  const sampling::DynSampleParams p{1.0, 1.0, 30, 30};
  const auto idx = sampling::dynamic_temporal_sample(1000, 5, p, rng);
  for (std::size_t i = 1; i < idx.size(); ++i) EXPECT_EQ(idx[i] - idx[i - 1], 30u);
  EXPECT_LE(idx.back(), 999u);
}

TEST(Dynamic, StartAtZeroWhenSpanFillsVideo) {
  Rng rng(4);
  const sampling::DynSampleParams p{1.0, 1.0, 30, 30};
  EXPECT_EQ(sampling::dynamic_temporal_sample(91, 4, p, rng), (Indices{0, 30, 60, 90}));
}

TEST(Dynamic, VideoModeGapsWithinBounds) {
  for (double p_fix : {0.0, 1.0, 0.5}) {
    const sampling::DynSampleParams p{1.0, p_fix, 3, 9};
    for (std::uint64_t seed = 0; seed < 2000; ++seed) {
      Rng rng(seed);
      const auto idx = sampling::dynamic_temporal_sample(200, 8, p, rng);
      ASSERT_EQ(idx.size(), 8u);
      for (std::size_t i = 1; i < idx.size(); ++i) {
        ASSERT_GE(idx[i] - idx[i - 1], 3u);
        ASSERT_LE(idx[i] - idx[i - 1], 9u);
      }
      ASSERT_LT(idx.back(), 200u);
      if (p_fix == 1.0) {
        for (std::size_t i = 2; i < idx.size(); ++i) ASSERT_EQ(idx[i] - idx[i - 1], idx[1] - idx[0]);
      }
    }
  }
}

TEST(Dynamic, CollectionModeDistinctSorted) {
  const sampling::DynSampleParams p{0.0, 0.5, 30, 100};
  for (std::uint64_t seed = 0; seed < 2000; ++seed) {
    Rng rng(seed);
    const auto idx = sampling::dynamic_temporal_sample(50, 10, p, rng);
    ASSERT_EQ(idx.size(), 10u);
    ASSERT_TRUE(std::is_sorted(idx.begin(), idx.end()));
    ASSERT_EQ(std::set<std::size_t>(idx.begin(), idx.end()).size(), 10u);
    ASSERT_LT(idx.back(), 50u);
  }
}

TEST(Dynamic, Presets) {
  const auto s = sampling::DynSampleParams::preset("scannet");
  EXPECT_EQ(s.p_video, 0.6);
  EXPECT_EQ(s.p_fix, 0.6);
  EXPECT_EQ(s.i_min, 30u);
  EXPECT_EQ(s.i_max, 100u);
  for (const char* name : {"scannetpp", "arkitscenes"}) {
    const auto p = sampling::DynSampleParams::preset(name);
    EXPECT_EQ(p.p_video, 0.8);
    EXPECT_EQ(p.p_fix, 0.5);
    EXPECT_EQ(p.i_min, 30u);
    EXPECT_EQ(p.i_max, 100u);
  }
  EXPECT_THROW(sampling::DynSampleParams::preset("kitti"), ConfigError);
}

TEST(Dynamic, Validation) {
  Rng rng(0);
  EXPECT_THROW(sampling::dynamic_temporal_sample(100, 4, {1.5, 0.5, 3, 9}, rng), ConfigError);
  EXPECT_THROW(sampling::dynamic_temporal_sample(100, 4, {0.5, 0.5, 9, 3}, rng), ConfigError);
  EXPECT_THROW(sampling::dynamic_temporal_sample(3, 4, {0.5, 0.5, 3, 9}, rng), InvalidInput);
}

TEST(CovisWalk, CompleteGraph) {
  sampling::CovisGraph g{Eigen::MatrixXd::Ones(12, 12)};
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const auto r = sampling::covis_walk_sample(g, 7, 0.99, rng);
    EXPECT_EQ(r.indices.size(), 7u);
    EXPECT_EQ(std::set<std::size_t>(r.indices.begin(), r.indices.end()).size(), 7u);
    EXPECT_EQ(r.restarts, 0);
  }
}

TEST(CovisWalk, StaysInsideLargeComponent) {
  const auto g = two_components(0.2);
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    Rng rng(seed);
    const auto r = sampling::covis_walk_sample(g, 5, 0.2, rng);
    ASSERT_EQ(r.indices, (Indices{3, 4, 5, 6, 7}));
    ASSERT_LE(r.restarts, 1);
  }
}

TEST(CovisWalk, EdgesExceedThresholdAndConnect) {
  Rng gen(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 15;
    sampling::CovisGraph g{Eigen::MatrixXd::Identity(n, n)};
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) g.covis(i, j) = g.covis(j, i) = u(gen);
    Rng rng(static_cast<std::uint64_t>(trial));
    try {
      const auto r = sampling::covis_walk_sample(g, 6, 0.7, rng);
      std::set<std::size_t> seen{r.walk_order.front()};
      for (const auto& [a, b] : r.edges) {
        ASSERT_GT(g.covis(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)), 0.7);
        ASSERT_TRUE(seen.count(a));
        seen.insert(b);
      }
      ASSERT_EQ(seen.size(), 6u);
      ASSERT_EQ(std::set<std::size_t>(r.indices.begin(), r.indices.end()), seen);
    } catch (const SamplingFailed& e) {
      ASSERT_EQ(e.restarts(), sampling::kMaxWalkRestarts);
    }
  }
}

TEST(CovisWalk, ImpossibleRequestFailsAfterFourRestarts) {
  const auto g = two_components(0.2);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    try {
      sampling::covis_walk_sample(g, 6, 0.2, rng);
      FAIL() << "expected SamplingFailed";
    } catch (const SamplingFailed& e) {
      EXPECT_EQ(e.restarts(), 4);
    }
  }
  sampling::CovisGraph isolated{Eigen::MatrixXd::Identity(10, 10)};
  Rng rng(1);
  try {
    sampling::covis_walk_sample(isolated, 2, 0.5, rng);
    FAIL() << "expected SamplingFailed";
  } catch (const SamplingFailed& e) {
    EXPECT_EQ(e.restarts(), 4);
  }
}

TEST(CovisWalk, RejectsBadTau) {
  sampling::CovisGraph g{Eigen::MatrixXd::Ones(3, 3)};
  Rng rng(0);
  EXPECT_THROW(sampling::covis_walk_sample(g, 2, 1.0, rng), InvalidInput);
  EXPECT_THROW(sampling::covis_walk_sample(g, 2, -0.1, rng), InvalidInput);
}

TEST(CovisGraph, Validation) {
  sampling::CovisGraph asym{Eigen::MatrixXd::Ones(3, 3)};
  asym.covis(0, 1) = 0.5;
  EXPECT_THROW(asym.validate(), InvalidInput);
  sampling::CovisGraph range{Eigen::MatrixXd::Constant(2, 2, 1.5)};
  EXPECT_THROW(range.validate(), InvalidInput);
}
