/* Copyright 2026 The lsdebias Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "lsdebias/smoothing.hpp"

#include <cmath>
#include <random>

#include "gtest/gtest.h"
#include "test_util.hpp"

namespace lsdebias {
namespace {

using testing::random_dist;

void ExpectDistNear(const ProbDist& got, std::vector<double> want, double tol) {
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(got[i], want[i], tol) << "index " << i;
}

TEST(Smooth, OneHot) {
  ExpectDistNear(smooth(ProbDist{1, 0, 0, 0}, {0.1, 4}), {0.925, 0.025, 0.025, 0.025}, 1e-15);
}

TEST(Smooth, AlphaZeroIsIdentity) {
  std::mt19937_64 rng(1);
  const ProbDist q = random_dist(10, rng);
  EXPECT_EQ(smooth(q, {0.0, 10}), q);
}

TEST(Smooth, UniformIsFixedPoint) {
  for (double a : {0.0, 0.1, 0.5, 0.9}) {
    ExpectDistNear(smooth(ProbDist{0.25, 0.25, 0.25, 0.25}, {a, 4}), {0.25, 0.25, 0.25, 0.25}, 1e-15);
  }
}

TEST(Smooth, DimensionMismatch) { EXPECT_THROW(smooth(ProbDist{1, 0, 0}, {0.1, 4}), InputError); }

TEST(SmoothingConfig, RejectsBadAlpha) {
  EXPECT_THROW(SmoothingConfig(1.0, 4), InputError);
  EXPECT_THROW(SmoothingConfig(-0.1, 4), InputError);
  EXPECT_THROW(SmoothingConfig(0.1, 1), InputError);
}

TEST(Smooth, OutputRangeAndValidity) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> alpha(0.0, 0.99);
  for (int i = 0; i < 500; ++i) {
    const std::size_t v = 2 + rng() % 200;
    const SmoothingConfig cfg(alpha(rng), v);
    const ProbDist p = smooth(random_dist(v, rng, 0.5), cfg);
    EXPECT_FALSE(validate_dist(p).has_value());
    for (std::size_t j = 0; j < v; ++j) {
      EXPECT_GE(p[j], cfg.floor() - 1e-15);
      EXPECT_LE(p[j], cfg.ceiling() + 1e-15);
    }
  }
}

TEST(DebiasExact, InvertsSmoothExample) {
  ExpectDistNear(debias_exact(ProbDist{0.925, 0.025, 0.025, 0.025}, {0.1, 4}), {1, 0, 0, 0}, 1e-15);
}

TEST(DebiasExact, RoundTrip) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> alpha(0.001, 0.99);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t v = 2 + rng() % 100;
    const SmoothingConfig cfg(alpha(rng), v);
    const ProbDist q = random_dist(v, rng, 0.3);
    const ProbDist back = debias_exact(smooth(q, cfg), cfg);
    for (std::size_t j = 0; j < v; ++j) ASSERT_NEAR(back[j], q[j], 1e-12);
  }
}

TEST(DebiasExact, BelowFloorIsDomainError) {
  EXPECT_THROW(debias_exact(ProbDist{0.949, 0.025, 0.025, 0.001}, {0.1, 4}), DomainError);
}

TEST(Rectify, RecoversOneHot) {
  const ProbDist out = rectify(ProbDist{0.925, 0.025, 0.025, 0.025}, RectifierConfig(0.025));
  EXPECT_EQ(out, (ProbDist{1, 0, 0, 0}));
}

TEST(Rectify, DeltaZeroIsIdentity) {
  std::mt19937_64 rng(4);
  const ProbDist p = random_dist(12, rng);
  EXPECT_EQ(rectify(p, RectifierConfig(0.0)), p);
}

TEST(Rectify, HandExample) {
  // ReLU([0.7, 0.2, 0.1] - 0.15) = [0.55, 0.05, 0], total 0.6.
  const ProbDist out = rectify(ProbDist{0.7, 0.2, 0.1}, RectifierConfig(0.15));
  ExpectDistNear(out, {0.55 / 0.60, 0.05 / 0.60, 0.0}, 1e-15);
  EXPECT_EQ(out[2], 0.0);
}

TEST(Rectify, DegenerateInput) {
  EXPECT_THROW(rectify(ProbDist{0.5, 0.5}, RectifierConfig(0.5)), DegenerateInputError);
  EXPECT_EQ(rectify_or_argmax(ProbDist{0.3, 0.4, 0.3}, RectifierConfig(0.5)), (ProbDist{0, 1, 0}));
  EXPECT_EQ(rectify_or_argmax(ProbDist{0.5, 0.5}, RectifierConfig(2.0)), (ProbDist{1, 0}));
}

TEST(Rectify, NegativeDeltaRejected) { EXPECT_THROW(RectifierConfig(-0.1), InputError); }

TEST(Rectify, PreservesOrderAndArgmax) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> frac(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t v = 2 + rng() % 50;
    const ProbDist p = random_dist(v, rng, 0.2);
    // Keep delta below the max so the input is never degenerate.
    const double delta = frac(rng) * p[static_cast<std::size_t>(p.argmax())] * 0.999;
    const ProbDist r = rectify(p, RectifierConfig(delta));
    EXPECT_FALSE(validate_dist(r).has_value());
    EXPECT_EQ(r.argmax(), p.argmax());
    for (std::size_t a = 0; a < v; ++a) {
      if (p[a] <= delta) {
        EXPECT_EQ(r[a], 0.0);
      }
      for (std::size_t b = 0; b < v; ++b) {
        if (p[a] > delta && p[b] > delta && p[a] < p[b]) {
          EXPECT_LE(r[a], r[b]);
        }
      }
    }
  }
}

TEST(Rectify, UndoesSmoothingOnSparseDistributions) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> alpha(0.01, 0.5);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t v = 3 + rng() % 100;
    const SmoothingConfig cfg(alpha(rng), v);
    ProbDist q = random_dist(v, rng, 0.6);
    const ProbDist r = rectify(smooth(q, cfg), RectifierConfig(cfg.floor()));
    for (std::size_t j = 0; j < v; ++j) {
      ASSERT_NEAR(r[j], q[j], 1e-12);
      if (q[j] == 0.0) {
        ASSERT_EQ(r[j], 0.0);
      }
    }
  }
}

TEST(PerTokenPenalty, Values) {
  EXPECT_NEAR(per_token_penalty({0.1, 4}), -0.10536, 1e-5);
  EXPECT_EQ(per_token_penalty({0.0, 4}), 0.0);
  EXPECT_NEAR(per_token_penalty({0.5, 4}), std::log(0.5), 1e-15);
}

// Largest T with ceiling^T >= floor, by repeated multiplication.
long long BruteForceTMax(double alpha, std::size_t v) {
  const long double floor = static_cast<long double>(alpha) / v;
  const long double ceiling = 1.0L - alpha + floor;
  long double prod = 1.0L;
  long long t = 0;
  while (prod * ceiling >= floor) {
    prod *= ceiling;
    ++t;
  }
  return t;
}

TEST(LengthBound, LargeVocabulary) {
  const auto b = length_bound({0.1, 32000});
  ASSERT_TRUE(b.has_value());
  EXPECT_GT(b->continuous_bound, 120.3);
  EXPECT_LT(b->continuous_bound, 120.4);
  EXPECT_EQ(b->t_max, 120);
}

TEST(LengthBound, SmallVocabulary) {
  const auto b = length_bound({0.1, 4});
  ASSERT_TRUE(b.has_value());
  EXPECT_NEAR(b->continuous_bound, std::log(0.025) / std::log(0.925), 1e-12);
  EXPECT_NEAR(b->continuous_bound, 47.32, 0.01);
  EXPECT_EQ(b->t_max, 47);
}

TEST(LengthBound, NoBoundWithoutSmoothing) { EXPECT_FALSE(length_bound({0.0, 32000}).has_value()); }

TEST(LengthBound, ConsistentWithScoreBounds) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> alpha(0.01, 0.9);
  for (int i = 0; i < 300; ++i) {
    const double a = alpha(rng);
    const std::size_t v = 2 + rng() % 50000;
    const SmoothingConfig cfg(a, v);
    const auto b = length_bound(cfg);
    ASSERT_TRUE(b.has_value());
    EXPECT_EQ(b->t_max, BruteForceTMax(a, v)) << "alpha=" << a << " V=" << v;
    if (b->t_max >= 1) {
      EXPECT_GE(score_bounds(cfg, b->t_max).length_upper, cfg.floor() * (1 - 1e-12));
    }
    EXPECT_LT(score_bounds(cfg, b->t_max + 1).length_upper, cfg.floor() * (1 + 1e-12));
  }
}

TEST(ScoreBounds, Examples) {
  const SmoothingConfig cfg(0.1, 32000);
  const auto at121 = score_bounds(cfg, 121);
  EXPECT_DOUBLE_EQ(at121.empty_lower, 3.125e-6);
  EXPECT_LT(at121.length_upper, at121.empty_lower);
  const auto at120 = score_bounds(cfg, 120);
  EXPECT_GT(at120.length_upper, at120.empty_lower);
  EXPECT_DOUBLE_EQ(score_bounds({0.2, 10}, 1).length_upper, 1 - 0.2 + 0.02);
  EXPECT_THROW(score_bounds(cfg, 0), InputError);
}

}  // namespace
}  // namespace lsdebias
