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

#pragma once

// Label smoothing and its inference-time inverses.
//
//   smooth:        q' = (1 - alpha) q + alpha / V
//   debias_exact:  q  = (p - alpha / V) / (1 - alpha)      (needs p >= alpha/V)
//   rectify:       p_i <- ReLU(p_i - delta) / sum_j ReLU(p_j - delta)
//
// A perfectly smoothed model emits entries in [alpha/V, 1 - alpha + alpha/V],
// so a sequence of length T has probability at most (1 - alpha + alpha/V)^T
// while the empty translation has at least alpha/V. length_bound() gives the
// length past which the first can never beat the second.

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>

#include "lsdebias/core.hpp"

namespace lsdebias {

class DegenerateInputError : public DomainError {
 public:
  using DomainError::DomainError;
};

struct SmoothingConfig {
  double alpha = 0.0;
  std::size_t vocab_size = 0;

  SmoothingConfig() = default;
  SmoothingConfig(double alpha_in, std::size_t v) : alpha(alpha_in), vocab_size(v) { validate(); }

  void validate() const {
    if (!(alpha >= 0.0 && alpha < 1.0)) {
      throw InputError("alpha must lie in [0, 1), got " + std::to_string(alpha));
    }
    if (vocab_size < 2) throw InputError("smoothing needs vocab_size >= 2");
  }

  // alpha / V, the floor of every smoothed entry.
  double floor() const { return alpha / static_cast<double>(vocab_size); }
  // 1 - alpha + alpha / V, the ceiling of every smoothed entry.
  double ceiling() const { return 1.0 - alpha + floor(); }
};

struct RectifierConfig {
  double delta = 0.0;

  RectifierConfig() = default;
  explicit RectifierConfig(double d) : delta(d) { validate(); }

  void validate() const {
    // delta >= 1 is accepted: every entry is clamped and decoding falls back
    // to the argmax, which is the limit of ever stronger rectification.
    if (!(delta >= 0.0 && std::isfinite(delta))) {
      throw InputError("delta must be finite and >= 0, got " + std::to_string(delta));
    }
  }
};

struct LengthBound {
  double alpha = 0.0;
  std::size_t vocab_size = 0;
  double continuous_bound = 0.0;
  // Longest length whose upper bound is not below the empty-translation floor.
  long long t_max = 0;
};

inline ProbDist smooth(const ProbDist& q, const SmoothingConfig& cfg) {
  cfg.validate();
  if (q.size() != cfg.vocab_size) {
    throw InputError("smooth: distribution has " + std::to_string(q.size()) +
                     " entries, config says V=" + std::to_string(cfg.vocab_size));
  }
  const double keep = 1.0 - cfg.alpha;
  const double floor = cfg.floor();
  std::vector<double> out(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) out[i] = keep * q[i] + floor;
  return ProbDist(std::move(out));
}

inline constexpr double kDebiasSlack = 1e-12;

inline ProbDist debias_exact(const ProbDist& p_hat, const SmoothingConfig& cfg) {
  cfg.validate();
  if (p_hat.size() != cfg.vocab_size) {
    throw InputError("debias_exact: dimension mismatch");
  }
  const double floor = cfg.floor();
  const double keep = 1.0 - cfg.alpha;
  std::vector<double> out(p_hat.size());
  for (std::size_t i = 0; i < p_hat.size(); ++i) {
    if (p_hat[i] < floor - kDebiasSlack) {
      throw DomainError("debias_exact: entry " + std::to_string(i) + " = " +
                        std::to_string(p_hat[i]) + " is below alpha/V = " +
                        std::to_string(floor) + "; use rectify() for imperfect models");
    }
    out[i] = std::max(0.0, (p_hat[i] - floor) / keep);
  }
  return ProbDist(std::move(out));
}

// ReLU(p - delta) renormalized. Entries <= delta become exactly zero.
// Throws DegenerateInputError if nothing survives.
inline ProbDist rectify(const ProbDist& p_hat, const RectifierConfig& cfg) {
  cfg.validate();
  if (cfg.delta == 0.0) return p_hat;
  std::vector<double> out(p_hat.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p_hat.size(); ++i) {
    const double shifted = p_hat[i] - cfg.delta;
    out[i] = shifted > 0.0 ? shifted : 0.0;
    total += out[i];
  }
  if (!(total > 0.0)) {
    throw DegenerateInputError("rectify: every entry is <= delta = " + std::to_string(cfg.delta));
  }
  for (double& v : out) v /= total;
  return ProbDist(std::move(out));
}

// Decode-time rectification: a degenerate input collapses to its argmax.
inline ProbDist rectify_or_argmax(const ProbDist& p_hat, const RectifierConfig& cfg) {
  if (cfg.delta == 0.0) return p_hat;
  for (std::size_t i = 0; i < p_hat.size(); ++i) {
    if (p_hat[i] > cfg.delta) return rectify(p_hat, cfg);
  }
  return ProbDist::one_hot(p_hat.size(), p_hat.argmax());
}

inline double per_token_penalty(const SmoothingConfig& cfg) {
  cfg.validate();
  return std::log1p(-cfg.alpha);
}

// nullopt when alpha == 0: without smoothing there is no length cap.
inline std::optional<LengthBound> length_bound(const SmoothingConfig& cfg) {
  cfg.validate();
  if (cfg.alpha == 0.0) return std::nullopt;
  LengthBound b;
  b.alpha = cfg.alpha;
  b.vocab_size = cfg.vocab_size;
  b.continuous_bound = std::log(cfg.floor()) / std::log(cfg.ceiling());
  b.t_max = static_cast<long long>(std::floor(b.continuous_bound));
  return b;
}

struct ScoreBounds {
  // Lower bound on p(EOS | x) at the first step.
  double empty_lower = 0.0;
  // Upper bound on the probability of any length-T sequence.
  double length_upper = 0.0;
};

inline ScoreBounds score_bounds(const SmoothingConfig& cfg, long long length) {
  cfg.validate();
  if (length < 1) throw InputError("score_bounds: length must be >= 1");
  return {cfg.floor(), std::pow(cfg.ceiling(), static_cast<double>(length))};
}

}  // namespace lsdebias
