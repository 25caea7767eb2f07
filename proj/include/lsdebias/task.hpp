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

// Synthetic transduction tasks whose true next-token conditional is known in
// closed form, and corpus generation from them.
//
// Every task is position-aligned: the target token at step t depends only on
// the aligned source token (x_t for copy/noisy_copy, x_{n-1-t} for reverse),
// and step n always emits EOS. The conditional ignores the prefix contents, so
// it is defined for any prefix a decoder may explore.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "lsdebias/core.hpp"

namespace lsdebias {

enum class TaskKind { kCopy, kReverse, kNoisyCopy };

inline std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::kCopy:
      return "copy";
    case TaskKind::kReverse:
      return "reverse";
    case TaskKind::kNoisyCopy:
      return "noisy_copy";
  }
  return "unknown";
}

inline std::optional<TaskKind> parse_task_kind(std::string_view name) {
  if (name == "copy") return TaskKind::kCopy;
  if (name == "reverse") return TaskKind::kReverse;
  if (name == "noisy_copy") return TaskKind::kNoisyCopy;
  return std::nullopt;
}

// Geometric source length with a floor and a hard cap:
//   len = min(min_len + Geometric(p_stop), max_len).
// Defaults give a mean of about 20 tokens.
struct LengthDist {
  double p_stop = 0.05;
  int min_len = 1;
  int max_len = 150;

  bool operator==(const LengthDist&) const = default;
};

struct TaskParams {
  TaskKind kind = TaskKind::kCopy;
  std::size_t vocab_size = 8;
  double flip_prob = 0.0;
  LengthDist length;

  bool operator==(const TaskParams&) const = default;
};

// Position in the source that target step |step| copies from, or -1 once the
// target has reached the source length.
inline long aligned_position(TaskKind kind, std::size_t source_len, std::size_t step) {
  if (step >= source_len) return -1;
  if (kind == TaskKind::kReverse) return static_cast<long>(source_len - 1 - step);
  return static_cast<long>(step);
}

class SyntheticTask {
 public:
  explicit SyntheticTask(TaskParams params)
      : params_(params), vocab_(make_vocab(params)), content_(vocab_.content_ids()) {}

  const TaskParams& params() const { return params_; }
  TaskKind kind() const { return params_.kind; }
  const Vocabulary& vocab() const { return vocab_; }
  const std::vector<TokenId>& content_ids() const { return content_; }

  ProbDist exact_conditional(TokenView source, TokenView prefix) const {
    const std::size_t v = vocab_.size();
    const long pos = aligned_position(params_.kind, source.size(), prefix.size());
    if (pos < 0) return ProbDist::one_hot(v, vocab_.eos());
    const TokenId match = source[static_cast<std::size_t>(pos)];
    if (params_.kind != TaskKind::kNoisyCopy || params_.flip_prob == 0.0) {
      return ProbDist::one_hot(v, match);
    }
    std::vector<double> p(v, 0.0);
    const double other = params_.flip_prob / static_cast<double>(content_.size() - 1);
    for (TokenId c : content_) p[static_cast<std::size_t>(c)] = other;
    p[static_cast<std::size_t>(match)] = 1.0 - params_.flip_prob;
    return ProbDist(std::move(p));
  }

  // The deterministic reference target (no flips).
  TokenSeq reference(TokenView source) const {
    TokenSeq out;
    out.reserve(source.size() + 1);
    for (std::size_t t = 0; t < source.size(); ++t) {
      out.push_back(source[static_cast<std::size_t>(aligned_position(params_.kind, source.size(), t))]);
    }
    out.push_back(vocab_.eos());
    return out;
  }

 private:
  static Vocabulary make_vocab(const TaskParams& p) {
    if (p.vocab_size < 3) throw InputError("task vocabulary must have V >= 3");
    if (p.kind == TaskKind::kNoisyCopy && p.vocab_size < 4) {
      throw InputError("noisy_copy needs at least two content tokens (V >= 4)");
    }
    if (!(p.flip_prob >= 0.0 && p.flip_prob < 1.0)) throw InputError("flip_prob must lie in [0, 1)");
    if (p.kind != TaskKind::kNoisyCopy && p.flip_prob != 0.0) {
      throw InputError("flip_prob is only meaningful for noisy_copy");
    }
    if (!(p.length.p_stop > 0.0 && p.length.p_stop <= 1.0)) throw InputError("p_stop must lie in (0, 1]");
    if (p.length.min_len < 0 || p.length.max_len < p.length.min_len) {
      throw InputError("length range must satisfy 0 <= min_len <= max_len");
    }
    return Vocabulary::synthetic(p.vocab_size);
  }

  TaskParams params_;
  Vocabulary vocab_;
  std::vector<TokenId> content_;
};

struct SentencePair {
  TokenSeq source;
  TokenSeq target;

  bool operator==(const SentencePair&) const = default;
};

struct Corpus {
  TaskParams task;
  std::uint64_t seed = 0;
  std::vector<SentencePair> pairs;

  bool operator==(const Corpus&) const = default;
};

inline int sample_length(const LengthDist& dist, std::mt19937_64& rng) {
  std::geometric_distribution<int> extra(dist.p_stop);
  const long len = static_cast<long>(dist.min_len) + extra(rng);
  return static_cast<int>(std::min<long>(len, dist.max_len));
}

inline TokenId sample_token(const ProbDist& d, std::mt19937_64& rng) {
  std::discrete_distribution<TokenId> pick(d.probs().begin(), d.probs().end());
  return pick(rng);
}

inline Corpus generate_corpus(const SyntheticTask& task, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw InputError("generate_corpus: n must be >= 1");
  Corpus corpus;
  corpus.task = task.params();
  corpus.seed = seed;
  corpus.pairs.reserve(n);
  std::mt19937_64 rng(seed);
  const auto& content = task.content_ids();
  std::uniform_int_distribution<std::size_t> pick_content(0, content.size() - 1);
  for (std::size_t i = 0; i < n; ++i) {
    SentencePair pair;
    const int len = sample_length(task.params().length, rng);
    pair.source.reserve(static_cast<std::size_t>(len));
    for (int t = 0; t < len; ++t) pair.source.push_back(content[pick_content(rng)]);
    pair.target.reserve(static_cast<std::size_t>(len) + 1);
    while (pair.target.empty() || pair.target.back() != task.vocab().eos()) {
      const ProbDist d = task.exact_conditional(pair.source, pair.target);
      pair.target.push_back(sample_token(d, rng));
    }
    corpus.pairs.push_back(std::move(pair));
  }
  return corpus;
}

}  // namespace lsdebias
