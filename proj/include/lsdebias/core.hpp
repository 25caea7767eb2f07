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

// Vocabulary, token sequences, dense next-token distributions and the
// SequenceModel interface every model and decoder in the library is built on.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace lsdebias {

// ============================================================================
// Errors
// ============================================================================

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller passed malformed arguments (bad index, size mismatch, empty input).
class InputError : public Error {
 public:
  using Error::Error;
};

// Arguments are well formed but outside the mathematical domain of the op.
class DomainError : public Error {
 public:
  using Error::Error;
};

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;
using TokenView = std::span<const TokenId>;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kDistTolerance = 1e-9;

// ============================================================================
// Vocabulary
// ============================================================================

class Vocabulary {
 public:
  Vocabulary(std::vector<std::string> tokens, TokenId eos_id, TokenId bos_id)
      : tokens_(std::move(tokens)), eos_id_(eos_id), bos_id_(bos_id) {
    if (tokens_.size() < 3) {
      throw InputError("vocabulary needs at least EOS, BOS and one content token");
    }
    const auto v = static_cast<TokenId>(tokens_.size());
    if (eos_id_ < 0 || eos_id_ >= v || bos_id_ < 0 || bos_id_ >= v) {
      throw InputError("EOS/BOS id out of range");
    }
    if (eos_id_ == bos_id_) throw InputError("EOS and BOS must differ");
    index_.reserve(tokens_.size());
    for (TokenId i = 0; i < v; ++i) {
      if (!index_.emplace(tokens_[i], i).second) {
        throw InputError("duplicate token '" + tokens_[i] + "'");
      }
    }
  }

  // Standard synthetic vocabulary: "<eos>", "<bos>", then w0 .. w{V-3}.
  static Vocabulary synthetic(std::size_t size) {
    if (size < 3) throw InputError("vocabulary size must be >= 3");
    std::vector<std::string> tokens{"<eos>", "<bos>"};
    for (std::size_t i = 0; i + 2 < size; ++i) tokens.push_back("w" + std::to_string(i));
    return Vocabulary(std::move(tokens), 0, 1);
  }

  std::size_t size() const { return tokens_.size(); }
  TokenId eos() const { return eos_id_; }
  TokenId bos() const { return bos_id_; }
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::optional<TokenId> find(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  bool contains(TokenId id) const { return id >= 0 && static_cast<std::size_t>(id) < tokens_.size(); }
  bool is_content(TokenId id) const { return contains(id) && id != eos_id_ && id != bos_id_; }

  std::vector<TokenId> content_ids() const {
    std::vector<TokenId> ids;
    for (TokenId i = 0; i < static_cast<TokenId>(tokens_.size()); ++i) {
      if (is_content(i)) ids.push_back(i);
    }
    return ids;
  }

  bool operator==(const Vocabulary& other) const {
    return tokens_ == other.tokens_ && eos_id_ == other.eos_id_ && bos_id_ == other.bos_id_;
  }

 private:
  std::vector<std::string> tokens_;
  TokenId eos_id_;
  TokenId bos_id_;
  std::unordered_map<std::string, TokenId> index_;
};

// A complete target ends with exactly one EOS and has none before it.
inline bool is_complete(TokenView seq, TokenId eos) {
  if (seq.empty() || seq.back() != eos) return false;
  for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
    if (seq[i] == eos) return false;
  }
  return true;
}

inline bool is_prefix(TokenView seq, TokenId eos) {
  for (TokenId t : seq) {
    if (t == eos) return false;
  }
  return true;
}

// ============================================================================
// ProbDist
// ============================================================================

// Dense probability vector over the vocabulary. Construction does not
// validate; use validate_dist() where a guarantee is needed.
class ProbDist {
 public:
  ProbDist() = default;
  explicit ProbDist(std::vector<double> probs) : probs_(std::move(probs)) {}
  ProbDist(std::initializer_list<double> probs) : probs_(probs) {}

  static ProbDist one_hot(std::size_t size, TokenId id) {
    std::vector<double> p(size, 0.0);
    p.at(static_cast<std::size_t>(id)) = 1.0;
    return ProbDist(std::move(p));
  }

  static ProbDist uniform(std::size_t size) {
    return ProbDist(std::vector<double>(size, 1.0 / static_cast<double>(size)));
  }

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  double at(TokenId id) const { return probs_.at(static_cast<std::size_t>(id)); }
  std::span<const double> probs() const { return probs_; }
  std::vector<double>& mutable_probs() { return probs_; }

  double sum() const {
    double s = 0.0;
    for (double p : probs_) s += p;
    return s;
  }

  // Lowest index wins ties.
  TokenId argmax() const {
    TokenId best = 0;
    for (std::size_t i = 1; i < probs_.size(); ++i) {
      if (probs_[i] > probs_[static_cast<std::size_t>(best)]) best = static_cast<TokenId>(i);
    }
    return best;
  }

  double min() const {
    double m = std::numeric_limits<double>::infinity();
    for (double p : probs_) m = std::min(m, p);
    return m;
  }

  bool operator==(const ProbDist& other) const = default;

 private:
  std::vector<double> probs_;
};

// Returns a description of the first violated invariant, or nullopt if |d| is
// a valid distribution.
inline std::optional<std::string> validate_dist(const ProbDist& d) {
  if (d.size() == 0) return "empty distribution";
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!std::isfinite(d[i])) return "non-finite entry at index " + std::to_string(i);
    if (d[i] < 0.0) {
      return "negative entry " + std::to_string(d[i]) + " at index " + std::to_string(i);
    }
  }
  const double s = d.sum();
  if (std::abs(s - 1.0) > kDistTolerance) return "sum = " + std::to_string(s);
  return std::nullopt;
}

inline double safe_log(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

// ============================================================================
// SequenceModel
// ============================================================================

// Conditional next-token distribution p(y_t | x, y_<t). Implementations are
// immutable after construction and must tolerate concurrent const calls.
class SequenceModel {
 public:
  virtual ~SequenceModel() = default;

  virtual ProbDist next_dist(TokenView source, TokenView prefix) const = 0;
  virtual const Vocabulary& vocab() const = 0;
  // Short identifier of the concrete model kind ("oracle", "smoothed", ...).
  virtual std::string kind() const = 0;
};

struct Hypothesis {
  TokenSeq target;
  double log_prob = 0.0;
  bool finished = false;
  // Ranking score; equals log_prob unless length normalization is on.
  double score = 0.0;
};

inline void check_tokens(TokenView seq, const Vocabulary& vocab, const char* what) {
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (!vocab.contains(seq[i])) {
      throw InputError(std::string(what) + ": token id " + std::to_string(seq[i]) +
                       " at position " + std::to_string(i) + " outside vocabulary of size " +
                       std::to_string(vocab.size()));
    }
  }
}

// Sum of per-step natural-log probabilities of a complete target. Returns
// -inf as soon as a step assigns zero probability.
inline double sequence_logprob(const SequenceModel& model, TokenView source, TokenView target) {
  const Vocabulary& vocab = model.vocab();
  check_tokens(source, vocab, "source");
  check_tokens(target, vocab, "target");
  if (!is_complete(target, vocab.eos())) {
    throw InputError("sequence_logprob: target must end in a single EOS");
  }
  double total = 0.0;
  for (std::size_t t = 0; t < target.size(); ++t) {
    const ProbDist d = model.next_dist(source, target.first(t));
    const double lp = safe_log(d.at(target[t]));
    if (lp == kNegInf) return kNegInf;
    total += lp;
  }
  return total;
}

}  // namespace lsdebias
