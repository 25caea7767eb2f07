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

// Greedy, beam and exact decoding over any SequenceModel.
//
// When a rectifier is configured, every step distribution is rectified before
// its log is taken, so the search itself ranks partial hypotheses by debiased
// scores. Hypothesis::log_prob is always the sum of logs of the distributions
// the search actually consumed.
//
// Ordering everywhere: higher score first, then shorter, then lexicographically
// smaller token ids. BOS is never emitted.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <queue>
#include <thread>
#include <vector>

#include "lsdebias/core.hpp"
#include "lsdebias/smoothing.hpp"

namespace lsdebias {

struct DecodeConfig {
  int beam_size = 1;
  // Hard cap on emitted tokens including EOS; unset means 2 * |source| + 10.
  std::optional<int> max_len;
  std::optional<RectifierConfig> rectifier;
  // final = log_prob / T^exponent with T counting EOS; 0 disables.
  double length_norm_exponent = 0.0;

  void validate() const {
    if (beam_size < 1) throw InputError("beam size must be >= 1");
    if (max_len && *max_len < 1) throw InputError("max_len must be >= 1");
    if (rectifier) rectifier->validate();
    if (!(length_norm_exponent >= 0.0)) throw InputError("length_norm_exponent must be >= 0");
  }

  int max_len_for(std::size_t source_len) const {
    return max_len ? *max_len : static_cast<int>(2 * source_len + 10);
  }
};

struct DecodeResult {
  // Finished hypotheses, best first. If the search found none, holds the best
  // unfinished hypothesis (finished == false) when one exists.
  std::vector<Hypothesis> ranked;
  // Number of next_dist calls.
  long steps_expanded = 0;

  bool found() const { return !ranked.empty() && ranked.front().finished; }
  const Hypothesis& best() const { return ranked.front(); }
};

inline double final_score(double log_prob, std::size_t length, double exponent) {
  if (exponent <= 0.0 || length == 0) return log_prob;
  return log_prob / std::pow(static_cast<double>(length), exponent);
}

// True iff |a| ranks strictly before |b|.
inline bool ranks_before(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.target.size() != b.target.size()) return a.target.size() < b.target.size();
  return a.target < b.target;
}

inline ProbDist scoring_dist(const SequenceModel& model, TokenView source, TokenView prefix,
                             const std::optional<RectifierConfig>& rectifier) {
  ProbDist d = model.next_dist(source, prefix);
  if (rectifier && rectifier->delta > 0.0) return rectify_or_argmax(d, *rectifier);
  return d;
}

// ============================================================================
// Greedy
// ============================================================================

inline DecodeResult greedy_decode(const SequenceModel& model, TokenView source, const DecodeConfig& cfg) {
  cfg.validate();
  const Vocabulary& vocab = model.vocab();
  const int max_len = cfg.max_len_for(source.size());
  DecodeResult result;
  Hypothesis h;
  while (static_cast<int>(h.target.size()) < max_len) {
    const ProbDist d = scoring_dist(model, source, h.target, cfg.rectifier);
    ++result.steps_expanded;
    TokenId pick = -1;
    for (TokenId i = 0; i < static_cast<TokenId>(d.size()); ++i) {
      if (i == vocab.bos()) continue;
      if (pick < 0 || d.at(i) > d.at(pick)) pick = i;
    }
    h.target.push_back(pick);
    h.log_prob += safe_log(d.at(pick));
    if (pick == vocab.eos()) {
      h.finished = true;
      break;
    }
  }
  h.score = h.finished ? final_score(h.log_prob, h.target.size(), cfg.length_norm_exponent) : h.log_prob;
  result.ranked.push_back(std::move(h));
  return result;
}

// ============================================================================
// Beam
// ============================================================================

// Each step expands every live hypothesis by all tokens and keeps the K best
// extensions overall. Extensions ending in EOS move to the finished pool
// (capped at K); the rest stay live. Stops when nothing is live, when the best
// live score cannot beat the K-th finished one (raw scores only, since they
// never increase), or at max_len.
inline DecodeResult beam_decode(const SequenceModel& model, TokenView source, const DecodeConfig& cfg) {
  cfg.validate();
  const Vocabulary& vocab = model.vocab();
  const std::size_t k = static_cast<std::size_t>(cfg.beam_size);
  const int max_len = cfg.max_len_for(source.size());
  const bool normalized = cfg.length_norm_exponent > 0.0;

  struct Candidate {
    double score;
    std::uint32_t parent;
    TokenId token;
  };

  DecodeResult result;
  std::vector<Hypothesis> live(1);
  std::vector<Hypothesis> pool;
  std::vector<Candidate> cands;
  std::vector<std::uint32_t> lex_rank;
  std::vector<std::uint32_t> by_lex;

  for (int step = 0; step < max_len && !live.empty(); ++step) {
    // Same-length extensions order lexicographically by (parent, token).
    by_lex.resize(live.size());
    for (std::uint32_t i = 0; i < live.size(); ++i) by_lex[i] = i;
    std::sort(by_lex.begin(), by_lex.end(),
              [&](std::uint32_t a, std::uint32_t b) { return live[a].target < live[b].target; });
    lex_rank.assign(live.size(), 0);
    for (std::uint32_t r = 0; r < by_lex.size(); ++r) lex_rank[by_lex[r]] = r;

    auto better = [&](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.parent != b.parent) return lex_rank[a.parent] < lex_rank[b.parent];
      return a.token < b.token;
    };

    // Min-heap of the K best scores seen so far lets most tokens skip the log.
    std::priority_queue<double, std::vector<double>, std::greater<>> kbest;
    cands.clear();
    for (std::uint32_t pi = 0; pi < live.size(); ++pi) {
      const Hypothesis& parent = live[pi];
      if (kbest.size() == k && parent.log_prob < kbest.top()) continue;
      const ProbDist d = scoring_dist(model, source, parent.target, cfg.rectifier);
      ++result.steps_expanded;
      for (TokenId tok = 0; tok < static_cast<TokenId>(d.size()); ++tok) {
        if (tok == vocab.bos()) continue;
        const double p = d.at(tok);
        if (!(p > 0.0)) continue;
        if (kbest.size() == k) {
          // Slack keeps exact ties at the boundary; selection below is exact.
          const double cutoff = std::exp(kbest.top() - parent.log_prob) * (1.0 - 1e-9);
          if (p < cutoff) continue;
        }
        const double score = parent.log_prob + std::log(p);
        if (kbest.size() < k) {
          kbest.push(score);
        } else if (score > kbest.top()) {
          kbest.pop();
          kbest.push(score);
        }
        cands.push_back({score, pi, tok});
      }
    }
    if (cands.size() > k) {
      std::nth_element(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(k), cands.end(), better);
      cands.resize(k);
    }
    std::sort(cands.begin(), cands.end(), better);

    std::vector<Hypothesis> next;
    next.reserve(cands.size());
    for (const Candidate& c : cands) {
      Hypothesis h;
      h.target.reserve(live[c.parent].target.size() + 1);
      h.target = live[c.parent].target;
      h.target.push_back(c.token);
      h.log_prob = c.score;
      if (c.token == vocab.eos()) {
        h.finished = true;
        h.score = final_score(h.log_prob, h.target.size(), cfg.length_norm_exponent);
        pool.push_back(std::move(h));
      } else {
        h.score = h.log_prob;
        next.push_back(std::move(h));
      }
    }
    live = std::move(next);

    if (pool.size() > k) {
      std::sort(pool.begin(), pool.end(), ranks_before);
      pool.resize(k);
    }
    if (!normalized && pool.size() == k && !live.empty()) {
      double kth = pool.front().log_prob;
      for (const auto& h : pool) kth = std::min(kth, h.log_prob);
      if (live.front().log_prob <= kth) break;
    }
  }

  std::sort(pool.begin(), pool.end(), ranks_before);
  if (pool.empty() && !live.empty()) {
    std::sort(live.begin(), live.end(), ranks_before);
    pool.push_back(live.front());
  }
  result.ranked = std::move(pool);
  return result;
}

// ============================================================================
// Exact
// ============================================================================

// Depth-first search over all sequences of at most max_len tokens, children
// visited best first. A partial hypothesis whose score is <= the best finished
// one is pruned: every further step adds a log-probability <= 0. Returns an
// empty ranking if nothing finishes within max_len.
inline DecodeResult exact_decode(const SequenceModel& model, TokenView source, std::optional<int> max_len = {},
                                 const std::optional<RectifierConfig>& rectifier = {}) {
  const Vocabulary& vocab = model.vocab();
  const int limit = max_len ? *max_len : static_cast<int>(2 * source.size() + 10);
  if (limit < 1) throw InputError("max_len must be >= 1");

  DecodeResult result;
  Hypothesis best;
  best.log_prob = kNegInf;
  TokenSeq prefix;

  struct Child {
    double score;
    TokenId token;
  };

  std::function<void(double)> visit = [&](double acc) {
    const ProbDist d = scoring_dist(model, source, prefix, rectifier);
    ++result.steps_expanded;
    std::vector<Child> children;
    children.reserve(d.size());
    for (TokenId tok = 0; tok < static_cast<TokenId>(d.size()); ++tok) {
      if (tok == vocab.bos() || !(d.at(tok) > 0.0)) continue;
      children.push_back({acc + std::log(d.at(tok)), tok});
    }
    std::sort(children.begin(), children.end(), [](const Child& a, const Child& b) {
      return a.score != b.score ? a.score > b.score : a.token < b.token;
    });
    for (const Child& c : children) {
      if (c.score <= best.log_prob) break;
      if (c.token == vocab.eos()) {
        best.target = prefix;
        best.target.push_back(c.token);
        best.log_prob = c.score;
        best.finished = true;
      } else if (static_cast<int>(prefix.size()) + 2 <= limit) {
        prefix.push_back(c.token);
        visit(c.score);
        prefix.pop_back();
      }
    }
  };
  visit(0.0);

  if (best.finished) {
    best.score = best.log_prob;
    result.ranked.push_back(std::move(best));
  }
  return result;
}

// ============================================================================
// Rescoring
// ============================================================================

struct RescoreResult {
  double log_prob = 0.0;
  // First step whose token received zero probability (after rectification).
  std::optional<std::size_t> zero_step;
};

inline RescoreResult rescore_sequence(const SequenceModel& model, TokenView source, TokenView target,
                                      const std::optional<RectifierConfig>& rectifier = {}) {
  const Vocabulary& vocab = model.vocab();
  check_tokens(source, vocab, "source");
  check_tokens(target, vocab, "target");
  if (!is_complete(target, vocab.eos())) throw InputError("rescore_sequence: target must end in a single EOS");
  RescoreResult r;
  for (std::size_t t = 0; t < target.size(); ++t) {
    const ProbDist d = scoring_dist(model, source, target.first(t), rectifier);
    const double lp = safe_log(d.at(target[t]));
    if (lp == kNegInf) {
      r.log_prob = kNegInf;
      r.zero_step = t;
      return r;
    }
    r.log_prob += lp;
  }
  return r;
}

// ============================================================================
// Corpus-level decoding
// ============================================================================

enum class SearchMode { kGreedy, kBeam, kExact };

inline DecodeResult decode_one(const SequenceModel& model, TokenView source, const DecodeConfig& cfg,
                               SearchMode mode) {
  switch (mode) {
    case SearchMode::kGreedy:
      return greedy_decode(model, source, cfg);
    case SearchMode::kBeam:
      return beam_decode(model, source, cfg);
    case SearchMode::kExact:
      return exact_decode(model, source, cfg.max_len, cfg.rectifier);
  }
  return {};
}

// Decodes every source; output order matches input order for any worker count.
inline std::vector<DecodeResult> decode_all(const SequenceModel& model, const std::vector<TokenSeq>& sources,
                                            const DecodeConfig& cfg, SearchMode mode = SearchMode::kBeam,
                                            unsigned workers = 1) {
  cfg.validate();
  std::vector<DecodeResult> out(sources.size());
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(sources.size())));
  if (workers <= 1) {
    for (std::size_t i = 0; i < sources.size(); ++i) out[i] = decode_one(model, sources[i], cfg, mode);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      try {
        for (std::size_t i = next++; i < sources.size(); i = next++) {
          out[i] = decode_one(model, sources[i], cfg, mode);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace lsdebias
