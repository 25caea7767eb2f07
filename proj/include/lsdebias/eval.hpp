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

// Corpus BLEU, length ratio, source-length bucketing and set-level calibration.
// All metrics take token sequences without EOS; strip_eos() converts decoder
// output and references.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "lsdebias/core.hpp"
#include "lsdebias/search.hpp"

namespace lsdebias {

inline TokenSeq strip_eos(TokenView seq, TokenId eos) {
  TokenSeq out(seq.begin(), seq.end());
  if (!out.empty() && out.back() == eos) out.pop_back();
  return out;
}

// ============================================================================
// BLEU
// ============================================================================

struct BleuStats {
  std::vector<long> matches;  // clipped n-gram matches, index n-1
  std::vector<long> totals;   // hypothesis n-grams, index n-1
  long hyp_len = 0;
  long ref_len = 0;
};

inline BleuStats bleu_stats(const std::vector<TokenSeq>& hypotheses, const std::vector<TokenSeq>& references,
                            int max_n = 4) {
  if (hypotheses.size() != references.size()) throw InputError("BLEU: hypothesis/reference count mismatch");
  if (hypotheses.empty()) throw InputError("BLEU: empty corpus");
  if (max_n < 1) throw InputError("BLEU: max_n must be >= 1");
  BleuStats s;
  s.matches.assign(static_cast<std::size_t>(max_n), 0);
  s.totals.assign(static_cast<std::size_t>(max_n), 0);
  for (std::size_t k = 0; k < hypotheses.size(); ++k) {
    const TokenSeq& hyp = hypotheses[k];
    const TokenSeq& ref = references[k];
    s.hyp_len += static_cast<long>(hyp.size());
    s.ref_len += static_cast<long>(ref.size());
    for (int n = 1; n <= max_n; ++n) {
      const std::size_t un = static_cast<std::size_t>(n);
      std::map<TokenSeq, long> ref_counts;
      for (std::size_t i = 0; i + un <= ref.size(); ++i) ++ref_counts[TokenSeq(ref.begin() + i, ref.begin() + i + un)];
      std::map<TokenSeq, long> hyp_counts;
      for (std::size_t i = 0; i + un <= hyp.size(); ++i) ++hyp_counts[TokenSeq(hyp.begin() + i, hyp.begin() + i + un)];
      for (const auto& [gram, c] : hyp_counts) {
        s.totals[un - 1] += c;
        if (auto it = ref_counts.find(gram); it != ref_counts.end()) s.matches[un - 1] += std::min(c, it->second);
      }
    }
  }
  return s;
}

// 100 * BP * exp(mean_n log p_n), no smoothing: any zero precision gives 0.
inline double bleu_from_stats(const BleuStats& s) {
  double log_sum = 0.0;
  for (std::size_t n = 0; n < s.matches.size(); ++n) {
    if (s.matches[n] == 0 || s.totals[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(s.matches[n]) / static_cast<double>(s.totals[n]));
  }
  const double bp = s.hyp_len >= s.ref_len
                        ? 1.0
                        : std::exp(1.0 - static_cast<double>(s.ref_len) / static_cast<double>(s.hyp_len));
  return 100.0 * bp * std::exp(log_sum / static_cast<double>(s.matches.size()));
}

inline double corpus_bleu(const std::vector<TokenSeq>& hypotheses, const std::vector<TokenSeq>& references,
                          int max_n = 4) {
  return bleu_from_stats(bleu_stats(hypotheses, references, max_n));
}

inline double length_ratio(const std::vector<TokenSeq>& hypotheses, const std::vector<TokenSeq>& references) {
  if (hypotheses.size() != references.size()) throw InputError("length_ratio: count mismatch");
  if (hypotheses.empty()) throw InputError("length_ratio: empty corpus");
  long hyp = 0;
  long ref = 0;
  for (const auto& h : hypotheses) hyp += static_cast<long>(h.size());
  for (const auto& r : references) ref += static_cast<long>(r.size());
  if (ref == 0) throw InputError("length_ratio: total reference length is zero");
  return static_cast<double>(hyp) / static_cast<double>(ref);
}

// ============================================================================
// Bucketing
// ============================================================================

struct LengthBucket {
  // Half-open source-length range [lo, hi).
  long lo = 0;
  long hi = 0;
  std::size_t count = 0;
  bool empty() const { return count == 0; }
};

struct BucketAssignment {
  std::vector<LengthBucket> buckets;
  std::vector<std::size_t> bucket_of;  // per sentence
};

// Quantile cut points over the sorted lengths: bucket b ends at the length of
// the floor((b+1) N / n)-th shortest sentence. With distinct lengths the bucket
// sizes differ by at most one; repeated lengths can leave buckets empty.
inline BucketAssignment bucket_by_source_length(const std::vector<long>& lengths, std::size_t n_buckets = 4) {
  if (lengths.empty()) throw InputError("bucket_by_source_length: empty corpus");
  if (n_buckets < 1) throw InputError("bucket_by_source_length: need at least one bucket");
  std::vector<long> sorted = lengths;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();

  BucketAssignment out;
  out.buckets.resize(n_buckets);
  long lo = sorted.front();
  for (std::size_t b = 0; b < n_buckets; ++b) {
    const long hi = b + 1 == n_buckets ? sorted.back() + 1 : sorted[(b + 1) * n / n_buckets];
    out.buckets[b].lo = lo;
    out.buckets[b].hi = std::max(lo, hi);
    lo = out.buckets[b].hi;
  }
  out.bucket_of.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t b = 0; b < n_buckets; ++b) {
      if (lengths[i] >= out.buckets[b].lo && lengths[i] < out.buckets[b].hi) {
        out.bucket_of[i] = b;
        ++out.buckets[b].count;
        break;
      }
    }
  }
  return out;
}

// ============================================================================
// Reports
// ============================================================================

struct BucketReport {
  LengthBucket range;
  double bleu = 0.0;
  double length_ratio = 0.0;
};

struct EvalReport {
  double bleu = 0.0;
  double length_ratio = 0.0;
  double mean_hyp_length = 0.0;
  std::vector<BucketReport> per_bucket;
  // Configuration echo.
  int beam_size = 0;
  double delta = 0.0;
  double alpha = 0.0;
  std::string model_id;
};

inline EvalReport evaluate(const std::vector<TokenSeq>& hypotheses, const std::vector<TokenSeq>& references,
                           const std::vector<long>& source_lengths, std::size_t n_buckets = 4) {
  if (source_lengths.size() != hypotheses.size()) throw InputError("evaluate: source length count mismatch");
  EvalReport r;
  r.bleu = corpus_bleu(hypotheses, references);
  r.length_ratio = length_ratio(hypotheses, references);
  double total = 0.0;
  for (const auto& h : hypotheses) total += static_cast<double>(h.size());
  r.mean_hyp_length = total / static_cast<double>(hypotheses.size());

  const BucketAssignment assignment = bucket_by_source_length(source_lengths, n_buckets);
  for (std::size_t b = 0; b < assignment.buckets.size(); ++b) {
    BucketReport br;
    br.range = assignment.buckets[b];
    std::vector<TokenSeq> hyp;
    std::vector<TokenSeq> ref;
    long ref_tokens = 0;
    for (std::size_t i = 0; i < hypotheses.size(); ++i) {
      if (assignment.bucket_of[i] != b) continue;
      hyp.push_back(hypotheses[i]);
      ref.push_back(references[i]);
      ref_tokens += static_cast<long>(references[i].size());
    }
    if (!hyp.empty()) {
      br.bleu = corpus_bleu(hyp, ref);
      if (ref_tokens > 0) br.length_ratio = length_ratio(hyp, ref);
    }
    r.per_bucket.push_back(br);
  }
  return r;
}

// ============================================================================
// Set-level calibration
// ============================================================================

struct CalibrationReport {
  // Mean over queries of sum_{h in S} exp(log_prob(h)).
  double mean_set_probability = 0.0;
  // Fraction of queries whose reference is in S.
  double reference_in_set_rate = 0.0;
  double gap = 0.0;
  int beam_size = 0;
  std::size_t queries = 0;
  // Queries whose decode produced no finished hypothesis; not averaged.
  std::size_t excluded = 0;
};

inline CalibrationReport calibration_from_results(const std::vector<DecodeResult>& results,
                                                  const std::vector<TokenSeq>& references, int beam_size) {
  if (results.size() != references.size()) throw InputError("set_calibration: count mismatch");
  CalibrationReport r;
  r.beam_size = beam_size;
  double prob_sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& ranked = results[i].ranked;
    if (ranked.empty() || !ranked.front().finished) {
      ++r.excluded;
      continue;
    }
    ++r.queries;
    double set_prob = 0.0;
    bool hit = false;
    for (const auto& h : ranked) {
      if (!h.finished) continue;
      set_prob += std::exp(h.log_prob);
      hit = hit || h.target == references[i];
    }
    prob_sum += set_prob;
    hits += hit ? 1 : 0;
  }
  if (r.queries > 0) {
    r.mean_set_probability = prob_sum / static_cast<double>(r.queries);
    r.reference_in_set_rate = static_cast<double>(hits) / static_cast<double>(r.queries);
  }
  r.gap = r.mean_set_probability - r.reference_in_set_rate;
  return r;
}

using DecodeFn = std::function<DecodeResult(TokenView source)>;

// References are complete targets (with EOS) and compared verbatim.
inline CalibrationReport set_calibration(const DecodeFn& decode, const std::vector<TokenSeq>& sources,
                                         const std::vector<TokenSeq>& references, int beam_size = 200) {
  if (sources.size() != references.size()) throw InputError("set_calibration: count mismatch");
  std::vector<DecodeResult> results;
  results.reserve(sources.size());
  for (const auto& s : sources) results.push_back(decode(s));
  return calibration_from_results(results, references, beam_size);
}

// Beam-search calibration over a model, decoding with |workers| threads.
inline CalibrationReport set_calibration(const SequenceModel& model, const std::vector<TokenSeq>& sources,
                                         const std::vector<TokenSeq>& references, DecodeConfig cfg,
                                         unsigned workers = 1) {
  return calibration_from_results(decode_all(model, sources, cfg, SearchMode::kBeam, workers), references,
                                  cfg.beam_size);
}

}  // namespace lsdebias
