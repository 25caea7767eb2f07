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

// Concrete SequenceModel implementations:
//
//   OracleModel     the task's exact conditional q
//   SmoothedModel   smooth(inner) at every step; over an oracle this is the
//                   closed-form optimum of label-smoothed training
//   EmpiricalModel  relative frequencies keyed on the aligned source token and
//                   the last (order - 1) target tokens, with backoff
//   LogLinearModel  softmax over sparse indicator features, trained by SGD on
//                   label-smoothed cross-entropy
//   PerturbedModel  inner + bounded deterministic noise, ReLU'd and
//                   renormalized; produces entries below alpha/V

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "lsdebias/core.hpp"
#include "lsdebias/smoothing.hpp"
#include "lsdebias/task.hpp"

namespace lsdebias {

using ModelPtr = std::shared_ptr<const SequenceModel>;

// ============================================================================
// OracleModel
// ============================================================================

class OracleModel final : public SequenceModel {
 public:
  explicit OracleModel(SyntheticTask task) : task_(std::move(task)) {}

  ProbDist next_dist(TokenView source, TokenView prefix) const override {
    return task_.exact_conditional(source, prefix);
  }
  const Vocabulary& vocab() const override { return task_.vocab(); }
  std::string kind() const override { return "oracle"; }

  const SyntheticTask& task() const { return task_; }

 private:
  SyntheticTask task_;
};

// ============================================================================
// SmoothedModel
// ============================================================================

class SmoothedModel final : public SequenceModel {
 public:
  SmoothedModel(ModelPtr inner, SmoothingConfig cfg) : inner_(std::move(inner)), cfg_(cfg) {
    if (!inner_) throw InputError("SmoothedModel: null inner model");
    cfg_.validate();
    if (cfg_.vocab_size != inner_->vocab().size()) {
      throw InputError("SmoothedModel: smoothing V=" + std::to_string(cfg_.vocab_size) +
                       " does not match inner vocabulary size " +
                       std::to_string(inner_->vocab().size()));
    }
  }

  ProbDist next_dist(TokenView source, TokenView prefix) const override {
    return smooth(inner_->next_dist(source, prefix), cfg_);
  }
  const Vocabulary& vocab() const override { return inner_->vocab(); }
  std::string kind() const override { return "smoothed"; }

  const ModelPtr& inner() const { return inner_; }
  const SmoothingConfig& config() const { return cfg_; }

 private:
  ModelPtr inner_;
  SmoothingConfig cfg_;
};

inline std::shared_ptr<const SmoothedModel> wrap_smoothed(ModelPtr inner, double alpha) {
  if (!inner) throw InputError("wrap_smoothed: null inner model");
  return std::make_shared<SmoothedModel>(inner, SmoothingConfig(alpha, inner->vocab().size()));
}

inline std::shared_ptr<const SmoothedModel> wrap_smoothed(ModelPtr inner, const SmoothingConfig& cfg) {
  return std::make_shared<SmoothedModel>(std::move(inner), cfg);
}

// ============================================================================
// EmpiricalModel
// ============================================================================

// Source key used by the count and log-linear models: the source token the
// current target step is aligned with, or kPastEnd after the last one.
inline constexpr TokenId kPastEnd = -1;

inline TokenId aligned_source_token(TokenView source, std::size_t step, bool reverse) {
  const long pos = aligned_position(reverse ? TaskKind::kReverse : TaskKind::kCopy, source.size(), step);
  return pos < 0 ? kPastEnd : source[static_cast<std::size_t>(pos)];
}

// The last |width| prefix tokens, left-padded with BOS.
inline TokenSeq prefix_context(TokenView prefix, std::size_t width, TokenId bos) {
  TokenSeq ctx(width, bos);
  const std::size_t take = std::min(width, prefix.size());
  std::copy(prefix.end() - static_cast<std::ptrdiff_t>(take), prefix.end(),
            ctx.end() - static_cast<std::ptrdiff_t>(take));
  return ctx;
}

class EmpiricalModel final : public SequenceModel {
 public:
  using Counts = std::vector<std::uint64_t>;
  struct ContextKey {
    TokenId source_key;
    TokenSeq history;
    auto operator<=>(const ContextKey&) const = default;
  };

  EmpiricalModel(Vocabulary vocab, int order, bool reverse_alignment)
      : vocab_(std::move(vocab)), order_(order), reverse_(reverse_alignment),
        global_(vocab_.size(), 0) {
    if (order_ < 1) throw InputError("EmpiricalModel: order must be >= 1");
  }

  void add_event(TokenView source, TokenView prefix, TokenId next) {
    const TokenId key = aligned_source_token(source, prefix.size(), reverse_);
    ContextKey ck{key, prefix_context(prefix, static_cast<std::size_t>(order_ - 1), vocab_.bos())};
    bump(contexts_[std::move(ck)], next);
    bump(by_source_[key], next);
    bump(global_, next);
  }

  ProbDist next_dist(TokenView source, TokenView prefix) const override {
    const TokenId key = aligned_source_token(source, prefix.size(), reverse_);
    ContextKey ck{key, prefix_context(prefix, static_cast<std::size_t>(order_ - 1), vocab_.bos())};
    if (auto it = contexts_.find(ck); it != contexts_.end()) return normalize(it->second);
    if (auto it = by_source_.find(key); it != by_source_.end()) return normalize(it->second);
    return normalize(global_);
  }

  const Vocabulary& vocab() const override { return vocab_; }
  std::string kind() const override { return "empirical"; }

  int order() const { return order_; }
  bool reverse_alignment() const { return reverse_; }
  const std::map<ContextKey, Counts>& contexts() const { return contexts_; }
  const std::map<TokenId, Counts>& by_source() const { return by_source_; }
  const Counts& global() const { return global_; }

  // Used by deserialization; counts must have one entry per vocabulary token.
  void set_tables(std::map<ContextKey, Counts> contexts, std::map<TokenId, Counts> by_source, Counts global) {
    auto check = [&](const Counts& c) {
      if (c.size() != vocab_.size()) throw InputError("EmpiricalModel: count vector has wrong size");
    };
    for (const auto& [k, c] : contexts) check(c);
    for (const auto& [k, c] : by_source) check(c);
    check(global);
    contexts_ = std::move(contexts);
    by_source_ = std::move(by_source);
    global_ = std::move(global);
  }

 private:
  void bump(Counts& c, TokenId next) {
    if (c.empty()) c.assign(vocab_.size(), 0);
    ++c[static_cast<std::size_t>(next)];
  }

  ProbDist normalize(const Counts& c) const {
    const std::uint64_t total = std::accumulate(c.begin(), c.end(), std::uint64_t{0});
    if (total == 0) return ProbDist::uniform(vocab_.size());
    std::vector<double> p(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
      p[i] = static_cast<double>(c[i]) / static_cast<double>(total);
    }
    return ProbDist(std::move(p));
  }

  Vocabulary vocab_;
  int order_;
  bool reverse_;
  std::map<ContextKey, Counts> contexts_;
  std::map<TokenId, Counts> by_source_;
  Counts global_;
};

inline std::shared_ptr<EmpiricalModel> build_empirical(const Corpus& corpus, int order) {
  if (corpus.pairs.empty()) throw InputError("build_empirical: empty corpus");
  const SyntheticTask task(corpus.task);
  auto model = std::make_shared<EmpiricalModel>(task.vocab(), order, corpus.task.kind == TaskKind::kReverse);
  for (std::size_t i = 0; i < corpus.pairs.size(); ++i) {
    const auto& [source, target] = corpus.pairs[i];
    check_tokens(source, task.vocab(), "source");
    check_tokens(target, task.vocab(), "target");
    if (!is_complete(target, task.vocab().eos())) {
      throw InputError("build_empirical: target " + std::to_string(i) + " is not complete");
    }
    const TokenView tv(target);
    for (std::size_t t = 0; t < target.size(); ++t) model->add_event(source, tv.first(t), target[t]);
  }
  return model;
}

// ============================================================================
// LogLinearModel
// ============================================================================

// Binary indicator features, laid out as
//   [bias | aligned source token (V + past-end) | position parity (2) |
//    previous token at offset k for k = 1..order-1 (V each)]
struct FeatureLayout {
  std::size_t vocab_size = 0;
  int order = 1;
  bool reverse = false;

  std::size_t source_offset() const { return 1; }
  std::size_t parity_offset() const { return source_offset() + vocab_size + 1; }
  std::size_t history_offset() const { return parity_offset() + 2; }
  std::size_t dim() const { return history_offset() + static_cast<std::size_t>(order - 1) * vocab_size; }

  std::vector<std::size_t> extract(TokenView source, TokenView prefix, TokenId bos) const {
    std::vector<std::size_t> f;
    f.reserve(3 + static_cast<std::size_t>(order - 1));
    f.push_back(0);
    const TokenId src = aligned_source_token(source, prefix.size(), reverse);
    f.push_back(source_offset() + (src == kPastEnd ? vocab_size : static_cast<std::size_t>(src)));
    f.push_back(parity_offset() + prefix.size() % 2);
    for (int k = 1; k < order; ++k) {
      const std::size_t back = static_cast<std::size_t>(k);
      const TokenId prev = prefix.size() >= back ? prefix[prefix.size() - back] : bos;
      f.push_back(history_offset() + static_cast<std::size_t>(k - 1) * vocab_size + static_cast<std::size_t>(prev));
    }
    return f;
  }
};

class LogLinearModel final : public SequenceModel {
 public:
  LogLinearModel(Vocabulary vocab, int order, bool reverse_alignment, double train_alpha = 0.0)
      : vocab_(std::move(vocab)), layout_{vocab_.size(), order, reverse_alignment},
        train_alpha_(train_alpha), weights_(layout_.dim() * vocab_.size(), 0.0) {
    if (order < 1) throw InputError("LogLinearModel: order must be >= 1");
  }

  ProbDist next_dist(TokenView source, TokenView prefix) const override {
    return ProbDist(softmax_for(features(source, prefix)));
  }
  const Vocabulary& vocab() const override { return vocab_; }
  std::string kind() const override { return "loglinear"; }

  std::vector<std::size_t> features(TokenView source, TokenView prefix) const {
    return layout_.extract(source, prefix, vocab_.bos());
  }

  std::vector<double> softmax_for(const std::vector<std::size_t>& feats) const {
    const std::size_t v = vocab_.size();
    std::vector<double> z(v, 0.0);
    for (std::size_t f : feats) {
      const double* row = &weights_[f * v];
      for (std::size_t i = 0; i < v; ++i) z[i] += row[i];
    }
    const double zmax = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (double& x : z) {
      x = std::exp(x - zmax);
      total += x;
    }
    for (double& x : z) x /= total;
    return z;
  }

  const FeatureLayout& layout() const { return layout_; }
  double train_alpha() const { return train_alpha_; }
  std::vector<double>& weights() { return weights_; }
  const std::vector<double>& weights() const { return weights_; }
  double& weight(std::size_t feature, TokenId token) {
    return weights_[feature * vocab_.size() + static_cast<std::size_t>(token)];
  }

 private:
  Vocabulary vocab_;
  FeatureLayout layout_;
  double train_alpha_;
  std::vector<double> weights_;  // row-major, dim() x V
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

// One supervised next-token event.
struct TrainingExample {
  TokenSeq source;
  TokenSeq prefix;
  TokenId next = 0;
};

struct TrainOptions {
  double alpha = 0.0;
  double learning_rate = 0.5;
  long steps = 10000;
  // Events per update, drawn in shuffled order; capped at the event count.
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  int order = 2;
  bool reverse_alignment = false;
  // Full-data loss is recorded every |eval_every| updates; 0 picks steps / 20.
  long eval_every = 0;
};

struct LossPoint {
  long step;
  double loss;
};

struct TrainResult {
  std::shared_ptr<LogLinearModel> model;
  std::vector<LossPoint> trajectory;
};

// -sum_i q'_i log p_i for a one-hot target smoothed with |alpha|.
inline double smoothed_cross_entropy(std::span<const double> p, TokenId target, double alpha) {
  const double floor = alpha / static_cast<double>(p.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = (static_cast<TokenId>(i) == target ? 1.0 - alpha : 0.0) + floor;
    if (q > 0.0) loss -= q * std::log(p[i]);
  }
  return loss;
}

namespace detail {

struct FeaturizedEvent {
  std::vector<std::size_t> features;
  TokenId next;
};

inline double mean_loss(const LogLinearModel& model, const std::vector<FeaturizedEvent>& events, double alpha) {
  double total = 0.0;
  for (const auto& e : events) total += smoothed_cross_entropy(model.softmax_for(e.features), e.next, alpha);
  return total / static_cast<double>(events.size());
}

}  // namespace detail

// Plain minibatch SGD on label-smoothed cross-entropy. The per-example
// gradient of the loss w.r.t. logit i is p_i - q'_i, and every active
// indicator feature receives that row. Gradients of a batch are computed at
// the same weights and averaged.
inline TrainResult train_loglinear(const Vocabulary& vocab, const std::vector<TrainingExample>& examples,
                                   const TrainOptions& opt) {
  if (examples.empty()) throw InputError("train_loglinear: no training events");
  if (!(opt.learning_rate > 0.0)) throw InputError("train_loglinear: learning rate must be > 0");
  if (opt.steps < 0) throw InputError("train_loglinear: steps must be >= 0");
  if (opt.batch_size < 1) throw InputError("train_loglinear: batch size must be >= 1");
  SmoothingConfig(opt.alpha, vocab.size());  // validates alpha

  auto model = std::make_shared<LogLinearModel>(vocab, opt.order, opt.reverse_alignment, opt.alpha);
  std::vector<detail::FeaturizedEvent> events;
  events.reserve(examples.size());
  for (const auto& ex : examples) {
    check_tokens(ex.source, vocab, "source");
    check_tokens(ex.prefix, vocab, "prefix");
    if (!vocab.contains(ex.next)) throw InputError("train_loglinear: target token out of range");
    events.push_back({model->features(ex.source, ex.prefix), ex.next});
  }

  const std::size_t v = vocab.size();
  const double floor = opt.alpha / static_cast<double>(v);
  const long eval_every = opt.eval_every > 0 ? opt.eval_every : std::max<long>(1, opt.steps / 20);

  TrainResult result;
  result.trajectory.push_back({0, detail::mean_loss(*model, events, opt.alpha)});

  std::mt19937_64 rng(opt.seed);
  std::vector<std::size_t> order(events.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();
  auto& w = model->weights();
  const std::size_t batch = std::min(opt.batch_size, events.size());
  const double scale = opt.learning_rate / static_cast<double>(batch);
  std::vector<std::pair<const detail::FeaturizedEvent*, std::vector<double>>> grads(batch);
  for (long step = 1; step <= opt.steps; ++step) {
    for (auto& [event, g] : grads) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      event = &events[order[cursor++]];
      g = model->softmax_for(event->features);
      const double loss = smoothed_cross_entropy(g, event->next, opt.alpha);
      if (!std::isfinite(loss)) {
        throw TrainingError("train_loglinear: loss diverged at step " + std::to_string(step));
      }
      for (std::size_t i = 0; i < v; ++i) {
        g[i] -= (static_cast<TokenId>(i) == event->next ? 1.0 - opt.alpha : 0.0) + floor;
        g[i] *= scale;
      }
    }
    for (const auto& [event, g] : grads) {
      for (std::size_t f : event->features) {
        double* row = &w[f * v];
        for (std::size_t i = 0; i < v; ++i) row[i] -= g[i];
      }
    }
    if (step % eval_every == 0 || step == opt.steps) {
      const double full = detail::mean_loss(*model, events, opt.alpha);
      if (!std::isfinite(full)) {
        throw TrainingError("train_loglinear: loss diverged at step " + std::to_string(step));
      }
      result.trajectory.push_back({step, full});
    }
  }
  result.model = std::move(model);
  return result;
}

inline std::vector<TrainingExample> corpus_events(const Corpus& corpus) {
  std::vector<TrainingExample> events;
  const Vocabulary vocab = Vocabulary::synthetic(corpus.task.vocab_size);
  for (const auto& [source, target] : corpus.pairs) {
    if (!is_complete(target, vocab.eos())) throw InputError("corpus_events: incomplete target");
    for (std::size_t t = 0; t < target.size(); ++t) {
      events.push_back({source, TokenSeq(target.begin(), target.begin() + static_cast<std::ptrdiff_t>(t)), target[t]});
    }
  }
  return events;
}

inline TrainResult train_loglinear(const Corpus& corpus, TrainOptions opt) {
  if (corpus.pairs.empty()) throw InputError("train_loglinear: empty corpus");
  opt.reverse_alignment = corpus.task.kind == TaskKind::kReverse;
  return train_loglinear(Vocabulary::synthetic(corpus.task.vocab_size), corpus_events(corpus), opt);
}

// Max relative disagreement between the analytic gradient of the smoothed
// cross-entropy and a central finite difference, over every weight in the
// example's active feature rows plus |inactive_samples| random inactive ones.
// The finite difference is evaluated in long double to keep cancellation error
// far below the comparison threshold.
inline double grad_check(LogLinearModel& model, const TrainingExample& example, double eps, double alpha,
                         std::size_t inactive_samples = 16, std::uint64_t seed = 0) {
  if (!(eps > 0.0)) throw InputError("grad_check: eps must be > 0");
  const std::size_t v = model.vocab().size();
  const auto feats = model.features(example.source, example.prefix);
  const std::vector<double> p = model.softmax_for(feats);
  const double floor = alpha / static_cast<double>(v);

  auto analytic = [&](std::size_t f, std::size_t i) {
    const long hits = std::count(feats.begin(), feats.end(), f);
    const double q = (static_cast<TokenId>(i) == example.next ? 1.0 - alpha : 0.0) + floor;
    return static_cast<double>(hits) * (p[i] - q);
  };
  auto loss_at = [&]() -> long double {
    std::vector<long double> z(v, 0.0L);
    for (std::size_t f : feats) {
      for (std::size_t i = 0; i < v; ++i) z[i] += model.weights()[f * v + i];
    }
    const long double zmax = *std::max_element(z.begin(), z.end());
    long double total = 0.0L;
    for (long double x : z) total += std::exp(x - zmax);
    const long double lse = zmax + std::log(total);
    long double loss = 0.0L;
    for (std::size_t i = 0; i < v; ++i) {
      const long double q = (static_cast<TokenId>(i) == example.next ? 1.0L - alpha : 0.0L) + floor;
      loss -= q * (z[i] - lse);
    }
    return loss;
  };

  std::vector<std::pair<std::size_t, std::size_t>> probes;
  for (std::size_t f : feats) {
    for (std::size_t i = 0; i < v; ++i) probes.emplace_back(f, i);
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_f(0, model.layout().dim() - 1);
  std::uniform_int_distribution<std::size_t> pick_i(0, v - 1);
  for (std::size_t s = 0; s < inactive_samples; ++s) probes.emplace_back(pick_f(rng), pick_i(rng));

  double worst = 0.0;
  for (const auto& [f, i] : probes) {
    double& w = model.weights()[f * v + i];
    const double saved = w;
    w = saved + eps;
    const double up = w;
    const long double loss_up = loss_at();
    w = saved - eps;
    const double down = w;
    const long double loss_down = loss_at();
    w = saved;
    const double fd = static_cast<double>((loss_up - loss_down) / static_cast<long double>(up - down));
    const double a = analytic(f, i);
    worst = std::max(worst, std::abs(a - fd) / (std::abs(a) + 1e-8));
  }
  return worst;
}

// ============================================================================
// PerturbedModel
// ============================================================================

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_query(std::uint64_t seed, TokenView source, TokenView prefix) {
  std::uint64_t h = splitmix64(seed);
  for (TokenId t : source) h = splitmix64(h ^ static_cast<std::uint64_t>(t + 1));
  h = splitmix64(h ^ 0xA5A5A5A5A5A5A5A5ULL);
  for (TokenId t : prefix) h = splitmix64(h ^ static_cast<std::uint64_t>(t + 1));
  return h;
}

}  // namespace detail

class PerturbedModel final : public SequenceModel {
 public:
  PerturbedModel(ModelPtr inner, double noise_scale, std::uint64_t seed)
      : inner_(std::move(inner)), noise_scale_(noise_scale), seed_(seed) {
    if (!inner_) throw InputError("PerturbedModel: null inner model");
    if (!(noise_scale_ >= 0.0)) throw InputError("PerturbedModel: noise_scale must be >= 0");
  }

  ProbDist next_dist(TokenView source, TokenView prefix) const override {
    ProbDist base = inner_->next_dist(source, prefix);
    if (noise_scale_ == 0.0) return base;
    std::uint64_t h = detail::hash_query(seed_, source, prefix);
    std::vector<double> out(base.size());
    double total = 0.0;
    for (std::size_t i = 0; i < base.size(); ++i) {
      h = detail::splitmix64(h);
      // Uniform in [-1, 1) from the top 53 bits.
      const double u = static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 - 1.0;
      out[i] = std::max(0.0, base[i] + noise_scale_ * u);
      total += out[i];
    }
    if (!(total > 0.0)) return base;
    for (double& x : out) x /= total;
    return ProbDist(std::move(out));
  }
  const Vocabulary& vocab() const override { return inner_->vocab(); }
  std::string kind() const override { return "perturbed"; }

  const ModelPtr& inner() const { return inner_; }
  double noise_scale() const { return noise_scale_; }
  std::uint64_t seed() const { return seed_; }

 private:
  ModelPtr inner_;
  double noise_scale_;
  std::uint64_t seed_;
};

inline std::shared_ptr<const PerturbedModel> perturb(ModelPtr inner, double noise_scale, std::uint64_t seed) {
  return std::make_shared<PerturbedModel>(std::move(inner), noise_scale, seed);
}

}  // namespace lsdebias
