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

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "lsdebias/eval.hpp"
#include "lsdebias/models.hpp"
#include "lsdebias/search.hpp"
#include "lsdebias/smoothing.hpp"
#include "lsdebias/task.hpp"
#include "test_util.hpp"

namespace lsdebias {
namespace {

using testing::random_dist;
using testing::random_source;

struct Outcome {
  bool pass = true;
  std::string failures;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (ok) return;
    failures += (pass ? "" : "; ") + what;
    pass = false;
  }
};

int failures = 0;

void run(int id, const std::string& name, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.require(false, std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::string text = o.detail.str();
  if (!o.pass) text = o.failures + (text.empty() ? "" : " | " + text);
  std::printf("%s [%d] %s (%.2fs): %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), secs, text.c_str());
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

std::string num(double x, int precision = 6) {
  std::ostringstream os;
  os.precision(precision);
  os << x;
  return os.str();
}

TokenSeq with_eos(TokenSeq s) {
  s.push_back(0);
  return s;
}

DecodeConfig beam(int k, std::optional<RectifierConfig> rect = {}) {
  DecodeConfig cfg;
  cfg.beam_size = k;
  cfg.rectifier = rect;
  return cfg;
}

unsigned workers() { return std::max(1u, std::thread::hardware_concurrency()); }

// ---------------------------------------------------------------------------

void exact_constants(Outcome& o) {
  const double penalty = per_token_penalty({0.1, 32000});
  o.require(std::abs(penalty - (-0.10536)) <= 1e-4, "per_token_penalty = " + num(penalty));
  const auto b = length_bound({0.1, 32000});
  o.require(b.has_value(), "no bound");
  if (!b) return;
  o.require(b->continuous_bound > 120.3 && b->continuous_bound < 120.4,
            "continuous_bound = " + num(b->continuous_bound, 10));
  const auto at121 = score_bounds({0.1, 32000}, 121);
  o.require(at121.length_upper < at121.empty_lower, "ceiling^121 >= floor");
  o.detail << "penalty " << num(penalty) << ", bound " << num(b->continuous_bound, 8) << ", t_max " << b->t_max
           << ", ceiling^121 " << num(at121.length_upper) << " < floor " << num(at121.empty_lower);
}

void round_trip(Outcome& o) {
  std::mt19937_64 rng(20);
  std::uniform_real_distribution<double> alpha(0.001, 0.99);
  double worst_debias = 0.0;
  double worst_rectify = 0.0;
  const std::size_t sizes[] = {4, 64, 1024};
  for (int i = 0; i < 1000; ++i) {
    const std::size_t v = sizes[i % 3];
    const SmoothingConfig cfg(alpha(rng), v);
    const ProbDist q = random_dist(v, rng, 0.3);
    const ProbDist back = debias_exact(smooth(q, cfg), cfg);
    for (std::size_t j = 0; j < v; ++j) worst_debias = std::max(worst_debias, std::abs(back[j] - q[j]));

    const ProbDist sparse = random_dist(v, rng, 0.7);
    const ProbDist rect = rectify(smooth(sparse, cfg), RectifierConfig(cfg.floor()));
    for (std::size_t j = 0; j < v; ++j) worst_rectify = std::max(worst_rectify, std::abs(rect[j] - sparse[j]));
  }
  o.require(worst_debias <= 1e-12, "debias error " + num(worst_debias));
  o.require(worst_rectify <= 1e-12, "rectify error " + num(worst_rectify));
  o.detail << "max |debias(smooth(q)) - q| " << num(worst_debias) << ", max |rectify(smooth(q)) - q| "
           << num(worst_rectify) << " over 1000 draws";
}

void bound_realization(Outcome& o) {
  auto params = testing::copy_params(4);
  auto model = wrap_smoothed(std::make_shared<OracleModel>(SyntheticTask(params)), 0.1);
  const auto bound = length_bound({0.1, 4});
  o.require(bound && bound->t_max == 47, "t_max != 47");
  std::mt19937_64 rng(30);
  double worst_empty = 0.0;
  double worst_copy = 0.0;
  int n = 0;
  for (int i = 0; i < 25; ++i, ++n) {
    const TokenSeq long_src = random_source(model->vocab(), 60, rng);
    const auto a = exact_decode(*model, long_src);
    o.require(a.found() && a.best().target == TokenSeq{0}, "length-60 source not empty");
    if (a.found()) worst_empty = std::max(worst_empty, std::abs(a.best().log_prob - std::log(0.025)));

    const TokenSeq short_src = random_source(model->vocab(), 30, rng);
    const auto b = exact_decode(*model, short_src);
    o.require(b.found() && b.best().target == with_eos(short_src), "length-30 source not copied");
    if (b.found()) worst_copy = std::max(worst_copy, std::abs(b.best().log_prob - 31 * std::log(0.925)));
  }
  o.require(worst_empty <= 1e-9, "empty score error " + num(worst_empty));
  o.require(worst_copy <= 1e-9, "copy score error " + num(worst_copy));
  o.detail << n << " sources per length; empty score err " << num(worst_empty) << ", copy score err "
           << num(worst_copy);
}

void debias_equivalence(Outcome& o) {
  const int beams[] = {1, 4, 8, 25, 100, 200};
  long compared = 0;
  long tie_swaps = 0;
  double worst = 0.0;
  for (TaskKind kind : {TaskKind::kCopy, TaskKind::kReverse, TaskKind::kNoisyCopy}) {
    TaskParams params{kind, 8, kind == TaskKind::kNoisyCopy ? 0.1 : 0.0, LengthDist{0.1, 1, 40}};
    const SyntheticTask task(params);
    auto oracle = std::make_shared<OracleModel>(task);
    auto smoothed = wrap_smoothed(oracle, 0.1);
    const RectifierConfig rect(0.1 / 8);
    const Corpus corpus = generate_corpus(task, 200, 40 + static_cast<int>(kind));
    std::vector<TokenSeq> sources;
    for (const auto& p : corpus.pairs) sources.push_back(p.source);
    for (int k : beams) {
      const auto raw = decode_all(*oracle, sources, beam(k), SearchMode::kBeam, workers());
      const auto deb = decode_all(*smoothed, sources, beam(k, rect), SearchMode::kBeam, workers());
      for (std::size_t i = 0; i < sources.size(); ++i) {
        const auto& a = raw[i].ranked;
        const auto& b = deb[i].ranked;
        if (a.size() != b.size()) {
          o.require(false, to_string(kind) + " K=" + std::to_string(k) + " list size differs");
          continue;
        }
        for (std::size_t j = 0; j < a.size(); ++j) {
          ++compared;
          const double err = std::abs(a[j].log_prob - b[j].log_prob);
          worst = std::max(worst, err);
          if (a[j].target != b[j].target) {
            // Equal-probability alternatives of the stochastic task may order
            // differently at the last ulp; deterministic tasks never tie.
            const bool tie = kind == TaskKind::kNoisyCopy && err <= 1e-9;
            if (tie) {
              ++tie_swaps;
            } else {
              o.require(false, to_string(kind) + " K=" + std::to_string(k) + " tokens differ");
            }
          }
        }
      }
    }
  }
  o.require(worst <= 1e-9, "score error " + num(worst));
  o.detail << compared << " ranked hypotheses compared, max score err " << num(worst) << ", tied reorderings "
           << tie_swaps;
}

// ---------------------------------------------------------------------------
// Noisy-copy benchmark shared by the trend and calibration criteria.

struct Benchmark {
  ModelPtr model;
  std::vector<TokenSeq> sources;
  std::vector<TokenSeq> references;  // with EOS
  std::vector<TokenSeq> refs_stripped;
  std::vector<long> source_lengths;
  double alpha = 0.1;
  std::size_t v = 64;
};

const Benchmark& benchmark() {
  static const Benchmark b = [] {
    Benchmark out;
    const SyntheticTask task(TaskParams{TaskKind::kNoisyCopy, out.v, 0.1, LengthDist{}});
    out.model = wrap_smoothed(build_empirical(generate_corpus(task, 20000, 1), 1), out.alpha);
    for (const auto& p : generate_corpus(task, 2000, 2).pairs) {
      out.sources.push_back(p.source);
      out.references.push_back(p.target);
      out.refs_stripped.push_back(strip_eos(p.target, 0));
      out.source_lengths.push_back(static_cast<long>(p.source.size()));
    }
    return out;
  }();
  return b;
}

struct Cell {
  double bleu;
  double length_ratio;
  double mean_length;
  CalibrationReport calibration;
};

std::map<std::pair<int, int>, Cell> cells;  // (K, delta index)

const Cell& cell(int k, int delta_index) {
  const auto key = std::make_pair(k, delta_index);
  if (auto it = cells.find(key); it != cells.end()) return it->second;
  const Benchmark& b = benchmark();
  std::optional<RectifierConfig> rect;
  if (delta_index == 1) rect = RectifierConfig(b.alpha / static_cast<double>(b.v));
  if (delta_index == 2) rect = RectifierConfig(10.0 / static_cast<double>(b.v));
  const auto results = decode_all(*b.model, b.sources, beam(k, rect), SearchMode::kBeam, workers());
  std::vector<TokenSeq> hyps;
  for (const auto& r : results) hyps.push_back(r.ranked.empty() ? TokenSeq{} : strip_eos(r.best().target, 0));
  const EvalReport rep = evaluate(hyps, b.refs_stripped, b.source_lengths);
  Cell c{rep.bleu, rep.length_ratio, rep.mean_hyp_length, calibration_from_results(results, b.references, k)};
  std::printf("      K=%-3d delta=%s  BLEU %.2f  ratio %.4f  mean_len %.2f  set_prob %.4f  ref_in_S %.4f\n", k,
              delta_index == 0 ? "0    " : delta_index == 1 ? "a/V  " : "10/V ", c.bleu, c.length_ratio,
              c.mean_length, c.calibration.mean_set_probability, c.calibration.reference_in_set_rate);
  std::fflush(stdout);
  return cells.emplace(key, c).first->second;
}

void degradation_trend(Outcome& o) {
  const int beams[] = {1, 4, 8, 25, 100, 200};
  std::vector<double> lengths;
  for (int k : beams) lengths.push_back(cell(k, 0).mean_length);
  int inversions = 0;
  double worst_rise = 0.0;
  for (std::size_t i = 1; i < lengths.size(); ++i) {
    if (lengths[i] > lengths[i - 1]) {
      ++inversions;
      worst_rise = std::max(worst_rise, lengths[i] - lengths[i - 1]);
    }
  }
  o.require(inversions <= 1 && worst_rise <= 0.5,
            std::to_string(inversions) + " inversions, largest rise " + num(worst_rise));
  const Cell& raw = cell(200, 0);
  const Cell& deb = cell(200, 1);
  o.require(deb.bleu >= raw.bleu, "BLEU(a/V) " + num(deb.bleu) + " < BLEU(0) " + num(raw.bleu));
  o.require(deb.length_ratio >= raw.length_ratio, "ratio(a/V) < ratio(0)");
  o.detail << "mean length K=1..200: ";
  for (std::size_t i = 0; i < lengths.size(); ++i) o.detail << (i ? " " : "") << num(lengths[i], 4);
  o.detail << "; K=200 BLEU " << num(raw.bleu, 4) << " -> " << num(deb.bleu, 4) << ", ratio "
           << num(raw.length_ratio, 4) << " -> " << num(deb.length_ratio, 4);
}

void calibration_direction(Outcome& o) {
  const double g0 = cell(200, 0).calibration.gap;
  const double g1 = cell(200, 1).calibration.gap;
  const double g2 = cell(200, 2).calibration.gap;
  o.require(g0 < 0.0, "gap(0) = " + num(g0) + " not negative");
  o.require(std::abs(g1) < std::abs(g0), "|gap(a/V)| >= |gap(0)|");
  o.require(g2 > 0.0, "gap(10/V) = " + num(g2) + " not positive");
  o.detail << "K=200 gap: delta 0 " << num(g0, 4) << ", a/V " << num(g1, 4) << ", 10/V " << num(g2, 4);
}

void search_oracles(Outcome& o) {
  const std::size_t v = 7;
  const SyntheticTask noisy(TaskParams{TaskKind::kNoisyCopy, v, 0.2, LengthDist{0.15, 1, 20}});
  const Corpus train = generate_corpus(noisy, 200, 70);
  TrainOptions topt;
  topt.alpha = 0.1;
  topt.steps = 500;
  std::vector<std::pair<std::string, ModelPtr>> models{
      {"oracle", std::make_shared<OracleModel>(noisy)},
      {"smoothed", wrap_smoothed(std::make_shared<OracleModel>(noisy), 0.1)},
      {"empirical", build_empirical(train, 2)},
      {"smoothed-empirical", wrap_smoothed(build_empirical(train, 1), 0.1)},
      {"loglinear", train_loglinear(train, topt).model},
      {"perturbed", perturb(wrap_smoothed(std::make_shared<OracleModel>(noisy), 0.1), 0.02, 7)},
      {"random", std::make_shared<testing::RandomModel>(v, 71, 0.3)},
  };
  std::mt19937_64 rng(72);
  long checked = 0;
  for (const auto& [name, m] : models) {
    for (int i = 0; i < 200; ++i) {
      const TokenSeq src = random_source(m->vocab(), 1 + i % 20, rng);
      const auto g = greedy_decode(*m, src, beam(1));
      const auto b = beam_decode(*m, src, beam(1));
      ++checked;
      if (g.best().target != b.best().target || g.best().log_prob != b.best().log_prob) {
        o.require(false, "K=1 differs from greedy on " + name);
        break;
      }
    }
  }
  int exact_checked = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    testing::RandomModel m(3, 7300 + seed, seed % 2 ? 0.3 : 0.0);
    const TokenSeq src = random_source(m.vocab(), 1 + seed % 4, rng);
    const double want = testing::enumerate_best_score(m, src, 6);
    const auto r = exact_decode(m, src, 6);
    const double got = r.found() ? r.best().log_prob : kNegInf;
    ++exact_checked;
    if (got != want) o.require(false, "exact " + num(got, 17) + " != enumeration " + num(want, 17));
  }
  o.detail << checked << " greedy/K=1 pairs over " << models.size() << " model kinds; " << exact_checked
           << " exact-vs-enumeration instances";
}

void training_correctness(Outcome& o) {
  std::mt19937_64 rng(80);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t v = 3 + rng() % 6;
    LogLinearModel m(Vocabulary::synthetic(v), 1 + static_cast<int>(rng() % 3), rng() % 2 == 0, 0.1);
    std::normal_distribution<double> w(0.0, 0.5);
    for (auto& x : m.weights()) x = w(rng);
    TrainingExample ex;
    ex.source = random_source(m.vocab(), 1 + rng() % 6, rng);
    ex.prefix = random_source(m.vocab(), rng() % 8, rng);
    ex.next = static_cast<TokenId>(rng() % v);
    worst = std::max(worst, grad_check(m, ex, 1e-5, i % 2 ? 0.1 : 0.0, 16, static_cast<std::uint64_t>(i)));
  }
  o.require(worst < 1e-6, "grad_check " + num(worst));

  const auto vocab = Vocabulary::synthetic(5);
  std::vector<TrainingExample> data;
  for (TokenId t : {2, 2, 3, 4, 2, 0, 2, 3}) data.push_back({{2}, {}, t});
  TrainOptions opt;
  opt.alpha = 0.1;
  opt.steps = 20000;
  opt.learning_rate = 0.5;
  const auto trained = train_loglinear(vocab, data, opt);
  const ProbDist empirical{1.0 / 8, 0.0, 4.0 / 8, 2.0 / 8, 1.0 / 8};
  const ProbDist target = smooth(empirical, {0.1, 5});
  const ProbDist got = trained.model->next_dist(TokenSeq{2}, TokenSeq{});
  double linf = 0.0;
  for (std::size_t i = 0; i < 5; ++i) linf = std::max(linf, std::abs(got[i] - target[i]));
  o.require(linf <= 1e-3, "L-inf to smoothed empirical " + num(linf));
  o.detail << "max grad_check " << num(worst) << " over 100 cases; trained vs smoothed empirical L-inf "
           << num(linf);
}

void bleu_suite(Outcome& o) {
  const std::vector<TokenSeq> refs{{2, 3, 4, 5}, {5, 4, 3, 2, 2, 3}, {2, 2, 2, 2, 2}};
  const double same = corpus_bleu(refs, refs);
  o.require(same == 100.0, "identical corpus " + num(same));
  const double bp = corpus_bleu({{2, 3, 4, 5}}, {{2, 3, 4, 5, 6}});
  o.require(std::abs(bp - 77.88) <= 0.01, "brevity case " + num(bp));
  std::vector<TokenSeq> hyps{{2, 3, 4, 6, 5}, {5, 4, 3, 2}, {2, 2, 2, 3, 2, 2}};
  const double base = corpus_bleu(hyps, refs);
  const double permuted = corpus_bleu({hyps[2], hyps[0], hyps[1]}, {refs[2], refs[0], refs[1]});
  o.require(base == permuted, "permutation changed BLEU");
  o.detail << "identical " << num(same) << ", brevity " << num(bp, 6) << ", permuted " << num(base) << " = "
           << num(permuted);
}

}  // namespace
}  // namespace lsdebias

int main() {
  using namespace lsdebias;
  run(1, "exact constants", exact_constants);
  run(2, "round-trip suite", round_trip);
  run(3, "bound realization", bound_realization);
  run(4, "debias equivalence", debias_equivalence);
  run(5, "degradation trend", degradation_trend);
  run(6, "calibration direction", calibration_direction);
  run(7, "search correctness oracles", search_oracles);
  run(8, "training correctness", training_correctness);
  run(9, "BLEU unit suite", bleu_suite);
  std::printf("%s: %d of 9 criteria failed\n", failures ? "FAILED" : "OK", failures);
  return failures ? 1 : 0;
}
