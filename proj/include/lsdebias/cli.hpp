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

// Command-line front end. run_cli() is the whole program; tools/lsdebias.cpp
// only forwards argv. Exit codes: 0 success, 1 usage error, 2 runtime or data
// error.
//
// Debiasing thresholds are given in units of 1/V: "--delta 0.5" means
// delta = 0.5 / V.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lsdebias/core.hpp"
#include "lsdebias/eval.hpp"
#include "lsdebias/io.hpp"
#include "lsdebias/models.hpp"
#include "lsdebias/search.hpp"
#include "lsdebias/smoothing.hpp"
#include "lsdebias/task.hpp"

namespace lsdebias {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

inline constexpr const char* kWorkersEnv = "LSDEBIAS_WORKERS";

// Column order of every TSV this tool writes.
inline constexpr const char* kReportColumns =
    "scope\tlo\thi\tcount\tbleu\tlength_ratio\tK\tdelta_units\tdelta\talpha\tmodel";
inline constexpr const char* kSweepColumns =
    "K\tdelta_units\tdelta\tbleu\tlength_ratio\tmean_length\tsteps_expanded";
inline constexpr const char* kCalibrationColumns =
    "K\tdelta_units\tdelta\tmean_set_probability\treference_in_set_rate\tgap\tqueries\texcluded";

namespace cli_detail {

inline unsigned default_workers() {
  if (const char* env = std::getenv(kWorkersEnv)) {
    try {
      const long w = std::stol(env);
      if (w >= 1) return static_cast<unsigned>(w);
    } catch (const std::exception&) {
    }
  }
  return 1;
}

inline std::string fmt(double x, int precision = 6) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << x;
  return os.str();
}

// Smoothing alpha of the outermost smoothed wrapper, 0 if none.
inline double model_alpha(const SequenceModel& model) {
  if (const auto* s = dynamic_cast<const SmoothedModel*>(&model)) return s->config().alpha;
  if (const auto* p = dynamic_cast<const PerturbedModel*>(&model)) return model_alpha(*p->inner());
  if (const auto* l = dynamic_cast<const LogLinearModel*>(&model)) return l->train_alpha();
  return 0.0;
}

inline std::string model_id(const SequenceModel& model) {
  if (const auto* s = dynamic_cast<const SmoothedModel*>(&model)) return "smoothed(" + model_id(*s->inner()) + ")";
  if (const auto* p = dynamic_cast<const PerturbedModel*>(&model)) return "perturbed(" + model_id(*p->inner()) + ")";
  return model.kind();
}

struct Inputs {
  ModelPtr model;
  Corpus corpus;
  std::vector<TokenSeq> sources;
  std::vector<TokenSeq> references;  // complete, with EOS
  std::vector<long> source_lengths;
};

inline Inputs load_inputs(const std::string& model_path, const std::string& corpus_path) {
  Inputs in;
  in.model = load_model(model_path);
  in.corpus = read_corpus(corpus_path);
  if (in.corpus.task.vocab_size != in.model->vocab().size()) {
    throw Error("corpus vocabulary size " + std::to_string(in.corpus.task.vocab_size) +
                " does not match model vocabulary size " + std::to_string(in.model->vocab().size()));
  }
  for (const auto& p : in.corpus.pairs) {
    in.sources.push_back(p.source);
    in.references.push_back(p.target);
    in.source_lengths.push_back(static_cast<long>(p.source.size()));
  }
  return in;
}

struct DecodeRun {
  std::vector<DecodeResult> results;
  std::vector<TokenSeq> hypotheses;  // best hypothesis, EOS stripped
  EvalReport report;
  long steps_expanded = 0;
};

inline DecodeRun run_decode(const Inputs& in, const DecodeConfig& cfg, SearchMode mode, unsigned workers,
                            std::size_t n_buckets) {
  if (in.sources.empty()) throw Error("corpus has no sentences to decode");
  DecodeRun run;
  run.results = decode_all(*in.model, in.sources, cfg, mode, workers);
  const TokenId eos = in.model->vocab().eos();
  std::vector<TokenSeq> refs;
  for (const auto& r : in.references) refs.push_back(strip_eos(r, eos));
  for (const auto& r : run.results) {
    run.steps_expanded += r.steps_expanded;
    run.hypotheses.push_back(r.ranked.empty() ? TokenSeq{} : strip_eos(r.best().target, eos));
  }
  run.report = evaluate(run.hypotheses, refs, in.source_lengths, n_buckets);
  return run;
}

inline std::optional<RectifierConfig> rectifier_for(double delta_units, std::size_t vocab_size) {
  if (delta_units == 0.0) return std::nullopt;
  return RectifierConfig(delta_units / static_cast<double>(vocab_size));
}

inline void write_report_tsv(std::ostream& os, const EvalReport& r, double delta_units) {
  os << kReportColumns << '\n';
  auto row = [&](const std::string& scope, long lo, long hi, std::size_t count, double bleu, double ratio) {
    os << scope << '\t' << lo << '\t' << hi << '\t' << count << '\t' << fmt(bleu, 4) << '\t' << fmt(ratio, 6)
       << '\t' << r.beam_size << '\t' << delta_units << '\t' << fmt(r.delta, 10) << '\t' << r.alpha << '\t'
       << r.model_id << '\n';
  };
  std::size_t total = 0;
  long lo = 0;
  long hi = 0;
  if (!r.per_bucket.empty()) {
    lo = r.per_bucket.front().range.lo;
    hi = r.per_bucket.back().range.hi;
  }
  for (const auto& b : r.per_bucket) total += b.range.count;
  row("all", lo, hi, total, r.bleu, r.length_ratio);
  for (std::size_t i = 0; i < r.per_bucket.size(); ++i) {
    const auto& b = r.per_bucket[i];
    row(b.range.empty() ? "bucket" + std::to_string(i) + "(empty)" : "bucket" + std::to_string(i), b.range.lo,
        b.range.hi, b.range.count, b.bleu, b.length_ratio);
  }
}

inline std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    const double x = std::stod(item, &used);
    if (used != item.size()) throw std::invalid_argument(item);
    out.push_back(x);
  }
  return out;
}

}  // namespace cli_detail

// ============================================================================
// Commands
// ============================================================================

struct GenOptions {
  std::string task = "copy";
  std::size_t vocab_size = 8;
  double flip = 0.0;
  double p_stop = 0.05;
  int min_len = 1;
  int max_len = 150;
  std::size_t n = 1000;
  std::uint64_t seed = 1;
  std::string out;
};

inline int cmd_gen(const GenOptions& o, std::ostream& out) {
  auto kind = parse_task_kind(o.task);
  if (!kind) throw InputError("unknown task '" + o.task + "'");
  TaskParams params{*kind, o.vocab_size, o.flip, LengthDist{o.p_stop, o.min_len, o.max_len}};
  const Corpus corpus = generate_corpus(SyntheticTask(params), o.n, o.seed);
  write_corpus(corpus, o.out);
  out << "wrote " << corpus.pairs.size() << " pairs to " << o.out << '\n';
  return kExitOk;
}

struct BuildOptions {
  std::string corpus;
  std::string kind = "empirical";
  double alpha = 0.0;
  int order = 1;
  double lr = 0.5;
  long steps = 20000;
  std::size_t batch = 32;
  std::uint64_t seed = 1;
  double noise = 0.0;
  std::uint64_t noise_seed = 0;
  std::string out;
};

inline int cmd_build(const BuildOptions& o, std::ostream& out) {
  const Corpus corpus = read_corpus(o.corpus);
  const SyntheticTask task(corpus.task);
  ModelPtr model;
  if (o.kind == "oracle") {
    if (o.alpha != 0.0) throw InputError("--kind oracle takes no --alpha; use smoothed-oracle");
    model = std::make_shared<OracleModel>(task);
  } else if (o.kind == "smoothed-oracle") {
    model = wrap_smoothed(std::make_shared<OracleModel>(task), o.alpha);
  } else if (o.kind == "empirical") {
    ModelPtr base = build_empirical(corpus, o.order);
    model = o.alpha > 0.0 ? ModelPtr(wrap_smoothed(base, o.alpha)) : base;
  } else if (o.kind == "loglinear") {
    TrainOptions topt;
    topt.alpha = o.alpha;
    topt.learning_rate = o.lr;
    topt.steps = o.steps;
    topt.batch_size = o.batch;
    topt.seed = o.seed;
    topt.order = o.order;
    TrainResult trained = train_loglinear(corpus, topt);
    out << "step\tloss\n";
    for (const auto& p : trained.trajectory) out << p.step << '\t' << cli_detail::fmt(p.loss, 8) << '\n';
    model = trained.model;
  } else {
    throw InputError("unknown model kind '" + o.kind + "'");
  }
  if (o.noise > 0.0) model = perturb(model, o.noise, o.noise_seed);
  save_model(*model, o.out);
  out << "saved " << cli_detail::model_id(*model) << " model to " << o.out << '\n';
  return kExitOk;
}

struct DecodeOptions {
  std::string model;
  std::string corpus;
  int beam_size = 4;
  double delta_units = 0.0;
  double length_norm = 0.0;
  int max_len = 0;  // 0: 2 * |source| + 10
  std::string mode = "beam";
  std::size_t buckets = 4;
  unsigned workers = 1;
  std::string out;
  std::string report;
};

inline SearchMode parse_mode(const std::string& mode) {
  if (mode == "beam") return SearchMode::kBeam;
  if (mode == "greedy") return SearchMode::kGreedy;
  if (mode == "exact") return SearchMode::kExact;
  throw InputError("unknown search mode '" + mode + "'");
}

inline int cmd_decode(const DecodeOptions& o, std::ostream& out) {
  const auto in = cli_detail::load_inputs(o.model, o.corpus);
  const std::size_t v = in.model->vocab().size();
  DecodeConfig cfg;
  cfg.beam_size = o.beam_size;
  cfg.rectifier = cli_detail::rectifier_for(o.delta_units, v);
  cfg.length_norm_exponent = o.length_norm;
  if (o.max_len > 0) cfg.max_len = o.max_len;
  auto run = cli_detail::run_decode(in, cfg, parse_mode(o.mode), o.workers, o.buckets);
  run.report.beam_size = o.beam_size;
  run.report.delta = o.delta_units / static_cast<double>(v);
  run.report.alpha = cli_detail::model_alpha(*in.model);
  run.report.model_id = cli_detail::model_id(*in.model);

  if (!o.out.empty()) {
    std::ofstream hyp(o.out);
    if (!hyp) throw Error("cannot open '" + o.out + "' for writing");
    for (const auto& h : run.hypotheses) {
      detail::write_tokens(hyp, h, in.model->vocab());
      hyp << '\n';
    }
  }
  if (!o.report.empty()) {
    std::ofstream rep(o.report);
    if (!rep) throw Error("cannot open '" + o.report + "' for writing");
    cli_detail::write_report_tsv(rep, run.report, o.delta_units);
  }
  out << "sentences     " << in.sources.size() << '\n'
      << "K             " << o.beam_size << '\n'
      << "delta         " << o.delta_units << "/V = " << run.report.delta << '\n'
      << "BLEU          " << cli_detail::fmt(run.report.bleu, 2) << '\n'
      << "length ratio  " << cli_detail::fmt(run.report.length_ratio, 4) << '\n'
      << "mean length   " << cli_detail::fmt(run.report.mean_hyp_length, 2) << '\n';
  for (std::size_t i = 0; i < run.report.per_bucket.size(); ++i) {
    const auto& b = run.report.per_bucket[i];
    out << "  [" << b.range.lo << ", " << b.range.hi << ")  n=" << b.range.count;
    if (b.range.empty()) {
      out << "  (empty)\n";
    } else {
      out << "  BLEU " << cli_detail::fmt(b.bleu, 2) << "  ratio " << cli_detail::fmt(b.length_ratio, 4) << '\n';
    }
  }
  return kExitOk;
}

struct SweepOptions {
  std::string model;
  std::string corpus;
  std::string deltas = "0,0.1,0.5,1,10,100";
  std::string beams = "1,4,8,25,100,200";
  unsigned workers = 1;
  std::string out_dir;
};

inline int cmd_sweep(const SweepOptions& o, std::ostream& out) {
  std::vector<double> deltas;
  std::vector<double> beams;
  try {
    deltas = cli_detail::parse_list(o.deltas);
    beams = cli_detail::parse_list(o.beams);
  } catch (const std::exception&) {
    throw InputError("grids must be comma-separated numbers");
  }
  if (deltas.empty() || beams.empty()) throw InputError("sweep grids must be non-empty");
  for (double d : deltas) {
    if (!(d >= 0.0)) throw InputError("sweep deltas must be >= 0");
  }
  for (double k : beams) {
    if (k < 1 || k != std::floor(k)) throw InputError("sweep beam sizes must be positive integers");
  }
  const auto in = cli_detail::load_inputs(o.model, o.corpus);
  const std::size_t v = in.model->vocab().size();

  std::ostringstream tsv;
  tsv << kSweepColumns << '\n';
  out << "K\tdelta\tBLEU\tratio\tmean_len\n";
  for (double k : beams) {
    for (double d : deltas) {
      DecodeConfig cfg;
      cfg.beam_size = static_cast<int>(k);
      cfg.rectifier = cli_detail::rectifier_for(d, v);
      const auto run = cli_detail::run_decode(in, cfg, SearchMode::kBeam, o.workers, 4);
      tsv << cfg.beam_size << '\t' << d << '\t' << cli_detail::fmt(d / static_cast<double>(v), 10) << '\t'
          << cli_detail::fmt(run.report.bleu, 4) << '\t' << cli_detail::fmt(run.report.length_ratio, 6) << '\t'
          << cli_detail::fmt(run.report.mean_hyp_length, 4) << '\t' << run.steps_expanded << '\n';
      out << cfg.beam_size << '\t' << d << "/V\t" << cli_detail::fmt(run.report.bleu, 2) << '\t'
          << cli_detail::fmt(run.report.length_ratio, 4) << '\t' << cli_detail::fmt(run.report.mean_hyp_length, 2)
          << '\n';
    }
  }
  std::filesystem::create_directories(o.out_dir);
  const std::string path = (std::filesystem::path(o.out_dir) / "sweep.tsv").string();
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  os << tsv.str();
  out << "wrote " << path << '\n';
  return kExitOk;
}

struct BoundOptions {
  double alpha = 0.1;
  std::size_t vocab_size = 32000;
};

inline int cmd_bound(const BoundOptions& o, std::ostream& out) {
  const SmoothingConfig cfg(o.alpha, o.vocab_size);
  const auto bound = length_bound(cfg);
  out << "alpha             " << o.alpha << '\n' << "V                 " << o.vocab_size << '\n';
  if (!bound) {
    out << "no bound (alpha = 0 applies no per-token penalty)\n";
    return kExitOk;
  }
  const auto at = score_bounds(cfg, bound->t_max);
  const auto past = score_bounds(cfg, bound->t_max + 1);
  out << std::setprecision(10) << "continuous bound  " << bound->continuous_bound << '\n'
      << "t_max             " << bound->t_max << '\n'
      << "empty lower       " << at.empty_lower << '\n'
      << "upper(t_max)      " << at.length_upper << '\n'
      << "upper(t_max + 1)  " << past.length_upper << '\n'
      << "per-token penalty " << per_token_penalty(cfg) << '\n';
  return kExitOk;
}

struct CalibrateOptions {
  std::string model;
  std::string corpus;
  int beam_size = 200;
  double delta_units = 0.0;
  unsigned workers = 1;
  std::string out;
};

inline int cmd_calibrate(const CalibrateOptions& o, std::ostream& out) {
  const auto in = cli_detail::load_inputs(o.model, o.corpus);
  const std::size_t v = in.model->vocab().size();
  DecodeConfig cfg;
  cfg.beam_size = o.beam_size;
  cfg.rectifier = cli_detail::rectifier_for(o.delta_units, v);
  const auto r = set_calibration(*in.model, in.sources, in.references, cfg, o.workers);
  const double delta = o.delta_units / static_cast<double>(v);
  std::ostringstream row;
  row << r.beam_size << '\t' << o.delta_units << '\t' << cli_detail::fmt(delta, 10) << '\t'
      << cli_detail::fmt(r.mean_set_probability, 6) << '\t' << cli_detail::fmt(r.reference_in_set_rate, 6) << '\t'
      << cli_detail::fmt(r.gap, 6) << '\t' << r.queries << '\t' << r.excluded << '\n';
  if (!o.out.empty()) {
    std::ofstream os(o.out);
    if (!os) throw Error("cannot open '" + o.out + "' for writing");
    os << kCalibrationColumns << '\n' << row.str();
  }
  out << "K                      " << r.beam_size << '\n'
      << "delta                  " << o.delta_units << "/V\n"
      << "sum prob of S          " << cli_detail::fmt(r.mean_set_probability, 4) << '\n'
      << "reference in S         " << cli_detail::fmt(r.reference_in_set_rate, 4) << '\n'
      << "gap                    " << cli_detail::fmt(r.gap, 4)
      << (r.gap < 0 ? "  (under-confident)" : r.gap > 0 ? "  (over-confident)" : "") << '\n'
      << "queries / excluded     " << r.queries << " / " << r.excluded << '\n';
  return kExitOk;
}

// ============================================================================
// Entry point
// ============================================================================

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Label-smoothing length bias: synthetic tasks, decoding sweeps and debiasing", "lsdebias"};
  app.require_subcommand(1);
  const unsigned workers_default = cli_detail::default_workers();

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic corpus");
  gen_cmd->add_option("--task", gen.task, "copy | reverse | noisy_copy")
      ->check(CLI::IsMember({"copy", "reverse", "noisy_copy"}));
  gen_cmd->add_option("--V", gen.vocab_size, "Vocabulary size including <eos> and <bos>")
      ->check(CLI::Range(3, 1 << 20));
  gen_cmd->add_option("--flip", gen.flip, "noisy_copy per-position flip probability")->check(CLI::Range(0.0, 1.0));
  gen_cmd->add_option("--p-stop", gen.p_stop, "Geometric length stop probability");
  gen_cmd->add_option("--min-len", gen.min_len, "Minimum source length");
  gen_cmd->add_option("--max-len", gen.max_len, "Source length cap");
  gen_cmd->add_option("--n", gen.n, "Number of pairs")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen.seed, "RNG seed");
  gen_cmd->add_option("--out", gen.out, "Output corpus path")->required();

  BuildOptions build;
  auto* build_cmd = app.add_subcommand("build", "Build or train a model from a corpus");
  build_cmd->add_option("--corpus", build.corpus, "Training corpus")->required();
  build_cmd->add_option("--kind", build.kind, "oracle | smoothed-oracle | empirical | loglinear")
      ->check(CLI::IsMember({"oracle", "smoothed-oracle", "empirical", "loglinear"}));
  build_cmd->add_option("--alpha", build.alpha, "Label smoothing alpha")->check(CLI::Range(0.0, 0.999999));
  build_cmd->add_option("--order", build.order, "Context order (empirical, loglinear)")->check(CLI::PositiveNumber);
  build_cmd->add_option("--lr", build.lr, "SGD learning rate (loglinear)")->check(CLI::PositiveNumber);
  build_cmd->add_option("--steps", build.steps, "SGD updates (loglinear)")->check(CLI::NonNegativeNumber);
  build_cmd->add_option("--batch", build.batch, "events per SGD update (loglinear)")->check(CLI::PositiveNumber);
  build_cmd->add_option("--seed", build.seed, "Shuffle seed (loglinear)");
  build_cmd->add_option("--noise", build.noise, "Wrap in a perturbed model with this noise scale")
      ->check(CLI::NonNegativeNumber);
  build_cmd->add_option("--noise-seed", build.noise_seed, "Perturbation seed");
  build_cmd->add_option("--out", build.out, "Output model path")->required();

  DecodeOptions dec;
  dec.workers = workers_default;
  auto* dec_cmd = app.add_subcommand("decode", "Decode a corpus and report BLEU / length ratio");
  dec_cmd->add_option("--model", dec.model, "Model file")->required();
  dec_cmd->add_option("--corpus", dec.corpus, "Corpus to decode")->required();
  dec_cmd->add_option("--K", dec.beam_size, "Beam size")->check(CLI::PositiveNumber);
  dec_cmd->add_option("--delta", dec.delta_units, "Debiasing threshold in units of 1/V")
      ->check(CLI::NonNegativeNumber);
  dec_cmd->add_option("--length-norm", dec.length_norm, "Length normalization exponent (0 = off)")
      ->check(CLI::NonNegativeNumber);
  dec_cmd->add_option("--max-len", dec.max_len, "Output length cap (default 2|x|+10)")->check(CLI::NonNegativeNumber);
  dec_cmd->add_option("--mode", dec.mode, "beam | greedy | exact")->check(CLI::IsMember({"beam", "greedy", "exact"}));
  dec_cmd->add_option("--buckets", dec.buckets, "Source-length buckets")->check(CLI::PositiveNumber);
  dec_cmd->add_option("--workers", dec.workers, "Decoding threads")->check(CLI::PositiveNumber);
  dec_cmd->add_option("--out", dec.out, "Hypotheses file (one per line)");
  dec_cmd->add_option("--report", dec.report, "Report TSV");

  SweepOptions sweep;
  sweep.workers = workers_default;
  auto* sweep_cmd = app.add_subcommand("sweep", "Decode over a delta x K grid");
  sweep_cmd->add_option("--model", sweep.model, "Model file")->required();
  sweep_cmd->add_option("--corpus", sweep.corpus, "Corpus to decode")->required();
  sweep_cmd->add_option("--deltas", sweep.deltas, "Comma-separated deltas in units of 1/V");
  sweep_cmd->add_option("--Ks", sweep.beams, "Comma-separated beam sizes");
  sweep_cmd->add_option("--workers", sweep.workers, "Decoding threads")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--out-dir", sweep.out_dir, "Directory for sweep.tsv")->required();

  BoundOptions bound;
  auto* bound_cmd = app.add_subcommand("bound", "Print the implicit length bound for alpha and V");
  bound_cmd->add_option("--alpha", bound.alpha, "Label smoothing alpha in [0, 1)")->check(CLI::Range(0.0, 0.999999));
  bound_cmd->add_option("--V", bound.vocab_size, "Vocabulary size")->check(CLI::Range(2, 1 << 30));

  CalibrateOptions cal;
  cal.workers = workers_default;
  auto* cal_cmd = app.add_subcommand("calibrate", "Set-level calibration of the top-K beam");
  cal_cmd->add_option("--model", cal.model, "Model file")->required();
  cal_cmd->add_option("--corpus", cal.corpus, "Corpus with references")->required();
  cal_cmd->add_option("--K", cal.beam_size, "Beam size")->check(CLI::PositiveNumber);
  cal_cmd->add_option("--delta", cal.delta_units, "Debiasing threshold in units of 1/V")
      ->check(CLI::NonNegativeNumber);
  cal_cmd->add_option("--workers", cal.workers, "Decoding threads")->check(CLI::PositiveNumber);
  cal_cmd->add_option("--out", cal.out, "Calibration TSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*gen_cmd) return cmd_gen(gen, out);
    if (*build_cmd) return cmd_build(build, out);
    if (*dec_cmd) return cmd_decode(dec, out);
    if (*sweep_cmd) return cmd_sweep(sweep, out);
    if (*bound_cmd) return cmd_bound(bound, out);
    if (*cal_cmd) return cmd_calibrate(cal, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace lsdebias
