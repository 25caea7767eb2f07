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

// Corpus and model persistence.
//
// Corpus files are UTF-8 text. A header of "#key=value" lines carries the task
// metadata, followed by one pair per line: source tokens and target tokens,
// each space separated, split by a single tab. Targets include the trailing
// "<eos>".
//
//   #format=lsdebias-corpus
//   #version=1
//   #task=noisy_copy
//   #vocab_size=64
//   #flip_prob=0.1
//   #p_stop=0.05
//   #min_len=1
//   #max_len=150
//   #seed=7
//   #size=2
//   w3 w10<TAB>w3 w10 <eos>
//   w1<TAB>w5 <eos>
//
// Model files are one JSON document: {"format_version": 1, "kind": ..., ...}.
// Wrappers nest their inner model under "inner".

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "lsdebias/core.hpp"
#include "lsdebias/models.hpp"
#include "lsdebias/task.hpp"

namespace lsdebias {

class ParseError : public Error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : Error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class LoadError : public Error {
 public:
  using Error::Error;
};

inline constexpr int kCorpusFormatVersion = 1;
inline constexpr int kModelFormatVersion = 1;

// ============================================================================
// Corpus
// ============================================================================

namespace detail {

inline std::string format_double(double x) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << x;
  return os.str();
}

inline void write_tokens(std::ostream& os, TokenView seq, const Vocabulary& vocab) {
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i) os << ' ';
    os << vocab.token(seq[i]);
  }
}

inline std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

}  // namespace detail

inline void write_corpus(const Corpus& corpus, std::ostream& os) {
  const SyntheticTask task(corpus.task);
  const auto& vocab = task.vocab();
  const auto& p = corpus.task;
  os << "#format=lsdebias-corpus\n"
     << "#version=" << kCorpusFormatVersion << '\n'
     << "#task=" << to_string(p.kind) << '\n'
     << "#vocab_size=" << p.vocab_size << '\n'
     << "#flip_prob=" << detail::format_double(p.flip_prob) << '\n'
     << "#p_stop=" << detail::format_double(p.length.p_stop) << '\n'
     << "#min_len=" << p.length.min_len << '\n'
     << "#max_len=" << p.length.max_len << '\n'
     << "#seed=" << corpus.seed << '\n'
     << "#size=" << corpus.pairs.size() << '\n';
  for (const auto& pair : corpus.pairs) {
    detail::write_tokens(os, pair.source, vocab);
    os << '\t';
    detail::write_tokens(os, pair.target, vocab);
    os << '\n';
  }
}

inline void write_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  write_corpus(corpus, os);
  if (!os) throw Error("write to '" + path + "' failed");
}

inline Corpus read_corpus(std::istream& is, const std::string& name = "<stream>") {
  Corpus corpus;
  std::string line;
  std::size_t lineno = 0;
  std::optional<SyntheticTask> task;
  std::optional<std::size_t> declared_size;

  auto number = [&](const std::string& key, const std::string& value, auto parse) {
    try {
      std::size_t used = 0;
      auto x = parse(value, &used);
      if (used != value.size()) throw std::invalid_argument("trailing characters");
      return x;
    } catch (const std::exception&) {
      throw ParseError(name, lineno, "bad value '" + value + "' for " + key);
    }
  };
  auto as_double = [](const std::string& s, std::size_t* used) { return std::stod(s, used); };
  auto as_long = [](const std::string& s, std::size_t* used) { return std::stoll(s, used); };
  auto as_ulong = [](const std::string& s, std::size_t* used) { return std::stoull(s, used); };

  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty() && line[0] == '#') {
      if (task) throw ParseError(name, lineno, "header line after the first data line");
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ParseError(name, lineno, "header line without '='");
      const std::string key = line.substr(1, eq - 1);
      const std::string value = line.substr(eq + 1);
      if (key == "format") {
        if (value != "lsdebias-corpus") throw ParseError(name, lineno, "unknown format '" + value + "'");
      } else if (key == "version") {
        if (number(key, value, as_long) != kCorpusFormatVersion) {
          throw ParseError(name, lineno, "unsupported corpus version " + value);
        }
      } else if (key == "task") {
        auto kind = parse_task_kind(value);
        if (!kind) throw ParseError(name, lineno, "unknown task '" + value + "'");
        corpus.task.kind = *kind;
      } else if (key == "vocab_size") {
        corpus.task.vocab_size = number(key, value, as_ulong);
      } else if (key == "flip_prob") {
        corpus.task.flip_prob = number(key, value, as_double);
      } else if (key == "p_stop") {
        corpus.task.length.p_stop = number(key, value, as_double);
      } else if (key == "min_len") {
        corpus.task.length.min_len = static_cast<int>(number(key, value, as_long));
      } else if (key == "max_len") {
        corpus.task.length.max_len = static_cast<int>(number(key, value, as_long));
      } else if (key == "seed") {
        corpus.seed = number(key, value, as_ulong);
      } else if (key == "size") {
        declared_size = number(key, value, as_ulong);
      }
      // Unknown keys are ignored so newer writers stay readable.
      continue;
    }
    if (!task) {
      try {
        task.emplace(corpus.task);
      } catch (const Error& e) {
        throw ParseError(name, lineno, std::string("invalid task metadata: ") + e.what());
      }
    }
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw ParseError(name, lineno, "expected exactly one tab between source and target");
    }
    const auto& vocab = task->vocab();
    auto to_ids = [&](const std::string& text) {
      TokenSeq ids;
      for (const auto& tok : detail::split_ws(text)) {
        auto id = vocab.find(tok);
        if (!id) throw ParseError(name, lineno, "token '" + tok + "' is not in the vocabulary");
        ids.push_back(*id);
      }
      return ids;
    };
    SentencePair pair{to_ids(line.substr(0, tab)), to_ids(line.substr(tab + 1))};
    for (TokenId t : pair.source) {
      if (!vocab.is_content(t)) throw ParseError(name, lineno, "source contains a reserved token");
    }
    if (!is_complete(pair.target, vocab.eos())) {
      throw ParseError(name, lineno, "target must end with exactly one <eos>");
    }
    corpus.pairs.push_back(std::move(pair));
  }
  if (!task) {
    try {
      SyntheticTask check(corpus.task);
    } catch (const Error& e) {
      throw ParseError(name, lineno, std::string("invalid task metadata: ") + e.what());
    }
  }
  if (declared_size && *declared_size != corpus.pairs.size()) {
    throw ParseError(name, lineno, "header declares " + std::to_string(*declared_size) + " pairs, found " +
                                       std::to_string(corpus.pairs.size()));
  }
  return corpus;
}

inline Corpus read_corpus(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open corpus '" + path + "'");
  return read_corpus(is, path);
}

// ============================================================================
// Models
// ============================================================================

using nlohmann::json;

inline json task_to_json(const TaskParams& p) {
  return json{{"task", to_string(p.kind)},
              {"vocab_size", p.vocab_size},
              {"flip_prob", p.flip_prob},
              {"p_stop", p.length.p_stop},
              {"min_len", p.length.min_len},
              {"max_len", p.length.max_len}};
}

inline TaskParams task_from_json(const json& j) {
  TaskParams p;
  auto kind = parse_task_kind(j.at("task").get<std::string>());
  if (!kind) throw LoadError("unknown task kind in model file");
  p.kind = *kind;
  p.vocab_size = j.at("vocab_size").get<std::size_t>();
  p.flip_prob = j.at("flip_prob").get<double>();
  p.length.p_stop = j.at("p_stop").get<double>();
  p.length.min_len = j.at("min_len").get<int>();
  p.length.max_len = j.at("max_len").get<int>();
  return p;
}

inline json model_to_json(const SequenceModel& model) {
  json j;
  j["kind"] = model.kind();
  if (const auto* m = dynamic_cast<const OracleModel*>(&model)) {
    j["task"] = task_to_json(m->task().params());
  } else if (const auto* m = dynamic_cast<const SmoothedModel*>(&model)) {
    j["alpha"] = m->config().alpha;
    j["inner"] = model_to_json(*m->inner());
  } else if (const auto* m = dynamic_cast<const PerturbedModel*>(&model)) {
    j["noise_scale"] = m->noise_scale();
    j["seed"] = m->seed();
    j["inner"] = model_to_json(*m->inner());
  } else if (const auto* m = dynamic_cast<const EmpiricalModel*>(&model)) {
    j["vocab_size"] = m->vocab().size();
    j["order"] = m->order();
    j["reverse_alignment"] = m->reverse_alignment();
    json contexts = json::array();
    for (const auto& [key, counts] : m->contexts()) {
      contexts.push_back({{"source", key.source_key}, {"history", key.history}, {"counts", counts}});
    }
    json by_source = json::array();
    for (const auto& [key, counts] : m->by_source()) by_source.push_back({{"source", key}, {"counts", counts}});
    j["contexts"] = std::move(contexts);
    j["by_source"] = std::move(by_source);
    j["global"] = m->global();
  } else if (const auto* m = dynamic_cast<const LogLinearModel*>(&model)) {
    j["vocab_size"] = m->vocab().size();
    j["order"] = m->layout().order;
    j["reverse_alignment"] = m->layout().reverse;
    j["train_alpha"] = m->train_alpha();
    j["weights"] = m->weights();
  } else {
    throw Error("model kind '" + model.kind() + "' is not serializable");
  }
  return j;
}

inline ModelPtr model_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "oracle") return std::make_shared<OracleModel>(SyntheticTask(task_from_json(j.at("task"))));
  if (kind == "smoothed") {
    ModelPtr inner = model_from_json(j.at("inner"));
    return std::make_shared<SmoothedModel>(inner, SmoothingConfig(j.at("alpha").get<double>(), inner->vocab().size()));
  }
  if (kind == "perturbed") {
    return std::make_shared<PerturbedModel>(model_from_json(j.at("inner")), j.at("noise_scale").get<double>(),
                                            j.at("seed").get<std::uint64_t>());
  }
  if (kind == "empirical") {
    auto m = std::make_shared<EmpiricalModel>(Vocabulary::synthetic(j.at("vocab_size").get<std::size_t>()),
                                              j.at("order").get<int>(), j.at("reverse_alignment").get<bool>());
    std::map<EmpiricalModel::ContextKey, EmpiricalModel::Counts> contexts;
    for (const auto& c : j.at("contexts")) {
      contexts[{c.at("source").get<TokenId>(), c.at("history").get<TokenSeq>()}] =
          c.at("counts").get<EmpiricalModel::Counts>();
    }
    std::map<TokenId, EmpiricalModel::Counts> by_source;
    for (const auto& c : j.at("by_source")) {
      by_source[c.at("source").get<TokenId>()] = c.at("counts").get<EmpiricalModel::Counts>();
    }
    m->set_tables(std::move(contexts), std::move(by_source), j.at("global").get<EmpiricalModel::Counts>());
    return m;
  }
  if (kind == "loglinear") {
    auto m = std::make_shared<LogLinearModel>(Vocabulary::synthetic(j.at("vocab_size").get<std::size_t>()),
                                              j.at("order").get<int>(), j.at("reverse_alignment").get<bool>(),
                                              j.at("train_alpha").get<double>());
    auto weights = j.at("weights").get<std::vector<double>>();
    if (weights.size() != m->weights().size()) throw LoadError("loglinear weight count mismatch");
    m->weights() = std::move(weights);
    return m;
  }
  throw LoadError("unknown model kind '" + kind + "'");
}

inline void save_model(const SequenceModel& model, std::ostream& os) {
  json doc = model_to_json(model);
  doc["format_version"] = kModelFormatVersion;
  os << doc.dump() << '\n';
}

inline void save_model(const SequenceModel& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  save_model(model, os);
  if (!os) throw Error("write to '" + path + "' failed");
}

inline ModelPtr load_model(std::istream& is) {
  json doc;
  try {
    doc = json::parse(is);
  } catch (const json::exception& e) {
    throw LoadError(std::string("model file is not valid JSON (truncated?): ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("format_version")) throw LoadError("model file has no format_version");
  if (doc["format_version"] != kModelFormatVersion) {
    throw LoadError("unsupported model format_version " + doc["format_version"].dump());
  }
  try {
    return model_from_json(doc);
  } catch (const json::exception& e) {
    throw LoadError(std::string("malformed model file: ") + e.what());
  } catch (const LoadError&) {
    throw;
  } catch (const Error& e) {
    throw LoadError(std::string("invalid model parameters: ") + e.what());
  }
}

inline ModelPtr load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open model '" + path + "'");
  return load_model(is);
}

}  // namespace lsdebias
