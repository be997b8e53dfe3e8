// Copyright 2026 The StrSum Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#ifndef STRSUM_PIPELINE_HPP
#define STRSUM_PIPELINE_HPP

#include "strsum/checkpoint.hpp"
#include "strsum/config.hpp"
#include "strsum/corpus/document.hpp"
#include "strsum/corpus/shard.hpp"
#include "strsum/discourse.hpp"
#include "strsum/encoder.hpp"
#include "strsum/errors.hpp"
#include "strsum/evalkit.hpp"
#include "strsum/model.hpp"
#include "strsum/threads.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace strsum::pipeline {

namespace fs = std::filesystem;

/// 0 ok, 2 bad input or configuration, 3 numeric failure, 1 anything else.
inline int exit_code(const std::exception& e) {
  if (dynamic_cast<const numkit::NumericError*>(&e)) return 3;
  if (dynamic_cast<const InputError*>(&e) || dynamic_cast<const std::invalid_argument*>(&e)) return 2;
  return 1;
}

// ---------------------------------------------------------------------------
// Artifact layout under out_dir.

struct Layout {
  fs::path dir;
  fs::path vocab() const { return dir / "vocab.txt"; }
  fs::path shard(const std::string& split) const { return dir / (split + ".shard"); }
  fs::path counts() const { return dir / "counts.json"; }
  fs::path config() const { return dir / "config.json"; }
  fs::path metrics() const { return dir / "metrics.jsonl"; }
  fs::path latest() const { return dir / "checkpoint_latest.bin"; }
  fs::path best() const { return dir / "checkpoint_best.bin"; }
};

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text)) throw InputError("cannot write " + path.string());
}

// ---------------------------------------------------------------------------
// prepare

struct SplitCounts {
  std::string split;
  std::size_t records = 0;
  std::size_t documents = 0;
  double mean_sentences = 0.0;
  double mean_tokens = 0.0;  // per sentence, sentinels excluded
};

inline SplitCounts count_split(const std::string& split, std::size_t records, const std::vector<corpus::Document>& docs) {
  SplitCounts c{split, records, docs.size()};
  std::size_t sentences = 0, tokens = 0;
  for (const auto& d : docs) {
    sentences += d.n();
    for (const auto& s : d.sentences) tokens += s.size() - 2;
  }
  if (!docs.empty()) c.mean_sentences = static_cast<double>(sentences) / static_cast<double>(docs.size());
  if (sentences) c.mean_tokens = static_cast<double>(tokens) / static_cast<double>(sentences);
  return c;
}

inline void print_counts(std::ostream& out, const std::vector<SplitCounts>& counts, std::size_t vocab) {
  out << std::left << std::setw(8) << "split" << std::right << std::setw(10) << "reviews" << std::setw(10) << "kept"
      << std::setw(12) << "sent/doc" << std::setw(12) << "tok/sent" << "\n";
  for (const auto& c : counts) {
    out << std::left << std::setw(8) << c.split << std::right << std::setw(10) << c.records << std::setw(10)
        << c.documents << std::setw(12) << std::fixed << std::setprecision(2) << c.mean_sentences << std::setw(12)
        << c.mean_tokens << "\n";
  }
  out << "vocabulary: " << vocab << " entries (including 4 specials)\n";
  out.unsetf(std::ios::floatfield);
}

/// Builds the vocabulary from filtered training reviews and writes vocab.txt,
/// one shard per split, counts.json and config.json into out_dir.
inline std::vector<SplitCounts> cmd_prepare(const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  if (cfg.data.train.empty()) throw InputError("prepare: no training file (data.train)");
  const Layout layout{cfg.data.out_dir};
  fs::create_directories(layout.dir);

  const auto train_raw = corpus::read_jsonl_file(cfg.data.train, cfg.fields);
  const auto train = corpus::filter_corpus(train_raw, cfg.min_sentences.train);
  if (train.empty())
    throw InputError("prepare: no training review has at least " + std::to_string(cfg.min_sentences.train) +
                     " sentences");
  const corpus::Vocab vocab = corpus::build_vocab(train, cfg.vocab_cap);
  vocab.save(layout.vocab().string());

  std::vector<SplitCounts> counts;
  auto emit = [&](const std::string& split, const std::vector<corpus::ReviewRecord>& raw, std::size_t min) {
    std::vector<corpus::Document> docs;
    for (const auto& r : corpus::filter_corpus(raw, min)) docs.push_back(corpus::make_document(r, vocab, cfg.caps));
    corpus::save_shard(layout.shard(split).string(), docs);
    counts.push_back(count_split(split, raw.size(), docs));
  };
  emit("train", train_raw, cfg.min_sentences.train);
  if (!cfg.data.valid.empty()) emit("valid", corpus::read_jsonl_file(cfg.data.valid, cfg.fields), cfg.min_sentences.eval);
  if (!cfg.data.eval.empty()) emit("eval", corpus::read_jsonl_file(cfg.data.eval, cfg.fields), cfg.min_sentences.eval);

  nlohmann::json j = nlohmann::json::object();
  for (const auto& c : counts)
    j[c.split] = {{"reviews", c.records},
                  {"documents", c.documents},
                  {"mean_sentences", c.mean_sentences},
                  {"mean_tokens", c.mean_tokens}};
  j["vocab_size"] = vocab.size();
  write_text(layout.counts(), j.dump(2) + "\n");
  write_text(layout.config(), to_json(cfg).dump(2) + "\n");
  print_counts(out, counts, vocab.size());
  return counts;
}

// ---------------------------------------------------------------------------
// Shared inference helpers.

/// Reviews from JSON Lines, or documents from a prepared shard (sniffed by magic).
inline std::vector<corpus::Document> load_documents(const std::string& path, const RunConfig& cfg,
                                                    const corpus::Vocab& vocab) {
  {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw InputError("cannot open " + path);
    char magic[sizeof(corpus::kShardMagic)] = {};
    probe.read(magic, sizeof(magic));
    if (probe.gcount() == sizeof(magic) && std::memcmp(magic, corpus::kShardMagic, sizeof(magic)) == 0)
      return corpus::load_shard(path);
  }
  std::vector<corpus::Document> docs;
  for (const auto& r : corpus::read_jsonl_file(path, cfg.fields)) {
    try {
      docs.push_back(corpus::make_document(r, vocab, cfg.caps));
    } catch (const EmptyDocument&) {
      throw InputError(path + ": review '" + r.id + "' has no text");
    }
  }
  return docs;
}

struct LoadedModel {
  Checkpoint checkpoint;
  corpus::Vocab vocab;
  const RunConfig& config() const { return checkpoint.meta.config; }
  const Model& model() const { return checkpoint.model; }
};

/// Loads a checkpoint and the vocabulary it was trained with (by default
/// vocab.txt next to the checkpoint) and checks they agree.
inline LoadedModel load_model(const std::string& checkpoint, const std::string& vocab_path = "") {
  LoadedModel m{load_checkpoint(checkpoint), {}};
  const fs::path vp = vocab_path.empty() ? fs::path(checkpoint).parent_path() / "vocab.txt" : fs::path(vocab_path);
  m.vocab = corpus::Vocab::load(vp.string());
  if (m.vocab.hash() != m.checkpoint.meta.vocab_hash || m.vocab.size() != m.checkpoint.model.dims.vocab)
    throw VocabMismatch("vocabulary " + vp.string() + " does not match checkpoint " + checkpoint);
  return m;
}

/// Runs fn(i) for every document in parallel, keeping results in input order.
template <typename T, typename Fn>
std::vector<T> map_documents(const std::vector<corpus::Document>& docs, Fn&& fn, std::size_t workers = worker_count()) {
  std::vector<T> out(docs.size());
  parallel_for(docs.size(), workers, [&](std::size_t i) { out[i] = fn(docs[i]); });
  return out;
}

struct InferenceOptions {
  std::optional<bool> use_discourse_rank;  // default from the run config
  std::optional<std::size_t> beam;
  std::optional<std::size_t> max_len;
};

inline GenerationOptions generation_options(const RunConfig& cfg, const InferenceOptions& o) {
  GenerationOptions g;
  g.beam = o.beam.value_or(cfg.training.beam_size);
  g.max_len = o.max_len.value_or(cfg.max_summary_len);
  g.damping = cfg.training.damping;
  g.use_discourse_rank = o.use_discourse_rank.value_or(cfg.use_discourse_rank);
  g.objective = cfg.tree_objective;
  if (g.beam < 1 || g.max_len < 1) throw std::invalid_argument("beam and max length must be >= 1");
  return g;
}

/// ROUGE tokens for a text: the review tokenizer, lowercased.
inline std::vector<std::string> rouge_tokens(const std::string& text) { return corpus::tokenize(text); }

inline std::string reference_of(const corpus::Document& d, const corpus::Vocab& vocab) {
  if (d.reference_text) return *d.reference_text;
  return d.reference ? detokenize(*d.reference, vocab) : std::string();
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
  bool resume = false;
  std::optional<std::size_t> stop_after;  // epochs to run in this invocation
  std::ostream* log = nullptr;            // progress lines (human readable)
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  std::optional<double> valid_loss;
  std::optional<evalkit::RougeScores> valid_rouge;
  double selection_metric = 0.0;  // higher is better
};

inline nlohmann::json to_json(const EpochMetrics& m) {
  nlohmann::json j{{"epoch", m.epoch}, {"train_loss", m.train_loss}};
  if (m.valid_loss) j["valid_loss"] = *m.valid_loss;
  if (m.valid_rouge) {
    j["valid_r1"] = m.valid_rouge->r1;
    j["valid_r2"] = m.valid_rouge->r2;
    j["valid_rl"] = m.valid_rouge->rl;
  }
  j["selection_metric"] = m.selection_metric;
  return j;
}

/// Mean ROUGE of generated summaries against references, over documents that have one.
inline std::optional<evalkit::RougeScores> corpus_rouge(const Model& model, const corpus::Vocab& vocab,
                                                        const std::vector<corpus::Document>& docs,
                                                        const GenerationOptions& opt) {
  std::vector<corpus::Document> refs;
  for (const auto& d : docs)
    if (!rouge_tokens(reference_of(d, vocab)).empty()) refs.push_back(d);
  if (refs.empty()) return std::nullopt;
  const auto scores = map_documents<evalkit::RougeScores>(refs, [&](const corpus::Document& d) {
    const Generated g = generate_summary(model, d, opt);
    return evalkit::rouge_scores(rouge_tokens(detokenize(g.tokens, vocab)), rouge_tokens(reference_of(d, vocab)));
  });
  evalkit::RougeReport report;
  for (std::size_t i = 0; i < refs.size(); ++i) report.add(refs[i].id, scores[i]);
  return report.mean;
}

inline std::vector<const corpus::Document*> pointers(const std::vector<corpus::Document>& docs) {
  std::vector<const corpus::Document*> out;
  for (const auto& d : docs) out.push_back(&d);
  return out;
}

/// Epoch-level training loop over prepared artifacts. Each epoch shuffles
/// with a generator derived from (seed, epoch), so a resumed run follows the
/// same trajectory as an uninterrupted one.
inline std::vector<EpochMetrics> cmd_train(RunConfig cfg, const TrainOptions& opts) {
  const Layout layout{cfg.data.out_dir};
  const std::size_t max_epochs = cfg.training.max_epochs;
  const corpus::Vocab vocab = corpus::Vocab::load(layout.vocab().string());
  const auto train = corpus::load_shard(layout.shard("train").string());
  if (train.empty()) throw InputError("train: training shard is empty");
  std::vector<corpus::Document> valid;
  if (fs::exists(layout.shard("valid"))) valid = corpus::load_shard(layout.shard("valid").string());

  Model model;
  Optimizer opt;
  CheckpointMeta meta;
  if (opts.resume && fs::exists(layout.latest())) {
    Checkpoint ck = load_checkpoint(layout.latest().string());
    if (ck.meta.vocab_hash != vocab.hash()) throw VocabMismatch("train: checkpoint was trained with another vocabulary");
    if (ck.accumulators.empty()) throw InputError("train: checkpoint has no optimizer state to resume from");
    // The stored configuration governs the trajectory; only the epoch budget may change.
    cfg = ck.meta.config;
    cfg.training.max_epochs = max_epochs;
    model = std::move(ck.model);
    opt = Optimizer(model, {cfg.training.learning_rate, cfg.training.initial_accumulator});
    opt.accumulators() = std::move(ck.accumulators);
    meta = ck.meta;
  } else {
    cfg.validate();
    ModelDims dims = cfg.model;
    dims.vocab = vocab.size();
    model = Model::create(dims, cfg.training.seed, cfg.precision);
    if (!cfg.pretrained_vectors.empty()) {
      const std::size_t loaded = encoder::load_pretrained_vectors(cfg.pretrained_vectors, vocab,
                                                                  model.params.value(model.encoder.embedding));
      model.round_to_storage();
      if (opts.log) *opts.log << "loaded " << loaded << " pretrained vectors\n";
    }
    opt = Optimizer(model, {cfg.training.learning_rate, cfg.training.initial_accumulator});
    meta.vocab_hash = vocab.hash();
  }
  meta.config = cfg;
  cfg.validate();

  // Keep log lines of completed epochs only.
  std::vector<std::string> log_lines;
  if (meta.epoch > 0 && fs::exists(layout.metrics())) {
    std::ifstream in(layout.metrics());
    for (std::string line; std::getline(in, line) && log_lines.size() < meta.epoch;)
      if (!line.empty()) log_lines.push_back(line);
  }
  {
    std::ofstream log(layout.metrics(), std::ios::trunc);
    for (const auto& l : log_lines) log << l << "\n";
  }

  GenerationOptions gen = generation_options(cfg, {});
  std::vector<corpus::Document> valid_subset(
      valid.begin(), valid.begin() + static_cast<std::ptrdiff_t>(std::min(valid.size(), cfg.validate_max_docs)));

  std::vector<EpochMetrics> history;
  std::size_t ran = 0;
  for (std::size_t epoch = meta.epoch + 1; epoch <= max_epochs; ++epoch) {
    if (opts.stop_after && ran >= *opts.stop_after) break;
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    numkit::Rng::derived(cfg.training.seed, epoch).shuffle(order);
    double nll = 0.0;
    std::size_t tokens = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.training.batch_size) {
      std::vector<const corpus::Document*> batch;
      for (std::size_t k = start; k < std::min(order.size(), start + cfg.training.batch_size); ++k)
        batch.push_back(&train[order[k]]);
      const StepResult r = training_step(model, opt, batch, cfg.training);
      nll += r.loss * static_cast<double>(r.tokens);
      tokens += r.tokens;
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = nll / static_cast<double>(tokens);
    m.selection_metric = -m.train_loss;
    if (!valid_subset.empty()) {
      m.valid_loss = corpus_loss(model, pointers(valid_subset));
      m.selection_metric = -*m.valid_loss;
      m.valid_rouge = corpus_rouge(model, vocab, valid_subset, gen);
      if (m.valid_rouge) m.selection_metric = m.valid_rouge->rl;
    }
    {
      std::ofstream log(layout.metrics(), std::ios::app);
      log << to_json(m).dump() << "\n";
    }
    meta.epoch = epoch;
    const bool improved = !meta.best_metric || m.selection_metric > *meta.best_metric;
    if (improved) {
      meta.best_metric = m.selection_metric;
      meta.best_epoch = epoch;
    }
    save_checkpoint(layout.latest().string(), model, &opt.accumulators(), meta);
    if (improved) save_checkpoint(layout.best().string(), model, &opt.accumulators(), meta);
    if (opts.log) {
      *opts.log << "epoch " << epoch << " train_loss " << m.train_loss;
      if (m.valid_loss) *opts.log << " valid_loss " << *m.valid_loss;
      if (m.valid_rouge) *opts.log << " valid_rl " << m.valid_rouge->rl;
      *opts.log << (improved ? " (best)" : "") << "\n";
    }
    history.push_back(m);
    ++ran;
  }
  return history;
}

// ---------------------------------------------------------------------------
// generate

struct SummaryRecord {
  std::string id;
  std::string summary;
  bool eos = false;
  double log_prob = 0.0;
  discourse::DiscourseTree tree;
  discourse::RankVector rank;
};

inline nlohmann::json to_json(const SummaryRecord& r) {
  return {{"id", r.id}, {"summary", r.summary}, {"parents", r.tree.parent}, {"ranks", r.rank.r}, {"eos", r.eos}};
}

inline std::vector<SummaryRecord> summarize(const LoadedModel& lm, const std::vector<corpus::Document>& docs,
                                            const InferenceOptions& o) {
  const GenerationOptions opt = generation_options(lm.config(), o);
  return map_documents<SummaryRecord>(docs, [&](const corpus::Document& d) {
    const Generated g = generate_summary(lm.model(), d, opt);
    return SummaryRecord{d.id, detokenize(g.tokens, lm.vocab), g.ended_with_eos, g.log_prob, g.analysis.tree,
                         g.analysis.rank};
  });
}

/// One JSON line per review: {id, summary, parents, ranks, eos}.
inline std::vector<SummaryRecord> cmd_generate(const std::string& checkpoint, const std::string& input,
                                               std::ostream& out, const InferenceOptions& o = {},
                                               const std::string& vocab = "") {
  const LoadedModel lm = load_model(checkpoint, vocab);
  const auto records = summarize(lm, load_documents(input, lm.config(), lm.vocab), o);
  for (const auto& r : records) out << to_json(r).dump() << "\n";
  return records;
}

// ---------------------------------------------------------------------------
// parse

enum class TreeFormat { kJson, kDot };

inline std::vector<discourse::DiscourseTree> cmd_parse(const std::string& checkpoint, const std::string& input,
                                                       std::ostream& out, TreeFormat format,
                                                       const std::string& vocab = "") {
  const LoadedModel lm = load_model(checkpoint, vocab);
  const auto docs = load_documents(input, lm.config(), lm.vocab);
  const auto& cfg = lm.config();
  const auto analyses = map_documents<Analysis>(docs, [&](const corpus::Document& d) {
    return analyze(lm.model(), d, cfg.training.damping, cfg.tree_objective);
  });
  std::vector<discourse::DiscourseTree> trees;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const auto& a = analyses[i];
    if (format == TreeFormat::kJson) {
      out << discourse::tree_json(docs[i].id, a.tree, a.rank).dump() << "\n";
    } else {
      std::vector<std::string> labels;
      for (const auto& s : docs[i].sentences) labels.push_back(detokenize(encoder::inner_tokens(s), lm.vocab));
      out << discourse::tree_dot(docs[i].id, a.tree, labels);
    }
    trees.push_back(a.tree);
  }
  return trees;
}

// ---------------------------------------------------------------------------
// stats

inline void print_stats(std::ostream& out, const discourse::TreeStats& s) {
  out << std::left << std::setw(12) << "documents" << std::setw(14) << "projective_%" << "mean_height\n"
      << std::setw(12) << s.trees << std::setw(14) << std::fixed << std::setprecision(2)
      << 100.0 * s.projective_fraction << std::setprecision(3) << s.mean_height << "\n";
  out.unsetf(std::ios::floatfield);
}

/// Projective fraction and mean height of the induced trees.
inline discourse::TreeStats cmd_stats(const std::string& checkpoint, const std::string& input, std::ostream& out,
                                      const std::string& json_path = "", const std::string& vocab = "") {
  std::ostringstream sink;
  const auto trees = cmd_parse(checkpoint, input, sink, TreeFormat::kJson, vocab);
  if (trees.empty()) throw InputError("stats: no documents in " + input);
  const auto s = discourse::tree_stats(trees);
  print_stats(out, s);
  if (!json_path.empty())
    write_text(json_path, nlohmann::json{{"documents", s.trees},
                                         {"projective_fraction", s.projective_fraction},
                                         {"mean_height", s.mean_height}}
                                  .dump(2) + "\n");
  return s;
}

// ---------------------------------------------------------------------------
// evaluate

inline std::string csv_field(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string format_score(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

struct EvaluateOptions {
  InferenceOptions inference;
  bool oracle = false;  // hypothesis := reference
  std::string csv_path;
  std::string vocab;
};

/// ROUGE-1/2/L F1 of generated summaries against the reference summaries.
/// Reviews without a reference are skipped.
inline evalkit::RougeReport cmd_evaluate(const std::string& checkpoint, const std::string& input, std::ostream& out,
                                         const EvaluateOptions& o = {}) {
  const LoadedModel lm = load_model(checkpoint, o.vocab);
  std::vector<corpus::Document> docs;
  std::size_t skipped = 0;
  for (auto& d : load_documents(input, lm.config(), lm.vocab)) {
    if (rouge_tokens(reference_of(d, lm.vocab)).empty()) ++skipped;
    else docs.push_back(std::move(d));
  }
  if (docs.empty()) throw InputError("evaluate: no review in " + input + " has a reference summary");
  std::vector<std::string> hyps(docs.size());
  if (o.oracle) {
    for (std::size_t i = 0; i < docs.size(); ++i) hyps[i] = reference_of(docs[i], lm.vocab);
  } else {
    const auto records = summarize(lm, docs, o.inference);
    for (std::size_t i = 0; i < docs.size(); ++i) hyps[i] = records[i].summary;
  }
  evalkit::RougeReport report;
  std::ostringstream csv;
  csv << "id,r1,r2,rl,hypothesis,reference\n";
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const std::string ref = reference_of(docs[i], lm.vocab);
    const auto s = evalkit::rouge_scores(rouge_tokens(hyps[i]), rouge_tokens(ref));
    report.add(docs[i].id, s);
    csv << csv_field(docs[i].id) << ',' << format_score(s.r1) << ',' << format_score(s.r2) << ','
        << format_score(s.rl) << ',' << csv_field(hyps[i]) << ',' << csv_field(ref) << "\n";
  }
  if (!o.csv_path.empty()) write_text(o.csv_path, csv.str());
  out << std::left << std::setw(12) << "documents" << std::setw(10) << "R-1" << std::setw(10) << "R-2" << "R-L\n"
      << std::setw(12) << docs.size() << std::setw(10) << format_score(report.mean.r1).substr(0, 6) << std::setw(10)
      << format_score(report.mean.r2).substr(0, 6) << format_score(report.mean.rl).substr(0, 6) << "\n";
  if (skipped) out << "skipped " << skipped << " reviews without a reference summary\n";
  return report;
}

}  // namespace strsum::pipeline

#endif  // STRSUM_PIPELINE_HPP
