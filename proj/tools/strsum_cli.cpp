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


// strsum: prepare | train | generate | parse | stats | evaluate
// Exit codes: 0 ok, 2 input error, 3 numeric failure. STRSUM_THREADS caps workers.

#include "strsum/pipeline.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

namespace {

using strsum::RunConfig;
namespace pipeline = strsum::pipeline;

/// Flags that override configuration file values. Unset flags leave the file alone.
struct Overrides {
  std::string config, out_dir, train, valid, eval;
  std::string text_field, summary_field, id_field;
  std::optional<std::size_t> vocab_cap, min_train, min_eval, epochs, batch_size, seed;
  std::optional<std::size_t> embed, enc_hidden, d_e, d_f, dec_hidden;
  std::optional<double> learning_rate;
  std::string precision, pretrained;

  void add_data(CLI::App* app) {
    app->add_option("--train", train, "training reviews (JSON Lines)");
    app->add_option("--valid", valid, "validation reviews (JSON Lines)");
    app->add_option("--eval", eval, "evaluation reviews (JSON Lines)");
    app->add_option("--text-field", text_field, "JSON field holding the review text");
    app->add_option("--summary-field", summary_field, "JSON field holding the reference summary");
    app->add_option("--id-field", id_field, "JSON field holding the review id");
    app->add_option("--vocab-cap", vocab_cap, "vocabulary size cap");
    app->add_option("--min-train-sentences", min_train, "minimum sentences per training review");
    app->add_option("--min-eval-sentences", min_eval, "minimum sentences per validation/evaluation review");
  }

  void add_training(CLI::App* app) {
    app->add_option("--epochs", epochs, "maximum number of epochs");
    app->add_option("--batch-size", batch_size, "documents per update");
    app->add_option("--seed", seed, "random seed");
    app->add_option("--lr", learning_rate, "Adagrad learning rate");
    app->add_option("--embed", embed, "word embedding size");
    app->add_option("--enc-hidden", enc_hidden, "encoder GRU size per direction");
    app->add_option("--d-e", d_e, "semantic part of the sentence embedding");
    app->add_option("--d-f", d_f, "structure part of the sentence embedding");
    app->add_option("--dec-hidden", dec_hidden, "decoder GRU size");
    app->add_option("--precision", precision, "parameter storage: f32 or f64")->check(CLI::IsMember({"f32", "f64"}));
    app->add_option("--pretrained", pretrained, "word vectors in fastText/GloVe text format");
  }

  RunConfig resolve(const std::string& fallback_config = "") const {
    RunConfig c;
    if (!config.empty()) c = strsum::load_config(config);
    else if (!fallback_config.empty() && std::filesystem::exists(fallback_config)) c = strsum::load_config(fallback_config);
    if (!out_dir.empty()) c.data.out_dir = out_dir;
    if (!train.empty()) c.data.train = train;
    if (!valid.empty()) c.data.valid = valid;
    if (!eval.empty()) c.data.eval = eval;
    if (!text_field.empty()) c.fields.text = text_field;
    if (!summary_field.empty()) c.fields.summary = summary_field;
    if (!id_field.empty()) c.fields.id = id_field;
    if (vocab_cap) c.vocab_cap = *vocab_cap;
    if (min_train) c.min_sentences.train = *min_train;
    if (min_eval) c.min_sentences.eval = *min_eval;
    if (epochs) c.training.max_epochs = *epochs;
    if (batch_size) c.training.batch_size = *batch_size;
    if (seed) c.training.seed = *seed;
    if (learning_rate) c.training.learning_rate = *learning_rate;
    if (embed) c.model.embed = *embed;
    if (enc_hidden) c.model.enc_hidden = *enc_hidden;
    if (d_e) c.model.d_e = *d_e;
    if (d_f) c.model.d_f = *d_f;
    if (dec_hidden) c.model.dec_hidden = *dec_hidden;
    if (!precision.empty()) c.precision = precision == "f64" ? strsum::Precision::kFloat64 : strsum::Precision::kFloat32;
    if (!pretrained.empty()) c.pretrained_vectors = pretrained;
    c.validate();
    return c;
  }
};

struct InferenceFlags {
  std::string checkpoint, input, output = "-", vocab;
  bool no_discourse_rank = false;
  std::optional<std::size_t> beam, max_len;

  void add(CLI::App* app, bool decoding) {
    app->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
    app->add_option("--input", input, "reviews (JSON Lines) or a prepared shard")->required();
    app->add_option("--vocab", vocab, "vocabulary file (default: next to the checkpoint)");
    if (decoding) {
      app->add_flag("--no-discourse-rank", no_discourse_rank, "use the plain root row for the summary embedding");
      app->add_option("--beam", beam, "beam width");
      app->add_option("--max-len", max_len, "maximum summary length in tokens");
    }
  }

  pipeline::InferenceOptions options() const {
    pipeline::InferenceOptions o;
    if (no_discourse_rank) o.use_discourse_rank = false;
    o.beam = beam;
    o.max_len = max_len;
    return o;
  }
};

/// stdout for "-", otherwise a file.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path != "-") {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
      if (!*file_) throw strsum::InputError("cannot write " + path);
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised review summarization with latent discourse trees"};
  app.require_subcommand(1);

  Overrides prep;
  auto* prepare = app.add_subcommand("prepare", "build the vocabulary and document shards");
  prepare->add_option("--config", prep.config, "run configuration (JSON)");
  prepare->add_option("--out", prep.out_dir, "artifact directory");
  prep.add_data(prepare);

  Overrides tr;
  bool resume = false;
  std::optional<std::size_t> stop_after;
  auto* train = app.add_subcommand("train", "train on prepared shards");
  train->add_option("--config", tr.config, "run configuration (default: <out>/config.json)");
  train->add_option("--out", tr.out_dir, "artifact directory");
  tr.add_training(train);
  train->add_flag("--resume", resume, "continue from <out>/checkpoint_latest.bin");
  train->add_option("--stop-after", stop_after, "stop after this many epochs in this invocation");

  InferenceFlags gen;
  auto* generate = app.add_subcommand("generate", "write one summary per review as JSON Lines");
  gen.add(generate, true);
  generate->add_option("--output", gen.output, "output file, - for stdout");

  InferenceFlags prs;
  std::string format = "json";
  auto* parse = app.add_subcommand("parse", "emit induced discourse trees");
  prs.add(parse, false);
  parse->add_option("--format", format, "json or dot")->check(CLI::IsMember({"json", "dot"}));
  parse->add_option("--output", prs.output, "output file, - for stdout");

  InferenceFlags st;
  std::string stats_json;
  auto* stats = app.add_subcommand("stats", "projectivity and height of induced trees");
  st.add(stats, false);
  stats->add_option("--json", stats_json, "also write the statistics as JSON");

  InferenceFlags ev;
  bool oracle = false;
  std::string csv;
  auto* evaluate = app.add_subcommand("evaluate", "ROUGE-1/2/L F1 against reference summaries");
  ev.add(evaluate, true);
  evaluate->add_flag("--oracle", oracle, "score the references against themselves");
  evaluate->add_option("--csv", csv, "per-document report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*prepare) {
      pipeline::cmd_prepare(prep.resolve(), std::cout);
    } else if (*train) {
      const std::string dir = tr.out_dir.empty() ? RunConfig{}.data.out_dir : tr.out_dir;
      RunConfig cfg = tr.resolve((std::filesystem::path(dir) / "config.json").string());
      pipeline::TrainOptions o;
      o.resume = resume;
      o.stop_after = stop_after;
      o.log = &std::cerr;
      pipeline::cmd_train(cfg, o);
    } else if (*generate) {
      Output out(gen.output);
      pipeline::cmd_generate(gen.checkpoint, gen.input, out.stream(), gen.options(), gen.vocab);
    } else if (*parse) {
      Output out(prs.output);
      pipeline::cmd_parse(prs.checkpoint, prs.input, out.stream(),
                          format == "dot" ? pipeline::TreeFormat::kDot : pipeline::TreeFormat::kJson, prs.vocab);
    } else if (*stats) {
      pipeline::cmd_stats(st.checkpoint, st.input, std::cout, stats_json, st.vocab);
    } else if (*evaluate) {
      pipeline::EvaluateOptions o;
      o.inference = ev.options();
      o.oracle = oracle;
      o.csv_path = csv;
      o.vocab = ev.vocab;
      pipeline::cmd_evaluate(ev.checkpoint, ev.input, std::cout, o);
    }
  } catch (const std::exception& e) {
    std::cerr << "strsum: " << e.what() << "\n";
    return pipeline::exit_code(e);
  }
  return 0;
}
