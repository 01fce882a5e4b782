/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "tabframe/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"
#include "tabframe/cache.hpp"
#include "tabframe/checkpoint.hpp"
#include "tabframe/error.hpp"
#include "tabframe/materialize.hpp"
#include "tabframe/table.hpp"
#include "tabframe/training.hpp"

namespace tabframe {

using nlohmann::json;

namespace {

constexpr const char* kApiKeyEnv = "TABFRAME_EMBED_API_KEY";

/// Forwards to another embedder and counts embed() calls.
class CountingEmbedder : public TextEmbedder {
 public:
  CountingEmbedder(std::shared_ptr<TextEmbedder> inner, Index& calls)
      : inner_(std::move(inner)), calls_(calls) {}
  Index dim() const override { return inner_->dim(); }
  std::string identifier() const override { return inner_->identifier(); }
  RowMajorMatrixXd embed(TextList texts) override {
    ++calls_;
    return inner_->embed(texts);
  }

 private:
  std::shared_ptr<TextEmbedder> inner_;
  Index& calls_;
};

json read_json_file(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

char parse_separator(const std::string& s) {
  if (s.size() != 1) throw ConfigError("--list-separator must be a single character");
  return s[0];
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::filesystem::path history_path(const std::string& checkpoint) {
  std::filesystem::path p(checkpoint);
  p.replace_extension(".history.csv");
  return p;
}

struct InferArgs {
  std::string csv, out, target, task;
  std::string separator = "|";
};

int cmd_infer_schema(const InferArgs& a, std::ostream& out) {
  const RawTable table = parse_csv(read_file(a.csv));
  if (table.columns().empty()) throw SchemaError("CSV has no columns");
  const char sep = parse_separator(a.separator);
  const std::string target = a.target.empty() ? table.columns().back().name : a.target;
  const RawColumn* target_col = table.find(target);
  if (!target_col) throw SchemaError("target column '" + target + "' is not in the CSV");

  std::vector<ColumnSpec> columns;
  for (const auto& c : table.columns()) {
    SemanticType s = infer_stype(c.cells, sep);
    if (c.name == target && s != SemanticType::numerical) s = SemanticType::categorical;
    columns.push_back({c.name, s});
  }
  TaskType task;
  if (!a.task.empty()) {
    task = parse_task_type(a.task);
  } else {
    std::set<std::string> distinct;
    for (const auto& cell : target_col->cells) {
      if (const auto* s = std::get_if<std::string>(&cell)) distinct.insert(*s);
    }
    task = distinct.size() <= 2 ? TaskType::binary_classification : TaskType::regression;
  }
  const Schema schema(std::move(columns), target, task);
  write_file(a.out, schema.to_json() + "\n");
  for (const auto& c : schema.columns()) {
    out << c.name << ": " << to_string(c.stype) << (c.name == target ? " (target)" : "")
        << "\n";
  }
  out << "task: " << to_string(task) << "\n";
  return kExitOk;
}

struct MaterializeArgs {
  std::string csv, schema, cache, embed_config, embed_kind = "hash_stub", embed_endpoint;
  Index embed_dim = 16;
  Index vocab_size = kDefaultVocabSize;
  std::string separator = "|";
  bool kind_set = false, dim_set = false, endpoint_set = false;
};

int cmd_materialize(const MaterializeArgs& a, std::ostream& out, const CliHooks& hooks) {
  const std::string csv_bytes = read_file(a.csv);
  const std::string schema_bytes = read_file(a.schema);
  const Schema schema = Schema::from_json(schema_bytes);
  MaterializeOptions options;
  options.list_separator = parse_separator(a.separator);
  options.vocab_size = a.vocab_size;
  if (options.vocab_size < 1) throw ConfigError("--vocab-size must be >= 1");

  EmbedConfig config;
  if (!a.embed_config.empty()) config = EmbedConfig::from_json(read_file(a.embed_config));
  EmbedderSpec spec = config.default_spec.value_or(EmbedderSpec{});
  if (a.kind_set || !config.default_spec) {
    if (a.embed_kind == "hash_stub") {
      spec.kind = EmbedderSpec::Kind::hash_stub;
    } else if (a.embed_kind == "http") {
      spec.kind = EmbedderSpec::Kind::http;
    } else {
      throw ConfigError("unknown embedder kind '" + a.embed_kind + "'");
    }
  }
  if (a.dim_set || !config.default_spec) spec.dim = a.embed_dim;
  if (a.endpoint_set) spec.endpoint = a.embed_endpoint;
  if (spec.kind == EmbedderSpec::Kind::http && spec.api_key_env.empty() &&
      std::getenv(kApiKeyEnv) != nullptr) {
    spec.api_key_env = kApiKeyEnv;
  }
  config.default_spec = spec;

  Index calls = 0;
  const EmbedderFactory counting = [&](const EmbedderSpec& s) -> std::shared_ptr<TextEmbedder> {
    return std::make_shared<CountingEmbedder>(hooks.embedder_factory(s), calls);
  };
  const EmbedderRegistry registry(config, counting);

  std::vector<std::string> text_columns;
  for (const auto& c : schema.feature_columns()) {
    if (c.stype == SemanticType::text_embedded) text_columns.push_back(c.name);
  }
  const std::string key =
      cache_key(csv_bytes, schema_bytes,
                registry.identifier(text_columns) + "sep=" + std::string(1, options.list_separator) +
                    ";vocab=" + std::to_string(options.vocab_size));

  if (std::filesystem::exists(a.cache)) {
    try {
      const TensorFrame cached = cache_load(a.cache, key);
      out << "cache hit: " << a.cache << " (" << cached.num_rows
          << " rows, 0 embedder calls)\n";
      return kExitOk;
    } catch (const CacheError& e) {
      if (e.kind() != CacheError::Kind::KeyMismatch) throw;
      out << "cache stale, rebuilding: " << a.cache << "\n";
    }
  }
  const RawTable table = parse_csv(csv_bytes);
  const TensorFrame frame = materialize(table, schema, registry, options);
  cache_save(frame, a.cache, key);
  out << "materialized " << frame.num_rows << " rows, " << frame.num_cols()
      << " feature columns, " << calls << " embedder calls -> " << a.cache << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string cache, model_config, train_config, out;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

Head head_for_task(TaskType task) {
  return task == TaskType::binary_classification ? Head::logit : Head::regression;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const TensorFrame frame = cache_load(a.cache);
  json model_json = a.model_config.empty() ? json::object() : read_json_file(a.model_config);
  if (model_json.is_object() && !model_json.contains("head")) {
    model_json["head"] = std::string(to_string(head_for_task(frame.schema.task())));
  }
  const ModelConfig model_config = ModelConfig::from_json(model_json);
  TrainConfig train_config =
      a.train_config.empty() ? TrainConfig{} : TrainConfig::from_json(read_json_file(a.train_config));
  if (a.seed_set) train_config.seed = a.seed;
  train_config.validate();

  Pipeline p = train_pipeline(frame, model_config, train_config);
  const json extra = {{"train_config", train_config.to_json()},
                      {"task", std::string(to_string(frame.schema.task()))},
                      {"best_epoch", p.result.best_epoch},
                      {"best_metric", p.result.best_metric}};
  save_checkpoint(p.model, a.out, extra);
  const auto hist = history_path(a.out);
  write_file(hist.string(), history_csv(p.result.history));
  for (const auto& r : p.result.history) {
    out << "epoch " << r.epoch << " train_loss=" << format_real(r.train_loss)
        << " val_metric=" << format_real(r.val_metric) << "\n";
  }
  out << "best epoch " << p.result.best_epoch << " -> " << a.out << ", " << hist.string()
      << "\n";
  return kExitOk;
}

struct EvaluateArgs {
  std::string cache, checkpoint, split = "val";
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const TensorFrame frame = cache_load(a.cache);
  json extra;
  const TabularModel model = load_checkpoint(a.checkpoint, &extra);
  const TaskType task = frame.schema.task();
  TensorFrame scored = frame;
  if (a.split == "val") {
    TrainConfig tc;
    try {
      tc = TrainConfig::from_json(extra.at("train_config"));
    } catch (const json::exception&) {
      throw ConfigError("checkpoint does not record its train config; use --split all");
    }
    const RowSplit split =
        split_rows(frame.num_rows, tc.val_fraction, tc.seed, rows_with_missing_target(frame));
    scored = frame_row_select(frame, split.val);
  } else if (a.split != "all") {
    throw ConfigError("--split must be 'val' or 'all'");
  }
  out << "metric=" << format_real(evaluate(model, scored, task)) << "\n";
  return kExitOk;
}

struct ExportArgs {
  std::string cache, checkpoint, out;
};

int cmd_export(const ExportArgs& a, std::ostream& out) {
  const TensorFrame frame = cache_load(a.cache);
  const TabularModel model = load_checkpoint(a.checkpoint);
  export_row_embeddings(model, frame, a.out);
  out << "exported " << frame.num_rows << " x " << model.config().out_channels
      << " row embeddings -> " << a.out << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const CliHooks& hooks) {
  CLI::App app{"Multi-modal tabular deep learning: materialize, train, evaluate, export.",
               "tabframe"};
  app.require_subcommand(1, 1);
  app.set_help_all_flag("--help-all", "Expand all help");

  InferArgs infer;
  auto* c_infer = app.add_subcommand("infer-schema", "Infer a schema from a CSV file");
  c_infer->add_option("--csv", infer.csv, "Input CSV")->required();
  c_infer->add_option("--out", infer.out, "Output schema JSON")->required();
  c_infer->add_option("--target", infer.target, "Target column (default: last column)");
  c_infer->add_option("--task", infer.task, "binary_classification or regression");
  c_infer->add_option("--list-separator", infer.separator, "Multicategorical separator");

  MaterializeArgs mat;
  auto* c_mat = app.add_subcommand("materialize", "Materialize a CSV into a cached frame");
  c_mat->add_option("--csv", mat.csv, "Input CSV")->required();
  c_mat->add_option("--schema", mat.schema, "Schema JSON")->required();
  c_mat->add_option("--cache", mat.cache, "Frame cache file")->required();
  auto* o_kind = c_mat->add_option("--embed-kind", mat.embed_kind, "hash_stub or http");
  auto* o_dim = c_mat->add_option("--embed-dim", mat.embed_dim, "Text embedding width");
  auto* o_endpoint = c_mat->add_option("--embed-endpoint", mat.embed_endpoint,
                                       "Embeddings API base URL (key from " +
                                           std::string(kApiKeyEnv) + ")");
  c_mat->add_option("--embed-config", mat.embed_config, "Per-column embedder JSON");
  c_mat->add_option("--list-separator", mat.separator, "Multicategorical separator");
  c_mat->add_option("--vocab-size", mat.vocab_size, "Token hash vocabulary");

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train a model on a cached frame");
  c_train->add_option("--cache", tr.cache, "Frame cache file")->required();
  c_train->add_option("--model-config", tr.model_config, "Model config JSON");
  c_train->add_option("--train-config", tr.train_config, "Train config JSON");
  c_train->add_option("--out", tr.out, "Checkpoint output")->required();
  auto* o_seed = c_train->add_option("--seed", tr.seed, "Overrides the train config seed");

  EvaluateArgs ev;
  auto* c_eval = app.add_subcommand("evaluate", "Score a checkpoint on a cached frame");
  c_eval->add_option("--cache", ev.cache, "Frame cache file")->required();
  c_eval->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  c_eval->add_option("--split", ev.split, "val (recorded split) or all");

  ExportArgs ex;
  auto* c_export = app.add_subcommand("export-embeddings", "Write row embeddings Z");
  c_export->add_option("--cache", ex.cache, "Frame cache file")->required();
  c_export->add_option("--checkpoint", ex.checkpoint, "Checkpoint file")->required();
  c_export->add_option("--out", ex.out, "Embedding output")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }
  mat.kind_set = o_kind->count() > 0;
  mat.dim_set = o_dim->count() > 0;
  mat.endpoint_set = o_endpoint->count() > 0;
  tr.seed_set = o_seed->count() > 0;

  try {
    if (c_infer->parsed()) return cmd_infer_schema(infer, out);
    if (c_mat->parsed()) return cmd_materialize(mat, out, hooks);
    if (c_train->parsed()) return cmd_train(tr, out);
    if (c_eval->parsed()) return cmd_evaluate(ev, out);
    if (c_export->parsed()) return cmd_export(ex, out);
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  err << "usage error: no command\n";
  return kExitUsage;
}

}  // namespace tabframe
