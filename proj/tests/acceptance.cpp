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

// Acceptance runner: one pass/fail line per criterion, nonzero exit when any
// criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tabframe/autodiff.hpp"
#include "tabframe/cache.hpp"
#include "tabframe/checkpoint.hpp"
#include "tabframe/cli.hpp"
#include "tabframe/error.hpp"
#include "tabframe/training.hpp"
#include "test_util.hpp"

namespace tabframe {
namespace {

using ad::DiffTensor;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

// ---- 1: ragged tensors ----------------------------------------------------

Outcome ragged_oracle() {
  Outcome o;
  const auto start = Clock::now();
  using Nested = std::vector<std::vector<std::vector<std::int64_t>>>;
  SplitMix64 rng(1);
  int trials = 0;
  for (; trials < 1000; ++trials) {
    const Index n = 1 + static_cast<Index>(rng.next() % 6), c = 1 + static_cast<Index>(rng.next() % 6);
    Nested rows(n, std::vector<std::vector<std::int64_t>>(c));
    for (auto& row : rows) {
      for (auto& cell : row) {
        for (std::uint64_t k = 0, len = rng.next() % 9; k < len; ++k) {
          cell.push_back(static_cast<std::int64_t>(rng.next() % 1000));
        }
      }
    }
    const auto t = MultiNestedTensor<std::int64_t>::from_nested(rows);
    bool ok = t.to_nested() == rows;
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < c; ++j) {
        const std::vector<std::int64_t> literal(t.val().begin() + t.ptr()[c * i + j],
                                                t.val().begin() + t.ptr()[c * i + j + 1]);
        const auto got = t.get(i, j);
        ok = ok && literal == rows[i][j] && std::vector<std::int64_t>(got.begin(), got.end()) == rows[i][j];
      }
    }
    std::vector<Index> sel(rng.next() % 8);
    for (auto& r : sel) r = static_cast<Index>(rng.next() % static_cast<std::uint64_t>(n));
    const auto s = t.select_rows(sel);
    for (std::size_t k = 0; k < sel.size(); ++k) {
      for (Index j = 0; j < c; ++j) {
        const auto got = s.get(static_cast<Index>(k), j);
        ok = ok && std::vector<std::int64_t>(got.begin(), got.end()) == rows[sel[k]][j];
      }
    }
    if (!ok) {
      o.require(false, "mismatch at trial " + std::to_string(trials));
      break;
    }
  }
  const double secs = seconds_since(start);
  o.require(secs < 10.0, "runtime " + fmt("%.2f", secs) + " s");
  if (o.pass) o.detail = std::to_string(trials) + " randomized inputs, " + fmt("%.2f", secs) + " s";
  return o;
}

// ---- 2: materialization -----------------------------------------------------

Outcome materialization_fidelity() {
  Outcome o;
  using testing::missing;
  using testing::text;
  RawTable table({{"age", {text("31"), missing(), text("40")}},
                  {"gender", {text("male"), text("female"), text("non-binary")}},
                  {"city", {text("x"), missing(), text("y")}},
                  {"genres", {text("comedy|romance|drama"), text("drama"), text("romance")}},
                  {"y", {text("0"), text("1"), text("0")}}});
  Schema schema({{"age", SemanticType::numerical},
                 {"gender", SemanticType::categorical},
                 {"city", SemanticType::categorical},
                 {"genres", SemanticType::multicategorical},
                 {"y", SemanticType::numerical}},
                "y", TaskType::binary_classification);
  const TensorFrame f = materialize(table, schema, EmbedderRegistry{});
  const auto& cat = std::get<DenseIntBlock>(*f.block(SemanticType::categorical)).values;
  o.require(cat(0, 0) == 0 && cat(1, 0) == 1 && cat(2, 0) == 2, "gender map");
  o.require(cat(1, 1) == -1, "categorical missing sentinel");
  o.require(std::isnan(std::get<DenseFloatBlock>(*f.block(SemanticType::numerical)).values(1, 0)),
            "numerical missing NaN");
  const auto g = std::get<NestedBlock>(*f.block(SemanticType::multicategorical)).get(0, 0);
  o.require(std::vector<std::int64_t>(g.begin(), g.end()) == std::vector<std::int64_t>{0, 1, 2},
            "genres indices");

  int frames = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const TensorFrame r = testing::random_frame(30, seed, seed % 2 == 1);
    o.require(r.blocks.size() == kAllSemanticTypes.size(), "frame lacks a semantic type");
    const std::string bytes = serialize_frame(r, "k");
    const TensorFrame back = deserialize_frame(bytes, std::string("k"));
    o.require(back == r && serialize_frame(back, "k") == bytes, "cache round trip, seed " + std::to_string(seed));
    ++frames;
  }
  if (o.pass) o.detail = "worked examples exact; " + std::to_string(frames) + " frames round-trip bit-exact";
  return o;
}

// ---- 3: gradients -----------------------------------------------------------

DiffTensor random_tensor(SplitMix64& rng, ad::Shape shape, double min_abs = 0.0) {
  Eigen::VectorXd v(ad::numel(shape));
  for (Index k = 0; k < v.size(); ++k) {
    double x = rng.next_signed_unit();
    if (std::abs(x) < min_abs) x += x < 0 ? -min_abs : min_abs;
    v[k] = x;
  }
  return DiffTensor(std::move(shape), std::move(v), true);
}

DiffTensor project(const DiffTensor& y, std::uint64_t seed) {
  SplitMix64 rng(seed);
  DiffTensor w = random_tensor(rng, y.shape());
  return ad::sum_all(ad::mul(y, DiffTensor(w.shape(), w.data(), false)));
}

double op_errors(std::uint64_t seed) {
  SplitMix64 rng(seed * 104729 + 3);
  const Index n = 1 + static_cast<Index>(rng.next() % 4), m = 1 + static_cast<Index>(rng.next() % 4);
  DiffTensor a = random_tensor(rng, {n, m}), b = random_tensor(rng, {m, 3}), c = random_tensor(rng, {n, m});
  DiffTensor t3 = random_tensor(rng, {2, n, m}), b3 = random_tensor(rng, {2, m, 2});
  DiffTensor kink = random_tensor(rng, {n, m}, 0.05), rows = random_tensor(rng, {5, m});
  DiffTensor logits = random_tensor(rng, {n});
  std::vector<double> labels(static_cast<std::size_t>(n));
  for (auto& y : labels) y = static_cast<double>(rng.next() % 2);
  const std::vector<Index> idx = {n - 1, 0, n - 1};
  const std::vector<std::int64_t> offsets = {0, 3, 3, 5};

  using F = std::function<DiffTensor()>;
  const std::vector<std::pair<F, std::vector<DiffTensor>>> cases = {
      {[&] { return project(ad::matmul(a, b), seed); }, {a, b}},
      {[&] { return project(ad::matmul(t3, b3), seed); }, {t3, b3}},
      {[&] { return project(ad::add(a, c), seed); }, {a, c}},
      {[&] { return project(ad::sub(a, c), seed); }, {a, c}},
      {[&] { return project(ad::mul(a, c), seed); }, {a, c}},
      {[&] { return project(ad::scale(a, 2.5), seed); }, {a}},
      {[&] { return project(ad::relu(kink), seed); }, {kink}},
      {[&] { return project(ad::sin(a), seed); }, {a}},
      {[&] { return project(ad::cos(a), seed); }, {a}},
      {[&] { return project(ad::softmax_lastdim(ad::scale(t3, 3.0)), seed); }, {t3}},
      {[&] { return project(ad::layer_norm_lastdim(t3), seed); }, {t3}},
      {[&] { return project(ad::mean_axis(t3, 1), seed); }, {t3}},
      {[&] { return ad::mean_all(ad::mul(a, a)); }, {a}},
      {[&] { const std::vector<DiffTensor> p{a, c}; return project(ad::concat(p, 1), seed); }, {a, c}},
      {[&] { return project(ad::gather_rows(a, idx), seed); }, {a}},
      {[&] { return project(ad::segment_mean(rows, offsets), seed); }, {rows}},
      {[&] { return project(ad::reshape(t3, {-1}), seed); }, {t3}},
      {[&] { return project(ad::slice(t3, 2, 0, (m + 1) / 2), seed); }, {t3}},
      {[&] { return project(ad::transpose_last2(t3), seed); }, {t3}},
      {[&] { return ad::bce_with_logits(ad::scale(logits, 4.0), labels); }, {logits}},
  };
  double worst = 0;
  for (const auto& [f, wrt] : cases) {
    std::vector<DiffTensor> w = wrt;
    worst = std::max(worst, ad::grad_check(f, w, ad::GradCheckOptions{1e-4, 0, 0}));
  }
  return worst;
}

Outcome gradient_correctness() {
  Outcome o;
  const auto start = Clock::now();
  double op_worst = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) op_worst = std::max(op_worst, op_errors(seed));
  o.require(op_worst <= 1e-4, "op max error " + fmt("%.3g", op_worst));

  constexpr std::uint64_t kMaxDraws = 20;
  double model_worst = 0;
  int checks = 0, redraws = 0;
  std::string worst_case;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const TensorFrame f = testing::mixed_frame(4, 1000 + seed);
    const std::vector<double> labels(f.target->values.data(), f.target->values.data() + 4);
    for (auto inter : {Interaction::self_attention, Interaction::self_attention_positional}) {
      for (auto dec : {Decoder::mean_pool, Decoder::attention_pool, Decoder::cls, Decoder::flatten_mlp}) {
        ModelConfig c;
        c.channels = 8;
        c.num_layers = 2;
        c.num_heads = 2;
        c.out_channels = 8;
        c.interaction = inter;
        c.decoder = dec;
        TabularModel model(c, FrameSpec::from_frame(f), seed);
        std::vector<DiffTensor> wrt;
        for (auto& [name, p] : model.parameters()) wrt.push_back(p);
        // Central differences are only an oracle where every relu keeps its
        // branch across the stencil; draws that straddle a kink are redrawn.
        double err = 0;
        bool smooth = false;
        for (std::uint64_t draw = 0; draw < kMaxDraws && !smooth; ++draw) {
          // Spread parameters so biases, gains and tables are exercised
          // away from their initial values.
          std::uint64_t s = mix64(seed * 977 + draw);
          for (auto& [name, p] : model.parameters()) {
            SplitMix64 rng(++s);
            for (Index k = 0; k < p.numel(); ++k) p.mutable_data()[k] = 0.5 * rng.next_signed_unit();
          }
          std::optional<std::uint64_t> center;
          smooth = true;
          err = ad::grad_check(
              [&] {
                ad::ActivationPatternProbe probe;
                DiffTensor loss = ad::bce_with_logits(model.forward(f).prediction, labels);
                if (!center) center = probe.hash();
                smooth = smooth && probe.hash() == *center;
                return loss;
              },
              wrt, ad::GradCheckOptions{1e-4, 4, seed});
          redraws += smooth ? 0 : 1;
        }
        o.require(smooth, "no kink-free draw for seed " + std::to_string(seed));
        ++checks;
        if (err > model_worst) {
          model_worst = err;
          worst_case = std::string(to_string(inter)) + "/" + std::string(to_string(dec)) + " seed " +
                       std::to_string(seed);
        }
      }
    }
  }
  o.require(model_worst <= 1e-4, "model max error " + fmt("%.3g", model_worst) + " (" + worst_case + ")");
  const double secs = seconds_since(start);
  o.require(secs < 120.0, "runtime " + fmt("%.1f", secs) + " s");
  if (o.pass) {
    o.detail = "100 seeds; op max rel err " + fmt("%.2e", op_worst) + ", model max rel err " +
               fmt("%.2e", model_worst) + " over " + std::to_string(checks) + " model checks (" + std::to_string(redraws) +
               " kink-straddling draws replaced), " + fmt("%.1f", secs) + " s";
  }
  return o;
}

// ---- 4: structural invariants -----------------------------------------------

Outcome structural_invariants() {
  Outcome o;
  const TensorFrame f = testing::random_frame(16, 77, true);
  double equivariance = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ModelConfig c;
    c.channels = 8;
    c.num_heads = 2;
    c.num_layers = 1;
    TabularModel model(c, FrameSpec::from_frame(f), seed);
    const DiffTensor x = model.encode(f);
    const Index n = x.dim(0), cols = x.dim(1), ch = x.dim(2);
    std::vector<Index> perm(static_cast<std::size_t>(cols));
    std::iota(perm.begin(), perm.end(), Index{0});
    SplitMix64 rng(seed);
    for (Index k = cols - 1; k > 0; --k) std::swap(perm[k], perm[rng.next() % static_cast<std::uint64_t>(k + 1)]);
    Eigen::VectorXd px(x.numel());
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < cols; ++j) px.segment((i * cols + j) * ch, ch) = x.data().segment((i * cols + perm[j]) * ch, ch);
    const DiffTensor y = model.interaction_layer(x, 0);
    const DiffTensor py = model.interaction_layer(DiffTensor(x.shape(), px), 0);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < cols; ++j)
        equivariance = std::max(equivariance, (py.data().segment((i * cols + j) * ch, ch) -
                                               y.data().segment((i * cols + perm[j]) * ch, ch))
                                                  .cwiseAbs()
                                                  .maxCoeff());
  }
  o.require(equivariance <= 1e-10, "equivariance error " + fmt("%.3g", equivariance));

  bool batch_ok = true, rows_ok = true, finite = true;
  // Same table as `f` with one row missing in every feature column.
  std::vector<RawColumn> raw = testing::random_table(16, 77, true).columns();
  for (auto& col : raw) {
    if (col.name != "label") col.cells[3] = testing::missing();
  }
  MaterializeOptions options;
  options.vocab_size = 64;
  const TensorFrame sentinel = materialize(RawTable(raw), testing::random_table_schema(), testing::stub_registry(4),
                                           options, &f.category_maps);
  for (auto inter : {Interaction::self_attention, Interaction::self_attention_positional, Interaction::none}) {
    for (auto dec : {Decoder::mean_pool, Decoder::attention_pool, Decoder::cls, Decoder::flatten_mlp}) {
      if (dec == Decoder::cls && inter == Interaction::none) continue;
      for (auto enc : {NumericalEncoder::linear, NumericalEncoder::periodic}) {
        ModelConfig c;
        c.channels = 8;
        c.num_heads = 2;
        c.interaction = inter;
        c.decoder = dec;
        c.numerical_encoder = enc;
        const TabularModel model(c, FrameSpec::from_frame(f), 3);
        const RowMajorMatrixXd z = model.embed_rows(f);
        for (Index i = 0; i < f.num_rows; ++i) {
          const std::vector<Index> one = {i};
          batch_ok = batch_ok && model.embed_rows(frame_row_select(f, one)).row(0) == z.row(i);
        }
        std::vector<Index> rows(static_cast<std::size_t>(f.num_rows));
        std::iota(rows.begin(), rows.end(), Index{0});
        rows[0] = 9;
        const RowMajorMatrixXd altered = model.embed_rows(frame_row_select(f, rows));
        for (Index i = 1; i < f.num_rows; ++i) rows_ok = rows_ok && altered.row(i) == z.row(i);
        finite = finite && model.encode(sentinel).data().allFinite() && model.embed_rows(sentinel).allFinite();
      }
    }
  }
  o.require(batch_ok, "batch-of-1 differs from full batch");
  o.require(rows_ok, "row dependence");
  o.require(finite, "non-finite values under sentinels");
  if (o.pass) {
    o.detail = "equivariance err " + fmt("%.2e", equivariance) +
               "; row independence and batch-of-1 bit-exact; no NaN/Inf";
  }
  return o;
}

// ---- 5: learning check ------------------------------------------------------

TensorFrame synthetic_frame(Index n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  RawColumn x{"x", {}}, c{"c", {}}, tags{"tags", {}}, y{"y", {}};
  const std::vector<std::string> pool = {"t1", "t2", "t3", "t4", "t5"};
  for (Index i = 0; i < n; ++i) {
    const double xv = rng.next_signed_unit();
    const bool a = rng.next() % 2 == 0;
    std::string t = pool[rng.next() % 5];
    if (rng.next() % 2) t += "|" + pool[rng.next() % 5];
    x.cells.push_back(testing::text(fmt("%.17g", xv)));
    c.cells.push_back(testing::text(a ? "A" : "B"));
    tags.cells.push_back(testing::text(t));
    y.cells.push_back(testing::text(xv + (a ? 0.5 : -0.5) > 0 ? "1" : "0"));
  }
  const Schema schema({{"x", SemanticType::numerical},
                       {"c", SemanticType::categorical},
                       {"tags", SemanticType::multicategorical},
                       {"y", SemanticType::categorical}},
                      "y", TaskType::binary_classification);
  return materialize(RawTable({x, c, tags, y}), schema, EmbedderRegistry{});
}

/// Logistic regression on [x, 1[c = A], tag indicators] by full-batch
/// gradient descent; returns validation ROC-AUC.
double logistic_regression_auc(const TensorFrame& f, const RowSplit& split) {
  const auto& x = std::get<DenseFloatBlock>(*f.block(SemanticType::numerical)).values;
  const auto& c = std::get<DenseIntBlock>(*f.block(SemanticType::categorical)).values;
  const auto& tags = std::get<NestedBlock>(*f.block(SemanticType::multicategorical));
  const Index k = f.stats.at("tags").num_categories;
  const Index a_index = f.category_maps.at("c").find("A");
  auto features = [&](Index i) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(3 + k);
    v[0] = 1.0;
    v[1] = x(i, 0);
    v[2] = c(i, 0) == a_index ? 1.0 : 0.0;
    for (auto t : tags.get(i, 0)) v[3 + t] = 1.0;
    return v;
  };
  Eigen::VectorXd w = Eigen::VectorXd::Zero(3 + k);
  for (int iter = 0; iter < 2000; ++iter) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(w.size());
    for (Index i : split.train) {
      const Eigen::VectorXd v = features(i);
      const double p = 1.0 / (1.0 + std::exp(-w.dot(v)));
      g += (p - f.target->values[i]) * v;
    }
    w -= 2.0 * g / static_cast<double>(split.train.size());
  }
  std::vector<double> scores, labels;
  for (Index i : split.val) {
    scores.push_back(w.dot(features(i)));
    labels.push_back(f.target->values[i]);
  }
  return roc_auc(scores, labels);
}

Outcome learning_check() {
  Outcome o;
  const TensorFrame f = synthetic_frame(2000, 2024);
  TrainConfig tc;
  tc.epochs = 50;
  tc.batch_size = 64;
  tc.learning_rate = 3e-3;
  const double oracle = logistic_regression_auc(f, split_rows(f.num_rows, tc.val_fraction, 0));
  o.require(oracle >= 0.98, "logistic oracle AUC " + fmt("%.4f", oracle));

  ModelConfig mc;  // F = 32, L = 2, self-attention, mean_pool
  std::string per_seed;
  double total_secs = 0;
  for (std::uint64_t seed : {0, 1, 2}) {
    tc.seed = seed;
    const auto start = Clock::now();
    const Pipeline p = train_pipeline(f, mc, tc);
    const double secs = seconds_since(start);
    total_secs += secs;
    o.require(p.result.best_metric >= 0.95, "seed " + std::to_string(seed) + " AUC " + fmt("%.4f", p.result.best_metric));
    o.require(p.result.history[4].train_loss < p.result.history[0].train_loss,
              "seed " + std::to_string(seed) + " loss did not decrease by epoch 5");
    o.require(secs < 120.0, "seed " + std::to_string(seed) + " took " + fmt("%.1f", secs) + " s");
    per_seed += (per_seed.empty() ? "" : ", ") + fmt("%.4f", p.result.best_metric) + " (epoch " +
                std::to_string(p.result.best_epoch) + ")";
  }
  o.detail = (o.pass ? "" : o.detail + " | ") + "oracle AUC " + fmt("%.4f", oracle) + "; model AUC " + per_seed +
             "; " + fmt("%.1f", total_secs) + " s total";
  return o;
}

// ---- 6 and 7: CLI pipelines -------------------------------------------------

int cli(const std::vector<std::string>& args, std::string* out = nullptr, const CliHooks& hooks = {}) {
  std::ostringstream o, e;
  const int code = run_cli(args, o, e, hooks);
  if (out) *out = o.str();
  if (code != 0) std::fprintf(stderr, "  cli %s: %s", args.front().c_str(), e.str().c_str());
  return code;
}

Outcome text_pipeline() {
  Outcome o;
  testing::TempDir dir;
  // Label is a fixed function of the text: a per-phrase coin from its hash.
  const std::vector<std::string> adjectives = {"quiet", "bright", "rusty", "gentle", "brisk", "humble"};
  const std::vector<std::string> nouns = {"harbor", "lantern", "meadow", "engine", "violin"};
  SplitMix64 rng(8);
  std::string csv = "review,label\n";
  for (int i = 0; i < 1200; ++i) {
    const std::string phrase = adjectives[rng.next() % adjectives.size()] + " " + nouns[rng.next() % nouns.size()];
    csv += "\"" + phrase + "\"," + ((fnv1a64(phrase) >> 7) % 2 ? "yes" : "no") + "\n";
  }
  write_file(dir.file("text.csv"), csv);
  write_file(dir.file("schema.json"),
             R"({"columns": [{"name": "review", "stype": "text_embedded"}, {"name": "label", "stype": "categorical"}],
                 "target": "label", "task": "binary_classification"})");
  write_file(dir.file("model.json"), R"({"channels": 16, "num_layers": 1, "num_heads": 2, "out_channels": 16})");
  write_file(dir.file("train.json"), R"({"epochs": 40, "batch_size": 32, "learning_rate": 0.003, "seed": 1})");

  auto calls = std::make_shared<std::atomic<Index>>(0);
  CliHooks hooks;
  hooks.embedder_factory = [calls](const EmbedderSpec& spec) -> std::shared_ptr<TextEmbedder> {
    return std::make_shared<testing::CountingEmbedder>(spec.dim, calls);
  };
  const std::vector<std::string> mat = {"materialize", "--csv", dir.file("text.csv"), "--schema",
                                        dir.file("schema.json"), "--cache", dir.file("frame.tfrm"),
                                        "--embed-kind", "hash_stub", "--embed-dim", "16"};
  o.require(cli(mat, nullptr, hooks) == 0, "materialize failed");
  const Index first_calls = calls->load();
  o.require(first_calls > 0, "first materialize made no embedder calls");
  o.require(cli({"train", "--cache", dir.file("frame.tfrm"), "--model-config", dir.file("model.json"),
                 "--train-config", dir.file("train.json"), "--out", dir.file("ckpt.tfpm")}) == 0,
            "train failed");
  std::string eval_out;
  o.require(cli({"evaluate", "--cache", dir.file("frame.tfrm"), "--checkpoint", dir.file("ckpt.tfpm")}, &eval_out) == 0,
            "evaluate failed");
  const double auc = eval_out.rfind("metric=", 0) == 0 ? std::stod(eval_out.substr(7)) : -1.0;
  o.require(auc >= 0.9, "val AUC " + fmt("%.4f", auc));

  calls->store(0);
  std::string again;
  o.require(cli(mat, &again, hooks) == 0, "second materialize failed");
  o.require(calls->load() == 0 && again.find("cache hit") != std::string::npos,
            "cache re-run made " + std::to_string(calls->load()) + " embedder calls");
  o.detail = (o.pass ? "" : o.detail + " | ") + "val AUC " + fmt("%.4f", auc) + "; first run " +
             std::to_string(first_calls) + " embedder calls, re-run " + std::to_string(calls->load());
  return o;
}

Outcome determinism() {
  Outcome o;
  testing::TempDir a, b;
  std::vector<std::string> ckpt, hist, cache;
  for (const testing::TempDir* dir : {&a, &b}) {
    write_file(dir->file("data.csv"), testing::fixture_csv(300, 12));
    write_file(dir->file("model.json"), R"({"channels": 16, "num_layers": 2, "num_heads": 4, "out_channels": 16})");
    write_file(dir->file("train.json"), R"({"epochs": 4, "batch_size": 32, "learning_rate": 0.003})");
    bool ok = cli({"infer-schema", "--csv", dir->file("data.csv"), "--out", dir->file("schema.json")}) == 0;
    ok = ok && cli({"materialize", "--csv", dir->file("data.csv"), "--schema", dir->file("schema.json"),
                    "--cache", dir->file("frame.tfrm")}) == 0;
    ok = ok && cli({"train", "--cache", dir->file("frame.tfrm"), "--model-config", dir->file("model.json"),
                    "--train-config", dir->file("train.json"), "--out", dir->file("ckpt.tfpm"), "--seed", "21"}) == 0;
    o.require(ok, "pipeline failed");
    if (!ok) return o;
    ckpt.push_back(read_file(dir->file("ckpt.tfpm")));
    hist.push_back(read_file(dir->file("ckpt.history.csv")));
    cache.push_back(read_file(dir->file("frame.tfrm")));
  }
  o.require(ckpt[0] == ckpt[1], "checkpoints differ");
  o.require(hist[0] == hist[1], "histories differ");
  o.require(cache[0] == cache[1], "frame caches differ");
  if (o.pass) {
    o.detail = "checkpoints (" + std::to_string(ckpt[0].size()) + " bytes) and histories byte-identical";
  }
  return o;
}

}  // namespace
}  // namespace tabframe

int main() {
  using namespace tabframe;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"ragged-tensor oracle equivalence", ragged_oracle},
      {"materialization fidelity", materialization_fidelity},
      {"gradient correctness", gradient_correctness},
      {"structural invariants", structural_invariants},
      {"learning check", learning_check},
      {"text-column pipeline", text_pipeline},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failures += o.pass ? 0 : 1;
    std::printf("[%s] criterion %zu: %s -- %s\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first,
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
