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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "tabframe/error.hpp"
#include "tabframe/training.hpp"
#include "test_util.hpp"

namespace tabframe {
namespace {

using ad::DiffTensor;
using Vec = std::vector<double>;

TEST(Metrics, MseAndMaeExamples) {
  EXPECT_EQ(mse(Vec{1}, Vec{1}), 0.0);
  EXPECT_EQ(mse(Vec{2}, Vec{0}), 4.0);
  EXPECT_EQ(mse(Vec{1, 3}, Vec{0, 0}), 5.0);
  EXPECT_EQ(mae(Vec{1}, Vec{1}), 0.0);
  EXPECT_EQ(mae(Vec{2}, Vec{0}), 2.0);
  EXPECT_EQ(mae(Vec{1, -1}, Vec{0, 0}), 1.0);
  EXPECT_THROW(mse(Vec{1, 2}, Vec{1}), LengthMismatch);
  EXPECT_THROW(mae(Vec{}, Vec{}), LengthMismatch);
}

TEST(Metrics, PermutationInvariance) {
  SplitMix64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Vec p(7), t(7);
    for (std::size_t k = 0; k < 7; ++k) {
      p[k] = static_cast<double>(rng.next() % 9);
      t[k] = static_cast<double>(rng.next() % 9);
    }
    std::vector<std::size_t> perm(7);
    std::iota(perm.begin(), perm.end(), 0u);
    for (std::size_t k = 6; k > 0; --k) std::swap(perm[k], perm[rng.next() % (k + 1)]);
    Vec pp(7), tp(7);
    for (std::size_t k = 0; k < 7; ++k) {
      pp[k] = p[perm[k]];
      tp[k] = t[perm[k]];
    }
    // Small integers keep every partial sum exact, so equality is exact.
    EXPECT_EQ(mse(p, t), mse(pp, tp));
    EXPECT_EQ(mae(p, t), mae(pp, tp));
  }
}

/// Pairwise definition: P(score_pos > score_neg) + 0.5 P(tie).
double pairwise_auc(const Vec& s, const Vec& y) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] == 1 && y[j] == 0) {
        den += 1;
        num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
    }
  }
  return num / den;
}

TEST(Metrics, RocAucExamplesAndOracle) {
  EXPECT_EQ(roc_auc(Vec{0.1, 0.9}, Vec{0, 1}), 1.0);
  EXPECT_EQ(roc_auc(Vec{0.9, 0.1}, Vec{0, 1}), 0.0);
  EXPECT_EQ(roc_auc(Vec{0.3, 0.3, 0.3}, Vec{0, 1, 1}), 0.5);
  EXPECT_THROW(roc_auc(Vec{0.1, 0.2}, Vec{1, 1}), SingleClass);
  EXPECT_THROW(roc_auc(Vec{0.1, 0.2}, Vec{0, 2}), LabelOutOfRange);

  SplitMix64 rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.next() % 30;
    Vec s(n), y(n);
    for (std::size_t k = 0; k < n; ++k) {
      s[k] = static_cast<double>(rng.next() % 6);  // many ties
      y[k] = static_cast<double>(k < 2 ? k : rng.next() % 2);
    }
    const double auc = roc_auc(s, y);
    EXPECT_NEAR(auc, pairwise_auc(s, y), 1e-12);
    Vec t(n);
    for (std::size_t k = 0; k < n; ++k) t[k] = std::exp(3 * s[k]) - 7;
    EXPECT_NEAR(roc_auc(t, y), auc, 1e-12);
  }
}

TEST(Losses, MseLossGradient) {
  DiffTensor p({3}, Eigen::Vector3d(1, 2, 4), true);
  const Vec t = {0, 2, 1};
  const DiffTensor l = mse_loss(p, t);
  EXPECT_NEAR(l.item(), (1.0 + 0 + 9) / 3, 1e-15);
  ad::backward(l);
  EXPECT_LE((p.grad() - Eigen::Vector3d(2.0 / 3, 0, 2)).cwiseAbs().maxCoeff(), 1e-15);
}

// ---- Adam -----------------------------------------------------------------

std::map<std::string, DiffTensor> scalar_param(double value) {
  return {{"w", DiffTensor({1}, Eigen::VectorXd::Constant(1, value), true)}};
}

void set_grad(DiffTensor& p, double g) { p.node()->grad = Eigen::VectorXd::Constant(p.numel(), g); }

TEST(Adam, ZeroGradientLeavesParameters) {
  auto params = scalar_param(1.5);
  set_grad(params.at("w"), 0.0);
  AdamState state;
  adam_step(params, state, TrainConfig{});
  EXPECT_EQ(params.at("w").data()[0], 1.5);
  adam_step(params, state, TrainConfig{});
  EXPECT_EQ(params.at("w").data()[0], 1.5);
}

TEST(Adam, FirstStepIsSignTimesLr) {
  for (double g : {3.0, -0.25, 1e-3}) {
    auto params = scalar_param(0.0);
    set_grad(params.at("w"), g);
    AdamState state;
    TrainConfig c;
    c.learning_rate = 0.01;
    adam_step(params, state, c);
    EXPECT_NEAR(params.at("w").data()[0], -0.01 * (g > 0 ? 1 : -1), 0.01 * 1e-8 / std::abs(g) + 1e-15);
    EXPECT_FALSE(params.at("w").has_grad());
  }
}

TEST(Adam, ScalarRecurrenceOracle) {
  TrainConfig c;
  c.learning_rate = 0.05;
  auto params = scalar_param(2.0);
  AdamState state;
  double w = 2.0, m = 0, v = 0;
  const Vec grads = {0.7, 0.7, -1.3, 0.2};
  for (std::size_t t = 1; t <= grads.size(); ++t) {
    const double g = grads[t - 1];
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, static_cast<double>(t)));
    const double vh = v / (1 - std::pow(0.999, static_cast<double>(t)));
    w -= 0.05 * mh / (std::sqrt(vh) + 1e-8);
    set_grad(params.at("w"), g);
    adam_step(params, state, c);
    EXPECT_NEAR(params.at("w").data()[0], w, 1e-12) << "step " << t;
  }
}

TEST(Adam, StateShapeMismatch) {
  auto params = scalar_param(1.0);
  AdamState state;
  state.m["w"] = Eigen::VectorXd::Zero(2);
  state.v["w"] = Eigen::VectorXd::Zero(2);
  EXPECT_THROW(adam_step(params, state, TrainConfig{}), ShapeMismatch);
}

// ---- configs and splits -------------------------------------------------------

TEST(TrainConfig, ValidationAndJson) {
  TrainConfig c;
  EXPECT_EQ(TrainConfig::from_json(c.to_json()), c);
  EXPECT_THROW(TrainConfig::from_json(nlohmann::json{{"lr", 1}}), ConfigError);
  TrainConfig bad = c;
  bad.val_fraction = 1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = c;
  bad.batch_size = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  EXPECT_EQ(TrainConfig::from_json(nlohmann::json{{"seed", 5}}).seed, 5u);
}

TEST(Split, DeterministicDisjointAndCovering) {
  const std::vector<Index> exclude = {3, 8};
  const RowSplit a = split_rows(200, 0.25, 42, exclude);
  const RowSplit b = split_rows(200, 0.25, 42, exclude);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.val, b.val);
  std::vector<Index> all = a.train;
  all.insert(all.end(), a.val.begin(), a.val.end());
  std::sort(all.begin(), all.end());
  EXPECT_EQ(all.size(), 198u);
  EXPECT_EQ(std::adjacent_find(all.begin(), all.end()), all.end());
  EXPECT_FALSE(std::binary_search(all.begin(), all.end(), Index{3}));
  EXPECT_NEAR(static_cast<double>(a.val.size()) / 198.0, 0.25, 0.08);
  // Membership depends only on the row index, not on the table size.
  const RowSplit c = split_rows(100, 0.25, 42, exclude);
  for (Index r : c.val) EXPECT_TRUE(std::binary_search(a.val.begin(), a.val.end(), r));
  EXPECT_NE(split_rows(200, 0.25, 43).val, a.val);
  EXPECT_THROW(split_rows(1, 0.5, 0), EmptySplit);
}

// ---- training -----------------------------------------------------------------

ModelConfig small_config() {
  ModelConfig c;
  c.channels = 8;
  c.num_layers = 1;
  c.num_heads = 2;
  c.out_channels = 8;
  return c;
}

TEST(Train, LearningRateZeroKeepsParameters) {
  const TensorFrame f = testing::mixed_frame(40, 2, true);
  TrainConfig c;
  c.learning_rate = 0.0;
  c.epochs = 3;
  c.batch_size = 8;
  const RowSplit split = split_rows(40, 0.25, 0);
  TabularModel m(small_config(), FrameSpec::from_frame(f), 1);
  std::map<std::string, Eigen::VectorXd> before;
  for (const auto& [name, p] : m.parameters()) before[name] = p.data();
  train(m, frame_row_select(f, split.train), frame_row_select(f, split.val),
        TaskType::binary_classification, c);
  for (const auto& [name, p] : m.parameters()) EXPECT_EQ(p.data(), before.at(name)) << name;
}

TEST(Train, SingleBatchEpochEqualsManualStep) {
  const TensorFrame f = testing::mixed_frame(30, 4, true);
  const RowSplit split = split_rows(30, 0.3, 0);
  const TensorFrame tr = frame_row_select(f, split.train), va = frame_row_select(f, split.val);
  TrainConfig c;
  c.epochs = 1;
  c.batch_size = tr.num_rows;
  c.learning_rate = 0.01;
  TabularModel trained(small_config(), FrameSpec::from_frame(f), 5);
  TabularModel manual(small_config(), FrameSpec::from_frame(f), 5);
  const TrainResult r = train(trained, tr, va, TaskType::binary_classification, c);

  const Vec labels(tr.target->values.data(), tr.target->values.data() + tr.num_rows);
  const DiffTensor loss = ad::bce_with_logits(manual.forward(tr).prediction, labels);
  const double loss_value = loss.item();
  ad::backward(loss);
  AdamState state;
  adam_step(manual.parameters(), state, c);
  for (const auto& [name, p] : manual.parameters()) {
    EXPECT_LE((trained.param(name).data() - p.data()).cwiseAbs().maxCoeff(), 1e-12) << name;
  }
  ASSERT_EQ(r.history.size(), 1u);
  EXPECT_NEAR(r.history[0].train_loss, loss_value, 1e-12);
  EXPECT_EQ(r.history[0].val_metric, evaluate(trained, va, TaskType::binary_classification));
}

TEST(Train, DeterministicHistoryAndParameters) {
  const TensorFrame f = testing::random_frame(60, 6, true);
  TrainConfig c;
  c.epochs = 3;
  c.batch_size = 16;
  c.seed = 11;
  c.learning_rate = 0.01;
  const Pipeline a = train_pipeline(f, small_config(), c);
  const Pipeline b = train_pipeline(f, small_config(), c);
  EXPECT_EQ(a.result.history, b.result.history);
  EXPECT_EQ(history_csv(a.result.history), history_csv(b.result.history));
  for (const auto& [name, p] : a.model.parameters()) EXPECT_EQ(p.data(), b.model.param(name).data());
  c.seed = 12;
  const Pipeline other = train_pipeline(f, small_config(), c);
  EXPECT_NE(other.result.history, a.result.history);
}

TEST(Train, BestEpochIsRestored) {
  const TensorFrame f = testing::mixed_frame(80, 7, true);
  TrainConfig c;
  c.epochs = 6;
  c.batch_size = 16;
  c.learning_rate = 0.02;
  const Pipeline p = train_pipeline(f, small_config(), c);
  double best = -1;
  Index best_epoch = 0;
  for (const auto& rec : p.result.history) {
    if (rec.val_metric > best) {
      best = rec.val_metric;
      best_epoch = rec.epoch;
    }
  }
  EXPECT_EQ(p.result.best_epoch, best_epoch);
  EXPECT_EQ(p.result.best_metric, best);
  const TensorFrame stats = with_stats_from_rows(f, p.split.train);
  EXPECT_EQ(evaluate(p.model, frame_row_select(stats, p.split.val), TaskType::binary_classification), best);
}

TEST(Train, RegressionUsesMae) {
  RawTable base = testing::random_table(50, 3, false);
  std::vector<RawColumn> cols = base.columns();
  for (std::size_t i = 0; i < cols.back().cells.size(); ++i) {
    cols.back().cells[i] = testing::text(std::to_string(static_cast<double>(i % 7)));
  }
  std::vector<ColumnSpec> specs = testing::random_table_schema().columns();
  specs.back().stype = SemanticType::numerical;
  const Schema schema(specs, "label", TaskType::regression);
  const TensorFrame f = materialize(RawTable(cols), schema, testing::stub_registry(4));
  ModelConfig mc = small_config();
  mc.head = Head::regression;
  TrainConfig c;
  c.epochs = 2;
  c.batch_size = 10;
  const Pipeline p = train_pipeline(f, mc, c);
  ASSERT_EQ(p.result.history.size(), 2u);
  EXPECT_GE(p.result.history[0].val_metric, 0.0);
  EXPECT_THROW(train_pipeline(f, small_config(), c), ConfigError);
}

TEST(Train, Errors) {
  const TensorFrame f = testing::mixed_frame(30, 4, true);
  TrainConfig c;
  c.batch_size = 1000;
  EXPECT_THROW(train_pipeline(f, small_config(), c), ConfigError);

  c = TrainConfig{};
  c.batch_size = 4;
  c.epochs = 1;
  const RowSplit split = split_rows(30, 0.3, 0);
  TabularModel m(small_config(), FrameSpec::from_frame(f), 1);
  m.param("head.bias").mutable_data().setConstant(std::numeric_limits<double>::infinity());
  try {
    train(m, frame_row_select(f, split.train), frame_row_select(f, split.val),
          TaskType::binary_classification, c);
    FAIL() << "expected NonFiniteLoss";
  } catch (const NonFiniteLoss& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 1, batch 0"), std::string::npos) << e.what();
  }
  EXPECT_EQ(ad::Tape::current().size(), 0u);
}

TEST(Train, MissingTargetsAreExcluded) {
  RawTable base = testing::random_table(40, 3, false);
  std::vector<RawColumn> cols = base.columns();
  cols.back().cells[4] = testing::missing();
  cols.back().cells[9] = testing::missing();
  const TensorFrame f = materialize(RawTable(cols), testing::random_table_schema(), testing::stub_registry(4));
  EXPECT_EQ(rows_with_missing_target(f), (std::vector<Index>{4, 9}));
  TrainConfig c;
  c.epochs = 1;
  c.batch_size = 8;
  const Pipeline p = train_pipeline(f, small_config(), c);
  for (Index r : {4, 9}) {
    EXPECT_EQ(std::count(p.split.train.begin(), p.split.train.end(), r), 0);
    EXPECT_EQ(std::count(p.split.val.begin(), p.split.val.end(), r), 0);
  }
}

TEST(History, CsvFormat) {
  const std::vector<EpochRecord> h = {{1, 0.5, 0.75}, {2, 0.1, 1.0 / 3}};
  EXPECT_EQ(history_csv(h), "epoch,train_loss,val_metric\n1,0.5,0.75\n2,0.10000000000000001,0.33333333333333331\n");
}

TEST(Export, RoundTripAndSingleRowOracle) {
  testing::TempDir dir;
  const TensorFrame f = testing::random_frame(12, 4, true);
  ModelConfig mc = small_config();
  mc.out_channels = 5;
  const TabularModel m(mc, FrameSpec::from_frame(f), 3);
  const std::string path = dir.file("z.tfem");
  export_row_embeddings(m, f, path);
  const RowMajorMatrixXd z = load_row_embeddings(path);
  EXPECT_EQ(z.rows(), 12);
  EXPECT_EQ(z.cols(), 5);
  EXPECT_EQ(z, m.embed_rows(f));
  for (Index i = 0; i < 12; ++i) {
    const std::vector<Index> one = {i};
    EXPECT_EQ(m.embed_rows(frame_row_select(f, one)).row(0), z.row(i));
  }
  EXPECT_THROW(load_row_embeddings(dir.file("none.tfem")), IoError);
}

}  // namespace
}  // namespace tabframe
