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

#include "tabframe/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "tabframe/checkpoint.hpp"
#include "tabframe/error.hpp"
#include "tabframe/hash.hpp"
#include "tabframe/materialize.hpp"
#include "tabframe/table.hpp"

namespace tabframe {

using nlohmann::json;
using ad::DiffTensor;

namespace {

void check_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw LengthMismatch(std::string(what) + ": " + std::to_string(a) + " predictions, " +
                         std::to_string(b) + " targets");
  }
  if (a == 0) throw LengthMismatch(std::string(what) + " of zero elements");
}

bool higher_is_better(TaskType task) { return task == TaskType::binary_classification; }

Head head_for(TaskType task) {
  return task == TaskType::binary_classification ? Head::logit : Head::regression;
}

std::vector<double> target_values(const TensorFrame& frame) {
  if (!frame.target) throw SchemaError("frame carries no target column");
  const auto& v = frame.target->values;
  return {v.data(), v.data() + v.size()};
}

std::vector<Index> shuffled(Index n, std::uint64_t seed, Index epoch) {
  std::vector<Index> perm(n);
  std::iota(perm.begin(), perm.end(), Index{0});
  SplitMix64 rng(seed ^ mix64(static_cast<std::uint64_t>(epoch)));
  for (Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Index>(rng.next() % static_cast<std::uint64_t>(i + 1));
    std::swap(perm[i], perm[j]);
  }
  return perm;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be finite and >= 0");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("eps must be > 0");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ConfigError("val_fraction must lie in (0, 1)");
  }
}

json TrainConfig::to_json() const {
  return {{"batch_size", batch_size}, {"epochs", epochs},     {"learning_rate", learning_rate},
          {"beta1", beta1},           {"beta2", beta2},       {"eps", eps},
          {"seed", seed},             {"val_fraction", val_fraction}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  TrainConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "batch_size") {
        c.batch_size = value.get<Index>();
      } else if (key == "epochs") {
        c.epochs = value.get<Index>();
      } else if (key == "learning_rate") {
        c.learning_rate = value.get<double>();
      } else if (key == "beta1") {
        c.beta1 = value.get<double>();
      } else if (key == "beta2") {
        c.beta2 = value.get<double>();
      } else if (key == "eps") {
        c.eps = value.get<double>();
      } else if (key == "seed") {
        c.seed = value.get<std::uint64_t>();
      } else if (key == "val_fraction") {
        c.val_fraction = value.get<double>();
      } else {
        throw ConfigError("unknown train config key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid train config: ") + e.what());
  }
  c.validate();
  return c;
}

double mse(std::span<const double> preds, std::span<const double> targets) {
  check_lengths(preds.size(), targets.size(), "mse");
  double sum = 0.0;
  for (std::size_t k = 0; k < preds.size(); ++k) {
    sum += (preds[k] - targets[k]) * (preds[k] - targets[k]);
  }
  return sum / static_cast<double>(preds.size());
}

double mae(std::span<const double> preds, std::span<const double> targets) {
  check_lengths(preds.size(), targets.size(), "mae");
  double sum = 0.0;
  for (std::size_t k = 0; k < preds.size(); ++k) sum += std::abs(preds[k] - targets[k]);
  return sum / static_cast<double>(preds.size());
}

double roc_auc(std::span<const double> scores, std::span<const double> labels) {
  check_lengths(scores.size(), labels.size(), "roc_auc");
  const std::size_t n = scores.size();
  double positives = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (labels[k] != 0.0 && labels[k] != 1.0) {
      throw LabelOutOfRange("label at position " + std::to_string(k) + " is not 0 or 1");
    }
    positives += labels[k];
  }
  const double negatives = static_cast<double>(n) - positives;
  if (positives == 0.0 || negatives == 0.0) {
    throw SingleClass("roc_auc needs both classes, got " + std::to_string(positives) +
                      " positives of " + std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  for (std::size_t start = 0; start < n;) {
    std::size_t end = start + 1;
    while (end < n && scores[order[end]] == scores[order[start]]) ++end;
    // Ranks start+1..end share their average.
    const double rank = (static_cast<double>(start + 1) + static_cast<double>(end)) / 2.0;
    for (std::size_t k = start; k < end; ++k) rank_sum += labels[order[k]] * rank;
    start = end;
  }
  return (rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

DiffTensor mse_loss(const DiffTensor& preds, std::span<const double> targets) {
  check_lengths(static_cast<std::size_t>(preds.numel()), targets.size(), "mse_loss");
  Eigen::VectorXd t = Eigen::Map<const Eigen::VectorXd>(targets.data(),
                                                         static_cast<Index>(targets.size()));
  const DiffTensor diff = preds - DiffTensor(preds.shape(), std::move(t));
  return ad::mean_all(diff * diff);
}

void adam_step(std::map<std::string, DiffTensor>& params, AdamState& state,
               const TrainConfig& config) {
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (auto& [name, p] : params) {
    const Index n = p.numel();
    Eigen::VectorXd& m = state.m[name];
    Eigen::VectorXd& v = state.v[name];
    if (m.size() == 0 && v.size() == 0) {
      m = Eigen::VectorXd::Zero(n);
      v = Eigen::VectorXd::Zero(n);
    }
    if (m.size() != n || v.size() != n) {
      throw ShapeMismatch("optimizer state for '" + name + "' does not match the parameter");
    }
    if (!p.has_grad()) {
      // A zero gradient still decays the moments.
      m *= config.beta1;
      v *= config.beta2;
    } else {
      const Eigen::VectorXd& g = p.node()->grad;
      for (Index k = 0; k < n; ++k) {
        m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g[k];
        v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g[k] * g[k];
      }
    }
    Eigen::VectorXd& x = p.mutable_data();
    for (Index k = 0; k < n; ++k) {
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      x[k] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.eps);
    }
    p.zero_grad();
  }
}

RowSplit split_rows(Index num_rows, double val_fraction, std::uint64_t seed,
                    std::span<const Index> exclude) {
  std::vector<bool> skip(static_cast<std::size_t>(std::max<Index>(num_rows, 0)), false);
  for (Index r : exclude) {
    if (r >= 0 && r < num_rows) skip[r] = true;
  }
  RowSplit split;
  for (Index i = 0; i < num_rows; ++i) {
    if (skip[i]) continue;
    SplitMix64 rng(seed ^ mix64(static_cast<std::uint64_t>(i)));
    (rng.next_unit() < val_fraction ? split.val : split.train).push_back(i);
  }
  if (split.train.empty() || split.val.empty()) {
    throw EmptySplit("split of " + std::to_string(num_rows) + " rows at val_fraction " +
                     std::to_string(val_fraction) + " leaves " +
                     std::to_string(split.train.size()) + " train and " +
                     std::to_string(split.val.size()) + " validation rows");
  }
  return split;
}

std::vector<Index> rows_with_missing_target(const TensorFrame& frame) {
  std::vector<Index> rows;
  if (!frame.target) return rows;
  for (Index i = 0; i < frame.target->values.size(); ++i) {
    if (std::isnan(frame.target->values[i])) rows.push_back(i);
  }
  return rows;
}

double evaluate(const TabularModel& model, const TensorFrame& frame, TaskType task) {
  if (model.config().head != head_for(task)) {
    throw ConfigError("model head '" + std::string(to_string(model.config().head)) +
                      "' does not fit task " + std::string(to_string(task)));
  }
  const std::vector<double> all = target_values(frame);
  std::vector<Index> rows;
  for (Index i = 0; i < static_cast<Index>(all.size()); ++i) {
    if (!std::isnan(all[i])) rows.push_back(i);
  }
  const bool complete = rows.size() == all.size();
  const TensorFrame scored = complete ? frame : frame_row_select(frame, rows);
  std::vector<double> labels;
  for (Index r : rows) labels.push_back(all[r]);

  ad::NoGradGuard no_grad;
  const DiffTensor pred = model.forward(scored).prediction;
  const std::span<const double> scores(pred.data().data(), static_cast<std::size_t>(pred.numel()));
  return task == TaskType::binary_classification ? roc_auc(scores, labels)
                                                 : mae(scores, labels);
}

TrainResult train(TabularModel& model, const TensorFrame& train_frame,
                  const TensorFrame& val_frame, TaskType task, const TrainConfig& config) {
  config.validate();
  if (model.config().head != head_for(task)) {
    throw ConfigError("task " + std::string(to_string(task)) + " needs head '" +
                      std::string(to_string(head_for(task))) + "'");
  }
  const std::vector<double> labels = target_values(train_frame);
  const Index n = train_frame.num_rows;
  if (n == 0 || val_frame.num_rows == 0) throw EmptySplit("training or validation frame is empty");
  if (config.batch_size > n) {
    throw ConfigError("batch_size " + std::to_string(config.batch_size) + " exceeds the " +
                      std::to_string(n) + " training rows");
  }

  AdamState state;
  TrainResult result;
  std::map<std::string, Eigen::VectorXd> best;
  for (Index epoch = 1; epoch <= config.epochs; ++epoch) {
    const std::vector<Index> perm = shuffled(n, config.seed, epoch);
    double total = 0.0;
    Index batch_index = 0;
    for (Index start = 0; start < n; start += config.batch_size, ++batch_index) {
      const Index len = std::min(config.batch_size, n - start);
      const std::span<const Index> rows(perm.data() + start, static_cast<std::size_t>(len));
      const TensorFrame batch = frame_row_select(train_frame, rows);
      std::vector<double> y(static_cast<std::size_t>(len));
      for (Index k = 0; k < len; ++k) y[k] = labels[rows[k]];

      const DiffTensor pred = model.forward(batch).prediction;
      const DiffTensor loss = task == TaskType::binary_classification
                                  ? ad::bce_with_logits(pred, y)
                                  : mse_loss(pred, y);
      const double value = loss.item();
      if (!std::isfinite(value)) {
        ad::Tape::current().clear();
        throw NonFiniteLoss("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batch_index));
      }
      ad::backward(loss);
      adam_step(model.parameters(), state, config);
      total += value * static_cast<double>(len);
    }
    const double metric = evaluate(model, val_frame, task);
    result.history.push_back({epoch, total / static_cast<double>(n), metric});
    const bool improved = result.best_epoch == 0 ||
                          (higher_is_better(task) ? metric > result.best_metric
                                                  : metric < result.best_metric);
    if (improved) {
      result.best_epoch = epoch;
      result.best_metric = metric;
      for (const auto& [name, p] : model.parameters()) best[name] = p.data();
    }
  }
  for (auto& [name, p] : model.parameters()) p.mutable_data() = best.at(name);
  return result;
}

Pipeline train_pipeline(const TensorFrame& frame, const ModelConfig& model_config,
                        const TrainConfig& train_config) {
  train_config.validate();
  if (!frame.target) throw SchemaError("frame carries no target column");
  const TaskType task = frame.schema.task();
  ModelConfig config = model_config;
  if (config.head != head_for(task)) {
    throw ConfigError("task " + std::string(to_string(task)) + " needs head '" +
                      std::string(to_string(head_for(task))) + "'");
  }
  const std::vector<Index> missing = rows_with_missing_target(frame);
  RowSplit split = split_rows(frame.num_rows, train_config.val_fraction, train_config.seed, missing);
  const TensorFrame stats_frame = with_stats_from_rows(frame, split.train);
  const TensorFrame train_frame = frame_row_select(stats_frame, split.train);
  const TensorFrame val_frame = frame_row_select(stats_frame, split.val);
  TabularModel model(config, FrameSpec::from_frame(stats_frame), train_config.seed);
  TrainResult result = train(model, train_frame, val_frame, task, train_config);
  return {std::move(model), std::move(split), std::move(result)};
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,train_loss,val_metric\n";
  char buf[96];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g\n", static_cast<long long>(r.epoch),
                  r.train_loss, r.val_metric);
    out += buf;
  }
  return out;
}

void export_row_embeddings(const TabularModel& model, const TensorFrame& frame,
                           const std::string& path) {
  write_file(path, serialize_embeddings(model.embed_rows(frame)));
}

RowMajorMatrixXd load_row_embeddings(const std::string& path) {
  return deserialize_embeddings(read_file(path));
}

}  // namespace tabframe
