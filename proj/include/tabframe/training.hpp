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

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tabframe/model.hpp"
#include "tabframe/schema.hpp"

namespace tabframe {

struct TrainConfig {
  Index batch_size = 64;
  Index epochs = 20;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  double val_fraction = 0.2;

  /// Throws ConfigError.
  void validate() const;
  nlohmann::json to_json() const;
  /// Unspecified keys keep their defaults; unknown keys are rejected.
  static TrainConfig from_json(const nlohmann::json& j);

  bool operator==(const TrainConfig&) const = default;
};

// ---- metrics ---------------------------------------------------------------

double mse(std::span<const double> preds, std::span<const double> targets);
double mae(std::span<const double> preds, std::span<const double> targets);
/// Rank-sum ROC-AUC; tied scores count one half. Throws SingleClass.
double roc_auc(std::span<const double> scores, std::span<const double> labels);

/// Differentiable mean squared error of preds [N] against constant targets.
ad::DiffTensor mse_loss(const ad::DiffTensor& preds, std::span<const double> targets);

// ---- optimizer -------------------------------------------------------------

struct AdamState {
  std::map<std::string, Eigen::VectorXd> m;
  std::map<std::string, Eigen::VectorXd> v;
  std::int64_t t = 0;
};

/// One bias-corrected Adam update of every parameter, then zeroes the
/// gradients. Parameters without a gradient are treated as having zero
/// gradient. Throws ShapeMismatch when the state does not fit.
void adam_step(std::map<std::string, ad::DiffTensor>& params, AdamState& state,
               const TrainConfig& config);

// ---- training --------------------------------------------------------------

struct RowSplit {
  std::vector<Index> train;
  std::vector<Index> val;
};

/// Deterministic hash split: row i goes to validation when a seeded hash of
/// i falls below `val_fraction`. Rows listed in `exclude` are dropped.
/// Throws EmptySplit.
RowSplit split_rows(Index num_rows, double val_fraction, std::uint64_t seed,
                    std::span<const Index> exclude = {});

/// Rows whose target is missing.
std::vector<Index> rows_with_missing_target(const TensorFrame& frame);

struct EpochRecord {
  Index epoch = 0;
  double train_loss = 0.0;
  double val_metric = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  Index best_epoch = 0;
  double best_metric = 0.0;
};

/// ROC-AUC (binary) or MAE (regression) of the model's predictions.
double evaluate(const TabularModel& model, const TensorFrame& frame, TaskType task);

/// Trains on `train_frame`, scoring `val_frame` after every epoch, and
/// leaves the model holding the best epoch's parameters.
TrainResult train(TabularModel& model, const TensorFrame& train_frame,
                  const TensorFrame& val_frame, TaskType task, const TrainConfig& config);

/// Split, train-split statistics, model construction and training.
struct Pipeline {
  TabularModel model;
  RowSplit split;
  TrainResult result;
};
Pipeline train_pipeline(const TensorFrame& frame, const ModelConfig& model_config,
                        const TrainConfig& train_config);

/// `epoch,train_loss,val_metric` with round-trip precision.
std::string history_csv(const std::vector<EpochRecord>& history);

/// Decoder output for every row, in frame order, written in the container
/// format.
void export_row_embeddings(const TabularModel& model, const TensorFrame& frame,
                           const std::string& path);
RowMajorMatrixXd load_row_embeddings(const std::string& path);

}  // namespace tabframe
