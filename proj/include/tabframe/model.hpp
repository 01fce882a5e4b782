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
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "tabframe/autodiff.hpp"
#include "tabframe/frame.hpp"

namespace tabframe {

enum class Interaction { self_attention, self_attention_positional, none };
enum class Decoder { mean_pool, attention_pool, cls, flatten_mlp };
enum class NumericalEncoder { linear, periodic };
enum class Head { logit, regression, none };

std::string_view to_string(Interaction v);
std::string_view to_string(Decoder v);
std::string_view to_string(NumericalEncoder v);
std::string_view to_string(Head v);

struct ModelConfig {
  Index channels = 32;  // F
  Index num_layers = 2;  // L
  Index num_heads = 4;
  Interaction interaction = Interaction::self_attention;
  Decoder decoder = Decoder::mean_pool;
  NumericalEncoder numerical_encoder = NumericalEncoder::linear;
  Index out_channels = 32;  // D
  Head head = Head::logit;

  /// Throws ConfigError.
  void validate() const;
  nlohmann::json to_json() const;
  /// Unspecified keys keep their defaults; unknown keys are rejected.
  static ModelConfig from_json(const nlohmann::json& j);

  bool operator==(const ModelConfig&) const = default;
};

/// The part of a frame a model is bound to: feature names per semantic type
/// and the frozen statistics the encoders normalize with.
struct FrameSpec {
  std::map<SemanticType, std::vector<std::string>> names;
  std::map<std::string, ColumnStats> stats;

  static FrameSpec from_frame(const TensorFrame& frame);
  Index num_cols() const;
  /// Column names in encoding order (ascending type, then schema order).
  std::vector<std::string> canonical_names() const;

  nlohmann::json to_json() const;
  static FrameSpec from_json(const nlohmann::json& j);

  bool operator==(const FrameSpec&) const = default;
};

struct ModelOutput {
  ad::DiffTensor z;           // [N, D]
  ad::DiffTensor prediction;  // [N]; undefined for head none
};

/// Encoder, column interaction, decoder and head. Parameters are named and
/// per-column parameters are keyed by column name, so a model built for a
/// reordered schema with the same seed carries the same values.
class TabularModel {
 public:
  /// Throws ConfigError or MissingStats.
  TabularModel(ModelConfig config, FrameSpec spec, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const FrameSpec& spec() const { return spec_; }

  std::map<std::string, ad::DiffTensor>& parameters() { return params_; }
  const std::map<std::string, ad::DiffTensor>& parameters() const { return params_; }
  /// Throws ConfigError for unknown names.
  ad::DiffTensor& param(const std::string& name);
  const ad::DiffTensor& param(const std::string& name) const;
  Index num_parameter_values() const;

  /// [N, k, F] for the columns of one semantic type (k may be 0).
  ad::DiffTensor encode_stype(const TensorFrame& frame, SemanticType s) const;
  /// [N, C, F] in canonical order.
  ad::DiffTensor encode(const TensorFrame& frame) const;
  /// Prepends the CLS column when the decoder needs it.
  ad::DiffTensor prepend_cls(const ad::DiffTensor& x) const;
  /// One pre-norm Transformer block over the column axis.
  ad::DiffTensor interaction_layer(const ad::DiffTensor& x, Index layer) const;
  /// [N, C, F] -> [N, D].
  ad::DiffTensor decode(const ad::DiffTensor& x) const;
  /// [N, D] -> [N].
  ad::DiffTensor apply_head(const ad::DiffTensor& z) const;

  ModelOutput forward(const TensorFrame& frame) const;

  /// Forward-only row embeddings as a dense matrix.
  RowMajorMatrixXd embed_rows(const TensorFrame& frame) const;

 private:
  void init_parameters(std::uint64_t seed);
  enum class ParamInit { uniform, normal };
  /// uniform: scale * U[-1, 1); normal: scale * N(0, 1).
  ad::DiffTensor& add_param(const std::string& name, ad::Shape shape, double scale,
                            std::uint64_t seed, ParamInit init);
  void check_frame(const TensorFrame& frame) const;
  ad::DiffTensor encode_column(const TensorFrame& frame, SemanticType s, Index j) const;
  ad::DiffTensor linear(const ad::DiffTensor& x, const std::string& prefix) const;
  Index num_interaction_cols() const;

  ModelConfig config_;
  FrameSpec spec_;
  std::map<std::string, ad::DiffTensor> params_;
};

}  // namespace tabframe
