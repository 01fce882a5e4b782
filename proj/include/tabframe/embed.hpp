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

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "tabframe/ragged.hpp"

namespace tabframe {

/// Deterministic unit vector for `text`: seed the splitmix64 stream with the
/// FNV-1a-64 hash of the UTF-8 bytes, draw `dim` values in [-1, 1), then
/// L2-normalize.
Eigen::VectorXd hash_embed(std::string_view text, Index dim);

struct EmbedderSpec {
  enum class Kind { hash_stub, http };

  Kind kind = Kind::hash_stub;
  Index dim = 16;
  Index batch_size = 64;
  // http only
  std::string endpoint;
  std::string model = "text-embedding-3-small";
  std::string api_key_env;  // name of the environment variable holding the key
  double timeout_seconds = 30.0;
  int max_retries = 3;
  double backoff_seconds = 0.5;

  /// Stable description used in cache keys (never contains credentials).
  std::string identifier() const;
  /// Throws ConfigError on dim < 1, batch_size < 1 or a missing endpoint.
  void validate() const;
};

using TextList = std::span<const std::optional<std::string>>;

/// Maps a list of texts to a [B, dim] matrix, one row per input in order.
/// Missing texts produce all-zero rows.
class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;
  virtual Index dim() const = 0;
  virtual std::string identifier() const = 0;
  virtual RowMajorMatrixXd embed(TextList texts) = 0;
};

class HashStubEmbedder final : public TextEmbedder {
 public:
  explicit HashStubEmbedder(Index dim);
  Index dim() const override { return dim_; }
  std::string identifier() const override;
  RowMajorMatrixXd embed(TextList texts) override;

 private:
  Index dim_;
};

/// Client for an OpenAI-compatible `POST {endpoint}/embeddings` API.
/// Retries the same request on 429/5xx with exponential backoff and
/// reassembles rows by the response `index` field.
class HttpEmbedder final : public TextEmbedder {
 public:
  explicit HttpEmbedder(EmbedderSpec spec);
  Index dim() const override { return spec_.dim; }
  std::string identifier() const override { return spec_.identifier(); }
  RowMajorMatrixXd embed(TextList texts) override;

 private:
  RowMajorMatrixXd request(const std::vector<std::string>& texts);

  EmbedderSpec spec_;
  std::string scheme_host_port_;
  std::string path_;
};

using EmbedderFactory =
    std::function<std::shared_ptr<TextEmbedder>(const EmbedderSpec&)>;

std::shared_ptr<TextEmbedder> make_embedder(const EmbedderSpec& spec);

/// embed_batch with a freshly built client for `spec`.
RowMajorMatrixXd embed_batch(const EmbedderSpec& spec, TextList texts);

/// Default embedder plus per-column overrides.
struct EmbedConfig {
  std::optional<EmbedderSpec> default_spec;
  std::map<std::string, EmbedderSpec> columns;

  /// {"default": {...}, "columns": {"name": {...}}}; unknown keys rejected.
  static EmbedConfig from_json(std::string_view text);
};

class EmbedderRegistry {
 public:
  EmbedderRegistry() = default;
  EmbedderRegistry(const EmbedConfig& config,
                   const EmbedderFactory& factory = make_embedder);

  void set_default(std::shared_ptr<TextEmbedder> embedder);
  void set_column(const std::string& column,
                  std::shared_ptr<TextEmbedder> embedder);

  /// Embedder for `column`, or nullptr.
  TextEmbedder* find(const std::string& column) const;
  /// Identifier of the embedder used for each listed column.
  std::string identifier(std::span<const std::string> columns) const;

 private:
  std::shared_ptr<TextEmbedder> default_;
  std::map<std::string, std::shared_ptr<TextEmbedder>> columns_;
};

}  // namespace tabframe
