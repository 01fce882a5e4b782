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

#include "tabframe/embed.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <set>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "tabframe/error.hpp"
#include "tabframe/hash.hpp"

namespace tabframe {

using nlohmann::json;

Eigen::VectorXd hash_embed(std::string_view text, Index dim) {
  if (dim < 1) throw ConfigError("embedding dim must be >= 1");
  SplitMix64 rng(fnv1a64(text));
  Eigen::VectorXd v(dim);
  double sq = 0.0;
  for (Index k = 0; k < dim; ++k) {
    v[k] = rng.next_signed_unit();
    sq += v[k] * v[k];
  }
  const double norm = std::sqrt(sq);
  if (norm > 0.0) {
    for (Index k = 0; k < dim; ++k) v[k] /= norm;
  }
  return v;
}

std::string EmbedderSpec::identifier() const {
  std::ostringstream ss;
  if (kind == Kind::hash_stub) {
    ss << "hash_stub:" << dim;
  } else {
    ss << "http:" << endpoint << ":" << model << ":" << dim;
  }
  return ss.str();
}

void EmbedderSpec::validate() const {
  if (dim < 1) throw ConfigError("embedder dim must be >= 1");
  if (batch_size < 1) throw ConfigError("embedder batch_size must be >= 1");
  if (kind == Kind::http && endpoint.empty()) {
    throw ConfigError("http embedder requires an endpoint");
  }
  if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
}

HashStubEmbedder::HashStubEmbedder(Index dim) : dim_(dim) {
  if (dim < 1) throw ConfigError("embedder dim must be >= 1");
}

std::string HashStubEmbedder::identifier() const {
  return "hash_stub:" + std::to_string(dim_);
}

RowMajorMatrixXd HashStubEmbedder::embed(TextList texts) {
  RowMajorMatrixXd out = RowMajorMatrixXd::Zero(static_cast<Index>(texts.size()), dim_);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (texts[i]) out.row(static_cast<Index>(i)) = hash_embed(*texts[i], dim_).transpose();
  }
  return out;
}

HttpEmbedder::HttpEmbedder(EmbedderSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  const auto& url = spec_.endpoint;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("endpoint must start with http:// or https://");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!path_.empty() && path_.back() == '/') path_.pop_back();
  path_ += "/embeddings";
}

RowMajorMatrixXd HttpEmbedder::embed(TextList texts) {
  RowMajorMatrixXd out = RowMajorMatrixXd::Zero(static_cast<Index>(texts.size()), spec_.dim);
  std::vector<Index> rows;
  std::vector<std::string> batch;
  auto flush = [&] {
    if (batch.empty()) return;
    RowMajorMatrixXd got = request(batch);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      out.row(rows[k]) = got.row(static_cast<Index>(k));
    }
    rows.clear();
    batch.clear();
  };
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (!texts[i]) continue;
    rows.push_back(static_cast<Index>(i));
    batch.push_back(*texts[i]);
    if (static_cast<Index>(batch.size()) == spec_.batch_size) flush();
  }
  flush();
  return out;
}

RowMajorMatrixXd HttpEmbedder::request(const std::vector<std::string>& texts) {
  httplib::Client client(scheme_host_port_);
  const auto seconds = std::chrono::duration<double>(spec_.timeout_seconds);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(seconds);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  httplib::Headers headers;
  if (!spec_.api_key_env.empty()) {
    const char* key = std::getenv(spec_.api_key_env.c_str());
    if (key == nullptr) {
      throw ConfigError("environment variable '" + spec_.api_key_env +
                        "' is not set");
    }
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  const std::string body = json{{"model", spec_.model}, {"input", texts}}.dump();

  for (int attempt = 0;; ++attempt) {
    auto res = client.Post(path_, headers, body, "application/json");
    if (!res) {
      const auto err = res.error();
      if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
        throw Timeout("embedding request to " + spec_.endpoint + " timed out");
      }
      throw IoError("embedding request to " + spec_.endpoint +
                    " failed: " + httplib::to_string(err));
    }
    const int status = res->status;
    if ((status == 429 || status >= 500) && attempt < spec_.max_retries) {
      const double wait = spec_.backoff_seconds * std::pow(2.0, attempt);
      std::this_thread::sleep_for(std::chrono::duration<double>(wait));
      continue;
    }
    if (status != 200) throw HttpError(status, res->body.substr(0, 200));

    json doc;
    try {
      doc = json::parse(res->body);
    } catch (const json::exception& e) {
      throw HttpError(status, std::string("malformed JSON: ") + e.what());
    }
    if (!doc.contains("data") || !doc["data"].is_array() ||
        doc["data"].size() != texts.size()) {
      throw HttpError(status, "response 'data' does not match request size");
    }
    RowMajorMatrixXd out(static_cast<Index>(texts.size()), spec_.dim);
    std::set<Index> seen;
    for (const auto& item : doc["data"]) {
      if (!item.contains("index") || !item.contains("embedding") ||
          !item["embedding"].is_array()) {
        throw HttpError(status, "response item lacks 'index' or 'embedding'");
      }
      const Index idx = item["index"].get<Index>();
      if (idx < 0 || idx >= static_cast<Index>(texts.size()) ||
          !seen.insert(idx).second) {
        throw HttpError(status, "bad or duplicate response index " + std::to_string(idx));
      }
      const auto& emb = item["embedding"];
      if (static_cast<Index>(emb.size()) != spec_.dim) {
        throw DimensionMismatch("endpoint returned " + std::to_string(emb.size()) +
                                "-dim embeddings, expected " +
                                std::to_string(spec_.dim));
      }
      for (Index k = 0; k < spec_.dim; ++k) out(idx, k) = emb[k].get<double>();
    }
    return out;
  }
}

std::shared_ptr<TextEmbedder> make_embedder(const EmbedderSpec& spec) {
  spec.validate();
  if (spec.kind == EmbedderSpec::Kind::hash_stub) {
    return std::make_shared<HashStubEmbedder>(spec.dim);
  }
  return std::make_shared<HttpEmbedder>(spec);
}

RowMajorMatrixXd embed_batch(const EmbedderSpec& spec, TextList texts) {
  return make_embedder(spec)->embed(texts);
}

namespace {

EmbedderSpec spec_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("embedder spec must be an object");
  EmbedderSpec spec;
  for (const auto& [key, value] : j.items()) {
    if (key == "kind") {
      const auto kind = value.get<std::string>();
      if (kind == "hash_stub") {
        spec.kind = EmbedderSpec::Kind::hash_stub;
      } else if (kind == "http") {
        spec.kind = EmbedderSpec::Kind::http;
      } else {
        throw ConfigError("unknown embedder kind '" + kind + "'");
      }
    } else if (key == "dim") {
      spec.dim = value.get<Index>();
    } else if (key == "batch_size") {
      spec.batch_size = value.get<Index>();
    } else if (key == "endpoint") {
      spec.endpoint = value.get<std::string>();
    } else if (key == "model") {
      spec.model = value.get<std::string>();
    } else if (key == "api_key_env") {
      spec.api_key_env = value.get<std::string>();
    } else if (key == "timeout_seconds") {
      spec.timeout_seconds = value.get<double>();
    } else if (key == "max_retries") {
      spec.max_retries = value.get<int>();
    } else if (key == "backoff_seconds") {
      spec.backoff_seconds = value.get<double>();
    } else {
      throw ConfigError("unknown embedder key '" + key + "'");
    }
  }
  spec.validate();
  return spec;
}

}  // namespace

EmbedConfig EmbedConfig::from_json(std::string_view text) {
  EmbedConfig config;
  try {
    const json doc = json::parse(text);
    if (!doc.is_object()) throw ConfigError("embed config must be an object");
    for (const auto& [key, value] : doc.items()) {
      if (key == "default") {
        config.default_spec = spec_from_json(value);
      } else if (key == "columns") {
        for (const auto& [name, spec] : value.items()) {
          config.columns.emplace(name, spec_from_json(spec));
        }
      } else {
        throw ConfigError("unknown embed config key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid embed config: ") + e.what());
  }
  return config;
}

EmbedderRegistry::EmbedderRegistry(const EmbedConfig& config,
                                   const EmbedderFactory& factory) {
  if (config.default_spec) default_ = factory(*config.default_spec);
  for (const auto& [name, spec] : config.columns) columns_[name] = factory(spec);
}

void EmbedderRegistry::set_default(std::shared_ptr<TextEmbedder> embedder) {
  default_ = std::move(embedder);
}

void EmbedderRegistry::set_column(const std::string& column,
                                  std::shared_ptr<TextEmbedder> embedder) {
  columns_[column] = std::move(embedder);
}

TextEmbedder* EmbedderRegistry::find(const std::string& column) const {
  auto it = columns_.find(column);
  if (it != columns_.end()) return it->second.get();
  return default_.get();
}

std::string EmbedderRegistry::identifier(std::span<const std::string> columns) const {
  std::string out;
  for (const auto& c : columns) {
    const auto* e = find(c);
    out += c + "=" + (e ? e->identifier() : std::string("none")) + ";";
  }
  return out;
}

}  // namespace tabframe
