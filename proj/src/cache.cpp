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

#include "tabframe/cache.hpp"

#include <cstdio>

#include "tabframe/container.hpp"
#include "tabframe/error.hpp"
#include "tabframe/hash.hpp"
#include "tabframe/table.hpp"

namespace tabframe {

using nlohmann::json;

json summary_to_json(const NumericSummary& s) {
  return {{"mean", s.mean},
          {"std", s.std},
          {"count_missing", s.count_missing},
          {"all_missing", s.all_missing},
          {"quantiles", s.quantiles}};
}

NumericSummary summary_from_json(const json& j) {
  NumericSummary s;
  s.mean = j.at("mean").get<double>();
  s.std = j.at("std").get<double>();
  s.count_missing = j.at("count_missing").get<Index>();
  s.all_missing = j.at("all_missing").get<bool>();
  s.quantiles = j.at("quantiles").get<std::vector<double>>();
  return s;
}

json stats_to_json(const ColumnStats& s) {
  json counts = json::array();
  for (const auto& [k, v] : s.category_count) counts.push_back({k, v});
  json components = json::array();
  for (const auto& c : s.components) components.push_back(summary_to_json(c));
  return {{"stype", std::string(to_string(s.stype))},
          {"numeric", summary_to_json(s.numeric)},
          {"components", components},
          {"category_count", counts},
          {"num_categories", s.num_categories},
          {"embedding_dim", s.embedding_dim}};
}

ColumnStats stats_from_json(const json& j) {
  ColumnStats s;
  s.stype = parse_semantic_type(j.at("stype").get<std::string>());
  s.numeric = summary_from_json(j.at("numeric"));
  for (const auto& c : j.at("components")) s.components.push_back(summary_from_json(c));
  for (const auto& kv : j.at("category_count")) {
    s.category_count[kv.at(0).get<Index>()] = kv.at(1).get<Index>();
  }
  s.num_categories = j.at("num_categories").get<Index>();
  s.embedding_dim = j.at("embedding_dim").get<Index>();
  return s;
}

namespace {

template <typename Matrix>
std::span<const typename Matrix::Scalar> flat(const Matrix& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

}  // namespace

std::string cache_key(std::string_view table_bytes, std::string_view schema_bytes,
                      std::string_view embedder_id) {
  // Length-prefix each part so that boundaries cannot be shifted.
  std::uint64_t h = kFnvOffsetBasis;
  for (std::string_view part : {table_bytes, schema_bytes, embedder_id}) {
    h = fnv1a64(std::to_string(part.size()) + ":", h);
    h = fnv1a64(part, h);
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string serialize_frame(const TensorFrame& frame, const std::string& key) {
  ContainerWriter writer;
  json header;
  header["key"] = key;
  header["num_rows"] = frame.num_rows;
  header["schema"] = json::parse(frame.schema.to_json());
  json columns = json::array();
  for (const auto& c : frame.columns) {
    columns.push_back({{"name", c.name}, {"stype", std::string(to_string(c.stype))}});
  }
  header["columns"] = columns;
  json stats = json::object();
  for (const auto& [name, s] : frame.stats) stats[name] = stats_to_json(s);
  header["stats"] = stats;
  json maps = json::object();
  for (const auto& [name, m] : frame.category_maps) maps[name] = m.categories();
  header["category_maps"] = maps;

  json blocks = json::array();
  for (const auto& [stype, block] : frame.blocks) {
    const std::string prefix(to_string(stype));
    json entry = {{"stype", prefix}, {"names", frame.names(stype)}};
    std::visit(
        [&](const auto& b) {
          using T = std::decay_t<decltype(b)>;
          if constexpr (std::is_same_v<T, NestedBlock>) {
            entry["rows"] = b.num_rows();
            entry["cols"] = b.num_cols();
            writer.add(prefix + ".val", std::span<const std::int64_t>(b.val()));
            writer.add(prefix + ".ptr", std::span<const std::int64_t>(b.ptr()));
          } else if constexpr (std::is_same_v<T, MultiEmbeddingTensor>) {
            entry["rows"] = b.num_rows();
            entry["dims"] = b.dims();
            writer.add(prefix + ".values", flat(b.values()));
          } else {
            entry["rows"] = b.values.rows();
            entry["cols"] = b.values.cols();
            writer.add(prefix + ".values", flat(b.values));
          }
        },
        block);
    blocks.push_back(entry);
  }
  header["blocks"] = blocks;
  if (frame.target) {
    header["target"] = {{"name", frame.target->name}, {"classes", frame.target->classes}};
    writer.add("target.values", flat(frame.target->values));
  } else {
    header["target"] = nullptr;
  }
  return writer.finish(kFrameMagic, std::move(header));
}

TensorFrame deserialize_frame(std::string bytes, const std::optional<std::string>& expected_key) {
  ContainerReader reader(std::move(bytes), kFrameMagic);
  const json& h = reader.header();
  std::string section = "header";
  try {
    if (expected_key && h.at("key").get<std::string>() != *expected_key) {
      throw CacheError(CacheError::Kind::KeyMismatch,
                       "cache was built from different inputs");
    }
    TensorFrame frame;
    frame.num_rows = h.at("num_rows").get<Index>();
    frame.schema = Schema::from_json(h.at("schema").dump());
    for (const auto& c : h.at("columns")) {
      frame.columns.push_back({c.at("name").get<std::string>(),
                               parse_semantic_type(c.at("stype").get<std::string>())});
    }
    for (const auto& [name, s] : h.at("stats").items()) frame.stats[name] = stats_from_json(s);
    for (const auto& [name, m] : h.at("category_maps").items()) {
      frame.category_maps[name] = CategoryMap::from_categories(m.get<std::vector<std::string>>());
    }
    for (const auto& entry : h.at("blocks")) {
      const auto prefix = entry.at("stype").get<std::string>();
      section = prefix;
      const SemanticType stype = parse_semantic_type(prefix);
      frame.column_names_by_stype[stype] = entry.at("names").get<std::vector<std::string>>();
      const Index rows = entry.at("rows").get<Index>();
      ColumnBlock block;
      if (is_nested(stype)) {
        block = NestedBlock(rows, entry.at("cols").get<Index>(), reader.i64(prefix + ".val"),
                            reader.i64(prefix + ".ptr"));
      } else if (is_embedded(stype)) {
        auto dims = entry.at("dims").get<std::vector<Index>>();
        auto data = reader.f64(prefix + ".values");
        Index width = 0;
        for (Index d : dims) width += d;
        if (static_cast<Index>(data.size()) != rows * width) throw std::runtime_error("size");
        block = MultiEmbeddingTensor(std::move(dims),
                                     Eigen::Map<RowMajorMatrixXd>(data.data(), rows, width));
      } else {
        const Index cols = entry.at("cols").get<Index>();
        if (stype == SemanticType::numerical) {
          auto data = reader.f64(prefix + ".values");
          if (static_cast<Index>(data.size()) != rows * cols) throw std::runtime_error("size");
          block = DenseFloatBlock{Eigen::Map<RowMajorMatrixXd>(data.data(), rows, cols)};
        } else {
          auto data = reader.i64(prefix + ".values");
          if (static_cast<Index>(data.size()) != rows * cols) throw std::runtime_error("size");
          RowMajorMatrixXi m = Eigen::Map<RowMajorMatrixXi>(data.data(), rows, cols);
          if (stype == SemanticType::timestamp) {
            block = TimestampBlock{std::move(m)};
          } else {
            block = DenseIntBlock{std::move(m)};
          }
        }
      }
      frame.blocks.emplace(stype, std::move(block));
    }
    section = "target";
    if (!h.at("target").is_null()) {
      auto values = reader.f64("target.values");
      TargetColumn t{h["target"].at("name").get<std::string>(),
                     Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Index>(values.size())),
                     h["target"].at("classes").get<std::vector<std::string>>()};
      frame.target = std::move(t);
    }
    section = "frame";
    if (auto v = frame_validate(frame)) throw std::runtime_error(v->message);
    return frame;
  } catch (const CacheError&) {
    throw;
  } catch (const std::exception& e) {
    throw CacheError(CacheError::Kind::Corrupt, "section '" + section + "': " + e.what());
  }
}

void cache_save(const TensorFrame& frame, const std::string& path, const std::string& key) {
  write_file(path, serialize_frame(frame, key));
}

TensorFrame cache_load(const std::string& path, const std::optional<std::string>& expected_key) {
  return deserialize_frame(read_file(path), expected_key);
}

}  // namespace tabframe
