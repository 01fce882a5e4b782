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

#include "tabframe/checkpoint.hpp"

#include "tabframe/container.hpp"
#include "tabframe/error.hpp"
#include "tabframe/table.hpp"

namespace tabframe {

using nlohmann::json;

namespace {

const std::string kParamPrefix = "param.";

}  // namespace

std::string serialize_checkpoint(const TabularModel& model, const json& extra) {
  ContainerWriter writer;
  json params = json::object();
  for (const auto& [name, p] : model.parameters()) {
    params[name] = p.shape();
    writer.add(kParamPrefix + name,
               std::span<const double>(p.data().data(), static_cast<std::size_t>(p.numel())));
  }
  json header = {{"model_config", model.config().to_json()},
                 {"frame_spec", model.spec().to_json()},
                 {"parameters", params},
                 {"extra", extra}};
  return writer.finish(kCheckpointMagic, std::move(header));
}

TabularModel deserialize_checkpoint(std::string bytes, json* extra) {
  ContainerReader reader(std::move(bytes), kCheckpointMagic);
  const json& h = reader.header();
  std::optional<TabularModel> model;
  json stored;
  try {
    model.emplace(ModelConfig::from_json(h.at("model_config")),
                  FrameSpec::from_json(h.at("frame_spec")), 0);
    stored = h.at("parameters");
    if (extra) *extra = h.at("extra");
  } catch (const json::exception& e) {
    throw CacheError(CacheError::Kind::Corrupt, std::string("section 'header': ") + e.what());
  }
  if (!stored.is_object()) {
    throw CacheError(CacheError::Kind::Corrupt, "section 'parameters': not an object");
  }
  if (stored.size() != model->parameters().size()) {
    throw ShapeMismatch("checkpoint holds " + std::to_string(stored.size()) +
                        " parameters, model config implies " +
                        std::to_string(model->parameters().size()));
  }
  for (auto& [name, p] : model->parameters()) {
    if (!stored.contains(name)) {
      throw ShapeMismatch("checkpoint lacks parameter '" + name + "'");
    }
    ad::Shape shape;
    try {
      shape = stored[name].get<ad::Shape>();
    } catch (const json::exception& e) {
      throw CacheError(CacheError::Kind::Corrupt, "section 'parameters': " + name);
    }
    if (shape != p.shape()) {
      throw ShapeMismatch("parameter '" + name + "' has shape " + ad::shape_str(shape) +
                          ", model config implies " + ad::shape_str(p.shape()));
    }
    const std::vector<double> values = reader.f64(kParamPrefix + name);
    if (static_cast<Index>(values.size()) != p.numel()) {
      throw CacheError(CacheError::Kind::Corrupt, "section '" + kParamPrefix + name + "'");
    }
    p.mutable_data() = Eigen::Map<const Eigen::VectorXd>(values.data(), p.numel());
  }
  return std::move(*model);
}

void save_checkpoint(const TabularModel& model, const std::string& path, const json& extra) {
  write_file(path, serialize_checkpoint(model, extra));
}

TabularModel load_checkpoint(const std::string& path, json* extra) {
  return deserialize_checkpoint(read_file(path), extra);
}

std::string serialize_embeddings(const RowMajorMatrixXd& z) {
  ContainerWriter writer;
  writer.add("z", std::span<const double>(z.data(), static_cast<std::size_t>(z.size())));
  return writer.finish(kEmbeddingMagic, {{"num_rows", z.rows()}, {"out_channels", z.cols()}});
}

RowMajorMatrixXd deserialize_embeddings(std::string bytes) {
  ContainerReader reader(std::move(bytes), kEmbeddingMagic);
  Index rows = 0, cols = 0;
  try {
    rows = reader.header().at("num_rows").get<Index>();
    cols = reader.header().at("out_channels").get<Index>();
  } catch (const json::exception& e) {
    throw CacheError(CacheError::Kind::Corrupt, std::string("section 'header': ") + e.what());
  }
  const std::vector<double> values = reader.f64("z");
  if (rows < 0 || cols < 0 || static_cast<Index>(values.size()) != rows * cols) {
    throw CacheError(CacheError::Kind::Corrupt, "section 'z'");
  }
  return Eigen::Map<const RowMajorMatrixXd>(values.data(), rows, cols);
}

}  // namespace tabframe
