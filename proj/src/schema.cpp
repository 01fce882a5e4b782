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

#include "tabframe/schema.hpp"

#include <set>

#include "json.hpp"
#include "tabframe/error.hpp"

namespace tabframe {

using nlohmann::json;

std::string_view to_string(TaskType task) {
  return task == TaskType::regression ? "regression" : "binary_classification";
}

TaskType parse_task_type(std::string_view tag) {
  if (tag == "binary_classification") return TaskType::binary_classification;
  if (tag == "regression") return TaskType::regression;
  throw SchemaError("unknown task '" + std::string(tag) + "'");
}

Schema::Schema(std::vector<ColumnSpec> columns, std::string target,
               TaskType task)
    : columns_(std::move(columns)), target_(std::move(target)), task_(task) {
  std::set<std::string> seen;
  for (const auto& c : columns_) {
    if (c.name.empty()) throw SchemaError("empty column name");
    if (!seen.insert(c.name).second) {
      throw SchemaError("duplicate column name '" + c.name + "'");
    }
  }
  if (!seen.contains(target_)) {
    throw SchemaError("target '" + target_ + "' is not a schema column");
  }
}

std::vector<ColumnSpec> Schema::feature_columns() const {
  std::vector<ColumnSpec> out;
  for (const auto& c : columns_) {
    if (c.name != target_) out.push_back(c);
  }
  return out;
}

std::optional<ColumnSpec> Schema::find(std::string_view name) const {
  for (const auto& c : columns_) {
    if (c.name == name) return c;
  }
  return std::nullopt;
}

std::string Schema::to_json() const {
  json cols = json::array();
  for (const auto& c : columns_) {
    cols.push_back({{"name", c.name}, {"stype", std::string(to_string(c.stype))}});
  }
  json doc = {{"columns", cols},
              {"target", target_},
              {"task", std::string(to_string(task_))}};
  return doc.dump(2) + "\n";
}

Schema Schema::from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("schema is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw SchemaError("schema must be a JSON object");
  for (const auto& [key, _] : doc.items()) {
    if (key != "columns" && key != "target" && key != "task") {
      throw SchemaError("unknown schema key '" + key + "'");
    }
  }
  if (!doc.contains("columns") || !doc["columns"].is_array() ||
      !doc.contains("target") || !doc["target"].is_string() ||
      !doc.contains("task") || !doc["task"].is_string()) {
    throw SchemaError("schema requires 'columns' (array), 'target' and 'task'");
  }
  std::vector<ColumnSpec> columns;
  for (const auto& c : doc["columns"]) {
    if (!c.is_object()) throw SchemaError("column entries must be objects");
    for (const auto& [key, _] : c.items()) {
      if (key != "name" && key != "stype") {
        throw SchemaError("unknown column key '" + key + "'");
      }
    }
    if (!c.contains("name") || !c["name"].is_string() || !c.contains("stype") ||
        !c["stype"].is_string()) {
      throw SchemaError("column entries need string 'name' and 'stype'");
    }
    columns.push_back({c["name"].get<std::string>(),
                       parse_semantic_type(c["stype"].get<std::string>())});
  }
  return Schema(std::move(columns), doc["target"].get<std::string>(),
                parse_task_type(doc["task"].get<std::string>()));
}

}  // namespace tabframe
