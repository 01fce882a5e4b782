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

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tabframe/semantic_type.hpp"

namespace tabframe {

enum class TaskType { binary_classification, regression };

std::string_view to_string(TaskType task);
TaskType parse_task_type(std::string_view tag);

struct ColumnSpec {
  std::string name;
  SemanticType stype;

  bool operator==(const ColumnSpec&) const = default;
};

/// Ordered column list plus prediction target. Column order defines the
/// global feature index used throughout the library.
class Schema {
 public:
  Schema() = default;
  /// Validates uniqueness of names and that the target exists.
  Schema(std::vector<ColumnSpec> columns, std::string target, TaskType task);

  const std::vector<ColumnSpec>& columns() const { return columns_; }
  const std::string& target() const { return target_; }
  TaskType task() const { return task_; }

  /// Columns other than the target, in schema order.
  std::vector<ColumnSpec> feature_columns() const;
  std::optional<ColumnSpec> find(std::string_view name) const;

  std::string to_json() const;
  /// Rejects unknown keys, unknown semantic types and unknown tasks.
  static Schema from_json(std::string_view text);

  bool operator==(const Schema&) const = default;

 private:
  std::vector<ColumnSpec> columns_;
  std::string target_;
  TaskType task_ = TaskType::binary_classification;
};

}  // namespace tabframe
