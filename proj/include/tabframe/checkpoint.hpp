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

#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "json.hpp"
#include "tabframe/model.hpp"

namespace tabframe {

inline constexpr std::string_view kCheckpointMagic = "TFPM";
inline constexpr std::string_view kEmbeddingMagic = "TFEM";

/// Model config, frame spec, parameters and caller metadata (`extra`).
std::string serialize_checkpoint(const TabularModel& model,
                                 const nlohmann::json& extra = nlohmann::json::object());

/// Rebuilds the model from its stored config and spec, then loads every
/// parameter. A missing, surplus or differently shaped parameter raises
/// ShapeMismatch; container damage raises CacheError.
TabularModel deserialize_checkpoint(std::string bytes, nlohmann::json* extra = nullptr);

void save_checkpoint(const TabularModel& model, const std::string& path,
                     const nlohmann::json& extra = nlohmann::json::object());
TabularModel load_checkpoint(const std::string& path, nlohmann::json* extra = nullptr);

/// Row embeddings [N, D] in the shared container format.
std::string serialize_embeddings(const RowMajorMatrixXd& z);
RowMajorMatrixXd deserialize_embeddings(std::string bytes);

}  // namespace tabframe
