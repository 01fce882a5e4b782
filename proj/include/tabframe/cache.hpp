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

#include "json.hpp"
#include "tabframe/frame.hpp"

namespace tabframe {

inline constexpr std::string_view kFrameMagic = "TFRM";

nlohmann::json summary_to_json(const NumericSummary& s);
NumericSummary summary_from_json(const nlohmann::json& j);
nlohmann::json stats_to_json(const ColumnStats& s);
ColumnStats stats_from_json(const nlohmann::json& j);

/// Hex content hash of the inputs that determine a materialized frame.
std::string cache_key(std::string_view table_bytes, std::string_view schema_bytes,
                      std::string_view embedder_id);

std::string serialize_frame(const TensorFrame& frame, const std::string& key = "");
/// Throws CacheError; KeyMismatch when `expected_key` differs from the
/// stored key.
TensorFrame deserialize_frame(std::string bytes,
                              const std::optional<std::string>& expected_key = std::nullopt);

void cache_save(const TensorFrame& frame, const std::string& path,
                const std::string& key = "");
TensorFrame cache_load(const std::string& path,
                       const std::optional<std::string>& expected_key = std::nullopt);

}  // namespace tabframe
