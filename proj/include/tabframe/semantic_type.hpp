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

#include <array>
#include <string>
#include <string_view>

namespace tabframe {

// Enumerator order is the canonical concatenation order of per-type column
// embeddings.
enum class SemanticType : int {
  numerical = 0,
  categorical = 1,
  multicategorical = 2,
  timestamp = 3,
  text_embedded = 4,
  text_tokenized = 5,
  embedding = 6,
};

inline constexpr std::array<SemanticType, 7> kAllSemanticTypes = {
    SemanticType::numerical,     SemanticType::categorical,
    SemanticType::multicategorical, SemanticType::timestamp,
    SemanticType::text_embedded, SemanticType::text_tokenized,
    SemanticType::embedding,
};

std::string_view to_string(SemanticType stype);

/// Throws SchemaError for unknown tags.
SemanticType parse_semantic_type(std::string_view tag);

/// Types stored as MultiNestedTensor blocks.
constexpr bool is_nested(SemanticType s) {
  return s == SemanticType::multicategorical ||
         s == SemanticType::text_tokenized;
}

/// Types stored as MultiEmbeddingTensor blocks.
constexpr bool is_embedded(SemanticType s) {
  return s == SemanticType::text_embedded || s == SemanticType::embedding;
}

}  // namespace tabframe
