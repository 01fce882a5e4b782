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

#include "tabframe/semantic_type.hpp"

#include "tabframe/error.hpp"

namespace tabframe {

std::string_view to_string(SemanticType stype) {
  switch (stype) {
    case SemanticType::numerical: return "numerical";
    case SemanticType::categorical: return "categorical";
    case SemanticType::multicategorical: return "multicategorical";
    case SemanticType::timestamp: return "timestamp";
    case SemanticType::text_embedded: return "text_embedded";
    case SemanticType::text_tokenized: return "text_tokenized";
    case SemanticType::embedding: return "embedding";
  }
  return "?";
}

SemanticType parse_semantic_type(std::string_view tag) {
  for (SemanticType s : kAllSemanticTypes) {
    if (to_string(s) == tag) return s;
  }
  throw SchemaError("unknown semantic type '" + std::string(tag) + "'");
}

}  // namespace tabframe
