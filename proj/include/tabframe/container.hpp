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

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace tabframe {

inline constexpr std::uint8_t kContainerVersion = 1;

/// Binary container shared by the frame cache, checkpoints and embedding
/// exports:
///
///   magic (4 bytes) | version (u8) | header length (u64 LE) | JSON header |
///   raw little-endian arrays
///
/// The header's "arrays" entry is the directory: name -> {dtype, offset,
/// length}, offsets relative to the start of the array section.
class ContainerWriter {
 public:
  void add(const std::string& name, std::span<const double> values);
  void add(const std::string& name, std::span<const std::int64_t> values);

  /// Serializes `header` (with the array directory merged in) and the data.
  std::string finish(std::string_view magic, nlohmann::json header) const;

 private:
  struct Entry {
    std::string dtype;
    std::size_t offset;
    std::size_t length;
  };
  std::map<std::string, Entry> directory_;
  std::string data_;
};

class ContainerReader {
 public:
  /// Throws CacheError (BadMagic, VersionMismatch, Corrupt).
  ContainerReader(std::string bytes, std::string_view magic);

  const nlohmann::json& header() const { return header_; }
  bool has(const std::string& name) const;
  std::vector<double> f64(const std::string& name) const;
  std::vector<std::int64_t> i64(const std::string& name) const;

 private:
  std::string_view section(const std::string& name, const char* dtype,
                           std::size_t& length) const;

  std::string bytes_;
  std::size_t data_start_ = 0;
  nlohmann::json header_;
};

}  // namespace tabframe
