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

#include "tabframe/container.hpp"

#include <bit>
#include <cstring>

#include "tabframe/error.hpp"

namespace tabframe {

using nlohmann::json;

namespace {

template <typename T>
void append_le(std::string& out, T value) {
  auto bits = std::bit_cast<std::uint64_t>(value);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
}

template <typename T>
T read_le(const char* p) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[b])) << (8 * b);
  }
  return std::bit_cast<T>(bits);
}

CacheError corrupt(const std::string& section) {
  return CacheError(CacheError::Kind::Corrupt, "section '" + section + "'");
}

}  // namespace

void ContainerWriter::add(const std::string& name, std::span<const double> values) {
  directory_[name] = {"f64", data_.size(), values.size()};
  for (double v : values) append_le(data_, v);
}

void ContainerWriter::add(const std::string& name, std::span<const std::int64_t> values) {
  directory_[name] = {"i64", data_.size(), values.size()};
  for (auto v : values) append_le(data_, v);
}

std::string ContainerWriter::finish(std::string_view magic, json header) const {
  json arrays = json::object();
  for (const auto& [name, e] : directory_) {
    arrays[name] = {{"dtype", e.dtype}, {"offset", e.offset}, {"length", e.length}};
  }
  header["arrays"] = std::move(arrays);
  const std::string text = header.dump();
  std::string out(magic);
  out.push_back(static_cast<char>(kContainerVersion));
  append_le(out, static_cast<std::uint64_t>(text.size()));
  out += text;
  out += data_;
  return out;
}

ContainerReader::ContainerReader(std::string bytes, std::string_view magic)
    : bytes_(std::move(bytes)) {
  const std::string_view head = std::string_view(bytes_).substr(0, magic.size());
  // A proper prefix of the magic is a truncated file, not a foreign one.
  if (head.size() < magic.size() && magic.substr(0, head.size()) == head) throw corrupt("magic");
  if (head != magic) {
    throw CacheError(CacheError::Kind::BadMagic,
                     "expected magic '" + std::string(magic) + "'");
  }
  if (bytes_.size() < magic.size() + 1) throw corrupt("version");
  const auto version = static_cast<std::uint8_t>(bytes_[magic.size()]);
  if (version != kContainerVersion) {
    throw CacheError(CacheError::Kind::VersionMismatch,
                     "file version " + std::to_string(version) + ", reader version " +
                         std::to_string(kContainerVersion));
  }
  const std::size_t len_pos = magic.size() + 1;
  if (bytes_.size() < len_pos + 8) throw corrupt("header length");
  const auto header_len = read_le<std::uint64_t>(bytes_.data() + len_pos);
  if (header_len > bytes_.size() - len_pos - 8) throw corrupt("header");
  try {
    header_ = json::parse(std::string_view(bytes_).substr(len_pos + 8, header_len));
  } catch (const json::exception&) {
    throw corrupt("header");
  }
  if (!header_.is_object() || !header_.contains("arrays") || !header_["arrays"].is_object()) {
    throw corrupt("header");
  }
  data_start_ = len_pos + 8 + header_len;
  const std::size_t data_size = bytes_.size() - data_start_;
  std::size_t expected_end = 0;
  for (const auto& [name, e] : header_["arrays"].items()) {
    if (!e.contains("offset") || !e.contains("length") || !e.contains("dtype")) throw corrupt(name);
    const auto offset = e["offset"].get<std::size_t>();
    const auto length = e["length"].get<std::size_t>();
    if (offset > data_size || length > (data_size - offset) / 8) throw corrupt(name);
    expected_end = std::max(expected_end, offset + 8 * length);
  }
  if (expected_end != data_size) throw corrupt("arrays");
}

bool ContainerReader::has(const std::string& name) const {
  return header_["arrays"].contains(name);
}

std::string_view ContainerReader::section(const std::string& name, const char* dtype,
                                          std::size_t& length) const {
  const auto& arrays = header_["arrays"];
  if (!arrays.contains(name) || arrays[name]["dtype"] != dtype) throw corrupt(name);
  const auto offset = arrays[name]["offset"].get<std::size_t>();
  length = arrays[name]["length"].get<std::size_t>();
  return std::string_view(bytes_).substr(data_start_ + offset, 8 * length);
}

std::vector<double> ContainerReader::f64(const std::string& name) const {
  std::size_t length = 0;
  auto raw = section(name, "f64", length);
  std::vector<double> out(length);
  for (std::size_t k = 0; k < length; ++k) out[k] = read_le<double>(raw.data() + 8 * k);
  return out;
}

std::vector<std::int64_t> ContainerReader::i64(const std::string& name) const {
  std::size_t length = 0;
  auto raw = section(name, "i64", length);
  std::vector<std::int64_t> out(length);
  for (std::size_t k = 0; k < length; ++k) out[k] = read_le<std::int64_t>(raw.data() + 8 * k);
  return out;
}

}  // namespace tabframe
