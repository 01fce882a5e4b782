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

#include <fstream>
#include <sstream>

#include "tabframe/error.hpp"
#include "tabframe/table.hpp"

namespace tabframe {

RawTable::RawTable(std::vector<RawColumn> columns) : columns_(std::move(columns)) {
  num_rows_ = columns_.empty() ? 0 : static_cast<Index>(columns_.front().cells.size());
  for (const auto& c : columns_) {
    if (static_cast<Index>(c.cells.size()) != num_rows_) {
      throw RowCountMismatch("column '" + c.name + "' has " +
                             std::to_string(c.cells.size()) + " cells, expected " +
                             std::to_string(num_rows_));
    }
  }
}

const RawColumn* RawTable::find(std::string_view name) const {
  for (const auto& c : columns_) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

namespace {

using Record = std::vector<std::pair<std::string, bool>>;  // (text, quoted)

class CsvReader {
 public:
  explicit CsvReader(std::string_view text) : text_(text) {
    if (text_.starts_with("\xEF\xBB\xBF")) pos_ = 3;
  }

  bool done() const { return pos_ >= text_.size(); }
  Index line() const { return line_; }

  Record next() {
    Record fields;
    std::string field;
    bool quoted = false;
    while (true) {
      if (pos_ >= text_.size()) {
        fields.emplace_back(std::move(field), quoted);
        return fields;
      }
      char c = text_[pos_];
      if (c == '"' && field.empty() && !quoted) {
        quoted = true;
        ++pos_;
        read_quoted(field);
        continue;
      }
      if (c == ',') {
        fields.emplace_back(std::move(field), quoted);
        field.clear();
        quoted = false;
        ++pos_;
        continue;
      }
      if (c == '\r' || c == '\n') {
        if (c == '\r' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '\n') ++pos_;
        ++pos_;
        ++line_;
        fields.emplace_back(std::move(field), quoted);
        return fields;
      }
      if (quoted) {
        throw DataError("csv line " + std::to_string(line_) +
                        ": characters after closing quote");
      }
      field.push_back(c);
      ++pos_;
    }
  }

 private:
  void read_quoted(std::string& field) {
    while (true) {
      if (pos_ >= text_.size()) {
        throw DataError("csv line " + std::to_string(line_) +
                        ": unterminated quoted field");
      }
      char c = text_[pos_++];
      if (c == '"') {
        if (pos_ < text_.size() && text_[pos_] == '"') {
          field.push_back('"');
          ++pos_;
        } else {
          return;
        }
      } else {
        if (c == '\n') ++line_;
        field.push_back(c);
      }
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  Index line_ = 1;
};

}  // namespace

RawTable parse_csv(std::string_view text) {
  CsvReader reader(text);
  if (reader.done()) throw DataError("csv has no header row");
  std::vector<RawColumn> columns;
  for (auto& [name, _] : reader.next()) columns.push_back({std::move(name), {}});
  while (!reader.done()) {
    const Index line = reader.line();
    Record record = reader.next();
    if (record.size() == 1 && record[0].first.empty() && !record[0].second) {
      continue;  // blank line
    }
    if (record.size() != columns.size()) {
      throw DataError("csv line " + std::to_string(line) + " has " +
                      std::to_string(record.size()) + " fields, header has " +
                      std::to_string(columns.size()));
    }
    for (std::size_t j = 0; j < record.size(); ++j) {
      auto& [value, quoted] = record[j];
      if (value.empty()) {
        columns[j].cells.emplace_back(Missing{});
      } else {
        columns[j].cells.emplace_back(std::move(value));
      }
    }
  }
  return RawTable(std::move(columns));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FileError("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FileError("short write to '" + path + "'");
}

}  // namespace tabframe
