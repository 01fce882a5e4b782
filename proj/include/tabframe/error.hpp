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
#include <stdexcept>
#include <string>

namespace tabframe {

// Two roots so that callers (the CLI in particular) can map failures onto
// exit codes without enumerating every concrete type.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define TABFRAME_DATA_ERROR(Name)                                  \
  class Name : public DataError {                                  \
   public:                                                         \
    explicit Name(const std::string& what) : DataError(what) {}    \
  };

#define TABFRAME_IO_ERROR(Name)                                    \
  class Name : public IoError {                                    \
   public:                                                         \
    explicit Name(const std::string& what) : IoError(what) {}      \
  };

TABFRAME_DATA_ERROR(IndexOutOfBounds)
TABFRAME_DATA_ERROR(RaggedShape)
TABFRAME_DATA_ERROR(RowCountMismatch)
TABFRAME_DATA_ERROR(SchemaError)
TABFRAME_DATA_ERROR(EmptyColumn)
TABFRAME_DATA_ERROR(MissingEmbedder)
TABFRAME_DATA_ERROR(ShapeMismatch)
TABFRAME_DATA_ERROR(NotScalarLoss)
TABFRAME_DATA_ERROR(DetachedTensor)
TABFRAME_DATA_ERROR(MissingStats)
TABFRAME_DATA_ERROR(IndexOutOfRange)
TABFRAME_DATA_ERROR(TokenOutOfRange)
TABFRAME_DATA_ERROR(ColumnCountMismatch)
TABFRAME_DATA_ERROR(LabelOutOfRange)
TABFRAME_DATA_ERROR(LengthMismatch)
TABFRAME_DATA_ERROR(SingleClass)
TABFRAME_DATA_ERROR(EmptySplit)
TABFRAME_DATA_ERROR(NonFiniteLoss)
TABFRAME_DATA_ERROR(ConfigError)
TABFRAME_DATA_ERROR(DimensionMismatch)

TABFRAME_IO_ERROR(FileError)
TABFRAME_IO_ERROR(Timeout)

#undef TABFRAME_DATA_ERROR
#undef TABFRAME_IO_ERROR

class ParseError : public DataError {
 public:
  ParseError(std::string column, std::int64_t row, std::string cell,
             const std::string& detail)
      : DataError("parse error in column '" + column + "' row " +
                  std::to_string(row) + " (cell '" + cell + "'): " + detail),
        column_(std::move(column)),
        row_(row),
        cell_(std::move(cell)) {}

  const std::string& column() const { return column_; }
  std::int64_t row() const { return row_; }
  const std::string& cell() const { return cell_; }

 private:
  std::string column_;
  std::int64_t row_;
  std::string cell_;
};

class HttpError : public IoError {
 public:
  HttpError(int status, const std::string& body_excerpt)
      : IoError("http error " + std::to_string(status) + ": " + body_excerpt),
        status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

// Failures reading a binary container (frame cache, checkpoint, embeddings).
class CacheError : public IoError {
 public:
  enum class Kind { BadMagic, VersionMismatch, Corrupt, KeyMismatch };

  CacheError(Kind kind, const std::string& detail)
      : IoError(std::string(kind_name(kind)) + ": " + detail), kind_(kind) {}

  Kind kind() const { return kind_; }

  static const char* kind_name(Kind kind) {
    switch (kind) {
      case Kind::BadMagic: return "BadMagic";
      case Kind::VersionMismatch: return "VersionMismatch";
      case Kind::Corrupt: return "Corrupt";
      case Kind::KeyMismatch: return "KeyMismatch";
    }
    return "?";
  }

 private:
  Kind kind_;
};

}  // namespace tabframe
