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

#include "tabframe/materialize.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>

#include "tabframe/error.hpp"
#include "tabframe/hash.hpp"

namespace tabframe {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_real(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  if (std::isinf(value)) return std::nullopt;
  return value;
}

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string describe(const RawCell& cell) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Missing>) {
          return "";
        } else if constexpr (std::is_same_v<T, std::string>) {
          return v;
        } else if constexpr (std::is_same_v<T, double>) {
          return format_real(v);
        } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
          std::string out;
          for (const auto& s : v) out += (out.empty() ? "" : "|") + s;
          return out;
        } else {
          std::string out;
          for (double d : v) out += (out.empty() ? "" : " ") + format_real(d);
          return out;
        }
      },
      cell);
}

// Scalar category label of a cell, or nullopt when missing.
std::optional<std::string> category_label(const RawCell& cell,
                                          const std::string& column, Index row) {
  if (is_missing(cell)) return std::nullopt;
  if (const auto* s = std::get_if<std::string>(&cell)) return *s;
  if (const auto* d = std::get_if<double>(&cell)) return format_real(*d);
  throw ParseError(column, row, describe(cell), "expected a scalar category");
}

std::vector<std::string> split_list(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(sep, start);
    if (end == std::string_view::npos) end = text.size();
    auto piece = trim(text.substr(start, end - start));
    if (!piece.empty()) out.emplace_back(piece);
    start = end + 1;
  }
  return out;
}

std::vector<std::string> category_list(const RawCell& cell, char sep) {
  if (is_missing(cell)) return {};
  if (const auto* l = std::get_if<std::vector<std::string>>(&cell)) return *l;
  if (const auto* d = std::get_if<double>(&cell)) return {format_real(*d)};
  if (const auto* s = std::get_if<std::string>(&cell)) return split_list(*s, sep);
  return {};
}

std::optional<std::vector<double>> parse_vector(std::string_view text) {
  text = trim(text);
  if (text.starts_with('[') && text.ends_with(']')) {
    text = text.substr(1, text.size() - 2);
  }
  std::vector<double> out;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find_first_of(" ,;\t", start);
    if (end == std::string_view::npos) end = text.size();
    auto piece = text.substr(start, end - start);
    if (!trim(piece).empty()) {
      auto v = parse_real(piece);
      if (!v) return std::nullopt;
      out.push_back(*v);
    }
    start = end + 1;
  }
  return out;
}

NumericSummary summarize(const std::vector<double>& present, Index missing,
                         bool with_quantiles) {
  NumericSummary s;
  s.count_missing = missing;
  if (present.empty()) {
    s.all_missing = true;
    return s;
  }
  double sum = 0.0;
  for (double v : present) sum += v;
  s.mean = sum / static_cast<double>(present.size());
  double sq = 0.0;
  for (double v : present) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(present.size()));
  if (with_quantiles) {
    std::vector<double> sorted = present;
    std::sort(sorted.begin(), sorted.end());
    const double last = static_cast<double>(sorted.size() - 1);
    for (Index k = 0; k < kNumQuantiles; ++k) {
      const double pos = last * static_cast<double>(k) / static_cast<double>(kNumQuantiles - 1);
      const auto lo = static_cast<std::size_t>(std::floor(pos));
      const auto hi = std::min(lo + 1, sorted.size() - 1);
      const double frac = pos - static_cast<double>(lo);
      s.quantiles.push_back(sorted[lo] + (sorted[hi] - sorted[lo]) * frac);
    }
  }
  return s;
}

// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(std::int64_t y, std::int64_t m, std::int64_t d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const std::int64_t yoe = y - era * 400;
  const std::int64_t doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const std::int64_t doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + doe - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, std::int64_t& m, std::int64_t& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const std::int64_t doe = z - era * 146097;
  const std::int64_t yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const std::int64_t mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp + (mp < 10 ? 3 : -9);
  y = yoe + era * 400 + (m <= 2);
}

bool is_leap(std::int64_t y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

std::int64_t days_in_month(std::int64_t y, std::int64_t m) {
  static constexpr std::int64_t kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return m == 2 && is_leap(y) ? 29 : kDays[m - 1];
}

// Parses exactly `width` digits at `pos`.
bool read_digits(std::string_view s, std::size_t& pos, int width, std::int64_t& out) {
  if (pos + width > s.size()) return false;
  out = 0;
  for (int k = 0; k < width; ++k) {
    const char c = s[pos + k];
    if (c < '0' || c > '9') return false;
    out = out * 10 + (c - '0');
  }
  pos += width;
  return true;
}

}  // namespace

std::optional<TimestampParts> parse_timestamp(std::string_view text) {
  text = trim(text);
  std::size_t pos = 0;
  std::int64_t year, month, day, hour = 0, minute = 0, second = 0, offset_min = 0;
  if (!read_digits(text, pos, 4, year) || pos >= text.size() || text[pos++] != '-' ||
      !read_digits(text, pos, 2, month) || pos >= text.size() || text[pos++] != '-' ||
      !read_digits(text, pos, 2, day)) {
    return std::nullopt;
  }
  if (month < 1 || month > 12 || day < 1 || day > days_in_month(year, month)) {
    return std::nullopt;
  }
  if (pos < text.size()) {
    if (text[pos] != 'T' && text[pos] != 't' && text[pos] != ' ') return std::nullopt;
    ++pos;
    if (!read_digits(text, pos, 2, hour) || pos >= text.size() || text[pos++] != ':' ||
        !read_digits(text, pos, 2, minute)) {
      return std::nullopt;
    }
    if (pos < text.size() && text[pos] == ':') {
      ++pos;
      if (!read_digits(text, pos, 2, second)) return std::nullopt;
      if (pos < text.size() && (text[pos] == '.' || text[pos] == ',')) {
        ++pos;
        const auto start = pos;
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
        if (pos == start) return std::nullopt;
      }
    }
    if (hour > 23 || minute > 59 || second > 59) return std::nullopt;
    if (pos < text.size()) {
      const char c = text[pos];
      if (c == 'Z' || c == 'z') {
        ++pos;
      } else if (c == '+' || c == '-') {
        ++pos;
        std::int64_t oh, om = 0;
        if (!read_digits(text, pos, 2, oh)) return std::nullopt;
        if (pos < text.size() && text[pos] == ':') ++pos;
        if (pos < text.size() && !read_digits(text, pos, 2, om)) return std::nullopt;
        if (oh > 23 || om > 59) return std::nullopt;
        offset_min = (c == '+' ? 1 : -1) * (oh * 60 + om);
      }
    }
    if (pos != text.size()) return std::nullopt;
  }
  std::int64_t days = days_from_civil(year, month, day);
  std::int64_t minutes = hour * 60 + minute - offset_min;
  const std::int64_t day_shift = minutes >= 0 ? minutes / 1440 : -((1439 - minutes) / 1440);
  days += day_shift;
  minutes -= day_shift * 1440;
  civil_from_days(days, year, month, day);
  const std::int64_t weekday = ((days % 7) + 7 + 3) % 7;  // 1970-01-01 was a Thursday
  return TimestampParts{year, month, day, weekday, minutes / 60, minutes % 60, second};
}

SemanticType infer_stype(std::span<const RawCell> cells, char list_separator) {
  std::vector<const RawCell*> present;
  for (const auto& c : cells) {
    if (!is_missing(c)) present.push_back(&c);
  }
  if (present.empty()) throw EmptyColumn("every sampled cell is missing");

  auto all_of = [&](auto pred) { return std::all_of(present.begin(), present.end(), pred); };
  if (all_of([](const RawCell* c) {
        if (std::holds_alternative<double>(*c)) return true;
        const auto* s = std::get_if<std::string>(c);
        return s && parse_real(*s).has_value();
      })) {
    return SemanticType::numerical;
  }
  if (all_of([](const RawCell* c) {
        const auto* s = std::get_if<std::string>(c);
        return s && parse_timestamp(*s).has_value();
      })) {
    return SemanticType::timestamp;
  }
  if (all_of([](const RawCell* c) { return std::holds_alternative<std::vector<double>>(*c); })) {
    return SemanticType::embedding;
  }
  for (const auto* c : present) {
    if (std::holds_alternative<std::vector<std::string>>(*c)) return SemanticType::multicategorical;
    const auto* s = std::get_if<std::string>(c);
    if (s && s->find(list_separator) != std::string::npos) return SemanticType::multicategorical;
  }
  std::set<std::string> distinct;
  for (const auto* c : present) distinct.insert(describe(*c));
  const auto n = static_cast<double>(cells.size());
  const auto threshold =
      std::min<std::size_t>(50, static_cast<std::size_t>(std::ceil(0.1 * n)));
  if (distinct.size() <= threshold) return SemanticType::categorical;
  return SemanticType::text_embedded;
}

std::pair<Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>, CategoryMap>
encode_categorical_indices(std::span<const RawCell> cells, const CategoryMap* existing) {
  CategoryMap map = existing ? *existing : CategoryMap{};
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1> out(static_cast<Index>(cells.size()));
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto label = category_label(cells[i], "", static_cast<Index>(i));
    if (!label) {
      out[static_cast<Index>(i)] = kMissingIndex;
    } else {
      out[static_cast<Index>(i)] = existing ? map.find(*label) : map.insert(*label);
    }
  }
  return {std::move(out), std::move(map)};
}

std::vector<std::int64_t> tokenize(std::string_view text, Index vocab_size) {
  if (vocab_size < 1) throw ConfigError("vocab size must be >= 1");
  std::vector<std::int64_t> ids;
  std::string token;
  auto flush = [&] {
    if (!token.empty()) {
      ids.push_back(static_cast<std::int64_t>(fnv1a64(token) %
                                              static_cast<std::uint64_t>(vocab_size)));
      token.clear();
    }
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80 && (std::isspace(c) || std::ispunct(c))) {
      flush();
    } else {
      token.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
    }
  }
  flush();
  return ids;
}

NestedBlock tokenize_text(std::span<const std::span<const RawCell>> columns,
                          Index vocab_size) {
  const Index cols = static_cast<Index>(columns.size());
  const Index rows = columns.empty() ? 0 : static_cast<Index>(columns.front().size());
  std::vector<std::int64_t> val;
  std::vector<std::int64_t> ptr{0};
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      if (static_cast<Index>(columns[j].size()) != rows) {
        throw RowCountMismatch("text columns differ in length");
      }
      const RawCell& cell = columns[j][i];
      if (!is_missing(cell)) {
        auto ids = tokenize(describe(cell), vocab_size);
        val.insert(val.end(), ids.begin(), ids.end());
      }
      ptr.push_back(static_cast<std::int64_t>(val.size()));
    }
  }
  return NestedBlock(rows, cols, std::move(val), std::move(ptr));
}

RowMajorMatrixXi materialize_timestamp(std::span<const RawCell> cells,
                                       const std::string& column) {
  RowMajorMatrixXi out(static_cast<Index>(cells.size()), kTimestampComponents);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto r = static_cast<Index>(i);
    if (is_missing(cells[i])) {
      out.row(r).setConstant(kMissingIndex);
      continue;
    }
    const auto* s = std::get_if<std::string>(&cells[i]);
    auto parts = s ? parse_timestamp(*s) : std::nullopt;
    if (!parts) throw ParseError(column, r, describe(cells[i]), "not an ISO-8601 timestamp");
    for (Index c = 0; c < kTimestampComponents; ++c) out(r, c) = (*parts)[c];
  }
  return out;
}

ColumnStats compute_stats(const ColumnBlock& block, SemanticType stype, Index j,
                          Index num_categories) {
  ColumnStats stats;
  stats.stype = stype;
  if (const auto* num = std::get_if<DenseFloatBlock>(&block)) {
    std::vector<double> present;
    Index missing = 0;
    for (Index i = 0; i < num->values.rows(); ++i) {
      const double v = num->values(i, j);
      if (std::isnan(v)) {
        ++missing;
      } else {
        present.push_back(v);
      }
    }
    stats.numeric = summarize(present, missing, true);
  } else if (const auto* cat = std::get_if<DenseIntBlock>(&block)) {
    for (Index i = 0; i < cat->values.rows(); ++i) {
      if (cat->values(i, j) >= 0) ++stats.category_count[cat->values(i, j)];
    }
    stats.num_categories = num_categories;
  } else if (const auto* nested = std::get_if<NestedBlock>(&block)) {
    for (Index i = 0; i < nested->num_rows(); ++i) {
      for (auto v : nested->get(i, j)) {
        if (v >= 0) ++stats.category_count[v];
      }
    }
    stats.num_categories = num_categories;
  } else if (const auto* ts = std::get_if<TimestampBlock>(&block)) {
    for (Index c = 0; c < kTimestampComponents; ++c) {
      std::vector<double> present;
      Index missing = 0;
      for (Index i = 0; i < ts->values.rows(); ++i) {
        const auto v = ts->component(i, j, c);
        if (v == kMissingIndex) {
          ++missing;
        } else {
          present.push_back(static_cast<double>(v));
        }
      }
      stats.components.push_back(summarize(present, missing, false));
    }
  } else if (const auto* emb = std::get_if<MultiEmbeddingTensor>(&block)) {
    stats.embedding_dim = emb->dims().at(j);
  }
  return stats;
}

namespace {

TargetColumn materialize_target(const RawColumn& raw, TaskType task,
                                const CategoryMap* existing) {
  TargetColumn target{raw.name, Eigen::VectorXd(static_cast<Index>(raw.cells.size())), {}};
  const auto nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::optional<double>> numeric;
  bool all_numeric = true;
  for (const auto& cell : raw.cells) {
    if (is_missing(cell)) {
      numeric.push_back(std::nullopt);
    } else if (const auto* d = std::get_if<double>(&cell)) {
      numeric.push_back(*d);
    } else if (const auto* s = std::get_if<std::string>(&cell); s && parse_real(*s)) {
      numeric.push_back(parse_real(*s));
    } else {
      all_numeric = false;
      numeric.push_back(std::nullopt);
    }
  }
  if (task == TaskType::regression) {
    for (std::size_t i = 0; i < raw.cells.size(); ++i) {
      if (!is_missing(raw.cells[i]) && !numeric[i]) {
        throw ParseError(raw.name, static_cast<Index>(i), describe(raw.cells[i]),
                         "regression target must be numeric");
      }
      target.values[static_cast<Index>(i)] = numeric[i].value_or(nan);
    }
    return target;
  }
  const bool zero_one = all_numeric && !existing &&
                        std::all_of(numeric.begin(), numeric.end(), [](const auto& v) {
                          return !v || *v == 0.0 || *v == 1.0;
                        });
  if (zero_one) {
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      target.values[static_cast<Index>(i)] = numeric[i].value_or(nan);
    }
    return target;
  }
  auto [indices, map] = encode_categorical_indices(raw.cells, existing);
  if (map.size() > 2) {
    throw SchemaError("binary target '" + raw.name + "' has " +
                      std::to_string(map.size()) + " classes");
  }
  for (Index i = 0; i < indices.size(); ++i) {
    target.values[i] = indices[i] < 0 ? nan : static_cast<double>(indices[i]);
  }
  target.classes = map.categories();
  return target;
}

}  // namespace

TensorFrame materialize(const RawTable& table, const Schema& schema,
                        const EmbedderRegistry& embedders,
                        const MaterializeOptions& options,
                        const std::map<std::string, CategoryMap>* existing_maps) {
  auto existing_map = [&](const std::string& name) -> const CategoryMap* {
    if (!existing_maps) return nullptr;
    auto it = existing_maps->find(name);
    return it == existing_maps->end() ? nullptr : &it->second;
  };
  auto raw_column = [&](const std::string& name) -> const RawColumn& {
    const auto* c = table.find(name);
    if (!c) throw SchemaError("schema column '" + name + "' is missing from the table");
    return *c;
  };

  const Index n = table.num_rows();
  TensorFrame frame;
  frame.num_rows = n;
  frame.schema = schema;
  frame.columns = schema.feature_columns();
  for (const auto& c : frame.columns) {
    frame.column_names_by_stype[c.stype].push_back(c.name);
  }
  for (const auto& [stype, names] : frame.column_names_by_stype) {
    const Index k = static_cast<Index>(names.size());
    std::vector<Index> num_categories(k, 0);
    ColumnBlock block;
    switch (stype) {
      case SemanticType::numerical: {
        RowMajorMatrixXd values(n, k);
        for (Index j = 0; j < k; ++j) {
          const auto& raw = raw_column(names[j]);
          for (Index i = 0; i < n; ++i) {
            const RawCell& cell = raw.cells[i];
            if (is_missing(cell)) {
              values(i, j) = std::numeric_limits<double>::quiet_NaN();
            } else if (const auto* d = std::get_if<double>(&cell)) {
              values(i, j) = *d;
            } else if (const auto* s = std::get_if<std::string>(&cell)) {
              auto v = parse_real(*s);
              if (!v) throw ParseError(names[j], i, *s, "not a real number");
              values(i, j) = *v;
            } else {
              throw ParseError(names[j], i, describe(cell), "not a real number");
            }
          }
        }
        block = DenseFloatBlock{std::move(values)};
        break;
      }
      case SemanticType::categorical: {
        RowMajorMatrixXi values(n, k);
        for (Index j = 0; j < k; ++j) {
          const auto& raw = raw_column(names[j]);
          for (Index i = 0; i < n; ++i) category_label(raw.cells[i], names[j], i);
          auto [indices, map] = encode_categorical_indices(raw.cells, existing_map(names[j]));
          values.col(j) = indices;
          num_categories[j] = map.size();
          frame.category_maps[names[j]] = std::move(map);
        }
        block = DenseIntBlock{std::move(values)};
        break;
      }
      case SemanticType::multicategorical: {
        std::vector<CategoryMap> maps(k);
        std::vector<bool> frozen(k, false);
        for (Index j = 0; j < k; ++j) {
          if (const auto* m = existing_map(names[j])) {
            maps[j] = *m;
            frozen[j] = true;
          }
        }
        std::vector<const RawColumn*> raws;
        for (const auto& name : names) raws.push_back(&raw_column(name));
        std::vector<std::int64_t> val;
        std::vector<std::int64_t> ptr{0};
        for (Index i = 0; i < n; ++i) {
          for (Index j = 0; j < k; ++j) {
            const RawCell& cell = raws[j]->cells[i];
            if (std::holds_alternative<std::vector<double>>(cell)) {
              throw ParseError(names[j], i, describe(cell), "expected a category list");
            }
            for (const auto& c : category_list(cell, options.list_separator)) {
              val.push_back(frozen[j] ? maps[j].find(c) : maps[j].insert(c));
            }
            ptr.push_back(static_cast<std::int64_t>(val.size()));
          }
        }
        for (Index j = 0; j < k; ++j) {
          num_categories[j] = maps[j].size();
          frame.category_maps[names[j]] = std::move(maps[j]);
        }
        block = NestedBlock(n, k, std::move(val), std::move(ptr));
        break;
      }
      case SemanticType::timestamp: {
        RowMajorMatrixXi values(n, k * kTimestampComponents);
        for (Index j = 0; j < k; ++j) {
          values.middleCols(j * kTimestampComponents, kTimestampComponents) =
              materialize_timestamp(raw_column(names[j]).cells, names[j]);
        }
        block = TimestampBlock{std::move(values)};
        break;
      }
      case SemanticType::text_tokenized: {
        std::vector<std::span<const RawCell>> cols;
        for (const auto& name : names) cols.emplace_back(raw_column(name).cells);
        block = tokenize_text(cols, options.vocab_size);
        std::fill(num_categories.begin(), num_categories.end(), options.vocab_size);
        break;
      }
      case SemanticType::text_embedded: {
        std::vector<RowMajorMatrixXd> cols;
        for (const auto& name : names) {
          auto* embedder = embedders.find(name);
          if (!embedder) throw MissingEmbedder("no embedder for text column '" + name + "'");
          const auto& raw = raw_column(name);
          std::vector<std::optional<std::string>> texts;
          for (const auto& cell : raw.cells) {
            texts.push_back(is_missing(cell) ? std::nullopt
                                             : std::optional<std::string>(describe(cell)));
          }
          RowMajorMatrixXd emb = embedder->embed(texts);
          if (emb.rows() != n || emb.cols() != embedder->dim()) {
            throw DimensionMismatch("embedder for '" + name + "' returned a " +
                                    std::to_string(emb.rows()) + "x" +
                                    std::to_string(emb.cols()) + " matrix");
          }
          for (Index i = 0; i < n; ++i) {
            if (!texts[i]) emb.row(i).setZero();
          }
          cols.push_back(std::move(emb));
        }
        block = MultiEmbeddingTensor::from_columns(cols);
        break;
      }
      case SemanticType::embedding: {
        std::vector<RowMajorMatrixXd> cols;
        for (const auto& name : names) {
          const auto& raw = raw_column(name);
          std::vector<std::optional<std::vector<double>>> vecs;
          Index dim = 0;
          for (Index i = 0; i < n; ++i) {
            const RawCell& cell = raw.cells[i];
            std::optional<std::vector<double>> v;
            if (const auto* dv = std::get_if<std::vector<double>>(&cell)) {
              v = *dv;
            } else if (const auto* s = std::get_if<std::string>(&cell)) {
              v = parse_vector(*s);
              if (!v) throw ParseError(name, i, *s, "not a numeric vector");
            } else if (!is_missing(cell)) {
              throw ParseError(name, i, describe(cell), "not a numeric vector");
            }
            if (v) {
              if (v->empty()) throw ParseError(name, i, describe(cell), "empty vector");
              if (dim == 0) dim = static_cast<Index>(v->size());
              if (static_cast<Index>(v->size()) != dim) {
                throw ParseError(name, i, describe(cell),
                                 "vector width differs from earlier rows");
              }
            }
            vecs.push_back(std::move(v));
          }
          if (dim == 0) throw EmptyColumn("embedding column '" + name + "' is all missing");
          RowMajorMatrixXd m = RowMajorMatrixXd::Zero(n, dim);
          for (Index i = 0; i < n; ++i) {
            if (vecs[i]) {
              for (Index d = 0; d < dim; ++d) m(i, d) = (*vecs[i])[d];
            }
          }
          cols.push_back(std::move(m));
        }
        block = MultiEmbeddingTensor::from_columns(cols);
        break;
      }
    }
    for (Index j = 0; j < k; ++j) {
      frame.stats[names[j]] = compute_stats(block, stype, j, num_categories[j]);
    }
    frame.blocks.emplace(stype, std::move(block));
  }
  frame.target = materialize_target(raw_column(schema.target()), schema.task(),
                                    existing_map(schema.target()));
  return frame;
}

TensorFrame with_stats_from_rows(const TensorFrame& frame, std::span<const Index> rows) {
  TensorFrame subset = frame_row_select(frame, rows);
  TensorFrame out = frame;
  for (const auto& [stype, block] : subset.blocks) {
    const auto& names = frame.names(stype);
    for (Index j = 0; j < static_cast<Index>(names.size()); ++j) {
      out.stats[names[j]] =
          compute_stats(block, stype, j, frame.stats.at(names[j]).num_categories);
    }
  }
  return out;
}

}  // namespace tabframe
