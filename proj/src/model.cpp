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

#include "tabframe/model.hpp"

#include <cmath>
#include <numbers>

#include "tabframe/cache.hpp"
#include "tabframe/error.hpp"
#include "tabframe/hash.hpp"

namespace tabframe {

using nlohmann::json;
using ad::DiffTensor;

namespace {

constexpr double kMinStd = 1e-12;
constexpr double kTableStd = 0.02;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Timestamp components fed through the continuous path: year, day, hour,
// minute, second. Month (1) and day of week (3) use lookup tables.
constexpr std::array<Index, 5> kContinuousComponents = {0, 2, 4, 5, 6};
constexpr Index kMonthComponent = 1;
constexpr Index kWeekdayComponent = 3;

template <typename Enum, std::size_t N>
Enum parse_enum(const json& value, const char* field,
                const std::array<Enum, N>& options) {
  const auto tag = value.get<std::string>();
  for (Enum e : options) {
    if (to_string(e) == tag) return e;
  }
  throw ConfigError(std::string("unknown ") + field + " '" + tag + "'");
}

double normalize(double x, const NumericSummary& s) {
  if (std::isnan(x) || s.all_missing) return 0.0;
  return (x - s.mean) / std::max(s.std, kMinStd);
}

std::string column_prefix(SemanticType s, const std::string& column) {
  return "enc." + std::string(to_string(s)) + "." + column;
}

std::string layer_prefix(Index layer) { return "layer" + std::to_string(layer); }

// Box-Muller over the splitmix64 stream; portable where
// std::normal_distribution is not.
double standard_normal(SplitMix64& rng) {
  const double u1 = 1.0 - rng.next_unit();  // (0, 1]
  const double u2 = rng.next_unit();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

DiffTensor constant(ad::Shape shape, Eigen::VectorXd values) {
  return DiffTensor(std::move(shape), std::move(values), false);
}

}  // namespace

std::string_view to_string(Interaction v) {
  switch (v) {
    case Interaction::self_attention: return "self_attention";
    case Interaction::self_attention_positional: return "self_attention_positional";
    case Interaction::none: return "none";
  }
  return "?";
}

std::string_view to_string(Decoder v) {
  switch (v) {
    case Decoder::mean_pool: return "mean_pool";
    case Decoder::attention_pool: return "attention_pool";
    case Decoder::cls: return "cls";
    case Decoder::flatten_mlp: return "flatten_mlp";
  }
  return "?";
}

std::string_view to_string(NumericalEncoder v) {
  return v == NumericalEncoder::linear ? "linear" : "periodic";
}

std::string_view to_string(Head v) {
  switch (v) {
    case Head::logit: return "logit";
    case Head::regression: return "regression";
    case Head::none: return "none";
  }
  return "?";
}

void ModelConfig::validate() const {
  if (channels < 1) throw ConfigError("channels must be >= 1");
  if (num_layers < 0) throw ConfigError("num_layers must be >= 0");
  if (num_heads < 1) throw ConfigError("num_heads must be >= 1");
  if (out_channels < 1) throw ConfigError("out_channels must be >= 1");
  if (channels % num_heads != 0) {
    throw ConfigError("channels (" + std::to_string(channels) +
                      ") must be divisible by num_heads (" + std::to_string(num_heads) + ")");
  }
  if (decoder == Decoder::cls && interaction == Interaction::none) {
    throw ConfigError("decoder cls requires an interaction other than none");
  }
  if (numerical_encoder == NumericalEncoder::periodic && channels % 2 != 0) {
    throw ConfigError("periodic numerical encoder requires even channels");
  }
}

json ModelConfig::to_json() const {
  return {{"channels", channels},
          {"num_layers", num_layers},
          {"num_heads", num_heads},
          {"interaction", std::string(to_string(interaction))},
          {"decoder", std::string(to_string(decoder))},
          {"numerical_encoder", std::string(to_string(numerical_encoder))},
          {"out_channels", out_channels},
          {"head", std::string(to_string(head))}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  ModelConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "channels") {
        c.channels = value.get<Index>();
      } else if (key == "num_layers") {
        c.num_layers = value.get<Index>();
      } else if (key == "num_heads") {
        c.num_heads = value.get<Index>();
      } else if (key == "out_channels") {
        c.out_channels = value.get<Index>();
      } else if (key == "interaction") {
        c.interaction = parse_enum(value, "interaction",
                                   std::array{Interaction::self_attention,
                                              Interaction::self_attention_positional,
                                              Interaction::none});
      } else if (key == "decoder") {
        c.decoder = parse_enum(value, "decoder",
                               std::array{Decoder::mean_pool, Decoder::attention_pool,
                                          Decoder::cls, Decoder::flatten_mlp});
      } else if (key == "numerical_encoder") {
        c.numerical_encoder = parse_enum(
            value, "numerical_encoder",
            std::array{NumericalEncoder::linear, NumericalEncoder::periodic});
      } else if (key == "head") {
        c.head = parse_enum(value, "head", std::array{Head::logit, Head::regression, Head::none});
      } else {
        throw ConfigError("unknown model config key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid model config: ") + e.what());
  }
  c.validate();
  return c;
}

FrameSpec FrameSpec::from_frame(const TensorFrame& frame) {
  FrameSpec spec;
  for (const auto& [s, names] : frame.column_names_by_stype) {
    if (names.empty()) continue;
    spec.names[s] = names;
    for (const auto& n : names) {
      auto it = frame.stats.find(n);
      if (it == frame.stats.end()) throw MissingStats("no statistics for column '" + n + "'");
      spec.stats[n] = it->second;
    }
  }
  return spec;
}

Index FrameSpec::num_cols() const {
  Index c = 0;
  for (const auto& [s, names] : this->names) c += static_cast<Index>(names.size());
  return c;
}

std::vector<std::string> FrameSpec::canonical_names() const {
  std::vector<std::string> out;
  for (const auto& [s, n] : names) out.insert(out.end(), n.begin(), n.end());
  return out;
}

json FrameSpec::to_json() const {
  json n = json::object();
  for (const auto& [s, list] : names) n[std::string(to_string(s))] = list;
  json st = json::object();
  for (const auto& [name, s] : stats) st[name] = stats_to_json(s);
  return {{"names", n}, {"stats", st}};
}

FrameSpec FrameSpec::from_json(const json& j) {
  FrameSpec spec;
  try {
    for (const auto& [tag, list] : j.at("names").items()) {
      spec.names[parse_semantic_type(tag)] = list.get<std::vector<std::string>>();
    }
    for (const auto& [name, s] : j.at("stats").items()) spec.stats[name] = stats_from_json(s);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid frame spec: ") + e.what());
  }
  return spec;
}

TabularModel::TabularModel(ModelConfig config, FrameSpec spec, std::uint64_t seed)
    : config_(std::move(config)), spec_(std::move(spec)) {
  config_.validate();
  if (spec_.num_cols() == 0) throw ColumnCountMismatch("model needs at least one feature column");
  for (const auto& [s, names] : spec_.names) {
    for (const auto& n : names) {
      auto it = spec_.stats.find(n);
      if (it == spec_.stats.end()) throw MissingStats("no statistics for column '" + n + "'");
      if (it->second.stype != s) {
        throw MissingStats("statistics for column '" + n + "' describe a " +
                           std::string(to_string(it->second.stype)) + " column");
      }
      if (s == SemanticType::timestamp &&
          static_cast<Index>(it->second.components.size()) != kTimestampComponents) {
        throw MissingStats("timestamp column '" + n + "' lacks component statistics");
      }
      if (is_embedded(s) && it->second.embedding_dim < 1) {
        throw MissingStats("embedded column '" + n + "' lacks an embedding dimension");
      }
    }
  }
  init_parameters(seed);
}

DiffTensor& TabularModel::add_param(const std::string& name, ad::Shape shape, double scale,
                                    std::uint64_t seed, ParamInit init) {
  const Index n = ad::numel(shape);
  Eigen::VectorXd values(n);
  SplitMix64 rng(seed ^ fnv1a64(name));
  for (Index k = 0; k < n; ++k) {
    values[k] = init == ParamInit::uniform ? scale * rng.next_signed_unit()
                                           : scale * standard_normal(rng);
  }
  auto [it, inserted] = params_.emplace(name, DiffTensor(std::move(shape), std::move(values), true));
  if (!inserted) throw ConfigError("duplicate parameter '" + name + "'");
  return it->second;
}

void TabularModel::init_parameters(std::uint64_t seed) {
  const Index f = config_.channels;
  auto uniform = [&](const std::string& name, ad::Shape shape, double bound) -> DiffTensor& {
    return add_param(name, std::move(shape), bound, seed, ParamInit::uniform);
  };
  auto table = [&](const std::string& name, ad::Shape shape) -> DiffTensor& {
    return add_param(name, std::move(shape), kTableStd, seed, ParamInit::normal);
  };
  auto linear_param = [&](const std::string& prefix, Index in, Index out) {
    uniform(prefix + ".weight", {in, out}, 1.0 / std::sqrt(static_cast<double>(in)));
    uniform(prefix + ".bias", {out}, 0.0);
  };
  auto norm_param = [&](const std::string& prefix) {
    uniform(prefix + ".gain", {f}, 0.0).mutable_data().setOnes();
    uniform(prefix + ".bias", {f}, 0.0);
  };

  for (const auto& [s, names] : spec_.names) {
    for (const auto& name : names) {
      const auto& st = spec_.stats.at(name);
      const std::string p = column_prefix(s, name);
      switch (s) {
        case SemanticType::numerical:
          if (config_.numerical_encoder == NumericalEncoder::linear) {
            uniform(p + ".weight", {f}, 1.0);
            uniform(p + ".bias", {f}, 0.0);
          } else {
            add_param(p + ".coef", {f / 2}, 1.0, seed, ParamInit::normal);
            linear_param(p + ".proj", f, f);
          }
          break;
        case SemanticType::categorical:
        case SemanticType::multicategorical:
          table(p + ".table", {st.num_categories + 1, f});
          break;
        case SemanticType::timestamp:
          table(p + ".month", {13, f});
          table(p + ".weekday", {8, f});
          linear_param(p + ".continuous", static_cast<Index>(kContinuousComponents.size()), f);
          break;
        case SemanticType::text_embedded:
        case SemanticType::embedding:
          linear_param(p, st.embedding_dim, f);
          break;
        case SemanticType::text_tokenized:
          break;
      }
    }
  }
  if (auto it = spec_.names.find(SemanticType::text_tokenized); it != spec_.names.end()) {
    Index vocab = 0;
    for (const auto& n : it->second) vocab = std::max(vocab, spec_.stats.at(n).num_categories);
    if (vocab < 1) throw MissingStats("tokenized columns lack a vocabulary size");
    table("enc.text_tokenized.token_table", {vocab, f});
    uniform("enc.text_tokenized.proj.weight", {f, f}, 1.0 / std::sqrt(static_cast<double>(f)));
  }

  const Index cols = num_interaction_cols();
  if (config_.decoder == Decoder::cls) table("cls", {1, f});
  if (config_.interaction != Interaction::none) {
    for (Index l = 0; l < config_.num_layers; ++l) {
      const std::string p = layer_prefix(l);
      if (config_.interaction == Interaction::self_attention_positional) {
        table(p + ".pos", {cols, f});
      }
      norm_param(p + ".norm1");
      linear_param(p + ".query", f, f);
      linear_param(p + ".key", f, f);
      linear_param(p + ".value", f, f);
      linear_param(p + ".out", f, f);
      norm_param(p + ".norm2");
      linear_param(p + ".ffn1", f, 2 * f);
      linear_param(p + ".ffn2", 2 * f, f);
    }
  }

  const Index d = config_.out_channels;
  switch (config_.decoder) {
    case Decoder::mean_pool:
    case Decoder::cls:
      linear_param("dec.proj", f, d);
      break;
    case Decoder::attention_pool:
      table("dec.query", {f, 1});
      linear_param("dec.proj", f, d);
      break;
    case Decoder::flatten_mlp:
      linear_param("dec.mlp1", cols * f, 2 * f);
      linear_param("dec.mlp2", 2 * f, d);
      break;
  }
  if (config_.head != Head::none) linear_param("head", d, 1);
}

Index TabularModel::num_interaction_cols() const {
  return spec_.num_cols() + (config_.decoder == Decoder::cls ? 1 : 0);
}

DiffTensor& TabularModel::param(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return it->second;
}

const DiffTensor& TabularModel::param(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return it->second;
}

Index TabularModel::num_parameter_values() const {
  Index n = 0;
  for (const auto& [name, p] : params_) n += p.numel();
  return n;
}

void TabularModel::check_frame(const TensorFrame& frame) const {
  for (SemanticType s : kAllSemanticTypes) {
    auto it = spec_.names.find(s);
    const std::vector<std::string> none;
    const auto& expected = it == spec_.names.end() ? none : it->second;
    if (frame.names(s) != expected) {
      throw ColumnCountMismatch("frame " + std::string(to_string(s)) +
                                " columns differ from the columns the model was built for");
    }
    if (!expected.empty() && frame.block(s) == nullptr) {
      throw ColumnCountMismatch("frame lacks its " + std::string(to_string(s)) + " block");
    }
  }
}

DiffTensor TabularModel::linear(const DiffTensor& x, const std::string& prefix) const {
  return ad::matmul(x, param(prefix + ".weight")) + param(prefix + ".bias");
}

DiffTensor TabularModel::encode_column(const TensorFrame& frame, SemanticType s, Index j) const {
  const Index n = frame.num_rows;
  const Index f = config_.channels;
  const std::string& name = spec_.names.at(s)[j];
  const ColumnStats& st = spec_.stats.at(name);
  const std::string p = column_prefix(s, name);
  const ColumnBlock& block = *frame.block(s);

  switch (s) {
    case SemanticType::numerical: {
      const auto& values = std::get<DenseFloatBlock>(block).values;
      Eigen::VectorXd z(n);
      for (Index i = 0; i < n; ++i) z[i] = normalize(values(i, j), st.numeric);
      const DiffTensor zt = constant({n, 1}, std::move(z));
      if (config_.numerical_encoder == NumericalEncoder::linear) {
        return zt * param(p + ".weight") + param(p + ".bias");
      }
      const DiffTensor angle = kTwoPi * (zt * param(p + ".coef"));
      const std::vector<DiffTensor> parts{ad::sin(angle), ad::cos(angle)};
      return linear(ad::concat(parts, 1), p + ".proj");
    }
    case SemanticType::categorical: {
      const auto& values = std::get<DenseIntBlock>(block).values;
      const Index k = st.num_categories;
      std::vector<Index> idx(n);
      for (Index i = 0; i < n; ++i) {
        const Index m = values(i, j);
        if (m < kMissingIndex || m >= k) {
          throw IndexOutOfRange("category index " + std::to_string(m) + " in column '" + name +
                                "' outside [-1, " + std::to_string(k) + ")");
        }
        idx[i] = m == kMissingIndex ? k : m;
      }
      return ad::gather_rows(param(p + ".table"), idx);
    }
    case SemanticType::multicategorical:
    case SemanticType::text_tokenized: {
      const auto& nested = std::get<NestedBlock>(block);
      const bool tokens = s == SemanticType::text_tokenized;
      const DiffTensor& table =
          tokens ? param("enc.text_tokenized.token_table") : param(p + ".table");
      const Index k = tokens ? table.dim(0) : st.num_categories;
      std::vector<Index> idx;
      std::vector<std::int64_t> offsets{0};
      for (Index i = 0; i < n; ++i) {
        for (std::int64_t m : nested.get(i, j)) {
          if (tokens && (m < 0 || m >= k)) {
            throw TokenOutOfRange("token id " + std::to_string(m) + " in column '" + name +
                                  "' outside [0, " + std::to_string(k) + ")");
          }
          if (!tokens && (m < kMissingIndex || m >= k)) {
            throw IndexOutOfRange("category index " + std::to_string(m) + " in column '" +
                                  name + "' outside [-1, " + std::to_string(k) + ")");
          }
          idx.push_back(m == kMissingIndex ? k : m);
        }
        offsets.push_back(static_cast<std::int64_t>(idx.size()));
      }
      DiffTensor pooled = ad::segment_mean(ad::gather_rows(table, idx), offsets);
      if (tokens) pooled = ad::matmul(pooled, param("enc.text_tokenized.proj.weight"));
      return pooled;
    }
    case SemanticType::timestamp: {
      const auto& ts = std::get<TimestampBlock>(block);
      std::vector<Index> month(n), weekday(n);
      const Index nc = static_cast<Index>(kContinuousComponents.size());
      Eigen::VectorXd cont(n * nc);
      for (Index i = 0; i < n; ++i) {
        const std::int64_t mo = ts.component(i, j, kMonthComponent);
        const std::int64_t wd = ts.component(i, j, kWeekdayComponent);
        month[i] = mo >= 1 && mo <= 12 ? mo - 1 : 12;
        weekday[i] = wd >= 0 && wd <= 6 ? wd : 7;
        for (Index c = 0; c < nc; ++c) {
          const Index comp = kContinuousComponents[c];
          const std::int64_t v = ts.component(i, j, comp);
          cont[i * nc + c] =
              v < 0 ? 0.0 : normalize(static_cast<double>(v), st.components[comp]);
        }
      }
      return ad::gather_rows(param(p + ".month"), month) +
             ad::gather_rows(param(p + ".weekday"), weekday) +
             linear(constant({n, nc}, std::move(cont)), p + ".continuous");
    }
    case SemanticType::text_embedded:
    case SemanticType::embedding: {
      const auto& emb = std::get<MultiEmbeddingTensor>(block);
      const Index d = emb.dims()[j];
      if (d != st.embedding_dim) {
        throw ShapeMismatch("column '" + name + "' has " + std::to_string(d) +
                            "-dim embeddings, model expects " +
                            std::to_string(st.embedding_dim));
      }
      const RowMajorMatrixXd col = emb.column(j);
      Eigen::VectorXd flat = Eigen::Map<const Eigen::VectorXd>(col.data(), col.size());
      return linear(constant({n, d}, std::move(flat)), p);
    }
  }
  (void)f;
  throw SchemaError("unhandled semantic type");
}

DiffTensor TabularModel::encode_stype(const TensorFrame& frame, SemanticType s) const {
  check_frame(frame);
  const Index n = frame.num_rows;
  auto it = spec_.names.find(s);
  if (it == spec_.names.end()) return DiffTensor::zeros({n, 0, config_.channels});
  std::vector<DiffTensor> cols;
  for (Index j = 0; j < static_cast<Index>(it->second.size()); ++j) {
    cols.push_back(ad::reshape(encode_column(frame, s, j), {n, 1, config_.channels}));
  }
  return ad::concat(cols, 1);
}

DiffTensor TabularModel::encode(const TensorFrame& frame) const {
  check_frame(frame);
  const Index n = frame.num_rows;
  std::vector<DiffTensor> cols;
  for (const auto& [s, names] : spec_.names) {
    for (Index j = 0; j < static_cast<Index>(names.size()); ++j) {
      cols.push_back(ad::reshape(encode_column(frame, s, j), {n, 1, config_.channels}));
    }
  }
  return ad::concat(cols, 1);
}

DiffTensor TabularModel::prepend_cls(const DiffTensor& x) const {
  if (config_.decoder != Decoder::cls) return x;
  const Index n = x.dim(0);
  const std::vector<Index> zeros(n, 0);
  const DiffTensor cls = ad::reshape(ad::gather_rows(param("cls"), zeros), {n, 1, x.dim(2)});
  const std::vector<DiffTensor> parts{cls, x};
  return ad::concat(parts, 1);
}

DiffTensor TabularModel::interaction_layer(const DiffTensor& x, Index layer) const {
  if (x.rank() != 3 || x.dim(2) != config_.channels) {
    throw ShapeMismatch("interaction expects [N, C, " + std::to_string(config_.channels) +
                        "], got " + ad::shape_str(x.shape()));
  }
  const std::string p = layer_prefix(layer);
  const Index f = config_.channels;
  const Index heads = config_.num_heads;
  const Index dh = f / heads;

  DiffTensor h = x;
  if (config_.interaction == Interaction::self_attention_positional) {
    const DiffTensor& pos = param(p + ".pos");
    if (pos.dim(0) != x.dim(1)) {
      throw ShapeMismatch("positional table has " + std::to_string(pos.dim(0)) +
                          " columns, input has " + std::to_string(x.dim(1)));
    }
    h = h + pos;
  }
  const DiffTensor normed =
      ad::layer_norm_lastdim(h) * param(p + ".norm1.gain") + param(p + ".norm1.bias");
  const DiffTensor q = linear(normed, p + ".query");
  const DiffTensor k = linear(normed, p + ".key");
  const DiffTensor v = linear(normed, p + ".value");
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<DiffTensor> outs;
  for (Index hd = 0; hd < heads; ++hd) {
    const DiffTensor qh = ad::slice(q, 2, hd * dh, dh);
    const DiffTensor kh = ad::slice(k, 2, hd * dh, dh);
    const DiffTensor vh = ad::slice(v, 2, hd * dh, dh);
    const DiffTensor scores = inv_sqrt * ad::matmul(qh, ad::transpose_last2(kh));
    outs.push_back(ad::matmul(ad::softmax_lastdim(scores), vh));
  }
  const DiffTensor attn = linear(heads == 1 ? outs.front() : ad::concat(outs, 2), p + ".out");
  const DiffTensor x1 = h + attn;
  const DiffTensor normed2 =
      ad::layer_norm_lastdim(x1) * param(p + ".norm2.gain") + param(p + ".norm2.bias");
  const DiffTensor ffn = linear(ad::relu(linear(normed2, p + ".ffn1")), p + ".ffn2");
  return x1 + ffn;
}

DiffTensor TabularModel::decode(const DiffTensor& x) const {
  if (x.rank() != 3 || x.dim(2) != config_.channels) {
    throw ShapeMismatch("decoder expects [N, C, " + std::to_string(config_.channels) +
                        "], got " + ad::shape_str(x.shape()));
  }
  const Index n = x.dim(0), c = x.dim(1), f = x.dim(2);
  switch (config_.decoder) {
    case Decoder::mean_pool:
      return linear(ad::mean_axis(x, 1), "dec.proj");
    case Decoder::attention_pool: {
      const DiffTensor logits = ad::reshape(ad::matmul(x, param("dec.query")), {n, 1, c});
      const DiffTensor pooled = ad::matmul(ad::softmax_lastdim(logits), x);
      return linear(ad::reshape(pooled, {n, f}), "dec.proj");
    }
    case Decoder::cls:
      return linear(ad::reshape(ad::slice(x, 1, 0, 1), {n, f}), "dec.proj");
    case Decoder::flatten_mlp: {
      const Index width = param("dec.mlp1.weight").dim(0);
      if (c * f != width) {
        throw ShapeMismatch("flatten decoder built for " + std::to_string(width / f) +
                            " columns, got " + std::to_string(c));
      }
      return linear(ad::relu(linear(ad::reshape(x, {n, c * f}), "dec.mlp1")), "dec.mlp2");
    }
  }
  throw ConfigError("unhandled decoder");
}

DiffTensor TabularModel::apply_head(const DiffTensor& z) const {
  if (config_.head == Head::none) return {};
  return ad::reshape(linear(z, "head"), {z.dim(0)});
}

ModelOutput TabularModel::forward(const TensorFrame& frame) const {
  DiffTensor x = prepend_cls(encode(frame));
  if (config_.interaction != Interaction::none) {
    for (Index l = 0; l < config_.num_layers; ++l) x = interaction_layer(x, l);
  }
  ModelOutput out;
  out.z = decode(x);
  out.prediction = apply_head(out.z);
  return out;
}

RowMajorMatrixXd TabularModel::embed_rows(const TensorFrame& frame) const {
  ad::NoGradGuard no_grad;
  const DiffTensor z = forward(frame).z;
  return Eigen::Map<const RowMajorMatrixXd>(z.data().data(), z.dim(0), z.dim(1));
}

}  // namespace tabframe
