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

#include "tabframe/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "tabframe/error.hpp"
#include "tabframe/hash.hpp"

namespace tabframe::ad {

Index numel(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream ss;
  ss << '[';
  for (std::size_t k = 0; k < shape.size(); ++k) ss << (k ? ", " : "") << shape[k];
  ss << ']';
  return ss.str();
}

DiffTensor::DiffTensor(Shape shape, Eigen::VectorXd data, bool requires_grad)
    : node_(std::make_shared<Node>()) {
  if (ad::numel(shape) != data.size()) {
    throw ShapeMismatch("shape " + shape_str(shape) + " needs " +
                        std::to_string(ad::numel(shape)) + " values, got " +
                        std::to_string(data.size()));
  }
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

DiffTensor DiffTensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

DiffTensor DiffTensor::full(Shape shape, double value, bool requires_grad) {
  const Index n = ad::numel(shape);
  return DiffTensor(std::move(shape), Eigen::VectorXd::Constant(n, value), requires_grad);
}

DiffTensor DiffTensor::scalar(double value, bool requires_grad) {
  return DiffTensor({}, Eigen::VectorXd::Constant(1, value), requires_grad);
}

Index DiffTensor::dim(Index axis) const {
  if (axis < 0) axis += rank();
  detail::check_index(axis, rank(), "axis");
  return node_->shape[axis];
}

double DiffTensor::item() const {
  if (numel() != 1) throw ShapeMismatch("item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

double DiffTensor::at(std::initializer_list<Index> index) const {
  if (static_cast<Index>(index.size()) != rank()) throw ShapeMismatch("index rank");
  Index flat = 0;
  Index k = 0;
  for (Index i : index) {
    detail::check_index(i, node_->shape[k], "element");
    flat = flat * node_->shape[k] + i;
    ++k;
  }
  return node_->data[flat];
}

Eigen::VectorXd DiffTensor::grad() const {
  return has_grad() ? node_->grad : Eigen::VectorXd::Zero(numel());
}

const char* to_string(OpKind kind) {
  switch (kind) {
    case OpKind::matmul: return "matmul";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::scale: return "scale";
    case OpKind::relu: return "relu";
    case OpKind::sin: return "sin";
    case OpKind::cos: return "cos";
    case OpKind::softmax_lastdim: return "softmax_lastdim";
    case OpKind::layer_norm_lastdim: return "layer_norm_lastdim";
    case OpKind::mean_axis: return "mean_axis";
    case OpKind::sum_all: return "sum_all";
    case OpKind::concat_axis: return "concat_axis";
    case OpKind::gather_rows: return "gather_rows";
    case OpKind::segment_mean: return "segment_mean";
    case OpKind::reshape: return "reshape";
    case OpKind::slice: return "slice";
    case OpKind::transpose_last2: return "transpose_last2";
    case OpKind::bce_with_logits: return "bce_with_logits";
  }
  return "?";
}

Tape& Tape::current() {
  thread_local Tape tape;
  return tape;
}

namespace {

using NodePtr = std::shared_ptr<Node>;

Eigen::VectorXd& grad_of(Node& n) {
  if (n.grad.size() != n.data.size()) n.grad = Eigen::VectorXd::Zero(n.data.size());
  return n.grad;
}

// Builds the output tensor and, when any input requires grad, records the
// op. `backward` receives (output node, input nodes).
template <typename Backward>
DiffTensor emit(OpKind kind, std::vector<DiffTensor> inputs, Shape shape,
                Eigen::VectorXd data, Backward backward) {
  bool record = Tape::current().recording() &&
                std::any_of(inputs.begin(), inputs.end(),
                            [](const DiffTensor& t) { return t.requires_grad(); });
  DiffTensor out(std::move(shape), std::move(data), record);
  if (record) {
    std::vector<NodePtr> nodes;
    for (const auto& t : inputs) nodes.push_back(t.node());
    NodePtr out_node = out.node();
    std::vector<NodePtr> captured = nodes;
    Tape::current().record(
        {kind, std::move(nodes), out_node,
         [out_node, captured, backward]() { backward(*out_node, captured); }});
  }
  return out;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeMismatch(what);
}

Index normalize_axis(Index axis, Index rank) {
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) {
    throw ShapeMismatch("axis " + std::to_string(axis) + " out of range for rank " +
                        std::to_string(rank));
  }
  return axis;
}

// Flat-index maps from an output position to each broadcast operand.
struct Broadcast {
  Shape out;
  bool same = false;
  std::vector<Index> a_index;
  std::vector<Index> b_index;
};

Broadcast broadcast(const Shape& a, const Shape& b, const char* op) {
  Broadcast bc;
  if (a == b) {
    bc.out = a;
    bc.same = true;
    return bc;
  }
  const std::size_t rank = std::max(a.size(), b.size());
  bc.out.assign(rank, 1);
  std::vector<Index> sa(rank, 0), sb(rank, 0);
  Index stride_a = 1, stride_b = 1;
  for (std::size_t k = 0; k < rank; ++k) {
    const std::size_t pos = rank - 1 - k;
    const Index da = k < a.size() ? a[a.size() - 1 - k] : 1;
    const Index db = k < b.size() ? b[b.size() - 1 - k] : 1;
    if (da != db && da != 1 && db != 1) {
      throw ShapeMismatch(std::string(op) + ": cannot broadcast " + shape_str(a) + " with " +
                          shape_str(b));
    }
    bc.out[pos] = std::max(da, db);
    sa[pos] = da == 1 ? 0 : stride_a;
    sb[pos] = db == 1 ? 0 : stride_b;
    stride_a *= da;
    stride_b *= db;
  }
  const Index n = numel(bc.out);
  bc.a_index.resize(n);
  bc.b_index.resize(n);
  std::vector<Index> counter(rank, 0);
  Index ia = 0, ib = 0;
  for (Index k = 0; k < n; ++k) {
    bc.a_index[k] = ia;
    bc.b_index[k] = ib;
    for (std::size_t d = rank; d-- > 0;) {
      ++counter[d];
      ia += sa[d];
      ib += sb[d];
      if (counter[d] < bc.out[d]) break;
      ia -= sa[d] * counter[d];
      ib -= sb[d] * counter[d];
      counter[d] = 0;
    }
  }
  return bc;
}

template <typename Forward, typename GradA, typename GradB>
DiffTensor elementwise(OpKind kind, const DiffTensor& a, const DiffTensor& b,
                       Forward f, GradA ga, GradB gb) {
  auto bc = std::make_shared<Broadcast>(broadcast(a.shape(), b.shape(), to_string(kind)));
  const Index n = numel(bc->out);
  Eigen::VectorXd out(n);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  for (Index k = 0; k < n; ++k) {
    const Index ia = bc->same ? k : bc->a_index[k];
    const Index ib = bc->same ? k : bc->b_index[k];
    out[k] = f(pa[ia], pb[ib]);
  }
  return emit(kind, {a, b}, bc->out, std::move(out),
              [bc, ga, gb](Node& o, const std::vector<NodePtr>& in) {
                const Index n = o.data.size();
                const double* pa = in[0]->data.data();
                const double* pb = in[1]->data.data();
                for (int side = 0; side < 2; ++side) {
                  if (!in[side]->requires_grad) continue;
                  Eigen::VectorXd& g = grad_of(*in[side]);
                  for (Index k = 0; k < n; ++k) {
                    const Index ia = bc->same ? k : bc->a_index[k];
                    const Index ib = bc->same ? k : bc->b_index[k];
                    if (side == 0) {
                      g[ia] += o.grad[k] * ga(pa[ia], pb[ib]);
                    } else {
                      g[ib] += o.grad[k] * gb(pa[ia], pb[ib]);
                    }
                  }
                }
              });
}

template <typename Forward, typename Derivative>
DiffTensor unary(OpKind kind, const DiffTensor& a, Forward f, Derivative df) {
  const Index n = a.numel();
  Eigen::VectorXd out(n);
  for (Index k = 0; k < n; ++k) out[k] = f(a.data()[k]);
  return emit(kind, {a}, a.shape(), std::move(out),
              [df](Node& o, const std::vector<NodePtr>& in) {
                if (!in[0]->requires_grad) return;
                Eigen::VectorXd& g = grad_of(*in[0]);
                for (Index k = 0; k < o.data.size(); ++k) {
                  g[k] += o.grad[k] * df(in[0]->data[k], o.data[k]);
                }
              });
}

// Splits a shape around `axis` into (outer, length, inner) extents.
struct AxisSplit {
  Index outer = 1;
  Index length = 1;
  Index inner = 1;
};

AxisSplit split_at(const Shape& shape, Index axis) {
  AxisSplit s;
  for (Index k = 0; k < axis; ++k) s.outer *= shape[k];
  s.length = shape[axis];
  for (Index k = axis + 1; k < static_cast<Index>(shape.size()); ++k) s.inner *= shape[k];
  return s;
}

}  // namespace

void backward(const DiffTensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw NotScalarLoss("loss must be a scalar, got shape " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  }
  Tape& tape = Tape::current();
  const auto& records = tape.records();
  std::size_t end = records.size();
  while (end > 0 && records[end - 1].output != loss.node()) --end;
  if (end == 0) {
    tape.clear();
    throw DetachedTensor("loss was not produced by ops recorded on this tape");
  }
  grad_of(*loss.node())[0] += 1.0;
  for (std::size_t k = end; k-- > 0;) {
    const auto& rec = records[k];
    if (rec.output->grad.size() != rec.output->data.size()) continue;
    rec.backward();
  }
  tape.clear();
}

DiffTensor matmul(const DiffTensor& a, const DiffTensor& b) {
  require(a.rank() >= 2 && b.rank() >= 2,
          "matmul needs rank >= 2 operands, got " + shape_str(a.shape()) + " and " +
              shape_str(b.shape()));
  const Index m = a.dim(-2), k = a.dim(-1), n = b.dim(-1);
  const bool batched = b.rank() > 2;
  Index batch = 1;
  for (Index d = 0; d < a.rank() - 2; ++d) batch *= a.shape()[d];
  if (batched) {
    require(b.rank() == a.rank() &&
                std::equal(a.shape().begin(), a.shape().end() - 2, b.shape().begin()),
            "matmul batch dims differ: " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  require(b.dim(-2) == k, "matmul contraction mismatch: " + shape_str(a.shape()) + " and " +
                              shape_str(b.shape()));
  Shape shape = a.shape();
  shape.back() = n;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(batch * m * n);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data();
  for (Index t = 0; t < batch; ++t) {
    const double* bt = pb + (batched ? t * k * n : 0);
    for (Index i = 0; i < m; ++i) {
      const double* arow = pa + (t * m + i) * k;
      double* orow = po + (t * m + i) * n;
      for (Index kk = 0; kk < k; ++kk) {
        const double av = arow[kk];
        const double* brow = bt + kk * n;
        for (Index j = 0; j < n; ++j) orow[j] += av * brow[j];
      }
    }
  }
  return emit(OpKind::matmul, {a, b}, std::move(shape), std::move(out),
              [batch, batched, m, k, n](Node& o, const std::vector<NodePtr>& in) {
                const double* pa = in[0]->data.data();
                const double* pb = in[1]->data.data();
                const double* go = o.grad.data();
                if (in[0]->requires_grad) {
                  double* ga = grad_of(*in[0]).data();
                  for (Index t = 0; t < batch; ++t) {
                    const double* bt = pb + (batched ? t * k * n : 0);
                    for (Index i = 0; i < m; ++i) {
                      const double* grow = go + (t * m + i) * n;
                      double* garow = ga + (t * m + i) * k;
                      for (Index kk = 0; kk < k; ++kk) {
                        const double* brow = bt + kk * n;
                        double acc = 0.0;
                        for (Index j = 0; j < n; ++j) acc += grow[j] * brow[j];
                        garow[kk] += acc;
                      }
                    }
                  }
                }
                if (in[1]->requires_grad) {
                  double* gb = grad_of(*in[1]).data();
                  for (Index t = 0; t < batch; ++t) {
                    double* gbt = gb + (batched ? t * k * n : 0);
                    for (Index i = 0; i < m; ++i) {
                      const double* arow = pa + (t * m + i) * k;
                      const double* grow = go + (t * m + i) * n;
                      for (Index kk = 0; kk < k; ++kk) {
                        const double av = arow[kk];
                        double* gbrow = gbt + kk * n;
                        for (Index j = 0; j < n; ++j) gbrow[j] += av * grow[j];
                      }
                    }
                  }
                }
              });
}

DiffTensor add(const DiffTensor& a, const DiffTensor& b) {
  return elementwise(
      OpKind::add, a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

DiffTensor sub(const DiffTensor& a, const DiffTensor& b) {
  return elementwise(
      OpKind::sub, a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

DiffTensor mul(const DiffTensor& a, const DiffTensor& b) {
  return elementwise(
      OpKind::mul, a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

DiffTensor scale(const DiffTensor& a, double factor) {
  return unary(
      OpKind::scale, a, [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

namespace {
thread_local ActivationPatternProbe* active_probe = nullptr;
}  // namespace

ActivationPatternProbe::ActivationPatternProbe()
    : hash_(kFnvOffsetBasis), previous_(active_probe) {
  active_probe = this;
}

ActivationPatternProbe::~ActivationPatternProbe() { active_probe = previous_; }

void ActivationPatternProbe::observe(const Eigen::VectorXd& input) {
  for (Index k = 0; k < input.size(); ++k) {
    hash_ = (hash_ ^ (input[k] > 0.0 ? 1u : 0u)) * kFnvPrime;
  }
  if (previous_) previous_->observe(input);
}

DiffTensor relu(const DiffTensor& a) {
  if (active_probe) active_probe->observe(a.data());
  return unary(
      OpKind::relu, a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

DiffTensor sin(const DiffTensor& a) {
  return unary(
      OpKind::sin, a, [](double x) { return std::sin(x); },
      [](double x, double) { return std::cos(x); });
}

DiffTensor cos(const DiffTensor& a) {
  return unary(
      OpKind::cos, a, [](double x) { return std::cos(x); },
      [](double x, double) { return -std::sin(x); });
}

DiffTensor softmax_lastdim(const DiffTensor& a) {
  require(a.rank() >= 1, "softmax needs rank >= 1");
  const Index d = a.dim(-1);
  const Index rows = d == 0 ? 0 : a.numel() / d;
  Eigen::VectorXd out(a.numel());
  const double* x = a.data().data();
  for (Index r = 0; r < rows; ++r) {
    const double* xr = x + r * d;
    double* yr = out.data() + r * d;
    double mx = xr[0];
    for (Index j = 1; j < d; ++j) mx = std::max(mx, xr[j]);
    double sum = 0.0;
    for (Index j = 0; j < d; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      sum += yr[j];
    }
    for (Index j = 0; j < d; ++j) yr[j] /= sum;
  }
  return emit(OpKind::softmax_lastdim, {a}, a.shape(), std::move(out),
              [rows, d](Node& o, const std::vector<NodePtr>& in) {
                if (!in[0]->requires_grad) return;
                double* g = grad_of(*in[0]).data();
                for (Index r = 0; r < rows; ++r) {
                  const double* y = o.data.data() + r * d;
                  const double* gy = o.grad.data() + r * d;
                  double dot = 0.0;
                  for (Index j = 0; j < d; ++j) dot += gy[j] * y[j];
                  for (Index j = 0; j < d; ++j) g[r * d + j] += y[j] * (gy[j] - dot);
                }
              });
}

DiffTensor layer_norm_lastdim(const DiffTensor& a, double eps) {
  require(a.rank() >= 1, "layer_norm needs rank >= 1");
  const Index d = a.dim(-1);
  const Index rows = d == 0 ? 0 : a.numel() / d;
  Eigen::VectorXd out(a.numel());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  const double* x = a.data().data();
  for (Index r = 0; r < rows; ++r) {
    const double* xr = x + r * d;
    double mean = 0.0;
    for (Index j = 0; j < d; ++j) mean += xr[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (Index j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = inv;
    for (Index j = 0; j < d; ++j) out[r * d + j] = (xr[j] - mean) * inv;
  }
  return emit(OpKind::layer_norm_lastdim, {a}, a.shape(), std::move(out),
              [rows, d, inv_std](Node& o, const std::vector<NodePtr>& in) {
                if (!in[0]->requires_grad) return;
                double* g = grad_of(*in[0]).data();
                for (Index r = 0; r < rows; ++r) {
                  const double* y = o.data.data() + r * d;
                  const double* gy = o.grad.data() + r * d;
                  double mean_g = 0.0, mean_gy = 0.0;
                  for (Index j = 0; j < d; ++j) {
                    mean_g += gy[j];
                    mean_gy += gy[j] * y[j];
                  }
                  mean_g /= static_cast<double>(d);
                  mean_gy /= static_cast<double>(d);
                  for (Index j = 0; j < d; ++j) {
                    g[r * d + j] += (*inv_std)[r] * (gy[j] - mean_g - y[j] * mean_gy);
                  }
                }
              });
}

DiffTensor mean_axis(const DiffTensor& a, Index axis) {
  axis = normalize_axis(axis, a.rank());
  const AxisSplit s = split_at(a.shape(), axis);
  require(s.length > 0, "mean over an empty axis");
  Shape shape = a.shape();
  shape.erase(shape.begin() + axis);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(s.outer * s.inner);
  const double* x = a.data().data();
  const double inv = 1.0 / static_cast<double>(s.length);
  for (Index o = 0; o < s.outer; ++o) {
    double* yo = out.data() + o * s.inner;
    for (Index l = 0; l < s.length; ++l) {
      const double* xl = x + (o * s.length + l) * s.inner;
      for (Index i = 0; i < s.inner; ++i) yo[i] += xl[i];
    }
    for (Index i = 0; i < s.inner; ++i) yo[i] *= inv;
  }
  return emit(OpKind::mean_axis, {a}, std::move(shape), std::move(out),
              [s, inv](Node& o, const std::vector<NodePtr>& in) {
                if (!in[0]->requires_grad) return;
                double* g = grad_of(*in[0]).data();
                for (Index oo = 0; oo < s.outer; ++oo) {
                  for (Index l = 0; l < s.length; ++l) {
                    for (Index i = 0; i < s.inner; ++i) {
                      g[(oo * s.length + l) * s.inner + i] += o.grad[oo * s.inner + i] * inv;
                    }
                  }
                }
              });
}

DiffTensor sum_all(const DiffTensor& a) {
  double sum = 0.0;
  for (Index k = 0; k < a.numel(); ++k) sum += a.data()[k];
  return emit(OpKind::sum_all, {a}, {}, Eigen::VectorXd::Constant(1, sum),
              [](Node& o, const std::vector<NodePtr>& in) {
                if (!in[0]->requires_grad) return;
                grad_of(*in[0]).array() += o.grad[0];
              });
}

DiffTensor mean_all(const DiffTensor& a) {
  require(a.numel() > 0, "mean of an empty tensor");
  return scale(sum_all(a), 1.0 / static_cast<double>(a.numel()));
}

DiffTensor concat(std::span<const DiffTensor> parts, Index axis) {
  require(!parts.empty(), "concat of zero tensors");
  axis = normalize_axis(axis, parts.front().rank());
  Shape shape = parts.front().shape();
  shape[axis] = 0;
  std::vector<Index> lengths;
  for (const auto& p : parts) {
    Shape expect = parts.front().shape();
    expect[axis] = p.shape().size() > static_cast<std::size_t>(axis) ? p.shape()[axis] : -1;
    require(p.shape() == expect, "concat shape mismatch: " + shape_str(parts.front().shape()) +
                                     " and " + shape_str(p.shape()));
    lengths.push_back(p.shape()[axis]);
    shape[axis] += p.shape()[axis];
  }
  const AxisSplit s = split_at(shape, axis);
  Eigen::VectorXd out(numel(shape));
  Index offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Index chunk = lengths[p] * s.inner;
    for (Index o = 0; o < s.outer; ++o) {
      std::copy_n(parts[p].data().data() + o * chunk, chunk,
                  out.data() + o * s.length * s.inner + offset);
    }
    offset += chunk;
  }
  std::vector<DiffTensor> inputs(parts.begin(), parts.end());
  return emit(OpKind::concat_axis, std::move(inputs), std::move(shape), std::move(out),
              [s, lengths](Node& o, const std::vector<NodePtr>& in) {
                Index offset = 0;
                for (std::size_t p = 0; p < in.size(); ++p) {
                  const Index chunk = lengths[p] * s.inner;
                  if (in[p]->requires_grad) {
                    double* g = grad_of(*in[p]).data();
                    for (Index oo = 0; oo < s.outer; ++oo) {
                      const double* src = o.grad.data() + oo * s.length * s.inner + offset;
                      for (Index c = 0; c < chunk; ++c) g[oo * chunk + c] += src[c];
                    }
                  }
                  offset += chunk;
                }
              });
}

DiffTensor gather_rows(const DiffTensor& table, std::span<const Index> indices) {
  require(table.rank() == 2, "gather_rows needs a [V, F] table, got " + shape_str(table.shape()));
  const Index v = table.dim(0), f = table.dim(1);
  auto idx = std::make_shared<std::vector<Index>>(indices.begin(), indices.end());
  Eigen::VectorXd out(static_cast<Index>(idx->size()) * f);
  for (std::size_t l = 0; l < idx->size(); ++l) {
    detail::check_index((*idx)[l], v, "gather");
    std::copy_n(table.data().data() + (*idx)[l] * f, f, out.data() + static_cast<Index>(l) * f);
  }
  return emit(OpKind::gather_rows, {table}, {static_cast<Index>(idx->size()), f}, std::move(out),
              [idx, f](Node& o, const std::vector<NodePtr>& in) {
                if (!in[0]->requires_grad) return;
                double* g = grad_of(*in[0]).data();
                for (std::size_t l = 0; l < idx->size(); ++l) {
                  const double* src = o.grad.data() + static_cast<Index>(l) * f;
                  double* dst = g + (*idx)[l] * f;
                  for (Index c = 0; c < f; ++c) dst[c] += src[c];
                }
              });
}

DiffTensor segment_mean(const DiffTensor& x, std::span<const std::int64_t> offsets) {
  require(x.rank() == 2, "segment_mean needs a [M, F] input, got " + shape_str(x.shape()));
  require(!offsets.empty(), "segment_mean needs at least one offset");
  const Index m = x.dim(0), f = x.dim(1);
  const Index segments = static_cast<Index>(offsets.size()) - 1;
  auto off = std::make_shared<std::vector<std::int64_t>>(offsets.begin(), offsets.end());
  for (Index s = 0; s < segments; ++s) {
    require((*off)[s] >= 0 && (*off)[s] <= (*off)[s + 1] && (*off)[s + 1] <= m,
            "segment offsets must be non-decreasing within [0, rows]");
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(segments * f);
  for (Index s = 0; s < segments; ++s) {
    const Index len = (*off)[s + 1] - (*off)[s];
    if (len == 0) continue;
    double* dst = out.data() + s * f;
    for (Index r = (*off)[s]; r < (*off)[s + 1]; ++r) {
      const double* src = x.data().data() + r * f;
      for (Index c = 0; c < f; ++c) dst[c] += src[c];
    }
    const double inv = 1.0 / static_cast<double>(len);
    for (Index c = 0; c < f; ++c) dst[c] *= inv;
  }
  return emit(OpKind::segment_mean, {x}, {segments, f}, std::move(out),
              [off, segments, f](Node& o, const std::vector<NodePtr>& in) {
                if (!in[0]->requires_grad) return;
                double* g = grad_of(*in[0]).data();
                for (Index s = 0; s < segments; ++s) {
                  const Index len = (*off)[s + 1] - (*off)[s];
                  if (len == 0) continue;
                  const double inv = 1.0 / static_cast<double>(len);
                  const double* src = o.grad.data() + s * f;
                  for (Index r = (*off)[s]; r < (*off)[s + 1]; ++r) {
                    for (Index c = 0; c < f; ++c) g[r * f + c] += src[c] * inv;
                  }
                }
              });
}

DiffTensor reshape(const DiffTensor& a, Shape shape) {
  Index known = 1;
  Index infer = -1;
  for (std::size_t k = 0; k < shape.size(); ++k) {
    if (shape[k] == -1) {
      require(infer < 0, "reshape allows a single -1");
      infer = static_cast<Index>(k);
    } else {
      known *= shape[k];
    }
  }
  if (infer >= 0) {
    require(known > 0 && a.numel() % known == 0,
            "cannot reshape " + shape_str(a.shape()) + " to " + shape_str(shape));
    shape[infer] = a.numel() / known;
  }
  require(numel(shape) == a.numel(),
          "cannot reshape " + shape_str(a.shape()) + " to " + shape_str(shape));
  return emit(OpKind::reshape, {a}, std::move(shape), a.data(),
              [](Node& o, const std::vector<NodePtr>& in) {
                if (!in[0]->requires_grad) return;
                grad_of(*in[0]) += o.grad;
              });
}

DiffTensor slice(const DiffTensor& a, Index axis, Index start, Index length) {
  axis = normalize_axis(axis, a.rank());
  const AxisSplit s = split_at(a.shape(), axis);
  require(start >= 0 && length >= 0 && start + length <= s.length,
          "slice [" + std::to_string(start) + ", " + std::to_string(start + length) +
              ") outside axis of length " + std::to_string(s.length));
  Shape shape = a.shape();
  shape[axis] = length;
  const Index chunk = length * s.inner;
  Eigen::VectorXd out(s.outer * chunk);
  for (Index o = 0; o < s.outer; ++o) {
    std::copy_n(a.data().data() + (o * s.length + start) * s.inner, chunk,
                out.data() + o * chunk);
  }
  return emit(OpKind::slice, {a}, std::move(shape), std::move(out),
              [s, start, chunk](Node& o, const std::vector<NodePtr>& in) {
                if (!in[0]->requires_grad) return;
                double* g = grad_of(*in[0]).data();
                for (Index oo = 0; oo < s.outer; ++oo) {
                  double* dst = g + (oo * s.length + start) * s.inner;
                  const double* src = o.grad.data() + oo * chunk;
                  for (Index c = 0; c < chunk; ++c) dst[c] += src[c];
                }
              });
}

DiffTensor transpose_last2(const DiffTensor& a) {
  require(a.rank() >= 2, "transpose needs rank >= 2");
  const Index m = a.dim(-2), n = a.dim(-1);
  const Index batch = m * n == 0 ? 0 : a.numel() / (m * n);
  Shape shape = a.shape();
  std::swap(shape[shape.size() - 1], shape[shape.size() - 2]);
  Eigen::VectorXd out(a.numel());
  for (Index t = 0; t < batch; ++t) {
    for (Index i = 0; i < m; ++i) {
      for (Index j = 0; j < n; ++j) out[t * m * n + j * m + i] = a.data()[t * m * n + i * n + j];
    }
  }
  return emit(OpKind::transpose_last2, {a}, std::move(shape), std::move(out),
              [batch, m, n](Node& o, const std::vector<NodePtr>& in) {
                if (!in[0]->requires_grad) return;
                double* g = grad_of(*in[0]).data();
                for (Index t = 0; t < batch; ++t) {
                  for (Index i = 0; i < m; ++i) {
                    for (Index j = 0; j < n; ++j) {
                      g[t * m * n + i * n + j] += o.grad[t * m * n + j * m + i];
                    }
                  }
                }
              });
}

DiffTensor bce_with_logits(const DiffTensor& logits, std::span<const double> labels) {
  const Index n = logits.numel();
  if (static_cast<Index>(labels.size()) != n) {
    throw LengthMismatch("bce_with_logits: " + std::to_string(n) + " logits, " +
                         std::to_string(labels.size()) + " labels");
  }
  require(n > 0, "bce_with_logits on an empty batch");
  auto y = std::make_shared<std::vector<double>>(labels.begin(), labels.end());
  double total = 0.0;
  for (Index k = 0; k < n; ++k) {
    const double t = (*y)[k];
    if (t != 0.0 && t != 1.0) {
      throw LabelOutOfRange("label " + std::to_string(t) + " at position " +
                            std::to_string(k) + " is not 0 or 1");
    }
    const double z = logits.data()[k];
    total += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
  }
  return emit(OpKind::bce_with_logits, {logits}, {},
              Eigen::VectorXd::Constant(1, total / static_cast<double>(n)),
              [y, n](Node& o, const std::vector<NodePtr>& in) {
                if (!in[0]->requires_grad) return;
                double* g = grad_of(*in[0]).data();
                const double scale = o.grad[0] / static_cast<double>(n);
                for (Index k = 0; k < n; ++k) {
                  const double z = in[0]->data[k];
                  const double sig = z >= 0 ? 1.0 / (1.0 + std::exp(-z))
                                            : std::exp(z) / (1.0 + std::exp(z));
                  g[k] += scale * (sig - (*y)[k]);
                }
              });
}

double grad_check(const std::function<DiffTensor()>& f, std::span<DiffTensor> wrt,
                  const GradCheckOptions& options) {
  for (auto& t : wrt) t.zero_grad();
  DiffTensor y = f();
  if (y.numel() != 1) throw NotScalarLoss("grad_check needs a scalar function");
  if (y.requires_grad()) {
    backward(y);
  } else {
    Tape::current().clear();
  }
  std::vector<Eigen::VectorXd> analytic;
  for (auto& t : wrt) {
    analytic.push_back(t.grad());
    t.zero_grad();
  }

  NoGradGuard no_grad;
  SplitMix64 rng(options.seed);
  double worst = 0.0;
  for (std::size_t p = 0; p < wrt.size(); ++p) {
    Eigen::VectorXd& x = wrt[p].mutable_data();
    std::vector<Index> coords(static_cast<std::size_t>(x.size()));
    std::iota(coords.begin(), coords.end(), Index{0});
    if (options.max_coords_per_tensor > 0 &&
        static_cast<Index>(coords.size()) > options.max_coords_per_tensor) {
      for (Index k = 0; k < options.max_coords_per_tensor; ++k) {
        const auto remaining = static_cast<std::uint64_t>(coords.size()) - k;
        std::swap(coords[k], coords[k + static_cast<Index>(rng.next() % remaining)]);
      }
      coords.resize(options.max_coords_per_tensor);
    }
    for (Index c : coords) {
      const double original = x[c];
      x[c] = original + options.eps;
      const double up = f().item();
      x[c] = original - options.eps;
      const double down = f().item();
      x[c] = original;
      const double numeric = (up - down) / (2.0 * options.eps);
      const double a = analytic[p][c];
      const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

double grad_check(const std::function<DiffTensor(const DiffTensor&)>& f, DiffTensor x,
                  double eps) {
  std::vector<DiffTensor> wrt{x};
  GradCheckOptions options;
  options.eps = eps;
  return grad_check([&] { return f(x); }, wrt, options);
}

}  // namespace tabframe::ad
