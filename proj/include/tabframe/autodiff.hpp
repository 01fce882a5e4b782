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

#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tabframe/ragged.hpp"

namespace tabframe::ad {

using Shape = std::vector<Index>;

Index numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Node {
  Shape shape;
  Eigen::VectorXd data;  // row-major
  Eigen::VectorXd grad;  // empty until a gradient reaches the node
  bool requires_grad = false;
};

/// Dense float64 tensor participating in reverse-mode differentiation.
/// Copies share the underlying node.
class DiffTensor {
 public:
  DiffTensor() = default;
  DiffTensor(Shape shape, Eigen::VectorXd data, bool requires_grad = false);

  static DiffTensor zeros(Shape shape, bool requires_grad = false);
  static DiffTensor full(Shape shape, double value, bool requires_grad = false);
  static DiffTensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  Index dim(Index axis) const;
  Index rank() const { return static_cast<Index>(node_->shape.size()); }
  Index numel() const { return node_->data.size(); }

  const Eigen::VectorXd& data() const { return node_->data; }
  /// In-place access for optimizers and finite differences. Never use on
  /// tensors that are inputs of recorded ops awaiting backward.
  Eigen::VectorXd& mutable_data() { return node_->data; }
  double item() const;
  double at(std::initializer_list<Index> index) const;

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return node_->grad.size() == numel(); }
  /// Gradient, or zeros when none has been accumulated.
  Eigen::VectorXd grad() const;
  void zero_grad() { node_->grad.resize(0); }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

enum class OpKind {
  matmul,
  add,
  sub,
  mul,
  scale,
  relu,
  sin,
  cos,
  softmax_lastdim,
  layer_norm_lastdim,
  mean_axis,
  sum_all,
  concat_axis,
  gather_rows,
  segment_mean,
  reshape,
  slice,
  transpose_last2,
  bce_with_logits,
};

const char* to_string(OpKind kind);

struct TapeRecord {
  OpKind kind;
  std::vector<std::shared_ptr<Node>> inputs;
  std::shared_ptr<Node> output;
  // Accumulates output->grad into the inputs' grads. Captures whatever
  // activations the op saved.
  std::function<void()> backward;
};

/// Define-by-run tape, one per thread. Ops append a record whenever an input
/// requires grad and recording is enabled.
class Tape {
 public:
  static Tape& current();

  void record(TapeRecord rec) { records_.push_back(std::move(rec)); }
  const std::vector<TapeRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  void clear() { records_.clear(); }

  bool recording() const { return enabled_; }
  void set_recording(bool on) { enabled_ = on; }

 private:
  std::vector<TapeRecord> records_;
  bool enabled_ = true;
};

/// Disables recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(Tape::current().recording()) {
    Tape::current().set_recording(false);
  }
  ~NoGradGuard() { Tape::current().set_recording(previous_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// While alive, folds the sign pattern of every relu input evaluated on the
/// current thread into a hash. Two evaluations with equal hashes took the
/// same branch of every kink, so finite differences between them are valid.
class ActivationPatternProbe {
 public:
  ActivationPatternProbe();
  ~ActivationPatternProbe();
  ActivationPatternProbe(const ActivationPatternProbe&) = delete;
  ActivationPatternProbe& operator=(const ActivationPatternProbe&) = delete;

  std::uint64_t hash() const { return hash_; }
  void observe(const Eigen::VectorXd& input);

 private:
  std::uint64_t hash_;
  ActivationPatternProbe* previous_;
};

/// Populates grads of every requires_grad tensor reachable from `loss`
/// (accumulating), then clears the tape. Throws NotScalarLoss or
/// DetachedTensor.
void backward(const DiffTensor& loss);

// ---- ops -------------------------------------------------------------------
//
// Binary elementwise ops broadcast numpy-style (trailing alignment, size-1
// or missing dims expand).

/// a [..., m, k] x b [k, n] -> [..., m, n]; or batched when b has the same
/// leading dims as a.
DiffTensor matmul(const DiffTensor& a, const DiffTensor& b);
DiffTensor add(const DiffTensor& a, const DiffTensor& b);
DiffTensor sub(const DiffTensor& a, const DiffTensor& b);
DiffTensor mul(const DiffTensor& a, const DiffTensor& b);
DiffTensor scale(const DiffTensor& a, double factor);
DiffTensor relu(const DiffTensor& a);
DiffTensor sin(const DiffTensor& a);
DiffTensor cos(const DiffTensor& a);
DiffTensor softmax_lastdim(const DiffTensor& a);
/// Normalizes the last axis to zero mean / unit variance (no affine part).
DiffTensor layer_norm_lastdim(const DiffTensor& a, double eps = 1e-5);
/// Mean over `axis`, which is removed from the shape.
DiffTensor mean_axis(const DiffTensor& a, Index axis);
DiffTensor sum_all(const DiffTensor& a);
DiffTensor mean_all(const DiffTensor& a);
DiffTensor concat(std::span<const DiffTensor> parts, Index axis);
/// Rows of a [V, F] table -> [len(indices), F].
DiffTensor gather_rows(const DiffTensor& table, std::span<const Index> indices);
/// Mean of row segments of x [M, F]: segment s spans rows
/// offsets[s]..offsets[s+1]. Empty segments give zero rows.
DiffTensor segment_mean(const DiffTensor& x, std::span<const std::int64_t> offsets);
/// One dimension may be -1.
DiffTensor reshape(const DiffTensor& a, Shape shape);
DiffTensor slice(const DiffTensor& a, Index axis, Index start, Index length);
DiffTensor transpose_last2(const DiffTensor& a);
/// Mean of max(z,0) - z*y + log(1 + exp(-|z|)) over logits z, labels y in {0,1}.
DiffTensor bce_with_logits(const DiffTensor& logits, std::span<const double> labels);

inline DiffTensor operator+(const DiffTensor& a, const DiffTensor& b) { return add(a, b); }
inline DiffTensor operator-(const DiffTensor& a, const DiffTensor& b) { return sub(a, b); }
inline DiffTensor operator*(const DiffTensor& a, const DiffTensor& b) { return mul(a, b); }
inline DiffTensor operator*(double c, const DiffTensor& a) { return scale(a, c); }

// ---- gradient checking -----------------------------------------------------

struct GradCheckOptions {
  double eps = 1e-4;
  /// When positive, checks this many randomly chosen coordinates per
  /// tensor instead of all of them.
  Index max_coords_per_tensor = 0;
  std::uint64_t seed = 0;
};

/// Largest |a - n| / max(1, |a|, |n|) between backward gradients `a` and
/// central differences `n` of the scalar function f with respect to `wrt`.
double grad_check(const std::function<DiffTensor()>& f,
                  std::span<DiffTensor> wrt, const GradCheckOptions& options = {});

/// Single-input form: f(x) scalar.
double grad_check(const std::function<DiffTensor(const DiffTensor&)>& f,
                  DiffTensor x, double eps = 1e-4);

}  // namespace tabframe::ad
