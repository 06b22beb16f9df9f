#pragma once

#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "gentoc/numerics/rng.hpp"
#include "gentoc/numerics/tensor.hpp"

namespace gentoc::numerics {

template <typename T>
class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape
/// lives.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, int id) : tape_(tape), id_(id) {}

  Shape shape() const;
  std::span<const T> values() const;
  T item() const;
  bool valid() const { return tape_ != nullptr; }
  Tape<T>* tape() const { return tape_; }
  int id() const { return id_; }

 private:
  Tape<T>* tape_ = nullptr;
  int id_ = -1;
};

/// Computation trace for reverse-mode differentiation.
///
/// A recording tape keeps a backward closure per node; a non-recording tape
/// only evaluates, so it can run on a const parameter bundle from several
/// threads at once (one tape per thread).
template <typename T>
class Tape {
 public:
  struct Node {
    Shape shape;
    const T* value = nullptr;
    T* grad = nullptr;
    std::vector<T> own_value;
    std::vector<T> own_grad;
    bool requires_grad = false;
    std::function<void()> backprop;
  };

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  /// Trainable leaf. Gradients accumulate into `p.grad`, which is allocated
  /// on first use.
  Var<T> parameter(Tensor<T>& p);
  /// Read-only leaf view of a tensor; never receives gradient.
  Var<T> constant(const Tensor<T>& p);
  Var<T> constant(Shape shape, std::vector<T> values);

  /// Requires a 1x1 loss. Seeds d(loss)=1 and runs every closure in reverse
  /// creation order.
  void backward(Var<T> loss);

  /// True when every recorded value (and gradient, if present) is finite.
  bool all_finite() const;

  std::size_t node_count() const { return nodes_.size(); }

  // Op-authoring interface.
  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  /// Creates an output node owning a zeroed value buffer (and grad buffer when
  /// `requires_grad` and recording).
  int emit(Shape shape, bool requires_grad);

 private:
  bool record_;
  std::deque<Node> nodes_;
};

extern template class Tape<float>;
extern template class Tape<double>;
extern template class Var<float>;
extern template class Var<double>;

// ---------------------------------------------------------------------------
// Primitives. Each records a backward closure when the tape is recording and
// any input requires gradient.

/// a[m,k] x b[k,n]
template <typename T>
Var<T> matmul(Var<T> a, Var<T> b);
/// x[m,k] x w[k,n] + bias[1,n]
template <typename T>
Var<T> linear(Var<T> x, Var<T> w, Var<T> bias);
template <typename T>
Var<T> add(Var<T> a, Var<T> b);
/// Adds row vector r[1,n] to every row of a[m,n].
template <typename T>
Var<T> add_row(Var<T> a, Var<T> r);
template <typename T>
Var<T> mul(Var<T> a, Var<T> b);
template <typename T>
Var<T> scale(Var<T> a, T factor);
template <typename T>
Var<T> relu(Var<T> a);
template <typename T>
Var<T> sigmoid(Var<T> a);
/// Row-wise softmax.
template <typename T>
Var<T> softmax(Var<T> a);
/// Row-wise normalization with learned gain[1,n] and bias[1,n].
template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias, T eps = T(1e-5));
/// Gathers rows `ids` of table[v,d].
template <typename T>
Var<T> embedding(Var<T> table, std::span<const int> ids);
/// Multi-head scaled dot-product attention over already-projected q[tq,d],
/// k[tk,d], v[tk,d]. With `causal`, query i only sees keys j <= i.
template <typename T>
Var<T> attention(Var<T> q, Var<T> k, Var<T> v, int heads, bool causal);
/// Mean over rows with nonzero weight of -log softmax(logits)[target]. An
/// empty `weights` means all rows count with weight 1.
template <typename T>
Var<T> cross_entropy(Var<T> logits, std::span<const int> targets, std::span<const T> weights = {});
/// Weighted mean binary cross-entropy of sigmoid(logits[n,1]) against 0/1
/// targets.
template <typename T>
Var<T> binary_cross_entropy(Var<T> logits, std::span<const T> targets, std::span<const T> weights = {});
template <typename T>
Var<T> sum(Var<T> a);
/// Rows [begin, end) of a.
template <typename T>
Var<T> slice_rows(Var<T> a, int begin, int end);
/// Inverted dropout; identity when `p == 0`.
template <typename T>
Var<T> dropout(Var<T> a, T p, Rng& rng);

}  // namespace gentoc::numerics
