#include "gentoc/numerics/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace gentoc::numerics {

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

template <typename T>
ConstMatMap<T> view(const typename Tape<T>::Node& n) {
  return ConstMatMap<T>(n.value, n.shape.rows, n.shape.cols);
}

template <typename T>
MatMap<T> grad_view(typename Tape<T>::Node& n) {
  return MatMap<T>(n.grad, n.shape.rows, n.shape.cols);
}

template <typename T>
T* out_values(typename Tape<T>::Node& n) {
  return n.own_value.data();
}

template <typename T>
Tape<T>& same_tape(std::string_view op, Var<T> a, Var<T> b) {
  if (!a.valid() || !b.valid()) {
    throw ShapeError(std::string(op) + ": operand is not bound to a tape");
  }
  if (a.tape() != b.tape()) {
    throw ShapeError(std::string(op) + ": operands recorded on different tapes");
  }
  return *a.tape();
}

template <typename T>
Tape<T>& tape_of(std::string_view op, Var<T> a) {
  if (!a.valid()) {
    throw ShapeError(std::string(op) + ": operand is not bound to a tape");
  }
  return *a.tape();
}

std::string dims(const Shape& s) { return to_string(s); }

void require_same_shape(std::string_view op, const Shape& a, const Shape& b) {
  if (a != b) {
    throw ShapeError(std::string(op) + ": shape mismatch " + dims(a) + " vs " + dims(b));
  }
}

}  // namespace

std::string to_string(const Shape& s) { return std::to_string(s.rows) + "x" + std::to_string(s.cols); }

// ---------------------------------------------------------------------------
// ParameterSet

template <typename T>
int ParameterSet<T>::add(std::string name, Shape shape) {
  if (index_of(name) >= 0) {
    throw NumericsError("duplicate parameter name: " + name);
  }
  params_.push_back(Parameter<T>{std::move(name), Tensor<T>(shape)});
  return static_cast<int>(params_.size()) - 1;
}

template <typename T>
int ParameterSet<T>::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) {
      return static_cast<int>(i);
    }
  }
  return -1;
}

template <typename T>
std::size_t ParameterSet<T>::total_values() const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    n += p.tensor.values.size();
  }
  return n;
}

template <typename T>
void ParameterSet<T>::zero_grad() {
  for (auto& p : params_) {
    p.tensor.zero_grad();
  }
}

template class ParameterSet<float>;
template class ParameterSet<double>;

// ---------------------------------------------------------------------------
// Var / Tape

template <typename T>
Shape Var<T>::shape() const {
  return tape_->node(id_).shape;
}

template <typename T>
std::span<const T> Var<T>::values() const {
  const auto& n = tape_->node(id_);
  return {n.value, n.shape.size()};
}

template <typename T>
T Var<T>::item() const {
  const auto& n = tape_->node(id_);
  if (n.shape.size() != 1) {
    throw ShapeError("item: expected a 1x1 value, got " + to_string(n.shape));
  }
  return n.value[0];
}

template <typename T>
int Tape<T>::emit(Shape shape, bool requires_grad) {
  Node& n = nodes_.emplace_back();
  n.shape = shape;
  n.own_value.assign(shape.size(), T(0));
  n.value = n.own_value.data();
  n.requires_grad = requires_grad && record_;
  if (n.requires_grad) {
    n.own_grad.assign(shape.size(), T(0));
    n.grad = n.own_grad.data();
  }
  return static_cast<int>(nodes_.size()) - 1;
}

template <typename T>
Var<T> Tape<T>::parameter(Tensor<T>& p) {
  if (!record_) {
    return constant(p);
  }
  if (!p.has_grad()) {
    p.zero_grad();
  }
  Node& n = nodes_.emplace_back();
  n.shape = p.shape;
  n.value = p.values.data();
  n.grad = p.grad.data();
  n.requires_grad = true;
  return Var<T>(this, static_cast<int>(nodes_.size()) - 1);
}

template <typename T>
Var<T> Tape<T>::constant(const Tensor<T>& p) {
  Node& n = nodes_.emplace_back();
  n.shape = p.shape;
  n.value = p.values.data();
  return Var<T>(this, static_cast<int>(nodes_.size()) - 1);
}

template <typename T>
Var<T> Tape<T>::constant(Shape shape, std::vector<T> values) {
  if (values.size() != shape.size()) {
    throw ShapeError("constant: " + std::to_string(values.size()) + " values for shape " + to_string(shape));
  }
  Node& n = nodes_.emplace_back();
  n.shape = shape;
  n.own_value = std::move(values);
  n.value = n.own_value.data();
  return Var<T>(this, static_cast<int>(nodes_.size()) - 1);
}

template <typename T>
void Tape<T>::backward(Var<T> loss) {
  if (loss.tape() != this) {
    throw NumericsError("backward: loss recorded on a different tape");
  }
  Node& root = node(loss.id());
  if (root.shape.size() != 1) {
    throw ShapeError("backward: loss must be 1x1, got " + to_string(root.shape));
  }
  if (!record_) {
    throw NumericsError("backward: tape was not recording");
  }
  if (!root.requires_grad) {
    return;
  }
  root.grad[0] += T(1);
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = node(id);
    if (n.requires_grad && n.backprop) {
      n.backprop();
    }
  }
}

template <typename T>
bool Tape<T>::all_finite() const {
  for (const auto& n : nodes_) {
    for (std::size_t i = 0; i < n.shape.size(); ++i) {
      if (!std::isfinite(n.value[i]) || (n.grad != nullptr && !std::isfinite(n.grad[i]))) {
        return false;
      }
    }
  }
  return true;
}

template class Tape<float>;
template class Tape<double>;
template class Var<float>;
template class Var<double>;

// ---------------------------------------------------------------------------
// Primitives

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  auto& tape = same_tape("matmul", a, b);
  auto* na = &tape.node(a.id());
  auto* nb = &tape.node(b.id());
  if (na->shape.cols != nb->shape.rows) {
    throw ShapeError("matmul: inner dimensions differ, a is " + dims(na->shape) + " and b is " + dims(nb->shape));
  }
  const Shape out{na->shape.rows, nb->shape.cols};
  const int id = tape.emit(out, na->requires_grad || nb->requires_grad);
  auto* no = &tape.node(id);
  MatMap<T>(out_values<T>(*no), out.rows, out.cols).noalias() = view<T>(*na) * view<T>(*nb);
  if (no->requires_grad) {
    no->backprop = [na, nb, no] {
      auto g = ConstMatMap<T>(no->grad, no->shape.rows, no->shape.cols);
      if (na->requires_grad) {
        grad_view<T>(*na).noalias() += g * view<T>(*nb).transpose();
      }
      if (nb->requires_grad) {
        grad_view<T>(*nb).noalias() += view<T>(*na).transpose() * g;
      }
    };
  }
  return Var<T>(&tape, id);
}

template <typename T>
Var<T> linear(Var<T> x, Var<T> w, Var<T> bias) {
  auto& tape = same_tape("linear", x, w);
  same_tape("linear", x, bias);
  auto* nx = &tape.node(x.id());
  auto* nw = &tape.node(w.id());
  auto* nb = &tape.node(bias.id());
  if (nx->shape.cols != nw->shape.rows) {
    throw ShapeError("linear: input is " + dims(nx->shape) + " but weight is " + dims(nw->shape));
  }
  if (nb->shape != Shape{1, nw->shape.cols}) {
    throw ShapeError("linear: bias is " + dims(nb->shape) + ", expected 1x" + std::to_string(nw->shape.cols));
  }
  const Shape out{nx->shape.rows, nw->shape.cols};
  const int id = tape.emit(out, nx->requires_grad || nw->requires_grad || nb->requires_grad);
  auto* no = &tape.node(id);
  auto o = MatMap<T>(out_values<T>(*no), out.rows, out.cols);
  o.noalias() = view<T>(*nx) * view<T>(*nw);
  o.rowwise() += view<T>(*nb).row(0);
  if (no->requires_grad) {
    no->backprop = [nx, nw, nb, no] {
      auto g = ConstMatMap<T>(no->grad, no->shape.rows, no->shape.cols);
      if (nx->requires_grad) {
        grad_view<T>(*nx).noalias() += g * view<T>(*nw).transpose();
      }
      if (nw->requires_grad) {
        grad_view<T>(*nw).noalias() += view<T>(*nx).transpose() * g;
      }
      if (nb->requires_grad) {
        grad_view<T>(*nb).row(0) += g.colwise().sum();
      }
    };
  }
  return Var<T>(&tape, id);
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  auto& tape = same_tape("add", a, b);
  auto* na = &tape.node(a.id());
  auto* nb = &tape.node(b.id());
  require_same_shape("add", na->shape, nb->shape);
  const int id = tape.emit(na->shape, na->requires_grad || nb->requires_grad);
  auto* no = &tape.node(id);
  T* o = out_values<T>(*no);
  const std::size_t n = na->shape.size();
  for (std::size_t i = 0; i < n; ++i) {
    o[i] = na->value[i] + nb->value[i];
  }
  if (no->requires_grad) {
    no->backprop = [na, nb, no, n] {
      for (std::size_t i = 0; i < n; ++i) {
        if (na->requires_grad) na->grad[i] += no->grad[i];
        if (nb->requires_grad) nb->grad[i] += no->grad[i];
      }
    };
  }
  return Var<T>(&tape, id);
}

template <typename T>
Var<T> add_row(Var<T> a, Var<T> r) {
  auto& tape = same_tape("add_row", a, r);
  auto* na = &tape.node(a.id());
  auto* nr = &tape.node(r.id());
  if (nr->shape != Shape{1, na->shape.cols}) {
    throw ShapeError("add_row: row is " + dims(nr->shape) + " but matrix is " + dims(na->shape));
  }
  const int id = tape.emit(na->shape, na->requires_grad || nr->requires_grad);
  auto* no = &tape.node(id);
  auto o = MatMap<T>(out_values<T>(*no), na->shape.rows, na->shape.cols);
  o = view<T>(*na);
  o.rowwise() += view<T>(*nr).row(0);
  if (no->requires_grad) {
    no->backprop = [na, nr, no] {
      auto g = ConstMatMap<T>(no->grad, no->shape.rows, no->shape.cols);
      if (na->requires_grad) grad_view<T>(*na) += g;
      if (nr->requires_grad) grad_view<T>(*nr).row(0) += g.colwise().sum();
    };
  }
  return Var<T>(&tape, id);
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  auto& tape = same_tape("mul", a, b);
  auto* na = &tape.node(a.id());
  auto* nb = &tape.node(b.id());
  require_same_shape("mul", na->shape, nb->shape);
  const int id = tape.emit(na->shape, na->requires_grad || nb->requires_grad);
  auto* no = &tape.node(id);
  T* o = out_values<T>(*no);
  const std::size_t n = na->shape.size();
  for (std::size_t i = 0; i < n; ++i) {
    o[i] = na->value[i] * nb->value[i];
  }
  if (no->requires_grad) {
    no->backprop = [na, nb, no, n] {
      for (std::size_t i = 0; i < n; ++i) {
        if (na->requires_grad) na->grad[i] += no->grad[i] * nb->value[i];
        if (nb->requires_grad) nb->grad[i] += no->grad[i] * na->value[i];
      }
    };
  }
  return Var<T>(&tape, id);
}

template <typename T>
Var<T> scale(Var<T> a, T factor) {
  auto& tape = tape_of("scale", a);
  auto* na = &tape.node(a.id());
  const int id = tape.emit(na->shape, na->requires_grad);
  auto* no = &tape.node(id);
  T* o = out_values<T>(*no);
  const std::size_t n = na->shape.size();
  for (std::size_t i = 0; i < n; ++i) {
    o[i] = na->value[i] * factor;
  }
  if (no->requires_grad) {
    no->backprop = [na, no, n, factor] {
      for (std::size_t i = 0; i < n; ++i) na->grad[i] += no->grad[i] * factor;
    };
  }
  return Var<T>(&tape, id);
}

template <typename T>
Var<T> relu(Var<T> a) {
  auto& tape = tape_of("relu", a);
  auto* na = &tape.node(a.id());
  const int id = tape.emit(na->shape, na->requires_grad);
  auto* no = &tape.node(id);
  T* o = out_values<T>(*no);
  const std::size_t n = na->shape.size();
  for (std::size_t i = 0; i < n; ++i) {
    o[i] = na->value[i] > T(0) ? na->value[i] : T(0);
  }
  if (no->requires_grad) {
    no->backprop = [na, no, n] {
      for (std::size_t i = 0; i < n; ++i) {
        if (na->value[i] > T(0)) na->grad[i] += no->grad[i];
      }
    };
  }
  return Var<T>(&tape, id);
}

template <typename T>
Var<T> sigmoid(Var<T> a) {
  auto& tape = tape_of("sigmoid", a);
  auto* na = &tape.node(a.id());
  const int id = tape.emit(na->shape, na->requires_grad);
  auto* no = &tape.node(id);
  T* o = out_values<T>(*no);
  const std::size_t n = na->shape.size();
  for (std::size_t i = 0; i < n; ++i) {
    o[i] = T(1) / (T(1) + std::exp(-na->value[i]));
  }
  if (no->requires_grad) {
    no->backprop = [na, no, n] {
      for (std::size_t i = 0; i < n; ++i) {
        const T y = no->value[i];
        na->grad[i] += no->grad[i] * y * (T(1) - y);
      }
    };
  }
  return Var<T>(&tape, id);
}

template <typename T>
Var<T> softmax(Var<T> a) {
  auto& tape = tape_of("softmax", a);
  auto* na = &tape.node(a.id());
  const int rows = na->shape.rows;
  const int cols = na->shape.cols;
  const int id = tape.emit(na->shape, na->requires_grad);
  auto* no = &tape.node(id);
  T* o = out_values<T>(*no);
  for (int r = 0; r < rows; ++r) {
    const T* x = na->value + static_cast<std::size_t>(r) * cols;
    T* y = o + static_cast<std::size_t>(r) * cols;
    const T mx = *std::max_element(x, x + cols);
    double total = 0.0;
    for (int c = 0; c < cols; ++c) {
      const double e = std::exp(static_cast<double>(x[c] - mx));
      y[c] = static_cast<T>(e);
      total += e;
    }
    for (int c = 0; c < cols; ++c) {
      y[c] = static_cast<T>(static_cast<double>(y[c]) / total);
    }
  }
  if (no->requires_grad) {
    no->backprop = [na, no, rows, cols] {
      for (int r = 0; r < rows; ++r) {
        const std::size_t base = static_cast<std::size_t>(r) * cols;
        double dot = 0.0;
        for (int c = 0; c < cols; ++c) dot += static_cast<double>(no->grad[base + c]) * no->value[base + c];
        for (int c = 0; c < cols; ++c) {
          na->grad[base + c] += static_cast<T>(no->value[base + c] * (no->grad[base + c] - dot));
        }
      }
    };
  }
  return Var<T>(&tape, id);
}

template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias, T eps) {
  auto& tape = same_tape("layer_norm", x, gain);
  same_tape("layer_norm", x, bias);
  auto* nx = &tape.node(x.id());
  auto* ng = &tape.node(gain.id());
  auto* nb = &tape.node(bias.id());
  const int rows = nx->shape.rows;
  const int cols = nx->shape.cols;
  if (ng->shape != Shape{1, cols} || nb->shape != Shape{1, cols}) {
    throw ShapeError("layer_norm: gain " + dims(ng->shape) + " / bias " + dims(nb->shape) + " do not match width " +
                     std::to_string(cols));
  }
  const int id = tape.emit(nx->shape, nx->requires_grad || ng->requires_grad || nb->requires_grad);
  auto* no = &tape.node(id);
  T* o = out_values<T>(*no);
  auto normalized = std::make_shared<std::vector<T>>(nx->shape.size());
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<std::size_t>(rows));
  for (int r = 0; r < rows; ++r) {
    const std::size_t base = static_cast<std::size_t>(r) * cols;
    double mean = 0.0;
    for (int c = 0; c < cols; ++c) mean += nx->value[base + c];
    mean /= cols;
    double var = 0.0;
    for (int c = 0; c < cols; ++c) {
      const double d = nx->value[base + c] - mean;
      var += d * d;
    }
    var /= cols;
    const double rstd = 1.0 / std::sqrt(var + static_cast<double>(eps));
    (*inv_std)[static_cast<std::size_t>(r)] = rstd;
    for (int c = 0; c < cols; ++c) {
      const T xh = static_cast<T>((nx->value[base + c] - mean) * rstd);
      (*normalized)[base + c] = xh;
      o[base + c] = xh * ng->value[c] + nb->value[c];
    }
  }
  if (no->requires_grad) {
    no->backprop = [nx, ng, nb, no, rows, cols, normalized, inv_std] {
      std::vector<double> dxh(static_cast<std::size_t>(cols));
      for (int r = 0; r < rows; ++r) {
        const std::size_t base = static_cast<std::size_t>(r) * cols;
        double mean_d = 0.0;
        double mean_dx = 0.0;
        for (int c = 0; c < cols; ++c) {
          const T g = no->grad[base + c];
          const T xh = (*normalized)[base + c];
          if (ng->requires_grad) ng->grad[c] += g * xh;
          if (nb->requires_grad) nb->grad[c] += g;
          dxh[static_cast<std::size_t>(c)] = static_cast<double>(g) * ng->value[c];
          mean_d += dxh[static_cast<std::size_t>(c)];
          mean_dx += dxh[static_cast<std::size_t>(c)] * xh;
        }
        if (!nx->requires_grad) continue;
        mean_d /= cols;
        mean_dx /= cols;
        const double rstd = (*inv_std)[static_cast<std::size_t>(r)];
        for (int c = 0; c < cols; ++c) {
          const double xh = (*normalized)[base + c];
          nx->grad[base + c] += static_cast<T>(rstd * (dxh[static_cast<std::size_t>(c)] - mean_d - xh * mean_dx));
        }
      }
    };
  }
  return Var<T>(&tape, id);
}

template <typename T>
Var<T> embedding(Var<T> table, std::span<const int> ids) {
  auto& tape = tape_of("embedding", table);
  auto* nt = &tape.node(table.id());
  const int vocab = nt->shape.rows;
  const int width = nt->shape.cols;
  for (const int i : ids) {
    if (i < 0 || i >= vocab) {
      throw ShapeError("embedding: id " + std::to_string(i) + " outside table of " + std::to_string(vocab) + " rows");
    }
  }
  const Shape out{static_cast<int>(ids.size()), width};
  const int id = tape.emit(out, nt->requires_grad);
  auto* no = &tape.node(id);
  T* o = out_values<T>(*no);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    std::copy_n(nt->value + static_cast<std::size_t>(ids[r]) * width, width, o + r * width);
  }
  if (no->requires_grad) {
    std::vector<int> rows(ids.begin(), ids.end());
    no->backprop = [nt, no, width, rows = std::move(rows)] {
      for (std::size_t r = 0; r < rows.size(); ++r) {
        T* dst = nt->grad + static_cast<std::size_t>(rows[r]) * width;
        const T* src = no->grad + r * width;
        for (int c = 0; c < width; ++c) dst[c] += src[c];
      }
    };
  }
  return Var<T>(&tape, id);
}

template <typename T>
Var<T> attention(Var<T> q, Var<T> k, Var<T> v, int heads, bool causal) {
  auto& tape = same_tape("attention", q, k);
  same_tape("attention", q, v);
  auto* nq = &tape.node(q.id());
  auto* nk = &tape.node(k.id());
  auto* nv = &tape.node(v.id());
  const int tq = nq->shape.rows;
  const int tk = nk->shape.rows;
  const int width = nq->shape.cols;
  if (nk->shape.cols != width || nv->shape != nk->shape) {
    throw ShapeError("attention: q " + dims(nq->shape) + ", k " + dims(nk->shape) + ", v " + dims(nv->shape) +
                     " are not compatible");
  }
  if (heads <= 0 || width % heads != 0) {
    throw ShapeError("attention: width " + std::to_string(width) + " not divisible by " + std::to_string(heads) +
                     " heads");
  }
  if (causal && tq != tk) {
    throw ShapeError("attention: causal mask needs square scores, got " + std::to_string(tq) + "x" +
                     std::to_string(tk));
  }
  const int hd = width / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
  const Shape out{tq, width};
  const int id = tape.emit(out, nq->requires_grad || nk->requires_grad || nv->requires_grad);
  auto* no = &tape.node(id);
  T* o = out_values<T>(*no);
  // probs[h][i][j]
  auto probs = std::make_shared<std::vector<T>>(static_cast<std::size_t>(heads) * tq * tk, T(0));
  std::vector<double> scores(static_cast<std::size_t>(tk));
  for (int h = 0; h < heads; ++h) {
    const int off = h * hd;
    for (int i = 0; i < tq; ++i) {
      const int limit = causal ? i + 1 : tk;
      const T* qi = nq->value + static_cast<std::size_t>(i) * width + off;
      double mx = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < limit; ++j) {
        const T* kj = nk->value + static_cast<std::size_t>(j) * width + off;
        double s = 0.0;
        for (int c = 0; c < hd; ++c) s += static_cast<double>(qi[c]) * kj[c];
        s *= inv_sqrt;
        scores[static_cast<std::size_t>(j)] = s;
        mx = std::max(mx, s);
      }
      double total = 0.0;
      for (int j = 0; j < limit; ++j) {
        scores[static_cast<std::size_t>(j)] = std::exp(scores[static_cast<std::size_t>(j)] - mx);
        total += scores[static_cast<std::size_t>(j)];
      }
      T* p = probs->data() + (static_cast<std::size_t>(h) * tq + i) * tk;
      T* oi = o + static_cast<std::size_t>(i) * width + off;
      for (int j = 0; j < limit; ++j) {
        p[j] = static_cast<T>(scores[static_cast<std::size_t>(j)] / total);
        const T* vj = nv->value + static_cast<std::size_t>(j) * width + off;
        for (int c = 0; c < hd; ++c) oi[c] += p[j] * vj[c];
      }
    }
  }
  if (no->requires_grad) {
    no->backprop = [nq, nk, nv, no, probs, heads, tq, tk, width, hd, inv_sqrt, causal] {
      std::vector<double> dp(static_cast<std::size_t>(tk));
      for (int h = 0; h < heads; ++h) {
        const int off = h * hd;
        for (int i = 0; i < tq; ++i) {
          const int limit = causal ? i + 1 : tk;
          const T* p = probs->data() + (static_cast<std::size_t>(h) * tq + i) * tk;
          const T* go = no->grad + static_cast<std::size_t>(i) * width + off;
          double weighted = 0.0;
          for (int j = 0; j < limit; ++j) {
            const T* vj = nv->value + static_cast<std::size_t>(j) * width + off;
            double s = 0.0;
            for (int c = 0; c < hd; ++c) s += static_cast<double>(go[c]) * vj[c];
            dp[static_cast<std::size_t>(j)] = s;
            weighted += s * p[j];
            if (nv->requires_grad) {
              T* gv = nv->grad + static_cast<std::size_t>(j) * width + off;
              for (int c = 0; c < hd; ++c) gv[c] += p[j] * go[c];
            }
          }
          const T* qi = nq->value + static_cast<std::size_t>(i) * width + off;
          T* gq = nq->requires_grad ? nq->grad + static_cast<std::size_t>(i) * width + off : nullptr;
          for (int j = 0; j < limit; ++j) {
            const T ds = static_cast<T>(p[j] * (dp[static_cast<std::size_t>(j)] - weighted) * inv_sqrt);
            const T* kj = nk->value + static_cast<std::size_t>(j) * width + off;
            if (gq != nullptr) {
              for (int c = 0; c < hd; ++c) gq[c] += ds * kj[c];
            }
            if (nk->requires_grad) {
              T* gk = nk->grad + static_cast<std::size_t>(j) * width + off;
              for (int c = 0; c < hd; ++c) gk[c] += ds * qi[c];
            }
          }
        }
      }
    };
  }
  return Var<T>(&tape, id);
}

template <typename T>
Var<T> cross_entropy(Var<T> logits, std::span<const int> targets, std::span<const T> weights) {
  auto& tape = tape_of("cross_entropy", logits);
  auto* nl = &tape.node(logits.id());
  const int rows = nl->shape.rows;
  const int cols = nl->shape.cols;
  if (targets.size() != static_cast<std::size_t>(rows)) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for logits " + dims(nl->shape));
  }
  if (!weights.empty() && weights.size() != targets.size()) {
    throw ShapeError("cross_entropy: " + std::to_string(weights.size()) + " weights for " +
                     std::to_string(targets.size()) + " rows");
  }
  double total_weight = 0.0;
  for (int r = 0; r < rows; ++r) {
    if (targets[static_cast<std::size_t>(r)] < 0 || targets[static_cast<std::size_t>(r)] >= cols) {
      throw ShapeError("cross_entropy: target " + std::to_string(targets[static_cast<std::size_t>(r)]) +
                       " outside " + std::to_string(cols) + " classes");
    }
    total_weight += weights.empty() ? 1.0 : static_cast<double>(weights[static_cast<std::size_t>(r)]);
  }
  const int id = tape.emit(Shape{1, 1}, nl->requires_grad);
  auto* no = &tape.node(id);
  auto probs = std::make_shared<std::vector<T>>(nl->shape.size());
  double loss = 0.0;
  for (int r = 0; r < rows; ++r) {
    const std::size_t base = static_cast<std::size_t>(r) * cols;
    const T* x = nl->value + base;
    const T mx = *std::max_element(x, x + cols);
    double total = 0.0;
    for (int c = 0; c < cols; ++c) total += std::exp(static_cast<double>(x[c] - mx));
    const double log_total = std::log(total);
    for (int c = 0; c < cols; ++c) {
      (*probs)[base + c] = static_cast<T>(std::exp(static_cast<double>(x[c] - mx) - log_total));
    }
    const double w = weights.empty() ? 1.0 : static_cast<double>(weights[static_cast<std::size_t>(r)]);
    if (w != 0.0) {
      loss += w * (log_total + mx - x[targets[static_cast<std::size_t>(r)]]);
    }
  }
  out_values<T>(*no)[0] = total_weight > 0.0 ? static_cast<T>(loss / total_weight) : T(0);
  if (no->requires_grad && total_weight > 0.0) {
    std::vector<int> tgt(targets.begin(), targets.end());
    std::vector<T> wts(weights.begin(), weights.end());
    no->backprop = [nl, no, probs, rows, cols, total_weight, tgt = std::move(tgt), wts = std::move(wts)] {
      const double g = no->grad[0];
      for (int r = 0; r < rows; ++r) {
        const double w = wts.empty() ? 1.0 : static_cast<double>(wts[static_cast<std::size_t>(r)]);
        if (w == 0.0) continue;
        const double coef = g * w / total_weight;
        const std::size_t base = static_cast<std::size_t>(r) * cols;
        for (int c = 0; c < cols; ++c) {
          nl->grad[base + c] += static_cast<T>(coef * (*probs)[base + c]);
        }
        nl->grad[base + tgt[static_cast<std::size_t>(r)]] -= static_cast<T>(coef);
      }
    };
  }
  return Var<T>(&tape, id);
}

template <typename T>
Var<T> binary_cross_entropy(Var<T> logits, std::span<const T> targets, std::span<const T> weights) {
  auto& tape = tape_of("binary_cross_entropy", logits);
  auto* nl = &tape.node(logits.id());
  if (nl->shape.cols != 1 || targets.size() != static_cast<std::size_t>(nl->shape.rows)) {
    throw ShapeError("binary_cross_entropy: logits " + dims(nl->shape) + " with " + std::to_string(targets.size()) +
                     " targets");
  }
  if (!weights.empty() && weights.size() != targets.size()) {
    throw ShapeError("binary_cross_entropy: " + std::to_string(weights.size()) + " weights for " +
                     std::to_string(targets.size()) + " rows");
  }
  const std::size_t n = targets.size();
  double total_weight = 0.0;
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weights.empty() ? 1.0 : static_cast<double>(weights[i]);
    total_weight += w;
    if (w == 0.0) continue;
    const double z = nl->value[i];
    loss += w * (std::max(z, 0.0) - z * targets[i] + std::log1p(std::exp(-std::abs(z))));
  }
  const int id = tape.emit(Shape{1, 1}, nl->requires_grad);
  auto* no = &tape.node(id);
  out_values<T>(*no)[0] = total_weight > 0.0 ? static_cast<T>(loss / total_weight) : T(0);
  if (no->requires_grad && total_weight > 0.0) {
    std::vector<T> tgt(targets.begin(), targets.end());
    std::vector<T> wts(weights.begin(), weights.end());
    no->backprop = [nl, no, n, total_weight, tgt = std::move(tgt), wts = std::move(wts)] {
      const double g = no->grad[0];
      for (std::size_t i = 0; i < n; ++i) {
        const double w = wts.empty() ? 1.0 : static_cast<double>(wts[i]);
        if (w == 0.0) continue;
        const double s = 1.0 / (1.0 + std::exp(-static_cast<double>(nl->value[i])));
        nl->grad[i] += static_cast<T>(g * w / total_weight * (s - tgt[i]));
      }
    };
  }
  return Var<T>(&tape, id);
}

template <typename T>
Var<T> sum(Var<T> a) {
  auto& tape = tape_of("sum", a);
  auto* na = &tape.node(a.id());
  const std::size_t n = na->shape.size();
  const int id = tape.emit(Shape{1, 1}, na->requires_grad);
  auto* no = &tape.node(id);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += na->value[i];
  out_values<T>(*no)[0] = static_cast<T>(total);
  if (no->requires_grad) {
    no->backprop = [na, no, n] {
      for (std::size_t i = 0; i < n; ++i) na->grad[i] += no->grad[0];
    };
  }
  return Var<T>(&tape, id);
}

template <typename T>
Var<T> slice_rows(Var<T> a, int begin, int end) {
  auto& tape = tape_of("slice_rows", a);
  auto* na = &tape.node(a.id());
  if (begin < 0 || end > na->shape.rows || begin >= end) {
    throw ShapeError("slice_rows: rows [" + std::to_string(begin) + ", " + std::to_string(end) + ") of " +
                     dims(na->shape));
  }
  const int cols = na->shape.cols;
  const int id = tape.emit(Shape{end - begin, cols}, na->requires_grad);
  auto* no = &tape.node(id);
  const std::size_t offset = static_cast<std::size_t>(begin) * cols;
  const std::size_t n = no->shape.size();
  std::copy_n(na->value + offset, n, out_values<T>(*no));
  if (no->requires_grad) {
    no->backprop = [na, no, offset, n] {
      for (std::size_t i = 0; i < n; ++i) na->grad[offset + i] += no->grad[i];
    };
  }
  return Var<T>(&tape, id);
}

template <typename T>
Var<T> dropout(Var<T> a, T p, Rng& rng) {
  auto& tape = tape_of("dropout", a);
  if (p <= T(0) || !tape.recording()) {
    return a;
  }
  if (p >= T(1)) {
    throw NumericsError("dropout: rate must be below 1");
  }
  auto* na = &tape.node(a.id());
  const std::size_t n = na->shape.size();
  const int id = tape.emit(na->shape, na->requires_grad);
  auto* no = &tape.node(id);
  T* o = out_values<T>(*no);
  const T keep_scale = T(1) / (T(1) - p);
  auto mask = std::make_shared<std::vector<T>>(n);
  for (std::size_t i = 0; i < n; ++i) {
    (*mask)[i] = rng.uniform() < static_cast<double>(p) ? T(0) : keep_scale;
    o[i] = na->value[i] * (*mask)[i];
  }
  if (no->requires_grad) {
    no->backprop = [na, no, n, mask] {
      for (std::size_t i = 0; i < n; ++i) na->grad[i] += no->grad[i] * (*mask)[i];
    };
  }
  return Var<T>(&tape, id);
}

#define GENTOC_INSTANTIATE_OPS(T)                                                               \
  template Var<T> matmul<T>(Var<T>, Var<T>);                                                    \
  template Var<T> linear<T>(Var<T>, Var<T>, Var<T>);                                            \
  template Var<T> add<T>(Var<T>, Var<T>);                                                       \
  template Var<T> add_row<T>(Var<T>, Var<T>);                                                   \
  template Var<T> mul<T>(Var<T>, Var<T>);                                                       \
  template Var<T> scale<T>(Var<T>, T);                                                          \
  template Var<T> relu<T>(Var<T>);                                                              \
  template Var<T> sigmoid<T>(Var<T>);                                                           \
  template Var<T> softmax<T>(Var<T>);                                                           \
  template Var<T> layer_norm<T>(Var<T>, Var<T>, Var<T>, T);                                     \
  template Var<T> embedding<T>(Var<T>, std::span<const int>);                                   \
  template Var<T> attention<T>(Var<T>, Var<T>, Var<T>, int, bool);                              \
  template Var<T> cross_entropy<T>(Var<T>, std::span<const int>, std::span<const T>);           \
  template Var<T> binary_cross_entropy<T>(Var<T>, std::span<const T>, std::span<const T>);      \
  template Var<T> sum<T>(Var<T>);                                                               \
  template Var<T> slice_rows<T>(Var<T>, int, int);                                              \
  template Var<T> dropout<T>(Var<T>, T, Rng&);

GENTOC_INSTANTIATE_OPS(float)
GENTOC_INSTANTIATE_OPS(double)

#undef GENTOC_INSTANTIATE_OPS

}  // namespace gentoc::numerics
