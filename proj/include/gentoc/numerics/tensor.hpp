#pragma once

#include <cstddef>
#include <deque>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gentoc::numerics {

/// Row-major 2-D shape. Scalars are 1x1, vectors are 1xn.
struct Shape {
  int rows = 0;
  int cols = 0;

  std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

/// Raised when operand shapes violate an op's contract. The message names
/// the op and the offending dimensions.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> values;
  std::vector<T> grad;  // empty when absent

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T(0)) : shape(s), values(s.size(), fill) {}
  Tensor(Shape s, std::vector<T> v) : shape(s), values(std::move(v)) {
    if (values.size() != shape.size()) {
      throw ShapeError("tensor: " + std::to_string(values.size()) + " values for shape " + to_string(shape));
    }
  }

  bool has_grad() const { return !grad.empty(); }
  void zero_grad() { grad.assign(values.size(), T(0)); }
  void clear_grad() { grad.clear(); }

  T& operator()(int r, int c) { return values[static_cast<std::size_t>(r) * shape.cols + c]; }
  T operator()(int r, int c) const { return values[static_cast<std::size_t>(r) * shape.cols + c]; }
};

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> tensor;
};

/// Ordered bundle of named parameters. Names are unique; insertion order is
/// the serialization order.
template <typename T>
class ParameterSet {
 public:
  /// Returns the index of the new parameter.
  int add(std::string name, Shape shape);

  Tensor<T>& operator[](int index) { return params_[static_cast<std::size_t>(index)].tensor; }
  const Tensor<T>& operator[](int index) const { return params_[static_cast<std::size_t>(index)].tensor; }

  int index_of(std::string_view name) const;
  std::size_t size() const { return params_.size(); }
  std::size_t total_values() const;

  std::vector<Parameter<T>>& items() { return params_; }
  const std::vector<Parameter<T>>& items() const { return params_; }

  /// Allocates (or resets) every gradient buffer to zero.
  void zero_grad();

 private:
  std::vector<Parameter<T>> params_;
};

extern template class ParameterSet<float>;
extern template class ParameterSet<double>;

}  // namespace gentoc::numerics
