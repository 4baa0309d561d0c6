#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "genclust/error.hpp"

namespace genclust {

// Dense row-major numeric array. Everything in the engine is 2-d
// (n x d batches, 1 x k row vectors, n x 1 columns, 1 x 1 scalars).
template <class T>
struct Array {
  std::vector<std::size_t> shape;
  std::vector<T> data;

  Array() = default;

  Array(std::size_t r, std::size_t c) : shape{r, c}, data(r * c, T(0)) {}

  Array(std::size_t r, std::size_t c, std::vector<T> values)
      : shape{r, c}, data(std::move(values)) {
    if (r * c != data.size()) {
      throw ShapeError("Array: " + std::to_string(r) + "x" + std::to_string(c) +
                       " shape does not match " + std::to_string(data.size()) +
                       " elements");
    }
  }

  static Array zeros(std::size_t r, std::size_t c) { return Array(r, c); }

  static Array full(std::size_t r, std::size_t c, T v) {
    Array a(r, c);
    std::fill(a.data.begin(), a.data.end(), v);
    return a;
  }

  static Array scalar(T v) { return full(1, 1, v); }

  static Array row(std::vector<T> values) {
    const std::size_t n = values.size();
    return Array(1, n, std::move(values));
  }

  static Array column(std::vector<T> values) {
    const std::size_t n = values.size();
    return Array(n, 1, std::move(values));
  }

  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 0 : shape[1]; }
  std::size_t size() const { return data.size(); }

  bool is_scalar() const { return data.size() == 1; }

  T& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  const T& at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  bool same_shape(const Array& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (const T v : data) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) os << "x";
      os << shape[i];
    }
    os << ")";
    return os.str();
  }

  template <class U>
  Array<U> cast() const {
    Array<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

using ArrayF = Array<float>;
using ArrayD = Array<double>;

}  // namespace genclust
