#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace neuronml {

/// Dense row-major array of doubles.  Only what the networks and task
/// generators need: 1-D and 2-D shapes, bounds-checked element access in
/// debug paths, and a finiteness sweep.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  Tensor() = default;

  static Tensor zeros(std::size_t rows, std::size_t cols) {
    Tensor t;
    t.shape = {rows, cols};
    t.values.assign(rows * cols, 0.0);
    return t;
  }

  static Tensor row_matrix(std::initializer_list<std::initializer_list<double>> rows) {
    Tensor t;
    t.shape = {rows.size(), rows.size() ? rows.begin()->size() : 0};
    for (const auto& r : rows) {
      if (r.size() != t.shape[1])
        throw std::invalid_argument("Tensor: ragged initializer");
      t.values.insert(t.values.end(), r.begin(), r.end());
    }
    return t;
  }

  std::size_t size() const { return values.size(); }
  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? (shape.empty() ? 0 : 1) : shape[1]; }

  double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

  const double* row(std::size_t r) const { return values.data() + r * cols(); }
  double* row(std::size_t r) { return values.data() + r * cols(); }

  bool finite() const {
    for (double v : values)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

inline void require_finite(const Tensor& t, const std::string& what) {
  if (!t.finite()) throw std::domain_error(what + ": non-finite value");
}

}  // namespace neuronml
