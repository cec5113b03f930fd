// Copyright (c) 2026, the caw-reader authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "caw/error.hpp"

namespace caw {

// Dense row-major array of 64-bit floats. 1-D and 2-D shapes are what the
// model uses; nothing here broadcasts.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> v;

  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> s, double fill = 0.0) : shape(std::move(s)) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    v.assign(n, fill);
  }

  static Tensor scalar(double x) {
    Tensor t({1});
    t.v[0] = x;
    return t;
  }

  static Tensor of(std::vector<std::size_t> s, std::vector<double> vals) {
    Tensor t;
    t.shape = std::move(s);
    t.v = std::move(vals);
    std::size_t n = 1;
    for (std::size_t d : t.shape) n *= d;
    if (n != t.v.size())
      throw ShapeError("tensor: " + std::to_string(t.v.size()) + " values for shape " + t.shape_str());
    return t;
  }

  std::size_t size() const { return v.size(); }
  std::size_t ndim() const { return shape.size(); }

  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  double& at(std::size_t i) { return v[i]; }
  double at(std::size_t i) const { return v[i]; }
  double& at(std::size_t r, std::size_t c) { return v[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return v[r * cols() + c]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  void fill(double x) {
    for (double& e : v) e = x;
  }

  bool finite() const {
    for (double e : v)
      if (!std::isfinite(e)) return false;
    return true;
  }

  std::string shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) s += "x";
      s += std::to_string(shape[i]);
    }
    return s + "]";
  }
};

}  // namespace caw
