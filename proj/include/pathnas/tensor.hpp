/*
 * Copyright 2026 The pathnas Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <array>
#include <cassert>
#include <cmath>
#include <initializer_list>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Core>

#include "pathnas/common.hpp"

namespace pathnas {

/// Dense row-major matrix. A batch of d-vectors is a (batch x d) tensor and a
/// scalar is 1 x 1.
template <class T>
class Tensor {
  static_assert(std::is_floating_point_v<T>);

 public:
  using value_type = T;

  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, T fill = T(0))
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Tensor(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
      throw ShapeError("tensor data length differs from rows*cols");
  }

  static Tensor row(std::initializer_list<T> v) {
    return Tensor(1, v.size(), std::vector<T>(v));
  }
  static Tensor scalar(T v) { return Tensor(1, 1, v); }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  std::array<std::size_t, 2> shape() const { return {rows_, cols_}; }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  T operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }

  T* row_ptr(std::size_t r) { return data_.data() + r * cols_; }
  const T* row_ptr(std::size_t r) const { return data_.data() + r * cols_; }
  std::span<T> row_span(std::size_t r) { return {row_ptr(r), cols_}; }
  std::span<const T> row_span(std::size_t r) const { return {row_ptr(r), cols_}; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T item() const {
    if (data_.size() != 1) throw ShapeError("item() on a non-scalar tensor");
    return data_[0];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    for (T x : data_)
      if (!std::isfinite(x)) return false;
    return true;
  }

  template <class U>
  Tensor<U> cast() const {
    return Tensor<U>(rows_, cols_, std::vector<U>(data_.begin(), data_.end()));
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

template <class T>
std::string shape_string(const Tensor<T>& t) {
  return "[" + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) + "]";
}

/// Row-major Eigen view of a tensor.
template <class T>
using MatrixView = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class T>
using MutableMatrixView = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

template <class T>
MatrixView<T> view(const Tensor<T>& t) {
  return MatrixView<T>(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                       static_cast<Eigen::Index>(t.cols()));
}

template <class T>
MutableMatrixView<T> view(Tensor<T>& t) {
  return MutableMatrixView<T>(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                              static_cast<Eigen::Index>(t.cols()));
}

}  // namespace pathnas
