#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "usrl/errors.hpp"

namespace usrl {

/// Dense row-major tensor. The scalar type selects the precision mode:
/// Tensor<float> is the standard (training) mode, Tensor<double> the high
/// (verification) mode.
template <typename S>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape)
      : shape_(std::move(shape)),
        data_(std::accumulate(shape_.begin(), shape_.end(), std::size_t{1},
                              std::multiplies<>()),
              S{0}) {}

  Tensor(std::size_t rows, std::size_t cols) : Tensor(std::vector<std::size_t>{rows, cols}) {}

  static Tensor vector(std::size_t n) { return Tensor(std::vector<std::size_t>{n}); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }

  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const { return shape_.size() < 2 ? (shape_.empty() ? 0 : 1) : shape_[1]; }

  S& operator[](std::size_t i) { return data_[i]; }
  const S& operator[](std::size_t i) const { return data_[i]; }

  S& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  const S& operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  S* row(std::size_t r) { return data_.data() + r * shape_[1]; }
  const S* row(std::size_t r) const { return data_.data() + r * shape_[1]; }

  S* data() { return data_.data(); }
  const S* data() const { return data_.data(); }
  const std::vector<S>& values() const { return data_; }
  std::vector<S>& values() { return data_; }

  void zero() { std::fill(data_.begin(), data_.end(), S{0}); }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  bool all_finite() const {
    for (const S v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

  template <typename T>
  Tensor<T> cast() const {
    Tensor<T> out(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<T>(data_[i]);
    return out;
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<S> data_;
};

inline std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

template <typename S>
void require_shape(const Tensor<S>& t, std::size_t rows, std::size_t cols,
                   const char* what) {
  if (t.rank() != 2 || t.rows() != rows || t.cols() != cols)
    throw ShapeError(std::string(what) + ": expected (" + std::to_string(rows) + "x" +
                     std::to_string(cols) + "), got " + shape_string(t.shape()));
}

// y = x W^T, x: n x in, W: out x in  ->  y: n x out
template <typename S>
Tensor<S> matmul_nt(const Tensor<S>& x, const Tensor<S>& w) {
  if (x.cols() != w.cols())
    throw ShapeError("matmul_nt: inner dims " + shape_string(x.shape()) + " vs " +
                     shape_string(w.shape()));
  Tensor<S> y(x.rows(), w.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const S* xr = x.row(i);
    for (std::size_t o = 0; o < w.rows(); ++o) {
      const S* wr = w.row(o);
      S acc{0};
      for (std::size_t k = 0; k < x.cols(); ++k) acc += xr[k] * wr[k];
      y(i, o) = acc;
    }
  }
  return y;
}

// out += a * v elementwise over a contiguous span.
template <typename S>
inline void axpy(S a, const S* v, S* out, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) out[k] += a * v[k];
}

// dx = dy W, dy: n x out, W: out x in  ->  dx: n x in (accumulated into dx)
template <typename S>
void matmul_nn_acc(const Tensor<S>& dy, const Tensor<S>& w, Tensor<S>& dx) {
  for (std::size_t i = 0; i < dy.rows(); ++i) {
    const S* dyr = dy.row(i);
    S* dxr = dx.row(i);
    for (std::size_t o = 0; o < w.rows(); ++o) axpy(dyr[o], w.row(o), dxr, w.cols());
  }
}

// dW += dy^T x, dy: n x out, x: n x in  ->  dW: out x in
template <typename S>
void outer_acc(const Tensor<S>& dy, const Tensor<S>& x, Tensor<S>& dw) {
  for (std::size_t i = 0; i < dy.rows(); ++i) {
    const S* dyr = dy.row(i);
    const S* xr = x.row(i);
    for (std::size_t o = 0; o < dy.cols(); ++o) axpy(dyr[o], xr, dw.row(o), x.cols());
  }
}

}  // namespace usrl
