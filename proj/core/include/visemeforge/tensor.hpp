#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "visemeforge/errors.hpp"

namespace vf {

// Dense row-major (C-order) double tensor with a dynamic shape. This is the
// single numeric container used across the library: video frame stacks
// [T,C,H,W], audio chunk matrices [T,W], weight matrices, scalars.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<long> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<std::size_t>(compute_numel(shape_)), 0.0);
  }

  Tensor(std::vector<long> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (compute_numel(shape_) != static_cast<long>(data_.size()))
      throw ShapeError("tensor data size does not match shape");
  }

  static Tensor zeros(std::vector<long> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<long> shape, double value) {
    Tensor t(std::move(shape));
    for (double& x : t.data_) x = value;
    return t;
  }

  static Tensor scalar(double value) { return Tensor({1}, {value}); }

  const std::vector<long>& shape() const { return shape_; }
  long ndim() const { return static_cast<long>(shape_.size()); }
  long dim(long i) const { return shape_[static_cast<std::size_t>(i)]; }
  long numel() const { return static_cast<long>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](long i) { return data_[static_cast<std::size_t>(i)]; }
  double operator[](long i) const { return data_[static_cast<std::size_t>(i)]; }

  // Indexed access for the common ranks.
  double& at(long i, long j) { return data_[static_cast<std::size_t>(i * dim(1) + j)]; }
  double at(long i, long j) const { return data_[static_cast<std::size_t>(i * dim(1) + j)]; }
  double& at(long n, long c, long h, long w) {
    return data_[static_cast<std::size_t>(((n * dim(1) + c) * dim(2) + h) * dim(3) + w)];
  }
  double at(long n, long c, long h, long w) const {
    return data_[static_cast<std::size_t>(((n * dim(1) + c) * dim(2) + h) * dim(3) + w)];
  }

  Tensor reshaped(std::vector<long> new_shape) const {
    if (compute_numel(new_shape) != numel())
      throw ShapeError("reshape changes element count");
    Tensor t = *this;
    t.shape_ = std::move(new_shape);
    return t;
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  std::string shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape_[i]);
    }
    return s + "]";
  }

  static long compute_numel(const std::vector<long>& shape) {
    long n = 1;
    for (long d : shape) {
      if (d < 0) throw ShapeError("negative dimension");
      n *= d;
    }
    return shape.empty() ? 0 : n;
  }

 private:
  std::vector<long> shape_;
  std::vector<double> data_;
};

}  // namespace vf
