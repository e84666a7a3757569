#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dni {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

// Dense row-major tensor with at most three axes (batch x channel x time).
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)) {
    check_rank();
    data_.assign(shape_size(shape_), fill);
  }
  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_rank();
    if (data_.size() != shape_size(shape_))
      throw std::invalid_argument("tensor data size does not match shape " + shape_string(shape_));
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* ptr() { return data_.data(); }
  const T* ptr() const { return data_.data(); }
  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  const T& at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  T& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  const T& at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  // Innermost-axis row. For rank 2 the index is the row; for rank 3 it is
  // the flattened (batch, channel) index.
  std::span<T> row(std::size_t r) {
    const std::size_t n = shape_.back();
    return std::span<T>(data_.data() + r * n, n);
  }
  std::span<const T> row(std::size_t r) const {
    const std::size_t n = shape_.back();
    return std::span<const T>(data_.data() + r * n, n);
  }
  std::size_t rows() const { return shape_.empty() ? 0 : data_.size() / shape_.back(); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  Tensor reshaped(Shape shape) const {
    if (shape_size(shape) != data_.size()) throw std::invalid_argument("reshape changes element count");
    return Tensor(std::move(shape), data_);
  }

 private:
  void check_rank() const {
    if (shape_.empty() || shape_.size() > 3)
      throw std::invalid_argument("tensor rank must be 1..3, got " + shape_string(shape_));
  }

  Shape shape_;
  std::vector<T> data_;
};

}  // namespace dni
