#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace dspkat {

/// Dense channel x row x column array stored row-major per channel.
template <class T>
class Cube {
 public:
  Cube() = default;
  Cube(std::size_t channels, std::size_t rows, std::size_t cols, const T& fill = T{})
      : channels_(channels), rows_(rows), cols_(cols), data_(channels * rows * cols, fill) {}

  std::size_t channels() const { return channels_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  T& at(std::size_t c, std::size_t r, std::size_t k) { return data_[index(c, r, k)]; }
  const T& at(std::size_t c, std::size_t r, std::size_t k) const { return data_[index(c, r, k)]; }

  std::span<T> row(std::size_t c, std::size_t r) { return {data_.data() + index(c, r, 0), cols_}; }
  std::span<const T> row(std::size_t c, std::size_t r) const { return {data_.data() + index(c, r, 0), cols_}; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool same_shape(const Cube& o) const { return channels_ == o.channels_ && rows_ == o.rows_ && cols_ == o.cols_; }

  friend bool operator==(const Cube&, const Cube&) = default;

 private:
  std::size_t index(std::size_t c, std::size_t r, std::size_t k) const {
    if (c >= channels_ || r >= rows_ || k >= cols_) throw std::out_of_range("Cube index out of range");
    return (c * rows_ + r) * cols_ + k;
  }

  std::size_t channels_ = 0;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

}  // namespace dspkat
