#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rgbdtrack/error.hpp"

namespace rgbdtrack {

/// Row-major 2D buffer addressed as (u, v) = (column, row).
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, const T& fill = T{})
      : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height, fill) {
    if (width < 0 || height < 0) {
      throw Error(ErrorCode::kInvalidInput, "grid dimensions must be non-negative");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }

  bool contains(int u, int v) const noexcept { return u >= 0 && v >= 0 && u < width_ && v < height_; }
  bool same_shape(const auto& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  T& operator()(int u, int v) noexcept { return data_[index(u, v)]; }
  const T& operator()(int u, int v) const noexcept { return data_[index(u, v)]; }

  std::span<T> row(int v) noexcept { return {data_.data() + static_cast<std::size_t>(v) * width_, static_cast<std::size_t>(width_)}; }
  std::span<const T> row(int v) const noexcept {
    return {data_.data() + static_cast<std::size_t>(v) * width_, static_cast<std::size_t>(width_)};
  }

  std::span<T> pixels() noexcept { return data_; }
  std::span<const T> pixels() const noexcept { return data_; }

  void fill(const T& value) { std::fill(data_.begin(), data_.end(), value); }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t index(int u, int v) const noexcept { return static_cast<std::size_t>(v) * width_ + u; }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

}  // namespace rgbdtrack
