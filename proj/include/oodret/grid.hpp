#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "oodret/error.hpp"

namespace oodret {

/// Dense row-major H x W array.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int height, int width, T fill = T{}) : height_(height), width_(width) {
    if (height < 0 || width < 0) {
      throw Error(Errc::invalid_argument, "grid dimensions must be nonnegative");
    }
    data_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill);
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(int row, int col) noexcept {
    return data_[static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
                 static_cast<std::size_t>(col)];
  }
  const T& operator()(int row, int col) const noexcept {
    return data_[static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
                 static_cast<std::size_t>(col)];
  }

  bool contains(int row, int col) const noexcept {
    return row >= 0 && col >= 0 && row < height_ && col < width_;
  }
  template <typename U>
  bool same_shape(const Grid<U>& other) const noexcept {
    return height_ == other.height() && width_ == other.width();
  }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

/// 0/1 per pixel.
using BinaryMask = Grid<std::uint8_t>;

/// Per-pixel RbA values; larger (closer to 0) is more anomalous.
using AnomalyMap = Grid<float>;

/// Pixel-wise scores of the K known classes, stored H x W x K.
class FrameScoreTensor {
 public:
  FrameScoreTensor() = default;
  FrameScoreTensor(int height, int width, int num_classes)
      : height_(height), width_(width), classes_(num_classes) {
    if (height < 0 || width < 0 || num_classes <= 0) {
      throw Error(Errc::invalid_argument, "score tensor needs H,W >= 0 and K >= 1");
    }
    values_.assign(static_cast<std::size_t>(height) * width * num_classes, 0.0f);
  }
  FrameScoreTensor(int height, int width, int num_classes, std::vector<float> values);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int num_classes() const noexcept { return classes_; }

  float& at(int row, int col, int k) noexcept { return values_[offset(row, col) + k]; }
  float at(int row, int col, int k) const noexcept { return values_[offset(row, col) + k]; }

  std::span<const float> pixel(int row, int col) const noexcept {
    return {values_.data() + offset(row, col), static_cast<std::size_t>(classes_)};
  }
  std::span<float> values() noexcept { return values_; }
  std::span<const float> values() const noexcept { return values_; }

  /// Throws unless every entry is finite and nonnegative.
  void validate() const;

  friend bool operator==(const FrameScoreTensor&, const FrameScoreTensor&) = default;

 private:
  std::size_t offset(int row, int col) const noexcept {
    return (static_cast<std::size_t>(row) * width_ + col) * classes_;
  }

  int height_ = 0;
  int width_ = 0;
  int classes_ = 0;
  std::vector<float> values_;
};

/// N soft masks and their class-probability vectors over K known classes
/// plus a trailing void class.
struct MaskPredictionSet {
  int height = 0;
  int width = 0;
  int num_classes = 0;  // K, excluding void
  std::vector<Grid<float>> masks;
  std::vector<std::vector<float>> class_probs;

  std::size_t num_pairs() const noexcept { return masks.size(); }

  /// Shape, range and simplex checks (tolerance 1e-5 on the probability sum).
  void validate() const;
};

}  // namespace oodret
