#pragma once

#include <vector>

#include "coprop/common.hpp"

namespace coprop {

struct Coord {
  int x = 0;
  int y = 0;
  friend bool operator==(const Coord&, const Coord&) = default;
};

// Dense row-major 2-D array; carries part labels, mask bits or confidences.
template <typename T>
class PixelGrid {
 public:
  PixelGrid() = default;
  PixelGrid(int width, int height, T fill = T{})
      : width_(width), height_(height), values_(std::size_t(width) * height, fill) {
    if (width <= 0 || height <= 0)
      throw validation_error("PixelGrid dimensions must be positive");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return values_.size(); }

  bool in_bounds(int x, int y) const { return x >= 0 && x < width_ && y >= 0 && y < height_; }
  bool in_bounds(Coord c) const { return in_bounds(c.x, c.y); }

  T& at(int x, int y) { return values_[std::size_t(y) * width_ + x]; }
  const T& at(int x, int y) const { return values_[std::size_t(y) * width_ + x]; }
  T& at(Coord c) { return at(c.x, c.y); }
  const T& at(Coord c) const { return at(c.x, c.y); }

  std::vector<T>& values() { return values_; }
  const std::vector<T>& values() const { return values_; }

  friend bool operator==(const PixelGrid&, const PixelGrid&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> values_;
};

using LabelGrid = PixelGrid<int>;
using MaskGrid = PixelGrid<int>;  // entries in {0,1}

}  // namespace coprop
