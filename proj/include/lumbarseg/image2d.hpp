#pragma once

#include <cstdint>
#include <vector>

#include "lumbarseg/error.hpp"

namespace lseg {

// Row-major 2D image. For a sagittal slice rows run along z (inferior at
// row 0) and columns along y; see the axis convention in volume.hpp.
template <typename T>
struct Plane2 {
  int width = 0;   // columns
  int height = 0;  // rows
  std::vector<T> pix;

  Plane2() = default;
  Plane2(int w, int h, T fill = T{}) : width(w), height(h), pix(size_t(w) * size_t(h), fill) {
    require(w >= 1 && h >= 1, "Plane2: non-positive extent");
  }

  T& at(int row, int col) { return pix[size_t(row) * width + col]; }
  const T& at(int row, int col) const { return pix[size_t(row) * width + col]; }
  size_t size() const { return pix.size(); }

  bool operator==(const Plane2& o) const {
    return width == o.width && height == o.height && pix == o.pix;
  }
};

using Image2D = Plane2<double>;
using LabelImage2D = Plane2<uint8_t>;

}  // namespace lseg
