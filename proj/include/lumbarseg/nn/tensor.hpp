#pragma once

#include <cstdint>
#include <vector>

#include "lumbarseg/error.hpp"

namespace lseg::nn {

// Dense n-dimensional array, row-major (last index fastest).
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;

  bool operator==(const Tensor&) const = default;

  static Tensor zeros(std::vector<int> s) {
    Tensor t;
    int64_t n = 1;
    for (int e : s) {
      require(e > 0, "Tensor: extents must be positive");
      n *= e;
    }
    t.shape = std::move(s);
    t.data.assign(size_t(n), 0.0);
    return t;
  }

  int64_t size() const { return int64_t(data.size()); }
  bool empty() const { return data.empty(); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  double& operator[](size_t i) { return data[i]; }
  double operator[](size_t i) const { return data[i]; }

  // [C,H,W] accessors for image tensors
  int channels() const { return shape.size() == 3 ? shape[0] : 1; }
  int height() const { return shape.size() == 3 ? shape[1] : 1; }
  int width() const { return shape.size() == 3 ? shape[2] : int(shape.empty() ? 0 : shape[0]); }
  double* plane(int c) { return data.data() + size_t(c) * size_t(shape[1]) * size_t(shape[2]); }
  const double* plane(int c) const {
    return data.data() + size_t(c) * size_t(shape[1]) * size_t(shape[2]);
  }
};

}  // namespace lseg::nn
