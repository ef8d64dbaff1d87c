#include "lumbarseg/volume.hpp"

#include <algorithm>
#include <cmath>

namespace lseg {

void validate_labels(const LabelVolume& l) {
  for (uint8_t v : l.data)
    require(v < kNumLabels, "LabelVolume: label outside {0..5}");
}

void validate_finite(const Volume& v) {
  for (double x : v.data)
    require(std::isfinite(x), "Volume: non-finite intensity");
}

BoundingBox BoundingBox::clamped(Dims3 d) const {
  // Interval intersection with [0, dim-1]; a box fully outside comes back
  // with min > max (invalid) rather than collapsed onto a face.
  BoundingBox b;
  b.x_min = std::max(x_min, 0);
  b.x_max = std::min(x_max, d.nx - 1);
  b.y_min = std::max(y_min, 0);
  b.y_max = std::min(y_max, d.ny - 1);
  b.z_min = std::max(z_min, 0);
  b.z_max = std::min(z_max, d.nz - 1);
  return b;
}

Volume resample_isotropic(const Volume& v, double target_mm) {
  require(target_mm > 0, "resample_isotropic: target must be > 0");
  Dims3 nd;
  nd.nx = std::max(1, int(std::llround(v.dims.nx * v.spacing.sx / target_mm)));
  nd.ny = std::max(1, int(std::llround(v.dims.ny * v.spacing.sy / target_mm)));
  nd.nz = std::max(1, int(std::llround(v.dims.nz * v.spacing.sz / target_mm)));
  if (nd == v.dims && v.spacing.sx == target_mm && v.spacing.sy == target_mm &&
      v.spacing.sz == target_mm)
    return v;  // identity resample

  Volume out(nd, {target_mm, target_mm, target_mm});
  auto prep = [](int i, double scale, int src_dim, int& i0, int& i1, double& f) {
    double c = std::clamp(i * scale, 0.0, double(src_dim - 1));
    i0 = int(c);
    i1 = std::min(i0 + 1, src_dim - 1);
    f = c - i0;
  };
  const double rx = target_mm / v.spacing.sx;
  const double ry = target_mm / v.spacing.sy;
  const double rz = target_mm / v.spacing.sz;
  for (int z = 0; z < nd.nz; ++z) {
    int z0, z1;
    double fz;
    prep(z, rz, v.dims.nz, z0, z1, fz);
    for (int y = 0; y < nd.ny; ++y) {
      int y0, y1;
      double fy;
      prep(y, ry, v.dims.ny, y0, y1, fy);
      for (int x = 0; x < nd.nx; ++x) {
        int x0, x1;
        double fx;
        prep(x, rx, v.dims.nx, x0, x1, fx);
        double c00 = v.at(x0, y0, z0) * (1 - fx) + v.at(x1, y0, z0) * fx;
        double c10 = v.at(x0, y1, z0) * (1 - fx) + v.at(x1, y1, z0) * fx;
        double c01 = v.at(x0, y0, z1) * (1 - fx) + v.at(x1, y0, z1) * fx;
        double c11 = v.at(x0, y1, z1) * (1 - fx) + v.at(x1, y1, z1) * fx;
        double c0 = c00 * (1 - fy) + c10 * fy;
        double c1 = c01 * (1 - fy) + c11 * fy;
        out.at(x, y, z) = c0 * (1 - fz) + c1 * fz;
      }
    }
  }
  return out;
}

IntegralVolume integral_image(const Volume& v) {
  IntegralVolume ii;
  ii.dims = v.dims;
  const int64_t mx = v.dims.nx + 1, my = v.dims.ny + 1, mz = v.dims.nz + 1;
  ii.csum.assign(size_t(mx * my * mz), 0.0);
  auto S = [&](int64_t x, int64_t y, int64_t z) -> double& {
    return ii.csum[size_t(x + mx * (y + my * z))];
  };
  for (int z = 1; z < mz; ++z)
    for (int y = 1; y < my; ++y) {
      double row = 0.0;  // running sum along x for this (y,z)
      for (int x = 1; x < mx; ++x) {
        row += v.at(x - 1, y - 1, z - 1);
        S(x, y, z) = row + S(x, y - 1, z) + S(x, y, z - 1) - S(x, y - 1, z - 1);
      }
    }
  return ii;
}

double IntegralVolume::cuboid_sum(int x0, int x1, int y0, int y1, int z0, int z1) const {
  // inclusion-exclusion over the 8 corners of [x0..x1]x[y0..y1]x[z0..z1]
  auto L = [&](int x, int y, int z) { return lookup(x, y, z); };
  return L(x1 + 1, y1 + 1, z1 + 1) - L(x0, y1 + 1, z1 + 1) - L(x1 + 1, y0, z1 + 1) -
         L(x1 + 1, y1 + 1, z0) + L(x0, y0, z1 + 1) + L(x0, y1 + 1, z0) + L(x1 + 1, y0, z0) -
         L(x0, y0, z0);
}

double cuboid_mean(const IntegralVolume& ii, Voxel center, std::array<int, 3> offset,
                   std::array<int, 3> halfsize) {
  int cx = center.x + offset[0], cy = center.y + offset[1], cz = center.z + offset[2];
  int x0 = cx - halfsize[0], x1 = cx + halfsize[0];
  int y0 = cy - halfsize[1], y1 = cy + halfsize[1];
  int z0 = cz - halfsize[2], z1 = cz + halfsize[2];
  x0 = std::max(x0, 0); y0 = std::max(y0, 0); z0 = std::max(z0, 0);
  x1 = std::min(x1, ii.dims.nx - 1); y1 = std::min(y1, ii.dims.ny - 1);
  z1 = std::min(z1, ii.dims.nz - 1);
  if (x0 > x1 || y0 > y1 || z0 > z1) return 0.0;  // fully outside
  int64_t n = int64_t(x1 - x0 + 1) * (y1 - y0 + 1) * (z1 - z0 + 1);
  return ii.cuboid_sum(x0, x1, y0, y1, z0, z1) / double(n);
}

template <typename T>
Plane2<T> extract_slice(const Grid3<T>& v, SliceAxis axis, int index) {
  switch (axis) {
    case SliceAxis::Sagittal: {
      require(index >= 0 && index < v.dims.nx, "extract_slice: sagittal index out of range");
      Plane2<T> img(v.dims.ny, v.dims.nz);
      for (int z = 0; z < v.dims.nz; ++z)
        for (int y = 0; y < v.dims.ny; ++y) img.at(z, y) = v.at(index, y, z);
      return img;
    }
    case SliceAxis::Coronal: {
      require(index >= 0 && index < v.dims.ny, "extract_slice: coronal index out of range");
      Plane2<T> img(v.dims.nx, v.dims.nz);
      for (int z = 0; z < v.dims.nz; ++z)
        for (int x = 0; x < v.dims.nx; ++x) img.at(z, x) = v.at(x, index, z);
      return img;
    }
    case SliceAxis::Axial: {
      require(index >= 0 && index < v.dims.nz, "extract_slice: axial index out of range");
      Plane2<T> img(v.dims.nx, v.dims.ny);
      for (int y = 0; y < v.dims.ny; ++y)
        for (int x = 0; x < v.dims.nx; ++x) img.at(y, x) = v.at(x, y, index);
      return img;
    }
  }
  fail("extract_slice: bad axis");
}

template <typename T>
void insert_slice(Grid3<T>& v, SliceAxis axis, int index, const Plane2<T>& img) {
  switch (axis) {
    case SliceAxis::Sagittal:
      require(index >= 0 && index < v.dims.nx, "insert_slice: sagittal index out of range");
      require(img.width == v.dims.ny && img.height == v.dims.nz, "insert_slice: shape mismatch");
      for (int z = 0; z < v.dims.nz; ++z)
        for (int y = 0; y < v.dims.ny; ++y) v.at(index, y, z) = img.at(z, y);
      return;
    case SliceAxis::Coronal:
      require(index >= 0 && index < v.dims.ny, "insert_slice: coronal index out of range");
      require(img.width == v.dims.nx && img.height == v.dims.nz, "insert_slice: shape mismatch");
      for (int z = 0; z < v.dims.nz; ++z)
        for (int x = 0; x < v.dims.nx; ++x) v.at(x, index, z) = img.at(z, x);
      return;
    case SliceAxis::Axial:
      require(index >= 0 && index < v.dims.nz, "insert_slice: axial index out of range");
      require(img.width == v.dims.nx && img.height == v.dims.ny, "insert_slice: shape mismatch");
      for (int y = 0; y < v.dims.ny; ++y)
        for (int x = 0; x < v.dims.nx; ++x) v.at(x, y, index) = img.at(y, x);
      return;
  }
  fail("insert_slice: bad axis");
}

template <typename T>
Grid3<T> crop(const Grid3<T>& v, const BoundingBox& b) {
  BoundingBox c = b.clamped(v.dims);
  require(c.valid(), "crop: empty box after clamping");
  Grid3<T> out({c.extent_x(), c.extent_y(), c.extent_z()}, v.spacing);
  for (int z = 0; z < out.dims.nz; ++z)
    for (int y = 0; y < out.dims.ny; ++y)
      for (int x = 0; x < out.dims.nx; ++x)
        out.at(x, y, z) = v.at(c.x_min + x, c.y_min + y, c.z_min + z);
  return out;
}

Volume normalize_window(const Volume& v, double lo, double hi) {
  require(hi > lo, "normalize_window: hi must exceed lo");
  Volume out = v;
  const double inv = 1.0 / (hi - lo);
  for (double& x : out.data) x = (std::clamp(x, lo, hi) - lo) * inv;
  return out;
}

template Plane2<double> extract_slice(const Grid3<double>&, SliceAxis, int);
template Plane2<uint8_t> extract_slice(const Grid3<uint8_t>&, SliceAxis, int);
template void insert_slice(Grid3<double>&, SliceAxis, int, const Plane2<double>&);
template void insert_slice(Grid3<uint8_t>&, SliceAxis, int, const Plane2<uint8_t>&);
template Grid3<double> crop(const Grid3<double>&, const BoundingBox&);
template Grid3<uint8_t> crop(const Grid3<uint8_t>&, const BoundingBox&);

}  // namespace lseg
