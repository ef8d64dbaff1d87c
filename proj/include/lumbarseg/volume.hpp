#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lumbarseg/error.hpp"
#include "lumbarseg/image2d.hpp"

namespace lseg {

// Axis convention, fixed globally:
//   x = left-right        (a sagittal slice fixes x; the image is (y, z))
//   y = anterior-posterior (a coronal slice fixes y; the image is (x, z))
//   z = inferior-superior  (an axial slice fixes z; the image is (x, y))
// Voxel data is stored x-fastest: index = x + nx * (y + ny * z).

enum class SliceAxis { Sagittal, Coronal, Axial };

struct Dims3 {
  int nx = 0, ny = 0, nz = 0;
  int64_t count() const { return int64_t(nx) * ny * nz; }
  bool operator==(const Dims3&) const = default;
};

struct Spacing3 {
  double sx = 1.0, sy = 1.0, sz = 1.0;
  bool operator==(const Spacing3&) const = default;
};

struct Voxel {
  int x = 0, y = 0, z = 0;
  bool operator==(const Voxel&) const = default;
};

// 3D scalar/label grid with physical spacing. Immutable by convention after
// construction: every operation returns a fresh grid.
template <typename T>
struct Grid3 {
  Dims3 dims;
  Spacing3 spacing;
  std::vector<T> data;  // x-fastest

  Grid3() = default;
  Grid3(Dims3 d, Spacing3 s, T fill = T{})
      : dims(d), spacing(s), data(size_t(d.count()), fill) {
    validate_shape();
  }
  Grid3(Dims3 d, Spacing3 s, std::vector<T> values)
      : dims(d), spacing(s), data(std::move(values)) {
    validate_shape();
    require(int64_t(data.size()) == dims.count(), "Grid3: data length != nx*ny*nz");
  }

  void validate_shape() const {
    require(dims.nx >= 1 && dims.ny >= 1 && dims.nz >= 1, "Grid3: all dims must be >= 1");
    require(spacing.sx > 0 && spacing.sy > 0 && spacing.sz > 0,
            "Grid3: all spacings must be > 0");
  }

  int64_t index(int x, int y, int z) const {
    return int64_t(x) + int64_t(dims.nx) * (int64_t(y) + int64_t(dims.ny) * z);
  }
  T at(int x, int y, int z) const { return data[size_t(index(x, y, z))]; }
  T& at(int x, int y, int z) { return data[size_t(index(x, y, z))]; }
  bool inside(int x, int y, int z) const {
    return x >= 0 && x < dims.nx && y >= 0 && y < dims.ny && z >= 0 && z < dims.nz;
  }
};

using Volume = Grid3<double>;
using LabelVolume = Grid3<uint8_t>;

constexpr int kNumLabels = 6;  // background + L1..L5

// Checks the label alphabet {0..5}; throws on violation.
void validate_labels(const LabelVolume& l);

// Checks that every intensity is finite; throws on violation.
void validate_finite(const Volume& v);

// Six bounding planes, inclusive on both ends.
struct BoundingBox {
  int x_min = 0, x_max = 0;
  int y_min = 0, y_max = 0;
  int z_min = 0, z_max = 0;

  bool operator==(const BoundingBox&) const = default;

  bool valid() const { return x_min <= x_max && y_min <= y_max && z_min <= z_max; }
  int extent_x() const { return x_max - x_min + 1; }
  int extent_y() const { return y_max - y_min + 1; }
  int extent_z() const { return z_max - z_min + 1; }
  int64_t volume() const { return int64_t(extent_x()) * extent_y() * extent_z(); }

  bool contains(int x, int y, int z) const {
    return x >= x_min && x <= x_max && y >= y_min && y <= y_max && z >= z_min && z <= z_max;
  }

  BoundingBox clamped(Dims3 d) const;
};

// Cumulative sums with a zero border plane; any axis-aligned cuboid sum is
// eight lookups.
struct IntegralVolume {
  Dims3 dims;  // of the source volume
  std::vector<double> csum;  // (nx+1)*(ny+1)*(nz+1), x-fastest

  double lookup(int x, int y, int z) const {
    return csum[size_t(x) + size_t(dims.nx + 1) * (size_t(y) + size_t(dims.ny + 1) * size_t(z))];
  }
  // Sum over the inclusive voxel cuboid [x0,x1]x[y0,y1]x[z0,z1]; bounds must
  // already lie inside the source volume.
  double cuboid_sum(int x0, int x1, int y0, int y1, int z0, int z1) const;
};

Volume load_volume(const std::string& path);
void save_volume(const Volume& v, const std::string& path, const std::string& element_type = "MET_DOUBLE");
LabelVolume load_label_volume(const std::string& path);
void save_label_volume(const LabelVolume& l, const std::string& path);

// Trilinear resampling to isotropic `target` mm. New dims are
// round(dim * spacing / target), at least 1 per axis. Output voxel i maps to
// input coordinate i * target / spacing (clamped at the borders).
Volume resample_isotropic(const Volume& v, double target_mm);

IntegralVolume integral_image(const Volume& v);

// Mean over the cuboid centered at center+offset with half extents
// (hx, hy, hz), clamped to the volume. A cuboid entirely outside yields 0.
double cuboid_mean(const IntegralVolume& ii, Voxel center, std::array<int, 3> offset,
                   std::array<int, 3> halfsize);

template <typename T>
Plane2<T> extract_slice(const Grid3<T>& v, SliceAxis axis, int index);

template <typename T>
Grid3<T> crop(const Grid3<T>& v, const BoundingBox& b);

// Writes a 2D slice back into a grid (inverse of extract_slice); used when
// stacking per-slice results into a volume.
template <typename T>
void insert_slice(Grid3<T>& v, SliceAxis axis, int index, const Plane2<T>& img);

// Clamp intensities to [lo, hi] and map affinely to [0, 1].
Volume normalize_window(const Volume& v, double lo, double hi);

}  // namespace lseg
