#pragma once

#include <utility>
#include <vector>

#include "lumbarseg/image2d.hpp"
#include "lumbarseg/rng.hpp"

namespace lseg {

struct AugmentConfig {
  std::vector<int> delta_set = {5, 10, 15, 20, 25};  // empty disables ROI crops
  double max_rot_deg = 10.0;
  double max_shift_vox = 10.0;
  double elastic_grid_mm = 32.0;
  double elastic_sigma_mm = 4.0;  // zero disables the elastic field
};

struct SlicePair {
  Image2D image;
  LabelImage2D labels;
};

// Random vertical ROI crop: height h becomes h-2*delta with the window top
// at a uniform offset in [0, 2*delta]. Width is untouched.
SlicePair roi_augment(const Image2D& img, const LabelImage2D& lab, const AugmentConfig& cfg,
                      Rng& rng);

// Smooth random displacement grid, bilinearly upsampled to pixel resolution.
struct Field2D {
  int grid_rows = 0, grid_cols = 0;
  double spacing = 1.0;
  std::vector<double> dr, dc;  // per grid node, in pixels

  bool zero() const { return dr.empty(); }
  // displacement at pixel (r, c)
  std::pair<double, double> at(double r, double c) const;
};

Field2D make_field(int rows, int cols, double grid_px, double sigma_px, Rng& rng);

// Deterministic core of geo_augment: rotate by angle about the centre,
// shift, add the displacement field; image bilinear, labels nearest, both
// zero outside.
SlicePair warp_slice(const Image2D& img, const LabelImage2D& lab, double angle_rad,
                     double shift_r, double shift_c, const Field2D& field);

// Random rigid + elastic warp with parameters drawn from cfg.
SlicePair geo_augment(const Image2D& img, const LabelImage2D& lab, const AugmentConfig& cfg,
                      Rng& rng);

// Pads on the bottom/right with mirrored content until both extents are
// multiples of `multiple`; unpad takes the top-left corner back out.
Image2D mirror_pad(const Image2D& img, int multiple);
LabelImage2D mirror_pad(const LabelImage2D& img, int multiple);
template <typename T>
Plane2<T> unpad(const Plane2<T>& img, int height, int width) {
  require(height >= 1 && width >= 1 && height <= img.height && width <= img.width,
          "unpad: target extent exceeds the padded image");
  Plane2<T> out(width, height);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) out.at(r, c) = img.at(r, c);
  return out;
}

}  // namespace lseg
