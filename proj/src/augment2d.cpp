#include <algorithm>
#include <cmath>

#include "lumbarseg/augment2d.hpp"

namespace lseg {

SlicePair roi_augment(const Image2D& img, const LabelImage2D& lab, const AugmentConfig& cfg,
                      Rng& rng) {
  require(!cfg.delta_set.empty(), "roi_augment: empty delta set");
  require(img.width == lab.width && img.height == lab.height,
          "roi_augment: image/label extent mismatch");
  int max_delta = *std::max_element(cfg.delta_set.begin(), cfg.delta_set.end());
  require(max_delta > 0, "roi_augment: deltas must be positive");
  require(img.height > 2 * max_delta, "roi_augment: slice too short for the delta set");

  int delta = cfg.delta_set[size_t(rng.uniform_int(0, int64_t(cfg.delta_set.size()) - 1))];
  int top = int(rng.uniform_int(0, 2 * delta));
  int h = img.height - 2 * delta;

  SlicePair out{Image2D(img.width, h), LabelImage2D(lab.width, h)};
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < img.width; ++c) {
      out.image.at(r, c) = img.at(top + r, c);
      out.labels.at(r, c) = lab.at(top + r, c);
    }
  return out;
}

std::pair<double, double> Field2D::at(double r, double c) const {
  if (zero()) return {0.0, 0.0};
  double gr = r / spacing, gc = c / spacing;
  int r0 = int(std::floor(gr)), c0 = int(std::floor(gc));
  r0 = std::clamp(r0, 0, grid_rows - 2);
  c0 = std::clamp(c0, 0, grid_cols - 2);
  double fr = std::clamp(gr - r0, 0.0, 1.0), fc = std::clamp(gc - c0, 0.0, 1.0);
  auto node = [&](int rr, int cc) { return size_t(rr) * size_t(grid_cols) + size_t(cc); };
  double w00 = (1 - fr) * (1 - fc), w01 = (1 - fr) * fc, w10 = fr * (1 - fc), w11 = fr * fc;
  double vr = w00 * dr[node(r0, c0)] + w01 * dr[node(r0, c0 + 1)] +
              w10 * dr[node(r0 + 1, c0)] + w11 * dr[node(r0 + 1, c0 + 1)];
  double vc = w00 * dc[node(r0, c0)] + w01 * dc[node(r0, c0 + 1)] +
              w10 * dc[node(r0 + 1, c0)] + w11 * dc[node(r0 + 1, c0 + 1)];
  return {vr, vc};
}

Field2D make_field(int rows, int cols, double grid_px, double sigma_px, Rng& rng) {
  require(rows >= 1 && cols >= 1, "make_field: bad extents");
  Field2D f;
  f.spacing = std::max(2.0, grid_px);
  f.grid_rows = int(std::floor(rows / f.spacing)) + 2;
  f.grid_cols = int(std::floor(cols / f.spacing)) + 2;
  size_t n = size_t(f.grid_rows) * size_t(f.grid_cols);
  f.dr.resize(n);
  f.dc.resize(n);
  for (size_t i = 0; i < n; ++i) f.dr[i] = rng.normal(0.0, sigma_px);
  for (size_t i = 0; i < n; ++i) f.dc[i] = rng.normal(0.0, sigma_px);
  return f;
}

SlicePair warp_slice(const Image2D& img, const LabelImage2D& lab, double angle_rad,
                     double shift_r, double shift_c, const Field2D& field) {
  require(img.width == lab.width && img.height == lab.height,
          "warp_slice: image/label extent mismatch");
  const int H = img.height, W = img.width;
  const double cr = 0.5 * (H - 1), cc = 0.5 * (W - 1);
  const double ca = std::cos(angle_rad), sa = std::sin(angle_rad);

  SlicePair out{Image2D(W, H), LabelImage2D(W, H)};
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      // content moves by +shift, so the sample comes from p - shift,
      // rotated back about the centre, plus the elastic displacement
      double pr = r - shift_r - cr, pc = c - shift_c - cc;
      double sr = ca * pr + sa * pc + cr;
      double sc = -sa * pr + ca * pc + cc;
      auto [er, ec] = field.at(r, c);
      sr += er;
      sc += ec;

      int r0 = int(std::floor(sr)), c0 = int(std::floor(sc));
      double fr = sr - r0, fc = sc - c0;
      auto img_at = [&](int rr, int ccx) -> double {
        if (rr < 0 || rr >= H || ccx < 0 || ccx >= W) return 0.0;
        return img.at(rr, ccx);
      };
      out.image.at(r, c) = (1 - fr) * ((1 - fc) * img_at(r0, c0) + fc * img_at(r0, c0 + 1)) +
                           fr * ((1 - fc) * img_at(r0 + 1, c0) + fc * img_at(r0 + 1, c0 + 1));

      int rn = int(std::lround(sr)), cn = int(std::lround(sc));
      out.labels.at(r, c) =
          (rn < 0 || rn >= H || cn < 0 || cn >= W) ? uint8_t(0) : lab.at(rn, cn);
    }
  return out;
}

SlicePair geo_augment(const Image2D& img, const LabelImage2D& lab, const AugmentConfig& cfg,
                      Rng& rng) {
  const double deg = 3.14159265358979323846 / 180.0;
  double angle = cfg.max_rot_deg > 0 ? rng.uniform(-cfg.max_rot_deg, cfg.max_rot_deg) * deg : 0.0;
  double sr = cfg.max_shift_vox > 0 ? rng.uniform(-cfg.max_shift_vox, cfg.max_shift_vox) : 0.0;
  double sc = cfg.max_shift_vox > 0 ? rng.uniform(-cfg.max_shift_vox, cfg.max_shift_vox) : 0.0;
  Field2D field;
  if (cfg.elastic_sigma_mm > 0)
    field = make_field(img.height, img.width, cfg.elastic_grid_mm, cfg.elastic_sigma_mm, rng);
  return warp_slice(img, lab, angle, sr, sc, field);
}

namespace {

// symmetric reflection: ..2,1,0 | 0,1,2,..,n-1 | n-1,n-2..
int fold(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -1 - i;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

template <typename T>
Plane2<T> mirror_pad_impl(const Plane2<T>& img, int multiple) {
  require(multiple >= 1, "mirror_pad: bad multiple");
  int H = (img.height + multiple - 1) / multiple * multiple;
  int W = (img.width + multiple - 1) / multiple * multiple;
  if (H == img.height && W == img.width) return img;
  Plane2<T> out(W, H);
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) out.at(r, c) = img.at(fold(r, img.height), fold(c, img.width));
  return out;
}

}  // namespace

Image2D mirror_pad(const Image2D& img, int multiple) { return mirror_pad_impl(img, multiple); }
LabelImage2D mirror_pad(const LabelImage2D& img, int multiple) {
  return mirror_pad_impl(img, multiple);
}

}  // namespace lseg
