#include <cmath>

#include "lumbarseg/augment3d.hpp"

namespace lseg {
namespace {

struct Mat3 {
  double m[3][3];
};

Mat3 rotation(double ax, double ay, double az) {
  double cx = std::cos(ax), sx = std::sin(ax);
  double cy = std::cos(ay), sy = std::sin(ay);
  double cz = std::cos(az), sz = std::sin(az);
  // Rz * Ry * Rx
  Mat3 r;
  r.m[0][0] = cz * cy;
  r.m[0][1] = cz * sy * sx - sz * cx;
  r.m[0][2] = cz * sy * cx + sz * sx;
  r.m[1][0] = sz * cy;
  r.m[1][1] = sz * sy * sx + cz * cx;
  r.m[1][2] = sz * sy * cx - cz * sx;
  r.m[2][0] = -sy;
  r.m[2][1] = cy * sx;
  r.m[2][2] = cy * cx;
  return r;
}

// Smooth random displacement field: one random vector per coarse grid node,
// trilinearly interpolated between nodes.
struct ElasticField {
  int gx, gy, gz;
  double spacing;
  std::vector<double> dx, dy, dz;

  ElasticField(Dims3 dims, double grid_vox, double amp, Rng& rng) {
    spacing = std::max(2.0, grid_vox);
    gx = int(std::floor(dims.nx / spacing)) + 2;
    gy = int(std::floor(dims.ny / spacing)) + 2;
    gz = int(std::floor(dims.nz / spacing)) + 2;
    size_t n = size_t(gx) * size_t(gy) * size_t(gz);
    dx.resize(n);
    dy.resize(n);
    dz.resize(n);
    for (size_t i = 0; i < n; ++i) {
      dx[i] = rng.uniform(-amp, amp);
      dy[i] = rng.uniform(-amp, amp);
      dz[i] = rng.uniform(-amp, amp);
    }
  }

  size_t idx(int i, int j, int k) const {
    return size_t(i) + size_t(gx) * (size_t(j) + size_t(gy) * size_t(k));
  }

  void sample(double x, double y, double z, double& ox, double& oy, double& oz) const {
    double fx = x / spacing, fy = y / spacing, fz = z / spacing;
    int i = std::min(gx - 2, std::max(0, int(std::floor(fx))));
    int j = std::min(gy - 2, std::max(0, int(std::floor(fy))));
    int k = std::min(gz - 2, std::max(0, int(std::floor(fz))));
    double tx = fx - i, ty = fy - j, tz = fz - k;
    ox = oy = oz = 0;
    for (int c = 0; c < 8; ++c) {
      int di = c & 1, dj = (c >> 1) & 1, dk = (c >> 2) & 1;
      double w = (di ? tx : 1 - tx) * (dj ? ty : 1 - ty) * (dk ? tz : 1 - tz);
      size_t n = idx(i + di, j + dj, k + dk);
      ox += w * dx[n];
      oy += w * dy[n];
      oz += w * dz[n];
    }
  }
};

double trilinear(const Volume& v, double x, double y, double z) {
  const int nx = v.dims.nx, ny = v.dims.ny, nz = v.dims.nz;
  x = std::clamp(x, 0.0, double(nx - 1));
  y = std::clamp(y, 0.0, double(ny - 1));
  z = std::clamp(z, 0.0, double(nz - 1));
  int x0 = std::min(int(x), nx - 1), y0 = std::min(int(y), ny - 1),
      z0 = std::min(int(z), nz - 1);
  int x1 = std::min(x0 + 1, nx - 1), y1 = std::min(y0 + 1, ny - 1), z1 = std::min(z0 + 1, nz - 1);
  double tx = x - x0, ty = y - y0, tz = z - z0;
  auto lerp = [](double a, double b, double t) { return a + (b - a) * t; };
  double c00 = lerp(v.at(x0, y0, z0), v.at(x1, y0, z0), tx);
  double c10 = lerp(v.at(x0, y1, z0), v.at(x1, y1, z0), tx);
  double c01 = lerp(v.at(x0, y0, z1), v.at(x1, y0, z1), tx);
  double c11 = lerp(v.at(x0, y1, z1), v.at(x1, y1, z1), tx);
  return lerp(lerp(c00, c10, ty), lerp(c01, c11, ty), tz);
}

uint8_t nearest_label(const LabelVolume& l, double x, double y, double z) {
  int xi = int(std::lround(x)), yi = int(std::lround(y)), zi = int(std::lround(z));
  if (xi < 0 || xi >= l.dims.nx || yi < 0 || yi >= l.dims.ny || zi < 0 || zi >= l.dims.nz)
    return 0;
  return l.at(xi, yi, zi);
}

}  // namespace

Warped3D augment_pair(const Volume& v, const LabelVolume& l, const Augment3DParams& p,
                      Rng& rng) {
  require(v.dims.nx == l.dims.nx && v.dims.ny == l.dims.ny && v.dims.nz == l.dims.nz,
          "augment_pair: volume/label dims differ");
  double d2r = 3.14159265358979323846 / 180.0;
  Mat3 rinv = rotation(-rng.uniform(-p.max_rot_deg, p.max_rot_deg) * d2r,
                       -rng.uniform(-p.max_rot_deg, p.max_rot_deg) * d2r,
                       -rng.uniform(-p.max_rot_deg, p.max_rot_deg) * d2r);
  double tx = rng.uniform(-p.max_shift_vox, p.max_shift_vox);
  double ty = rng.uniform(-p.max_shift_vox, p.max_shift_vox);
  double tz = rng.uniform(-p.max_shift_vox, p.max_shift_vox);
  ElasticField field(v.dims, p.elastic_grid_vox, p.elastic_amp_vox, rng);

  const double cx = 0.5 * (v.dims.nx - 1), cy = 0.5 * (v.dims.ny - 1),
               cz = 0.5 * (v.dims.nz - 1);
  Warped3D out;
  out.volume = v;
  out.labels = l;
  for (int z = 0; z < v.dims.nz; ++z)
    for (int y = 0; y < v.dims.ny; ++y)
      for (int x = 0; x < v.dims.nx; ++x) {
        double ex, ey, ez;
        field.sample(x, y, z, ex, ey, ez);
        double px = x - cx, py = y - cy, pz = z - cz;
        double sx = rinv.m[0][0] * px + rinv.m[0][1] * py + rinv.m[0][2] * pz + cx + tx + ex;
        double sy = rinv.m[1][0] * px + rinv.m[1][1] * py + rinv.m[1][2] * pz + cy + ty + ey;
        double sz = rinv.m[2][0] * px + rinv.m[2][1] * py + rinv.m[2][2] * pz + cz + tz + ez;
        out.volume.at(x, y, z) = trilinear(v, sx, sy, sz);
        out.labels.at(x, y, z) = nearest_label(l, sx, sy, sz);
      }
  return out;
}

BoundingBox tight_label_box(const LabelVolume& l) {
  BoundingBox b{l.dims.nx, -1, l.dims.ny, -1, l.dims.nz, -1};
  for (int z = 0; z < l.dims.nz; ++z)
    for (int y = 0; y < l.dims.ny; ++y)
      for (int x = 0; x < l.dims.nx; ++x)
        if (l.at(x, y, z) != 0) {
          b.x_min = std::min(b.x_min, x);
          b.x_max = std::max(b.x_max, x);
          b.y_min = std::min(b.y_min, y);
          b.y_max = std::max(b.y_max, y);
          b.z_min = std::min(b.z_min, z);
          b.z_max = std::max(b.z_max, z);
        }
  require(b.valid(), "tight_label_box: no labelled voxels");
  return b;
}

}  // namespace lseg
