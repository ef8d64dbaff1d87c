#include <algorithm>
#include <cmath>
#include <deque>

#include "lumbarseg/canny.hpp"

namespace lseg {
namespace {

// Separable Gaussian along one axis, replicate borders. axis: 0=x, 1=y, 2=z.
void smooth_axis(Volume& v, int axis, double sigma_vox) {
  if (sigma_vox < 0.3) return;
  int r = std::max(1, int(std::ceil(3.0 * sigma_vox)));
  std::vector<double> k(size_t(2 * r + 1));
  double sum = 0;
  for (int i = -r; i <= r; ++i) {
    k[size_t(i + r)] = std::exp(-0.5 * i * i / (sigma_vox * sigma_vox));
    sum += k[size_t(i + r)];
  }
  for (double& w : k) w /= sum;

  const int nx = v.dims.nx, ny = v.dims.ny, nz = v.dims.nz;
  const int len = axis == 0 ? nx : axis == 1 ? ny : nz;
  std::vector<double> line(size_t(len), 0.0);
  auto idx = [&](int a, int b, int c) {
    // a runs along the filtered axis; (b,c) index the other two
    return axis == 0 ? v.index(a, b, c) : axis == 1 ? v.index(b, a, c) : v.index(b, c, a);
  };
  const int n1 = axis == 0 ? ny : nx;
  const int n2 = axis == 2 ? ny : nz;
  for (int c = 0; c < n2; ++c)
    for (int b = 0; b < n1; ++b) {
      for (int a = 0; a < len; ++a) line[size_t(a)] = v.data[idx(a, b, c)];
      for (int a = 0; a < len; ++a) {
        double acc = 0;
        for (int i = -r; i <= r; ++i)
          acc += k[size_t(i + r)] * line[size_t(std::clamp(a + i, 0, len - 1))];
        v.data[idx(a, b, c)] = acc;
      }
    }
}

}  // namespace

std::vector<Voxel> canny_edges(const Volume& v, double sigma_mm, double low_q, double high_q) {
  require(high_q > low_q && low_q > 0 && high_q < 1,
          "canny_edges: need 0 < low quantile < high quantile < 1");
  const int nx = v.dims.nx, ny = v.dims.ny, nz = v.dims.nz;
  Volume s = v;
  smooth_axis(s, 0, sigma_mm / v.spacing.sx);
  smooth_axis(s, 1, sigma_mm / v.spacing.sy);
  smooth_axis(s, 2, sigma_mm / v.spacing.sz);

  std::vector<double> gx(s.data.size()), gy(s.data.size()), gz(s.data.size()),
      mag(s.data.size());
  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) {
        size_t i = v.index(x, y, z);
        gx[i] = 0.5 * (s.at(std::min(x + 1, nx - 1), y, z) - s.at(std::max(x - 1, 0), y, z));
        gy[i] = 0.5 * (s.at(x, std::min(y + 1, ny - 1), z) - s.at(x, std::max(y - 1, 0), z));
        gz[i] = 0.5 * (s.at(x, y, std::min(z + 1, nz - 1)) - s.at(x, y, std::max(z - 1, 0)));
        mag[i] = std::sqrt(gx[i] * gx[i] + gy[i] * gy[i] + gz[i] * gz[i]);
      }

  // NMS along the quantised gradient direction; out-of-volume neighbours
  // count as zero magnitude.
  std::vector<uint8_t> mask(s.data.size(), 0);  // 1 = NMS survivor
  std::vector<double> surv_mags;
  auto mag_at = [&](int x, int y, int z) -> double {
    if (x < 0 || x >= nx || y < 0 || y >= ny || z < 0 || z >= nz) return 0.0;
    return mag[v.index(x, y, z)];
  };
  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) {
        size_t i = v.index(x, y, z);
        if (mag[i] <= 0) continue;
        double ax = std::abs(gx[i]), ay = std::abs(gy[i]), az = std::abs(gz[i]);
        double m = std::max({ax, ay, az});
        int dx = int(std::lround(gx[i] / m));
        int dy = int(std::lround(gy[i] / m));
        int dz = int(std::lround(gz[i] / m));
        if (mag[i] >= mag_at(x + dx, y + dy, z + dz) &&
            mag[i] > mag_at(x - dx, y - dy, z - dz)) {
          mask[i] = 1;
          surv_mags.push_back(mag[i]);
        }
      }
  require(!surv_mags.empty(), "canny_edges: no edges found");

  std::sort(surv_mags.begin(), surv_mags.end());
  auto quantile = [&](double q) {
    return surv_mags[size_t(std::floor(q * double(surv_mags.size() - 1)))];
  };
  const double t_low = quantile(low_q), t_high = quantile(high_q);

  // hysteresis: flood from strong voxels through weak ones, 26-connected
  std::vector<uint8_t> state(s.data.size(), 0);  // 1 = weak, 2 = strong, 3 = accepted
  std::deque<Voxel> queue;
  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) {
        size_t i = v.index(x, y, z);
        if (!mask[i] || mag[i] < t_low) continue;
        if (mag[i] >= t_high) {
          state[i] = 3;
          queue.push_back({x, y, z});
        } else {
          state[i] = 1;
        }
      }
  while (!queue.empty()) {
    Voxel p = queue.front();
    queue.pop_front();
    for (int dz = -1; dz <= 1; ++dz)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          int x = p.x + dx, y = p.y + dy, z = p.z + dz;
          if (x < 0 || x >= nx || y < 0 || y >= ny || z < 0 || z >= nz) continue;
          size_t i = v.index(x, y, z);
          if (state[i] == 1) {
            state[i] = 3;
            queue.push_back({x, y, z});
          }
        }
  }

  std::vector<Voxel> edges;
  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x)
        if (state[v.index(x, y, z)] == 3) edges.push_back({x, y, z});
  require(!edges.empty(), "canny_edges: no edges found");
  return edges;
}

}  // namespace lseg
