#include <cmath>

#include "lumbarseg/features.hpp"
#include "lumbarseg/rng.hpp"

namespace lseg {

FeatureSpec make_feature_spec(int n, double offset_range_mm, double halfsize_lo_mm,
                              double halfsize_hi_mm, uint64_t seed) {
  require(n >= 1, "make_feature_spec: need at least one probe");
  require(offset_range_mm >= 0 && halfsize_lo_mm > 0 && halfsize_hi_mm >= halfsize_lo_mm,
          "make_feature_spec: bad probe ranges");
  FeatureSpec spec;
  spec.n = n;
  spec.offset_range_mm = offset_range_mm;
  spec.halfsize_lo_mm = halfsize_lo_mm;
  spec.halfsize_hi_mm = halfsize_hi_mm;
  spec.seed = seed;
  spec.probes.reserve(size_t(n));
  Rng rng(derive_seed(seed, 0xfea7));
  for (int i = 0; i < n; ++i) {
    Probe p;
    p.ox = rng.uniform(-offset_range_mm, offset_range_mm);
    p.oy = rng.uniform(-offset_range_mm, offset_range_mm);
    p.oz = rng.uniform(-offset_range_mm, offset_range_mm);
    p.hx = rng.uniform(halfsize_lo_mm, halfsize_hi_mm);
    p.hy = rng.uniform(halfsize_lo_mm, halfsize_hi_mm);
    p.hz = rng.uniform(halfsize_lo_mm, halfsize_hi_mm);
    spec.probes.push_back(p);
  }
  return spec;
}

std::vector<std::vector<double>> extract_features(const Volume& v,
                                                  const std::vector<Voxel>& voxels,
                                                  const FeatureSpec& spec) {
  require(int(spec.probes.size()) == spec.n, "extract_features: spec probe count mismatch");
  IntegralVolume ii = integral_image(v);

  // mm -> voxels once; probes are identical for every query voxel
  struct VoxProbe {
    std::array<int, 3> off;
    std::array<int, 3> half;
  };
  std::vector<VoxProbe> vp(spec.probes.size());
  for (size_t p = 0; p < spec.probes.size(); ++p) {
    const Probe& pr = spec.probes[p];
    vp[p].off = {int(std::llround(pr.ox / v.spacing.sx)), int(std::llround(pr.oy / v.spacing.sy)),
                 int(std::llround(pr.oz / v.spacing.sz))};
    vp[p].half = {int(std::llround(pr.hx / v.spacing.sx)),
                  int(std::llround(pr.hy / v.spacing.sy)),
                  int(std::llround(pr.hz / v.spacing.sz))};
  }

  std::vector<std::vector<double>> rows(voxels.size());
  for (size_t r = 0; r < voxels.size(); ++r) {
    rows[r].resize(spec.probes.size());
    for (size_t p = 0; p < spec.probes.size(); ++p)
      rows[r][p] = cuboid_mean(ii, voxels[r], vp[p].off, vp[p].half);
  }
  return rows;
}

}  // namespace lseg
