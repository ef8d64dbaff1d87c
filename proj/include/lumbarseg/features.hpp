#pragma once

#include <cstdint>
#include <vector>

#include "lumbarseg/volume.hpp"

namespace lseg {

// One random cuboid probe, in mm relative to the query voxel.
struct Probe {
  double ox, oy, oz;  // centre offset
  double hx, hy, hz;  // half-sizes
};

// The randomly generated contextual-feature layout. Fixed once per model
// (seeded) and reused verbatim at inference.
struct FeatureSpec {
  int n = 500;
  double offset_range_mm = 100.0;
  double halfsize_lo_mm = 2.5;
  double halfsize_hi_mm = 25.0;
  uint64_t seed = 0;
  std::vector<Probe> probes;
};

FeatureSpec make_feature_spec(int n, double offset_range_mm, double halfsize_lo_mm,
                              double halfsize_hi_mm, uint64_t seed);

// Row r = the feature vector of voxels[r]: per probe, the mean intensity of
// the probe cuboid placed relative to the voxel (mm converted to voxels via
// the volume spacing). Expects a normalised volume.
std::vector<std::vector<double>> extract_features(const Volume& v,
                                                  const std::vector<Voxel>& voxels,
                                                  const FeatureSpec& spec);

}  // namespace lseg
