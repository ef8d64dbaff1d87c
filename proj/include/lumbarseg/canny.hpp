#pragma once

#include <vector>

#include "lumbarseg/volume.hpp"

namespace lseg {

// 3D Canny: Gaussian smoothing (sigma in mm, per-axis voxel conversion via
// spacing), central-difference gradients, non-maximum suppression along the
// quantised gradient direction, and double-threshold hysteresis. low_q and
// high_q are quantile fractions of the NMS-surviving gradient magnitudes.
// Throws when no edge voxels survive (unusable input).
std::vector<Voxel> canny_edges(const Volume& v, double sigma_mm = 1.5, double low_q = 0.70,
                               double high_q = 0.90);

}  // namespace lseg
