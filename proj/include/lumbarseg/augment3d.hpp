#pragma once

#include "lumbarseg/rng.hpp"
#include "lumbarseg/volume.hpp"

namespace lseg {

struct Augment3DParams {
  double max_rot_deg = 5.0;       // rigid rotation per axis
  double max_shift_vox = 5.0;     // rigid translation per axis
  double elastic_amp_vox = 2.0;   // elastic displacement amplitude
  double elastic_grid_vox = 24.0; // elastic control-point spacing
};

// One random rigid + elastic warp applied identically to an intensity volume
// and its labels (trilinear vs nearest-neighbour sampling). The warp is the
// sampling map: source = R^-1(p - c) + c + t + D(p).
struct Warped3D {
  Volume volume;
  LabelVolume labels;
};
Warped3D augment_pair(const Volume& v, const LabelVolume& l, const Augment3DParams& p, Rng& rng);

// Tight bounding box of all nonzero labels. Throws if none.
BoundingBox tight_label_box(const LabelVolume& l);

}  // namespace lseg
