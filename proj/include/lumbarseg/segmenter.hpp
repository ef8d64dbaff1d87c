#pragma once

#include <string>
#include <vector>

#include "lumbarseg/augment2d.hpp"
#include "lumbarseg/unet.hpp"
#include "lumbarseg/volume.hpp"

namespace lseg {

enum class SegMode { Binary, Multiclass };

struct SegmenterConfig {
  int levels = 5;
  int base_channels = 32;
  int epochs = 3000;              // per-run; callers pick binary/multiclass counts
  double lr = 1e-4;               // Adam
  int slices_per_crop_per_epoch = 0;  // 0 = every sagittal slice
  AugmentConfig aug;
  bool augment = true;
  double mm_per_px = 1.0;         // converts the elastic mm settings to pixels
  double window_lo = 0.0, window_hi = 1000.0;  // recorded in the checkpoint
  uint64_t seed = 1;
};

struct SegTrainResult {
  SegModel model;
  std::vector<double> epoch_loss;
};

// Adam training on sagittal slices of the given crops (already normalised).
// Binary mode collapses every nonzero label to 1. init, when given, must
// match the config's architecture; it seeds the weights (transfer learning).
SegTrainResult train_segmenter(const std::vector<Volume>& crops,
                               const std::vector<LabelVolume>& labels,
                               const SegmenterConfig& cfg, SegMode mode,
                               const SegModel* init = nullptr);

// Per-slice forward + per-pixel argmax, stacked back into a crop-sized
// label volume. The crop must be normalised like the training crops.
LabelVolume segment_crop(const SegModel& m, const Volume& crop);

// Embeds the crop labels into a background volume of the given extents.
LabelVolume reinstate(const LabelVolume& label_crop, const BoundingBox& b, Dims3 full_dims);

void save_segmenter(const SegModel& m, const std::string& path);
SegModel load_segmenter(const std::string& path);

}  // namespace lseg
