#pragma once

#include <array>
#include <string>
#include <vector>

#include "lumbarseg/features.hpp"
#include "lumbarseg/nn/model.hpp"
#include "lumbarseg/volume.hpp"

namespace lseg {

// Signed voxel distances from a voxel to the six bounding planes:
// (i-x_min, i-x_max, j-y_min, j-y_max, k-z_min, k-z_max).
struct PlaneOffsets {
  std::array<double, 6> o{};
};

PlaneOffsets make_targets(Voxel vx, const BoundingBox& gt);

// Reconstructs the box from offsets and the voxel they were measured at.
BoundingBox invert_targets(const PlaneOffsets& t, Voxel vx);

// Absolute plane-coordinate votes, one list per plane in the order
// x_min, x_max, y_min, y_max, z_min, z_max. Lists stay equal-length.
struct VoteSet {
  std::array<std::vector<double>, 6> planes;
  size_t count() const { return planes[0].size(); }
};

struct LocalizerConfig {
  int n_features = 500;
  std::vector<int> hidden = {350, 250, 150, 50};
  double probe_offset_mm = 100.0;
  double probe_half_lo_mm = 2.5;
  double probe_half_hi_mm = 25.0;
  double canny_sigma_mm = 1.5;
  double canny_low_q = 0.70;
  double canny_high_q = 0.90;
  double window_lo = 0.0;
  double window_hi = 1000.0;
  int train_voxels_per_volume = 2000;
  int epochs = 1000;
  int batch = 64;
  double lr = 1e-3;
  double momentum = 0.9;
  uint64_t seed = 1;
};

// Self-contained stage-1 model: the regressor plus everything inference
// needs (probe layout, normalisation window, edge-detector settings).
struct LocalizerModel {
  nn::ModelParams mlp;
  FeatureSpec spec;
  double window_lo = 0.0, window_hi = 1000.0;
  double canny_sigma_mm = 1.5, canny_low_q = 0.70, canny_high_q = 0.90;
};

struct LocalizerTrainResult {
  LocalizerModel model;
  std::vector<double> epoch_loss;
};

// SGD-momentum regression of plane offsets from contextual features at edge
// voxels. volumes[i] pairs with boxes[i]; any augmented copies are part of
// the dataset the caller passes in.
LocalizerTrainResult train_localizer(const std::vector<Volume>& volumes,
                                     const std::vector<BoundingBox>& boxes,
                                     const LocalizerConfig& cfg);

// The regression loop behind train_localizer, on explicit (feature, offset)
// pairs. X rows must have length cfg.n_features. Exposed so synthetic
// regression tasks can drive it directly.
nn::ModelParams train_offset_mlp(const std::vector<std::vector<double>>& X,
                                 const std::vector<std::array<double, 6>>& Y,
                                 const LocalizerConfig& cfg,
                                 std::vector<double>* epoch_loss = nullptr);

// Every sampled edge voxel votes for all six planes by inverting the
// predicted offsets. Edge voxels beyond max_voxels are subsampled uniformly
// (seeded).
VoteSet predict_votes(const LocalizerModel& m, const Volume& v, int max_voxels = 10000,
                      uint64_t seed = 0);

// Per-plane KDE-mode aggregation, before the min<=max reorder and volume
// clamp. Integer translation of all votes translates the result exactly.
std::array<int64_t, 6> aggregate_planes(const VoteSet& votes);

BoundingBox aggregate_votes(const VoteSet& votes, Dims3 dims);

BoundingBox expand_box(const BoundingBox& b, int tol, Dims3 dims);

// Fraction of nonzero-label voxels inside the box.
double sensitivity(const LabelVolume& gt, const BoundingBox& b);

void save_localizer(const LocalizerModel& m, const std::string& path);
LocalizerModel load_localizer(const std::string& path);

}  // namespace lseg
