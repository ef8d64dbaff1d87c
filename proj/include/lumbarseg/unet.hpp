#pragma once

#include <cstdint>

#include "lumbarseg/nn/model.hpp"

namespace lseg {

struct UNetConfig {
  int levels = 5;         // pooling stages
  int base_channels = 32; // doubles per level, capped at 512
  int in_channels = 1;
  int out_classes = 6;

  bool operator==(const UNetConfig&) const = default;

  int pad_multiple() const { return 1 << levels; }
  // channel width of encoder level i (and of the matching decoder level)
  int level_channels(int i) const {
    int64_t c = int64_t(base_channels) << i;
    return int(std::min<int64_t>(c, 512));
  }
};

enum class Provenance : uint32_t { Scratch = 0, PretrainedBinary = 1 };

struct SegModel {
  UNetConfig cfg;
  nn::ModelParams params;
  Provenance provenance = Provenance::Scratch;
  double window_lo = 0.0, window_hi = 1000.0;  // checkpoint metadata
};

// Encoder of `levels` [conv3-relu conv3-relu maxpool] blocks, a two-conv
// bottleneck, a mirrored decoder of [upconv2 concat conv3-relu conv3-relu]
// blocks, and a 1x1 classifier producing out_classes logit channels.
SegModel build_unet(const UNetConfig& cfg, uint64_t seed);

// The layer table build_unet instantiates; checkpoint loading validates
// against it.
std::vector<nn::LayerSpec> unet_layer_specs(const UNetConfig& cfg);

// Analytic receptive field of one bottleneck output pixel.
int receptive_field(const UNetConfig& cfg);

// Copy of `binary` with the 1x1 classifier re-initialised at width
// target_classes; everything else is carried over bitwise.
SegModel transfer_weights(const SegModel& binary, int target_classes, uint64_t seed);

}  // namespace lseg
