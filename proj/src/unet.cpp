#include <algorithm>

#include "lumbarseg/unet.hpp"

namespace lseg {

namespace {

void validate(const UNetConfig& cfg) {
  require(cfg.levels >= 1, "unet: levels must be >= 1");
  require(cfg.base_channels >= 1, "unet: base_channels must be >= 1");
  require(cfg.in_channels >= 1, "unet: in_channels must be >= 1");
  require(cfg.out_classes >= 2, "unet: out_classes must be >= 2");
}

}  // namespace

std::vector<nn::LayerSpec> unet_layer_specs(const UNetConfig& cfg) {
  validate(cfg);
  using nn::LayerSpec;
  std::vector<LayerSpec> specs;
  std::vector<int> skip_ids(size_t(cfg.levels));

  int cur = cfg.in_channels;
  for (int i = 0; i < cfg.levels; ++i) {
    int c = cfg.level_channels(i);
    specs.push_back(LayerSpec::conv2d(cur, c));
    specs.push_back(LayerSpec::relu());
    specs.push_back(LayerSpec::conv2d(c, c));
    specs.push_back(LayerSpec::relu());
    skip_ids[size_t(i)] = int(specs.size()) - 1;
    specs.push_back(LayerSpec::maxpool2());
    cur = c;
  }

  int bc = cfg.level_channels(cfg.levels);
  specs.push_back(LayerSpec::conv2d(cur, bc));
  specs.push_back(LayerSpec::relu());
  specs.push_back(LayerSpec::conv2d(bc, bc));
  specs.push_back(LayerSpec::relu());
  cur = bc;

  for (int i = cfg.levels - 1; i >= 0; --i) {
    int c = cfg.level_channels(i);
    specs.push_back(LayerSpec::upconv2(cur, c));
    specs.push_back(LayerSpec::concat(skip_ids[size_t(i)]));
    specs.push_back(LayerSpec::conv2d(2 * c, c));
    specs.push_back(LayerSpec::relu());
    specs.push_back(LayerSpec::conv2d(c, c));
    specs.push_back(LayerSpec::relu());
    cur = c;
  }

  specs.push_back(LayerSpec::conv2d(cur, cfg.out_classes, 1, 0));
  return specs;
}

SegModel build_unet(const UNetConfig& cfg, uint64_t seed) {
  validate(cfg);
  SegModel m;
  m.cfg = cfg;
  m.params = nn::build_model(unet_layer_specs(cfg), seed);
  m.provenance = Provenance::Scratch;
  return m;
}

int receptive_field(const UNetConfig& cfg) {
  validate(cfg);
  int64_t rf = 1, jump = 1;
  for (int i = 0; i < cfg.levels; ++i) {
    rf += 2 * 2 * jump;  // two 3x3 convs
    rf += 1 * jump;      // 2x2 pool window
    jump *= 2;
  }
  rf += 2 * 2 * jump;  // bottleneck convs
  return int(rf);
}

SegModel transfer_weights(const SegModel& binary, int target_classes, uint64_t seed) {
  require(binary.cfg.out_classes == 2, "transfer_weights: source must be a binary model");
  require(target_classes >= 2, "transfer_weights: bad target class count");

  UNetConfig cfg = binary.cfg;
  cfg.out_classes = target_classes;
  SegModel m = build_unet(cfg, seed);  // classifier keeps this fresh init
  size_t last = m.params.weights.size() - 1;
  require(binary.params.weights.size() == m.params.weights.size(),
          "transfer_weights: layer table mismatch");
  for (size_t i = 0; i < last; ++i) {
    require(binary.params.weights[i].same_shape(m.params.weights[i]),
            "transfer_weights: source shape mismatch");
    m.params.weights[i] = binary.params.weights[i];
    m.params.biases[i] = binary.params.biases[i];
  }
  m.provenance = Provenance::PretrainedBinary;
  m.window_lo = binary.window_lo;
  m.window_hi = binary.window_hi;
  return m;
}

}  // namespace lseg
