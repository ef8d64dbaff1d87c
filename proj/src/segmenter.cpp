#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "lumbarseg/nn/checkpoint.hpp"
#include "lumbarseg/nn/train.hpp"
#include "lumbarseg/segmenter.hpp"

namespace lseg {

namespace {

struct SliceRef {
  int crop;
  int x;
};

LabelImage2D collapse_binary(LabelImage2D lab) {
  for (uint8_t& v : lab.pix) v = v != 0 ? 1 : 0;
  return lab;
}

nn::Tensor to_tensor(const Image2D& img) {
  nn::Tensor t = nn::Tensor::zeros({1, img.height, img.width});
  std::copy(img.pix.begin(), img.pix.end(), t.data.begin());
  return t;
}

}  // namespace

SegTrainResult train_segmenter(const std::vector<Volume>& crops,
                               const std::vector<LabelVolume>& labels,
                               const SegmenterConfig& cfg, SegMode mode,
                               const SegModel* init) {
  require(!crops.empty(), "train_segmenter: no training crops");
  require(crops.size() == labels.size(), "train_segmenter: crop/label count mismatch");
  for (size_t i = 0; i < crops.size(); ++i)
    require(crops[i].dims == labels[i].dims, "train_segmenter: crop/label extent mismatch");
  require(cfg.epochs >= 1, "train_segmenter: epochs must be >= 1");

  UNetConfig ucfg;
  ucfg.levels = cfg.levels;
  ucfg.base_channels = cfg.base_channels;
  ucfg.out_classes = mode == SegMode::Binary ? 2 : kNumLabels;

  SegTrainResult result;
  if (init) {
    require(init->cfg == ucfg, "train_segmenter: init model does not match the config");
    result.model = *init;
  } else {
    result.model = build_unet(ucfg, derive_seed(cfg.seed, 10));
  }
  result.model.window_lo = cfg.window_lo;
  result.model.window_hi = cfg.window_hi;
  SegModel& model = result.model;

  // elastic settings are in mm; slices are sampled in pixels
  AugmentConfig aug = cfg.aug;
  require(cfg.mm_per_px > 0, "train_segmenter: mm_per_px must be positive");
  aug.elastic_grid_mm /= cfg.mm_per_px;
  aug.elastic_sigma_mm /= cfg.mm_per_px;

  int max_delta = 0;
  if (!aug.delta_set.empty())
    max_delta = *std::max_element(aug.delta_set.begin(), aug.delta_set.end());

  nn::OptimState opt = nn::OptimState::adam(cfg.lr);
  Rng rng(derive_seed(cfg.seed, mode == SegMode::Binary ? 11 : 12));

  const int pad_to = ucfg.pad_multiple();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<SliceRef> refs;
    for (size_t ci = 0; ci < crops.size(); ++ci) {
      int nx = crops[ci].dims.nx;
      if (cfg.slices_per_crop_per_epoch > 0 && cfg.slices_per_crop_per_epoch < nx) {
        std::vector<int> xs(size_t(nx), 0);
        std::iota(xs.begin(), xs.end(), 0);
        rng.shuffle(xs);
        xs.resize(size_t(cfg.slices_per_crop_per_epoch));
        for (int x : xs) refs.push_back({int(ci), x});
      } else {
        for (int x = 0; x < nx; ++x) refs.push_back({int(ci), x});
      }
    }
    rng.shuffle(refs);

    double loss_sum = 0;
    for (const SliceRef& ref : refs) {
      Image2D img = extract_slice(crops[size_t(ref.crop)], SliceAxis::Sagittal, ref.x);
      LabelImage2D lab = extract_slice(labels[size_t(ref.crop)], SliceAxis::Sagittal, ref.x);
      if (mode == SegMode::Binary) lab = collapse_binary(lab);

      if (cfg.augment && !aug.delta_set.empty() && img.height > 2 * max_delta) {
        SlicePair p = roi_augment(img, lab, aug, rng);
        img = std::move(p.image);
        lab = std::move(p.labels);
      }
      if (cfg.augment) {
        SlicePair p = geo_augment(img, lab, aug, rng);
        img = std::move(p.image);
        lab = std::move(p.labels);
      }

      nn::Tensor x = to_tensor(mirror_pad(img, pad_to));
      LabelImage2D y = mirror_pad(lab, pad_to);

      nn::ForwardCache cache;
      nn::Tensor logits = nn::forward(model.params, x, &cache);
      nn::LossResult lr = nn::loss_softmax_ce(logits, y, ucfg.out_classes);
      loss_sum += lr.value;
      nn::Grads g = nn::backward(model.params, cache, lr.grad);
      nn::step(opt, model.params, g);
    }
    double mean = loss_sum / double(refs.size());
    require(std::isfinite(mean), "train_segmenter: loss diverged");
    result.epoch_loss.push_back(mean);
  }
  model.params.epochs += cfg.epochs;
  model.params.seed = cfg.seed;
  return result;
}

LabelVolume segment_crop(const SegModel& m, const Volume& crop) {
  const int pad_to = m.cfg.pad_multiple();
  LabelVolume out(crop.dims, crop.spacing);
  for (int x = 0; x < crop.dims.nx; ++x) {
    Image2D img = extract_slice(crop, SliceAxis::Sagittal, x);
    nn::Tensor in = to_tensor(mirror_pad(img, pad_to));
    nn::Tensor logits = nn::forward(m.params, in);
    const int C = logits.shape[0], H = logits.shape[1], W = logits.shape[2];
    for (int z = 0; z < crop.dims.nz; ++z)
      for (int y = 0; y < crop.dims.ny; ++y) {
        int best = 0;
        double best_v = logits.data[size_t(z) * W + y];
        for (int c = 1; c < C; ++c) {
          double v = logits.data[(size_t(c) * H + size_t(z)) * W + y];
          if (v > best_v) {
            best_v = v;
            best = c;
          }
        }
        out.at(x, y, z) = uint8_t(best);
      }
  }
  return out;
}

LabelVolume reinstate(const LabelVolume& label_crop, const BoundingBox& b, Dims3 full_dims) {
  require(b.valid(), "reinstate: invalid box");
  require(b.x_min >= 0 && b.y_min >= 0 && b.z_min >= 0 && b.x_max < full_dims.nx &&
              b.y_max < full_dims.ny && b.z_max < full_dims.nz,
          "reinstate: box exceeds the volume");
  require(label_crop.dims.nx == b.extent_x() && label_crop.dims.ny == b.extent_y() &&
              label_crop.dims.nz == b.extent_z(),
          "reinstate: crop extents do not match the box");
  LabelVolume out(full_dims, label_crop.spacing);
  for (int z = 0; z < label_crop.dims.nz; ++z)
    for (int y = 0; y < label_crop.dims.ny; ++y)
      for (int x = 0; x < label_crop.dims.nx; ++x)
        out.at(b.x_min + x, b.y_min + y, b.z_min + z) = label_crop.at(x, y, z);
  return out;
}

namespace {
constexpr char kSegMagic[8] = {'L', 'S', 'E', 'G', 'S', 'E', 'G', '\n'};
constexpr uint32_t kSegVersion = 1;
}  // namespace

void save_segmenter(const SegModel& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "save_segmenter: cannot write " + path);
  nn::bin::write_bytes(out, kSegMagic, 8);
  nn::bin::write_u32(out, kSegVersion);
  nn::bin::write_i64(out, m.cfg.levels);
  nn::bin::write_i64(out, m.cfg.base_channels);
  nn::bin::write_i64(out, m.cfg.in_channels);
  nn::bin::write_i64(out, m.cfg.out_classes);
  nn::bin::write_u32(out, uint32_t(m.provenance));
  nn::bin::write_f64(out, m.window_lo);
  nn::bin::write_f64(out, m.window_hi);
  nn::write_model(out, m.params);
  require(out.good(), "save_segmenter: short write to " + path);
}

SegModel load_segmenter(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "load_segmenter: cannot open " + path);
  char magic[8];
  nn::bin::read_bytes(in, magic, 8);
  require(std::memcmp(magic, kSegMagic, 8) == 0, "load_segmenter: not a segmenter checkpoint");
  uint32_t version = nn::bin::read_u32(in);
  require(version == kSegVersion, "load_segmenter: unsupported version");
  SegModel m;
  m.cfg.levels = int(nn::bin::read_i64(in));
  m.cfg.base_channels = int(nn::bin::read_i64(in));
  m.cfg.in_channels = int(nn::bin::read_i64(in));
  m.cfg.out_classes = int(nn::bin::read_i64(in));
  uint32_t prov = nn::bin::read_u32(in);
  require(prov <= 1, "load_segmenter: bad provenance tag");
  m.provenance = Provenance(prov);
  m.window_lo = nn::bin::read_f64(in);
  m.window_hi = nn::bin::read_f64(in);
  m.params = nn::read_model(in);
  require(m.params.specs == unet_layer_specs(m.cfg),
          "load_segmenter: layer table does not match the config");
  return m;
}

}  // namespace lseg
