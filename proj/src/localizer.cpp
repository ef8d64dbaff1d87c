#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "lumbarseg/canny.hpp"
#include "lumbarseg/kde.hpp"
#include "lumbarseg/localizer.hpp"
#include "lumbarseg/nn/checkpoint.hpp"
#include "lumbarseg/nn/train.hpp"

namespace lseg {

PlaneOffsets make_targets(Voxel vx, const BoundingBox& gt) {
  PlaneOffsets t;
  t.o = {double(vx.x - gt.x_min), double(vx.x - gt.x_max), double(vx.y - gt.y_min),
         double(vx.y - gt.y_max), double(vx.z - gt.z_min), double(vx.z - gt.z_max)};
  return t;
}

BoundingBox invert_targets(const PlaneOffsets& t, Voxel vx) {
  BoundingBox b;
  b.x_min = int(std::llround(vx.x - t.o[0]));
  b.x_max = int(std::llround(vx.x - t.o[1]));
  b.y_min = int(std::llround(vx.y - t.o[2]));
  b.y_max = int(std::llround(vx.y - t.o[3]));
  b.z_min = int(std::llround(vx.z - t.o[4]));
  b.z_max = int(std::llround(vx.z - t.o[5]));
  return b;
}

namespace {

std::vector<nn::LayerSpec> mlp_specs(const LocalizerConfig& cfg) {
  std::vector<nn::LayerSpec> specs;
  int prev = cfg.n_features;
  for (int h : cfg.hidden) {
    specs.push_back(nn::LayerSpec::dense(prev, h));
    specs.push_back(nn::LayerSpec::relu());
    prev = h;
  }
  specs.push_back(nn::LayerSpec::dense(prev, 6));  // linear output: offsets are signed
  return specs;
}

std::vector<Voxel> sample_edge_voxels(const std::vector<Voxel>& edges, size_t want, Rng& rng) {
  if (edges.size() <= want) return edges;
  std::vector<size_t> idx(edges.size());
  std::iota(idx.begin(), idx.end(), size_t(0));
  rng.shuffle(idx);
  idx.resize(want);
  std::sort(idx.begin(), idx.end());
  std::vector<Voxel> out(want);
  for (size_t i = 0; i < want; ++i) out[i] = edges[idx[i]];
  return out;
}

double median_of(std::vector<double> s) {
  size_t n = s.size();
  std::nth_element(s.begin(), s.begin() + n / 2, s.end());
  double hi = s[n / 2];
  if (n % 2 == 1) return hi;
  std::nth_element(s.begin(), s.begin() + n / 2 - 1, s.begin() + n / 2);
  return 0.5 * (s[n / 2 - 1] + hi);
}

// floor(x + 0.5): integer-shift-equivariant nearest rounding (half up)
int64_t round_half_up(double x) { return int64_t(std::floor(x + 0.5)); }
// ceil(x - 0.5): nearest rounding with halves down
int64_t round_half_down(double x) { return int64_t(std::ceil(x - 0.5)); }

int64_t aggregate_plane(const std::vector<double>& samples, bool max_side) {
  require(!samples.empty(), "aggregate_votes: empty vote list");
  // Working relative to an integer reference keeps the KDE input identical
  // under integer translations of the votes, so the output shifts exactly.
  const int64_t ref = round_half_up(median_of(samples));
  std::vector<double> centered(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) centered[i] = samples[i] - double(ref);

  auto [mn, mx] = std::minmax_element(centered.begin(), centered.end());
  double mode;
  if (*mx == *mn) {
    mode = *mn;  // degenerate density: every vote coincides
  } else if (centered.size() < 16) {
    mode = median_of(centered);
  } else {
    double h = botev_bandwidth(centered);
    mode = kde_mode(centered, h);
  }
  int64_t rounded = max_side ? round_half_up(mode) : round_half_down(mode);
  return rounded + ref;
}

}  // namespace

std::array<int64_t, 6> aggregate_planes(const VoteSet& votes) {
  for (int p = 1; p < 6; ++p)
    require(votes.planes[size_t(p)].size() == votes.planes[0].size(),
            "aggregate_votes: vote lists differ in length");
  std::array<int64_t, 6> out;
  for (int p = 0; p < 6; ++p) {
    bool max_side = (p % 2) == 1;  // planes alternate min/max
    out[size_t(p)] = aggregate_plane(votes.planes[size_t(p)], max_side);
  }
  return out;
}

BoundingBox aggregate_votes(const VoteSet& votes, Dims3 dims) {
  std::array<int64_t, 6> p = aggregate_planes(votes);
  BoundingBox b;
  b.x_min = int(std::min(p[0], p[1]));
  b.x_max = int(std::max(p[0], p[1]));
  b.y_min = int(std::min(p[2], p[3]));
  b.y_max = int(std::max(p[2], p[3]));
  b.z_min = int(std::min(p[4], p[5]));
  b.z_max = int(std::max(p[4], p[5]));
  b.x_min = std::clamp(b.x_min, 0, dims.nx - 1);
  b.x_max = std::clamp(b.x_max, 0, dims.nx - 1);
  b.y_min = std::clamp(b.y_min, 0, dims.ny - 1);
  b.y_max = std::clamp(b.y_max, 0, dims.ny - 1);
  b.z_min = std::clamp(b.z_min, 0, dims.nz - 1);
  b.z_max = std::clamp(b.z_max, 0, dims.nz - 1);
  return b;
}

BoundingBox expand_box(const BoundingBox& b, int tol, Dims3 dims) {
  require(tol >= 0, "expand_box: tolerance must be >= 0");
  BoundingBox e;
  e.x_min = std::max(0, b.x_min - tol);
  e.y_min = std::max(0, b.y_min - tol);
  e.z_min = std::max(0, b.z_min - tol);
  e.x_max = std::min(dims.nx - 1, b.x_max + tol);
  e.y_max = std::min(dims.ny - 1, b.y_max + tol);
  e.z_max = std::min(dims.nz - 1, b.z_max + tol);
  return e;
}

double sensitivity(const LabelVolume& gt, const BoundingBox& b) {
  int64_t total = 0, inside = 0;
  for (int z = 0; z < gt.dims.nz; ++z)
    for (int y = 0; y < gt.dims.ny; ++y)
      for (int x = 0; x < gt.dims.nx; ++x)
        if (gt.at(x, y, z) != 0) {
          ++total;
          if (b.contains(x, y, z)) ++inside;
        }
  require(total > 0, "sensitivity: ground truth has no labelled voxels");
  return double(inside) / double(total);
}

LocalizerTrainResult train_localizer(const std::vector<Volume>& volumes,
                                     const std::vector<BoundingBox>& boxes,
                                     const LocalizerConfig& cfg) {
  require(volumes.size() >= 2, "train_localizer: need at least two training volumes");
  require(volumes.size() == boxes.size(), "train_localizer: volume/box count mismatch");
  require(cfg.epochs >= 1 && cfg.batch >= 1 && cfg.train_voxels_per_volume >= 1,
          "train_localizer: bad hyperparameters");

  LocalizerModel model;
  model.spec = make_feature_spec(cfg.n_features, cfg.probe_offset_mm, cfg.probe_half_lo_mm,
                                 cfg.probe_half_hi_mm, derive_seed(cfg.seed, 1));
  model.window_lo = cfg.window_lo;
  model.window_hi = cfg.window_hi;
  model.canny_sigma_mm = cfg.canny_sigma_mm;
  model.canny_low_q = cfg.canny_low_q;
  model.canny_high_q = cfg.canny_high_q;

  // Features are extracted once per volume; epochs reshuffle pair order.
  std::vector<std::vector<double>> X;
  std::vector<std::array<double, 6>> Y;
  for (size_t vi = 0; vi < volumes.size(); ++vi) {
    Volume norm = normalize_window(volumes[vi], cfg.window_lo, cfg.window_hi);
    std::vector<Voxel> edges =
        canny_edges(norm, cfg.canny_sigma_mm, cfg.canny_low_q, cfg.canny_high_q);
    Rng vrng(derive_seed(cfg.seed, 100 + vi));
    std::vector<Voxel> chosen =
        sample_edge_voxels(edges, size_t(cfg.train_voxels_per_volume), vrng);
    std::vector<std::vector<double>> feats = extract_features(norm, chosen, model.spec);
    for (size_t r = 0; r < chosen.size(); ++r) {
      X.push_back(std::move(feats[r]));
      Y.push_back(make_targets(chosen[r], boxes[vi]).o);
    }
  }

  LocalizerTrainResult result;
  model.mlp = train_offset_mlp(X, Y, cfg, &result.epoch_loss);
  result.model = std::move(model);
  return result;
}

nn::ModelParams train_offset_mlp(const std::vector<std::vector<double>>& X,
                                 const std::vector<std::array<double, 6>>& Y,
                                 const LocalizerConfig& cfg,
                                 std::vector<double>* epoch_loss) {
  require(!X.empty() && X.size() == Y.size(), "train_offset_mlp: bad training pairs");
  for (const auto& row : X)
    require(int(row.size()) == cfg.n_features, "train_offset_mlp: feature width mismatch");
  require(cfg.epochs >= 1 && cfg.batch >= 1, "train_offset_mlp: bad hyperparameters");

  nn::ModelParams mlp = nn::build_model(mlp_specs(cfg), derive_seed(cfg.seed, 2));
  nn::OptimState opt = nn::OptimState::sgd_momentum(cfg.lr, cfg.momentum);

  std::vector<size_t> perm(X.size());
  std::iota(perm.begin(), perm.end(), size_t(0));
  Rng erng(derive_seed(cfg.seed, 3));

  nn::Tensor x = nn::Tensor::zeros({cfg.n_features});
  nn::Tensor t = nn::Tensor::zeros({6});
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    erng.shuffle(perm);
    double epoch_sum = 0;
    size_t nb = 0;
    for (size_t start = 0; start < perm.size(); start += size_t(cfg.batch)) {
      size_t end = std::min(perm.size(), start + size_t(cfg.batch));
      nn::Grads acc = nn::make_zero_grads(mlp);
      double batch_loss = 0;
      for (size_t s = start; s < end; ++s) {
        size_t i = perm[s];
        std::copy(X[i].begin(), X[i].end(), x.data.begin());
        std::copy(Y[i].begin(), Y[i].end(), t.data.begin());
        nn::ForwardCache cache;
        nn::Tensor out = nn::forward(mlp, x, &cache);
        nn::LossResult lr = nn::loss_mse(out, t);
        batch_loss += lr.value;
        nn::Grads g = nn::backward(mlp, cache, lr.grad);
        nn::accumulate(acc, g);
      }
      double inv = 1.0 / double(end - start);
      nn::scale(acc, inv);
      nn::step(opt, mlp, acc);
      epoch_sum += batch_loss * inv;
      ++nb;
    }
    double mean = epoch_sum / double(nb);
    require(std::isfinite(mean), "train_offset_mlp: loss diverged");
    if (epoch_loss) epoch_loss->push_back(mean);
  }
  mlp.epochs = cfg.epochs;
  mlp.seed = cfg.seed;
  return mlp;
}

VoteSet predict_votes(const LocalizerModel& m, const Volume& v, int max_voxels, uint64_t seed) {
  require(max_voxels >= 1, "predict_votes: max_voxels must be >= 1");
  Volume norm = normalize_window(v, m.window_lo, m.window_hi);
  std::vector<Voxel> edges =
      canny_edges(norm, m.canny_sigma_mm, m.canny_low_q, m.canny_high_q);
  Rng rng(derive_seed(seed, 0x5b5a));
  std::vector<Voxel> chosen = sample_edge_voxels(edges, size_t(max_voxels), rng);
  std::vector<std::vector<double>> feats = extract_features(norm, chosen, m.spec);

  VoteSet votes;
  for (auto& p : votes.planes) p.reserve(chosen.size());
  nn::Tensor x = nn::Tensor::zeros({m.spec.n});
  for (size_t r = 0; r < chosen.size(); ++r) {
    std::copy(feats[r].begin(), feats[r].end(), x.data.begin());
    nn::Tensor y = nn::forward(m.mlp, x);
    const Voxel& vx = chosen[r];
    votes.planes[0].push_back(vx.x - y[0]);
    votes.planes[1].push_back(vx.x - y[1]);
    votes.planes[2].push_back(vx.y - y[2]);
    votes.planes[3].push_back(vx.y - y[3]);
    votes.planes[4].push_back(vx.z - y[4]);
    votes.planes[5].push_back(vx.z - y[5]);
  }
  return votes;
}

namespace {
constexpr char kLocMagic[8] = {'L', 'S', 'E', 'G', 'L', 'O', 'C', '\n'};
constexpr uint32_t kLocVersion = 1;
}  // namespace

void save_localizer(const LocalizerModel& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "save_localizer: cannot write " + path);
  nn::bin::write_bytes(out, kLocMagic, 8);
  nn::bin::write_u32(out, kLocVersion);
  nn::write_model(out, m.mlp);
  nn::bin::write_i64(out, m.spec.n);
  nn::bin::write_f64(out, m.spec.offset_range_mm);
  nn::bin::write_f64(out, m.spec.halfsize_lo_mm);
  nn::bin::write_f64(out, m.spec.halfsize_hi_mm);
  nn::bin::write_u64(out, m.spec.seed);
  for (const Probe& p : m.spec.probes) {
    nn::bin::write_f64(out, p.ox);
    nn::bin::write_f64(out, p.oy);
    nn::bin::write_f64(out, p.oz);
    nn::bin::write_f64(out, p.hx);
    nn::bin::write_f64(out, p.hy);
    nn::bin::write_f64(out, p.hz);
  }
  nn::bin::write_f64(out, m.window_lo);
  nn::bin::write_f64(out, m.window_hi);
  nn::bin::write_f64(out, m.canny_sigma_mm);
  nn::bin::write_f64(out, m.canny_low_q);
  nn::bin::write_f64(out, m.canny_high_q);
  require(out.good(), "save_localizer: short write to " + path);
}

LocalizerModel load_localizer(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "load_localizer: cannot open " + path);
  char magic[8];
  nn::bin::read_bytes(in, magic, 8);
  require(std::memcmp(magic, kLocMagic, 8) == 0,
          "load_localizer: not a localizer checkpoint");
  uint32_t version = nn::bin::read_u32(in);
  require(version == kLocVersion, "load_localizer: unsupported version");
  LocalizerModel m;
  m.mlp = nn::read_model(in);
  m.spec.n = int(nn::bin::read_i64(in));
  require(m.spec.n >= 1 && m.spec.n <= (1 << 20), "load_localizer: implausible probe count");
  m.spec.offset_range_mm = nn::bin::read_f64(in);
  m.spec.halfsize_lo_mm = nn::bin::read_f64(in);
  m.spec.halfsize_hi_mm = nn::bin::read_f64(in);
  m.spec.seed = nn::bin::read_u64(in);
  m.spec.probes.resize(size_t(m.spec.n));
  for (Probe& p : m.spec.probes) {
    p.ox = nn::bin::read_f64(in);
    p.oy = nn::bin::read_f64(in);
    p.oz = nn::bin::read_f64(in);
    p.hx = nn::bin::read_f64(in);
    p.hy = nn::bin::read_f64(in);
    p.hz = nn::bin::read_f64(in);
  }
  m.window_lo = nn::bin::read_f64(in);
  m.window_hi = nn::bin::read_f64(in);
  m.canny_sigma_mm = nn::bin::read_f64(in);
  m.canny_low_q = nn::bin::read_f64(in);
  m.canny_high_q = nn::bin::read_f64(in);
  require(!m.mlp.specs.empty() && m.mlp.specs.front().in == m.spec.n,
          "load_localizer: feature count does not match the model input");
  return m;
}

}  // namespace lseg
