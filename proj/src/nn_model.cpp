#include <algorithm>
#include <cmath>
#include <cstring>

#include "lumbarseg/mathkit.hpp"
#include "lumbarseg/nn/model.hpp"

namespace lseg::nn {
namespace {

std::string shape_str(const std::vector<int>& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + ")";
}

void require_3d(const Tensor& t, const char* where) {
  require(t.shape.size() == 3, std::string(where) + ": expected a [C,H,W] tensor, got shape " +
                                   shape_str(t.shape));
}

// ---- conv2d ----

Tensor conv2d_forward(const LayerSpec& s, const Tensor& w, const Tensor& b, const Tensor& in) {
  require_3d(in, "conv2d");
  require(in.shape[0] == s.in, "conv2d: input has " + std::to_string(in.shape[0]) +
                                   " channels, layer expects " + std::to_string(s.in));
  const int H = in.shape[1], W = in.shape[2], k = s.k, p = s.pad;
  const int Ho = H + 2 * p - k + 1, Wo = W + 2 * p - k + 1;
  require(Ho >= 1 && Wo >= 1, "conv2d: kernel larger than padded input");
  Tensor out = Tensor::zeros({s.out, Ho, Wo});
  for (int oc = 0; oc < s.out; ++oc) {
    double* op = out.plane(oc);
    const double bias = b[size_t(oc)];
    for (int i = 0; i < Ho * Wo; ++i) op[i] = bias;
    for (int ic = 0; ic < s.in; ++ic) {
      const double* ip = in.plane(ic);
      const double* wp = &w.data[size_t(((oc * s.in) + ic)) * size_t(k) * size_t(k)];
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const double wv = wp[ky * k + kx];
          if (wv == 0.0) continue;
          const int x0 = std::max(0, p - kx), x1 = std::min(Wo - 1, W - 1 + p - kx);
          if (x0 > x1) continue;
          for (int yo = 0; yo < Ho; ++yo) {
            const int yi = yo + ky - p;
            if (yi < 0 || yi >= H) continue;
            mk::axpy(wv, ip + size_t(yi) * W + (x0 + kx - p), op + size_t(yo) * Wo + x0,
                     x1 - x0 + 1);
          }
        }
      }
    }
  }
  return out;
}

void conv2d_backward(const LayerSpec& s, const Tensor& w, const Tensor& in, const Tensor& gout,
                     Tensor& gw, Tensor& gb, Tensor& gin) {
  const int H = in.shape[1], W = in.shape[2], k = s.k, p = s.pad;
  const int Ho = gout.shape[1], Wo = gout.shape[2];
  for (int oc = 0; oc < s.out; ++oc) {
    const double* gp = gout.plane(oc);
    double acc = 0;
    for (int i = 0; i < Ho * Wo; ++i) acc += gp[i];
    gb[size_t(oc)] += acc;
    for (int ic = 0; ic < s.in; ++ic) {
      const double* ip = in.plane(ic);
      double* gip = gin.plane(ic);
      const double* wp = &w.data[size_t(((oc * s.in) + ic)) * size_t(k) * size_t(k)];
      double* gwp = &gw.data[size_t(((oc * s.in) + ic)) * size_t(k) * size_t(k)];
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const int x0 = std::max(0, p - kx), x1 = std::min(Wo - 1, W - 1 + p - kx);
          if (x0 > x1) continue;
          const double wv = wp[ky * k + kx];
          double gwv = 0;
          for (int yo = 0; yo < Ho; ++yo) {
            const int yi = yo + ky - p;
            if (yi < 0 || yi >= H) continue;
            const double* grow = gp + size_t(yo) * Wo + x0;
            const double* irow = ip + size_t(yi) * W + (x0 + kx - p);
            double* girow = gip + size_t(yi) * W + (x0 + kx - p);
            gwv += mk::dot(grow, irow, x1 - x0 + 1);
            if (wv != 0.0) mk::axpy(wv, grow, girow, x1 - x0 + 1);
          }
          gwp[ky * k + kx] += gwv;
        }
      }
    }
  }
}

// ---- upconv2: 2x2 transposed convolution, stride 2 ----

Tensor upconv2_forward(const LayerSpec& s, const Tensor& w, const Tensor& b, const Tensor& in) {
  require_3d(in, "upconv2");
  require(in.shape[0] == s.in, "upconv2: input has " + std::to_string(in.shape[0]) +
                                   " channels, layer expects " + std::to_string(s.in));
  const int H = in.shape[1], W = in.shape[2];
  Tensor out = Tensor::zeros({s.out, 2 * H, 2 * W});
  for (int oc = 0; oc < s.out; ++oc) {
    double* op = out.plane(oc);
    const double bias = b[size_t(oc)];
    for (int i = 0; i < 4 * H * W; ++i) op[i] = bias;
    for (int ic = 0; ic < s.in; ++ic) {
      const double* ip = in.plane(ic);
      const double* wp = &w.data[size_t((ic * s.out + oc)) * 4];
      for (int y = 0; y < H; ++y) {
        for (int dy = 0; dy < 2; ++dy) {
          double* orow = op + size_t(2 * y + dy) * (2 * W);
          const double w0 = wp[dy * 2 + 0], w1 = wp[dy * 2 + 1];
          const double* irow = ip + size_t(y) * W;
          for (int x = 0; x < W; ++x) {
            orow[2 * x] += w0 * irow[x];
            orow[2 * x + 1] += w1 * irow[x];
          }
        }
      }
    }
  }
  return out;
}

void upconv2_backward(const LayerSpec& s, const Tensor& w, const Tensor& in, const Tensor& gout,
                      Tensor& gw, Tensor& gb, Tensor& gin) {
  const int H = in.shape[1], W = in.shape[2];
  for (int oc = 0; oc < s.out; ++oc) {
    const double* gp = gout.plane(oc);
    double acc = 0;
    for (int i = 0; i < 4 * H * W; ++i) acc += gp[i];
    gb[size_t(oc)] += acc;
    for (int ic = 0; ic < s.in; ++ic) {
      const double* ip = in.plane(ic);
      double* gip = gin.plane(ic);
      const double* wp = &w.data[size_t((ic * s.out + oc)) * 4];
      double* gwp = &gw.data[size_t((ic * s.out + oc)) * 4];
      for (int y = 0; y < H; ++y) {
        const double* irow = ip + size_t(y) * W;
        double* girow = gip + size_t(y) * W;
        for (int dy = 0; dy < 2; ++dy) {
          const double* grow = gp + size_t(2 * y + dy) * (2 * W);
          const double w0 = wp[dy * 2 + 0], w1 = wp[dy * 2 + 1];
          double g0 = 0, g1 = 0;
          for (int x = 0; x < W; ++x) {
            const double ge = grow[2 * x], go = grow[2 * x + 1];
            g0 += ge * irow[x];
            g1 += go * irow[x];
            girow[x] += w0 * ge + w1 * go;
          }
          gwp[dy * 2 + 0] += g0;
          gwp[dy * 2 + 1] += g1;
        }
      }
    }
  }
}

// ---- softmax over the channel axis (or over a 1D vector) ----

Tensor softmax_forward(const Tensor& in) {
  Tensor out = in;
  if (in.shape.size() == 1) {
    double mx = *std::max_element(in.data.begin(), in.data.end());
    double sum = 0;
    for (auto& v : out.data) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (auto& v : out.data) v /= sum;
    return out;
  }
  require_3d(in, "softmax");
  const int C = in.shape[0];
  const int64_t plane = int64_t(in.shape[1]) * in.shape[2];
  for (int64_t px = 0; px < plane; ++px) {
    double mx = in.data[size_t(px)];
    for (int c = 1; c < C; ++c) mx = std::max(mx, in.data[size_t(c * plane + px)]);
    double sum = 0;
    for (int c = 0; c < C; ++c) {
      double e = std::exp(in.data[size_t(c * plane + px)] - mx);
      out.data[size_t(c * plane + px)] = e;
      sum += e;
    }
    for (int c = 0; c < C; ++c) out.data[size_t(c * plane + px)] /= sum;
  }
  return out;
}

void softmax_backward(const Tensor& out, const Tensor& gout, Tensor& gin) {
  if (out.shape.size() == 1) {
    double dot = 0;
    for (size_t i = 0; i < out.data.size(); ++i) dot += gout.data[i] * out.data[i];
    for (size_t i = 0; i < out.data.size(); ++i)
      gin.data[i] += out.data[i] * (gout.data[i] - dot);
    return;
  }
  const int C = out.shape[0];
  const int64_t plane = int64_t(out.shape[1]) * out.shape[2];
  for (int64_t px = 0; px < plane; ++px) {
    double dot = 0;
    for (int c = 0; c < C; ++c)
      dot += gout.data[size_t(c * plane + px)] * out.data[size_t(c * plane + px)];
    for (int c = 0; c < C; ++c)
      gin.data[size_t(c * plane + px)] +=
          out.data[size_t(c * plane + px)] * (gout.data[size_t(c * plane + px)] - dot);
  }
}

}  // namespace

std::string layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Relu: return "relu";
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::MaxPool2: return "maxpool2";
    case LayerKind::UpConv2: return "upconv2";
    case LayerKind::Concat: return "concat";
    case LayerKind::Softmax: return "softmax";
  }
  return "unknown";
}

ModelParams build_model(const std::vector<LayerSpec>& specs, uint64_t seed) {
  require(!specs.empty(), "build_model: no layers");
  // Channel/feature chaining check. -1 = not yet pinned by any layer.
  std::vector<int> out_ch(specs.size(), -1);
  int cur = -1;
  for (size_t i = 0; i < specs.size(); ++i) {
    const LayerSpec& s = specs[i];
    auto chain = [&](int want, const char* what) {
      require(cur == -1 || cur == want,
              "build_model: layer " + std::to_string(i) + " (" + what + ") expects " +
                  std::to_string(want) + " input channels/features but receives " +
                  std::to_string(cur));
    };
    switch (s.kind) {
      case LayerKind::Dense:
        require(s.in > 0 && s.out > 0, "build_model: dense sizes must be positive");
        chain(s.in, "dense");
        cur = s.out;
        break;
      case LayerKind::Conv2d:
        require(s.in > 0 && s.out > 0, "build_model: conv2d channels must be positive");
        require(s.k >= 1 && s.k % 2 == 1, "build_model: conv2d kernel must be odd");
        require(s.pad >= 0, "build_model: conv2d pad must be >= 0");
        chain(s.in, "conv2d");
        cur = s.out;
        break;
      case LayerKind::UpConv2:
        require(s.in > 0 && s.out > 0, "build_model: upconv2 channels must be positive");
        chain(s.in, "upconv2");
        cur = s.out;
        break;
      case LayerKind::Concat: {
        require(s.skip_id >= 0 && size_t(s.skip_id) < i,
                "build_model: concat skip_id must point at an earlier layer");
        int skip = out_ch[size_t(s.skip_id)];
        if (cur != -1 && skip != -1) cur += skip;
        else cur = -1;
        break;
      }
      case LayerKind::Relu:
      case LayerKind::MaxPool2:
      case LayerKind::Softmax:
        break;
    }
    out_ch[i] = cur;
  }

  ModelParams m;
  m.specs = specs;
  m.seed = seed;
  m.weights.resize(specs.size());
  m.biases.resize(specs.size());
  Rng rng(seed);
  for (size_t i = 0; i < specs.size(); ++i) {
    const LayerSpec& s = specs[i];
    int fan_in = 0;
    switch (s.kind) {
      case LayerKind::Dense:
        m.weights[i] = Tensor::zeros({s.out, s.in});
        m.biases[i] = Tensor::zeros({s.out});
        fan_in = s.in;
        break;
      case LayerKind::Conv2d:
        m.weights[i] = Tensor::zeros({s.out, s.in, s.k, s.k});
        m.biases[i] = Tensor::zeros({s.out});
        fan_in = s.in * s.k * s.k;
        break;
      case LayerKind::UpConv2:
        m.weights[i] = Tensor::zeros({s.in, s.out, 2, 2});
        m.biases[i] = Tensor::zeros({s.out});
        fan_in = s.in;  // stride 2 with a 2x2 kernel: one tap per input channel
        break;
      default:
        break;
    }
    if (fan_in > 0) {
      double std = std::sqrt(2.0 / fan_in);
      for (auto& w : m.weights[i].data) w = rng.normal(0.0, std);
    }
  }
  return m;
}

Tensor forward(const ModelParams& m, const Tensor& input, ForwardCache* cache) {
  require(!m.specs.empty(), "forward: empty model");
  require(!input.empty(), "forward: empty input");
  std::vector<Tensor> acts(m.specs.size() + 1);
  std::vector<std::vector<int64_t>> argmax(m.specs.size());
  acts[0] = input;
  for (size_t i = 0; i < m.specs.size(); ++i) {
    const LayerSpec& s = m.specs[i];
    const Tensor& in = acts[i];
    Tensor& out = acts[i + 1];
    switch (s.kind) {
      case LayerKind::Dense: {
        require(in.shape.size() == 1 && in.shape[0] == s.in,
                "forward: dense layer " + std::to_string(i) + " expects a vector of " +
                    std::to_string(s.in) + ", got shape " + shape_str(in.shape));
        out = Tensor::zeros({s.out});
        const Tensor& w = m.weights[i];
        for (int o = 0; o < s.out; ++o)
          out[size_t(o)] =
              mk::dot(&w.data[size_t(o) * size_t(s.in)], in.data.data(), s.in) +
              m.biases[i][size_t(o)];
        break;
      }
      case LayerKind::Relu: {
        out = in;
        for (auto& v : out.data) v = v > 0 ? v : 0.0;
        break;
      }
      case LayerKind::Conv2d:
        out = conv2d_forward(s, m.weights[i], m.biases[i], in);
        break;
      case LayerKind::MaxPool2: {
        require_3d(in, "maxpool2");
        require(in.shape[1] % 2 == 0 && in.shape[2] % 2 == 0,
                "maxpool2: spatial extents must be even, got " + shape_str(in.shape));
        const int C = in.shape[0], H = in.shape[1], W = in.shape[2];
        out = Tensor::zeros({C, H / 2, W / 2});
        argmax[i].resize(out.data.size());
        for (int c = 0; c < C; ++c) {
          const double* ip = in.plane(c);
          for (int y = 0; y < H / 2; ++y)
            for (int x = 0; x < W / 2; ++x) {
              int64_t base = int64_t(2 * y) * W + 2 * x;
              int64_t best = base;
              double bv = ip[base];
              for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx) {
                  int64_t idx = base + int64_t(dy) * W + dx;
                  if (ip[idx] > bv) {
                    bv = ip[idx];
                    best = idx;
                  }
                }
              size_t o = size_t(c) * size_t(H / 2) * size_t(W / 2) + size_t(y) * (W / 2) + x;
              out.data[o] = bv;
              argmax[i][o] = int64_t(c) * H * W + best;
            }
        }
        break;
      }
      case LayerKind::UpConv2:
        out = upconv2_forward(s, m.weights[i], m.biases[i], in);
        break;
      case LayerKind::Concat: {
        const Tensor& skip = acts[size_t(s.skip_id) + 1];
        require_3d(in, "concat");
        require_3d(skip, "concat skip");
        require(in.shape[1] == skip.shape[1] && in.shape[2] == skip.shape[2],
                "concat: spatial extents differ: " + shape_str(in.shape) + " vs " +
                    shape_str(skip.shape));
        out = Tensor::zeros({in.shape[0] + skip.shape[0], in.shape[1], in.shape[2]});
        std::memcpy(out.data.data(), in.data.data(), in.data.size() * sizeof(double));
        std::memcpy(out.data.data() + in.data.size(), skip.data.data(),
                    skip.data.size() * sizeof(double));
        break;
      }
      case LayerKind::Softmax:
        out = softmax_forward(in);
        break;
    }
  }
  Tensor result = acts.back();
  if (cache) {
    cache->acts = std::move(acts);
    cache->argmax = std::move(argmax);
  }
  return result;
}

Grads make_zero_grads(const ModelParams& m) {
  Grads g;
  g.weights.resize(m.specs.size());
  g.biases.resize(m.specs.size());
  for (size_t i = 0; i < m.specs.size(); ++i) {
    if (!m.weights[i].empty()) g.weights[i] = Tensor::zeros(m.weights[i].shape);
    if (!m.biases[i].empty()) g.biases[i] = Tensor::zeros(m.biases[i].shape);
  }
  return g;
}

void accumulate(Grads& into, const Grads& g) {
  for (size_t i = 0; i < into.weights.size(); ++i) {
    for (size_t j = 0; j < into.weights[i].data.size(); ++j)
      into.weights[i].data[j] += g.weights[i].data[j];
    for (size_t j = 0; j < into.biases[i].data.size(); ++j)
      into.biases[i].data[j] += g.biases[i].data[j];
  }
}

void scale(Grads& g, double s) {
  for (auto& t : g.weights)
    for (auto& v : t.data) v *= s;
  for (auto& t : g.biases)
    for (auto& v : t.data) v *= s;
}

Grads backward(const ModelParams& m, const ForwardCache& cache, const Tensor& grad_out,
               Tensor* grad_in) {
  const size_t n = m.specs.size();
  require(cache.acts.size() == n + 1, "backward: cache does not match this model");
  require(grad_out.shape == cache.acts[n].shape,
          "backward: grad_out shape " + shape_str(grad_out.shape) + " does not match output " +
              shape_str(cache.acts[n].shape));
  Grads g = make_zero_grads(m);
  std::vector<Tensor> d(n + 1);
  for (size_t i = 0; i < n; ++i) d[i] = Tensor::zeros(cache.acts[i].shape);
  d[n] = grad_out;

  for (size_t ii = n; ii-- > 0;) {
    const LayerSpec& s = m.specs[ii];
    const Tensor& in = cache.acts[ii];
    const Tensor& gout = d[ii + 1];
    Tensor& gin = d[ii];
    switch (s.kind) {
      case LayerKind::Dense: {
        const Tensor& w = m.weights[ii];
        for (int o = 0; o < s.out; ++o) {
          const double go = gout[size_t(o)];
          g.biases[ii][size_t(o)] += go;
          mk::axpy(go, in.data.data(), &g.weights[ii].data[size_t(o) * size_t(s.in)], s.in);
          mk::axpy(go, &w.data[size_t(o) * size_t(s.in)], gin.data.data(), s.in);
        }
        break;
      }
      case LayerKind::Relu:
        for (size_t j = 0; j < in.data.size(); ++j)
          if (in.data[j] > 0) gin.data[j] += gout.data[j];
        break;
      case LayerKind::Conv2d:
        conv2d_backward(s, m.weights[ii], in, gout, g.weights[ii], g.biases[ii], gin);
        break;
      case LayerKind::MaxPool2: {
        require(cache.argmax[ii].size() == gout.data.size(),
                "backward: cache does not match this model");
        for (size_t j = 0; j < gout.data.size(); ++j)
          gin.data[size_t(cache.argmax[ii][j])] += gout.data[j];
        break;
      }
      case LayerKind::UpConv2:
        upconv2_backward(s, m.weights[ii], in, gout, g.weights[ii], g.biases[ii], gin);
        break;
      case LayerKind::Concat: {
        Tensor& dskip = d[size_t(s.skip_id) + 1];
        const size_t n_in = in.data.size();
        for (size_t j = 0; j < n_in; ++j) gin.data[j] += gout.data[j];
        for (size_t j = 0; j < dskip.data.size(); ++j)
          dskip.data[j] += gout.data[n_in + j];
        break;
      }
      case LayerKind::Softmax:
        softmax_backward(cache.acts[ii + 1], gout, gin);
        break;
    }
  }
  if (grad_in) *grad_in = std::move(d[0]);
  return g;
}

}  // namespace lseg::nn
