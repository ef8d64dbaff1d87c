#include <algorithm>
#include <cmath>

#include "lumbarseg/nn/train.hpp"

namespace lseg::nn {

LossResult loss_mse(const Tensor& pred, const Tensor& target) {
  require(pred.shape == target.shape, "loss_mse: shape mismatch");
  const double n = double(pred.data.size());
  LossResult r;
  r.grad = Tensor::zeros(pred.shape);
  double sum = 0;
  for (size_t i = 0; i < pred.data.size(); ++i) {
    double d = pred.data[i] - target.data[i];
    sum += d * d;
    r.grad.data[i] = 2.0 * d / n;
  }
  r.value = sum / n;
  return r;
}

LossResult loss_softmax_ce(const Tensor& logits, const LabelImage2D& labels, int num_classes) {
  require(logits.shape.size() == 3, "loss_softmax_ce: logits must be [C,H,W]");
  const int C = logits.shape[0], H = logits.shape[1], W = logits.shape[2];
  require(C == num_classes, "loss_softmax_ce: channel count differs from class count");
  require(labels.height == H && labels.width == W,
          "loss_softmax_ce: label image does not match logits");
  const int64_t plane = int64_t(H) * W;
  LossResult r;
  r.grad = Tensor::zeros(logits.shape);
  double loss = 0;
  for (int64_t px = 0; px < plane; ++px) {
    int lab = labels.pix[size_t(px)];
    require(lab >= 0 && lab < C, "loss_softmax_ce: label out of range");
    double mx = logits.data[size_t(px)];
    for (int c = 1; c < C; ++c) mx = std::max(mx, logits.data[size_t(c * plane + px)]);
    double sum = 0;
    for (int c = 0; c < C; ++c) sum += std::exp(logits.data[size_t(c * plane + px)] - mx);
    loss += std::log(sum) - (logits.data[size_t(lab * plane + px)] - mx);
    for (int c = 0; c < C; ++c) {
      double p = std::exp(logits.data[size_t(c * plane + px)] - mx) / sum;
      r.grad.data[size_t(c * plane + px)] = (p - (c == lab ? 1.0 : 0.0)) / double(plane);
    }
  }
  r.value = loss / double(plane);
  return r;
}

namespace {

void ensure_buffers(OptimState& o, const ModelParams& p) {
  if (!o.vw.empty()) return;
  auto zeros_like = [](const std::vector<Tensor>& src) {
    std::vector<Tensor> out(src.size());
    for (size_t i = 0; i < src.size(); ++i)
      if (!src[i].empty()) out[i] = Tensor::zeros(src[i].shape);
    return out;
  };
  o.vw = zeros_like(p.weights);
  o.vb = zeros_like(p.biases);
  if (o.kind == OptimState::Kind::Adam) {
    o.mw = zeros_like(p.weights);
    o.mb = zeros_like(p.biases);
  }
}

void sgd_update(Tensor& w, Tensor& vel, const Tensor& g, double lr, double mu) {
  for (size_t i = 0; i < w.data.size(); ++i) {
    vel.data[i] = mu * vel.data[i] - lr * g.data[i];
    w.data[i] += vel.data[i];
  }
}

void adam_update(Tensor& w, Tensor& m, Tensor& v, const Tensor& g, const OptimState& o,
                 double bc1, double bc2) {
  for (size_t i = 0; i < w.data.size(); ++i) {
    m.data[i] = o.beta1 * m.data[i] + (1 - o.beta1) * g.data[i];
    v.data[i] = o.beta2 * v.data[i] + (1 - o.beta2) * g.data[i] * g.data[i];
    double mhat = m.data[i] / bc1;
    double vhat = v.data[i] / bc2;
    w.data[i] -= o.lr * mhat / (std::sqrt(vhat) + o.eps);
  }
}

}  // namespace

void step(OptimState& opt, ModelParams& params, const Grads& grads) {
  require(grads.weights.size() == params.weights.size(), "step: gradient layout mismatch");
  ensure_buffers(opt, params);
  if (opt.kind == OptimState::Kind::SgdMomentum) {
    for (size_t i = 0; i < params.weights.size(); ++i) {
      if (params.weights[i].empty()) continue;
      sgd_update(params.weights[i], opt.vw[i], grads.weights[i], opt.lr, opt.mu);
      sgd_update(params.biases[i], opt.vb[i], grads.biases[i], opt.lr, opt.mu);
    }
  } else {
    opt.t += 1;
    double bc1 = 1.0 - std::pow(opt.beta1, double(opt.t));
    double bc2 = 1.0 - std::pow(opt.beta2, double(opt.t));
    for (size_t i = 0; i < params.weights.size(); ++i) {
      if (params.weights[i].empty()) continue;
      adam_update(params.weights[i], opt.mw[i], opt.vw[i], grads.weights[i], opt, bc1, bc2);
      adam_update(params.biases[i], opt.mb[i], opt.vb[i], grads.biases[i], opt, bc1, bc2);
    }
  }
}

double grad_check(const ModelParams& model, const Tensor& input, const LossFn& loss, Rng& rng,
                  int n_coords, double fd_step, const Grads* analytic_override) {
  require(model.param_count() <= 10000, "grad_check: model too large for finite differences");
  ForwardCache cache;
  Tensor out = forward(model, input, &cache);
  LossResult base = loss(out);
  Grads analytic = analytic_override ? *analytic_override : backward(model, cache, base.grad);

  // All parameter coordinates, flattened as (layer, is_bias, index).
  struct Coord {
    size_t layer, idx;
    bool bias;
  };
  std::vector<Coord> coords;
  for (size_t i = 0; i < model.weights.size(); ++i) {
    for (size_t j = 0; j < model.weights[i].data.size(); ++j) coords.push_back({i, j, false});
    for (size_t j = 0; j < model.biases[i].data.size(); ++j) coords.push_back({i, j, true});
  }
  rng.shuffle(coords);
  size_t take = std::min(coords.size(), size_t(std::max(1, n_coords)));

  ModelParams probe = model;
  double max_rel = 0;
  for (size_t c = 0; c < take; ++c) {
    const Coord& co = coords[c];
    double& slot = co.bias ? probe.biases[co.layer].data[co.idx]
                           : probe.weights[co.layer].data[co.idx];
    const double orig = slot;
    slot = orig + fd_step;
    double lp = loss(forward(probe, input)).value;
    slot = orig - fd_step;
    double lm = loss(forward(probe, input)).value;
    slot = orig;
    double fd = (lp - lm) / (2 * fd_step);
    double an = co.bias ? analytic.biases[co.layer].data[co.idx]
                        : analytic.weights[co.layer].data[co.idx];
    double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-4});
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace lseg::nn
