#pragma once

#include <functional>

#include "lumbarseg/image2d.hpp"
#include "lumbarseg/nn/model.hpp"

namespace lseg::nn {

struct LossResult {
  double value;
  Tensor grad;  // d(value)/d(pred)
};

// mean over all elements of (pred - target)^2
LossResult loss_mse(const Tensor& pred, const Tensor& target);

// Per-pixel softmax cross-entropy over the channel axis of [C,H,W] logits,
// averaged over pixels. labels is an H x W image of class ids in [0, C).
LossResult loss_softmax_ce(const Tensor& logits, const LabelImage2D& labels, int num_classes);

struct OptimState {
  enum class Kind { SgdMomentum, Adam } kind;
  double lr = 0;
  double mu = 0;                              // sgd momentum
  double beta1 = 0, beta2 = 0, eps = 0;       // adam
  int64_t t = 0;                              // adam step counter
  std::vector<Tensor> vw, vb;                 // sgd velocity / adam second moment
  std::vector<Tensor> mw, mb;                 // adam first moment

  static OptimState sgd_momentum(double lr, double mu) {
    OptimState o;
    o.kind = Kind::SgdMomentum;
    o.lr = lr;
    o.mu = mu;
    return o;
  }
  static OptimState adam(double lr, double beta1 = 0.9, double beta2 = 0.999,
                         double eps = 1e-8) {
    OptimState o;
    o.kind = Kind::Adam;
    o.lr = lr;
    o.beta1 = beta1;
    o.beta2 = beta2;
    o.eps = eps;
    return o;
  }
};

void step(OptimState& opt, ModelParams& params, const Grads& grads);

using LossFn = std::function<LossResult(const Tensor& output)>;

// Central finite differences (step 1e-5) on >= n_coords randomly chosen
// parameter coordinates against the analytic gradient; returns the max
// relative error. analytic_override substitutes the gradients under test
// (used to prove the checker catches a wrong backward).
double grad_check(const ModelParams& model, const Tensor& input, const LossFn& loss, Rng& rng,
                  int n_coords = 200, double fd_step = 1e-5,
                  const Grads* analytic_override = nullptr);

}  // namespace lseg::nn
