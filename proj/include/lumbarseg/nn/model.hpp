#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lumbarseg/nn/tensor.hpp"
#include "lumbarseg/rng.hpp"

namespace lseg::nn {

enum class LayerKind : uint32_t {
  Dense = 1,
  Relu = 2,
  Conv2d = 3,
  MaxPool2 = 4,
  UpConv2 = 5,
  Concat = 6,
  Softmax = 7,
};

// One layer of a fixed sequential graph. Concat layers splice in the output
// of an earlier layer (skip_id), which is how the U-Net skip paths are wired.
struct LayerSpec {
  LayerKind kind;
  int in = 0;        // dense: input features; conv/upconv: input channels
  int out = 0;       // dense: output features; conv/upconv: output channels
  int k = 0;         // conv2d kernel size (odd)
  int pad = 0;       // conv2d zero padding per side
  int skip_id = -1;  // concat: index of the layer whose output is appended

  static LayerSpec dense(int in, int out) { return {LayerKind::Dense, in, out, 0, 0, -1}; }
  static LayerSpec relu() { return {LayerKind::Relu, 0, 0, 0, 0, -1}; }
  static LayerSpec conv2d(int in_ch, int out_ch, int k = 3, int pad = 1) {
    return {LayerKind::Conv2d, in_ch, out_ch, k, pad, -1};
  }
  static LayerSpec maxpool2() { return {LayerKind::MaxPool2, 0, 0, 0, 0, -1}; }
  static LayerSpec upconv2(int in_ch, int out_ch) {
    return {LayerKind::UpConv2, in_ch, out_ch, 2, 0, -1};
  }
  static LayerSpec concat(int skip_id) { return {LayerKind::Concat, 0, 0, 0, 0, skip_id}; }
  static LayerSpec softmax() { return {LayerKind::Softmax, 0, 0, 0, 0, -1}; }

  bool operator==(const LayerSpec&) const = default;
};

std::string layer_kind_name(LayerKind k);

struct ModelParams {
  std::vector<LayerSpec> specs;
  std::vector<Tensor> weights;  // empty tensor for parameterless layers
  std::vector<Tensor> biases;
  uint64_t seed = 0;
  int64_t epochs = 0;

  int64_t param_count() const {
    int64_t n = 0;
    for (const auto& t : weights) n += t.size();
    for (const auto& t : biases) n += t.size();
    return n;
  }
};

// Validates layer chaining and He-initialises weights (std = sqrt(2/fan_in),
// zero biases) from the given seed.
ModelParams build_model(const std::vector<LayerSpec>& specs, uint64_t seed);

struct ForwardCache {
  std::vector<Tensor> acts;                  // acts[0] = input, acts[i+1] = layer i output
  std::vector<std::vector<int64_t>> argmax;  // per maxpool layer: winner index in its input
};

// cache may be null for inference-only calls.
Tensor forward(const ModelParams& m, const Tensor& input, ForwardCache* cache = nullptr);

struct Grads {
  std::vector<Tensor> weights, biases;
};

Grads make_zero_grads(const ModelParams& m);
void accumulate(Grads& into, const Grads& g);
void scale(Grads& g, double s);

// grad_out is d(loss)/d(output). Returns parameter gradients; grad_in, if
// non-null, receives d(loss)/d(input).
Grads backward(const ModelParams& m, const ForwardCache& cache, const Tensor& grad_out,
               Tensor* grad_in = nullptr);

}  // namespace lseg::nn
