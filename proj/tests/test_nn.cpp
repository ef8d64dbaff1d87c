#include <doctest.h>

#include <cmath>
#include <fstream>

#include "helpers.hpp"
#include "lumbarseg/nn/checkpoint.hpp"
#include "lumbarseg/nn/train.hpp"

using namespace lseg;
using namespace lseg::nn;
using lseg::test::TempDir;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (auto& v : t.data) v = rng.normal(0.0, scale);
  return t;
}

// The U-Net shape used by several checks: 2 levels, 4 base channels.
std::vector<LayerSpec> tiny_unet(int in_ch, int classes) {
  return {
      LayerSpec::conv2d(in_ch, 4), LayerSpec::relu(),
      LayerSpec::conv2d(4, 4),     LayerSpec::relu(),     // idx 3: skip source
      LayerSpec::maxpool2(),
      LayerSpec::conv2d(4, 8),     LayerSpec::relu(),
      LayerSpec::conv2d(8, 8),     LayerSpec::relu(),
      LayerSpec::upconv2(8, 4),
      LayerSpec::concat(3),
      LayerSpec::conv2d(8, 4),     LayerSpec::relu(),
      LayerSpec::conv2d(4, 4),     LayerSpec::relu(),
      LayerSpec::conv2d(4, classes, 1, 0),
  };
}

}  // namespace

TEST_CASE("forward: dense identity, relu clamp, zero-kernel conv") {
  ModelParams id = build_model({LayerSpec::dense(3, 3)}, 1);
  for (auto& w : id.weights[0].data) w = 0;
  id.weights[0].data[0] = id.weights[0].data[4] = id.weights[0].data[8] = 1.0;
  Tensor x = Tensor::zeros({3});
  x.data = {1.5, -2.0, 0.25};
  Tensor y = forward(id, x);
  CHECK(y.data == x.data);

  ModelParams r = build_model({LayerSpec::relu()}, 1);
  Tensor v = Tensor::zeros({3});
  v.data = {-1, 0, 2};
  Tensor rv = forward(r, v);
  CHECK(rv.data == std::vector<double>{0, 0, 2});

  ModelParams c = build_model({LayerSpec::conv2d(1, 2)}, 1);
  for (auto& w : c.weights[0].data) w = 0;
  c.biases[0].data = {3.5, -1.25};
  Rng rng(2);
  Tensor img = random_tensor({1, 4, 5}, rng);
  Tensor out = forward(c, img);
  REQUIRE(out.shape == std::vector<int>{2, 4, 5});
  for (int i = 0; i < 20; ++i) {
    CHECK(out.plane(0)[i] == 3.5);
    CHECK(out.plane(1)[i] == -1.25);
  }
}

TEST_CASE("forward: shape mismatches are rejected") {
  ModelParams d = build_model({LayerSpec::dense(4, 2)}, 1);
  Tensor bad = Tensor::zeros({5});
  CHECK_THROWS_AS(forward(d, bad), Error);

  ModelParams c = build_model({LayerSpec::conv2d(2, 2)}, 1);
  Tensor one_ch = Tensor::zeros({1, 4, 4});
  CHECK_THROWS_AS(forward(c, one_ch), Error);

  ModelParams p = build_model({LayerSpec::maxpool2()}, 1);
  Tensor odd = Tensor::zeros({1, 3, 4});
  CHECK_THROWS_AS(forward(p, odd), Error);
}

TEST_CASE("build_model: chaining and concat validation") {
  CHECK_THROWS_AS(build_model({LayerSpec::dense(4, 3), LayerSpec::dense(5, 2)}, 1), Error);
  CHECK_THROWS_AS(build_model({LayerSpec::conv2d(1, 4), LayerSpec::conv2d(3, 4)}, 1), Error);
  CHECK_THROWS_AS(build_model({LayerSpec::conv2d(1, 4), LayerSpec::concat(1)}, 1), Error);
  CHECK_THROWS_AS(build_model({LayerSpec::conv2d(1, 4), LayerSpec::conv2d(4, 0)}, 1), Error);
  CHECK_NOTHROW(build_model(tiny_unet(1, 2), 1));
}

TEST_CASE("build_model: He init statistics and zero biases") {
  ModelParams m = build_model({LayerSpec::dense(200, 100)}, 99);
  for (double b : m.biases[0].data) CHECK(b == 0.0);
  double sum = 0, sq = 0;
  for (double w : m.weights[0].data) {
    sum += w;
    sq += w * w;
  }
  double n = double(m.weights[0].data.size());
  double mean = sum / n, var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.005);
  CHECK(var == doctest::Approx(2.0 / 200).epsilon(0.05));
  // deterministic given the seed
  ModelParams m2 = build_model({LayerSpec::dense(200, 100)}, 99);
  CHECK(m2.weights[0].data == m.weights[0].data);
}

TEST_CASE("backward: dense weight gradient broadcasts the input") {
  ModelParams m = build_model({LayerSpec::dense(3, 2)}, 5);
  Tensor x = Tensor::zeros({3});
  x.data = {0.5, -1.0, 2.0};
  ForwardCache cache;
  forward(m, x, &cache);
  Tensor ones = Tensor::zeros({2});
  ones.data = {1.0, 1.0};  // loss = sum(output)
  Tensor gin;
  Grads g = backward(m, cache, ones, &gin);
  for (int o = 0; o < 2; ++o)
    for (int i = 0; i < 3; ++i)
      CHECK(g.weights[0].data[size_t(o * 3 + i)] == doctest::Approx(x.data[size_t(i)]));
  CHECK(g.biases[0].data == std::vector<double>{1.0, 1.0});
  // d(sum(Wx+b))/dx = column sums of W
  for (int i = 0; i < 3; ++i)
    CHECK(gin.data[size_t(i)] ==
          doctest::Approx(m.weights[0].data[size_t(i)] + m.weights[0].data[size_t(3 + i)]));
}

TEST_CASE("backward: maxpool2 routes gradient to the argmax only") {
  ModelParams m = build_model({LayerSpec::maxpool2()}, 1);
  Tensor x = Tensor::zeros({1, 2, 4});
  x.data = {1, 9, 2, 3,
            4, 5, 6, 7};  // maxima: 9 (idx 1) and 7 (idx 7)
  ForwardCache cache;
  Tensor y = forward(m, x, &cache);
  REQUIRE(y.shape == std::vector<int>{1, 1, 2});
  CHECK(y.data == std::vector<double>{9, 7});
  Tensor go = Tensor::zeros({1, 1, 2});
  go.data = {10, 20};
  Tensor gin;
  backward(m, cache, go, &gin);
  CHECK(gin.data == std::vector<double>{0, 10, 0, 0, 0, 0, 0, 20});
}

TEST_CASE("shapes: same-conv preserves, pool halves, upconv doubles, concat splices") {
  Rng rng(3);
  Tensor img = random_tensor({2, 6, 8}, rng);
  ModelParams c = build_model({LayerSpec::conv2d(2, 3)}, 1);
  CHECK(forward(c, img).shape == std::vector<int>{3, 6, 8});
  ModelParams p = build_model({LayerSpec::maxpool2()}, 1);
  CHECK(forward(p, img).shape == std::vector<int>{2, 3, 4});
  ModelParams u = build_model({LayerSpec::upconv2(2, 5)}, 1);
  CHECK(forward(u, img).shape == std::vector<int>{5, 12, 16});
  // concat appends the referenced layer's output after the current channels
  ModelParams k = build_model({LayerSpec::conv2d(2, 3), LayerSpec::relu(), LayerSpec::concat(0)},
                              1);
  Tensor cat = forward(k, img);
  CHECK(cat.shape == std::vector<int>{6, 6, 8});
  Tensor conv_out = forward(build_model({LayerSpec::conv2d(2, 3)}, 1), img);
  for (int i = 0; i < 3 * 6 * 8; ++i) {
    CHECK(cat.data[size_t(3 * 6 * 8 + i)] == conv_out.data[size_t(i)]);
    CHECK(cat.data[size_t(i)] == std::max(0.0, conv_out.data[size_t(i)]));
  }
}

TEST_CASE("gradients: every layer kind matches central finite differences") {
  Rng rng(17);

  auto mse_against = [](Tensor target) {
    return [target = std::move(target)](const Tensor& out) { return loss_mse(out, target); };
  };

  SUBCASE("dense + relu MLP") {
    ModelParams m = build_model(
        {LayerSpec::dense(8, 6), LayerSpec::relu(), LayerSpec::dense(6, 4), LayerSpec::relu(),
         LayerSpec::dense(4, 3)},
        21);
    Tensor x = random_tensor({8}, rng);
    Tensor t = random_tensor({3}, rng);
    CHECK(grad_check(m, x, mse_against(t), rng) < 1e-4);
  }
  SUBCASE("conv2d") {
    ModelParams m = build_model({LayerSpec::conv2d(2, 3), LayerSpec::relu(),
                                 LayerSpec::conv2d(3, 2)},
                                22);
    Tensor x = random_tensor({2, 5, 6}, rng);
    Tensor t = random_tensor({2, 5, 6}, rng);
    CHECK(grad_check(m, x, mse_against(t), rng) < 1e-4);
  }
  SUBCASE("maxpool2") {
    ModelParams m = build_model({LayerSpec::conv2d(1, 2), LayerSpec::maxpool2()}, 23);
    Tensor x = random_tensor({1, 6, 6}, rng);
    Tensor t = random_tensor({2, 3, 3}, rng);
    CHECK(grad_check(m, x, mse_against(t), rng) < 1e-4);
  }
  SUBCASE("upconv2") {
    ModelParams m = build_model({LayerSpec::upconv2(2, 3), LayerSpec::relu(),
                                 LayerSpec::conv2d(3, 1)},
                                24);
    Tensor x = random_tensor({2, 3, 4}, rng);
    Tensor t = random_tensor({1, 6, 8}, rng);
    CHECK(grad_check(m, x, mse_against(t), rng) < 1e-4);
  }
  SUBCASE("concat routes both paths") {
    ModelParams m = build_model(
        {LayerSpec::conv2d(1, 2), LayerSpec::relu(), LayerSpec::concat(0),
         LayerSpec::conv2d(4, 2)},
        25);
    Tensor x = random_tensor({1, 4, 4}, rng);
    Tensor t = random_tensor({2, 4, 4}, rng);
    CHECK(grad_check(m, x, mse_against(t), rng) < 1e-4);
  }
  SUBCASE("softmax") {
    ModelParams m = build_model({LayerSpec::dense(5, 4), LayerSpec::softmax()}, 26);
    Tensor x = random_tensor({5}, rng);
    Tensor t = random_tensor({4}, rng);
    CHECK(grad_check(m, x, mse_against(t), rng) < 1e-4);
  }
}

TEST_CASE("gradients: tiny U-Net with cross-entropy passes, corrupted backward fails") {
  Rng rng(31);
  ModelParams m = build_model(tiny_unet(1, 2), 31);
  Tensor x = random_tensor({1, 8, 8}, rng);
  LabelImage2D labels;
  labels.width = 8;
  labels.height = 8;
  labels.pix.resize(64);
  for (auto& p : labels.pix) p = uint8_t(rng.uniform_int(0, 1));
  auto ce = [&](const Tensor& out) { return loss_softmax_ce(out, labels, 2); };
  CHECK(grad_check(m, x, ce, rng, 300) < 1e-4);

  // negative control: scaled analytic gradients must be flagged
  ForwardCache cache;
  Tensor out = forward(m, x, &cache);
  Grads wrong = backward(m, cache, ce(out).grad);
  for (auto& t : wrong.weights)
    for (auto& v : t.data) v *= 1.5;
  CHECK(grad_check(m, x, ce, rng, 300, 1e-5, &wrong) > 1e-2);
}

TEST_CASE("grad_check rejects oversized models") {
  ModelParams big = build_model({LayerSpec::dense(200, 200)}, 1);
  Rng rng(1);
  Tensor x = random_tensor({200}, rng);
  auto loss = [](const Tensor& out) { return loss_mse(out, Tensor::zeros({200})); };
  CHECK_THROWS_AS(grad_check(big, x, loss, rng), Error);
}

TEST_CASE("loss_mse: minimum, direct value, finite-difference gradient") {
  Tensor a = Tensor::zeros({4});
  a.data = {1, 2, 3, 4};
  LossResult eq = loss_mse(a, a);
  CHECK(eq.value == 0.0);
  for (double g : eq.grad.data) CHECK(g == 0.0);

  Tensor p = Tensor::zeros({2});
  p.data = {1, 1};
  Tensor t = Tensor::zeros({2});
  LossResult r = loss_mse(p, t);
  CHECK(r.value == doctest::Approx(1.0));

  Rng rng(8);
  Tensor pred = Tensor::zeros({6});
  Tensor targ = Tensor::zeros({6});
  for (auto& v : pred.data) v = rng.normal();
  for (auto& v : targ.data) v = rng.normal();
  LossResult base = loss_mse(pred, targ);
  const double h = 1e-6;
  for (size_t i = 0; i < pred.data.size(); ++i) {
    Tensor pp = pred, pm = pred;
    pp.data[i] += h;
    pm.data[i] -= h;
    double fd = (loss_mse(pp, targ).value - loss_mse(pm, targ).value) / (2 * h);
    CHECK(std::abs(fd - base.grad.data[i]) / std::max(1e-6, std::abs(fd)) < 1e-6);
  }

  Tensor wrong = Tensor::zeros({3});
  CHECK_THROWS_AS(loss_mse(pred, wrong), Error);
}

TEST_CASE("loss_softmax_ce: uniform logits give ln C exactly") {
  Tensor logits = Tensor::zeros({6, 3, 3});
  for (auto& v : logits.data) v = 0.7;  // any constant
  LabelImage2D labels;
  labels.width = 3;
  labels.height = 3;
  labels.pix = {0, 1, 2, 3, 4, 5, 0, 5, 2};
  LossResult r = loss_softmax_ce(logits, labels, 6);
  CHECK(std::abs(r.value - std::log(6.0)) < 1e-12);

  // saturated correct prediction drives the loss to zero
  Tensor hot = Tensor::zeros({6, 1, 1});
  LabelImage2D one;
  one.width = 1;
  one.height = 1;
  one.pix = {3};
  hot.data[3] = 60.0;
  CHECK(loss_softmax_ce(hot, one, 6).value < 1e-20);

  one.pix = {6};
  CHECK_THROWS_AS(loss_softmax_ce(hot, one, 6), Error);
}

TEST_CASE("loss_softmax_ce: gradient matches finite differences") {
  Rng rng(12);
  Tensor logits = random_tensor({3, 2, 2}, rng);
  LabelImage2D labels;
  labels.width = 2;
  labels.height = 2;
  labels.pix = {0, 2, 1, 1};
  LossResult base = loss_softmax_ce(logits, labels, 3);
  const double h = 1e-6;
  for (size_t i = 0; i < logits.data.size(); ++i) {
    Tensor lp = logits, lm = logits;
    lp.data[i] += h;
    lm.data[i] -= h;
    double fd = (loss_softmax_ce(lp, labels, 3).value - loss_softmax_ce(lm, labels, 3).value) /
                (2 * h);
    CHECK(std::abs(fd - base.grad.data[i]) < 1e-5 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("optimisers: fixed points and first-step magnitudes") {
  ModelParams m = build_model({LayerSpec::dense(2, 2)}, 3);
  ModelParams orig = m;
  Grads zero = make_zero_grads(m);

  OptimState sgd = OptimState::sgd_momentum(0.1, 0.9);
  step(sgd, m, zero);
  CHECK(m.weights[0].data == orig.weights[0].data);

  // one step, no momentum: w = 1, g = 1, lr = 0.1 -> 0.9
  ModelParams single = build_model({LayerSpec::dense(1, 1)}, 1);
  single.weights[0].data = {1.0};
  Grads g = make_zero_grads(single);
  g.weights[0].data = {1.0};
  OptimState plain = OptimState::sgd_momentum(0.1, 0.0);
  step(plain, single, g);
  CHECK(single.weights[0].data[0] == doctest::Approx(0.9));

  // momentum accumulates: second step with the same gradient moves farther
  OptimState mom = OptimState::sgd_momentum(0.1, 0.9);
  ModelParams m2 = build_model({LayerSpec::dense(1, 1)}, 1);
  m2.weights[0].data = {1.0};
  step(mom, m2, g);
  double d1 = 1.0 - m2.weights[0].data[0];
  double before = m2.weights[0].data[0];
  step(mom, m2, g);
  double d2 = before - m2.weights[0].data[0];
  CHECK(d2 == doctest::Approx(d1 * 1.9));

  // Adam first step is close to lr regardless of gradient scale
  for (double gscale : {1e-3, 1.0, 250.0}) {
    ModelParams a = build_model({LayerSpec::dense(1, 1)}, 1);
    a.weights[0].data = {0.5};
    Grads ga = make_zero_grads(a);
    ga.weights[0].data = {gscale};
    OptimState adam = OptimState::adam(1e-4);
    step(adam, a, ga);
    double dw = std::abs(0.5 - a.weights[0].data[0]);
    CHECK(dw >= 0.9e-4);
    CHECK(dw <= 1.0e-4 * (1 + 1e-9));
  }
}

TEST_CASE("checkpoint: bitwise round-trip, truncation, spec mismatch") {
  TempDir td("ckpt");
  Rng rng(44);
  ModelParams m = build_model(tiny_unet(1, 2), 44);
  m.epochs = 123;
  save_checkpoint(m, td.file("m.ckpt"));
  ModelParams r = load_checkpoint(td.file("m.ckpt"));
  CHECK(r.specs == m.specs);
  CHECK(r.seed == m.seed);
  CHECK(r.epochs == 123);
  for (size_t i = 0; i < m.specs.size(); ++i) {
    CHECK(r.weights[i].data == m.weights[i].data);
    CHECK(r.biases[i].data == m.biases[i].data);
  }

  // truncate the file at 60% and expect a corrupt-checkpoint error
  std::ifstream in(td.file("m.ckpt"), std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  std::ofstream out(td.file("trunc.ckpt"), std::ios::binary);
  out.write(bytes.data(), std::streamsize(bytes.size() * 3 / 5));
  out.close();
  CHECK_THROWS_AS(load_checkpoint(td.file("trunc.ckpt")), Error);

  // garbage magic
  std::ofstream bad(td.file("bad.ckpt"), std::ios::binary);
  bad << "not a checkpoint at all";
  bad.close();
  CHECK_THROWS_AS(load_checkpoint(td.file("bad.ckpt")), Error);

  // loading into a model with different specs is a mismatch error
  ModelParams other = build_model({LayerSpec::dense(4, 2)}, 1);
  CHECK_THROWS_AS(load_checkpoint_into(other, td.file("m.ckpt")), Error);
  ModelParams same = build_model(tiny_unet(1, 2), 7);
  load_checkpoint_into(same, td.file("m.ckpt"));
  CHECK(same.weights[0].data == m.weights[0].data);
}

TEST_CASE("forward outputs and gradients stay finite on random models") {
  Rng rng(55);
  for (int trial = 0; trial < 5; ++trial) {
    ModelParams m = build_model(tiny_unet(1, 3), uint64_t(100 + trial));
    Tensor x = random_tensor({1, 8, 8}, rng, 2.0);
    ForwardCache cache;
    Tensor out = forward(m, x, &cache);
    for (double v : out.data) REQUIRE(std::isfinite(v));
    LabelImage2D labels;
    labels.width = 8;
    labels.height = 8;
    labels.pix.assign(64, 0);
    Grads g = backward(m, cache, loss_softmax_ce(out, labels, 3).grad);
    for (const auto& t : g.weights)
      for (double v : t.data) REQUIRE(std::isfinite(v));
  }
}
