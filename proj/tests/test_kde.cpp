#include <doctest.h>

#include <cmath>
#include <complex>

#include "helpers.hpp"
#include "lumbarseg/kde.hpp"

using namespace lseg;

namespace {

constexpr double kPi = 3.14159265358979323846;

// O(n^2) DCT-II with the same scaling as dct2
std::vector<double> dct2_slow(const std::vector<double>& x) {
  size_t n = x.size();
  std::vector<double> out(n, 0.0);
  for (size_t j = 0; j < n; ++j) out[0] += x[j];
  for (size_t k = 1; k < n; ++k) {
    double s = 0;
    for (size_t j = 0; j < n; ++j)
      s += x[j] * std::cos(kPi * double(k) * (2.0 * double(j) + 1.0) / (2.0 * double(n)));
    out[k] = 2.0 * s;
  }
  return out;
}

double dense_grid_mode(const std::vector<double>& samples, double h, double lo, double hi,
                       int pts) {
  double best_x = lo, best_d = -1;
  for (int i = 0; i < pts; ++i) {
    double x = lo + (hi - lo) * i / (pts - 1);
    double d = 0;
    for (double s : samples) d += std::exp(-(x - s) * (x - s) / (2 * h * h));
    if (d > best_d) {
      best_d = d;
      best_x = x;
    }
  }
  return best_x;
}

}  // namespace

TEST_CASE("fft: matches the analytic transform of simple signals") {
  // delta at 0 -> all ones
  std::vector<std::complex<double>> a(8, 0.0);
  a[0] = 1.0;
  fft_inplace(a);
  for (auto& v : a) {
    CHECK(v.real() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(v.imag() == doctest::Approx(0.0).scale(1).epsilon(1e-12));
  }
  // single complex exponential -> single bin
  const size_t n = 16;
  std::vector<std::complex<double>> b(n);
  for (size_t j = 0; j < n; ++j)
    b[j] = std::exp(std::complex<double>(0, 2.0 * kPi * 3.0 * double(j) / double(n)));
  fft_inplace(b);
  for (size_t k = 0; k < n; ++k) {
    double want = k == 3 ? double(n) : 0.0;
    CHECK(std::abs(b[k] - std::complex<double>(want, 0)) < 1e-9);
  }
  std::vector<std::complex<double>> bad(6);
  CHECK_THROWS_AS(fft_inplace(bad), Error);
}

TEST_CASE("dct2: fast transform equals the quadratic-time definition") {
  Rng rng(101);
  for (size_t n : {size_t(8), size_t(64), size_t(512)}) {
    std::vector<double> x(n);
    for (auto& v : x) v = rng.uniform(-1, 1);
    auto fast = dct2(x);
    auto slow = dct2_slow(x);
    REQUIRE(fast.size() == slow.size());
    for (size_t k = 0; k < n; ++k)
      CHECK(fast[k] == doctest::Approx(slow[k]).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("bandwidth: near Silverman on Gaussian data, exact scale equivariance") {
  Rng rng(202);
  std::vector<double> x(1000);
  for (auto& v : x) v = rng.normal();
  double hb = botev_bandwidth(x);
  double hs = silverman_bandwidth(x);
  CHECK(hb > 0);
  CHECK(std::abs(hb - hs) / hs < 0.25);

  std::vector<double> x10 = x;
  for (auto& v : x10) v *= 10.0;
  double hb10 = botev_bandwidth(x10);
  CHECK(std::abs(hb10 - 10.0 * hb) / (10.0 * hb) < 0.05);
}

TEST_CASE("bandwidth: error paths") {
  std::vector<double> few = {1, 2, 3};
  CHECK_THROWS_AS(botev_bandwidth(few), Error);
  std::vector<double> flat(32, 7.0);
  CHECK_THROWS_AS(botev_bandwidth(flat), Error);
  std::vector<double> one = {1.0};
  CHECK_THROWS_AS(silverman_bandwidth(one), Error);
}

TEST_CASE("bandwidth: bimodal data gets a narrower bandwidth than Silverman") {
  // Silverman over-smooths mixtures; the plug-in estimator should not.
  Rng rng(303);
  std::vector<double> x;
  for (int i = 0; i < 600; ++i) x.push_back(rng.normal(0.0, 1.0));
  for (int i = 0; i < 600; ++i) x.push_back(rng.normal(12.0, 1.0));
  CHECK(botev_bandwidth(x) < silverman_bandwidth(x));
}

TEST_CASE("kde_mode: dominant cluster, single sample, mixture") {
  std::vector<double> c = {1, 1, 1, 5};
  CHECK(std::abs(kde_mode(c, 0.3) - 1.0) < 0.05);

  std::vector<double> single = {4.25};
  CHECK(kde_mode(single, 1.0) == doctest::Approx(4.25).epsilon(1e-6));

  Rng rng(404);
  std::vector<double> mix;
  for (int i = 0; i < 1600; ++i) mix.push_back(rng.normal(0.0, 1.0));
  for (int i = 0; i < 400; ++i) mix.push_back(rng.normal(10.0, 1.0));
  double h = botev_bandwidth(mix);
  double mode = kde_mode(mix, h);
  CHECK(std::abs(mode - 0.0) < 0.2);
  // agrees with a dense-grid evaluation of the same density
  double oracle = dense_grid_mode(mix, h, -3, 3, 20001);
  CHECK(std::abs(mode - oracle) < 0.01);

  CHECK_THROWS_AS(kde_mode({}, 1.0), Error);
  CHECK_THROWS_AS(kde_mode(c, 0.0), Error);
}
