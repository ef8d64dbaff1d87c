#include <algorithm>
#include <cmath>
#include <numeric>

#include "lumbarseg/error.hpp"
#include "lumbarseg/kde.hpp"

namespace lseg {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Largest k-exponent before exp underflows to zero; the series terms are
// non-negative and decay monotonically, so summation can stop there.
constexpr double kExpUnderflow = 745.0;

double series(int s, const std::vector<double>& a2, double t) {
  // sum_k k^(2s) * a2[k] * exp(-k^2 pi^2 t), k = 1..n-1
  double sum = 0;
  for (size_t k = 1; k < a2.size() + 1; ++k) {
    double e = double(k) * double(k) * kPi * kPi * t;
    if (e > kExpUnderflow) break;
    sum += std::pow(double(k), 2.0 * s) * a2[k - 1] * std::exp(-e);
  }
  return sum;
}

// t - zeta * gamma^[7](t): the root in t is the squared bandwidth of the
// diffusion estimator on the unit interval.
double fixed_point(double t, double N, const std::vector<double>& a2) {
  const int l = 7;
  double f = 2.0 * std::pow(kPi, 2.0 * l) * series(l, a2, t);
  for (int s = l - 1; s >= 2; --s) {
    double k0 = 1.0;
    for (int m = 1; m <= 2 * s - 1; m += 2) k0 *= m;
    k0 /= std::sqrt(2.0 * kPi);
    double cst = (1.0 + std::pow(0.5, s + 0.5)) / 3.0;
    double time = std::pow(2.0 * cst * k0 / (N * f), 2.0 / (3.0 + 2.0 * s));
    f = 2.0 * std::pow(kPi, 2.0 * s) * series(s, a2, time);
  }
  return t - std::pow(2.0 * N * std::sqrt(kPi) * f, -2.0 / 5.0);
}

}  // namespace

void fft_inplace(std::vector<std::complex<double>>& a) {
  const size_t n = a.size();
  require(n > 0 && (n & (n - 1)) == 0, "fft: size must be a power of two");
  // bit-reversal permutation
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    double ang = -2.0 * kPi / double(len);
    std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t j = 0; j < len / 2; ++j) {
        std::complex<double> u = a[i + j];
        std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

std::vector<double> dct2(const std::vector<double>& x) {
  const size_t n = x.size();
  require(n > 0 && (n & (n - 1)) == 0, "dct2: size must be a power of two");
  // even indices ascending, then odd indices descending
  std::vector<std::complex<double>> v(n);
  size_t half = (n + 1) / 2;
  for (size_t j = 0; j < half; ++j) v[j] = x[2 * j];
  for (size_t j = half; j < n; ++j) v[j] = x[2 * (n - j) - 1];
  fft_inplace(v);
  std::vector<double> out(n);
  out[0] = v[0].real();
  for (size_t k = 1; k < n; ++k) {
    double ang = -double(k) * kPi / (2.0 * double(n));
    out[k] = 2.0 * (v[k] * std::complex<double>(std::cos(ang), std::sin(ang))).real();
  }
  return out;
}

double silverman_bandwidth(const std::vector<double>& samples) {
  const size_t n = samples.size();
  require(n >= 2, "silverman_bandwidth: need at least two samples");
  double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / double(n);
  double ss = 0;
  for (double s : samples) ss += (s - mean) * (s - mean);
  double sigma = std::sqrt(ss / double(n - 1));
  require(sigma > 0, "silverman_bandwidth: zero spread");
  return 1.06 * sigma * std::pow(double(n), -0.2);
}

double botev_bandwidth(const std::vector<double>& samples) {
  require(samples.size() >= 16, "botev_bandwidth: need at least 16 samples");
  auto [mn_it, mx_it] = std::minmax_element(samples.begin(), samples.end());
  double mn = *mn_it, mx = *mx_it;
  require(mx > mn, "botev_bandwidth: zero spread");

  const size_t n = size_t(1) << 14;
  double range = mx - mn;
  double lo = mn - range / 2.0, hi = mx + range / 2.0;
  double R = hi - lo;

  std::vector<double> hist(n, 0.0);
  for (double s : samples) {
    auto b = size_t(std::min(double(n - 1), std::floor((s - lo) / R * double(n))));
    hist[b] += 1.0;
  }
  for (double& h : hist) h /= double(samples.size());

  std::vector<double> a = dct2(hist);
  std::vector<double> a2(n - 1);
  for (size_t k = 1; k < n; ++k) a2[k - 1] = (a[k] / 2.0) * (a[k] / 2.0);

  std::vector<double> uniq = samples;
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  double N = double(uniq.size());

  double nc = std::clamp(N, 50.0, 1050.0);
  double tol = 1e-12 + 0.01 * (nc - 50.0) / 1000.0;
  auto f = [&](double t) { return fixed_point(t, N, a2); };

  double t_star = -1.0;
  double fa = f(0.0);
  while (true) {
    double fb = f(tol);
    if (std::isfinite(fa) && std::isfinite(fb) && fa * fb < 0) {
      double al = 0.0, bl = tol;
      for (int it = 0; it < 200 && bl - al > 1e-14 * std::max(1.0, bl); ++it) {
        double mid = 0.5 * (al + bl);
        double fm = f(mid);
        if (fa * fm <= 0) bl = mid;
        else {
          al = mid;
          fa = fm;
        }
      }
      t_star = 0.5 * (al + bl);
      break;
    }
    if (tol >= 0.1) break;  // no bracket; fall back below
    tol = std::min(tol * 2.0, 0.1);
  }
  if (t_star <= 0) return silverman_bandwidth(samples);
  return std::sqrt(t_star) * R;
}

double kde_mode(const std::vector<double>& samples, double h) {
  require(!samples.empty(), "kde_mode: no samples");
  require(h > 0, "kde_mode: bandwidth must be positive");
  auto [mn_it, mx_it] = std::minmax_element(samples.begin(), samples.end());
  // A kernel narrower than half a grid cell can fall entirely between grid
  // points, hiding a dominant spike from the argmax; floor the bandwidth at
  // that visibility limit.
  h = std::max(h, (*mx_it - *mn_it) / 2046.0);
  double lo = *mn_it - 3.0 * h, hi = *mx_it + 3.0 * h;

  auto density = [&](double x) {
    double inv2h2 = 1.0 / (2.0 * h * h);
    double sum = 0;
    for (double s : samples) {
      double d = x - s;
      double e = d * d * inv2h2;
      if (e < kExpUnderflow) sum += std::exp(-e);
    }
    return sum;
  };

  const int grid = 1024;
  double dx = (hi - lo) / (grid - 1);
  int best = 0;
  double best_d = -1.0;
  for (int i = 0; i < grid; ++i) {
    double d = density(lo + i * dx);
    if (d > best_d) {
      best_d = d;
      best = i;
    }
  }

  double a = lo + std::max(0, best - 1) * dx;
  double b = lo + std::min(grid - 1, best + 1) * dx;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = density(x1), f2 = density(x2);
  for (int it = 0; it < 80 && b - a > 1e-10 * std::max(1.0, std::abs(b) + std::abs(a)); ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = density(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = density(x1);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace lseg
