#pragma once

#include <complex>
#include <vector>

namespace lseg {

// In-place radix-2 complex FFT; size must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& a);

// Unnormalised DCT-II via a single FFT of the even/odd-reordered sequence:
// out[0] = sum(x), out[k] = 2 * sum_j x[j] cos(pi k (2j+1) / (2n)) for k >= 1.
std::vector<double> dct2(const std::vector<double>& x);

// Sample-std rule of thumb: 1.06 * sigma * n^(-1/5).
double silverman_bandwidth(const std::vector<double>& samples);

// Diffusion / improved-Sheather-Jones plug-in bandwidth: the fixed point of
// the l=7 functional iteration evaluated on a 2^14-bin histogram transformed
// by dct2. Falls back to silverman_bandwidth when no root bracket is found.
// Requires >= 16 samples with nonzero spread.
double botev_bandwidth(const std::vector<double>& samples);

// Argmax of the Gaussian KDE with bandwidth h: evaluated on a 1024-point grid
// over [min-3h, max+3h], then refined by golden-section search around the
// best grid cell.
double kde_mode(const std::vector<double>& samples, double h);

}  // namespace lseg
