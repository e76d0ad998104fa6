#pragma once

#include <complex>
#include <vector>

namespace dr {

void fft_inplace(std::vector<std::complex<double>>& a, bool invert);

// Linear convolution of nonnegative sequences via zero-padded FFT.
std::vector<double> convolve_fft(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace dr
