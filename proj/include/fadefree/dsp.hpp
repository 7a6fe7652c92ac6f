#pragma once

// Small numeric helpers shared by the signal, channel and whitening code.

#include <cstdint>
#include <span>
#include <vector>

#include "fadefree/waveform.hpp"

namespace fadefree::dsp {

// In-place DFT backed by FFTW. The inverse is unnormalized, as in FFTW.
void fft(std::vector<cplx>& data);
void ifft(std::vector<cplx>& data);

std::vector<cplx> to_complex(std::span<const double> x);

// Full linear convolution, length |x| + |h| - 1.
std::vector<double> convolve(std::span<const double> x, std::span<const double> h);

// Circular cross-correlation c[d] = sum_i x[(d + i) mod N] * t[i] for
// d in [0, N - |t|], computed through the FFT.
std::vector<double> cross_correlate(std::span<const double> x, std::span<const double> t);

std::vector<double> hann_window(std::size_t n);

// Frequency (Hz) of FFT bin k of an n-point transform, mapped to [-fs/2, fs/2).
double bin_frequency(std::size_t k, std::size_t n, double sample_rate);

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

} // namespace fadefree::dsp
