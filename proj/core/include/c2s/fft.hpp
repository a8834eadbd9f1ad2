#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace c2s::fft {

using Complex = std::complex<double>;

/// Non-negative frequency bins (n/2 + 1) of the length-n DFT of x, zero-padded
/// or truncated to n.
std::vector<Complex> rfft(std::span<const double> x, std::size_t n);

/// Real inverse of rfft, normalized so irfft(rfft(x, n), n) == x.
std::vector<double> irfft(std::span<const Complex> bins, std::size_t n);

/// Forward complex DFT (unnormalized).
std::vector<Complex> fft(std::span<const Complex> x);

/// Inverse complex DFT, normalized by 1/n.
std::vector<Complex> ifft(std::span<const Complex> x);

/// Smallest multiple of `multiple` that is >= min_size and whose quotient has
/// only the prime factors 2, 3 and 5.
std::size_t good_size(std::size_t min_size, std::size_t multiple = 1);

}  // namespace c2s::fft
