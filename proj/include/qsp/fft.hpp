#pragma once

#include <complex>
#include <vector>

namespace qsp {

using cdouble = std::complex<double>;

// In-place iterative radix-2 FFT, forward convention X_k = sum_j x_j e^{-2pi i jk/n}.
// n must be a power of two.
void fft(std::vector<cdouble>& a);
void ifft(std::vector<cdouble>& a); // unscaled inverse (caller divides by n if wanted)

// Unitary DFT U_{jk} = e^{+2pi i jk/n} / sqrt(n), applied to a vector.
// Matches the QFT circuit convention used throughout.
std::vector<cdouble> unitary_dft(const std::vector<cdouble>& x);
std::vector<cdouble> unitary_dft_inverse(const std::vector<cdouble>& x);

// Orthonormal DST-I of order n-1: y_k = sqrt(2/n) * sum_{j=1}^{n-1} x_j sin(pi jk/n),
// for k = 1..n-1. Input and output have length n-1 (grid interior, endpoints pinned
// to zero). n must be a power of two. Involutory: dst1(dst1(x)) == x.
std::vector<double> dst1(const std::vector<double>& x, std::size_t n);

bool is_power_of_two(std::size_t n);
int log2_exact(std::size_t n); // -1 if not a power of two

} // namespace qsp
