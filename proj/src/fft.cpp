#include "qsp/fft.hpp"

#include "qsp/errors.hpp"

#include <cmath>
#include <numbers>

namespace qsp {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

int log2_exact(std::size_t n) {
    if (!is_power_of_two(n)) return -1;
    int k = 0;
    while ((std::size_t{1} << k) != n) ++k;
    return k;
}

namespace {

void fft_core(std::vector<cdouble>& a, bool inverse) {
    const std::size_t n = a.size();
    if (!is_power_of_two(n)) throw domain_error("fft: size must be a power of two");
    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * std::numbers::pi / static_cast<double>(len);
        const cdouble wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cdouble w(1.0, 0.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                cdouble u = a[i + j];
                cdouble v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

} // namespace

void fft(std::vector<cdouble>& a) { fft_core(a, false); }
void ifft(std::vector<cdouble>& a) { fft_core(a, true); }

std::vector<cdouble> unitary_dft(const std::vector<cdouble>& x) {
    std::vector<cdouble> a = x;
    ifft(a); // e^{+2pi i jk/n} kernel
    const double s = 1.0 / std::sqrt(static_cast<double>(a.size()));
    for (auto& v : a) v *= s;
    return a;
}

std::vector<cdouble> unitary_dft_inverse(const std::vector<cdouble>& x) {
    std::vector<cdouble> a = x;
    fft(a);
    const double s = 1.0 / std::sqrt(static_cast<double>(a.size()));
    for (auto& v : a) v *= s;
    return a;
}

std::vector<double> dst1(const std::vector<double>& x, std::size_t n) {
    if (!is_power_of_two(n)) throw domain_error("dst1: order parameter must be a power of two");
    if (x.size() != n - 1) throw domain_error("dst1: input must have length n-1");
    // Odd extension to length 2n, then one complex FFT. The imaginary part of
    // the e^{-...} transform of the odd extension is -2 sum x_j sin(pi jk/n).
    std::vector<cdouble> y(2 * n, cdouble(0.0, 0.0));
    for (std::size_t j = 1; j < n; ++j) {
        y[j] = cdouble(x[j - 1], 0.0);
        y[2 * n - j] = cdouble(-x[j - 1], 0.0);
    }
    fft(y);
    std::vector<double> out(n - 1);
    const double s = -std::sqrt(2.0 / static_cast<double>(n)) / 2.0;
    for (std::size_t k = 1; k < n; ++k) out[k - 1] = s * y[k].imag();
    return out;
}

} // namespace qsp
