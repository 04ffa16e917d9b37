#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace dpre {

// Iterative radix-2 Cooley-Tukey transform, in place. Length must be a power
// of two. sign = -1 forward, +1 inverse (inverse is unnormalized).
inline void fft_pow2(std::vector<std::complex<double>>& a, int sign) {
    const std::size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0)
        throw std::invalid_argument("fft_pow2: length must be a power of two");
    // bit reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = sign * 2.0 * 3.141592653589793238462643383279 /
                           static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// Linear convolution of two real sequences via zero-padded FFT.
inline std::vector<double> fft_convolve(const std::vector<double>& x,
                                        const std::vector<double>& y) {
    if (x.empty() || y.empty()) return {};
    const std::size_t out_len = x.size() + y.size() - 1;
    const std::size_t n = next_pow2(out_len);
    std::vector<std::complex<double>> fx(n), fy(n);
    for (std::size_t i = 0; i < x.size(); ++i) fx[i] = x[i];
    for (std::size_t i = 0; i < y.size(); ++i) fy[i] = y[i];
    fft_pow2(fx, -1);
    fft_pow2(fy, -1);
    for (std::size_t i = 0; i < n; ++i) fx[i] *= fy[i];
    fft_pow2(fx, +1);
    std::vector<double> out(out_len);
    for (std::size_t i = 0; i < out_len; ++i)
        out[i] = fx[i].real() / static_cast<double>(n);
    return out;
}

} // namespace dpre
