#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <list>
#include <mutex>
#include <shared_mutex>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "dpre/fft.hpp"
#include "dpre/rng.hpp"

namespace dpre {

// Normalized fractional-Gaussian-noise autocovariance,
//   gamma(n) = (|n+1|^{2H} - 2|n|^{2H} + |n-1|^{2H}) / (2H(2H-1)),
// so that N^{2-2H} gamma([Nt]) -> |t|^{2H-2} with constant exactly 1.
// H = 1 degenerates to gamma == 1 (fully correlated in time).
inline double gamma_fgn(double hurst, std::int64_t n) {
    if (!(hurst > 0.5 && hurst <= 1.0))
        throw std::invalid_argument("gamma_fgn: H must lie in (1/2, 1]");
    if (hurst == 1.0) return 1.0;
    const double a = static_cast<double>(std::llabs(n));
    const double twoH = 2.0 * hurst;
    const double num = std::pow(a + 1.0, twoH) - 2.0 * std::pow(a, twoH) +
                       std::pow(std::abs(a - 1.0), twoH);
    return num / (twoH * (twoH - 1.0));
}

// gamma_N(t) = N^{2-2H} gamma([|t| N])
inline double scaled_covariance(double hurst, std::int64_t n_scale, double t) {
    if (n_scale < 1) throw std::invalid_argument("scaled_covariance: N must be >= 1");
    const double nd = static_cast<double>(n_scale);
    const auto lag = static_cast<std::int64_t>(std::floor(std::abs(t) * nd));
    return std::pow(nd, 2.0 - 2.0 * hurst) * gamma_fgn(hurst, lag);
}

// Stationary temporal covariance; pluggable so other admissible gamma can be
// swapped in, default is the normalized fGn above.
struct TemporalCovariance {
    double hurst = 1.0;
    std::function<double(std::int64_t)> eval;

    static TemporalCovariance fgn(double hurst) {
        TemporalCovariance cov;
        cov.hurst = hurst;
        cov.eval = [hurst](std::int64_t n) { return gamma_fgn(hurst, n); };
        return cov;
    }

    double operator()(std::int64_t n) const { return eval(n); }
};

// Synthesizes one stationary Gaussian sequence of length n with covariance
// cov via circulant embedding: the covariance row (gamma(0..n-1)) is embedded
// into a length 2(n-1) circulant; if the spectrum dips below -1e-9 the
// embedding is doubled (never expected for fGn), values in [-1e-9, 0] are
// clipped to zero. Noise comes from a counter-based stream keyed by site_seed.
inline std::vector<double> generate_site_sequence(const TemporalCovariance& cov,
                                                  std::int64_t n,
                                                  std::uint64_t site_seed) {
    if (n < 1) throw std::invalid_argument("generate_site_sequence: N must be >= 1");
    CounterRng rng(site_seed);
    if (n == 1) return {std::sqrt(cov(0)) * rng.next_gaussian()};

    std::int64_t base = n;
    for (int attempt = 0; attempt <= 4; ++attempt) {
        const std::size_t len = next_pow2(static_cast<std::size_t>(2 * (base - 1)));
        std::vector<std::complex<double>> c(len, 0.0);
        const std::size_t half = len / 2;
        for (std::size_t j = 0; j <= half; ++j)
            c[j] = cov(static_cast<std::int64_t>(j));
        for (std::size_t j = half + 1; j < len; ++j)
            c[j] = cov(static_cast<std::int64_t>(len - j));
        fft_pow2(c, -1);
        bool ok = true;
        for (auto& lam : c) {
            double v = lam.real();
            if (v < -1e-9) {
                ok = false;
                break;
            }
            if (v < 0.0) v = 0.0;
            lam = v;
        }
        if (!ok) {
            base *= 2;
            continue;
        }
        // With w_j = sqrt(lambda_j / L)(a_j + i b_j), a,b iid N(0,1), the real
        // part of DFT(w) is stationary with covariance exactly gamma.
        std::vector<std::complex<double>> w(len);
        const double inv = 1.0 / static_cast<double>(len);
        for (std::size_t j = 0; j < len; ++j) {
            const double amp = std::sqrt(c[j].real() * inv);
            const double re = rng.next_gaussian();
            const double im = rng.next_gaussian();
            w[j] = std::complex<double>(amp * re, amp * im);
        }
        fft_pow2(w, -1);
        std::vector<double> out(static_cast<std::size_t>(n));
        for (std::int64_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = w[static_cast<std::size_t>(i)].real();
        return out;
    }
    throw std::runtime_error("generate_site_sequence: embedding not nonnegative after 4 doublings");
}

// The environment omega(n, k): Gaussian, covariance gamma(n-n') within a
// site, independent across sites. Site sequences are generated lazily and
// deterministically from (master_seed, k); the keyed cache is synchronized
// with first-writer-wins semantics (regeneration is harmless).
class DisorderField {
  public:
    DisorderField(std::int64_t n, TemporalCovariance cov, std::uint64_t master_seed,
                  std::size_t max_cached_sites = 0)
        : n_(n), cov_(std::move(cov)), master_seed_(master_seed),
          max_sites_(max_cached_sites) {
        if (n < 1) throw std::invalid_argument("DisorderField: N must be >= 1");
    }

    std::int64_t length() const { return n_; }
    double hurst() const { return cov_.hurst; }
    std::uint64_t master_seed() const { return master_seed_; }

    // omega(n, k), 1 <= n <= N
    double omega_at(std::int64_t n, std::int64_t k) const {
        if (n < 1 || n > n_) throw std::out_of_range("omega_at: n outside [1, N]");
        {
            std::shared_lock lock(mutex_);
            auto it = cache_.find(k);
            if (it != cache_.end()) return it->second.values[static_cast<std::size_t>(n - 1)];
        }
        std::vector<double> seq = generate_site_sequence(cov_, n_, site_seed(k));
        const double v = seq[static_cast<std::size_t>(n - 1)];
        {
            std::unique_lock lock(mutex_);
            auto [it, inserted] = cache_.try_emplace(k);
            if (inserted) {
                it->second.values = std::move(seq);
                lru_.push_front(k);
                it->second.lru_it = lru_.begin();
                evict_if_needed();
            }
        }
        return v;
    }

    std::uint64_t site_seed(std::int64_t k) const {
        return derive_stream(master_seed_, static_cast<std::uint64_t>(k) * 2ull + 0x51ull);
    }

    std::size_t cached_sites() const {
        std::shared_lock lock(mutex_);
        return cache_.size();
    }

    std::size_t cached_bytes() const {
        std::shared_lock lock(mutex_);
        return cache_.size() * (sizeof(double) * static_cast<std::size_t>(n_) + 64);
    }

  private:
    struct Entry {
        std::vector<double> values;
        std::list<std::int64_t>::iterator lru_it;
    };

    void evict_if_needed() const {
        if (max_sites_ == 0) return;
        while (cache_.size() > max_sites_) {
            const std::int64_t victim = lru_.back();
            lru_.pop_back();
            cache_.erase(victim);
        }
    }

    std::int64_t n_;
    TemporalCovariance cov_;
    std::uint64_t master_seed_;
    std::size_t max_sites_;
    mutable std::shared_mutex mutex_;
    mutable std::unordered_map<std::int64_t, Entry> cache_;
    mutable std::list<std::int64_t> lru_;
};

// Binary field-window dump: 16-byte header (magic "DFLD", u32 version, u32 N,
// f32 H), then sites k = -half_width..half_width, site-major, little-endian
// f64. The site count is implied by the payload size.
inline void write_field_dump(const DisorderField& field, std::int64_t half_width,
                             std::vector<unsigned char>& out) {
    out.clear();
    const char magic[4] = {'D', 'F', 'L', 'D'};
    out.insert(out.end(), magic, magic + 4);
    auto push_u32 = [&out](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
    };
    push_u32(1u);
    push_u32(static_cast<std::uint32_t>(field.length()));
    const float h = static_cast<float>(field.hurst());
    std::uint32_t hbits;
    static_assert(sizeof(hbits) == sizeof(h));
    __builtin_memcpy(&hbits, &h, 4);
    push_u32(hbits);
    for (std::int64_t k = -half_width; k <= half_width; ++k) {
        for (std::int64_t n = 1; n <= field.length(); ++n) {
            const double v = field.omega_at(n, k);
            std::uint64_t bits;
            __builtin_memcpy(&bits, &v, 8);
            for (int i = 0; i < 8; ++i)
                out.push_back(static_cast<unsigned char>((bits >> (8 * i)) & 0xFF));
        }
    }
}

} // namespace dpre
