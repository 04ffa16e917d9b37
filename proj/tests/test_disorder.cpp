#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dpre/disorder.hpp"
#include "dpre/rng.hpp"
#include "dpre/summation.hpp"

using namespace dpre;

TEST_CASE("fgn covariance values") {
    CHECK(gamma_fgn(1.0, 0) == 1.0);
    CHECK(gamma_fgn(1.0, 12345) == 1.0);
    CHECK(gamma_fgn(0.85, 0) == doctest::Approx(1.0 / (0.85 * 0.7)).epsilon(1e-14));
    CHECK(gamma_fgn(0.85, 7) == gamma_fgn(0.85, -7));
    CHECK_THROWS_AS(gamma_fgn(0.5, 1), std::invalid_argument);
    CHECK_THROWS_AS(gamma_fgn(1.2, 1), std::invalid_argument);

    SUBCASE("normalized asymptotics") {
        // N^{2-2H} gamma([N t]) -> |t|^{2H-2} with constant exactly 1
        const double h = 0.85;
        const std::int64_t big = 1'000'000;
        const double lhs = std::pow(static_cast<double>(big), 0.3) *
                           gamma_fgn(h, big / 2);
        CHECK(std::abs(lhs - std::pow(0.5, -0.3)) / std::pow(0.5, -0.3) < 0.01);
    }

    SUBCASE("power-law bound") {
        const double h = 0.85;
        for (std::int64_t n = 16; n <= 1'000'000; n *= 4) {
            CHECK(gamma_fgn(h, n) <= gamma_fgn(h, 0));
            CHECK(gamma_fgn(h, n) * std::pow(static_cast<double>(n), 2.0 - 2.0 * h) <= 1.05);
        }
    }
}

TEST_CASE("scaled covariance") {
    CHECK(scaled_covariance(0.85, 64, 0.0) ==
          doctest::Approx(std::pow(64.0, 0.3) * gamma_fgn(0.85, 0)));
    CHECK(scaled_covariance(1.0, 4096, 0.37) == 1.0);
    CHECK(std::abs(scaled_covariance(0.85, 4096, 1.0) - 1.0) < 0.02);
}

TEST_CASE("circulant embedding synthesis") {
    const TemporalCovariance cov = TemporalCovariance::fgn(0.85);

    SUBCASE("deterministic per seed") {
        const auto a = generate_site_sequence(cov, 48, 999);
        const auto b = generate_site_sequence(cov, 48, 999);
        CHECK(a == b);
        const auto c = generate_site_sequence(cov, 48, 1000);
        CHECK(a != c);
    }

    SUBCASE("sample covariance matches gamma at several lags") {
        const std::int64_t n = 48;
        const int reps = 10'000;
        std::vector<double> prod0(reps), prod8(reps), prod25(reps);
        for (int r = 0; r < reps; ++r) {
            const auto seq = generate_site_sequence(cov, n, derive_stream(5150, r));
            prod0[r] = seq[7] * seq[7];
            prod8[r] = seq[7] * seq[15];
            prod25[r] = seq[7] * seq[32];
        }
        const MeanStderr m0 = mean_stderr(prod0);
        const MeanStderr m8 = mean_stderr(prod8);
        const MeanStderr m25 = mean_stderr(prod25);
        CHECK(std::abs(m0.mean - gamma_fgn(0.85, 0)) < 4.0 * m0.stderr_);
        CHECK(std::abs(m8.mean - gamma_fgn(0.85, 8)) < 4.0 * m8.stderr_);
        CHECK(std::abs(m25.mean - gamma_fgn(0.85, 25)) < 4.0 * m25.stderr_);
    }

    SUBCASE("H = 1 degenerates to one repeated gaussian") {
        const auto seq = generate_site_sequence(TemporalCovariance::fgn(1.0), 16, 4242);
        for (double v : seq) CHECK(v == doctest::Approx(seq[0]).epsilon(1e-9));
    }

    SUBCASE("indefinite covariance exhausts the doublings") {
        TemporalCovariance bad;
        bad.hurst = 0.85;
        bad.eval = [](std::int64_t n) {
            return n == 0 ? 1.0 : (n == 1 ? 0.9 : -0.5);
        };
        CHECK_THROWS_AS(generate_site_sequence(bad, 32, 1), std::runtime_error);
    }
}

TEST_CASE("disorder field access") {
    const TemporalCovariance cov = TemporalCovariance::fgn(0.85);
    DisorderField field(32, cov, 20240601);

    CHECK_THROWS_AS(field.omega_at(0, 0), std::out_of_range);
    CHECK_THROWS_AS(field.omega_at(33, 0), std::out_of_range);
    CHECK(field.omega_at(4, 9) == field.omega_at(4, 9));

    SUBCASE("access order does not matter") {
        DisorderField other(32, cov, 20240601);
        other.omega_at(1, 100);
        other.omega_at(32, -3);
        for (std::int64_t n = 1; n <= 32; ++n)
            CHECK(field.omega_at(n, -3) == other.omega_at(n, -3));
    }

    SUBCASE("covariance identity over random index pairs") {
        CounterRng rng(11);
        const int reps = 10'000;
        for (int cse = 0; cse < 12; ++cse) {
            const auto n1 = static_cast<std::int64_t>(1 + rng.next_u64() % 32);
            const auto n2 = static_cast<std::int64_t>(1 + rng.next_u64() % 32);
            const auto k = static_cast<std::int64_t>(rng.next_u64() % 7) - 3;
            std::vector<double> prod(reps);
            for (int r = 0; r < reps; ++r) {
                DisorderField f(32, cov, derive_stream(808, 1000 * cse + r));
                prod[r] = f.omega_at(n1, k) * f.omega_at(n2, k);
            }
            const MeanStderr m = mean_stderr(prod);
            CHECK(std::abs(m.mean - gamma_fgn(0.85, n1 - n2)) < 4.0 * m.stderr_);
        }
        // cross-site independence
        std::vector<double> cross(reps);
        for (int r = 0; r < reps; ++r) {
            DisorderField f(8, cov, derive_stream(707, r));
            cross[r] = f.omega_at(3, 0) * f.omega_at(5, 1);
        }
        const MeanStderr mc = mean_stderr(cross);
        CHECK(std::abs(mc.mean) < 4.0 * mc.stderr_);
    }

    SUBCASE("variance at a site matches gamma(0)") {
        const int reps = 10'000;
        std::vector<double> sq(reps);
        for (int r = 0; r < reps; ++r) {
            DisorderField f(4, cov, derive_stream(606, r));
            const double w = f.omega_at(1, 17);
            sq[r] = w * w;
        }
        const MeanStderr m = mean_stderr(sq);
        CHECK(std::abs(m.mean - gamma_fgn(0.85, 0)) < 4.0 * m.stderr_);
    }

    SUBCASE("lru cap evicts but regenerates identically") {
        DisorderField capped(16, cov, 31415, /*max_cached_sites=*/4);
        std::vector<double> first;
        for (std::int64_t k = 0; k < 10; ++k) first.push_back(capped.omega_at(3, k));
        CHECK(capped.cached_sites() <= 4);
        for (std::int64_t k = 0; k < 10; ++k)
            CHECK(capped.omega_at(3, k) == first[static_cast<std::size_t>(k)]);
        CHECK(capped.cached_bytes() > 0);
    }
}

TEST_CASE("field dump format") {
    const TemporalCovariance cov = TemporalCovariance::fgn(0.85);
    DisorderField field(8, cov, 123);
    std::vector<unsigned char> blob;
    write_field_dump(field, 2, blob);

    REQUIRE(blob.size() == 16 + 5 * 8 * 8);
    CHECK(blob[0] == 'D');
    CHECK(blob[1] == 'F');
    CHECK(blob[2] == 'L');
    CHECK(blob[3] == 'D');
    const std::uint32_t version = blob[4] | (blob[5] << 8) | (blob[6] << 16) |
                                  (static_cast<std::uint32_t>(blob[7]) << 24);
    const std::uint32_t n = blob[8] | (blob[9] << 8) | (blob[10] << 16) |
                            (static_cast<std::uint32_t>(blob[11]) << 24);
    CHECK(version == 1);
    CHECK(n == 8);
    std::uint32_t hbits = blob[12] | (blob[13] << 8) | (blob[14] << 16) |
                          (static_cast<std::uint32_t>(blob[15]) << 24);
    float hval;
    __builtin_memcpy(&hval, &hbits, 4);
    CHECK(hval == doctest::Approx(0.85f));

    // site-major little-endian doubles, sites -2..2
    auto read_f64 = [&blob](std::size_t off) {
        std::uint64_t bits = 0;
        for (int i = 7; i >= 0; --i) bits = (bits << 8) | blob[off + static_cast<std::size_t>(i)];
        double v;
        __builtin_memcpy(&v, &bits, 8);
        return v;
    };
    std::size_t off = 16;
    for (std::int64_t k = -2; k <= 2; ++k)
        for (std::int64_t t = 1; t <= 8; ++t, off += 8)
            CHECK(read_f64(off) == field.omega_at(t, k));

    std::vector<unsigned char> again;
    write_field_dump(field, 2, again);
    CHECK(blob == again);
}
