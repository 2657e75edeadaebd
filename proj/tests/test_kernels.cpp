#include <doctest.h>

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "mval/common.hpp"
#include "mval/kernels.hpp"
#include "mval/rng.hpp"

using namespace mval;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double nan_rate = 0.0) {
    std::vector<double> v(n);
    for (auto& x : v) {
        if (nan_rate > 0.0 && rng.next_double() < nan_rate) x = kMissing;
        else x = rng.next_normal() * 3.0;
    }
    return v;
}

const std::vector<std::size_t> kSizes{0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 33, 100, 1001};

bool close(double a, double b, double scale) {
    if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
    return std::abs(a - b) <= 1e-12 * (1.0 + scale);
}

} // namespace

TEST_CASE("scalar and avx2 kernels agree") {
    const kern::KernelTable& scalar = kern::scalar_table();
    const kern::KernelTable* simd = kern::avx2_table();
    if (!simd) {
        MESSAGE("avx2 unavailable on this machine; scalar-only");
        return;
    }
    Rng rng(99);
    for (std::size_t n : kSizes) {
        for (int rep = 0; rep < 8; ++rep) {
            const auto a = random_vec(rng, n);
            const auto b = random_vec(rng, n);
            const auto w = random_vec(rng, n);
            const auto masked = random_vec(rng, n, 0.25);
            const double scale = 10.0 * static_cast<double>(n);

            CHECK(close(scalar.sum(a.data(), n), simd->sum(a.data(), n), scale));
            CHECK(close(scalar.dot(a.data(), b.data(), n), simd->dot(a.data(), b.data(), n),
                        scale * 10));
            CHECK(close(scalar.wdot(w.data(), a.data(), b.data(), n),
                        simd->wdot(w.data(), a.data(), b.data(), n), scale * 30));
            CHECK(close(scalar.sse(a.data(), b.data(), n), simd->sse(a.data(), b.data(), n),
                        scale * 30));
            CHECK(close(scalar.masked_sumsq_dev(masked.data(), n, 0.7),
                        simd->masked_sumsq_dev(masked.data(), n, 0.7), scale * 10));

            {
                double s1 = 0, s2 = 0;
                std::size_t c1 = 0, c2 = 0;
                scalar.masked_sum_count(masked.data(), n, &s1, &c1);
                simd->masked_sum_count(masked.data(), n, &s2, &c2);
                CHECK(c1 == c2);
                CHECK(close(s1, s2, scale));
            }
            {
                auto y1 = b, y2 = b;
                scalar.axpy(1.7, a.data(), y1.data(), n);
                simd->axpy(1.7, a.data(), y2.data(), n);
                for (std::size_t i = 0; i < n; ++i) CHECK(close(y1[i], y2[i], 10.0));
            }
            {
                auto x1 = masked, x2 = masked;
                scalar.clamp_range(x1.data(), n, -1.25, 2.5);
                simd->clamp_range(x2.data(), n, -1.25, 2.5);
                for (std::size_t i = 0; i < n; ++i) CHECK(close(x1[i], x2[i], 1.0));
            }
            {
                auto x1 = a, x2 = a;
                scalar.scale_shift(x1.data(), n, 0.3, 1.0 / 1.7);
                simd->scale_shift(x2.data(), n, 0.3, 1.0 / 1.7);
                for (std::size_t i = 0; i < n; ++i) CHECK(close(x1[i], x2[i], 10.0));
            }
            {
                std::vector<double> num1(n, 0.0), den1(n, 0.0), cnt1(n, 0.0);
                auto num2 = num1, den2 = den1, cnt2 = cnt1;
                scalar.score_accum(masked.data(), 0.4, n, num1.data(), den1.data(), cnt1.data());
                simd->score_accum(masked.data(), 0.4, n, num2.data(), den2.data(), cnt2.data());
                for (std::size_t i = 0; i < n; ++i) {
                    CHECK(close(num1[i], num2[i], 10.0));
                    CHECK(den1[i] == den2[i]);
                    CHECK(cnt1[i] == cnt2[i]);
                }
            }
        }
    }
}

TEST_CASE("clamp_range keeps NaN untouched and clamps the rest") {
    std::vector<double> v{-5.0, kMissing, 0.5, 7.0};
    kern::clamp_range(v.data(), v.size(), 0.0, 1.0);
    CHECK(v[0] == 0.0);
    CHECK(is_missing(v[1]));
    CHECK(v[2] == 0.5);
    CHECK(v[3] == 1.0);
}

TEST_CASE("score_accum skips missing cells") {
    const std::vector<double> x{1.0, kMissing, -2.0};
    std::vector<double> num(3, 0.0), den(3, 0.0), cnt(3, 0.0);
    kern::score_accum(x.data(), 0.5, 3, num.data(), den.data(), cnt.data());
    CHECK(num[0] == doctest::Approx(0.5));
    CHECK(num[1] == 0.0);
    CHECK(den[1] == 0.0);
    CHECK(cnt[1] == 0.0);
    CHECK(num[2] == doctest::Approx(-1.0));
    CHECK(den[2] == 0.5);
    CHECK(cnt[2] == 1.0);
}

TEST_CASE("kernel results are bitwise deterministic across calls") {
    Rng rng(4);
    const auto a = random_vec(rng, 513);
    const auto b = random_vec(rng, 513);
    const double d1 = kern::dot(a.data(), b.data(), a.size());
    const double d2 = kern::dot(a.data(), b.data(), a.size());
    CHECK(std::memcmp(&d1, &d2, sizeof(double)) == 0);
}

TEST_CASE("force_isa switches the active table") {
    kern::force_isa("scalar");
    CHECK(std::string(kern::active().name) == "scalar");
    kern::force_isa("auto");
    if (kern::avx2_table()) CHECK(std::string(kern::active().name) == "avx2");
    CHECK_THROWS(kern::force_isa("sse9"));
    kern::force_isa("auto");
}
