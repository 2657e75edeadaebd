#include "mval/kernels.hpp"

// AVX2 variants, compiled with -mavx2 -mfma for this translation unit only.
// Reductions keep two 4-lane accumulators and fold them in a fixed order, so
// results are deterministic run-to-run (they may differ from the scalar path
// by normal rounding; the equivalence tests bound that).

#if defined(__AVX2__)

#include <immintrin.h>

#include <cmath>

namespace mval::kern {
namespace {

double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d swapped = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

double sum_avx2(const double* x, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
        acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(x + i + 4));
    }
    for (; i + 4 <= n; i += 4) acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += x[i];
    return acc;
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double wdot_avx2(const double* w, const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d ab = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(w + i), ab, acc);
    }
    double out = hsum(acc);
    for (; i < n; ++i) out += w[i] * a[i] * b[i];
    return out;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

double sse_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double out = hsum(acc);
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        out += d * d;
    }
    return out;
}

void clamp_range_avx2(double* x, std::size_t n, double lo, double hi) {
    // max/min return the second operand when either input is NaN, so keeping
    // x in the second slot lets NaN pass through.
    const __m256d vlo = _mm256_set1_pd(lo);
    const __m256d vhi = _mm256_set1_pd(hi);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_loadu_pd(x + i);
        __m256d clamped = _mm256_min_pd(vhi, _mm256_max_pd(vlo, v));
        __m256d ord = _mm256_cmp_pd(v, v, _CMP_ORD_Q);
        _mm256_storeu_pd(x + i, _mm256_blendv_pd(v, clamped, ord));
    }
    for (; i < n; ++i) {
        const double v = x[i];
        if (std::isnan(v)) continue;
        x[i] = v < lo ? lo : (v > hi ? hi : v);
    }
}

void scale_shift_avx2(double* x, std::size_t n, double center, double scale) {
    const __m256d vc = _mm256_set1_pd(center);
    const __m256d vs = _mm256_set1_pd(scale);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_sub_pd(_mm256_loadu_pd(x + i), vc);
        _mm256_storeu_pd(x + i, _mm256_mul_pd(v, vs));
    }
    for (; i < n; ++i) x[i] = (x[i] - center) * scale;
}

void masked_sum_count_avx2(const double* x, std::size_t n, double* out_sum,
                           std::size_t* out_count) {
    __m256d acc = _mm256_setzero_pd();
    __m256d cnt = _mm256_setzero_pd();
    const __m256d one = _mm256_set1_pd(1.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_loadu_pd(x + i);
        __m256d ord = _mm256_cmp_pd(v, v, _CMP_ORD_Q);
        acc = _mm256_add_pd(acc, _mm256_and_pd(ord, v));
        cnt = _mm256_add_pd(cnt, _mm256_and_pd(ord, one));
    }
    double s = hsum(acc);
    double c = hsum(cnt);
    for (; i < n; ++i) {
        if (std::isnan(x[i])) continue;
        s += x[i];
        c += 1.0;
    }
    *out_sum = s;
    *out_count = static_cast<std::size_t>(c);
}

double masked_sumsq_dev_avx2(const double* x, std::size_t n, double mean) {
    const __m256d vm = _mm256_set1_pd(mean);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_loadu_pd(x + i);
        __m256d ord = _mm256_cmp_pd(v, v, _CMP_ORD_Q);
        __m256d d = _mm256_sub_pd(v, vm);
        acc = _mm256_add_pd(acc, _mm256_and_pd(ord, _mm256_mul_pd(d, d)));
    }
    double out = hsum(acc);
    for (; i < n; ++i) {
        if (std::isnan(x[i])) continue;
        const double d = x[i] - mean;
        out += d * d;
    }
    return out;
}

void score_accum_avx2(const double* x, double w, std::size_t n, double* num, double* den,
                      double* cnt) {
    const __m256d vw = _mm256_set1_pd(w);
    const __m256d one = _mm256_set1_pd(1.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_loadu_pd(x + i);
        __m256d ord = _mm256_cmp_pd(v, v, _CMP_ORD_Q);
        __m256d wx = _mm256_and_pd(ord, _mm256_mul_pd(vw, v));
        _mm256_storeu_pd(num + i, _mm256_add_pd(_mm256_loadu_pd(num + i), wx));
        _mm256_storeu_pd(den + i,
                         _mm256_add_pd(_mm256_loadu_pd(den + i), _mm256_and_pd(ord, vw)));
        _mm256_storeu_pd(cnt + i,
                         _mm256_add_pd(_mm256_loadu_pd(cnt + i), _mm256_and_pd(ord, one)));
    }
    for (; i < n; ++i) {
        if (std::isnan(x[i])) continue;
        num[i] += w * x[i];
        den[i] += w;
        cnt[i] += 1.0;
    }
}

} // namespace

const KernelTable* avx2_table() {
    static const KernelTable table{
        "avx2",
        sum_avx2,
        dot_avx2,
        wdot_avx2,
        axpy_avx2,
        sse_avx2,
        clamp_range_avx2,
        scale_shift_avx2,
        masked_sum_count_avx2,
        masked_sumsq_dev_avx2,
        score_accum_avx2,
    };
    if (!__builtin_cpu_supports("avx2")) return nullptr;
    return &table;
}

} // namespace mval::kern

#else

namespace mval::kern {
const KernelTable* avx2_table() { return nullptr; }
} // namespace mval::kern

#endif
