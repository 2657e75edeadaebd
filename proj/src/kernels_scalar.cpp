#include "mval/kernels.hpp"

#include <cmath>

// Reference kernels. These define the semantics the SIMD variants are
// equivalence-tested against.

namespace mval::kern {
namespace {

double sum_scalar(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double wdot_scalar(const double* w, const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += w[i] * a[i] * b[i];
    return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double sse_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

void clamp_range_scalar(double* x, std::size_t n, double lo, double hi) {
    for (std::size_t i = 0; i < n; ++i) {
        const double v = x[i];
        if (std::isnan(v)) continue;
        x[i] = v < lo ? lo : (v > hi ? hi : v);
    }
}

void scale_shift_scalar(double* x, std::size_t n, double center, double scale) {
    for (std::size_t i = 0; i < n; ++i) x[i] = (x[i] - center) * scale;
}

void masked_sum_count_scalar(const double* x, std::size_t n, double* out_sum,
                             std::size_t* out_count) {
    double acc = 0.0;
    std::size_t cnt = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (std::isnan(x[i])) continue;
        acc += x[i];
        ++cnt;
    }
    *out_sum = acc;
    *out_count = cnt;
}

double masked_sumsq_dev_scalar(const double* x, std::size_t n, double mean) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (std::isnan(x[i])) continue;
        const double d = x[i] - mean;
        acc += d * d;
    }
    return acc;
}

void score_accum_scalar(const double* x, double w, std::size_t n, double* num, double* den,
                        double* cnt) {
    for (std::size_t i = 0; i < n; ++i) {
        if (std::isnan(x[i])) continue;
        num[i] += w * x[i];
        den[i] += w;
        cnt[i] += 1.0;
    }
}

} // namespace

const KernelTable& scalar_table() {
    static const KernelTable table{
        "scalar",
        sum_scalar,
        dot_scalar,
        wdot_scalar,
        axpy_scalar,
        sse_scalar,
        clamp_range_scalar,
        scale_shift_scalar,
        masked_sum_count_scalar,
        masked_sumsq_dev_scalar,
        score_accum_scalar,
    };
    return table;
}

} // namespace mval::kern
