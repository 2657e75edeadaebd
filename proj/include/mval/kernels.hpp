#pragma once

#include <cstddef>
#include <string_view>

namespace mval::kern {

// Data-parallel inner loops behind the pipeline: column moments, masked
// score accumulation, linear-model reductions. Each entry has a scalar
// reference implementation and, on x86-64 with AVX2, a vectorized variant;
// the active table is selected once at startup (override with force_isa or
// the MVAL_ISA environment variable). Missing cells are quiet NaNs; masked
// kernels skip them, unmasked ones propagate them.
struct KernelTable {
    const char* name;

    double (*sum)(const double* x, std::size_t n);
    double (*dot)(const double* a, const double* b, std::size_t n);
    // sum_i w[i]*a[i]*b[i]
    double (*wdot)(const double* w, const double* a, const double* b, std::size_t n);
    // y[i] += alpha*x[i]
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // sum_i (a[i]-b[i])^2
    double (*sse)(const double* a, const double* b, std::size_t n);
    // clamp into [lo,hi]; NaN passes through untouched
    void (*clamp_range)(double* x, std::size_t n, double lo, double hi);
    // x[i] = (x[i]-center)*scale
    void (*scale_shift)(double* x, std::size_t n, double center, double scale);
    // sum and count over the non-NaN entries
    void (*masked_sum_count)(const double* x, std::size_t n, double* out_sum,
                             std::size_t* out_count);
    // sum of (x[i]-mean)^2 over non-NaN entries
    double (*masked_sumsq_dev)(const double* x, std::size_t n, double mean);
    // per-row weighted accumulation used by the scoring rules: where x[i] is
    // present, num[i] += w*x[i], den[i] += w, cnt[i] += 1
    void (*score_accum)(const double* x, double w, std::size_t n, double* num, double* den,
                        double* cnt);
};

const KernelTable& scalar_table();
// nullptr when AVX2 is unavailable at build or run time.
const KernelTable* avx2_table();

const KernelTable& active();
// "scalar", "avx2" or "auto"; throws on "avx2" when unsupported.
void force_isa(std::string_view name);

inline double sum(const double* x, std::size_t n) { return active().sum(x, n); }
inline double dot(const double* a, const double* b, std::size_t n) { return active().dot(a, b, n); }
inline double wdot(const double* w, const double* a, const double* b, std::size_t n) {
    return active().wdot(w, a, b, n);
}
inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
    active().axpy(alpha, x, y, n);
}
inline double sse(const double* a, const double* b, std::size_t n) { return active().sse(a, b, n); }
inline void clamp_range(double* x, std::size_t n, double lo, double hi) {
    active().clamp_range(x, n, lo, hi);
}
inline void scale_shift(double* x, std::size_t n, double center, double scale) {
    active().scale_shift(x, n, center, scale);
}
inline void masked_sum_count(const double* x, std::size_t n, double* out_sum,
                             std::size_t* out_count) {
    active().masked_sum_count(x, n, out_sum, out_count);
}
inline double masked_sumsq_dev(const double* x, std::size_t n, double mean) {
    return active().masked_sumsq_dev(x, n, mean);
}
inline void score_accum(const double* x, double w, std::size_t n, double* num, double* den,
                        double* cnt) {
    active().score_accum(x, w, n, num, den, cnt);
}

} // namespace mval::kern
