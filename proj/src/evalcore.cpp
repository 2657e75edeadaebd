#include "mval/evalcore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mval/kernels.hpp"

namespace mval {

void Design::add_col(std::vector<double> col) {
    if (cols.empty()) n = col.size();
    else if (col.size() != n) fail(Errc::shape_mismatch, "design columns differ in length");
    cols.push_back(std::move(col));
}

namespace {

double stable_sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// Dense symmetric solve via Cholesky; escalating diagonal jitter keeps the
// factorization alive on collinear folds without sacrificing determinism.
std::vector<double> solve_spd(std::vector<double> a, std::vector<double> b, std::size_t p) {
    double max_diag = 0.0;
    for (std::size_t i = 0; i < p; ++i) max_diag = std::max(max_diag, std::abs(a[i * p + i]));
    if (max_diag == 0.0) max_diag = 1.0;

    std::vector<double> l(p * p);
    double jitter = 0.0;
    for (int attempt = 0; attempt < 12; ++attempt) {
        bool ok = true;
        std::fill(l.begin(), l.end(), 0.0);
        for (std::size_t i = 0; i < p && ok; ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                double s = a[i * p + j] + (i == j ? jitter : 0.0);
                s -= kern::dot(l.data() + i * p, l.data() + j * p, j);
                if (i == j) {
                    if (s <= 0.0) {
                        ok = false;
                        break;
                    }
                    l[i * p + i] = std::sqrt(s);
                } else {
                    l[i * p + j] = s / l[j * p + j];
                }
            }
        }
        if (ok) {
            // forward then back substitution
            std::vector<double> y(p), x(p);
            for (std::size_t i = 0; i < p; ++i)
                y[i] = (b[i] - kern::dot(l.data() + i * p, y.data(), i)) / l[i * p + i];
            for (std::size_t ii = p; ii-- > 0;) {
                double s = y[ii];
                for (std::size_t j = ii + 1; j < p; ++j) s -= l[j * p + ii] * x[j];
                x[ii] = s / l[ii * p + ii];
            }
            return x;
        }
        jitter = jitter == 0.0 ? 1e-12 * max_diag : jitter * 10.0;
    }
    fail(Errc::precondition, "normal equations not positive definite");
}

std::vector<double> linear_index(const Design& x, const std::vector<double>& coef) {
    std::vector<double> z(x.n, coef[0]);
    for (std::size_t j = 0; j < x.cols.size(); ++j)
        kern::axpy(coef[j + 1], x.cols[j].data(), z.data(), x.n);
    return z;
}

FitResult fit_logistic(const Design& x, const std::vector<double>& y, const ModelSpec& spec) {
    const std::size_t n = x.n;
    const std::size_t p = x.cols.size() + 1;
    double pos = 0.0;
    for (double v : y) {
        if (v != 0.0 && v != 1.0) fail(Errc::precondition, "binary targets must be 0/1");
        pos += v;
    }
    if (pos == 0.0 || pos == static_cast<double>(n))
        fail(Errc::single_class_train, "training targets are single-class");

    std::vector<double> coef(p, 0.0);
    coef[0] = std::log(pos / (static_cast<double>(n) - pos)); // intercept at base rate

    std::vector<double> best = coef;
    double best_loss = std::numeric_limits<double>::infinity();
    bool converged = false;
    int iter = 0;

    std::vector<double> probs(n), weights(n), resid(n);
    std::vector<double> h(p * p), g(p);
    for (; iter < spec.max_iter; ++iter) {
        const std::vector<double> z = linear_index(x, coef);
        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double pi = stable_sigmoid(z[i]);
            probs[i] = pi;
            weights[i] = std::max(pi * (1.0 - pi), 1e-10);
            resid[i] = pi - y[i];
            const double pc = std::min(std::max(pi, 1e-12), 1.0 - 1e-12);
            loss -= y[i] * std::log(pc) + (1.0 - y[i]) * std::log1p(-pc);
        }
        for (std::size_t j = 1; j < p; ++j) loss += 0.5 * spec.lambda * coef[j] * coef[j];
        if (loss < best_loss) {
            best_loss = loss;
            best = coef;
        }

        g[0] = kern::sum(resid.data(), n);
        for (std::size_t j = 1; j < p; ++j)
            g[j] = kern::dot(x.cols[j - 1].data(), resid.data(), n) + spec.lambda * coef[j];

        h[0] = kern::sum(weights.data(), n);
        for (std::size_t j = 1; j < p; ++j) {
            const double v = kern::dot(weights.data(), x.cols[j - 1].data(), n);
            h[j] = v;
            h[j * p] = v;
        }
        for (std::size_t a = 1; a < p; ++a)
            for (std::size_t b = a; b < p; ++b) {
                double v = kern::wdot(weights.data(), x.cols[a - 1].data(), x.cols[b - 1].data(), n);
                if (a == b) v += spec.lambda;
                h[a * p + b] = v;
                h[b * p + a] = v;
            }

        const std::vector<double> step = solve_spd(h, g, p);
        double max_step = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            coef[j] -= step[j];
            max_step = std::max(max_step, std::abs(step[j]));
        }
        if (max_step < spec.tol) {
            converged = true;
            ++iter;
            break;
        }
    }

    // final evaluation so the last iterate can win
    {
        const std::vector<double> z = linear_index(x, coef);
        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double pi = std::min(std::max(stable_sigmoid(z[i]), 1e-12), 1.0 - 1e-12);
            loss -= y[i] * std::log(pi) + (1.0 - y[i]) * std::log1p(-pi);
        }
        for (std::size_t j = 1; j < p; ++j) loss += 0.5 * spec.lambda * coef[j] * coef[j];
        if (loss < best_loss) best = coef;
    }

    FitResult out;
    out.coef = converged ? coef : best;
    out.converged = converged;
    out.iterations = iter;
    return out;
}

FitResult fit_ridge(const Design& x, const std::vector<double>& y, const ModelSpec& spec) {
    const std::size_t n = x.n;
    const std::size_t p = x.cols.size() + 1;
    if (n == 0) fail(Errc::empty_input, "empty training data");

    std::vector<double> a(p * p, 0.0), b(p, 0.0);
    a[0] = static_cast<double>(n);
    b[0] = kern::sum(y.data(), n);
    for (std::size_t j = 1; j < p; ++j) {
        const double* cj = x.cols[j - 1].data();
        const double s = kern::sum(cj, n);
        a[j] = s;
        a[j * p] = s;
        b[j] = kern::dot(cj, y.data(), n);
        for (std::size_t k = j; k < p; ++k) {
            double v = kern::dot(cj, x.cols[k - 1].data(), n);
            if (j == k) v += spec.lambda;
            a[j * p + k] = v;
            a[k * p + j] = v;
        }
    }
    FitResult out;
    out.coef = solve_spd(std::move(a), std::move(b), p);
    out.converged = true;
    out.iterations = 1;
    return out;
}

} // namespace

FitResult fit_model(const Design& train, const std::vector<double>& y, const ModelSpec& spec) {
    if (train.n != y.size()) fail(Errc::shape_mismatch, "targets do not match design rows");
    if (train.n == 0) fail(Errc::empty_input, "empty training data");
    for (const auto& col : train.cols)
        for (double v : col)
            if (is_missing(v)) fail(Errc::precondition, "design matrix contains missing cells");
    if (spec.task == ModelSpec::Task::binary) return fit_logistic(train, y, spec);
    return fit_ridge(train, y, spec);
}

std::vector<double> predict(const Design& x, const FitResult& fit, ModelSpec::Task task) {
    if (fit.coef.size() != x.cols.size() + 1)
        fail(Errc::shape_mismatch, "coefficient count does not match design");
    std::vector<double> z = linear_index(x, fit.coef);
    if (task == ModelSpec::Task::binary)
        for (double& v : z) v = stable_sigmoid(v);
    return z;
}

std::string_view to_string(Metric m) {
    switch (m) {
        case Metric::auc: return "auc";
        case Metric::logloss: return "logloss";
        case Metric::r2: return "r2";
        case Metric::rmse: return "rmse";
    }
    return "auc";
}

Metric metric_from_string(std::string_view s) {
    if (s == "auc") return Metric::auc;
    if (s == "logloss") return Metric::logloss;
    if (s == "r2") return Metric::r2;
    if (s == "rmse") return Metric::rmse;
    fail(Errc::schema_error, "unknown metric '" + std::string(s) + "'");
}

bool higher_is_better(Metric m) { return m == Metric::auc || m == Metric::r2; }

double auc(const std::vector<double>& probs, const std::vector<double>& labels) {
    const std::size_t n = probs.size();
    if (n == 0 || labels.size() != n) fail(Errc::empty_input, "auc: empty or mismatched input");
    std::size_t npos = 0;
    for (double y : labels) {
        if (y != 0.0 && y != 1.0) fail(Errc::precondition, "auc: labels must be 0/1");
        if (y == 1.0) ++npos;
    }
    const std::size_t nneg = n - npos;
    if (npos == 0 || nneg == 0) fail(Errc::zero_variance_target, "auc: needs both classes");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return probs[a] < probs[b]; });

    // average ranks over tie groups; rank sum of positives
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && probs[order[j + 1]] == probs[order[i]]) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t t = i; t <= j; ++t)
            if (labels[order[t]] == 1.0) rank_sum_pos += avg_rank;
        i = j + 1;
    }
    const double np = static_cast<double>(npos);
    const double nn = static_cast<double>(nneg);
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

double logloss(const std::vector<double>& probs, const std::vector<double>& labels) {
    const std::size_t n = probs.size();
    if (n == 0 || labels.size() != n) fail(Errc::empty_input, "logloss: empty or mismatched input");
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] != 0.0 && labels[i] != 1.0)
            fail(Errc::precondition, "logloss: labels must be 0/1");
        const double p = std::min(std::max(probs[i], 1e-12), 1.0 - 1e-12);
        acc -= labels[i] * std::log(p) + (1.0 - labels[i]) * std::log1p(-p);
    }
    return acc / static_cast<double>(n);
}

double r2(const std::vector<double>& preds, const std::vector<double>& targets) {
    const std::size_t n = preds.size();
    if (n == 0 || targets.size() != n) fail(Errc::empty_input, "r2: empty or mismatched input");
    const double mean = kern::sum(targets.data(), n) / static_cast<double>(n);
    const double sst = kern::masked_sumsq_dev(targets.data(), n, mean);
    if (sst == 0.0) fail(Errc::zero_variance_target, "r2: constant targets");
    const double sse = kern::sse(preds.data(), targets.data(), n);
    return 1.0 - sse / sst;
}

double rmse(const std::vector<double>& preds, const std::vector<double>& targets) {
    const std::size_t n = preds.size();
    if (n == 0 || targets.size() != n) fail(Errc::empty_input, "rmse: empty or mismatched input");
    return std::sqrt(kern::sse(preds.data(), targets.data(), n) / static_cast<double>(n));
}

double compute_metric(Metric m, const std::vector<double>& preds,
                      const std::vector<double>& targets) {
    switch (m) {
        case Metric::auc: return auc(preds, targets);
        case Metric::logloss: return logloss(preds, targets);
        case Metric::r2: return r2(preds, targets);
        case Metric::rmse: return rmse(preds, targets);
    }
    fail(Errc::precondition, "unreachable metric");
}

} // namespace mval
