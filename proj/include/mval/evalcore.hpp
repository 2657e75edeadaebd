#pragma once

#include <string>
#include <vector>

#include "mval/common.hpp"

namespace mval {

// Deterministic prediction engine shared by every validation stage: a
// logistic-loss linear classifier and a ridge linear regressor, both with an
// unpenalized intercept.
struct ModelSpec {
    enum class Task { binary, continuous } task = Task::binary;
    double lambda = 1e-6;
    int max_iter = 100;
    double tol = 1e-8;
};

// Design matrix, column-major without the intercept column (implicit).
struct Design {
    std::size_t n = 0;
    std::vector<std::vector<double>> cols;

    void add_col(std::vector<double> col);
};

struct FitResult {
    std::vector<double> coef; // intercept first, then one per column
    bool converged = true;
    int iterations = 0;
};

FitResult fit_model(const Design& train, const std::vector<double>& y, const ModelSpec& spec);

// Probabilities for binary models, fitted values for continuous ones.
std::vector<double> predict(const Design& x, const FitResult& fit, ModelSpec::Task task);

enum class Metric { auc, logloss, r2, rmse };

std::string_view to_string(Metric m);
Metric metric_from_string(std::string_view s);
bool higher_is_better(Metric m);

// Rank statistic with 0.5 credit for prediction ties.
double auc(const std::vector<double>& probs, const std::vector<double>& labels);
// Mean negative log likelihood with probabilities clamped at 1e-12.
double logloss(const std::vector<double>& probs, const std::vector<double>& labels);
// 1 - SSE/SST; throws ZeroVarianceTarget when the targets are constant.
double r2(const std::vector<double>& preds, const std::vector<double>& targets);
double rmse(const std::vector<double>& preds, const std::vector<double>& targets);

double compute_metric(Metric m, const std::vector<double>& preds,
                      const std::vector<double>& targets);

// Oriented so that larger is always better (lower-is-better metrics negated).
inline double orient(Metric m, double value) { return higher_is_better(m) ? value : -value; }

} // namespace mval
