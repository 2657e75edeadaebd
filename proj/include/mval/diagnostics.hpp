#pragma once

#include <string>
#include <vector>

#include "mval/ecv.hpp"
#include "mval/scoring.hpp"

namespace mval {

struct OverlapPair {
    std::string subdim_a;
    std::string subdim_b;
    double rho = 0.0;
    std::size_t n_pairwise = 0;
};

struct OverlapReport {
    double cutoff = 0.85;
    std::vector<OverlapPair> flagged;
    std::vector<std::vector<std::string>> clusters; // connected components, sorted
    std::vector<Finding> skipped;                   // pairs without enough overlap rows

    bool in_cluster(const std::string& subdim) const;
    const std::vector<std::string>* cluster_of(const std::string& subdim) const;
};

// Pearson correlations on pairwise-complete rows; pairs with fewer than 3
// complete rows are skipped and recorded.
OverlapReport correlation_screen(const ScoreMatrix& s, double cutoff,
                                 const std::vector<std::size_t>& rows);

struct ConditionalContributionResult {
    std::vector<std::string> cluster;
    std::string candidate;
    std::string outcome_id;
    Metric metric = Metric::auc;
    std::vector<FoldDelta> folds; // full cluster vs cluster minus candidate
    double oriented_mean = 0.0;
    double share_improve = 0.0;
    bool pass = false;
    double pass_share_threshold = 0.60;
};

// Held-out gain of the candidate beyond the rest of its overlap cluster:
// M(baseline + cluster) - M(baseline + cluster \ {candidate}) per fold.
ConditionalContributionResult conditional_contribution(
    const std::vector<std::string>& cluster, const std::string& candidate, const EvalContext& ctx,
    const MappingMatrix& mapping, const FoldPlan& plan, Metric metric,
    const std::set<std::string>& baseline_score_subdims, std::optional<int> outer_split,
    double pass_share_threshold = 0.60);

struct DataLimitThresholds {
    std::size_t min_n = 100;
    std::size_t min_items = 2;
    double min_sd = 0.05;
};

struct DataLimitFlag {
    std::string subdim_id;
    std::vector<std::string> reasons; // low_n | few_items | low_variance | degenerate_columns
    DataLimitThresholds thresholds;
};

// Flags components whose instability is plausibly a coverage problem rather
// than contamination; decide() routes them to defer.
std::vector<DataLimitFlag> data_limit_flags(const ScoreMatrix& s,
                                            const std::vector<CoverageSummary>& coverage,
                                            const DataLimitThresholds& thresholds,
                                            const std::vector<std::string>& degenerate_items = {},
                                            const MappingMatrix* mapping = nullptr);

// Pearson correlation over pairwise-complete entries; NaN when fewer than 3.
double pairwise_pearson(const double* a, const double* b, const std::vector<std::size_t>& rows,
                        std::size_t* n_complete = nullptr);

} // namespace mval
