#pragma once

#include <string>
#include <vector>

#include "mval/harmonize.hpp"
#include "mval/instrument.hpp"
#include "mval/mapping.hpp"

namespace mval {

enum class ScoringKind {
    weighted_mean,
    weighted_sum,
    zscore_then_mean,
    coverage_reweighted_mean,
};

std::string_view to_string(ScoringKind k);
ScoringKind scoring_kind_from_string(std::string_view s);

struct ScoringRule {
    ScoringKind kind = ScoringKind::weighted_mean;
    // Train-fold standardization of the scores themselves.
    bool post_standardize = true;
};

// Respondent x subdimension scores, column-major; NaN where no non-missing
// item contributed (or total weight was zero).
struct ScoreMatrix {
    std::vector<std::string> respondent_ids;
    std::vector<std::string> subdim_ids;
    std::vector<double> values;            // subdim-major columns
    std::vector<double> contributing;      // non-missing items behind each cell
    std::vector<std::size_t> items_per_subdim; // items with positive weight

    std::size_t n_rows() const { return respondent_ids.size(); }
    std::size_t n_cols() const { return subdim_ids.size(); }
    double at(std::size_t row, std::size_t col) const { return values[col * n_rows() + row]; }
    const double* col(std::size_t c) const { return values.data() + c * n_rows(); }
    double* col(std::size_t c) { return values.data() + c * n_rows(); }
    std::size_t col_index(const std::string& subdim_id) const;
    bool has_col(const std::string& subdim_id) const;
};

// Eq.-style weighted aggregation over non-missing items. zscore_then_mean is
// arithmetically the weighted mean; the item z-scoring happens upstream in
// the fold transform, which that rule requires.
ScoreMatrix build_scores(const HarmonizedMatrix& h, const MappingMatrix& w,
                         const ScoringRule& rule, const Instrument& instrument);

struct ScoreStandardization {
    std::vector<std::string> subdim_ids;
    std::vector<double> mean;
    std::vector<double> sd;
    std::vector<bool> degenerate;
};

// Fit on training rows only, then apply to every row.
ScoreStandardization fit_score_standardization(const ScoreMatrix& s,
                                               const std::vector<std::size_t>& train_rows);
void apply_score_standardization(ScoreMatrix& s, const ScoreStandardization& stats);

struct CoverageSummary {
    std::string subdim_id;
    std::size_t n_nonmissing = 0;
    std::size_t item_count = 0;
};

std::vector<CoverageSummary> score_coverage(const ScoreMatrix& s);

ScoreMatrix subset_score_rows(const ScoreMatrix& s, const std::vector<std::size_t>& rows);

void write_scores(const std::string& path, const ScoreMatrix& s);

} // namespace mval
