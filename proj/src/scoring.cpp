#include "mval/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mval/csv.hpp"
#include "mval/kernels.hpp"

namespace mval {

std::string_view to_string(ScoringKind k) {
    switch (k) {
        case ScoringKind::weighted_mean: return "weighted_mean";
        case ScoringKind::weighted_sum: return "weighted_sum";
        case ScoringKind::zscore_then_mean: return "zscore_then_mean";
        case ScoringKind::coverage_reweighted_mean: return "coverage_reweighted_mean";
    }
    return "weighted_mean";
}

ScoringKind scoring_kind_from_string(std::string_view s) {
    if (s == "weighted_mean") return ScoringKind::weighted_mean;
    if (s == "weighted_sum") return ScoringKind::weighted_sum;
    if (s == "zscore_then_mean") return ScoringKind::zscore_then_mean;
    if (s == "coverage_reweighted_mean") return ScoringKind::coverage_reweighted_mean;
    fail(Errc::schema_error, "unknown scoring rule '" + std::string(s) + "'");
}

std::size_t ScoreMatrix::col_index(const std::string& subdim_id) const {
    for (std::size_t c = 0; c < subdim_ids.size(); ++c)
        if (subdim_ids[c] == subdim_id) return c;
    fail(Errc::unknown_item, "subdimension '" + subdim_id + "' not in score matrix");
}

bool ScoreMatrix::has_col(const std::string& subdim_id) const {
    return std::find(subdim_ids.begin(), subdim_ids.end(), subdim_id) != subdim_ids.end();
}

ScoreMatrix build_scores(const HarmonizedMatrix& h, const MappingMatrix& w,
                         const ScoringRule& rule, const Instrument& instrument) {
    // Scoring rows: mechanism and control items with weight; outcome and
    // excluded items never feed a score.
    struct ScoredEntry {
        std::size_t h_col;
        std::string subdim_id;
        double weight;
    };
    std::vector<ScoredEntry> entries;
    std::set<std::string> subdim_set;
    std::map<std::string, std::set<std::string>> items_by_subdim;
    for (const auto& row : w.rows()) {
        if (!instrument.contains(row.item_id))
            fail(Errc::stale_mapping, "mapping row '" + row.item_id + "' not in instrument");
        const Usage usage = instrument.item(row.item_id).usage;
        if (usage == Usage::outcome || usage == Usage::excluded) continue;
        if (!h.has_col(row.item_id))
            fail(Errc::stale_mapping,
                 "mapping row '" + row.item_id + "' missing from harmonized matrix");
        const std::size_t col = h.col_index(row.item_id);
        const double scale =
            rule.kind == ScoringKind::coverage_reweighted_mean ? w.scale_for(row.item_id) : 1.0;
        for (const auto& entry : row.weights) {
            if (entry.weight <= 0.0) continue;
            subdim_set.insert(entry.subdim_id);
            items_by_subdim[entry.subdim_id].insert(row.item_id);
            const double effective = entry.weight * scale;
            if (effective <= 0.0) continue; // zero-coverage item contributes nothing
            entries.push_back({col, entry.subdim_id, effective});
        }
    }

    ScoreMatrix s;
    s.respondent_ids = h.respondent_ids;
    s.subdim_ids.assign(subdim_set.begin(), subdim_set.end());
    const std::size_t n = h.n_rows();
    const std::size_t k = s.subdim_ids.size();
    s.values.assign(n * k, 0.0);
    s.contributing.assign(n * k, 0.0);
    s.items_per_subdim.resize(k);
    for (std::size_t c = 0; c < k; ++c)
        s.items_per_subdim[c] = items_by_subdim[s.subdim_ids[c]].size();

    std::vector<double> den(n * k, 0.0);
    for (const auto& entry : entries) {
        const std::size_t c = s.col_index(entry.subdim_id);
        kern::score_accum(h.col(entry.h_col), entry.weight, n, s.col(c), den.data() + c * n,
                          s.contributing.data() + c * n);
    }

    const bool divide = rule.kind != ScoringKind::weighted_sum;
    for (std::size_t c = 0; c < k; ++c) {
        double* out = s.col(c);
        const double* d = den.data() + c * n;
        for (std::size_t i = 0; i < n; ++i) {
            if (d[i] <= 0.0) out[i] = kMissing;
            else if (divide) out[i] /= d[i];
        }
    }
    return s;
}

ScoreStandardization fit_score_standardization(const ScoreMatrix& s,
                                               const std::vector<std::size_t>& train_rows) {
    if (train_rows.empty()) fail(Errc::precondition, "empty training set");
    ScoreStandardization stats;
    stats.subdim_ids = s.subdim_ids;
    const std::size_t k = s.n_cols();
    stats.mean.assign(k, 0.0);
    stats.sd.assign(k, 1.0);
    stats.degenerate.assign(k, false);
    std::vector<double> train;
    for (std::size_t c = 0; c < k; ++c) {
        train.clear();
        const double* col = s.col(c);
        for (std::size_t r : train_rows)
            if (!is_missing(col[r])) train.push_back(col[r]);
        if (train.size() < 2) {
            stats.degenerate[c] = true;
            if (train.size() == 1) stats.mean[c] = train[0];
            continue;
        }
        const double mean = kern::sum(train.data(), train.size()) / static_cast<double>(train.size());
        const double var = kern::masked_sumsq_dev(train.data(), train.size(), mean) /
                           static_cast<double>(train.size() - 1);
        stats.mean[c] = mean;
        if (var <= 0.0) {
            stats.degenerate[c] = true;
        } else {
            stats.sd[c] = std::sqrt(var);
        }
    }
    return stats;
}

void apply_score_standardization(ScoreMatrix& s, const ScoreStandardization& stats) {
    if (stats.subdim_ids != s.subdim_ids)
        fail(Errc::shape_mismatch, "score standardization fitted on different columns");
    for (std::size_t c = 0; c < s.n_cols(); ++c)
        kern::scale_shift(s.col(c), s.n_rows(), stats.mean[c], 1.0 / stats.sd[c]);
}

std::vector<CoverageSummary> score_coverage(const ScoreMatrix& s) {
    std::vector<CoverageSummary> out;
    out.reserve(s.n_cols());
    for (std::size_t c = 0; c < s.n_cols(); ++c) {
        CoverageSummary summary;
        summary.subdim_id = s.subdim_ids[c];
        summary.item_count = s.items_per_subdim[c];
        const double* col = s.col(c);
        for (std::size_t i = 0; i < s.n_rows(); ++i)
            if (!is_missing(col[i])) ++summary.n_nonmissing;
        out.push_back(std::move(summary));
    }
    return out;
}

ScoreMatrix subset_score_rows(const ScoreMatrix& s, const std::vector<std::size_t>& rows) {
    ScoreMatrix out;
    out.subdim_ids = s.subdim_ids;
    out.items_per_subdim = s.items_per_subdim;
    out.respondent_ids.reserve(rows.size());
    for (std::size_t r : rows) {
        if (r >= s.n_rows()) fail(Errc::shape_mismatch, "score subset row out of range");
        out.respondent_ids.push_back(s.respondent_ids[r]);
    }
    const std::size_t k = s.n_cols();
    out.values.resize(rows.size() * k);
    out.contributing.resize(rows.size() * k);
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t i = 0; i < rows.size(); ++i) {
            out.values[c * rows.size() + i] = s.values[c * s.n_rows() + rows[i]];
            out.contributing[c * rows.size() + i] = s.contributing[c * s.n_rows() + rows[i]];
        }
    return out;
}

void write_scores(const std::string& path, const ScoreMatrix& s) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(s.n_rows() + 1);
    std::vector<std::string> header{"respondent_id"};
    header.insert(header.end(), s.subdim_ids.begin(), s.subdim_ids.end());
    rows.push_back(std::move(header));
    for (std::size_t i = 0; i < s.n_rows(); ++i) {
        std::vector<std::string> row{s.respondent_ids[i]};
        for (std::size_t c = 0; c < s.n_cols(); ++c) {
            const double v = s.at(i, c);
            row.push_back(is_missing(v) ? std::string{} : csv::format_double(v));
        }
        rows.push_back(std::move(row));
    }
    csv::write_file(path, rows);
}

} // namespace mval
