#include "mval/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <set>

namespace mval {

double pairwise_pearson(const double* a, const double* b, const std::vector<std::size_t>& rows,
                        std::size_t* n_complete) {
    double sa = 0.0, sb = 0.0;
    std::size_t n = 0;
    for (std::size_t r : rows) {
        if (is_missing(a[r]) || is_missing(b[r])) continue;
        sa += a[r];
        sb += b[r];
        ++n;
    }
    if (n_complete) *n_complete = n;
    if (n < 3) return kMissing;
    const double ma = sa / static_cast<double>(n);
    const double mb = sb / static_cast<double>(n);
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t r : rows) {
        if (is_missing(a[r]) || is_missing(b[r])) continue;
        const double da = a[r] - ma;
        const double db = b[r] - mb;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    if (saa <= 0.0 || sbb <= 0.0) return kMissing;
    return sab / std::sqrt(saa * sbb);
}

bool OverlapReport::in_cluster(const std::string& subdim) const {
    return cluster_of(subdim) != nullptr;
}

const std::vector<std::string>* OverlapReport::cluster_of(const std::string& subdim) const {
    for (const auto& cluster : clusters)
        if (std::find(cluster.begin(), cluster.end(), subdim) != cluster.end()) return &cluster;
    return nullptr;
}

OverlapReport correlation_screen(const ScoreMatrix& s, double cutoff,
                                 const std::vector<std::size_t>& rows) {
    if (!(cutoff > 0.0 && cutoff < 1.0)) fail(Errc::precondition, "cutoff must be in (0,1)");
    OverlapReport report;
    report.cutoff = cutoff;

    const std::size_t k = s.n_cols();
    // union-find over flagged pairs
    std::vector<std::size_t> parent(k);
    std::iota(parent.begin(), parent.end(), 0);
    const std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };

    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = a + 1; b < k; ++b) {
            std::size_t n = 0;
            const double rho = pairwise_pearson(s.col(a), s.col(b), rows, &n);
            if (is_missing(rho)) {
                if (n < 3)
                    report.skipped.push_back({"insufficient_overlap_rows",
                                              s.subdim_ids[a] + "/" + s.subdim_ids[b],
                                              "only " + std::to_string(n) + " pairwise rows"});
                continue;
            }
            if (std::abs(rho) >= cutoff) {
                report.flagged.push_back({s.subdim_ids[a], s.subdim_ids[b], rho, n});
                parent[find(a)] = find(b);
            }
        }
    }

    std::set<std::size_t> involved;
    for (const auto& pair : report.flagged) {
        involved.insert(s.col_index(pair.subdim_a));
        involved.insert(s.col_index(pair.subdim_b));
    }
    std::map<std::size_t, std::vector<std::string>> components;
    for (std::size_t c : involved) components[find(c)].push_back(s.subdim_ids[c]);
    for (auto& [root, members] : components) {
        std::sort(members.begin(), members.end());
        report.clusters.push_back(members);
    }
    std::sort(report.clusters.begin(), report.clusters.end());
    return report;
}

ConditionalContributionResult conditional_contribution(
    const std::vector<std::string>& cluster, const std::string& candidate, const EvalContext& ctx,
    const MappingMatrix& mapping, const FoldPlan& plan, Metric metric,
    const std::set<std::string>& baseline_score_subdims, std::optional<int> outer_split,
    double pass_share_threshold) {
    if (cluster.size() < 2) fail(Errc::precondition, "cluster must have at least 2 members");
    if (std::find(cluster.begin(), cluster.end(), candidate) == cluster.end())
        fail(Errc::precondition, "candidate must belong to the cluster");

    // Baseline for the comparison: configured covariates plus the cluster
    // minus the candidate; the candidate evaluation then adds it back, which
    // is exactly M(baseline + cluster) vs M(baseline + cluster \ {candidate}).
    std::set<std::string> base_scores = baseline_score_subdims;
    for (const auto& member : cluster)
        if (member != candidate) base_scores.insert(member);
    base_scores.erase(candidate);

    const std::vector<DeltaReport> reports = incremental_validity(
        ctx, mapping, plan, {candidate}, {metric}, base_scores, outer_split);

    ConditionalContributionResult result;
    result.cluster = cluster;
    result.candidate = candidate;
    result.outcome_id = ctx.outcome.outcome_id;
    result.metric = metric;
    result.pass_share_threshold = pass_share_threshold;
    if (!reports.empty()) {
        result.folds = reports.front().folds;
        result.oriented_mean = reports.front().oriented_mean;
        result.share_improve = reports.front().share_improve;
    }
    // ties break toward fail: both inequalities strict on the gain side
    result.pass = result.share_improve >= pass_share_threshold && result.oriented_mean > 0.0;
    return result;
}

std::vector<DataLimitFlag> data_limit_flags(const ScoreMatrix& s,
                                            const std::vector<CoverageSummary>& coverage,
                                            const DataLimitThresholds& thresholds,
                                            const std::vector<std::string>& degenerate_items,
                                            const MappingMatrix* mapping) {
    std::vector<DataLimitFlag> flags;
    for (const auto& summary : coverage) {
        DataLimitFlag flag;
        flag.subdim_id = summary.subdim_id;
        flag.thresholds = thresholds;
        if (summary.n_nonmissing < thresholds.min_n) flag.reasons.push_back("low_n");
        if (summary.item_count < thresholds.min_items) flag.reasons.push_back("few_items");

        if (s.has_col(summary.subdim_id)) {
            const std::size_t c = s.col_index(summary.subdim_id);
            const double* col = s.col(c);
            double sum = 0.0;
            std::size_t n = 0;
            for (std::size_t i = 0; i < s.n_rows(); ++i)
                if (!is_missing(col[i])) {
                    sum += col[i];
                    ++n;
                }
            if (n >= 2) {
                const double mean = sum / static_cast<double>(n);
                double ss = 0.0;
                for (std::size_t i = 0; i < s.n_rows(); ++i)
                    if (!is_missing(col[i])) {
                        const double d = col[i] - mean;
                        ss += d * d;
                    }
                const double sd = std::sqrt(ss / static_cast<double>(n - 1));
                if (sd < thresholds.min_sd) flag.reasons.push_back("low_variance");
            }
        }

        if (mapping && !degenerate_items.empty()) {
            bool touched = false;
            for (const auto& row : mapping->rows()) {
                if (std::find(degenerate_items.begin(), degenerate_items.end(), row.item_id) ==
                    degenerate_items.end())
                    continue;
                for (const auto& entry : row.weights)
                    if (entry.subdim_id == summary.subdim_id && entry.weight > 0.0) touched = true;
            }
            if (touched) flag.reasons.push_back("degenerate_columns");
        }

        if (!flag.reasons.empty()) flags.push_back(std::move(flag));
    }
    return flags;
}

} // namespace mval
