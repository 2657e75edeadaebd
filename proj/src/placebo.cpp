#include "mval/placebo.hpp"

#include <algorithm>
#include <cmath>

#include "mval/parallel.hpp"
#include "mval/rng.hpp"

namespace mval {

void PlaceboReport::finalize(bool smooth) {
    smoothed = smooth;
    if (draw_deltas.empty()) fail(Errc::precondition, "placebo needs at least one draw");
    double acc = 0.0;
    min = draw_deltas.front();
    max = draw_deltas.front();
    std::size_t at_least = 0;
    for (double d : draw_deltas) {
        acc += d;
        min = std::min(min, d);
        max = std::max(max, d);
        if (d >= observed) ++at_least;
    }
    const double n = static_cast<double>(draw_deltas.size());
    mean = acc / n;
    double ss = 0.0;
    for (double d : draw_deltas) {
        const double dev = d - mean;
        ss += dev * dev;
    }
    sd = draw_deltas.size() >= 2 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    p_value = smooth ? (1.0 + static_cast<double>(at_least)) / (n + 1.0)
                     : static_cast<double>(at_least) / n;
}

namespace {

double candidate_delta(const EvalContext& ctx, const MappingMatrix& mapping, const FoldPlan& plan,
                       const std::string& candidate, Metric metric,
                       const std::set<std::string>& baseline_scores,
                       std::optional<int> outer_split) {
    const std::vector<DeltaReport> reports = incremental_validity(
        ctx, mapping, plan, {candidate}, {metric}, baseline_scores, outer_split);
    return reports.empty() ? 0.0 : reports.front().oriented_mean;
}

} // namespace

PlaceboReport outcome_permutation(const EvalContext& ctx, const MappingMatrix& mapping,
                                  const FoldPlan& plan, const std::string& candidate,
                                  Metric metric, const std::set<std::string>& baseline_scores,
                                  std::optional<int> outer_split, int draws, std::uint64_t seed,
                                  bool smooth) {
    if (draws < 1) fail(Errc::precondition, "draws must be >= 1");
    PlaceboReport report;
    report.kind = "outcome";
    report.candidate = candidate;
    report.outcome_id = ctx.outcome.outcome_id;
    report.metric = metric;
    report.draws = draws;
    report.seed = seed;
    report.observed =
        candidate_delta(ctx, mapping, plan, candidate, metric, baseline_scores, outer_split);

    report.draw_deltas.assign(static_cast<std::size_t>(draws), 0.0);
    parallel_for(
        static_cast<std::size_t>(draws),
        [&](std::size_t d) {
            EvalContext permuted = ctx;
            Rng rng = Rng::derive(seed, d + 1);
            rng.shuffle(permuted.y);
            report.draw_deltas[d] = candidate_delta(permuted, mapping, plan, candidate, metric,
                                                    baseline_scores, outer_split);
        },
        worker_threads());
    report.finalize(smooth);
    return report;
}

MappingMatrix permute_mapping_targets(const MappingMatrix& mapping, const Taxonomy& taxonomy,
                                      const Instrument& instrument, std::uint64_t seed,
                                      std::uint64_t draw_index) {
    const std::vector<std::string> leaves = taxonomy.leaf_ids();
    if (leaves.size() < 2) fail(Errc::precondition, "mapping permutation needs >= 2 leaves");

    Rng rng = Rng::derive(seed, draw_index + 1);
    MappingMatrix out = mapping;
    for (auto& row : out.rows()) {
        if (instrument.contains(row.item_id)) {
            const Usage usage = instrument.item(row.item_id).usage;
            if (usage == Usage::outcome || usage == Usage::excluded) continue;
        }
        if (row.weights.size() > leaves.size())
            fail(Errc::precondition, "row '" + row.item_id + "' has more weights than leaves");
        // draw |weights| distinct leaves; weights keep their multiset in
        // rank order against the shuffled targets
        std::vector<std::string> pool = leaves;
        rng.shuffle(pool);
        std::vector<WeightEntry> ranked = row.weights;
        std::sort(ranked.begin(), ranked.end(), weight_before);
        for (std::size_t i = 0; i < ranked.size(); ++i) ranked[i].subdim_id = pool[i];
        std::sort(ranked.begin(), ranked.end(), [](const WeightEntry& a, const WeightEntry& b) {
            return a.subdim_id < b.subdim_id;
        });
        row.weights = std::move(ranked);
    }
    return out;
}

PlaceboReport mapping_permutation(const EvalContext& ctx, const MappingMatrix& mapping,
                                  const Taxonomy& taxonomy, const FoldPlan& plan,
                                  const std::string& candidate, Metric metric,
                                  const std::set<std::string>& baseline_scores,
                                  std::optional<int> outer_split, int draws, std::uint64_t seed,
                                  bool smooth) {
    if (draws < 1) fail(Errc::precondition, "draws must be >= 1");
    if (taxonomy.leaf_ids().size() < 2)
        fail(Errc::precondition, "mapping permutation needs >= 2 leaves");
    PlaceboReport report;
    report.kind = "mapping";
    report.candidate = candidate;
    report.outcome_id = ctx.outcome.outcome_id;
    report.metric = metric;
    report.draws = draws;
    report.seed = seed;
    report.observed =
        candidate_delta(ctx, mapping, plan, candidate, metric, baseline_scores, outer_split);

    report.draw_deltas.assign(static_cast<std::size_t>(draws), 0.0);
    parallel_for(
        static_cast<std::size_t>(draws),
        [&](std::size_t d) {
            const MappingMatrix permuted =
                permute_mapping_targets(mapping, taxonomy, *ctx.instrument, seed, d);
            report.draw_deltas[d] = candidate_delta(ctx, permuted, plan, candidate, metric,
                                                    baseline_scores, outer_split);
        },
        worker_threads());
    report.finalize(smooth);
    return report;
}

} // namespace mval
