#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mval/ecv.hpp"

namespace mval {

struct PlaceboReport {
    std::string kind; // "outcome" | "mapping"
    std::string candidate;
    std::string outcome_id;
    Metric metric = Metric::auc;
    int draws = 0;
    std::uint64_t seed = 0;
    double observed = 0.0;            // oriented delta mean of the unpermuted run
    std::vector<double> draw_deltas;  // oriented delta mean per placebo draw
    double mean = 0.0;
    double sd = 0.0;
    double min = 0.0;
    double max = 0.0;
    double p_value = 0.0; // share of draws with oriented delta >= observed
    bool smoothed = false;

    void finalize(bool smooth);
};

// Permutes the outcome labels (class counts preserved) and reruns the
// candidate's incremental validity once per draw; the fold plan is reused so
// the permuted vector is the only varying factor.
PlaceboReport outcome_permutation(const EvalContext& ctx, const MappingMatrix& mapping,
                                  const FoldPlan& plan, const std::string& candidate,
                                  Metric metric, const std::set<std::string>& baseline_scores,
                                  std::optional<int> outer_split, int draws, std::uint64_t seed,
                                  bool smooth = false);

// Redraws each scoring row's target subdimensions uniformly without
// replacement from the current leaves, keeping the weight multiset, then
// rebuilds scores and reruns the evaluation.
PlaceboReport mapping_permutation(const EvalContext& ctx, const MappingMatrix& mapping,
                                  const Taxonomy& taxonomy, const FoldPlan& plan,
                                  const std::string& candidate, Metric metric,
                                  const std::set<std::string>& baseline_scores,
                                  std::optional<int> outer_split, int draws, std::uint64_t seed,
                                  bool smooth = false);

// Exposed for tests: one seeded permuted mapping draw.
MappingMatrix permute_mapping_targets(const MappingMatrix& mapping, const Taxonomy& taxonomy,
                                      const Instrument& instrument, std::uint64_t seed,
                                      std::uint64_t draw_index);

} // namespace mval
