#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mval/diagnostics.hpp"
#include "mval/ecv.hpp"
#include "mval/proposer.hpp"

namespace mval {

enum class Decision { retain, refine, defer, discard };
std::string_view to_string(Decision d);

struct SubdimDecision {
    std::string subdim_id;
    TriageLabel label = TriageLabel::noise_like; // best label across outcomes
    Decision action = Decision::defer;
    std::string reason; // stable_gains | cc_pass | data_limited | overlap_cc_fail | watch | repeated_noise
    int noise_streak = 0;
};

struct DecidePolicy {
    TriageThresholds thresholds;
    int discard_after = 2; // consecutive noise rounds before discard
    double cc_pass_share = 0.60;
};

// Per-round inputs to decide(); the round tag guards against mixing rounds.
struct RoundInputs {
    int round = 0;
    std::vector<DeltaReport> primary_reports; // primary metric, all outcomes
    OverlapReport overlap;
    std::vector<DataLimitFlag> limits;
    std::vector<ConditionalContributionResult> cc_results;
};

std::vector<SubdimDecision> decide(const RoundInputs& inputs, const DecidePolicy& policy,
                                   const std::map<std::string, int>& noise_streak);

struct StoppingRule {
    double plateau_delta = 0.002; // minimum round-over-round gain in best oriented mean
    int patience = 2;
    int max_rounds = 5;
};

struct IterationState {
    int round = 0;
    int outer_split = 0;
    std::uint64_t taxonomy_version = 0;
    std::uint64_t mapping_version = 0;
    std::vector<DeltaReport> reports; // all metrics, all outcomes
    OverlapReport overlap;
    CrossLoadingReport cross_loading;
    std::vector<DataLimitFlag> limits;
    std::vector<ConditionalContributionResult> cc_results;
    std::vector<SubdimDecision> decisions;
    std::map<std::string, double> best_oriented_delta; // per outcome, primary metric
    std::string refined_cluster;                       // empty when no refinement applied
    std::string status; // continue | plateau | no_refine_targets | max_rounds | proposer_failure
};

// Applies one proposer reallocation: optional local split of the target plus
// replacement of the neighborhood rows. Anchored rows and rows outside the
// neighborhood are untouched; the result must pass validate_mapping.
struct RefinementOutcome {
    Taxonomy taxonomy;
    MappingMatrix mapping;
};

RefinementOutcome apply_refinement(const Taxonomy& taxonomy, const MappingMatrix& mapping,
                                   const std::vector<std::string>& cluster,
                                   const ProposalResponse& proposal,
                                   const Instrument& instrument);

// Items with positive weight on the target subdimension or any of its
// cluster partners in the current mapping.
std::vector<std::string> neighborhood_items(const MappingMatrix& mapping,
                                            const std::vector<std::string>& cluster);

struct LoopConfig {
    StoppingRule stopping;
    DecidePolicy policy;
    double overlap_cutoff = 0.85;
    double closeness = 0.25;
    DataLimitThresholds limit_thresholds;
    int outer_split = 0; // the split whose training data drives this loop
    int proposer_retries = 2;
};

struct LoopInputs {
    const Instrument* instrument = nullptr;
    // one context + plan per outcome, aligned
    std::vector<const EvalContext*> contexts;
    std::vector<const FoldPlan*> plans;
    Taxonomy taxonomy;
    MappingMatrix mapping;
};

struct LoopResult {
    std::vector<IterationState> rounds;
    Taxonomy final_taxonomy;
    MappingMatrix final_mapping;
    std::string status;
};

// Evaluate -> diagnose -> decide -> refine until the stopping rule fires.
// All decisions read only the configured outer split's training rows.
LoopResult run_loop(const LoopInputs& inputs, Proposer& proposer, const LoopConfig& config);

} // namespace mval
