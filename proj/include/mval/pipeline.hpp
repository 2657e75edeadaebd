#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mval/diagnostics.hpp"
#include "mval/ecv.hpp"
#include "mval/harmonize.hpp"
#include "mval/instrument.hpp"
#include "mval/mapping.hpp"
#include "mval/refine.hpp"
#include "mval/scoring.hpp"
#include "mval/taxonomy.hpp"

namespace mval {

// Resolved parameters for one run; echoed into the run manifest before any
// computation so failed runs stay diagnosable and successful ones replayable.
struct RunConfig {
    std::string instrument_path;
    std::string responses_path;
    std::string rules_path;
    std::string taxonomy_path;
    std::string mapping_path;
    std::string outcomes_path;
    std::string proposals_dir;
    std::string endpoint_url;
    std::string endpoint_model;
    double endpoint_temperature = 0.0;
    std::string out_dir;

    double tau = 0.0; // 0 = no thresholding
    int top_m = 0;    // 0 = uncapped
    bool tighten = false;
    double secondary_lo = 0.05;
    double secondary_hi = 0.20;

    int k_out = 5;
    int k_in = 5;
    int repeats = 5;
    std::uint64_t seed = 0;
    bool seed_set = false;

    std::string scoring_rule = "weighted_mean";
    bool post_standardize = true;
    double lambda = 1e-6;
    double overlap_cutoff = 0.85;
    double closeness = 0.25;

    TriageThresholds thresholds;
    DataLimitThresholds limit_thresholds;
    StoppingRule stopping;
    int discard_after = 2;
    double cc_pass_share = 0.60;
    int outer_split = 0;
    bool all_splits = false;

    unsigned threads = 0;
    std::vector<std::string> missing_tokens = default_missing_tokens();

    std::string to_json_text() const;
    static RunConfig from_json_text(const std::string& text);
};

void write_manifest(const RunConfig& config, const std::string& out_dir);
RunConfig load_manifest(const std::string& path);

struct LoadedArtifacts {
    Instrument instrument;
    ResponseMatrix responses;
    std::vector<HarmonizationRule> rules;
    Taxonomy taxonomy;
    MappingMatrix mapping; // tau/top-m/tighten applied per config, bound to taxonomy
    std::vector<OutcomeSpec> outcomes;
    HarmonizedMatrix harmonized; // rules applied, untransformed
    HarmonizeReport harmonize_report;
};

LoadedArtifacts load_artifacts(const RunConfig& config);

ModelSpec model_spec_from(const RunConfig& config);
ScoringRule scoring_rule_from(const RunConfig& config);

// Context + plan per outcome, all built from the same seed.
struct OutcomeFrame {
    EvalContext context;
    FoldPlan plan;
};

std::vector<OutcomeFrame> build_outcome_frames(const LoadedArtifacts& artifacts,
                                               const RunConfig& config);

std::vector<std::string> candidate_leaves(const MappingMatrix& mapping, const Taxonomy& taxonomy,
                                          const Instrument& instrument);

// Report writers (CSV mirrors the familiar triage-table layouts; JSON keeps
// per-fold detail).
void write_delta_reports_csv(const std::string& path, const std::vector<DeltaReport>& reports,
                             const TriageThresholds& thresholds);
void write_delta_reports_json(const std::string& path, const std::vector<DeltaReport>& reports,
                              const TriageThresholds& thresholds);
void write_overlap_csv(const std::string& path, const OverlapReport& report);
void write_overlap_json(const std::string& path, const OverlapReport& report);
void write_triage_table(const std::string& path, const std::vector<DeltaReport>& reports,
                        const Taxonomy& taxonomy, const TriageThresholds& thresholds);
void write_iteration_log(const std::string& path, const std::vector<IterationState>& rounds);

} // namespace mval
