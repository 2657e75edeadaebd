#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mval/evalcore.hpp"
#include "mval/harmonize.hpp"
#include "mval/instrument.hpp"
#include "mval/mapping.hpp"
#include "mval/scoring.hpp"
#include "mval/taxonomy.hpp"

namespace mval {

// Nested fold assignments: outer evaluation folds partition the analysis
// rows; each (outer split, repeat) carries an inner partition of that
// split's training rows. Everything is a pure function of (n, labels, seed).
struct FoldPlan {
    int k_out = 5;
    int k_in = 5;
    int repeats = 5;
    std::uint64_t seed = 0;
    std::size_t n = 0;
    std::vector<int> outer_fold;                         // per row
    std::vector<std::vector<std::vector<int>>> inner;    // [outer][repeat][row] (-1 on outer test)

    std::vector<std::size_t> outer_test_rows(int o) const;
    std::vector<std::size_t> outer_train_rows(int o) const;
    std::vector<std::size_t> inner_train_rows(int o, int r, int f) const;
    std::vector<std::size_t> inner_test_rows(int o, int r, int f) const;

    // Partition and containment checks; throws on tampered plans (e.g. an
    // outer-test row appearing inside its own split's inner folds).
    void validate() const;
};

FoldPlan make_fold_plan(std::size_t n, const std::vector<double>* binary_labels, int k_out,
                        int k_in, int repeats, std::uint64_t seed);

struct FoldDelta {
    int outer = 0;
    int repeat = 0;
    int inner = 0; // -1 for outer-fold evaluations
    double baseline = 0.0;
    double augmented = 0.0;
    double delta = 0.0;    // augmented - baseline, raw metric scale
    double oriented = 0.0; // improvement-positive
};

struct DeltaReport {
    std::string candidate;
    std::string outcome_id;
    Metric metric = Metric::auc;
    std::vector<FoldDelta> folds;
    double oriented_mean = 0.0;
    double oriented_sd = 0.0;
    double share_improve = 0.0; // p_j = share of folds with oriented delta > 0
    std::size_t n_rows = 0;     // candidate-complete analysis rows
    std::size_t item_count = 0; // items with positive weight on the candidate

    void finalize(); // mean/sd/share from folds
};

struct TriageThresholds {
    double signal_share = 0.90;
    double weak_share = 0.60;
};

enum class TriageLabel { signal, weak_signal, noise_like };
std::string_view to_string(TriageLabel label);

// signal: share >= signal_share and oriented mean > 0;
// weak_signal: weak_share <= share < signal_share and oriented mean > 0;
// noise_like otherwise. Monotone in both arguments.
TriageLabel classify(const DeltaReport& report, const TriageThresholds& thresholds);
TriageLabel classify(double oriented_mean, double share_improve,
                     const TriageThresholds& thresholds);

// Everything one outcome needs for evaluation: harmonized matrix (rules
// applied, untransformed), the filtered analysis rows, the target vector and
// the baseline covariate columns.
struct EvalContext {
    const Instrument* instrument = nullptr;
    OutcomeSpec outcome;
    HarmonizedMatrix h;
    std::vector<std::size_t> analysis_rows; // row ids into h
    std::vector<double> y;                  // one per analysis row
    std::vector<std::string> baseline_items;
    std::vector<HarmonizationRule> effective_rules;
    ModelSpec model;
    ScoringRule scoring;
    std::size_t dropped_missing_baseline = 0;
    std::size_t dropped_missing_outcome = 0;
    std::size_t dropped_by_filter = 0;
};

EvalContext make_eval_context(const Instrument& instrument, const HarmonizedMatrix& h,
                              const OutcomeSpec& outcome,
                              const std::vector<HarmonizationRule>& rules, const ModelSpec& model,
                              const ScoringRule& scoring);

// Per-candidate incremental out-of-sample deltas over the plan's inner
// folds. `outer_split` restricts to one split (refinement loop); nullopt
// pools every split's inner folds (standalone reporting).
// `baseline_score_subdims` are retained/anchored scores added to the
// baseline specification; a candidate is always excluded from its own
// baseline. Rows missing the candidate score are dropped from baseline and
// augmented fits alike, so each comparison sees identical samples.
std::vector<DeltaReport> incremental_validity(const EvalContext& ctx, const MappingMatrix& mapping,
                                              const FoldPlan& plan,
                                              const std::vector<std::string>& candidates,
                                              const std::vector<Metric>& metrics,
                                              const std::set<std::string>& baseline_score_subdims,
                                              std::optional<int> outer_split = std::nullopt);

// One evaluation per outer fold of the frozen artifacts; never used for
// refinement decisions.
struct FrozenArtifacts {
    const Taxonomy* taxonomy = nullptr;
    const MappingMatrix* mapping = nullptr;
};

std::vector<DeltaReport> outer_evaluate(const EvalContext& ctx, const FrozenArtifacts& frozen,
                                        const FoldPlan& plan,
                                        const std::vector<std::string>& candidates,
                                        const std::vector<Metric>& metrics,
                                        const std::set<std::string>& baseline_score_subdims,
                                        std::optional<int> only_split = std::nullopt);

// Fold-transformed scores on the full analysis sample with train-only
// statistics from `train_rows` (analysis-row indices); shared by the
// diagnostics and the refinement loop. Degenerate (constant-in-train)
// columns are reported when requested; they feed the data-limited flags.
ScoreMatrix scores_for_rows(const EvalContext& ctx, const MappingMatrix& mapping,
                            const std::vector<std::size_t>& train_rows,
                            std::vector<std::string>* degenerate_items = nullptr);

Metric primary_metric(const OutcomeSpec& outcome);
std::vector<Metric> default_metrics(const OutcomeSpec& outcome);

} // namespace mval
