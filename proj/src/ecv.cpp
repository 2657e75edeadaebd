#include "mval/ecv.hpp"

#include <algorithm>
#include <cmath>

#include "mval/kernels.hpp"
#include "mval/parallel.hpp"
#include "mval/rng.hpp"

namespace mval {

namespace {

// Seeded stratified dealing: shuffle within each stratum, then deal
// round-robin, which keeps per-fold class counts within one of parity.
std::vector<int> deal_folds(const std::vector<std::size_t>& rows,
                            const std::vector<double>* binary_labels, int k, Rng& rng,
                            std::size_t universe) {
    std::vector<int> fold(universe, -1);
    std::vector<std::size_t> strata[2];
    if (binary_labels) {
        for (std::size_t r : rows)
            strata[(*binary_labels)[r] == 1.0 ? 1 : 0].push_back(r);
    } else {
        strata[0] = rows;
    }
    for (auto& stratum : strata) {
        if (stratum.empty()) continue;
        rng.shuffle(stratum);
        for (std::size_t pos = 0; pos < stratum.size(); ++pos)
            fold[stratum[pos]] = static_cast<int>(pos % static_cast<std::size_t>(k));
    }
    return fold;
}

} // namespace

std::vector<std::size_t> FoldPlan::outer_test_rows(int o) const {
    std::vector<std::size_t> out;
    for (std::size_t r = 0; r < n; ++r)
        if (outer_fold[r] == o) out.push_back(r);
    return out;
}

std::vector<std::size_t> FoldPlan::outer_train_rows(int o) const {
    std::vector<std::size_t> out;
    for (std::size_t r = 0; r < n; ++r)
        if (outer_fold[r] != o) out.push_back(r);
    return out;
}

std::vector<std::size_t> FoldPlan::inner_train_rows(int o, int r, int f) const {
    const auto& assignment = inner[static_cast<std::size_t>(o)][static_cast<std::size_t>(r)];
    std::vector<std::size_t> out;
    for (std::size_t row = 0; row < n; ++row)
        if (assignment[row] >= 0 && assignment[row] != f) out.push_back(row);
    return out;
}

std::vector<std::size_t> FoldPlan::inner_test_rows(int o, int r, int f) const {
    const auto& assignment = inner[static_cast<std::size_t>(o)][static_cast<std::size_t>(r)];
    std::vector<std::size_t> out;
    for (std::size_t row = 0; row < n; ++row)
        if (assignment[row] == f) out.push_back(row);
    return out;
}

void FoldPlan::validate() const {
    if (outer_fold.size() != n || inner.size() != static_cast<std::size_t>(k_out))
        fail(Errc::shape_mismatch, "fold plan arrays inconsistent with n/k_out");
    std::vector<std::size_t> outer_sizes(static_cast<std::size_t>(k_out), 0);
    for (std::size_t r = 0; r < n; ++r) {
        if (outer_fold[r] < 0 || outer_fold[r] >= k_out)
            fail(Errc::shape_mismatch, "row outside outer fold range");
        ++outer_sizes[static_cast<std::size_t>(outer_fold[r])];
    }
    for (std::size_t o = 0; o < static_cast<std::size_t>(k_out); ++o) {
        if (outer_sizes[o] == 0) fail(Errc::too_few_rows, "empty outer fold");
        if (inner[o].size() != static_cast<std::size_t>(repeats))
            fail(Errc::shape_mismatch, "inner repeats inconsistent");
        for (const auto& assignment : inner[o]) {
            if (assignment.size() != n) fail(Errc::shape_mismatch, "inner assignment size");
            for (std::size_t r = 0; r < n; ++r) {
                const bool in_outer_test = outer_fold[r] == static_cast<int>(o);
                if (in_outer_test && assignment[r] != -1)
                    fail(Errc::precondition,
                         "outer-test row assigned to an inner fold of its own split");
                if (!in_outer_test && (assignment[r] < 0 || assignment[r] >= k_in))
                    fail(Errc::precondition, "outer-train row missing an inner fold");
            }
        }
    }
}

FoldPlan make_fold_plan(std::size_t n, const std::vector<double>* binary_labels, int k_out,
                        int k_in, int repeats, std::uint64_t seed) {
    if (k_out < 2 || k_in < 2) fail(Errc::precondition, "K_out and K_in must be >= 2");
    if (repeats < 1) fail(Errc::precondition, "repeats must be >= 1");
    if (n < static_cast<std::size_t>(k_out) * static_cast<std::size_t>(k_in))
        fail(Errc::too_few_rows, "need at least K_out*K_in rows, got " + std::to_string(n));
    if (binary_labels && binary_labels->size() != n)
        fail(Errc::shape_mismatch, "labels length differs from n");

    FoldPlan plan;
    plan.k_out = k_out;
    plan.k_in = k_in;
    plan.repeats = repeats;
    plan.seed = seed;
    plan.n = n;

    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    Rng outer_rng = Rng::derive(seed, 0);
    plan.outer_fold = deal_folds(all, binary_labels, k_out, outer_rng, n);

    plan.inner.resize(static_cast<std::size_t>(k_out));
    for (int o = 0; o < k_out; ++o) {
        const std::vector<std::size_t> train = plan.outer_train_rows(o);
        plan.inner[static_cast<std::size_t>(o)].resize(static_cast<std::size_t>(repeats));
        for (int r = 0; r < repeats; ++r) {
            Rng inner_rng = Rng::derive(seed, 1000000ULL + 1000ULL * static_cast<std::uint64_t>(o) +
                                                  static_cast<std::uint64_t>(r));
            plan.inner[static_cast<std::size_t>(o)][static_cast<std::size_t>(r)] =
                deal_folds(train, binary_labels, k_in, inner_rng, n);
        }
    }
    plan.validate();
    return plan;
}

void DeltaReport::finalize() {
    const std::size_t m = folds.size();
    if (m == 0) {
        oriented_mean = 0.0;
        oriented_sd = 0.0;
        share_improve = 0.0;
        return;
    }
    double acc = 0.0, improved = 0.0;
    for (const auto& f : folds) {
        acc += f.oriented;
        if (f.oriented > 0.0) improved += 1.0;
    }
    oriented_mean = acc / static_cast<double>(m);
    share_improve = improved / static_cast<double>(m);
    if (m >= 2) {
        double ss = 0.0;
        for (const auto& f : folds) {
            const double d = f.oriented - oriented_mean;
            ss += d * d;
        }
        oriented_sd = std::sqrt(ss / static_cast<double>(m - 1));
    } else {
        oriented_sd = 0.0;
    }
}

std::string_view to_string(TriageLabel label) {
    switch (label) {
        case TriageLabel::signal: return "signal";
        case TriageLabel::weak_signal: return "weak_signal";
        case TriageLabel::noise_like: return "noise_like";
    }
    return "noise_like";
}

TriageLabel classify(double oriented_mean, double share_improve,
                     const TriageThresholds& thresholds) {
    if (share_improve >= thresholds.signal_share && oriented_mean > 0.0)
        return TriageLabel::signal;
    if (share_improve >= thresholds.weak_share && oriented_mean > 0.0)
        return TriageLabel::weak_signal;
    return TriageLabel::noise_like;
}

TriageLabel classify(const DeltaReport& report, const TriageThresholds& thresholds) {
    return classify(report.oriented_mean, report.share_improve, thresholds);
}

Metric primary_metric(const OutcomeSpec& outcome) {
    return outcome.kind == OutcomeSpec::Kind::binary ? Metric::auc : Metric::r2;
}

std::vector<Metric> default_metrics(const OutcomeSpec& outcome) {
    if (outcome.kind == OutcomeSpec::Kind::binary) return {Metric::auc, Metric::logloss};
    return {Metric::r2, Metric::rmse};
}

EvalContext make_eval_context(const Instrument& instrument, const HarmonizedMatrix& h,
                              const OutcomeSpec& outcome,
                              const std::vector<HarmonizationRule>& rules, const ModelSpec& model,
                              const ScoringRule& scoring) {
    EvalContext ctx;
    ctx.instrument = &instrument;
    ctx.outcome = outcome;
    ctx.h = h;
    ctx.model = model;
    ctx.model.task = outcome.kind == OutcomeSpec::Kind::binary ? ModelSpec::Task::binary
                                                               : ModelSpec::Task::continuous;
    ctx.scoring = scoring;

    // The z-scoring rule standardizes every scored item inside the fold.
    ctx.effective_rules = rules;
    if (scoring.kind == ScoringKind::zscore_then_mean)
        for (auto& rule : ctx.effective_rules)
            if (rule.kind != RuleKind::drop) rule.standardize = true;

    // Baseline covariates: explicit list, else every usage=control item that
    // survived harmonization.
    if (!outcome.covariate_item_ids.empty()) {
        ctx.baseline_items = outcome.covariate_item_ids;
        for (const auto& id : ctx.baseline_items) {
            if (id == outcome.outcome_id)
                fail(Errc::precondition,
                     "outcome '" + id + "' cannot serve as its own covariate");
            if (!h.has_col(id))
                fail(Errc::unknown_item, "baseline covariate '" + id + "' not harmonized");
        }
    } else {
        for (const auto& item : instrument.items())
            if (item.usage == Usage::control && h.has_col(item.item_id))
                ctx.baseline_items.push_back(item.item_id);
    }

    const std::size_t y_col = h.col_index(outcome.outcome_id);
    std::optional<std::size_t> filter_col;
    if (outcome.subsample_filter) filter_col = h.col_index(outcome.subsample_filter->item_id);

    std::vector<std::size_t> baseline_cols;
    for (const auto& id : ctx.baseline_items) baseline_cols.push_back(h.col_index(id));

    for (std::size_t r = 0; r < h.n_rows(); ++r) {
        const double target = h.at(r, y_col);
        if (is_missing(target)) {
            ++ctx.dropped_missing_outcome;
            continue;
        }
        if (outcome.kind == OutcomeSpec::Kind::binary && target != 0.0 && target != 1.0)
            fail(Errc::schema_error, "binary outcome '" + outcome.outcome_id +
                                         "' has non-0/1 value after harmonization");
        if (filter_col) {
            const double fv = h.at(r, *filter_col);
            if (is_missing(fv) || fv != outcome.subsample_filter->equals) {
                ++ctx.dropped_by_filter;
                continue;
            }
        }
        bool complete = true;
        for (std::size_t c : baseline_cols)
            if (is_missing(h.at(r, c))) {
                complete = false;
                break;
            }
        if (!complete) {
            ++ctx.dropped_missing_baseline;
            continue;
        }
        ctx.analysis_rows.push_back(r);
        ctx.y.push_back(target);
    }
    return ctx;
}

namespace {

// Scores and model targets for one fold, everything fitted on train rows.
struct FoldFrame {
    ScoreMatrix scores;          // analysis rows order == ctx.analysis_rows
    HarmonizedMatrix transformed; // full matrix, train-stat transformed
    std::vector<std::string> degenerate_items;
};

FoldFrame build_fold_frame(const EvalContext& ctx, const MappingMatrix& mapping,
                           const std::vector<std::size_t>& train_analysis_rows) {
    std::vector<std::size_t> train_matrix_rows;
    train_matrix_rows.reserve(train_analysis_rows.size());
    for (std::size_t idx : train_analysis_rows)
        train_matrix_rows.push_back(ctx.analysis_rows[idx]);

    FoldFrame frame;
    const FoldTransform t = fit_fold_transform(ctx.h, train_matrix_rows, ctx.effective_rules);
    frame.degenerate_items = t.degenerate_items;
    frame.transformed = apply_fold_transform(ctx.h, t);

    const MappingMatrix* effective_mapping = &mapping;
    MappingMatrix reweighted;
    if (ctx.scoring.kind == ScoringKind::coverage_reweighted_mean) {
        const CoverageWeights c = compute_coverage(frame.transformed, train_matrix_rows);
        reweighted = reweight_by_coverage(mapping, c);
        effective_mapping = &reweighted;
    }
    frame.scores = build_scores(frame.transformed, *effective_mapping, ctx.scoring,
                                *ctx.instrument);
    if (ctx.scoring.post_standardize) {
        const ScoreStandardization stats =
            fit_score_standardization(frame.scores, train_matrix_rows);
        apply_score_standardization(frame.scores, stats);
    }
    return frame;
}

struct CandidateFoldResult {
    bool evaluated = false;
    std::vector<double> base_metric;
    std::vector<double> aug_metric;
};

// Fits baseline and baseline+candidate on identical rows and evaluates every
// metric on the held-out rows.
CandidateFoldResult evaluate_candidate_fold(
    const EvalContext& ctx, const FoldFrame& frame, const std::string& candidate,
    const std::vector<Metric>& metrics, const std::set<std::string>& baseline_score_subdims,
    const std::vector<std::size_t>& train_idx, const std::vector<std::size_t>& test_idx) {
    CandidateFoldResult result;
    if (!frame.scores.has_col(candidate)) return result;
    const std::size_t cand_col = frame.scores.col_index(candidate);

    std::vector<std::size_t> base_score_cols;
    for (const auto& id : baseline_score_subdims) {
        if (id == candidate) continue;
        if (frame.scores.has_col(id)) base_score_cols.push_back(frame.scores.col_index(id));
    }

    // frame.scores spans the full matrix rows; analysis indices map through
    // ctx.analysis_rows.
    const auto usable = [&](std::size_t analysis_idx) {
        const std::size_t row = ctx.analysis_rows[analysis_idx];
        if (is_missing(frame.scores.at(row, cand_col))) return false;
        for (std::size_t c : base_score_cols)
            if (is_missing(frame.scores.at(row, c))) return false;
        return true;
    };

    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t idx : train_idx)
        if (usable(idx)) train_rows.push_back(idx);
    for (std::size_t idx : test_idx)
        if (usable(idx)) test_rows.push_back(idx);
    if (train_rows.size() < 8 || test_rows.size() < 2) return result;

    const auto gather_y = [&](const std::vector<std::size_t>& rows) {
        std::vector<double> out;
        out.reserve(rows.size());
        for (std::size_t idx : rows) out.push_back(ctx.y[idx]);
        return out;
    };
    const auto gather_item_col = [&](const std::string& item,
                                     const std::vector<std::size_t>& rows) {
        const std::size_t c = frame.transformed.col_index(item);
        std::vector<double> out;
        out.reserve(rows.size());
        for (std::size_t idx : rows) out.push_back(frame.transformed.at(ctx.analysis_rows[idx], c));
        return out;
    };
    const auto gather_score_col = [&](std::size_t c, const std::vector<std::size_t>& rows) {
        std::vector<double> out;
        out.reserve(rows.size());
        for (std::size_t idx : rows) out.push_back(frame.scores.at(ctx.analysis_rows[idx], c));
        return out;
    };

    const std::vector<double> y_train = gather_y(train_rows);
    const std::vector<double> y_test = gather_y(test_rows);
    if (ctx.model.task == ModelSpec::Task::binary) {
        double pos = 0.0;
        for (double v : y_train) pos += v;
        if (pos == 0.0 || pos == static_cast<double>(y_train.size())) return result;
        bool test_pos = false, test_neg = false;
        for (double v : y_test) (v == 1.0 ? test_pos : test_neg) = true;
        if (!test_pos || !test_neg) return result;
    }

    Design base_train, base_test;
    for (const auto& item : ctx.baseline_items) {
        base_train.add_col(gather_item_col(item, train_rows));
        base_test.add_col(gather_item_col(item, test_rows));
    }
    for (std::size_t c : base_score_cols) {
        base_train.add_col(gather_score_col(c, train_rows));
        base_test.add_col(gather_score_col(c, test_rows));
    }
    base_train.n = y_train.size();
    base_test.n = y_test.size();

    Design aug_train = base_train, aug_test = base_test;
    aug_train.add_col(gather_score_col(cand_col, train_rows));
    aug_test.add_col(gather_score_col(cand_col, test_rows));

    const FitResult base_fit = fit_model(base_train, y_train, ctx.model);
    const FitResult aug_fit = fit_model(aug_train, y_train, ctx.model);
    const std::vector<double> base_pred = predict(base_test, base_fit, ctx.model.task);
    const std::vector<double> aug_pred = predict(aug_test, aug_fit, ctx.model.task);

    result.evaluated = true;
    for (Metric m : metrics) {
        result.base_metric.push_back(compute_metric(m, base_pred, y_test));
        result.aug_metric.push_back(compute_metric(m, aug_pred, y_test));
    }
    return result;
}

struct InnerFoldRef {
    int outer, repeat, fold;
};

std::vector<DeltaReport> evaluate_over_folds(
    const EvalContext& ctx, const MappingMatrix& mapping,
    const std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>>& fold_rows,
    const std::vector<InnerFoldRef>& fold_refs, const std::vector<std::string>& candidates,
    const std::vector<Metric>& metrics, const std::set<std::string>& baseline_score_subdims) {
    // Coverage counts come from the raw (untransformed) scores; the
    // missingness pattern is fold-invariant.
    const ScoreMatrix raw_scores = build_scores(ctx.h, mapping, ctx.scoring, *ctx.instrument);

    struct PerFold {
        std::vector<CandidateFoldResult> per_candidate;
    };
    std::vector<PerFold> results(fold_rows.size());

    parallel_for(
        fold_rows.size(),
        [&](std::size_t i) {
            const auto& [train_idx, test_idx] = fold_rows[i];
            const FoldFrame frame = build_fold_frame(ctx, mapping, train_idx);
            results[i].per_candidate.resize(candidates.size());
            for (std::size_t c = 0; c < candidates.size(); ++c)
                results[i].per_candidate[c] =
                    evaluate_candidate_fold(ctx, frame, candidates[c], metrics,
                                            baseline_score_subdims, train_idx, test_idx);
        },
        worker_threads());

    std::vector<DeltaReport> reports;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        for (std::size_t m = 0; m < metrics.size(); ++m) {
            DeltaReport report;
            report.candidate = candidates[c];
            report.outcome_id = ctx.outcome.outcome_id;
            report.metric = metrics[m];
            for (std::size_t i = 0; i < fold_rows.size(); ++i) {
                const CandidateFoldResult& r = results[i].per_candidate[c];
                if (!r.evaluated) continue;
                FoldDelta fd;
                fd.outer = fold_refs[i].outer;
                fd.repeat = fold_refs[i].repeat;
                fd.inner = fold_refs[i].fold;
                fd.baseline = r.base_metric[m];
                fd.augmented = r.aug_metric[m];
                fd.delta = fd.augmented - fd.baseline;
                fd.oriented = higher_is_better(metrics[m]) ? fd.delta : -fd.delta;
                report.folds.push_back(fd);
            }
            report.finalize();
            if (raw_scores.has_col(candidates[c])) {
                const std::size_t col = raw_scores.col_index(candidates[c]);
                report.item_count = raw_scores.items_per_subdim[col];
                for (std::size_t row : ctx.analysis_rows)
                    if (!is_missing(raw_scores.at(row, col))) ++report.n_rows;
            }
            reports.push_back(std::move(report));
        }
    }
    return reports;
}

} // namespace

std::vector<DeltaReport> incremental_validity(const EvalContext& ctx, const MappingMatrix& mapping,
                                              const FoldPlan& plan,
                                              const std::vector<std::string>& candidates,
                                              const std::vector<Metric>& metrics,
                                              const std::set<std::string>& baseline_score_subdims,
                                              std::optional<int> outer_split) {
    plan.validate();
    if (plan.n != ctx.analysis_rows.size())
        fail(Errc::shape_mismatch, "fold plan built for a different analysis sample");
    for (const auto& candidate : candidates)
        for (const auto& item : ctx.baseline_items)
            if (candidate == item)
                fail(Errc::precondition, "candidate '" + candidate + "' is a baseline covariate");

    std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> fold_rows;
    std::vector<InnerFoldRef> fold_refs;
    for (int o = 0; o < plan.k_out; ++o) {
        if (outer_split && *outer_split != o) continue;
        for (int r = 0; r < plan.repeats; ++r)
            for (int f = 0; f < plan.k_in; ++f) {
                fold_rows.emplace_back(plan.inner_train_rows(o, r, f),
                                       plan.inner_test_rows(o, r, f));
                fold_refs.push_back({o, r, f});
            }
    }
    return evaluate_over_folds(ctx, mapping, fold_rows, fold_refs, candidates, metrics,
                               baseline_score_subdims);
}

std::vector<DeltaReport> outer_evaluate(const EvalContext& ctx, const FrozenArtifacts& frozen,
                                        const FoldPlan& plan,
                                        const std::vector<std::string>& candidates,
                                        const std::vector<Metric>& metrics,
                                        const std::set<std::string>& baseline_score_subdims,
                                        std::optional<int> only_split) {
    plan.validate();
    if (!frozen.taxonomy || !frozen.mapping) fail(Errc::precondition, "missing frozen artifacts");
    if (frozen.mapping->taxonomy_version() != frozen.taxonomy->version())
        fail(Errc::stale_version,
             "frozen mapping bound to taxonomy v" +
                 std::to_string(frozen.mapping->taxonomy_version()) + " but taxonomy is v" +
                 std::to_string(frozen.taxonomy->version()));

    std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> fold_rows;
    std::vector<InnerFoldRef> fold_refs;
    for (int o = 0; o < plan.k_out; ++o) {
        if (only_split && *only_split != o) continue;
        fold_rows.emplace_back(plan.outer_train_rows(o), plan.outer_test_rows(o));
        fold_refs.push_back({o, 0, -1});
    }
    return evaluate_over_folds(ctx, *frozen.mapping, fold_rows, fold_refs, candidates, metrics,
                               baseline_score_subdims);
}

ScoreMatrix scores_for_rows(const EvalContext& ctx, const MappingMatrix& mapping,
                            const std::vector<std::size_t>& train_rows,
                            std::vector<std::string>* degenerate_items) {
    const FoldFrame frame = build_fold_frame(ctx, mapping, train_rows);
    if (degenerate_items) *degenerate_items = frame.degenerate_items;
    return subset_score_rows(frame.scores, ctx.analysis_rows);
}

} // namespace mval
