#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mval/csv.hpp"
#include "mval/diagnostics.hpp"
#include "mval/parallel.hpp"
#include "mval/pipeline.hpp"
#include "mval/placebo.hpp"
#include "mval/proposer.hpp"
#include "mval/refine.hpp"
#include "mval/synth.hpp"

namespace fs = std::filesystem;
using mval::RunConfig;
using ordered_json = nlohmann::ordered_json;

namespace {

void emit_manifest(const RunConfig& config, const std::string& command,
                   const std::string& manifest_path) {
    fs::create_directories(fs::path(manifest_path).parent_path().empty()
                               ? fs::path(".")
                               : fs::path(manifest_path).parent_path());
    ordered_json j = ordered_json::parse(config.to_json_text());
    j["command"] = command;
    std::ofstream out(manifest_path, std::ios::binary);
    if (!out) mval::fail(mval::Errc::io_error, "cannot write " + manifest_path);
    out << j.dump(2) << '\n';
}

void emit_dir_manifest(const RunConfig& config, const std::string& command) {
    fs::create_directories(config.out_dir);
    emit_manifest(config, command, (fs::path(config.out_dir) / "manifest.json").string());
}

// common flags shared by the evaluation-style subcommands
void add_input_options(CLI::App* cmd, RunConfig& config) {
    cmd->add_option("--instrument", config.instrument_path, "instrument JSON");
    cmd->add_option("--responses", config.responses_path, "responses CSV");
    cmd->add_option("--rules", config.rules_path, "harmonization rules JSON");
    cmd->add_option("--taxonomy", config.taxonomy_path, "taxonomy JSON");
    cmd->add_option("--mapping", config.mapping_path, "mapping JSON");
    cmd->add_option("--outcomes", config.outcomes_path, "outcome specs JSON");
    cmd->add_option("--missing-token", config.missing_tokens,
                    "tokens treated as missing (repeatable)");
}

void add_eval_options(CLI::App* cmd, RunConfig& config, bool* seed_seen) {
    cmd->add_option("--tau", config.tau, "sparsify: drop weights below tau, renormalize");
    cmd->add_option("--top-m", config.top_m, "sparsify: keep top-m weights, renormalize");
    cmd->add_flag("--tighten", config.tighten, "one primary plus bounded secondary per row");
    cmd->add_option("--outer-folds", config.k_out, "outer evaluation folds");
    cmd->add_option("--inner-folds", config.k_in, "inner folds per repeat");
    cmd->add_option("--repeats", config.repeats, "inner repeats");
    cmd->add_option("--seed", config.seed, "run seed (mandatory)")->each([seed_seen](std::string) {
        *seed_seen = true;
    });
    cmd->add_option("--scoring-rule", config.scoring_rule,
                    "weighted_mean|weighted_sum|zscore_then_mean|coverage_reweighted_mean");
    cmd->add_option("--lambda", config.lambda, "model ridge strength");
    cmd->add_option("--overlap-cutoff", config.overlap_cutoff, "|rho| cutoff for overlap flags");
    cmd->add_option("--closeness", config.closeness, "top-2 weight gap for cross-loading flags");
    cmd->add_option("--threads", config.threads, "worker threads (0 = hardware)");
    cmd->add_option("--signal-share", config.thresholds.signal_share, "signal share threshold");
    cmd->add_option("--weak-share", config.thresholds.weak_share, "weak-signal share threshold");
}

std::vector<mval::DeltaReport> merge_fold_reports(std::vector<mval::DeltaReport> accumulated,
                                                  const std::vector<mval::DeltaReport>& extra) {
    for (const auto& report : extra) {
        bool merged = false;
        for (auto& target : accumulated) {
            if (target.candidate == report.candidate && target.metric == report.metric &&
                target.outcome_id == report.outcome_id) {
                target.folds.insert(target.folds.end(), report.folds.begin(),
                                    report.folds.end());
                target.n_rows = std::max(target.n_rows, report.n_rows);
                target.item_count = std::max(target.item_count, report.item_count);
                merged = true;
                break;
            }
        }
        if (!merged) accumulated.push_back(report);
    }
    for (auto& report : accumulated) report.finalize();
    return accumulated;
}

int run_synth(const std::string& spec_path, RunConfig& config, bool seed_seen,
              std::size_t n_override) {
    mval::SynthSpec spec =
        spec_path.empty() ? mval::default_synth_spec() : mval::load_synth_spec(spec_path);
    if (seed_seen) spec.seed = config.seed;
    if (n_override > 0) spec.n = n_override;
    const mval::SynthData data = mval::generate(spec);
    mval::write_synth(config.out_dir, data);
    emit_dir_manifest(config, "synth");
    std::cout << "synth: wrote " << data.instrument.size() << " items x " << spec.n
              << " respondents to " << config.out_dir << "\n";
    return 0;
}

int run_harmonize(RunConfig& config, const std::string& out_file) {
    const mval::Instrument instrument = mval::load_instrument(config.instrument_path);
    const mval::ResponseMatrix responses =
        mval::load_responses(config.responses_path, instrument, config.missing_tokens);
    const auto rules = mval::load_rules(config.rules_path);
    mval::HarmonizeReport report;
    const mval::HarmonizedMatrix h = mval::apply_rules(responses, rules, instrument, &report);
    mval::write_harmonized(out_file, h);
    emit_manifest(config, "harmonize", out_file + ".manifest.json");
    std::size_t induced = 0;
    for (const auto& [item, count] : report.induced_missing) induced += count;
    std::cout << "harmonize: " << h.n_rows() << " rows x " << h.n_cols() << " columns, "
              << induced << " rule-induced missing cells -> " << out_file << "\n";
    return 0;
}

int run_score(RunConfig& config, const std::string& out_file, bool full_transform) {
    const mval::LoadedArtifacts artifacts = mval::load_artifacts(config);
    mval::HarmonizedMatrix h = artifacts.harmonized;
    if (full_transform) {
        std::vector<std::size_t> all_rows(h.n_rows());
        for (std::size_t i = 0; i < all_rows.size(); ++i) all_rows[i] = i;
        const mval::FoldTransform t = mval::fit_fold_transform(h, all_rows, artifacts.rules);
        h = mval::apply_fold_transform(h, t);
    }
    const mval::ScoringRule rule = mval::scoring_rule_from(config);
    mval::MappingMatrix mapping = artifacts.mapping;
    if (rule.kind == mval::ScoringKind::coverage_reweighted_mean) {
        std::vector<std::size_t> all_rows(h.n_rows());
        for (std::size_t i = 0; i < all_rows.size(); ++i) all_rows[i] = i;
        mapping = mval::reweight_by_coverage(mapping, mval::compute_coverage(h, all_rows));
    }
    mval::ScoreMatrix scores = mval::build_scores(h, mapping, rule, artifacts.instrument);
    if (rule.post_standardize && full_transform) {
        std::vector<std::size_t> all_rows(scores.n_rows());
        for (std::size_t i = 0; i < all_rows.size(); ++i) all_rows[i] = i;
        mval::apply_score_standardization(scores,
                                          mval::fit_score_standardization(scores, all_rows));
    }
    mval::write_scores(out_file, scores);
    emit_manifest(config, "score", out_file + ".manifest.json");
    std::cout << "score: " << scores.n_rows() << " respondents x " << scores.n_cols()
              << " subdimensions -> " << out_file << "\n";
    return 0;
}

// Structural artifact checks shared by validate/diagnose/refine. Returns
// findings; throws UnknownSubdimension for stale references.
mval::ValidationReport check_artifacts(const mval::LoadedArtifacts& artifacts) {
    mval::ValidationReport merged = mval::validate_taxonomy(artifacts.taxonomy);
    const mval::ValidationReport mapping_report =
        mval::validate_mapping(artifacts.mapping, artifacts.taxonomy, &artifacts.instrument);
    for (const auto& finding : mapping_report.findings) {
        if (finding.code == "stale_subdim")
            mval::fail(mval::Errc::unknown_subdimension,
                       finding.subject + ": " + finding.detail);
        merged.findings.push_back(finding);
    }
    return merged;
}

void write_findings(const std::string& path, const mval::ValidationReport& report) {
    ordered_json out = ordered_json::array();
    for (const auto& f : report.findings)
        out.push_back({{"code", f.code}, {"subject", f.subject}, {"detail", f.detail}});
    std::ofstream file(path, std::ios::binary);
    file << out.dump(2) << '\n';
}

int run_validate(RunConfig& config) {
    emit_dir_manifest(config, "validate");
    const mval::LoadedArtifacts artifacts = mval::load_artifacts(config);
    const mval::ValidationReport findings = check_artifacts(artifacts);
    write_findings((fs::path(config.out_dir) / "findings.json").string(), findings);
    if (!findings.ok()) {
        std::cout << "validate: " << findings.findings.size()
                  << " validation findings; see findings.json\n";
        return 1;
    }

    const auto frames = mval::build_outcome_frames(artifacts, config);
    const auto candidates =
        mval::candidate_leaves(artifacts.mapping, artifacts.taxonomy, artifacts.instrument);
    std::set<std::string> baseline_scores;
    for (const auto& s : artifacts.taxonomy.subdimensions())
        if (s.anchored) baseline_scores.insert(s.subdim_id);

    std::vector<mval::DeltaReport> reports;
    for (const auto& frame : frames) {
        auto outcome_reports = mval::incremental_validity(
            frame.context, artifacts.mapping, frame.plan, candidates,
            mval::default_metrics(frame.context.outcome), baseline_scores);
        reports.insert(reports.end(), outcome_reports.begin(), outcome_reports.end());
    }
    mval::write_delta_reports_csv((fs::path(config.out_dir) / "deltas.csv").string(), reports,
                                  config.thresholds);
    mval::write_delta_reports_json((fs::path(config.out_dir) / "deltas.json").string(), reports,
                                   config.thresholds);
    mval::write_triage_table((fs::path(config.out_dir) / "triage.csv").string(), reports,
                             artifacts.taxonomy, config.thresholds);
    std::cout << "validate: " << reports.size() << " delta reports over " << candidates.size()
              << " candidates -> " << config.out_dir << "\n";
    return 0;
}

int run_diagnose(RunConfig& config) {
    emit_dir_manifest(config, "diagnose");
    const mval::LoadedArtifacts artifacts = mval::load_artifacts(config);
    const mval::ValidationReport findings = check_artifacts(artifacts);
    write_findings((fs::path(config.out_dir) / "findings.json").string(), findings);
    if (!findings.ok()) return 1;

    // full-sample transform for standalone diagnostics
    mval::HarmonizedMatrix h = artifacts.harmonized;
    std::vector<std::size_t> all_rows(h.n_rows());
    for (std::size_t i = 0; i < all_rows.size(); ++i) all_rows[i] = i;
    const mval::FoldTransform t = mval::fit_fold_transform(h, all_rows, artifacts.rules);
    h = mval::apply_fold_transform(h, t);
    const mval::ScoringRule rule = mval::scoring_rule_from(config);
    mval::ScoreMatrix scores = mval::build_scores(h, artifacts.mapping, rule,
                                                  artifacts.instrument);
    if (rule.post_standardize)
        mval::apply_score_standardization(scores,
                                          mval::fit_score_standardization(scores, all_rows));

    const mval::OverlapReport overlap =
        mval::correlation_screen(scores, config.overlap_cutoff, all_rows);
    mval::write_overlap_csv((fs::path(config.out_dir) / "overlap.csv").string(), overlap);
    mval::write_overlap_json((fs::path(config.out_dir) / "overlap.json").string(), overlap);

    const mval::CrossLoadingReport cross = mval::cross_loading_concentration(
        artifacts.mapping, config.closeness, &artifacts.instrument);
    {
        ordered_json j;
        j["closeness"] = cross.closeness;
        j["considered"] = cross.considered;
        j["flagged_share"] = cross.flagged_share;
        ordered_json flags = ordered_json::array();
        for (const auto& f : cross.flags)
            flags.push_back(
                {{"item", f.item_id}, {"top1", f.top1}, {"top2", f.top2}, {"gap", f.gap}});
        j["flags"] = std::move(flags);
        std::ofstream out(fs::path(config.out_dir) / "cross_loading.json", std::ios::binary);
        out << j.dump(2) << '\n';
    }

    const auto coverage = mval::score_coverage(scores);
    const auto limits = mval::data_limit_flags(scores, coverage, config.limit_thresholds,
                                               t.degenerate_items, &artifacts.mapping);
    {
        ordered_json j = ordered_json::array();
        for (const auto& flag : limits)
            j.push_back({{"subdim", flag.subdim_id},
                         {"reasons", flag.reasons},
                         {"thresholds",
                          {{"min_n", flag.thresholds.min_n},
                           {"min_items", flag.thresholds.min_items},
                           {"min_sd", flag.thresholds.min_sd}}}});
        std::ofstream out(fs::path(config.out_dir) / "data_limits.json", std::ios::binary);
        out << j.dump(2) << '\n';
    }
    std::cout << "diagnose: " << overlap.flagged.size() << " overlap pairs, "
              << cross.flags.size() << " cross-loading flags, " << limits.size()
              << " data-limit flags -> " << config.out_dir << "\n";
    return 0;
}

int run_refine(RunConfig& config) {
    emit_dir_manifest(config, "refine");
    const mval::LoadedArtifacts artifacts = mval::load_artifacts(config);
    const mval::ValidationReport findings = check_artifacts(artifacts);
    write_findings((fs::path(config.out_dir) / "findings.json").string(), findings);
    if (!findings.ok()) return 1;

    const auto frames = mval::build_outcome_frames(artifacts, config);

    std::unique_ptr<mval::Proposer> proposer;
    const std::string audit_dir = (fs::path(config.out_dir) / "audit").string();
    if (!config.endpoint_url.empty()) {
        mval::EndpointConfig endpoint;
        endpoint.url = config.endpoint_url;
        endpoint.model = config.endpoint_model;
        endpoint.temperature = config.endpoint_temperature;
        proposer = std::make_unique<mval::RemoteProposer>(endpoint, audit_dir);
    } else if (!config.proposals_dir.empty()) {
        proposer = std::make_unique<mval::FixtureProposer>(config.proposals_dir, audit_dir);
    } else {
        mval::fail(mval::Errc::precondition,
                   "refine needs --proposals DIR or an --endpoint-url");
    }

    mval::LoopConfig loop_config;
    loop_config.stopping = config.stopping;
    loop_config.policy.thresholds = config.thresholds;
    loop_config.policy.discard_after = config.discard_after;
    loop_config.policy.cc_pass_share = config.cc_pass_share;
    loop_config.overlap_cutoff = config.overlap_cutoff;
    loop_config.closeness = config.closeness;
    loop_config.limit_thresholds = config.limit_thresholds;

    std::vector<int> splits;
    if (config.all_splits)
        for (int o = 0; o < config.k_out; ++o) splits.push_back(o);
    else
        splits.push_back(config.outer_split);

    std::vector<mval::DeltaReport> outer_reports;
    for (int split : splits) {
        loop_config.outer_split = split;
        mval::LoopInputs inputs;
        inputs.instrument = &artifacts.instrument;
        for (const auto& frame : frames) {
            inputs.contexts.push_back(&frame.context);
            inputs.plans.push_back(&frame.plan);
        }
        inputs.taxonomy = artifacts.taxonomy;
        inputs.mapping = artifacts.mapping;

        const mval::LoopResult result = mval::run_loop(inputs, *proposer, loop_config);
        const std::string suffix = config.all_splits ? "_split" + std::to_string(split) : "";
        mval::write_iteration_log(
            (fs::path(config.out_dir) / ("iterations" + suffix + ".jsonl")).string(),
            result.rounds);
        mval::write_taxonomy(
            (fs::path(config.out_dir) / ("taxonomy_final" + suffix + ".json")).string(),
            result.final_taxonomy);
        mval::write_mapping(
            (fs::path(config.out_dir) / ("mapping_final" + suffix + ".json")).string(),
            result.final_mapping);

        // untouched-fold evaluation of this split's frozen artifacts
        mval::FrozenArtifacts frozen{&result.final_taxonomy, &result.final_mapping};
        const auto final_candidates = mval::candidate_leaves(
            result.final_mapping, result.final_taxonomy, artifacts.instrument);
        std::set<std::string> baseline_scores;
        for (const auto& s : result.final_taxonomy.subdimensions())
            if (s.anchored) baseline_scores.insert(s.subdim_id);
        for (const auto& frame : frames) {
            const auto split_reports = mval::outer_evaluate(
                frame.context, frozen, frame.plan, final_candidates,
                mval::default_metrics(frame.context.outcome), baseline_scores, split);
            outer_reports = merge_fold_reports(std::move(outer_reports), split_reports);
        }
        std::cout << "refine split " << split << ": " << result.rounds.size()
                  << " rounds, status " << result.status << "\n";
    }
    mval::write_delta_reports_csv((fs::path(config.out_dir) / "outer_deltas.csv").string(),
                                  outer_reports, config.thresholds);
    mval::write_delta_reports_json((fs::path(config.out_dir) / "outer_deltas.json").string(),
                                   outer_reports, config.thresholds);
    return 0;
}

int run_placebo(RunConfig& config, const std::string& kind, std::string candidate,
                std::string outcome_id, int draws, bool smooth, bool pooled) {
    emit_dir_manifest(config, "placebo");
    const mval::LoadedArtifacts artifacts = mval::load_artifacts(config);
    const auto frames = mval::build_outcome_frames(artifacts, config);

    const mval::OutcomeFrame* frame = &frames.front();
    if (!outcome_id.empty()) {
        frame = nullptr;
        for (const auto& f : frames)
            if (f.context.outcome.outcome_id == outcome_id) frame = &f;
        if (!frame) mval::fail(mval::Errc::unknown_item, "outcome '" + outcome_id + "'");
    }
    if (candidate.empty())
        mval::fail(mval::Errc::precondition, "placebo needs --candidate SUBDIM");

    std::set<std::string> baseline_scores;
    for (const auto& s : artifacts.taxonomy.subdimensions())
        if (s.anchored) baseline_scores.insert(s.subdim_id);
    const mval::Metric metric = mval::primary_metric(frame->context.outcome);
    const std::optional<int> split =
        pooled ? std::optional<int>{} : std::optional<int>{config.outer_split};

    mval::PlaceboReport report;
    if (kind == "outcome") {
        report = mval::outcome_permutation(frame->context, artifacts.mapping, frame->plan,
                                           candidate, metric, baseline_scores, split, draws,
                                           config.seed, smooth);
    } else if (kind == "mapping") {
        report = mval::mapping_permutation(frame->context, artifacts.mapping, artifacts.taxonomy,
                                           frame->plan, candidate, metric, baseline_scores, split,
                                           draws, config.seed, smooth);
    } else {
        mval::fail(mval::Errc::precondition, "--kind must be outcome or mapping");
    }

    {
        ordered_json j;
        j["kind"] = report.kind;
        j["candidate"] = report.candidate;
        j["outcome"] = report.outcome_id;
        j["metric"] = std::string(mval::to_string(report.metric));
        j["draws"] = report.draws;
        j["seed"] = report.seed;
        j["observed"] = report.observed;
        j["placebo_mean"] = report.mean;
        j["placebo_sd"] = report.sd;
        j["placebo_min"] = report.min;
        j["placebo_max"] = report.max;
        j["p_value"] = report.p_value;
        j["smoothed"] = report.smoothed;
        std::ofstream out(fs::path(config.out_dir) / "placebo.json", std::ios::binary);
        out << j.dump(2) << '\n';
    }
    {
        std::vector<std::vector<std::string>> rows;
        rows.push_back({"draw", "oriented_delta"});
        for (std::size_t d = 0; d < report.draw_deltas.size(); ++d)
            rows.push_back({std::to_string(d), mval::csv::format_double(report.draw_deltas[d])});
        mval::csv::write_file((fs::path(config.out_dir) / "placebo_draws.csv").string(), rows);
    }
    std::cout << "placebo " << kind << ": observed " << report.observed << ", p = "
              << report.p_value << " over " << draws << " draws -> " << config.out_dir << "\n";
    return 0;
}

int run_grid(RunConfig& config, std::vector<double> taus, std::vector<int> top_ms,
             std::vector<double> cutoffs, std::vector<std::string> rules, std::string focus) {
    emit_dir_manifest(config, "grid");
    const mval::LoadedArtifacts artifacts = mval::load_artifacts(config);
    if (taus.empty()) taus = {0.05, 0.10, 0.15};
    if (top_ms.empty()) top_ms = {1, 2, 3};
    if (cutoffs.empty()) cutoffs = {config.overlap_cutoff};
    if (rules.empty()) rules = {config.scoring_rule};

    std::vector<std::vector<std::string>> table;
    table.push_back({"tau", "top_m", "cutoff", "scoring_rule", "focus", "delta_primary_1",
                     "delta_primary_2", "max_abs_rho", "flagged_pairs"});

    for (const std::string& rule_name : rules) {
        RunConfig cell_config = config;
        cell_config.scoring_rule = rule_name;
        for (double tau : taus) {
            for (int m : top_ms) {
                mval::MappingMatrix mapping = artifacts.mapping;
                if (tau > 0.0) mapping = mval::sparsify_threshold(mapping, tau);
                if (m > 0) mapping = mval::sparsify_top_m(mapping, m);

                const auto frames = mval::build_outcome_frames(artifacts, cell_config);
                std::vector<std::string> candidates = mval::candidate_leaves(
                    mapping, artifacts.taxonomy, artifacts.instrument);
                if (!focus.empty()) candidates = {focus};
                std::set<std::string> baseline_scores;
                for (const auto& s : artifacts.taxonomy.subdimensions())
                    if (s.anchored) baseline_scores.insert(s.subdim_id);

                std::vector<mval::DeltaReport> primary;
                for (const auto& frame : frames) {
                    const auto reports = mval::incremental_validity(
                        frame.context, mapping, frame.plan, candidates,
                        {mval::primary_metric(frame.context.outcome)}, baseline_scores);
                    primary.insert(primary.end(), reports.begin(), reports.end());
                }
                std::string cell_focus = focus;
                if (cell_focus.empty()) {
                    double best = -1e300;
                    for (const auto& r : primary)
                        if (r.outcome_id == frames.front().context.outcome.outcome_id &&
                            r.oriented_mean > best) {
                            best = r.oriented_mean;
                            cell_focus = r.candidate;
                        }
                }
                double delta1 = 0.0, delta2 = 0.0;
                bool have2 = frames.size() > 1;
                for (const auto& r : primary) {
                    if (r.candidate != cell_focus) continue;
                    if (r.outcome_id == frames.front().context.outcome.outcome_id)
                        delta1 = r.oriented_mean;
                    else if (have2 && r.outcome_id == frames[1].context.outcome.outcome_id)
                        delta2 = r.oriented_mean;
                }

                // overlap summary per cutoff on the first outcome's sample
                const auto& diag = frames.front();
                std::vector<std::size_t> all_rows(diag.context.analysis_rows.size());
                for (std::size_t i = 0; i < all_rows.size(); ++i) all_rows[i] = i;
                const mval::ScoreMatrix scores =
                    mval::scores_for_rows(diag.context, mapping, all_rows);
                for (double cutoff : cutoffs) {
                    const mval::OverlapReport overlap =
                        mval::correlation_screen(scores, cutoff, all_rows);
                    double max_rho = 0.0;
                    for (std::size_t a = 0; a < scores.n_cols(); ++a)
                        for (std::size_t b = a + 1; b < scores.n_cols(); ++b) {
                            const double rho = mval::pairwise_pearson(scores.col(a),
                                                                      scores.col(b), all_rows);
                            if (!mval::is_missing(rho)) max_rho = std::max(max_rho, std::abs(rho));
                        }
                    table.push_back({mval::csv::format_double(tau), std::to_string(m),
                                     mval::csv::format_double(cutoff), rule_name, cell_focus,
                                     mval::csv::format_double(delta1),
                                     have2 ? mval::csv::format_double(delta2) : "",
                                     mval::csv::format_double(max_rho),
                                     std::to_string(overlap.flagged.size())});
                }
            }
        }
    }
    mval::csv::write_file((fs::path(config.out_dir) / "grid.csv").string(), table);
    std::cout << "grid: " << table.size() - 1 << " cells -> " << config.out_dir << "\n";
    return 0;
}

int run_report(RunConfig& config, const std::string& deltas_path, const std::string& out_file) {
    const std::string text = [&] {
        std::ifstream in(deltas_path, std::ios::binary);
        if (!in) mval::fail(mval::Errc::io_error, "cannot open " + deltas_path);
        std::ostringstream buf;
        buf << in.rdbuf();
        return buf.str();
    }();
    const ordered_json j = ordered_json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_array())
        mval::fail(mval::Errc::schema_error, "deltas JSON must be a list");
    std::vector<mval::DeltaReport> reports;
    for (const auto& rec : j) {
        mval::DeltaReport r;
        r.outcome_id = rec.value("outcome", "");
        r.candidate = rec.at("subdim").get<std::string>();
        r.metric = mval::metric_from_string(rec.value("metric", "auc"));
        r.item_count = rec.value("items", 0ULL);
        r.n_rows = rec.value("n", 0ULL);
        r.oriented_mean = rec.value("delta_mean", 0.0);
        r.oriented_sd = rec.value("delta_sd", 0.0);
        r.share_improve = rec.value("share_improve", 0.0);
        reports.push_back(std::move(r));
    }
    mval::Taxonomy taxonomy;
    if (!config.taxonomy_path.empty()) taxonomy = mval::load_taxonomy(config.taxonomy_path);
    mval::write_triage_table(out_file, reports, taxonomy, config.thresholds);
    emit_manifest(config, "report", out_file + ".manifest.json");
    std::cout << "report: " << reports.size() << " delta rows -> " << out_file << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"survey measurement validation engine"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "start from a saved run manifest")
        ->configurable(false);

    // parse --config first so subcommand flags can override it
    RunConfig config;
    bool seed_seen = false;

    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic survey with known truth");
    std::string synth_spec_path;
    std::size_t synth_n = 0;
    synth_cmd->add_option("--spec", synth_spec_path, "synthetic spec JSON");
    synth_cmd->add_option("--n", synth_n, "override respondent count");
    synth_cmd->add_option("--seed", config.seed, "generator seed")->each([&](std::string) {
        seed_seen = true;
    });
    synth_cmd->add_option("--out", config.out_dir, "output directory")->required();

    auto* harmonize_cmd = app.add_subcommand("harmonize", "apply harmonization rules");
    std::string out_file;
    add_input_options(harmonize_cmd, config);
    harmonize_cmd->add_option("--out", out_file, "harmonized CSV path")->required();

    auto* score_cmd = app.add_subcommand("score", "build respondent scores");
    bool score_full_transform = false;
    add_input_options(score_cmd, config);
    add_eval_options(score_cmd, config, &seed_seen);
    score_cmd->add_option("--out", out_file, "scores CSV path")->required();
    score_cmd->add_flag("--full-transform", score_full_transform,
                        "fit winsorize/standardize on the full sample first");

    auto* validate_cmd = app.add_subcommand("validate", "incremental out-of-sample validity");
    add_input_options(validate_cmd, config);
    add_eval_options(validate_cmd, config, &seed_seen);
    validate_cmd->add_option("--out", config.out_dir, "output directory")->required();

    auto* diagnose_cmd = app.add_subcommand("diagnose", "overlap and data-limit diagnostics");
    add_input_options(diagnose_cmd, config);
    add_eval_options(diagnose_cmd, config, &seed_seen);
    diagnose_cmd->add_option("--out", config.out_dir, "output directory")->required();

    auto* refine_cmd = app.add_subcommand("refine", "iterative refinement loop");
    add_input_options(refine_cmd, config);
    add_eval_options(refine_cmd, config, &seed_seen);
    refine_cmd->add_option("--proposals", config.proposals_dir, "fixture proposer directory");
    refine_cmd->add_option("--endpoint-url", config.endpoint_url, "remote proposer endpoint");
    refine_cmd->add_option("--endpoint-model", config.endpoint_model, "remote model id");
    refine_cmd->add_option("--temperature", config.endpoint_temperature, "remote temperature");
    refine_cmd->add_option("--max-rounds", config.stopping.max_rounds, "refinement round cap");
    refine_cmd->add_option("--plateau-delta", config.stopping.plateau_delta,
                           "plateau threshold on best oriented delta");
    refine_cmd->add_option("--patience", config.stopping.patience, "plateau rounds before stop");
    refine_cmd->add_option("--discard-after", config.discard_after,
                           "consecutive noise rounds before discard");
    refine_cmd->add_option("--outer-split", config.outer_split, "outer split driving the loop");
    refine_cmd->add_flag("--all-splits", config.all_splits, "run the loop per outer split");
    refine_cmd->add_option("--out", config.out_dir, "output directory")->required();

    auto* placebo_cmd = app.add_subcommand("placebo", "permutation placebo diagnostics");
    std::string placebo_kind = "outcome", placebo_candidate, placebo_outcome;
    int placebo_draws = 100;
    bool placebo_smooth = false, placebo_pooled = false;
    add_input_options(placebo_cmd, config);
    add_eval_options(placebo_cmd, config, &seed_seen);
    placebo_cmd->add_option("--kind", placebo_kind, "outcome|mapping")->required();
    placebo_cmd->add_option("--candidate", placebo_candidate, "candidate subdimension")
        ->required();
    placebo_cmd->add_option("--outcome", placebo_outcome, "outcome id (default: first)");
    placebo_cmd->add_option("--draws", placebo_draws, "placebo draws");
    placebo_cmd->add_flag("--smooth", placebo_smooth, "add-one smoothing for the p-value");
    placebo_cmd->add_flag("--pooled", placebo_pooled, "pool inner folds across outer splits");
    placebo_cmd->add_option("--out", config.out_dir, "output directory")->required();

    auto* grid_cmd = app.add_subcommand("grid", "robustness sweep over tau x m x cutoff x rule");
    std::vector<double> grid_taus, grid_cutoffs;
    std::vector<int> grid_ms;
    std::vector<std::string> grid_rules;
    std::string grid_focus;
    add_input_options(grid_cmd, config);
    add_eval_options(grid_cmd, config, &seed_seen);
    grid_cmd->add_option("--taus", grid_taus, "tau grid")->delimiter(',');
    grid_cmd->add_option("--top-ms", grid_ms, "top-m grid")->delimiter(',');
    grid_cmd->add_option("--cutoffs", grid_cutoffs, "overlap cutoff grid")->delimiter(',');
    grid_cmd->add_option("--scoring-rules", grid_rules, "scoring rule grid")->delimiter(',');
    grid_cmd->add_option("--focus", grid_focus, "candidate to summarize (default: best)");
    grid_cmd->add_option("--out", config.out_dir, "output directory")->required();

    auto* report_cmd = app.add_subcommand("report", "render the triage table from deltas JSON");
    std::string report_deltas;
    report_cmd->add_option("--deltas", report_deltas, "deltas JSON from validate")->required();
    report_cmd->add_option("--taxonomy", config.taxonomy_path, "taxonomy JSON (for families)");
    report_cmd->add_option("--signal-share", config.thresholds.signal_share, "signal threshold");
    report_cmd->add_option("--weak-share", config.thresholds.weak_share, "weak threshold");
    report_cmd->add_option("--out", out_file, "triage CSV path")->required();

    for (auto* sub : app.get_subcommands({}))
        sub->add_option("--config", config_path, "start from a saved run manifest");

    // two-pass parse: when --config is given, load the manifest as the
    // baseline and re-parse so explicit flags override it
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    if (!config_path.empty()) {
        try {
            config = mval::load_manifest(config_path);
            app.clear();
            app.parse(argc, argv);
        } catch (const CLI::ParseError& e) {
            return app.exit(e);
        } catch (const mval::Error& e) {
            ordered_json err;
            err["error"] = std::string(mval::errc_name(e.code()));
            err["message"] = e.what();
            std::cerr << err.dump() << "\n";
            return 2;
        }
    }
    if (seed_seen) config.seed_set = true;
    mval::worker_threads() = config.threads;

    try {
        if (synth_cmd->parsed())
            return run_synth(synth_spec_path, config, seed_seen || config.seed_set, synth_n);
        if (harmonize_cmd->parsed()) return run_harmonize(config, out_file);
        if (score_cmd->parsed()) return run_score(config, out_file, score_full_transform);
        if (validate_cmd->parsed()) return run_validate(config);
        if (diagnose_cmd->parsed()) return run_diagnose(config);
        if (refine_cmd->parsed()) return run_refine(config);
        if (placebo_cmd->parsed())
            return run_placebo(config, placebo_kind, placebo_candidate, placebo_outcome,
                               placebo_draws, placebo_smooth, placebo_pooled);
        if (grid_cmd->parsed())
            return run_grid(config, grid_taus, grid_ms, grid_cutoffs, grid_rules, grid_focus);
        if (report_cmd->parsed()) return run_report(config, report_deltas, out_file);
    } catch (const mval::Error& e) {
        ordered_json err;
        err["error"] = std::string(mval::errc_name(e.code()));
        err["message"] = e.what();
        std::cerr << err.dump() << "\n";
        return 2;
    } catch (const std::exception& e) {
        ordered_json err;
        err["error"] = "Unhandled";
        err["message"] = e.what();
        std::cerr << err.dump() << "\n";
        return 2;
    }
    return 0;
}
