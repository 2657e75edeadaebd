#include "mval/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "mval/csv.hpp"

namespace mval {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string RunConfig::to_json_text() const {
    ordered_json j;
    j["inputs"] = {{"instrument", instrument_path}, {"responses", responses_path},
                   {"rules", rules_path},           {"taxonomy", taxonomy_path},
                   {"mapping", mapping_path},       {"outcomes", outcomes_path},
                   {"proposals_dir", proposals_dir}};
    j["endpoint"] = {{"url", endpoint_url},
                     {"model", endpoint_model},
                     {"temperature", endpoint_temperature}};
    j["out_dir"] = out_dir;
    j["mapping_transforms"] = {{"tau", tau},
                               {"top_m", top_m},
                               {"tighten", tighten},
                               {"secondary_lo", secondary_lo},
                               {"secondary_hi", secondary_hi}};
    j["folds"] = {{"k_out", k_out}, {"k_in", k_in}, {"repeats", repeats}};
    j["seed"] = seed;
    j["scoring_rule"] = scoring_rule;
    j["post_standardize"] = post_standardize;
    j["lambda"] = lambda;
    j["overlap_cutoff"] = overlap_cutoff;
    j["closeness"] = closeness;
    j["thresholds"] = {{"signal_share", thresholds.signal_share},
                       {"weak_share", thresholds.weak_share}};
    j["data_limits"] = {{"min_n", limit_thresholds.min_n},
                        {"min_items", limit_thresholds.min_items},
                        {"min_sd", limit_thresholds.min_sd}};
    j["stopping"] = {{"plateau_delta", stopping.plateau_delta},
                     {"patience", stopping.patience},
                     {"max_rounds", stopping.max_rounds}};
    j["discard_after"] = discard_after;
    j["cc_pass_share"] = cc_pass_share;
    j["outer_split"] = outer_split;
    j["all_splits"] = all_splits;
    j["threads"] = threads;
    j["missing_tokens"] = missing_tokens;
    return j.dump(2) + "\n";
}

RunConfig RunConfig::from_json_text(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) fail(Errc::schema_error, "manifest: invalid JSON");
    RunConfig c;
    if (j.contains("inputs")) {
        const auto& in = j.at("inputs");
        c.instrument_path = in.value("instrument", "");
        c.responses_path = in.value("responses", "");
        c.rules_path = in.value("rules", "");
        c.taxonomy_path = in.value("taxonomy", "");
        c.mapping_path = in.value("mapping", "");
        c.outcomes_path = in.value("outcomes", "");
        c.proposals_dir = in.value("proposals_dir", "");
    }
    if (j.contains("endpoint")) {
        c.endpoint_url = j.at("endpoint").value("url", "");
        c.endpoint_model = j.at("endpoint").value("model", "");
        c.endpoint_temperature = j.at("endpoint").value("temperature", 0.0);
    }
    c.out_dir = j.value("out_dir", "");
    if (j.contains("mapping_transforms")) {
        const auto& m = j.at("mapping_transforms");
        c.tau = m.value("tau", 0.0);
        c.top_m = m.value("top_m", 0);
        c.tighten = m.value("tighten", false);
        c.secondary_lo = m.value("secondary_lo", 0.05);
        c.secondary_hi = m.value("secondary_hi", 0.20);
    }
    if (j.contains("folds")) {
        c.k_out = j.at("folds").value("k_out", 5);
        c.k_in = j.at("folds").value("k_in", 5);
        c.repeats = j.at("folds").value("repeats", 5);
    }
    if (j.contains("seed")) {
        c.seed = j.at("seed").get<std::uint64_t>();
        c.seed_set = true;
    }
    c.scoring_rule = j.value("scoring_rule", "weighted_mean");
    c.post_standardize = j.value("post_standardize", true);
    c.lambda = j.value("lambda", 1e-6);
    c.overlap_cutoff = j.value("overlap_cutoff", 0.85);
    c.closeness = j.value("closeness", 0.25);
    if (j.contains("thresholds")) {
        c.thresholds.signal_share = j.at("thresholds").value("signal_share", 0.90);
        c.thresholds.weak_share = j.at("thresholds").value("weak_share", 0.60);
    }
    if (j.contains("data_limits")) {
        c.limit_thresholds.min_n = j.at("data_limits").value("min_n", 100ULL);
        c.limit_thresholds.min_items = j.at("data_limits").value("min_items", 2ULL);
        c.limit_thresholds.min_sd = j.at("data_limits").value("min_sd", 0.05);
    }
    if (j.contains("stopping")) {
        c.stopping.plateau_delta = j.at("stopping").value("plateau_delta", 0.002);
        c.stopping.patience = j.at("stopping").value("patience", 2);
        c.stopping.max_rounds = j.at("stopping").value("max_rounds", 5);
    }
    c.discard_after = j.value("discard_after", 2);
    c.cc_pass_share = j.value("cc_pass_share", 0.60);
    c.outer_split = j.value("outer_split", 0);
    c.all_splits = j.value("all_splits", false);
    c.threads = j.value("threads", 0u);
    if (j.contains("missing_tokens"))
        c.missing_tokens = j.at("missing_tokens").get<std::vector<std::string>>();
    return c;
}

void write_manifest(const RunConfig& config, const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::ofstream out(fs::path(out_dir) / "manifest.json", std::ios::binary);
    if (!out) fail(Errc::io_error, "cannot write manifest in " + out_dir);
    out << config.to_json_text();
}

RunConfig load_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::io_error, "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return RunConfig::from_json_text(buf.str());
}

LoadedArtifacts load_artifacts(const RunConfig& config) {
    LoadedArtifacts a;
    a.instrument = load_instrument(config.instrument_path);
    a.responses = load_responses(config.responses_path, a.instrument, config.missing_tokens);
    a.rules = load_rules(config.rules_path);
    a.taxonomy = load_taxonomy(config.taxonomy_path);
    a.mapping = load_mapping(config.mapping_path);
    a.mapping.bind(a.taxonomy);
    if (config.tau > 0.0) a.mapping = sparsify_threshold(a.mapping, config.tau);
    if (config.top_m > 0) a.mapping = sparsify_top_m(a.mapping, config.top_m);
    if (config.tighten)
        a.mapping = tighten_primary_secondary(a.mapping, config.secondary_lo, config.secondary_hi);
    if (!config.outcomes_path.empty())
        a.outcomes = load_outcomes(config.outcomes_path, a.instrument);
    a.harmonized = apply_rules(a.responses, a.rules, a.instrument, &a.harmonize_report);
    return a;
}

ModelSpec model_spec_from(const RunConfig& config) {
    ModelSpec spec;
    spec.lambda = config.lambda;
    return spec;
}

ScoringRule scoring_rule_from(const RunConfig& config) {
    ScoringRule rule;
    rule.kind = scoring_kind_from_string(config.scoring_rule);
    rule.post_standardize = config.post_standardize;
    return rule;
}

std::vector<OutcomeFrame> build_outcome_frames(const LoadedArtifacts& artifacts,
                                               const RunConfig& config) {
    if (!config.seed_set) fail(Errc::precondition, "seed is mandatory for evaluation runs");
    if (artifacts.outcomes.empty()) fail(Errc::precondition, "no outcomes configured");
    std::vector<OutcomeFrame> frames;
    const ModelSpec model = model_spec_from(config);
    const ScoringRule scoring = scoring_rule_from(config);
    for (const auto& outcome : artifacts.outcomes) {
        OutcomeFrame frame;
        frame.context = make_eval_context(artifacts.instrument, artifacts.harmonized, outcome,
                                          artifacts.rules, model, scoring);
        const std::vector<double>* labels =
            outcome.kind == OutcomeSpec::Kind::binary ? &frame.context.y : nullptr;
        frame.plan = make_fold_plan(frame.context.analysis_rows.size(), labels, config.k_out,
                                    config.k_in, config.repeats, config.seed);
        frames.push_back(std::move(frame));
    }
    return frames;
}

std::vector<std::string> candidate_leaves(const MappingMatrix& mapping, const Taxonomy& taxonomy,
                                          const Instrument& instrument) {
    std::set<std::string> subdims;
    for (const auto& row : mapping.rows()) {
        if (!instrument.contains(row.item_id)) continue;
        const Usage usage = instrument.item(row.item_id).usage;
        if (usage == Usage::outcome || usage == Usage::excluded) continue;
        for (const auto& entry : row.weights)
            if (entry.weight > 0.0 && taxonomy.has_subdim(entry.subdim_id) &&
                taxonomy.is_leaf(entry.subdim_id))
                subdims.insert(entry.subdim_id);
    }
    return {subdims.begin(), subdims.end()};
}

namespace {

std::string label_string(const DeltaReport& report, const TriageThresholds& thresholds) {
    return std::string(to_string(classify(report, thresholds)));
}

} // namespace

void write_delta_reports_csv(const std::string& path, const std::vector<DeltaReport>& reports,
                             const TriageThresholds& thresholds) {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"outcome", "subdim", "metric", "items", "n", "delta_mean", "delta_sd",
                    "share_improve", "label"});
    for (const auto& r : reports)
        rows.push_back({r.outcome_id, r.candidate, std::string(to_string(r.metric)),
                        std::to_string(r.item_count), std::to_string(r.n_rows),
                        csv::format_double(r.oriented_mean), csv::format_double(r.oriented_sd),
                        csv::format_double(r.share_improve), label_string(r, thresholds)});
    csv::write_file(path, rows);
}

void write_delta_reports_json(const std::string& path, const std::vector<DeltaReport>& reports,
                              const TriageThresholds& thresholds) {
    ordered_json out = ordered_json::array();
    for (const auto& r : reports) {
        ordered_json rec;
        rec["outcome"] = r.outcome_id;
        rec["subdim"] = r.candidate;
        rec["metric"] = std::string(to_string(r.metric));
        rec["items"] = r.item_count;
        rec["n"] = r.n_rows;
        rec["delta_mean"] = r.oriented_mean;
        rec["delta_sd"] = r.oriented_sd;
        rec["share_improve"] = r.share_improve;
        rec["label"] = label_string(r, thresholds);
        rec["thresholds"] = {{"signal_share", thresholds.signal_share},
                             {"weak_share", thresholds.weak_share}};
        ordered_json folds = ordered_json::array();
        for (const auto& f : r.folds)
            folds.push_back({{"outer", f.outer},
                             {"repeat", f.repeat},
                             {"inner", f.inner},
                             {"baseline", f.baseline},
                             {"augmented", f.augmented},
                             {"delta", f.delta},
                             {"oriented", f.oriented}});
        rec["folds"] = std::move(folds);
        out.push_back(std::move(rec));
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) fail(Errc::io_error, "cannot write " + path);
    f << out.dump(2) << '\n';
}

void write_overlap_csv(const std::string& path, const OverlapReport& report) {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"subdim_a", "subdim_b", "rho"});
    for (const auto& pair : report.flagged)
        rows.push_back({pair.subdim_a, pair.subdim_b, csv::format_double(pair.rho)});
    csv::write_file(path, rows);
}

void write_overlap_json(const std::string& path, const OverlapReport& report) {
    ordered_json out;
    out["cutoff"] = report.cutoff;
    ordered_json flagged = ordered_json::array();
    for (const auto& pair : report.flagged)
        flagged.push_back({{"subdim_a", pair.subdim_a},
                           {"subdim_b", pair.subdim_b},
                           {"rho", pair.rho},
                           {"n", pair.n_pairwise}});
    out["flagged"] = std::move(flagged);
    out["clusters"] = report.clusters;
    ordered_json skipped = ordered_json::array();
    for (const auto& f : report.skipped)
        skipped.push_back({{"code", f.code}, {"pair", f.subject}, {"detail", f.detail}});
    out["skipped"] = std::move(skipped);
    std::ofstream f(path, std::ios::binary);
    if (!f) fail(Errc::io_error, "cannot write " + path);
    f << out.dump(2) << '\n';
}

void write_triage_table(const std::string& path, const std::vector<DeltaReport>& reports,
                        const Taxonomy& taxonomy, const TriageThresholds& thresholds) {
    // one row per subdim: family, items, delta per outcome-primary metric,
    // labels, sorted by binary delta descending (the familiar table order)
    struct Row {
        std::string family;
        std::string subdim;
        std::size_t items = 0;
        std::size_t n = 0;
        double delta_auc = kMissing;
        double delta_r2 = kMissing;
        std::string label_auc;
        std::string label_r2;
        std::string notes;
    };
    std::map<std::string, Row> by_subdim;
    for (const auto& r : reports) {
        if (r.metric != Metric::auc && r.metric != Metric::r2) continue;
        Row& row = by_subdim[r.candidate];
        row.subdim = r.candidate;
        if (taxonomy.has_subdim(r.candidate)) {
            row.family = taxonomy.subdim(r.candidate).anchor_id;
            if (taxonomy.subdim(r.candidate).parent_id)
                row.notes = "split of " + *taxonomy.subdim(r.candidate).parent_id;
        }
        row.items = r.item_count;
        row.n = std::max(row.n, r.n_rows);
        if (r.metric == Metric::auc) {
            row.delta_auc = r.oriented_mean;
            row.label_auc = label_string(r, thresholds);
        } else {
            row.delta_r2 = r.oriented_mean;
            row.label_r2 = label_string(r, thresholds);
        }
    }
    std::vector<Row> rows;
    for (auto& [id, row] : by_subdim) rows.push_back(row);
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        const double da = is_missing(a.delta_auc) ? -1e300 : a.delta_auc;
        const double db = is_missing(b.delta_auc) ? -1e300 : b.delta_auc;
        if (da != db) return da > db;
        return a.subdim < b.subdim;
    });

    std::vector<std::vector<std::string>> out;
    out.push_back({"family", "subdim", "items", "n", "delta_auc", "delta_r2", "label_accept",
                   "label_rate", "notes"});
    for (const auto& row : rows)
        out.push_back({row.family, row.subdim, std::to_string(row.items), std::to_string(row.n),
                       is_missing(row.delta_auc) ? "" : csv::format_double(row.delta_auc),
                       is_missing(row.delta_r2) ? "" : csv::format_double(row.delta_r2),
                       row.label_auc, row.label_r2, row.notes});
    csv::write_file(path, out);
}

void write_iteration_log(const std::string& path, const std::vector<IterationState>& rounds) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(Errc::io_error, "cannot write " + path);
    for (const auto& state : rounds) {
        ordered_json rec;
        rec["round"] = state.round;
        rec["outer_split"] = state.outer_split;
        rec["taxonomy_version"] = state.taxonomy_version;
        rec["mapping_version"] = state.mapping_version;
        rec["status"] = state.status;
        rec["refined_cluster"] = state.refined_cluster;
        rec["best_oriented_delta"] = state.best_oriented_delta;
        ordered_json decisions = ordered_json::array();
        for (const auto& d : state.decisions)
            decisions.push_back({{"subdim", d.subdim_id},
                                 {"label", std::string(to_string(d.label))},
                                 {"action", std::string(to_string(d.action))},
                                 {"reason", d.reason},
                                 {"noise_streak", d.noise_streak}});
        rec["decisions"] = std::move(decisions);
        ordered_json overlap = ordered_json::array();
        for (const auto& pair : state.overlap.flagged)
            overlap.push_back(
                {{"a", pair.subdim_a}, {"b", pair.subdim_b}, {"rho", pair.rho}});
        rec["overlap_pairs"] = std::move(overlap);
        rec["clusters"] = state.overlap.clusters;
        ordered_json limits = ordered_json::array();
        for (const auto& flag : state.limits)
            limits.push_back({{"subdim", flag.subdim_id}, {"reasons", flag.reasons}});
        rec["data_limits"] = std::move(limits);
        rec["cross_loading_share"] = state.cross_loading.flagged_share;
        ordered_json cc = ordered_json::array();
        for (const auto& result : state.cc_results)
            cc.push_back({{"candidate", result.candidate},
                          {"cluster", result.cluster},
                          {"oriented_mean", result.oriented_mean},
                          {"share_improve", result.share_improve},
                          {"pass", result.pass}});
        rec["conditional_contribution"] = std::move(cc);
        ordered_json summary = ordered_json::array();
        for (const auto& r : state.reports)
            summary.push_back({{"outcome", r.outcome_id},
                               {"subdim", r.candidate},
                               {"metric", std::string(to_string(r.metric))},
                               {"delta_mean", r.oriented_mean},
                               {"share_improve", r.share_improve}});
        rec["reports"] = std::move(summary);
        out << rec.dump() << '\n';
    }
}

} // namespace mval
