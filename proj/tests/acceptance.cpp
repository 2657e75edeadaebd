// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one pass/fail line per criterion. Exit code = failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mval/diagnostics.hpp"
#include "mval/ecv.hpp"
#include "mval/evalcore.hpp"
#include "mval/harmonize.hpp"
#include "mval/mapping.hpp"
#include "mval/placebo.hpp"
#include "mval/refine.hpp"
#include "mval/rng.hpp"
#include "mval/scoring.hpp"
#include "mval/synth.hpp"
#include "mval/taxonomy.hpp"

using namespace mval;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int number, const std::string& name, bool pass, const std::string& note) {
    std::printf("[%s] criterion %2d: %s%s%s\n", pass ? "PASS" : "FAIL", number, name.c_str(),
                note.empty() ? "" : " -- ", note.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

MappingRow make_row(std::string item, std::vector<std::pair<std::string, double>> weights) {
    MappingRow row;
    row.item_id = std::move(item);
    for (auto& [id, w] : weights) row.weights.push_back({id, w});
    return row;
}

// ---------------------------------------------------------------- 1
void criterion_simplex() {
    const auto start = std::chrono::steady_clock::now();
    Rng rng(1);
    bool ok = true;
    std::string note;
    for (int rep = 0; rep < 10000 && ok; ++rep) {
        std::vector<std::pair<std::string, double>> weights;
        const int k = 1 + static_cast<int>(rng.next_below(6));
        double total = 0.0;
        for (int i = 0; i < k; ++i) {
            const double v = rng.next_double() + 1e-6;
            weights.push_back({"s" + std::to_string(i), v});
            total += v;
        }
        for (auto& [id, v] : weights) v /= total;
        MappingMatrix w({make_row("I", weights)});
        CoverageWeights coverage;
        coverage.share = {{"I", rng.next_double()}};

        MappingMatrix chained = sparsify_threshold(w, 0.05 + 0.10 * rng.next_double());
        chained = sparsify_top_m(chained, 1 + static_cast<int>(rng.next_below(3)));
        chained = tighten_primary_secondary(chained, 0.05, 0.20);
        chained = reweight_by_coverage(chained, coverage);

        double sum = 0.0;
        for (const auto& entry : chained.row("I").weights) {
            if (entry.weight < 0.0) ok = false;
            sum += entry.weight;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            ok = false;
            note = "row sum drifted to " + std::to_string(sum);
        }
    }
    const double elapsed = seconds_since(start);
    if (elapsed >= 5.0) {
        ok = false;
        note += " runtime " + std::to_string(elapsed) + "s";
    }
    report(1, "simplex preserved through the transform chain (10k rows)", ok,
           note.empty() ? std::to_string(elapsed) + "s" : note);
}

// ---------------------------------------------------------------- 2
void criterion_golden_mapping() {
    const std::string fixtures = MVAL_FIXTURE_DIR;
    Taxonomy taxonomy = load_taxonomy(fixtures + "/pension_taxonomy.json");
    Subdimension benefit, contribution;
    benefit.subdim_id = "benefit_value";
    benefit.definition = "promised benefit value channel";
    contribution.subdim_id = "employer_contribution";
    contribution.definition = "employer contribution channel";
    taxonomy = split_subdimension(taxonomy, "perceived_generosity", {benefit, contribution});

    MappingMatrix v2({
        make_row("Q14", {{"financial_literacy", 0.25}, {"benefit_value", 0.75}}),
        make_row("Q16", {{"financial_literacy", 0.25}, {"benefit_value", 0.75}}),
        make_row("Q18", {{"financial_literacy", 0.40}, {"employer_contribution", 0.60}}),
        make_row("Q33", {{"financial_literacy", 0.05}, {"plan_stability", 0.95}}),
    });
    v2.bind(taxonomy);
    bool ok = validate_mapping(v2, taxonomy).ok();
    std::string note = ok ? "" : "v2 rows failed validate_mapping";

    // literal file round-trip: serialize, reload, revalidate, exact weights
    {
        const fs::path tmp = fs::temp_directory_path() / "mval_v2_roundtrip.json";
        write_mapping(tmp.string(), v2, /*bare_list=*/true);
        MappingMatrix reloaded = load_mapping(tmp.string());
        reloaded.bind(taxonomy);
        fs::remove(tmp);
        if (!validate_mapping(reloaded, taxonomy).ok()) {
            ok = false;
            note += " reloaded v2 rows failed validate_mapping";
        }
        for (const auto& row : v2.rows()) {
            const MappingRow& other = reloaded.row(row.item_id);
            if (other.weights.size() != row.weights.size()) ok = false;
            for (std::size_t i = 0; i < row.weights.size(); ++i)
                if (other.weights[i].subdim_id != row.weights[i].subdim_id ||
                    other.weights[i].weight != row.weights[i].weight) {
                    ok = false;
                    note += " weight drift on " + row.item_id;
                }
        }
    }

    const MappingMatrix sparse = sparsify_threshold(v2, 0.10);
    const MappingRow& q33 = sparse.row("Q33");
    const bool exact = q33.weights.size() == 1 && q33.weights[0].subdim_id == "plan_stability" &&
                       q33.weights[0].weight == 1.0;
    if (!exact) {
        ok = false;
        note += " Q33 at tau=0.10 not exactly {plan_stability: 1.0}";
    }
    report(2, "golden v2 reallocation fixtures round-trip", ok, note);
}

// ---------------------------------------------------------------- 3
void criterion_scoring_oracle() {
    const auto start = std::chrono::steady_clock::now();
    Rng rng(3);
    bool ok = true;
    std::string note;
    const std::vector<ScoringRule> rules{{ScoringKind::weighted_mean, false},
                                         {ScoringKind::weighted_sum, false},
                                         {ScoringKind::zscore_then_mean, false},
                                         {ScoringKind::coverage_reweighted_mean, false}};
    for (int rep = 0; rep < 1000 && ok; ++rep) {
        const std::size_t n = 3 + rng.next_below(6);
        const std::size_t j = 2 + rng.next_below(4);
        std::string spec = "[";
        for (std::size_t col = 0; col < j; ++col) {
            if (col) spec += ",";
            spec += R"({"item_id": "X)" + std::to_string(col) +
                    R"(", "stem_text": "x", "response_kind": "numeric", "usage": "mechanism"})";
        }
        spec += "]";
        const Instrument inst = instrument_from_json_text(spec);
        HarmonizedMatrix h;
        h.respondent_ids.resize(n);
        for (std::size_t i = 0; i < n; ++i) h.respondent_ids[i] = "r" + std::to_string(i);
        for (std::size_t col = 0; col < j; ++col) {
            h.item_ids.push_back("X" + std::to_string(col));
            for (std::size_t i = 0; i < n; ++i)
                h.values.push_back(rng.next_double() < 0.3 ? kMissing : rng.next_normal());
        }
        std::vector<MappingRow> mapping_rows;
        CoverageWeights coverage;
        for (std::size_t col = 0; col < j; ++col) {
            std::map<std::string, double> dedup;
            double total = 0.0;
            std::vector<std::pair<std::string, double>> parts;
            for (int k = 0; k < 2; ++k) {
                const double v = rng.next_double() + 0.05;
                parts.push_back({"s" + std::to_string(rng.next_below(3)), v});
                total += v;
            }
            for (auto& [id, v] : parts) dedup[id] += v / total;
            mapping_rows.push_back(
                make_row("X" + std::to_string(col), {dedup.begin(), dedup.end()}));
            coverage.share["X" + std::to_string(col)] = rng.next_double();
        }
        MappingMatrix w(mapping_rows);

        for (const auto& rule : rules) {
            const MappingMatrix effective = rule.kind == ScoringKind::coverage_reweighted_mean
                                                ? reweight_by_coverage(w, coverage)
                                                : w;
            const ScoreMatrix s = build_scores(h, effective, rule, inst);
            for (std::size_t i = 0; i < n && ok; ++i) {
                for (const auto& subdim : s.subdim_ids) {
                    // naive double loop
                    double num = 0.0, den = 0.0;
                    for (const auto& mrow : effective.rows()) {
                        double weight = 0.0;
                        for (const auto& entry : mrow.weights)
                            if (entry.subdim_id == subdim) weight = entry.weight;
                        const double scale = rule.kind == ScoringKind::coverage_reweighted_mean
                                                 ? effective.scale_for(mrow.item_id)
                                                 : 1.0;
                        if (weight * scale <= 0.0) continue;
                        const double x = h.at(i, h.col_index(mrow.item_id));
                        if (is_missing(x)) continue;
                        num += weight * scale * x;
                        den += weight * scale;
                    }
                    const double want = den <= 0.0
                                            ? kMissing
                                            : (rule.kind == ScoringKind::weighted_sum ? num
                                                                                      : num / den);
                    const double got = s.at(i, s.col_index(subdim));
                    if (is_missing(want) != is_missing(got) ||
                        (!is_missing(want) && std::abs(want - got) > 1e-12)) {
                        ok = false;
                        note = "mismatch on " + subdim;
                    }
                }
            }
        }
    }
    const double elapsed = seconds_since(start);
    if (elapsed >= 10.0) {
        ok = false;
        note += " runtime " + std::to_string(elapsed) + "s";
    }
    report(3, "build_scores equals the naive oracle (1000 instances, 4 rules)", ok,
           note.empty() ? std::to_string(elapsed) + "s" : note);
}

// ---------------------------------------------------------------- 4
void criterion_leakage() {
    Rng rng(4);
    const std::size_t n = 80;
    const Instrument inst = instrument_from_json_text(R"([
        {"item_id": "X", "stem_text": "x", "response_kind": "numeric", "usage": "mechanism"},
        {"item_id": "Z", "stem_text": "z", "response_kind": "numeric", "usage": "mechanism"}
    ])");
    const auto rules = rules_from_json_text(R"([
        {"item_id": "X", "kind": "numeric_identity", "winsorize": {"lo": 0.05, "hi": 0.95},
         "standardize": true},
        {"item_id": "Z", "kind": "numeric_identity", "standardize": true}
    ])");
    std::string csv = "respondent_id,X,Z\n";
    for (std::size_t i = 0; i < n; ++i)
        csv += "r" + std::to_string(i) + "," + std::to_string(rng.next_normal()) + "," +
               std::to_string(rng.next_normal()) + "\n";
    const HarmonizedMatrix h = apply_rules(responses_from_csv_text(csv, inst), rules, inst);

    std::vector<std::size_t> train;
    for (std::size_t i = 0; i < 50; ++i) train.push_back(i);
    const FoldTransform reference = fit_fold_transform(h, train, rules);

    MappingMatrix mapping({make_row("X", {{"k", 0.6}}), make_row("Z", {{"k", 0.4}})});
    const ScoreMatrix ref_scores =
        build_scores(apply_fold_transform(h, reference), mapping,
                     {ScoringKind::weighted_mean, false}, inst);
    const ScoreStandardization ref_std = fit_score_standardization(ref_scores, train);

    bool ok = true;
    for (int rep = 0; rep < 100 && ok; ++rep) {
        HarmonizedMatrix perturbed = h;
        const std::size_t row = 50 + rng.next_below(30);
        const std::size_t col = rng.next_below(2);
        perturbed.at(row, col) += rng.next_normal() * 50.0;

        const FoldTransform refit = fit_fold_transform(perturbed, train, rules);
        for (std::size_t c = 0; c < refit.cols.size(); ++c)
            if (std::memcmp(&refit.cols[c], &reference.cols[c], sizeof(ColumnTransform)) != 0)
                ok = false;

        const ScoreMatrix scores =
            build_scores(apply_fold_transform(perturbed, refit), mapping,
                         {ScoringKind::weighted_mean, false}, inst);
        const ScoreStandardization refit_std = fit_score_standardization(scores, train);
        if (std::memcmp(refit_std.mean.data(), ref_std.mean.data(),
                        refit_std.mean.size() * sizeof(double)) != 0 ||
            std::memcmp(refit_std.sd.data(), ref_std.sd.data(),
                        refit_std.sd.size() * sizeof(double)) != 0)
            ok = false;
    }
    report(4, "held-out perturbations never change fitted statistics (bitwise, 100 reps)", ok, "");
}

// ---------------------------------------------------------------- 5
void criterion_triage() {
    const TriageThresholds th;
    const bool ok = classify(0.114, 1.00, th) == TriageLabel::signal &&
                    classify(0.024, 0.76, th) == TriageLabel::weak_signal &&
                    classify(-0.003, 0.40, th) == TriageLabel::noise_like &&
                    classify(-0.002, 0.32, th) == TriageLabel::noise_like;
    report(5, "triage reproduces the published labelings exactly", ok, "");
}

// ---------------------------------------------------------------- 6
void criterion_synthetic_recovery() {
    const auto start = std::chrono::steady_clock::now();
    int strong_ok = 0, null_ok = 0, split_ok = 0;
    const fs::path fixture_dir = fs::temp_directory_path() / "mval_acceptance_fixture";

    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        SynthSpec spec = default_synth_spec(); // N=2000, beta 1.0/0.0, Q14/Q18-patterned pair
        spec.seed = seed;
        const SynthData data = generate(spec);

        fs::create_directories(fixture_dir);
        {
            std::ofstream f(fixture_dir / "refinement.json", std::ios::binary);
            f << data.planted_refinement_json;
        }

        const HarmonizedMatrix h = apply_rules(data.responses, data.rules, data.instrument);
        ModelSpec model;
        model.lambda = 1.0; // ridge stabilizes the small inner folds
        std::vector<EvalContext> contexts;
        std::vector<FoldPlan> plans;
        for (const auto& outcome : data.outcomes) {
            contexts.push_back(make_eval_context(data.instrument, h, outcome, data.rules, model,
                                                 {ScoringKind::weighted_mean, true}));
            const std::vector<double>* labels =
                outcome.kind == OutcomeSpec::Kind::binary ? &contexts.back().y : nullptr;
            plans.push_back(make_fold_plan(contexts.back().analysis_rows.size(), labels, 5, 5, 5,
                                           seed + 1000));
        }

        LoopInputs inputs;
        inputs.instrument = &data.instrument;
        for (std::size_t i = 0; i < contexts.size(); ++i) {
            inputs.contexts.push_back(&contexts[i]);
            inputs.plans.push_back(&plans[i]);
        }
        inputs.taxonomy = data.taxonomy;
        inputs.mapping = data.mapping;

        FixtureProposer proposer(fixture_dir.string());
        const LoopResult result = run_loop(inputs, proposer, LoopConfig{});

        // labels of record: pooled inner folds across every outer split,
        // combined conservatively across outcomes (noise wins)
        std::map<std::string, TriageLabel> labels;
        const TriageThresholds thresholds;
        for (std::size_t i = 0; i < contexts.size(); ++i) {
            const auto reports = incremental_validity(
                contexts[i], data.mapping, plans[i], {"core_drive", "null_construct"},
                {primary_metric(contexts[i].outcome)}, {});
            for (const auto& r : reports) {
                const TriageLabel label = classify(r, thresholds);
                auto it = labels.find(r.candidate);
                if (it == labels.end()) labels.emplace(r.candidate, label);
                else if (static_cast<int>(label) > static_cast<int>(it->second))
                    it->second = label;
            }
        }
        if (labels.count("core_drive") && labels["core_drive"] == TriageLabel::signal) ++strong_ok;
        if (labels.count("null_construct") && labels["null_construct"] == TriageLabel::noise_like)
            ++null_ok;

        const bool split = std::any_of(result.rounds.begin(), result.rounds.end(),
                                       [](const IterationState& s) {
                                           return !s.refined_cluster.empty();
                                       });
        const bool cleared = result.rounds.back().overlap.flagged.empty();
        if (split && cleared) ++split_ok;
    }
    const double elapsed = seconds_since(start);
    const bool ok = strong_ok >= 18 && null_ok >= 16 && split_ok >= 16 && elapsed < 300.0;
    std::ostringstream note;
    note << "strong " << strong_ok << "/20, null " << null_ok << "/20, split+cleared " << split_ok
         << "/20, " << elapsed << "s";
    report(6, "synthetic signal recovery and planted split (20 seeds)", ok, note.str());
}

// ---------------------------------------------------------------- 7
void criterion_placebo() {
    const auto start = std::chrono::steady_clock::now();

    // (a) p-values approximately uniform on all-null data
    std::vector<double> pvals;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        SynthSpec spec = default_synth_spec();
        spec.n = 600;
        spec.seed = seed;
        for (auto& f : spec.factors) {
            f.beta_binary = 0.0;
            f.beta_continuous = 0.0;
        }
        const SynthData data = generate(spec);
        const HarmonizedMatrix h = apply_rules(data.responses, data.rules, data.instrument);
        ModelSpec model;
        const EvalContext ctx = make_eval_context(data.instrument, h, data.outcomes[0],
                                                  data.rules, model,
                                                  {ScoringKind::weighted_mean, true});
        const FoldPlan plan =
            make_fold_plan(ctx.analysis_rows.size(), &ctx.y, 5, 5, 1, seed + 500);
        const PlaceboReport rep = outcome_permutation(ctx, data.mapping, plan, "core_drive",
                                                      Metric::auc, {}, 0, 19, seed * 13 + 1);
        pvals.push_back(rep.p_value);
    }
    std::sort(pvals.begin(), pvals.end());
    double ks = 0.0;
    for (std::size_t i = 0; i < pvals.size(); ++i) {
        const double cdf_hi = static_cast<double>(i + 1) / pvals.size();
        const double cdf_lo = static_cast<double>(i) / pvals.size();
        ks = std::max(ks, std::max(std::abs(cdf_hi - pvals[i]), std::abs(pvals[i] - cdf_lo)));
    }

    // (b) planted mapping dominates its permutation distribution
    int small_p = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        SynthSpec spec = default_synth_spec();
        spec.seed = seed;
        const SynthData data = generate(spec);
        const HarmonizedMatrix h = apply_rules(data.responses, data.rules, data.instrument);
        ModelSpec model;
        const EvalContext ctx = make_eval_context(data.instrument, h, data.outcomes[0],
                                                  data.rules, model,
                                                  {ScoringKind::weighted_mean, true});
        const FoldPlan plan =
            make_fold_plan(ctx.analysis_rows.size(), &ctx.y, 5, 5, 1, seed + 900);
        const PlaceboReport rep =
            mapping_permutation(ctx, data.mapping, data.taxonomy, plan, "core_drive", Metric::auc,
                                {}, 0, 100, seed * 7 + 3);
        if (rep.p_value <= 0.05) ++small_p;
    }

    const double elapsed = seconds_since(start);
    const bool ok = ks < 0.2 && small_p >= 18 && elapsed < 600.0;
    std::ostringstream note;
    note << "KS " << ks << " (null, 50 seeds), mapping p<=0.05 in " << small_p << "/20, "
         << elapsed << "s";
    report(7, "placebo soundness (uniform null p-values; planted mapping dominates)", ok,
           note.str());
}

// ---------------------------------------------------------------- 8
void criterion_metric_oracles() {
    Rng rng(8);
    bool ok = true;
    for (int rep = 0; rep < 500 && ok; ++rep) {
        const std::size_t n = 3 + rng.next_below(198);
        std::vector<double> probs(n), labels(n);
        bool pos = false, neg = false;
        for (std::size_t i = 0; i < n; ++i) {
            probs[i] = static_cast<double>(rng.next_below(15)) / 14.0;
            labels[i] = rng.next_double() < 0.5 ? 1.0 : 0.0;
            (labels[i] == 1.0 ? pos : neg) = true;
        }
        if (!pos || !neg) continue;
        double wins = 0.0, pairs = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (labels[i] != 1.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                if (labels[j] != 0.0) continue;
                pairs += 1.0;
                if (probs[i] > probs[j]) wins += 1.0;
                else if (probs[i] == probs[j]) wins += 0.5;
            }
        }
        if (std::abs(auc(probs, labels) - wins / pairs) > 1e-12) ok = false;
    }
    const double ll = logloss({0.25, 0.75}, {0.0, 1.0});
    if (std::abs(ll - 0.287682) > 1e-6) ok = false;
    report(8, "AUC matches all-pairs brute force; log-loss example within 1e-6", ok, "");
}

// ---------------------------------------------------------------- 9
void criterion_determinism() {
    const fs::path base = fs::temp_directory_path() / "mval_acceptance_det";
    fs::remove_all(base);
    fs::create_directories(base);
    const std::string bin = std::string(MVAL_BINARY_DIR) + "/mval";
    const std::string data = (base / "data").string();
    bool ok = true;
    std::string note;

    const auto run = [&](const std::string& cmd) {
        const int rc = std::system((cmd + " > /dev/null 2>&1").c_str());
        if (rc != 0) {
            ok = false;
            note += " command failed: " + cmd;
        }
    };

    run(bin + " synth --out " + data + " --seed 11 --n 900");
    const std::string inputs = " --instrument " + data + "/instrument.json --responses " + data +
                               "/responses.csv --rules " + data + "/rules.json --taxonomy " +
                               data + "/taxonomy.json --mapping " + data +
                               "/mapping.json --outcomes " + data + "/outcomes.json";
    run(bin + " validate" + inputs + " --seed 99 --threads 2 --out " + (base / "v1").string());
    run(bin + " validate --config " + (base / "v1" / "manifest.json").string() +
        " --threads 1 --out " + (base / "v2").string());
    run(bin + " refine" + inputs + " --proposals " + data + "/proposals --seed 99 --threads 2" +
        " --out " + (base / "r1").string());
    run(bin + " refine --config " + (base / "r1" / "manifest.json").string() +
        " --threads 1 --out " + (base / "r2").string());

    const auto same = [&](const std::string& a, const std::string& b) {
        std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
        if (!fa || !fb) return false;
        std::ostringstream sa, sb;
        sa << fa.rdbuf();
        sb << fb.rdbuf();
        return sa.str() == sb.str();
    };
    for (const std::string f : {"deltas.csv", "deltas.json", "triage.csv"})
        if (!same((base / "v1" / f).string(), (base / "v2" / f).string())) {
            ok = false;
            note += " validate/" + f + " differs";
        }
    for (const std::string f :
         {"iterations.jsonl", "outer_deltas.csv", "taxonomy_final.json", "mapping_final.json"})
        if (!same((base / "r1" / f).string(), (base / "r2" / f).string())) {
            ok = false;
            note += " refine/" + f + " differs";
        }
    report(9, "manifest replays are bitwise identical across thread counts", ok, note);
    fs::remove_all(base);
}

// ---------------------------------------------------------------- 10
void criterion_grid() {
    const fs::path base = fs::temp_directory_path() / "mval_acceptance_grid";
    fs::remove_all(base);
    fs::create_directories(base);
    const std::string bin = std::string(MVAL_BINARY_DIR) + "/mval";
    const std::string data = (base / "data").string();
    bool ok = true;
    std::string note;

    const auto run = [&](const std::string& cmd) {
        const int rc = std::system((cmd + " > /dev/null 2>&1").c_str());
        if (rc != 0) {
            ok = false;
            note += " command failed: " + cmd;
        }
    };
    run(bin + " synth --out " + data + " --seed 21 --n 800");
    run(bin + " grid --instrument " + data + "/instrument.json --responses " + data +
        "/responses.csv --rules " + data + "/rules.json --taxonomy " + data +
        "/taxonomy.json --mapping " + data + "/mapping.json --outcomes " + data +
        "/outcomes.json --seed 5 --focus core_drive --repeats 1 --out " +
        (base / "grid").string());

    // 3x3 tau/m grid, single cutoff and rule -> 9 rows
    std::size_t rows = 0;
    {
        std::ifstream f(base / "grid" / "grid.csv");
        std::string line;
        while (std::getline(f, line))
            if (!line.empty()) ++rows;
    }
    if (rows != 10) { // header + 9 cells
        ok = false;
        note += " expected 9 grid rows, got " + std::to_string(rows ? rows - 1 : 0);
    }

    // flagged-pair monotonicity across cutoffs on planted synthetic scores
    SynthSpec spec = default_synth_spec();
    spec.seed = 21;
    spec.n = 800;
    const SynthData synth = generate(spec);
    const HarmonizedMatrix h = apply_rules(synth.responses, synth.rules, synth.instrument);
    ModelSpec model;
    const EvalContext ctx = make_eval_context(synth.instrument, h, synth.outcomes[0], synth.rules,
                                              model, {ScoringKind::weighted_mean, true});
    std::vector<std::size_t> all_rows(ctx.analysis_rows.size());
    for (std::size_t i = 0; i < all_rows.size(); ++i) all_rows[i] = i;
    const ScoreMatrix scores = scores_for_rows(ctx, synth.mapping, all_rows);
    std::size_t prev = SIZE_MAX;
    for (double cutoff : {0.80, 0.85, 0.90}) {
        const OverlapReport overlap = correlation_screen(scores, cutoff, all_rows);
        if (prev != SIZE_MAX && overlap.flagged.size() > prev) {
            ok = false;
            note += " flags increased at cutoff " + std::to_string(cutoff);
        }
        prev = overlap.flagged.size();
    }
    report(10, "grid emits 9 cells; overlap flags non-increasing in the cutoff", ok, note);
    fs::remove_all(base);
}

} // namespace

int main() {
    std::printf("acceptance suite\n");
    criterion_simplex();
    criterion_golden_mapping();
    criterion_scoring_oracle();
    criterion_leakage();
    criterion_triage();
    criterion_synthetic_recovery();
    criterion_placebo();
    criterion_metric_oracles();
    criterion_determinism();
    criterion_grid();
    std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
