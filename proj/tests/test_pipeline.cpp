#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "mval/csv.hpp"
#include "mval/pipeline.hpp"

using namespace mval;
namespace fs = std::filesystem;

namespace {

DeltaReport summary(std::string subdim, std::string outcome, Metric metric, double mean,
                    double share, std::size_t items, std::size_t n) {
    DeltaReport r;
    r.candidate = std::move(subdim);
    r.outcome_id = std::move(outcome);
    r.metric = metric;
    r.oriented_mean = mean;
    r.share_improve = share;
    r.item_count = items;
    r.n_rows = n;
    return r;
}

} // namespace

TEST_CASE("the triage table sorts by the acceptance delta, strongest first") {
    // the published acceptance-outcome summary statistics, fed as fixtures
    std::vector<DeltaReport> reports{
        summary("service_tenure_lockin", "accept", Metric::auc, 0.114, 1.00, 2, 5524),
        summary("financial_literacy", "accept", Metric::auc, 0.082, 0.92, 5, 5285),
        summary("income_wealth_buffer", "accept", Metric::auc, 0.036, 0.60, 4, 5438),
        summary("retirement_horizon", "accept", Metric::auc, 0.024, 0.76, 3, 5521),
        summary("demographics", "accept", Metric::auc, 0.019, 0.72, 4, 5524),
        summary("employment_context", "accept", Metric::auc, -0.002, 0.32, 3, 5524),
        summary("perceived_generosity", "accept", Metric::auc, -0.003, 0.40, 3, 4045),
        summary("service_tenure_lockin", "rate", Metric::r2, 0.0089, 0.96, 2, 5524),
        summary("perceived_generosity", "rate", Metric::r2, -0.0005, 0.52, 3, 4045),
    };
    const Taxonomy taxonomy = load_taxonomy(std::string(MVAL_FIXTURE_DIR) +
                                            "/pension_taxonomy.json");
    const std::string path =
        (fs::temp_directory_path() / "mval_triage_order.csv").string();
    write_triage_table(path, reports, taxonomy, TriageThresholds{});

    const auto rows = csv::read_file(path);
    fs::remove(path);
    REQUIRE(rows.size() == 8); // header + 7 subdimensions
    const std::vector<std::string> expected_order{
        "service_tenure_lockin", "financial_literacy", "income_wealth_buffer",
        "retirement_horizon",    "demographics",       "employment_context",
        "perceived_generosity"};
    for (std::size_t i = 0; i < expected_order.size(); ++i)
        CHECK(rows[i + 1][1] == expected_order[i]);

    // labels mirror the classification rule; families come from the taxonomy
    CHECK(rows[1][6] == "signal");     // service tenure, acceptance
    CHECK(rows[1][7] == "signal");     // service tenure, rate
    CHECK(rows[4][6] == "weak_signal");
    CHECK(rows[7][6] == "noise_like"); // perceived generosity
    CHECK(rows[7][0] == "DB_BELIEFS");
}

TEST_CASE("run configs survive the manifest round trip") {
    RunConfig config;
    config.instrument_path = "a.json";
    config.responses_path = "b.csv";
    config.mapping_path = "m.json";
    config.tau = 0.1;
    config.top_m = 2;
    config.k_out = 4;
    config.k_in = 3;
    config.repeats = 7;
    config.seed = 1234;
    config.seed_set = true;
    config.scoring_rule = "weighted_sum";
    config.overlap_cutoff = 0.8;
    config.thresholds.signal_share = 0.95;
    config.stopping.max_rounds = 9;
    config.missing_tokens = {"", "N/A"};

    const RunConfig again = RunConfig::from_json_text(config.to_json_text());
    CHECK(again.instrument_path == config.instrument_path);
    CHECK(again.tau == config.tau);
    CHECK(again.top_m == config.top_m);
    CHECK(again.k_out == config.k_out);
    CHECK(again.k_in == config.k_in);
    CHECK(again.repeats == config.repeats);
    CHECK(again.seed == config.seed);
    CHECK(again.seed_set);
    CHECK(again.scoring_rule == config.scoring_rule);
    CHECK(again.overlap_cutoff == config.overlap_cutoff);
    CHECK(again.thresholds.signal_share == config.thresholds.signal_share);
    CHECK(again.stopping.max_rounds == config.stopping.max_rounds);
    CHECK(again.missing_tokens == config.missing_tokens);
}

TEST_CASE("manifests are written before any computation") {
    RunConfig config;
    config.out_dir = (fs::temp_directory_path() / "mval_manifest_first").string();
    fs::remove_all(config.out_dir);
    write_manifest(config, config.out_dir);
    CHECK(fs::exists(fs::path(config.out_dir) / "manifest.json"));
    const RunConfig loaded = load_manifest((fs::path(config.out_dir) / "manifest.json").string());
    CHECK(loaded.out_dir == config.out_dir);
    fs::remove_all(config.out_dir);
}
