#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mval/placebo.hpp"
#include "mval/rng.hpp"
#include "mval/synth.hpp"

using namespace mval;

namespace {

struct PlaceboBench {
    SynthData data;
    EvalContext ctx;
    FoldPlan plan;

    explicit PlaceboBench(std::uint64_t seed, std::size_t n = 500, bool planted = true) {
        SynthSpec spec = default_synth_spec();
        spec.n = n;
        spec.seed = seed;
        if (!planted)
            for (auto& f : spec.factors) {
                f.beta_binary = 0.0;
                f.beta_continuous = 0.0;
            }
        data = generate(spec);
        const HarmonizedMatrix h = apply_rules(data.responses, data.rules, data.instrument);
        ModelSpec model;
        ctx = make_eval_context(data.instrument, h, data.outcomes[0], data.rules, model,
                                {ScoringKind::weighted_mean, true});
        plan = make_fold_plan(ctx.analysis_rows.size(), &ctx.y, 4, 4, 1, seed + 7);
    }
};

} // namespace

TEST_CASE("outcome permutation preserves class counts") {
    PlaceboBench bench(3);
    double before = 0.0;
    for (double y : bench.ctx.y) before += y;
    EvalContext permuted = bench.ctx;
    Rng rng = Rng::derive(11, 1);
    rng.shuffle(permuted.y);
    double after = 0.0;
    for (double y : permuted.y) after += y;
    CHECK(before == after);
}

TEST_CASE("draws = 1 gives a p-value of exactly 0 or 1") {
    PlaceboBench bench(5, 300);
    const PlaceboReport report =
        outcome_permutation(bench.ctx, bench.data.mapping, bench.plan, "core_drive", Metric::auc,
                            {}, 0, 1, 17);
    CHECK((report.p_value == 0.0 || report.p_value == 1.0));
    CHECK(report.draws == 1);
}

TEST_CASE("placebo reports are deterministic in the seed") {
    PlaceboBench bench(6, 300);
    const PlaceboReport a = outcome_permutation(bench.ctx, bench.data.mapping, bench.plan,
                                                "core_drive", Metric::auc, {}, 0, 5, 23);
    const PlaceboReport b = outcome_permutation(bench.ctx, bench.data.mapping, bench.plan,
                                                "core_drive", Metric::auc, {}, 0, 5, 23);
    CHECK(a.observed == b.observed);
    CHECK(a.draw_deltas == b.draw_deltas);
    CHECK(a.p_value == b.p_value);
}

TEST_CASE("planted signal lands in the right tail of the outcome placebo") {
    PlaceboBench bench(9, 700);
    const PlaceboReport report =
        outcome_permutation(bench.ctx, bench.data.mapping, bench.plan, "core_drive", Metric::auc,
                            {}, 0, 50, 41);
    CHECK(report.observed > report.max);
    CHECK(report.p_value <= 0.05);
    CHECK(std::abs(report.mean) <= 0.01); // placebo deltas concentrate near zero
}

TEST_CASE("permuted mappings keep the weight multiset and pass validation") {
    PlaceboBench bench(12, 300);
    for (std::uint64_t draw = 0; draw < 10; ++draw) {
        const MappingMatrix permuted = permute_mapping_targets(
            bench.data.mapping, bench.data.taxonomy, bench.data.instrument, 99, draw);
        CHECK(validate_mapping(permuted, bench.data.taxonomy, &bench.data.instrument).ok());
        for (const auto& row : permuted.rows()) {
            const MappingRow& original = bench.data.mapping.row(row.item_id);
            std::vector<double> got, want;
            for (const auto& e : row.weights) got.push_back(e.weight);
            for (const auto& e : original.weights) want.push_back(e.weight);
            std::sort(got.begin(), got.end());
            std::sort(want.begin(), want.end());
            CHECK(got == want);
            // targets are distinct
            std::set<std::string> targets;
            for (const auto& e : row.weights) targets.insert(e.subdim_id);
            CHECK(targets.size() == row.weights.size());
        }
    }
}

TEST_CASE("mapping permutation needs at least two leaves") {
    PlaceboBench bench(13, 300);
    Taxonomy single({{"A", "a"}}, {[] {
                         Subdimension s;
                         s.subdim_id = "only";
                         s.anchor_id = "A";
                         s.definition = "d";
                         return s;
                     }()});
    CHECK_THROWS_AS(permute_mapping_targets(bench.data.mapping, single, bench.data.instrument, 1,
                                            0),
                    Error);
}

TEST_CASE("planted mapping dominates its permutation distribution") {
    PlaceboBench bench(14, 700);
    const PlaceboReport report =
        mapping_permutation(bench.ctx, bench.data.mapping, bench.data.taxonomy, bench.plan,
                            "core_drive", Metric::auc, {}, 0, 19, 5);
    CHECK(report.observed > 0.1);
    CHECK(report.p_value <= 0.1);
}

TEST_CASE("the smoothing flag applies add-one smoothing") {
    PlaceboBench bench(15, 300);
    const PlaceboReport raw = outcome_permutation(bench.ctx, bench.data.mapping, bench.plan,
                                                  "core_drive", Metric::auc, {}, 0, 4, 3, false);
    const PlaceboReport smooth = outcome_permutation(bench.ctx, bench.data.mapping, bench.plan,
                                                     "core_drive", Metric::auc, {}, 0, 4, 3, true);
    CHECK(raw.draw_deltas == smooth.draw_deltas);
    std::size_t at_least = 0;
    for (double d : raw.draw_deltas)
        if (d >= raw.observed) ++at_least;
    CHECK(raw.p_value == doctest::Approx(at_least / 4.0));
    CHECK(smooth.p_value == doctest::Approx((1.0 + at_least) / 5.0));
}
