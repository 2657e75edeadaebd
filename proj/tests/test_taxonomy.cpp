#include <doctest.h>

#include <string>

#include "mval/taxonomy.hpp"

using namespace mval;

namespace {
const std::string kFixtures = MVAL_FIXTURE_DIR;

Taxonomy small_taxonomy() {
    std::vector<Anchor> anchors{{"DB_beliefs", "beliefs"}, {"Controls", "controls"}};
    std::vector<Subdimension> subdims;
    Subdimension a;
    a.subdim_id = "gen_a";
    a.anchor_id = "DB_beliefs";
    a.definition = "generosity channel a";
    a.representative_item_ids = {"Q1", "Q2"};
    Subdimension b = a;
    b.subdim_id = "gen_b";
    b.representative_item_ids = {"Q2", "Q3"};
    Subdimension c;
    c.subdim_id = "demo";
    c.anchor_id = "Controls";
    c.definition = "demographics";
    subdims = {a, b, c};
    return Taxonomy(std::move(anchors), std::move(subdims));
}
} // namespace

TEST_CASE("pension fixture taxonomy validates with expected leaf count") {
    const Taxonomy t = load_taxonomy(kFixtures + "/pension_taxonomy.json");
    CHECK(validate_taxonomy(t).ok());
    CHECK(t.leaf_count() == 15);
    // the ten constructed subdimensions are all leaves
    for (const auto& id :
         {"financial_literacy", "demographics", "income_wealth_buffer", "employment_context",
          "retirement_horizon", "perceived_generosity", "service_tenure_lockin", "discounting",
          "health_risk", "plan_stability"})
        CHECK(t.is_leaf(id));
}

TEST_CASE("orphan parents and duplicates are reported") {
    std::vector<Anchor> anchors{{"A", "a"}};
    Subdimension s;
    s.subdim_id = "financial_literacy";
    s.anchor_id = "A";
    s.definition = "d";
    Subdimension dup = s;
    Subdimension orphan;
    orphan.subdim_id = "child";
    orphan.anchor_id = "A";
    orphan.definition = "d";
    orphan.parent_id = "missing_parent";
    const Taxonomy t({{"A", "a"}}, {s, dup, orphan});
    const ValidationReport report = validate_taxonomy(t);
    CHECK(report.has("duplicate_subdim"));
    CHECK(report.has("orphan_parent"));
}

TEST_CASE("consolidate merges leaves under the same anchor and unions items") {
    const Taxonomy t = small_taxonomy();
    const Taxonomy merged = consolidate(t, {{"gen_a", "gen_b"}});
    CHECK(merged.version() == t.version() + 1);
    CHECK_FALSE(merged.has_subdim("gen_b"));
    const auto& items = merged.subdim("gen_a").representative_item_ids;
    CHECK(items == std::vector<std::string>{"Q1", "Q2", "Q3"});
}

TEST_CASE("cross-anchor merges are rejected") {
    const Taxonomy t = small_taxonomy();
    try {
        consolidate(t, {{"gen_a", "demo"}});
        FAIL("expected CrossAnchorMerge");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::cross_anchor_merge);
    }
}

TEST_CASE("empty merge list only bumps the version") {
    const Taxonomy t = small_taxonomy();
    const Taxonomy same = consolidate(t, {});
    CHECK(same.version() == t.version() + 1);
    CHECK(same.subdimensions().size() == t.subdimensions().size());
}

TEST_CASE("split turns the parent into an internal node with leaves beneath") {
    const Taxonomy t = load_taxonomy(kFixtures + "/pension_taxonomy.json");
    Subdimension benefit;
    benefit.subdim_id = "benefit_value";
    benefit.definition = "perceived value of the promised benefit";
    Subdimension contribution;
    contribution.subdim_id = "employer_contribution";
    contribution.definition = "perceived value of the employer contribution";
    const Taxonomy split = split_subdimension(t, "perceived_generosity", {benefit, contribution});

    CHECK(split.version() == t.version() + 1);
    CHECK_FALSE(split.is_leaf("perceived_generosity"));
    CHECK(split.is_leaf("benefit_value"));
    CHECK(split.is_leaf("employer_contribution"));
    CHECK(split.subdim("benefit_value").anchor_id == "DB_BELIEFS");
    CHECK(*split.subdim("benefit_value").parent_id == "perceived_generosity");
    // leaves: one parent retired, two children added
    CHECK(split.leaf_count() == t.leaf_count() + 1);
    // parent definition copied into the children as a prefix
    CHECK(split.subdim("benefit_value").definition.find("[from perceived_generosity]") == 0);
    CHECK(validate_taxonomy(split).ok());
}

TEST_CASE("anchored subdimensions cannot be split") {
    Taxonomy t = load_taxonomy(kFixtures + "/pension_taxonomy.json");
    t = set_anchored(t, {"financial_literacy"});
    Subdimension c1, c2;
    c1.subdim_id = "lit_a";
    c2.subdim_id = "lit_b";
    try {
        split_subdimension(t, "financial_literacy", {c1, c2});
        FAIL("expected NotALeaf");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::not_a_leaf);
    }
}

TEST_CASE("split with one child violates the precondition") {
    const Taxonomy t = load_taxonomy(kFixtures + "/pension_taxonomy.json");
    Subdimension only;
    only.subdim_id = "solo";
    CHECK_THROWS_AS(split_subdimension(t, "perceived_generosity", {only}), Error);
}

TEST_CASE("duplicate child ids are rejected") {
    const Taxonomy t = load_taxonomy(kFixtures + "/pension_taxonomy.json");
    Subdimension c1, c2;
    c1.subdim_id = "same";
    c2.subdim_id = "same";
    try {
        split_subdimension(t, "perceived_generosity", {c1, c2});
        FAIL("expected DuplicateChildId");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::duplicate_child_id);
    }
}

TEST_CASE("versions strictly increase along any edit chain") {
    Taxonomy t = small_taxonomy();
    std::uint64_t last = t.version();
    t = consolidate(t, {});
    CHECK(t.version() > last);
    last = t.version();
    t = set_anchored(t, {"demo"});
    CHECK(t.version() > last);
    // the edit log records every step
    CHECK(t.edit_log().size() >= 3);
}

TEST_CASE("taxonomy JSON round-trips") {
    const Taxonomy t = load_taxonomy(kFixtures + "/pension_taxonomy.json");
    const Taxonomy again = Taxonomy::from_json_text(t.to_json_text());
    CHECK(again.version() == t.version());
    CHECK(again.subdimensions().size() == t.subdimensions().size());
    CHECK(again.leaf_ids() == t.leaf_ids());
}
