#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <string>

#include "mval/instrument.hpp"

using namespace mval;

namespace {
const std::string kFixtures = MVAL_FIXTURE_DIR;
}

TEST_CASE("46-item instrument loads with 12 outcome items") {
    const Instrument inst = load_instrument(kFixtures + "/pension_instrument.json");
    CHECK(inst.size() == 46);
    std::size_t outcomes = 0;
    for (const auto& item : inst.items())
        if (item.usage == Usage::outcome) ++outcomes;
    CHECK(outcomes == 12);
    for (int q = 20; q <= 31; ++q) CHECK(inst.item("Q" + std::to_string(q)).usage == Usage::outcome);
}

TEST_CASE("empty instrument is a SchemaError") {
    CHECK_THROWS_WITH_AS(instrument_from_json_text("[]"), doctest::Contains("no items"), Error);
}

TEST_CASE("duplicate item ids are rejected") {
    const std::string text = R"([
        {"item_id": "Q1", "stem_text": "a", "response_kind": "numeric", "usage": "control"},
        {"item_id": "Q1", "stem_text": "b", "response_kind": "numeric", "usage": "control"}
    ])";
    try {
        instrument_from_json_text(text);
        FAIL("expected DuplicateId");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::duplicate_id);
    }
}

TEST_CASE("configured missing tokens become MISSING") {
    const Instrument inst = instrument_from_json_text(R"([
        {"item_id": "Q1", "stem_text": "s", "response_kind": "numeric", "usage": "mechanism"}
    ])");
    const std::string csv = "respondent_id,Q1\nr1,Prefer not to say\nr2,42\nr3,\n";
    const ResponseMatrix m = responses_from_csv_text(csv, inst);
    CHECK(m.cell(0, 0).missing);
    CHECK(m.cell(0, 0).token == "Prefer not to say"); // verbatim even when missing
    CHECK_FALSE(m.cell(1, 0).missing);
    CHECK(m.cell(1, 0).token == "42");
    CHECK(m.cell(2, 0).missing);
}

TEST_CASE("zero respondent rows are a valid matrix") {
    const Instrument inst = instrument_from_json_text(
        R"([{"item_id": "Q1", "stem_text": "s", "response_kind": "numeric", "usage": "control"}])");
    const ResponseMatrix m = responses_from_csv_text("respondent_id,Q1\n", inst);
    CHECK(m.n_respondents() == 0);
    CHECK(m.n_items() == 1);
}

TEST_CASE("duplicate respondent ids are rejected (ids are opaque and unique)") {
    const Instrument inst = instrument_from_json_text(
        R"([{"item_id": "Q1", "stem_text": "s", "response_kind": "numeric", "usage": "control"}])");
    CHECK_THROWS_AS(responses_from_csv_text("respondent_id,Q1\nr1,5\nr1,6\n", inst), Error);
}

TEST_CASE("unknown response column is rejected") {
    const Instrument inst = instrument_from_json_text(
        R"([{"item_id": "Q1", "stem_text": "s", "response_kind": "numeric", "usage": "control"}])");
    try {
        responses_from_csv_text("respondent_id,Q99\nr1,5\n", inst);
        FAIL("expected UnknownItem");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::unknown_item);
    }
}

TEST_CASE("responses round-trip including MISSING placement") {
    const Instrument inst = instrument_from_json_text(R"([
        {"item_id": "Q1", "stem_text": "s", "response_kind": "numeric", "usage": "mechanism"},
        {"item_id": "Q2", "stem_text": "t", "response_kind": "free_text", "usage": "control"}
    ])");
    const std::string csv =
        "respondent_id,Q1,Q2\nr1,3.5,\"hello, world\"\nr2,NA,\"line\nbreak\"\nr3,,plain\n";
    const ResponseMatrix first = responses_from_csv_text(csv, inst);

    const std::string tmp = (std::filesystem::temp_directory_path() / "mval_roundtrip.csv").string();
    write_responses(tmp, first);
    const ResponseMatrix second = load_responses(tmp, inst);
    std::remove(tmp.c_str());

    REQUIRE(second.n_respondents() == first.n_respondents());
    REQUIRE(second.n_items() == first.n_items());
    CHECK(second.respondent_ids == first.respondent_ids);
    for (std::size_t i = 0; i < first.n_respondents(); ++i)
        for (std::size_t j = 0; j < first.n_items(); ++j) {
            CHECK(second.cell(i, j).token == first.cell(i, j).token);
            CHECK(second.cell(i, j).missing == first.cell(i, j).missing);
        }
}

TEST_CASE("instrument JSON round-trips through write and load") {
    const Instrument inst = load_instrument(kFixtures + "/pension_instrument.json");
    const std::string tmp =
        (std::filesystem::temp_directory_path() / "mval_instrument_rt.json").string();
    write_instrument(tmp, inst);
    const Instrument again = load_instrument(tmp);
    std::remove(tmp.c_str());
    REQUIRE(again.size() == inst.size());
    for (std::size_t i = 0; i < inst.size(); ++i) {
        CHECK(again.at(i).item_id == inst.at(i).item_id);
        CHECK(again.at(i).stem_text == inst.at(i).stem_text);
        CHECK(again.at(i).response_kind == inst.at(i).response_kind);
        CHECK(again.at(i).option_labels == inst.at(i).option_labels);
        CHECK(again.at(i).usage == inst.at(i).usage);
    }
}

TEST_CASE("outcome specs resolve against the instrument") {
    const Instrument inst = load_instrument(kFixtures + "/pension_instrument.json");
    const std::string text = R"([
        {"outcome_id": "Q20", "kind": "binary", "covariate_item_ids": ["Q1", "Q8"]},
        {"outcome_id": "Q31", "kind": "continuous",
         "subsample_filter": {"name": "accepters_only", "item_id": "Q20", "equals": 1}}
    ])";
    const auto outcomes = outcomes_from_json_text(text, inst);
    REQUIRE(outcomes.size() == 2);
    CHECK(outcomes[0].kind == OutcomeSpec::Kind::binary);
    REQUIRE(outcomes[1].subsample_filter.has_value());
    CHECK(outcomes[1].subsample_filter->name == "accepters_only");

    CHECK_THROWS_AS((void)outcomes_from_json_text(
                        R"([{"outcome_id": "Q1", "kind": "binary"}])", inst),
                    Error); // Q1 is not usage=outcome
}
