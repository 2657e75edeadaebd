#include "mval/instrument.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mval/csv.hpp"

namespace mval {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string_view to_string(ResponseKind k) {
    switch (k) {
        case ResponseKind::binary: return "binary";
        case ResponseKind::ordinal: return "ordinal";
        case ResponseKind::categorical: return "categorical";
        case ResponseKind::numeric: return "numeric";
        case ResponseKind::free_text: return "free_text";
    }
    return "numeric";
}

std::string_view to_string(Usage u) {
    switch (u) {
        case Usage::mechanism: return "mechanism";
        case Usage::control: return "control";
        case Usage::outcome: return "outcome";
        case Usage::excluded: return "excluded";
    }
    return "mechanism";
}

ResponseKind response_kind_from_string(std::string_view s) {
    if (s == "binary") return ResponseKind::binary;
    if (s == "ordinal") return ResponseKind::ordinal;
    if (s == "categorical") return ResponseKind::categorical;
    if (s == "numeric") return ResponseKind::numeric;
    if (s == "free_text") return ResponseKind::free_text;
    fail(Errc::schema_error, "unknown response_kind '" + std::string(s) + "'");
}

Usage usage_from_string(std::string_view s) {
    if (s == "mechanism") return Usage::mechanism;
    if (s == "control") return Usage::control;
    if (s == "outcome") return Usage::outcome;
    if (s == "excluded") return Usage::excluded;
    fail(Errc::schema_error, "unknown usage '" + std::string(s) + "'");
}

Instrument::Instrument(std::vector<SurveyItem> items) : items_(std::move(items)) {
    if (items_.empty()) fail(Errc::schema_error, "instrument has no items");
    for (std::size_t i = 0; i < items_.size(); ++i) {
        const SurveyItem& item = items_[i];
        if (item.item_id.empty()) fail(Errc::schema_error, "item with empty id");
        if (!index_.emplace(item.item_id, i).second)
            fail(Errc::duplicate_id, "duplicate item_id '" + item.item_id + "'");
        if ((item.response_kind == ResponseKind::ordinal ||
             item.response_kind == ResponseKind::categorical) &&
            item.option_labels.size() < 2)
            fail(Errc::schema_error,
                 "item '" + item.item_id + "' is ordinal/categorical but has fewer than 2 options");
    }
}

std::size_t Instrument::index_of(const std::string& item_id) const {
    auto it = index_.find(item_id);
    if (it == index_.end()) fail(Errc::unknown_item, "item '" + item_id + "' not in instrument");
    return it->second;
}

std::vector<std::string> default_missing_tokens() { return {"", "NA", "Prefer not to say"}; }

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::io_error, "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

json parse_json(const std::string& text, const std::string& what) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) fail(Errc::schema_error, what + ": invalid JSON");
    return j;
}

} // namespace

Instrument instrument_from_json_text(const std::string& text) {
    const json j = parse_json(text, "instrument");
    if (!j.is_array()) fail(Errc::schema_error, "instrument: expected a JSON list of items");
    std::vector<SurveyItem> items;
    items.reserve(j.size());
    for (const auto& rec : j) {
        if (!rec.is_object() || !rec.contains("item_id"))
            fail(Errc::schema_error, "instrument: item record missing item_id");
        SurveyItem item;
        item.item_id = rec.at("item_id").get<std::string>();
        item.stem_text = rec.value("stem_text", std::string{});
        item.response_kind = response_kind_from_string(rec.value("response_kind", "numeric"));
        if (rec.contains("option_labels"))
            item.option_labels = rec.at("option_labels").get<std::vector<std::string>>();
        item.usage = usage_from_string(rec.value("usage", "mechanism"));
        items.push_back(std::move(item));
    }
    return Instrument(std::move(items));
}

Instrument load_instrument(const std::string& path) {
    return instrument_from_json_text(slurp(path));
}

void write_instrument(const std::string& path, const Instrument& instrument) {
    ordered_json out = ordered_json::array();
    for (const auto& item : instrument.items()) {
        ordered_json rec;
        rec["item_id"] = item.item_id;
        rec["stem_text"] = item.stem_text;
        rec["response_kind"] = std::string(to_string(item.response_kind));
        rec["option_labels"] = item.option_labels;
        rec["usage"] = std::string(to_string(item.usage));
        out.push_back(std::move(rec));
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) fail(Errc::io_error, "cannot write " + path);
    f << out.dump(2) << '\n';
}

ResponseMatrix responses_from_csv_text(const std::string& text, const Instrument& instrument,
                                       const std::vector<std::string>& missing_tokens) {
    const auto rows = csv::parse(text);
    if (rows.empty()) fail(Errc::schema_error, "responses: empty file");
    const auto& header = rows.front();
    if (header.empty() || header[0] != "respondent_id")
        fail(Errc::schema_error, "responses: first column must be respondent_id");

    ResponseMatrix m;
    std::set<std::string> seen_cols;
    for (std::size_t c = 1; c < header.size(); ++c) {
        const std::string& id = header[c];
        if (!instrument.contains(id))
            fail(Errc::unknown_item, "responses: column '" + id + "' not in instrument");
        if (!seen_cols.insert(id).second)
            fail(Errc::schema_error, "responses: duplicate column '" + id + "'");
        m.item_ids.push_back(id);
    }

    const std::set<std::string> missing(missing_tokens.begin(), missing_tokens.end());
    const std::size_t cols = m.item_ids.size();
    std::set<std::string> seen_ids;
    m.cells.reserve((rows.size() - 1) * cols);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != header.size())
            fail(Errc::schema_error,
                 "responses: row " + std::to_string(r) + " has " + std::to_string(row.size()) +
                     " fields, expected " + std::to_string(header.size()));
        if (!seen_ids.insert(row[0]).second)
            fail(Errc::schema_error, "responses: duplicate respondent_id '" + row[0] + "'");
        m.respondent_ids.push_back(row[0]);
        for (std::size_t c = 1; c < row.size(); ++c)
            m.cells.push_back({row[c], missing.count(row[c]) != 0});
    }
    return m;
}

ResponseMatrix load_responses(const std::string& path, const Instrument& instrument,
                              const std::vector<std::string>& missing_tokens) {
    return responses_from_csv_text(slurp(path), instrument, missing_tokens);
}

void write_responses(const std::string& path, const ResponseMatrix& matrix) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(matrix.n_respondents() + 1);
    std::vector<std::string> header{"respondent_id"};
    header.insert(header.end(), matrix.item_ids.begin(), matrix.item_ids.end());
    rows.push_back(std::move(header));
    for (std::size_t i = 0; i < matrix.n_respondents(); ++i) {
        std::vector<std::string> row{matrix.respondent_ids[i]};
        for (std::size_t j = 0; j < matrix.n_items(); ++j) row.push_back(matrix.cell(i, j).token);
        rows.push_back(std::move(row));
    }
    csv::write_file(path, rows);
}

std::vector<OutcomeSpec> outcomes_from_json_text(const std::string& text,
                                                 const Instrument& instrument) {
    const json j = parse_json(text, "outcomes");
    if (!j.is_array()) fail(Errc::schema_error, "outcomes: expected a JSON list");
    std::vector<OutcomeSpec> specs;
    for (const auto& rec : j) {
        OutcomeSpec spec;
        spec.outcome_id = rec.at("outcome_id").get<std::string>();
        if (!instrument.contains(spec.outcome_id))
            fail(Errc::unknown_item, "outcome '" + spec.outcome_id + "' not in instrument");
        if (instrument.item(spec.outcome_id).usage != Usage::outcome)
            fail(Errc::schema_error, "outcome '" + spec.outcome_id + "' item is not usage=outcome");
        const std::string kind = rec.value("kind", "binary");
        if (kind == "binary") spec.kind = OutcomeSpec::Kind::binary;
        else if (kind == "continuous") spec.kind = OutcomeSpec::Kind::continuous;
        else fail(Errc::schema_error, "outcome kind '" + kind + "'");
        if (rec.contains("subsample_filter") && !rec.at("subsample_filter").is_null()) {
            const auto& f = rec.at("subsample_filter");
            SubsampleFilter filter;
            filter.name = f.at("name").get<std::string>();
            filter.item_id = f.at("item_id").get<std::string>();
            filter.equals = f.value("equals", 1.0);
            if (!instrument.contains(filter.item_id))
                fail(Errc::unknown_item, "subsample_filter item '" + filter.item_id + "'");
            spec.subsample_filter = std::move(filter);
        }
        if (rec.contains("covariate_item_ids")) {
            spec.covariate_item_ids =
                rec.at("covariate_item_ids").get<std::vector<std::string>>();
            for (const auto& id : spec.covariate_item_ids)
                if (!instrument.contains(id))
                    fail(Errc::unknown_item, "covariate '" + id + "' not in instrument");
        }
        specs.push_back(std::move(spec));
    }
    return specs;
}

std::vector<OutcomeSpec> load_outcomes(const std::string& path, const Instrument& instrument) {
    return outcomes_from_json_text(slurp(path), instrument);
}

void write_outcomes(const std::string& path, const std::vector<OutcomeSpec>& outcomes) {
    ordered_json out = ordered_json::array();
    for (const auto& spec : outcomes) {
        ordered_json rec;
        rec["outcome_id"] = spec.outcome_id;
        rec["kind"] = spec.kind == OutcomeSpec::Kind::binary ? "binary" : "continuous";
        if (spec.subsample_filter) {
            rec["subsample_filter"] = {{"name", spec.subsample_filter->name},
                                       {"item_id", spec.subsample_filter->item_id},
                                       {"equals", spec.subsample_filter->equals}};
        } else {
            rec["subsample_filter"] = nullptr;
        }
        rec["covariate_item_ids"] = spec.covariate_item_ids;
        out.push_back(std::move(rec));
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) fail(Errc::io_error, "cannot write " + path);
    f << out.dump(2) << '\n';
}

} // namespace mval
