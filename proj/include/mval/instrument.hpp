#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mval/common.hpp"

namespace mval {

enum class ResponseKind { binary, ordinal, categorical, numeric, free_text };
enum class Usage { mechanism, control, outcome, excluded };

std::string_view to_string(ResponseKind k);
std::string_view to_string(Usage u);
ResponseKind response_kind_from_string(std::string_view s);
Usage usage_from_string(std::string_view s);

struct SurveyItem {
    std::string item_id;
    std::string stem_text;
    ResponseKind response_kind = ResponseKind::numeric;
    std::vector<std::string> option_labels;
    Usage usage = Usage::mechanism;
};

class Instrument {
public:
    Instrument() = default;
    explicit Instrument(std::vector<SurveyItem> items);

    const std::vector<SurveyItem>& items() const { return items_; }
    std::size_t size() const { return items_.size(); }
    const SurveyItem& at(std::size_t i) const { return items_[i]; }

    bool contains(const std::string& item_id) const { return index_.count(item_id) != 0; }
    std::size_t index_of(const std::string& item_id) const;
    const SurveyItem& item(const std::string& item_id) const { return items_[index_of(item_id)]; }

private:
    std::vector<SurveyItem> items_;
    std::map<std::string, std::size_t> index_;
};

// Raw response cell: the verbatim token plus whether it counts as missing
// under the configured missing-token set. Tokens are preserved even for
// missing cells so matrices round-trip exactly.
struct RawCell {
    std::string token;
    bool missing = false;
};

struct ResponseMatrix {
    std::vector<std::string> respondent_ids; // length N
    std::vector<std::string> item_ids;       // length J
    std::vector<RawCell> cells;              // N*J, row-major

    std::size_t n_respondents() const { return respondent_ids.size(); }
    std::size_t n_items() const { return item_ids.size(); }
    const RawCell& cell(std::size_t i, std::size_t j) const { return cells[i * item_ids.size() + j]; }
    RawCell& cell(std::size_t i, std::size_t j) { return cells[i * item_ids.size() + j]; }
};

struct SubsampleFilter {
    std::string name;    // e.g. "accepters_only"
    std::string item_id; // harmonized item the predicate reads
    double equals = 1.0;
};

struct OutcomeSpec {
    std::string outcome_id; // id of the usage=outcome item holding the target
    enum class Kind { binary, continuous } kind = Kind::binary;
    std::optional<SubsampleFilter> subsample_filter;
    std::vector<std::string> covariate_item_ids;
};

std::vector<std::string> default_missing_tokens();

Instrument load_instrument(const std::string& path);
Instrument instrument_from_json_text(const std::string& text);
void write_instrument(const std::string& path, const Instrument& instrument);

ResponseMatrix load_responses(const std::string& path, const Instrument& instrument,
                              const std::vector<std::string>& missing_tokens =
                                  default_missing_tokens());
ResponseMatrix responses_from_csv_text(const std::string& text, const Instrument& instrument,
                                       const std::vector<std::string>& missing_tokens =
                                           default_missing_tokens());
void write_responses(const std::string& path, const ResponseMatrix& matrix);

std::vector<OutcomeSpec> load_outcomes(const std::string& path, const Instrument& instrument);
std::vector<OutcomeSpec> outcomes_from_json_text(const std::string& text,
                                                 const Instrument& instrument);
void write_outcomes(const std::string& path, const std::vector<OutcomeSpec>& outcomes);

} // namespace mval
