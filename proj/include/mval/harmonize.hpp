#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mval/common.hpp"
#include "mval/instrument.hpp"

namespace mval {

enum class RuleKind {
    identity_ordinal,
    categorical_to_ordered_codes,
    log1p_numeric,
    binary_01,
    numeric_identity,
    drop,
};

std::string_view to_string(RuleKind k);
RuleKind rule_kind_from_string(std::string_view s);

struct WinsorizeSpec {
    double lo = 0.01;
    double hi = 0.99;
};

struct HarmonizationRule {
    std::string item_id;
    RuleKind kind = RuleKind::numeric_identity;
    std::map<std::string, double> codes; // categorical_to_ordered_codes only
    std::optional<WinsorizeSpec> winsorize;
    bool standardize = false;
};

// Numeric respondent x item matrix, column-major (respondents contiguous
// within a column). Missing cells are NaN.
struct HarmonizedMatrix {
    std::vector<std::string> respondent_ids;
    std::vector<std::string> item_ids;
    std::vector<double> values; // item_ids.size() columns of n_rows() each

    std::size_t n_rows() const { return respondent_ids.size(); }
    std::size_t n_cols() const { return item_ids.size(); }
    double at(std::size_t row, std::size_t col) const { return values[col * n_rows() + row]; }
    double& at(std::size_t row, std::size_t col) { return values[col * n_rows() + row]; }
    const double* col(std::size_t c) const { return values.data() + c * n_rows(); }
    double* col(std::size_t c) { return values.data() + c * n_rows(); }
    std::size_t col_index(const std::string& item_id) const;
    bool has_col(const std::string& item_id) const;
};

struct HarmonizeReport {
    // Cells turned missing by a rule (unparseable numerics, log1p domain).
    std::map<std::string, std::size_t> induced_missing;
};

// Per-column training statistics; fitted from training rows only.
struct ColumnTransform {
    bool winsorize = false;
    double lo_cut = 0.0;
    double hi_cut = 0.0;
    bool standardize = false;
    double mean = 0.0;
    double sd = 1.0;
    bool degenerate = false; // constant training column: centered, sd forced to 1
};

struct FoldTransform {
    std::vector<std::string> item_ids;
    std::vector<ColumnTransform> cols;
    std::vector<std::string> degenerate_items;
};

std::vector<HarmonizationRule> load_rules(const std::string& path);
std::vector<HarmonizationRule> rules_from_json_text(const std::string& text);
void write_rules(const std::string& path, const std::vector<HarmonizationRule>& rules);

HarmonizedMatrix apply_rules(const ResponseMatrix& raw, const std::vector<HarmonizationRule>& rules,
                             const Instrument& instrument, HarmonizeReport* report = nullptr);

FoldTransform fit_fold_transform(const HarmonizedMatrix& h, const std::vector<std::size_t>& train_rows,
                                 const std::vector<HarmonizationRule>& rules);

// Returns a copy of h with the listed rows transformed using t's training
// statistics only. Pass an empty row list to transform every row.
HarmonizedMatrix apply_fold_transform(const HarmonizedMatrix& h, const FoldTransform& t,
                                      const std::vector<std::size_t>& rows = {});

void write_harmonized(const std::string& path, const HarmonizedMatrix& h);

// Lower nearest-rank quantile (no interpolation) of an ascending-sorted vector.
double quantile_nearest_lower(const std::vector<double>& sorted_values, double q);

} // namespace mval
