#include "mval/harmonize.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mval/csv.hpp"
#include "mval/kernels.hpp"

namespace mval {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string_view to_string(RuleKind k) {
    switch (k) {
        case RuleKind::identity_ordinal: return "identity_ordinal";
        case RuleKind::categorical_to_ordered_codes: return "categorical_to_ordered_codes";
        case RuleKind::log1p_numeric: return "log1p_numeric";
        case RuleKind::binary_01: return "binary_01";
        case RuleKind::numeric_identity: return "numeric_identity";
        case RuleKind::drop: return "drop";
    }
    return "numeric_identity";
}

RuleKind rule_kind_from_string(std::string_view s) {
    if (s == "identity_ordinal") return RuleKind::identity_ordinal;
    if (s == "categorical_to_ordered_codes") return RuleKind::categorical_to_ordered_codes;
    if (s == "log1p_numeric") return RuleKind::log1p_numeric;
    if (s == "binary_01") return RuleKind::binary_01;
    if (s == "numeric_identity") return RuleKind::numeric_identity;
    if (s == "drop") return RuleKind::drop;
    fail(Errc::schema_error, "unknown harmonization rule kind '" + std::string(s) + "'");
}

std::size_t HarmonizedMatrix::col_index(const std::string& item_id) const {
    for (std::size_t c = 0; c < item_ids.size(); ++c)
        if (item_ids[c] == item_id) return c;
    fail(Errc::unknown_item, "item '" + item_id + "' not in harmonized matrix");
}

bool HarmonizedMatrix::has_col(const std::string& item_id) const {
    return std::find(item_ids.begin(), item_ids.end(), item_id) != item_ids.end();
}

std::vector<HarmonizationRule> rules_from_json_text(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_array())
        fail(Errc::schema_error, "rules: expected a JSON list");
    std::vector<HarmonizationRule> rules;
    for (const auto& rec : j) {
        HarmonizationRule rule;
        rule.item_id = rec.at("item_id").get<std::string>();
        rule.kind = rule_kind_from_string(rec.value("kind", "numeric_identity"));
        if (rec.contains("codes"))
            for (const auto& [token, code] : rec.at("codes").items())
                rule.codes[token] = code.get<double>();
        if (rec.contains("winsorize") && !rec.at("winsorize").is_null()) {
            WinsorizeSpec w;
            w.lo = rec.at("winsorize").value("lo", 0.01);
            w.hi = rec.at("winsorize").value("hi", 0.99);
            if (!(0.0 <= w.lo && w.lo < w.hi && w.hi <= 1.0))
                fail(Errc::schema_error, "rule for '" + rule.item_id + "': bad winsorize quantiles");
            rule.winsorize = w;
        }
        rule.standardize = rec.value("standardize", false);
        rules.push_back(std::move(rule));
    }
    return rules;
}

std::vector<HarmonizationRule> load_rules(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::io_error, "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return rules_from_json_text(buf.str());
}

void write_rules(const std::string& path, const std::vector<HarmonizationRule>& rules) {
    ordered_json out = ordered_json::array();
    for (const auto& rule : rules) {
        ordered_json rec;
        rec["item_id"] = rule.item_id;
        rec["kind"] = std::string(to_string(rule.kind));
        if (!rule.codes.empty()) rec["codes"] = rule.codes;
        if (rule.winsorize)
            rec["winsorize"] = {{"lo", rule.winsorize->lo}, {"hi", rule.winsorize->hi}};
        rec["standardize"] = rule.standardize;
        out.push_back(std::move(rec));
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) fail(Errc::io_error, "cannot write " + path);
    f << out.dump(2) << '\n';
}

namespace {

std::optional<double> parse_number(const std::string& token) {
    const char* begin = token.data();
    const char* end = begin + token.size();
    while (begin != end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end != begin && (end[-1] == ' ' || end[-1] == '\t')) --end;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end || begin == end) return std::nullopt;
    return value;
}

std::size_t option_index(const SurveyItem& item, const std::string& token) {
    for (std::size_t i = 0; i < item.option_labels.size(); ++i)
        if (item.option_labels[i] == token) return i;
    fail(Errc::code_table_gap,
         "item '" + item.item_id + "': response '" + token + "' is not an option label");
}

} // namespace

HarmonizedMatrix apply_rules(const ResponseMatrix& raw, const std::vector<HarmonizationRule>& rules,
                             const Instrument& instrument, HarmonizeReport* report) {
    std::map<std::string, const HarmonizationRule*> by_item;
    for (const auto& rule : rules) {
        if (!by_item.emplace(rule.item_id, &rule).second)
            fail(Errc::duplicate_id, "two rules for item '" + rule.item_id + "'");
        if (!instrument.contains(rule.item_id))
            fail(Errc::unknown_item, "rule references unknown item '" + rule.item_id + "'");
    }

    // Column plan: drop-ruled columns are excluded; mechanism/control columns
    // require a rule; outcome columns default to a numeric passthrough;
    // excluded-usage columns without a rule are dropped.
    struct Col {
        std::size_t raw_col;
        const SurveyItem* item;
        HarmonizationRule effective;
    };
    std::vector<Col> plan;
    for (std::size_t j = 0; j < raw.n_items(); ++j) {
        const SurveyItem& item = instrument.item(raw.item_ids[j]);
        auto it = by_item.find(item.item_id);
        if (it != by_item.end()) {
            if (it->second->kind == RuleKind::drop) continue;
            if (it->second->kind == RuleKind::categorical_to_ordered_codes) {
                for (const auto& label : item.option_labels)
                    if (!it->second->codes.count(label))
                        fail(Errc::code_table_gap, "item '" + item.item_id +
                                                       "': code table misses option '" + label + "'");
            }
            plan.push_back({j, &item, *it->second});
            continue;
        }
        if (item.usage == Usage::outcome) {
            HarmonizationRule passthrough;
            passthrough.item_id = item.item_id;
            passthrough.kind = RuleKind::numeric_identity;
            plan.push_back({j, &item, std::move(passthrough)});
            continue;
        }
        if (item.usage == Usage::excluded) continue;
        fail(Errc::missing_rule, "no harmonization rule for item '" + item.item_id + "'");
    }

    HarmonizedMatrix h;
    h.respondent_ids = raw.respondent_ids;
    const std::size_t n = raw.n_respondents();
    h.item_ids.reserve(plan.size());
    h.values.assign(plan.size() * n, kMissing);

    for (std::size_t c = 0; c < plan.size(); ++c) {
        const Col& col = plan[c];
        h.item_ids.push_back(col.item->item_id);
        std::size_t induced = 0;
        double* out = h.values.data() + c * n;
        for (std::size_t i = 0; i < n; ++i) {
            const RawCell& cell = raw.cell(i, col.raw_col);
            if (cell.missing) continue;
            switch (col.effective.kind) {
                case RuleKind::identity_ordinal:
                    out[i] = static_cast<double>(option_index(*col.item, cell.token));
                    break;
                case RuleKind::categorical_to_ordered_codes: {
                    auto it = col.effective.codes.find(cell.token);
                    if (it == col.effective.codes.end())
                        fail(Errc::code_table_gap, "item '" + col.item->item_id +
                                                       "': response '" + cell.token +
                                                       "' not in code table");
                    out[i] = it->second;
                    break;
                }
                case RuleKind::log1p_numeric: {
                    auto v = parse_number(cell.token);
                    if (!v || *v < 0.0) {
                        ++induced;
                        break;
                    }
                    out[i] = std::log1p(*v);
                    break;
                }
                case RuleKind::binary_01: {
                    if (col.item->option_labels.size() == 2) {
                        if (cell.token == col.item->option_labels[0]) out[i] = 0.0;
                        else if (cell.token == col.item->option_labels[1]) out[i] = 1.0;
                        else
                            fail(Errc::code_table_gap, "item '" + col.item->item_id +
                                                           "': binary response '" + cell.token + "'");
                        break;
                    }
                    auto v = parse_number(cell.token);
                    if (!v || (*v != 0.0 && *v != 1.0))
                        fail(Errc::code_table_gap, "item '" + col.item->item_id +
                                                       "': binary response '" + cell.token + "'");
                    out[i] = *v;
                    break;
                }
                case RuleKind::numeric_identity: {
                    auto v = parse_number(cell.token);
                    if (!v) {
                        ++induced;
                        break;
                    }
                    out[i] = *v;
                    break;
                }
                case RuleKind::drop: break; // unreachable
            }
        }
        if (report && induced > 0) report->induced_missing[col.item->item_id] += induced;
    }
    return h;
}

double quantile_nearest_lower(const std::vector<double>& sorted_values, double q) {
    if (sorted_values.empty()) return kMissing;
    const double m = static_cast<double>(sorted_values.size());
    auto idx = static_cast<std::ptrdiff_t>(std::ceil(q * m)) - 1;
    if (idx < 0) idx = 0;
    if (idx >= static_cast<std::ptrdiff_t>(sorted_values.size()))
        idx = static_cast<std::ptrdiff_t>(sorted_values.size()) - 1;
    return sorted_values[static_cast<std::size_t>(idx)];
}

FoldTransform fit_fold_transform(const HarmonizedMatrix& h, const std::vector<std::size_t>& train_rows,
                                 const std::vector<HarmonizationRule>& rules) {
    if (train_rows.empty()) fail(Errc::precondition, "fit_fold_transform: empty training set");
    for (std::size_t r : train_rows)
        if (r >= h.n_rows()) fail(Errc::shape_mismatch, "training row out of range");

    std::map<std::string, const HarmonizationRule*> by_item;
    for (const auto& rule : rules) by_item[rule.item_id] = &rule;

    FoldTransform t;
    t.item_ids = h.item_ids;
    t.cols.resize(h.n_cols());

    std::vector<double> train_values;
    for (std::size_t c = 0; c < h.n_cols(); ++c) {
        ColumnTransform& ct = t.cols[c];
        auto it = by_item.find(h.item_ids[c]);
        if (it == by_item.end()) continue; // passthrough column (e.g. outcome)
        const HarmonizationRule& rule = *it->second;
        if (!rule.winsorize && !rule.standardize) continue;

        train_values.clear();
        const double* col = h.col(c);
        for (std::size_t r : train_rows)
            if (!is_missing(col[r])) train_values.push_back(col[r]);

        if (rule.standardize && train_values.size() < 2)
            fail(Errc::precondition, "item '" + h.item_ids[c] +
                                         "': fewer than 2 non-missing training values");
        if (train_values.empty()) {
            // nothing to fit; column stays untouched and is flagged
            ct.degenerate = true;
            t.degenerate_items.push_back(h.item_ids[c]);
            continue;
        }

        std::sort(train_values.begin(), train_values.end());
        if (rule.winsorize) {
            ct.winsorize = true;
            ct.lo_cut = quantile_nearest_lower(train_values, rule.winsorize->lo);
            ct.hi_cut = quantile_nearest_lower(train_values, rule.winsorize->hi);
            kern::clamp_range(train_values.data(), train_values.size(), ct.lo_cut, ct.hi_cut);
        }
        if (rule.standardize) {
            ct.standardize = true;
            const std::size_t m = train_values.size();
            ct.mean = kern::sum(train_values.data(), m) / static_cast<double>(m);
            const double ssd = kern::masked_sumsq_dev(train_values.data(), m, ct.mean);
            const double var = ssd / static_cast<double>(m - 1);
            if (var <= 0.0) {
                // constant column: center it but leave the scale alone
                ct.sd = 1.0;
                ct.degenerate = true;
                t.degenerate_items.push_back(h.item_ids[c]);
            } else {
                ct.sd = std::sqrt(var);
            }
        }
    }
    return t;
}

HarmonizedMatrix apply_fold_transform(const HarmonizedMatrix& h, const FoldTransform& t,
                                      const std::vector<std::size_t>& rows) {
    if (t.item_ids != h.item_ids)
        fail(Errc::shape_mismatch, "fold transform fitted on a different column set");
    HarmonizedMatrix out = h;
    const std::size_t n = h.n_rows();
    const bool all_rows = rows.empty();
    for (std::size_t r : rows)
        if (r >= n) fail(Errc::shape_mismatch, "transform row out of range");

    for (std::size_t c = 0; c < h.n_cols(); ++c) {
        const ColumnTransform& ct = t.cols[c];
        if (!ct.winsorize && !ct.standardize) continue;
        double* col = out.col(c);
        if (all_rows) {
            if (ct.winsorize) kern::clamp_range(col, n, ct.lo_cut, ct.hi_cut);
            if (ct.standardize) kern::scale_shift(col, n, ct.mean, 1.0 / ct.sd);
        } else {
            for (std::size_t r : rows) {
                double v = col[r];
                if (is_missing(v)) continue;
                if (ct.winsorize) v = v < ct.lo_cut ? ct.lo_cut : (v > ct.hi_cut ? ct.hi_cut : v);
                if (ct.standardize) v = (v - ct.mean) / ct.sd;
                col[r] = v;
            }
        }
    }
    return out;
}

void write_harmonized(const std::string& path, const HarmonizedMatrix& h) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(h.n_rows() + 1);
    std::vector<std::string> header{"respondent_id"};
    header.insert(header.end(), h.item_ids.begin(), h.item_ids.end());
    rows.push_back(std::move(header));
    for (std::size_t i = 0; i < h.n_rows(); ++i) {
        std::vector<std::string> row{h.respondent_ids[i]};
        for (std::size_t c = 0; c < h.n_cols(); ++c) {
            const double v = h.at(i, c);
            row.push_back(is_missing(v) ? std::string{} : csv::format_double(v));
        }
        rows.push_back(std::move(row));
    }
    csv::write_file(path, rows);
}

} // namespace mval
