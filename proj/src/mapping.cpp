#include "mval/mapping.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mval/harmonize.hpp"

namespace mval {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

bool weight_before(const WeightEntry& a, const WeightEntry& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    return a.subdim_id < b.subdim_id;
}

namespace {

void canonicalize(MappingRow& row) {
    std::sort(row.weights.begin(), row.weights.end(),
              [](const WeightEntry& a, const WeightEntry& b) { return a.subdim_id < b.subdim_id; });
}

double row_sum(const MappingRow& row) {
    double s = 0.0;
    for (const auto& w : row.weights) s += w.weight;
    return s;
}

std::vector<WeightEntry> by_rank(const MappingRow& row) {
    std::vector<WeightEntry> sorted = row.weights;
    std::sort(sorted.begin(), sorted.end(), weight_before);
    return sorted;
}

MappingRow renormalized(const MappingRow& row, std::vector<WeightEntry> kept) {
    MappingRow out = row;
    double s = 0.0;
    for (const auto& w : kept) s += w.weight;
    for (auto& w : kept) w.weight /= s;
    out.weights = std::move(kept);
    canonicalize(out);
    return out;
}

} // namespace

MappingMatrix::MappingMatrix(std::vector<MappingRow> rows) : rows_(std::move(rows)) {
    for (auto& row : rows_) canonicalize(row);
}

bool MappingMatrix::has_row(const std::string& item_id) const {
    return std::any_of(rows_.begin(), rows_.end(),
                       [&](const MappingRow& r) { return r.item_id == item_id; });
}

const MappingRow& MappingMatrix::row(const std::string& item_id) const {
    for (const auto& r : rows_)
        if (r.item_id == item_id) return r;
    fail(Errc::unknown_item, "no mapping row for item '" + item_id + "'");
}

void MappingMatrix::bind(const Taxonomy& t) {
    taxonomy_version_ = t.version();
    anchored_subdims_.clear();
    for (const auto& s : t.subdimensions())
        if (s.anchored) anchored_subdims_.insert(s.subdim_id);
}

bool MappingMatrix::row_is_anchored(const MappingRow& row) const {
    if (row.weights.size() != 1) return false;
    const WeightEntry& w = row.weights.front();
    return std::abs(w.weight - 1.0) <= kSimplexTol && anchored_subdims_.count(w.subdim_id) != 0;
}

double MappingMatrix::scale_for(const std::string& item_id) const {
    auto it = item_scale_.find(item_id);
    return it == item_scale_.end() ? 1.0 : it->second;
}

ValidationReport validate_mapping(const MappingMatrix& w, const Taxonomy& t,
                                  const Instrument* instrument) {
    ValidationReport report;
    std::set<std::string> seen_items;
    for (const auto& row : w.rows()) {
        if (!seen_items.insert(row.item_id).second)
            report.add("duplicate_item", row.item_id, "two mapping rows for one item");
        if (row.weights.empty()) {
            report.add("empty_row", row.item_id, "row has no weights");
            continue;
        }
        std::set<std::string> seen_subdims;
        std::size_t nonzero = 0;
        for (const auto& entry : row.weights) {
            if (!seen_subdims.insert(entry.subdim_id).second)
                report.add("duplicate_weight", row.item_id,
                           "subdimension '" + entry.subdim_id + "' repeated in row");
            if (entry.weight < 0.0)
                report.add("negative_weight", row.item_id,
                           "'" + entry.subdim_id + "' has weight " + std::to_string(entry.weight));
            if (entry.weight != 0.0) ++nonzero;
            if (!t.has_subdim(entry.subdim_id)) {
                report.add("stale_subdim", row.item_id,
                           "subdimension '" + entry.subdim_id + "' not in taxonomy v" +
                               std::to_string(t.version()));
            } else if (!t.is_leaf(entry.subdim_id)) {
                report.add("split_parent_weight", row.item_id,
                           "weight on split parent '" + entry.subdim_id + "'");
            }
        }
        const double s = row_sum(row);
        if (std::abs(s - 1.0) > kSimplexTol)
            report.add("row_sum", row.item_id, "weights sum to " + std::to_string(s));
        if (w.sparsity_m() > 0 && nonzero > static_cast<std::size_t>(w.sparsity_m()))
            report.add("sparsity_cap", row.item_id,
                       std::to_string(nonzero) + " nonzero weights exceed m=" +
                           std::to_string(w.sparsity_m()));
        if (instrument && instrument->contains(row.item_id)) {
            const Usage usage = instrument->item(row.item_id).usage;
            if (usage != Usage::mechanism) {
                const bool pure = row.weights.size() == 1 &&
                                  std::abs(row.weights.front().weight - 1.0) <= kSimplexTol;
                if (!pure)
                    report.add("impure_nonmechanism_row", row.item_id,
                               "usage=" + std::string(to_string(usage)) +
                                   " rows must be a single 1.0 weight");
            }
        }
    }
    return report;
}

MappingMatrix sparsify_threshold(const MappingMatrix& w, double tau) {
    if (!(tau >= 0.0 && tau < 1.0)) fail(Errc::precondition, "tau must be in [0,1)");
    MappingMatrix out = w;
    out.set_tau(tau);
    for (auto& row : out.rows()) {
        if (out.row_is_anchored(row)) continue;
        std::vector<WeightEntry> kept;
        for (const auto& entry : row.weights)
            if (entry.weight >= tau && entry.weight > 0.0) kept.push_back(entry);
        if (kept.size() == row.weights.size()) continue; // nothing dropped
        if (kept.empty()) {
            // all weights below tau: keep the largest at 1.0
            auto ranked = by_rank(row);
            kept.push_back({ranked.front().subdim_id, 1.0});
            row.weights = std::move(kept);
            canonicalize(row);
            continue;
        }
        row = renormalized(row, std::move(kept));
    }
    return out;
}

MappingMatrix sparsify_top_m(const MappingMatrix& w, int m) {
    if (m < 1) fail(Errc::precondition, "m must be >= 1");
    MappingMatrix out = w;
    out.set_sparsity_m(m);
    for (auto& row : out.rows()) {
        if (out.row_is_anchored(row)) continue;
        std::vector<WeightEntry> nonzero;
        for (const auto& entry : row.weights)
            if (entry.weight > 0.0) nonzero.push_back(entry);
        if (nonzero.size() <= static_cast<std::size_t>(m)) continue;
        std::sort(nonzero.begin(), nonzero.end(), weight_before);
        nonzero.resize(static_cast<std::size_t>(m));
        row = renormalized(row, std::move(nonzero));
    }
    return out;
}

MappingMatrix tighten_primary_secondary(const MappingMatrix& w, double secondary_lo,
                                        double secondary_hi) {
    if (!(secondary_lo > 0.0 && secondary_hi < 0.5 && secondary_lo <= secondary_hi))
        fail(Errc::precondition, "secondary band must satisfy 0 < lo <= hi < 0.5");
    MappingMatrix out = w;
    for (auto& row : out.rows()) {
        if (out.row_is_anchored(row)) continue;
        auto ranked = by_rank(row);
        while (!ranked.empty() && ranked.back().weight <= 0.0) ranked.pop_back();
        if (ranked.size() <= 1) {
            if (!ranked.empty()) {
                row.weights = {{ranked.front().subdim_id, 1.0}};
                canonicalize(row);
            }
            continue;
        }
        const double s_raw = ranked[1].weight / (ranked[0].weight + ranked[1].weight);
        if (s_raw < secondary_lo) {
            row.weights = {{ranked.front().subdim_id, 1.0}};
        } else {
            const double s = std::min(s_raw, secondary_hi);
            row.weights = {{ranked[0].subdim_id, 1.0 - s}, {ranked[1].subdim_id, s}};
        }
        canonicalize(row);
    }
    return out;
}

MappingMatrix reweight_by_coverage(const MappingMatrix& w, const CoverageWeights& c) {
    MappingMatrix out = w;
    std::map<std::string, double> scale;
    for (const auto& row : w.rows()) {
        auto it = c.share.find(row.item_id);
        if (it == c.share.end())
            fail(Errc::missing_coverage, "no coverage weight for item '" + row.item_id + "'");
        scale[row.item_id] = it->second;
    }
    out.set_item_scale(std::move(scale));
    return out;
}

HardMapping to_hard_mapping(const MappingMatrix& w) {
    HardMapping hard;
    for (const auto& row : w.rows()) {
        if (row.weights.empty()) continue;
        auto ranked = by_rank(row);
        hard.target[row.item_id] = ranked.front().subdim_id;
    }
    return hard;
}

CrossLoadingReport cross_loading_concentration(const MappingMatrix& w, double closeness,
                                               const Instrument* instrument) {
    if (!(closeness > 0.0 && closeness <= 1.0))
        fail(Errc::precondition, "closeness must be in (0,1]");
    CrossLoadingReport report;
    report.closeness = closeness;
    for (const auto& row : w.rows()) {
        if (instrument) {
            if (!instrument->contains(row.item_id)) continue;
            if (instrument->item(row.item_id).usage != Usage::mechanism) continue;
        }
        ++report.considered;
        auto ranked = by_rank(row);
        while (!ranked.empty() && ranked.back().weight <= 0.0) ranked.pop_back();
        if (ranked.size() < 2) continue;
        const double gap = ranked[0].weight - ranked[1].weight;
        if (gap <= closeness)
            report.flags.push_back({row.item_id, ranked[0].weight, ranked[1].weight, gap});
    }
    report.flagged_share = report.considered == 0
                               ? 0.0
                               : static_cast<double>(report.flags.size()) /
                                     static_cast<double>(report.considered);
    return report;
}

CoverageWeights compute_coverage(const HarmonizedMatrix& h,
                                 const std::vector<std::size_t>& train_rows) {
    if (train_rows.empty()) fail(Errc::precondition, "compute_coverage: empty training set");
    CoverageWeights c;
    for (std::size_t col = 0; col < h.n_cols(); ++col) {
        std::size_t present = 0;
        const double* values = h.col(col);
        for (std::size_t r : train_rows)
            if (!is_missing(values[r])) ++present;
        c.share[h.item_ids[col]] =
            static_cast<double>(present) / static_cast<double>(train_rows.size());
    }
    return c;
}

MappingMatrix mapping_from_json_text(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) fail(Errc::schema_error, "mapping: invalid JSON");

    json rows_json;
    int sparsity_m = 0;
    double tau = 0.0;
    std::uint64_t taxonomy_version = 0;
    if (j.is_array()) {
        rows_json = j;
    } else if (j.is_object() && j.contains("rows")) {
        rows_json = j.at("rows");
        sparsity_m = j.value("sparsity_m", 0);
        tau = j.value("tau", 0.0);
        taxonomy_version = j.value("taxonomy_version", 0ULL);
    } else {
        fail(Errc::schema_error, "mapping: expected a JSON list of rows or {rows: [...]}");
    }

    std::vector<MappingRow> rows;
    for (const auto& rec : rows_json) {
        MappingRow row;
        row.item_id = rec.at("item_id").get<std::string>();
        const auto& weights = rec.at("weights");
        if (weights.is_array()) {
            for (const auto& entry : weights)
                row.weights.push_back({entry.at("subdim_id").get<std::string>(),
                                       entry.at("weight").get<double>()});
        } else if (weights.is_object()) {
            // compact {construct_name: weight, ...} object form
            for (const auto& [name, value] : weights.items())
                row.weights.push_back({name, value.get<double>()});
        } else {
            fail(Errc::schema_error, "mapping row '" + row.item_id + "': bad weights");
        }
        row.rationale = rec.value("rationale", std::string{});
        row.not_this = rec.value("not_this", std::string{});
        row.proposer_id = rec.value("proposer", std::string{});
        rows.push_back(std::move(row));
    }
    MappingMatrix built(std::move(rows));
    built.set_sparsity_m(sparsity_m);
    built.set_tau(tau);
    built.set_taxonomy_version(taxonomy_version);
    return built;
}

MappingMatrix load_mapping(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::io_error, "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return mapping_from_json_text(buf.str());
}

void write_mapping(const std::string& path, const MappingMatrix& w, bool bare_list) {
    ordered_json rows = ordered_json::array();
    for (const auto& row : w.rows()) {
        ordered_json rec;
        rec["item_id"] = row.item_id;
        ordered_json weights = ordered_json::array();
        for (const auto& entry : row.weights)
            weights.push_back({{"subdim_id", entry.subdim_id}, {"weight", entry.weight}});
        rec["weights"] = std::move(weights);
        rec["rationale"] = row.rationale;
        rec["not_this"] = row.not_this;
        if (!row.proposer_id.empty()) rec["proposer"] = row.proposer_id;
        rows.push_back(std::move(rec));
    }
    ordered_json out;
    if (bare_list) {
        out = std::move(rows);
    } else {
        out["taxonomy_version"] = w.taxonomy_version();
        out["sparsity_m"] = w.sparsity_m();
        out["tau"] = w.tau();
        out["rows"] = std::move(rows);
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) fail(Errc::io_error, "cannot write " + path);
    f << out.dump(2) << '\n';
}

} // namespace mval
