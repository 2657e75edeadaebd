#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mval/common.hpp"
#include "mval/instrument.hpp"
#include "mval/taxonomy.hpp"

namespace mval {

struct WeightEntry {
    std::string subdim_id;
    double weight = 0.0;
};

struct MappingRow {
    std::string item_id;
    std::vector<WeightEntry> weights; // sorted by subdim_id on construction
    std::string rationale;
    std::string not_this;
    std::string proposer_id;
};

// Item -> single subdimension; the hard-mapping baseline comparator.
struct HardMapping {
    std::map<std::string, std::string> target;
};

// Training-fold non-missing share per item; feeds the coverage-reweighted
// scoring rule as a per-item scale factor.
struct CoverageWeights {
    std::map<std::string, double> share;
};

// Item-to-subdimension weight rows on the simplex: each row nonnegative and
// summing to 1 within 1e-9, at most sparsity_m nonzero weights when capped.
class MappingMatrix {
public:
    MappingMatrix() = default;
    explicit MappingMatrix(std::vector<MappingRow> rows);

    const std::vector<MappingRow>& rows() const { return rows_; }
    std::vector<MappingRow>& rows() { return rows_; }
    bool has_row(const std::string& item_id) const;
    const MappingRow& row(const std::string& item_id) const;

    std::uint64_t taxonomy_version() const { return taxonomy_version_; }
    int sparsity_m() const { return sparsity_m_; }
    double tau() const { return tau_; }
    void set_sparsity_m(int m) { sparsity_m_ = m; }
    void set_tau(double tau) { tau_ = tau; }
    void set_taxonomy_version(std::uint64_t v) { taxonomy_version_ = v; }
    std::uint64_t version() const { return version_; }
    void set_version(std::uint64_t v) { version_ = v; }

    // Records the taxonomy version and its anchored leaves so later
    // transforms and refinements can honor Operator-1 freezes.
    void bind(const Taxonomy& t);
    const std::set<std::string>& anchored_subdims() const { return anchored_subdims_; }
    bool row_is_anchored(const MappingRow& row) const;

    // Per-item scale factors installed by reweight_by_coverage (default 1).
    const std::map<std::string, double>& item_scale() const { return item_scale_; }
    double scale_for(const std::string& item_id) const;
    void set_item_scale(std::map<std::string, double> scale) { item_scale_ = std::move(scale); }

private:
    std::uint64_t taxonomy_version_ = 0;
    std::uint64_t version_ = 1;
    std::vector<MappingRow> rows_;
    int sparsity_m_ = 0; // 0 = uncapped
    double tau_ = 0.0;
    std::set<std::string> anchored_subdims_;
    std::map<std::string, double> item_scale_;
};

// Deterministic ordering for equal weights: larger weight first, ties by
// lexicographically smaller subdim_id.
bool weight_before(const WeightEntry& a, const WeightEntry& b);

ValidationReport validate_mapping(const MappingMatrix& w, const Taxonomy& t,
                                  const Instrument* instrument = nullptr);

// Drop row weights below tau and renormalize; an all-below-tau row keeps its
// largest weight at 1.0 so rows stay on the simplex.
MappingMatrix sparsify_threshold(const MappingMatrix& w, double tau);

// Keep the m largest weights per row and renormalize.
MappingMatrix sparsify_top_m(const MappingMatrix& w, int m);

// One primary plus at most one secondary loading; the secondary share is the
// renormalized two-weight scale clamped into [secondary_lo, secondary_hi],
// and is dropped entirely when it starts below secondary_lo.
MappingMatrix tighten_primary_secondary(const MappingMatrix& w, double secondary_lo,
                                        double secondary_hi);

// Installs per-item coverage scales c_j consumed at score-assembly time. Row
// weights are left untouched: within a row c_j is constant and would cancel
// under per-row renormalization; the effect appears only across items.
MappingMatrix reweight_by_coverage(const MappingMatrix& w, const CoverageWeights& c);

HardMapping to_hard_mapping(const MappingMatrix& w);

struct CrossLoadingFlag {
    std::string item_id;
    double top1 = 0.0;
    double top2 = 0.0;
    double gap = 0.0;
};

struct CrossLoadingReport {
    double closeness = 0.0;
    std::vector<CrossLoadingFlag> flags;
    std::size_t considered = 0; // mechanism items when instrument given, else all rows
    double flagged_share = 0.0;
};

CrossLoadingReport cross_loading_concentration(const MappingMatrix& w, double closeness,
                                               const Instrument* instrument = nullptr);

CoverageWeights compute_coverage(const struct HarmonizedMatrix& h,
                                 const std::vector<std::size_t>& train_rows);

MappingMatrix load_mapping(const std::string& path);
MappingMatrix mapping_from_json_text(const std::string& text);
void write_mapping(const std::string& path, const MappingMatrix& w, bool bare_list = false);

} // namespace mval
