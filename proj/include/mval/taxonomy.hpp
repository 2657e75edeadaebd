#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mval/common.hpp"

namespace mval {

struct Anchor {
    std::string anchor_id;
    std::string definition;
};

struct Subdimension {
    std::string subdim_id;
    std::string anchor_id;
    std::optional<std::string> parent_id; // set for children created by a split
    std::string definition;
    std::vector<std::string> inclusion_rules;
    std::vector<std::string> exclusion_rules;
    std::vector<std::string> representative_item_ids;
    bool anchored = false;
};

struct TaxonomyEdit {
    std::uint64_t version; // version produced by this edit
    std::string op;        // "load", "consolidate", "split", "anchor"
    std::string detail;
};

// Immutable snapshot; every edit produces a new value with version+1 and an
// appended log entry, so any snapshot is reproducible from the log.
class Taxonomy {
public:
    Taxonomy() = default;
    Taxonomy(std::vector<Anchor> anchors, std::vector<Subdimension> subdims,
             std::uint64_t version = 1);

    std::uint64_t version() const { return version_; }
    const std::vector<Anchor>& anchors() const { return anchors_; }
    const std::vector<Subdimension>& subdimensions() const { return subdims_; }
    const std::vector<TaxonomyEdit>& edit_log() const { return edit_log_; }

    bool has_subdim(const std::string& id) const;
    const Subdimension& subdim(const std::string& id) const;
    bool has_anchor(const std::string& id) const;

    // A leaf has no children; only leaves may carry mapping weight.
    bool is_leaf(const std::string& id) const;
    std::vector<std::string> leaf_ids() const;
    std::size_t leaf_count() const { return leaf_ids().size(); }

    friend ValidationReport validate_taxonomy(const Taxonomy& t);
    friend Taxonomy consolidate(const Taxonomy& t,
                                const std::vector<std::pair<std::string, std::string>>& merge_pairs);
    friend Taxonomy split_subdimension(const Taxonomy& t, const std::string& parent_id,
                                       const std::vector<Subdimension>& children);
    friend Taxonomy set_anchored(const Taxonomy& t, const std::vector<std::string>& subdim_ids);

    static Taxonomy from_json_text(const std::string& text);
    std::string to_json_text() const;

private:
    std::uint64_t version_ = 0;
    std::vector<Anchor> anchors_;
    std::vector<Subdimension> subdims_;
    std::vector<TaxonomyEdit> edit_log_;
};

ValidationReport validate_taxonomy(const Taxonomy& t);

// Merges the second id of each pair into the first (same anchor, both leaves);
// representative items are unioned.
Taxonomy consolidate(const Taxonomy& t,
                     const std::vector<std::pair<std::string, std::string>>& merge_pairs);

// Local split: the parent leaf becomes internal and the children become
// leaves under the same anchor. Anchored subdimensions are frozen.
Taxonomy split_subdimension(const Taxonomy& t, const std::string& parent_id,
                            const std::vector<Subdimension>& children);

// Operator freezing the given subdimensions' mapping rows across rounds.
Taxonomy set_anchored(const Taxonomy& t, const std::vector<std::string>& subdim_ids);

Taxonomy load_taxonomy(const std::string& path);
void write_taxonomy(const std::string& path, const Taxonomy& t);

} // namespace mval
