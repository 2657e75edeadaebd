#include "mval/taxonomy.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace mval {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

Taxonomy::Taxonomy(std::vector<Anchor> anchors, std::vector<Subdimension> subdims,
                   std::uint64_t version)
    : version_(version), anchors_(std::move(anchors)), subdims_(std::move(subdims)) {
    edit_log_.push_back({version_, "load", std::to_string(subdims_.size()) + " subdimensions"});
}

bool Taxonomy::has_subdim(const std::string& id) const {
    return std::any_of(subdims_.begin(), subdims_.end(),
                       [&](const Subdimension& s) { return s.subdim_id == id; });
}

const Subdimension& Taxonomy::subdim(const std::string& id) const {
    for (const auto& s : subdims_)
        if (s.subdim_id == id) return s;
    fail(Errc::unknown_item, "subdimension '" + id + "' not in taxonomy");
}

bool Taxonomy::has_anchor(const std::string& id) const {
    return std::any_of(anchors_.begin(), anchors_.end(),
                       [&](const Anchor& a) { return a.anchor_id == id; });
}

bool Taxonomy::is_leaf(const std::string& id) const {
    if (!has_subdim(id)) return false;
    return std::none_of(subdims_.begin(), subdims_.end(), [&](const Subdimension& s) {
        return s.parent_id && *s.parent_id == id;
    });
}

std::vector<std::string> Taxonomy::leaf_ids() const {
    std::vector<std::string> out;
    for (const auto& s : subdims_)
        if (is_leaf(s.subdim_id)) out.push_back(s.subdim_id);
    return out;
}

ValidationReport validate_taxonomy(const Taxonomy& t) {
    ValidationReport report;
    std::set<std::string> ids;
    for (const auto& s : t.subdims_) {
        if (!ids.insert(s.subdim_id).second)
            report.add("duplicate_subdim", s.subdim_id, "subdimension id appears twice");
        if (s.definition.empty())
            report.add("empty_definition", s.subdim_id, "subdimension has no definition");
        if (!t.has_anchor(s.anchor_id))
            report.add("unknown_anchor", s.subdim_id, "anchor '" + s.anchor_id + "' undefined");
    }
    for (const auto& s : t.subdims_) {
        if (s.parent_id) {
            if (!t.has_subdim(*s.parent_id)) {
                report.add("orphan_parent", s.subdim_id,
                           "parent '" + *s.parent_id + "' does not exist");
            } else {
                const auto& parent = t.subdim(*s.parent_id);
                if (parent.anchor_id != s.anchor_id)
                    report.add("cross_anchor_child", s.subdim_id,
                               "child anchored under '" + s.anchor_id + "' but parent under '" +
                                   parent.anchor_id + "'");
                if (parent.parent_id)
                    report.add("depth_exceeded", s.subdim_id,
                               "nesting deeper than one split level");
            }
        }
        if (s.anchored && !t.is_leaf(s.subdim_id))
            report.add("anchored_non_leaf", s.subdim_id, "anchored subdimension has children");
    }
    std::set<std::string> anchor_ids;
    for (const auto& a : t.anchors_)
        if (!anchor_ids.insert(a.anchor_id).second)
            report.add("duplicate_anchor", a.anchor_id, "anchor id appears twice");
    return report;
}

Taxonomy consolidate(const Taxonomy& t,
                     const std::vector<std::pair<std::string, std::string>>& merge_pairs) {
    Taxonomy out = t;
    out.version_ = t.version_ + 1;
    for (const auto& [keep_id, merge_id] : merge_pairs) {
        const Subdimension& keep = out.subdim(keep_id);
        const Subdimension& merge = out.subdim(merge_id);
        if (!out.is_leaf(keep_id) || !out.is_leaf(merge_id))
            fail(Errc::not_a_leaf, "consolidate targets must be leaves");
        if (keep.anchor_id != merge.anchor_id)
            fail(Errc::cross_anchor_merge,
                 "'" + keep_id + "' and '" + merge_id + "' live under different anchors");
        std::vector<std::string> items = keep.representative_item_ids;
        for (const auto& id : merge.representative_item_ids)
            if (std::find(items.begin(), items.end(), id) == items.end()) items.push_back(id);
        for (auto& s : out.subdims_)
            if (s.subdim_id == keep_id) s.representative_item_ids = items;
        out.subdims_.erase(std::remove_if(out.subdims_.begin(), out.subdims_.end(),
                                          [&](const Subdimension& s) {
                                              return s.subdim_id == merge_id;
                                          }),
                           out.subdims_.end());
        out.edit_log_.push_back(
            {out.version_, "consolidate", "merged '" + merge_id + "' into '" + keep_id + "'"});
    }
    if (merge_pairs.empty())
        out.edit_log_.push_back({out.version_, "consolidate", "no-op (empty merge list)"});
    return out;
}

Taxonomy split_subdimension(const Taxonomy& t, const std::string& parent_id,
                            const std::vector<Subdimension>& children) {
    if (children.size() < 2) fail(Errc::precondition, "split needs at least 2 children");
    const Subdimension& parent = t.subdim(parent_id);
    if (!t.is_leaf(parent_id)) fail(Errc::not_a_leaf, "'" + parent_id + "' already has children");
    if (parent.anchored)
        fail(Errc::not_a_leaf, "'" + parent_id + "' is anchored and cannot be split");

    Taxonomy out = t;
    out.version_ = t.version_ + 1;
    std::set<std::string> child_ids;
    for (const auto& child : children) {
        if (!child_ids.insert(child.subdim_id).second)
            fail(Errc::duplicate_child_id, "child '" + child.subdim_id + "' repeated");
        if (out.has_subdim(child.subdim_id))
            fail(Errc::duplicate_child_id, "child id '" + child.subdim_id + "' already exists");
        Subdimension s = child;
        s.anchor_id = parent.anchor_id;
        s.parent_id = parent_id;
        // parent definition travels into children as a prefix; recorded below
        if (s.definition.empty()) s.definition = "[from " + parent_id + "] " + parent.definition;
        else s.definition = "[from " + parent_id + "] " + s.definition;
        out.subdims_.push_back(std::move(s));
    }
    std::string detail = "split '" + parent_id + "' into {";
    bool first = true;
    for (const auto& child : children) {
        if (!first) detail += ", ";
        detail += child.subdim_id;
        first = false;
    }
    detail += "}; parent definition copied into children";
    out.edit_log_.push_back({out.version_, "split", detail});
    return out;
}

Taxonomy set_anchored(const Taxonomy& t, const std::vector<std::string>& subdim_ids) {
    Taxonomy out = t;
    out.version_ = t.version_ + 1;
    for (const auto& id : subdim_ids) {
        if (!out.has_subdim(id)) fail(Errc::unknown_item, "subdimension '" + id + "'");
        if (!out.is_leaf(id)) fail(Errc::not_a_leaf, "cannot anchor non-leaf '" + id + "'");
        for (auto& s : out.subdims_)
            if (s.subdim_id == id) s.anchored = true;
        out.edit_log_.push_back({out.version_, "anchor", "anchored '" + id + "'"});
    }
    return out;
}

Taxonomy Taxonomy::from_json_text(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) fail(Errc::schema_error, "taxonomy: invalid JSON");

    Taxonomy t;
    t.version_ = j.value("version", 1ULL);
    if (!j.contains("anchors") || !j.at("anchors").is_object())
        fail(Errc::schema_error, "taxonomy: missing anchors object");
    for (const auto& [id, def] : j.at("anchors").items())
        t.anchors_.push_back({id, def.get<std::string>()});

    if (!j.contains("taxonomy") || !j.at("taxonomy").is_object())
        fail(Errc::schema_error, "taxonomy: missing taxonomy object keyed by anchor");
    for (const auto& [anchor_id, list] : j.at("taxonomy").items()) {
        if (!list.is_array()) fail(Errc::schema_error, "taxonomy: anchor value must be a list");
        for (const auto& rec : list) {
            Subdimension s;
            s.subdim_id = rec.at("name").get<std::string>();
            s.anchor_id = anchor_id;
            s.definition = rec.value("definition", std::string{});
            if (rec.contains("inclusion_rules"))
                s.inclusion_rules = rec.at("inclusion_rules").get<std::vector<std::string>>();
            if (rec.contains("exclusion_rules"))
                s.exclusion_rules = rec.at("exclusion_rules").get<std::vector<std::string>>();
            if (rec.contains("representative_items"))
                s.representative_item_ids =
                    rec.at("representative_items").get<std::vector<std::string>>();
            s.anchored = rec.value("anchored", false);
            if (rec.contains("parent") && !rec.at("parent").is_null())
                s.parent_id = rec.at("parent").get<std::string>();
            t.subdims_.push_back(std::move(s));
        }
    }
    t.edit_log_.push_back({t.version_, "load", "loaded from file"});
    auto report = validate_taxonomy(t);
    for (const auto& f : report.findings)
        if (f.code == "duplicate_subdim" || f.code == "duplicate_anchor")
            fail(Errc::duplicate_id, f.subject + ": " + f.detail);
    return t;
}

std::string Taxonomy::to_json_text() const {
    ordered_json j;
    j["version"] = version_;
    ordered_json anchors = ordered_json::object();
    for (const auto& a : anchors_) anchors[a.anchor_id] = a.definition;
    j["anchors"] = std::move(anchors);
    ordered_json tax = ordered_json::object();
    for (const auto& a : anchors_) tax[a.anchor_id] = ordered_json::array();
    for (const auto& s : subdims_) {
        ordered_json rec;
        rec["name"] = s.subdim_id;
        rec["definition"] = s.definition;
        rec["inclusion_rules"] = s.inclusion_rules;
        rec["exclusion_rules"] = s.exclusion_rules;
        rec["representative_items"] = s.representative_item_ids;
        rec["anchored"] = s.anchored;
        rec["parent"] = s.parent_id ? ordered_json(*s.parent_id) : ordered_json(nullptr);
        tax[s.anchor_id].push_back(std::move(rec));
    }
    j["taxonomy"] = std::move(tax);
    ordered_json log = ordered_json::array();
    for (const auto& e : edit_log_)
        log.push_back({{"version", e.version}, {"op", e.op}, {"detail", e.detail}});
    j["edit_log"] = std::move(log);
    return j.dump(2) + "\n";
}

Taxonomy load_taxonomy(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::io_error, "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return Taxonomy::from_json_text(buf.str());
}

void write_taxonomy(const std::string& path, const Taxonomy& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(Errc::io_error, "cannot write " + path);
    out << t.to_json_text();
}

} // namespace mval
