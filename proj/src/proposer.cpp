#include "mval/proposer.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace mval {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string_view to_string(ProposalKind k) {
    switch (k) {
        case ProposalKind::taxonomy_induction: return "taxonomy_induction";
        case ProposalKind::soft_mapping: return "soft_mapping";
        case ProposalKind::refinement: return "refinement";
    }
    return "soft_mapping";
}

std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string request_key(const ProposalRequest& request) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(request.prompt)));
    return buf;
}

namespace {

constexpr const char* kTemplateVersion = "v1";

void append_line(std::string& out, const std::string& line) {
    out += line;
    out += '\n';
}

std::string render_taxonomy_prompt(const PromptContext& ctx) {
    if (ctx.anchors.empty()) fail(Errc::missing_slot, "taxonomy induction needs anchors");
    if (ctx.items.empty()) fail(Errc::missing_slot, "taxonomy induction needs item stems");
    std::string p;
    append_line(p, "You are building an interpretable measurement taxonomy for a survey instrument.");
    append_line(p, "");
    append_line(p, "ANCHOR DIMENSIONS (fixed):");
    for (const auto& a : ctx.anchors) append_line(p, "- " + a.anchor_id + ": " + a.definition);
    append_line(p, "");
    append_line(p, "SURVEY ITEMS (stems only; responses and outcomes are never shown):");
    for (const auto& item : ctx.items) append_line(p, "- " + item.item_id + ": " + item.stem_text);
    append_line(p, "");
    append_line(p, "TASK:");
    append_line(p, "For each anchor, propose first-layer subdimensions that are mechanism-oriented,");
    append_line(p, "mutually distinct, and useful for downstream analysis. For each subdimension");
    append_line(p, "give: a snake_case name, a 2-3 sentence definition, inclusion rules, exclusion");
    append_line(p, "rules naming the closest alternative, and representative item ids.");
    append_line(p, "");
    append_line(p, "CONSTRAINTS:");
    append_line(p, "- Use the item text only.");
    append_line(p, "- Prefer fewer, clearer subdimensions over many narrow ones.");
    append_line(p, "- Avoid duplicate or near-duplicate labels.");
    append_line(p, "- Note explicitly when an item plausibly spans several subdimensions.");
    append_line(p, "");
    append_line(p, "OUTPUT FORMAT: one JSON object with anchors as keys:");
    append_line(p, "{\"taxonomy\": {\"<anchor>\": [{\"name\": ..., \"definition\": ...,");
    append_line(p, " \"inclusion_rules\": [...], \"exclusion_rules\": [...],");
    append_line(p, " \"representative_items\": [...]}]}}");
    return p;
}

std::string render_mapping_prompt(const PromptContext& ctx, const ProposalConstraints& constraints) {
    if (ctx.construct_definitions.empty())
        fail(Errc::missing_slot, "soft mapping needs construct definitions");
    if (ctx.items.empty()) fail(Errc::missing_slot, "soft mapping needs item stems");
    std::string p;
    append_line(p, "You are given a fixed taxonomy of constructs and a list of survey item stems.");
    append_line(p, "Assign each item a sparse simplex-weighted mixture over the constructs.");
    append_line(p, "");
    append_line(p, "CONSTRUCTS (fixed):");
    for (const auto& [leaf, definition] : ctx.construct_definitions)
        append_line(p, "- " + leaf + ": " + definition);
    append_line(p, "");
    append_line(p, "ITEMS:");
    for (const auto& item : ctx.items) append_line(p, "- " + item.item_id + ": " + item.stem_text);
    append_line(p, "");
    append_line(p, "REQUIREMENTS PER ITEM:");
    append_line(p, "- weights are nonnegative and sum to 1");
    append_line(p, "- at most " + std::to_string(constraints.max_nonzero) + " nonzero weights");
    append_line(p, "- one-sentence rationale");
    append_line(p, "- one-sentence note on the closest alternative and why not (not_this)");
    append_line(p, "");
    append_line(p, "OUTPUT FORMAT: a JSON list with one record per item:");
    append_line(p, "[{\"item_id\": ..., \"weights\": {\"<construct>\": <weight>, ...},");
    append_line(p, "  \"rationale\": ..., \"not_this\": ...}]");
    return p;
}

std::string render_refinement_prompt(const PromptContext& ctx,
                                     const ProposalConstraints& constraints) {
    if (ctx.target_subdim.empty()) fail(Errc::missing_slot, "refinement needs a split target");
    if (ctx.cluster.empty()) fail(Errc::missing_slot, "refinement needs the overlap cluster");
    if (ctx.items.empty()) fail(Errc::missing_slot, "refinement needs the neighborhood stems");
    std::string p;
    append_line(p, "You are refining a survey measurement taxonomy to separate constructs that");
    append_line(p, "overlap empirically.");
    append_line(p, "");
    std::string cluster_line = "OVERLAP CLUSTER:";
    for (const auto& id : ctx.cluster) cluster_line += " " + id;
    append_line(p, cluster_line);
    append_line(p, "SPLIT TARGET: " + ctx.target_subdim);
    append_line(p, "");
    append_line(p, "CONSTRUCT DEFINITIONS:");
    for (const auto& [leaf, definition] : ctx.construct_definitions)
        append_line(p, "- " + leaf + ": " + definition);
    append_line(p, "");
    append_line(p, "NEIGHBORHOOD ITEMS (the only rows you may reassign):");
    for (const auto& item : ctx.items) append_line(p, "- " + item.item_id + ": " + item.stem_text);
    append_line(p, "");
    append_line(p, "REQUIREMENTS:");
    append_line(p, "- Propose at least 2 child subdimensions nested under the split target, each");
    append_line(p, "  with a snake_case name and a definition.");
    append_line(p, "- Reassign every neighborhood item that loads on the target: exactly one");
    append_line(p, "  primary label (weight 1.0) and at most one secondary label with weight");
    append_line(p, "  between " + std::to_string(constraints.secondary_lo) + " and " +
                       std::to_string(constraints.secondary_hi) + ". Omit the secondary if unclear.");
    append_line(p, "- One-sentence rationale and one-sentence not_this per item.");
    append_line(p, "- Never touch anchored constructs or items outside the neighborhood.");
    append_line(p, "");
    append_line(p, "OUTPUT FORMAT:");
    append_line(p, "{\"split\": {\"parent\": ..., \"children\": [{\"name\": ..., \"definition\": ...}]},");
    append_line(p, " \"rows\": [{\"item_id\": ..., \"weights\": {\"<primary>\": 1.0, \"<secondary>\": <s>},");
    append_line(p, "  \"rationale\": ..., \"not_this\": ...}]}");
    return p;
}

} // namespace

ProposalRequest render_prompt(ProposalKind kind, const PromptContext& context,
                              const ProposalConstraints& constraints) {
    if (!context.outcome_values.empty())
        fail(Errc::constraint_violation, "proposal requests are outcome-blind");
    ProposalRequest req;
    req.kind = kind;
    req.constraints = constraints;
    req.template_version = kTemplateVersion;
    switch (kind) {
        case ProposalKind::taxonomy_induction: req.prompt = render_taxonomy_prompt(context); break;
        case ProposalKind::soft_mapping:
            req.prompt = render_mapping_prompt(context, constraints);
            break;
        case ProposalKind::refinement:
            req.prompt = render_refinement_prompt(context, constraints);
            break;
    }
    return req;
}

namespace {

// Pulls the first parseable JSON value out of raw model text (which may wrap
// the payload in prose or code fences).
json extract_json(const std::string& raw) {
    {
        json direct = json::parse(raw, nullptr, false);
        if (!direct.is_discarded()) return direct;
    }
    for (std::size_t start = 0; start < raw.size(); ++start) {
        const char open = raw[start];
        if (open != '{' && open != '[') continue;
        const char close = open == '{' ? '}' : ']';
        int depth = 0;
        bool in_string = false;
        for (std::size_t i = start; i < raw.size(); ++i) {
            const char c = raw[i];
            if (in_string) {
                if (c == '\\') ++i;
                else if (c == '"') in_string = false;
                continue;
            }
            if (c == '"') in_string = true;
            else if (c == open) ++depth;
            else if (c == close) {
                --depth;
                if (depth == 0) {
                    json candidate =
                        json::parse(raw.substr(start, i - start + 1), nullptr, false);
                    if (!candidate.is_discarded()) return candidate;
                    break;
                }
            }
        }
    }
    fail(Errc::unparseable_response, "no JSON payload found in response");
}

MappingRow row_from_json(const json& rec) {
    MappingRow row;
    row.item_id = rec.at("item_id").get<std::string>();
    const auto& weights = rec.at("weights");
    if (weights.is_object()) {
        for (const auto& [name, value] : weights.items())
            row.weights.push_back({name, value.get<double>()});
    } else if (weights.is_array()) {
        for (const auto& entry : weights)
            row.weights.push_back(
                {entry.at("subdim_id").get<std::string>(), entry.at("weight").get<double>()});
    } else {
        fail(Errc::unparseable_response, "row '" + row.item_id + "': bad weights");
    }
    row.rationale = rec.value("rationale", std::string{});
    row.not_this = rec.value("not_this", std::string{});
    return row;
}

void check_targets(const MappingRow& row, const ProposalConstraints& constraints,
                   const std::vector<std::string>& extra_leaves) {
    if (constraints.leaf_ids.empty()) return;
    for (const auto& entry : row.weights) {
        const bool known =
            std::find(constraints.leaf_ids.begin(), constraints.leaf_ids.end(),
                      entry.subdim_id) != constraints.leaf_ids.end() ||
            std::find(extra_leaves.begin(), extra_leaves.end(), entry.subdim_id) !=
                extra_leaves.end();
        if (!known)
            fail(Errc::constraint_violation,
                 "row '" + row.item_id + "': unknown target '" + entry.subdim_id + "'");
    }
}

void validate_simplex_row(MappingRow& row, const ProposalConstraints& constraints,
                          std::vector<Finding>& findings) {
    double sum = 0.0;
    std::size_t nonzero = 0;
    for (const auto& entry : row.weights) {
        if (entry.weight < 0.0)
            fail(Errc::constraint_violation, "row '" + row.item_id + "': negative weight");
        if (entry.weight > 0.0) ++nonzero;
        sum += entry.weight;
    }
    if (nonzero == 0) fail(Errc::constraint_violation, "row '" + row.item_id + "': all-zero row");
    if (constraints.max_nonzero > 0 &&
        nonzero > static_cast<std::size_t>(constraints.max_nonzero))
        fail(Errc::constraint_violation,
             "row '" + row.item_id + "': " + std::to_string(nonzero) + " nonzero weights exceed m=" +
                 std::to_string(constraints.max_nonzero));
    if (std::abs(sum - 1.0) <= kSimplexTol) return;
    if (sum >= 0.9 - 1e-9 && sum <= 1.1 + 1e-9) {
        for (auto& entry : row.weights) entry.weight /= sum;
        findings.push_back({"renormalized", row.item_id,
                            "weights summed to " + std::to_string(sum) + "; renormalized"});
        return;
    }
    fail(Errc::constraint_violation,
         "row '" + row.item_id + "': weights sum to " + std::to_string(sum));
}

// Refinement rows arrive either normalized ({1-s, s}) or in the literal
// primary-1.0-plus-secondary form; the band check runs on the normalized
// two-weight scale.
void validate_refinement_row(MappingRow& row, const ProposalConstraints& constraints,
                             std::vector<Finding>& findings) {
    std::vector<WeightEntry> nonzero;
    for (const auto& entry : row.weights) {
        if (entry.weight < 0.0)
            fail(Errc::constraint_violation, "row '" + row.item_id + "': negative weight");
        if (entry.weight > 0.0) nonzero.push_back(entry);
    }
    if (nonzero.empty())
        fail(Errc::constraint_violation, "row '" + row.item_id + "': all-zero row");
    if (nonzero.size() > 2)
        fail(Errc::constraint_violation,
             "row '" + row.item_id + "': refinement rows allow one primary and one secondary");
    if (nonzero.size() == 1) {
        if (std::abs(nonzero.front().weight - 1.0) > kSimplexTol)
            fail(Errc::constraint_violation,
                 "row '" + row.item_id + "': single weight must be 1.0");
        row.weights = {{nonzero.front().subdim_id, 1.0}};
        return;
    }
    std::sort(nonzero.begin(), nonzero.end(), weight_before);
    const double primary = nonzero[0].weight;
    const double secondary = nonzero[1].weight;
    const double sum = primary + secondary;
    double s = 0.0;
    bool normalized_form = false;
    if (std::abs(sum - 1.0) <= kSimplexTol) {
        s = secondary;
        normalized_form = true;
    } else if (std::abs(primary - 1.0) <= kSimplexTol) {
        s = secondary / sum;
    } else {
        fail(Errc::constraint_violation,
             "row '" + row.item_id + "': expected primary 1.0 plus optional secondary");
    }
    const double lo = constraints.secondary_lo / (1.0 + constraints.secondary_lo);
    const double hi = constraints.secondary_hi / (1.0 + constraints.secondary_hi);
    const double s_lo = normalized_form ? constraints.secondary_lo : lo;
    const double s_hi = normalized_form ? constraints.secondary_hi : hi;
    if (s < s_lo - 1e-12 || s > s_hi + 1e-12)
        fail(Errc::constraint_violation,
             "row '" + row.item_id + "': secondary weight " + std::to_string(secondary) +
                 " outside [" + std::to_string(constraints.secondary_lo) + ", " +
                 std::to_string(constraints.secondary_hi) + "]");
    if (!normalized_form) {
        row.weights = {{nonzero[0].subdim_id, 1.0 - s}, {nonzero[1].subdim_id, s}};
        findings.push_back({"renormalized", row.item_id,
                            "primary 1.0 + secondary form normalized onto the simplex"});
    } else {
        row.weights = {{nonzero[0].subdim_id, primary}, {nonzero[1].subdim_id, secondary}};
    }
    std::sort(row.weights.begin(), row.weights.end(),
              [](const WeightEntry& a, const WeightEntry& b) { return a.subdim_id < b.subdim_id; });
}

} // namespace

ProposalResponse parse_and_validate(const std::string& raw, ProposalKind kind,
                                    const ProposalConstraints& constraints) {
    ProposalResponse response;
    response.raw_text = raw;
    const json payload = extract_json(raw);

    if (kind == ProposalKind::taxonomy_induction) {
        const json* tax = &payload;
        if (payload.is_object() && payload.contains("taxonomy")) tax = &payload.at("taxonomy");
        if (!tax->is_object())
            fail(Errc::unparseable_response, "taxonomy payload must be an object keyed by anchor");
        std::vector<Anchor> anchors;
        std::vector<Subdimension> subdims;
        for (const auto& [anchor_id, list] : tax->items()) {
            anchors.push_back({anchor_id, std::string{}});
            if (!list.is_array())
                fail(Errc::unparseable_response, "anchor '" + anchor_id + "' value must be a list");
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
                subdims.push_back(std::move(s));
            }
        }
        if (subdims.empty()) fail(Errc::constraint_violation, "taxonomy proposal has no subdimensions");
        Taxonomy t(std::move(anchors), std::move(subdims));
        const ValidationReport report = validate_taxonomy(t);
        if (report.has("duplicate_subdim"))
            fail(Errc::constraint_violation, "taxonomy proposal has duplicate subdimension ids");
        for (const auto& finding : report.findings) response.findings.push_back(finding);
        response.taxonomy = std::move(t);
        return response;
    }

    if (kind == ProposalKind::soft_mapping) {
        if (!payload.is_array())
            fail(Errc::unparseable_response, "soft mapping payload must be a JSON list of rows");
        for (const auto& rec : payload) {
            MappingRow row = row_from_json(rec);
            check_targets(row, constraints, {});
            validate_simplex_row(row, constraints, response.findings);
            response.rows.push_back(std::move(row));
        }
        return response;
    }

    // refinement
    const json* rows_json = nullptr;
    std::vector<std::string> child_names;
    if (payload.is_object()) {
        if (payload.contains("split")) {
            RefinementSplit split;
            split.parent = payload.at("split").at("parent").get<std::string>();
            for (const auto& rec : payload.at("split").at("children")) {
                Subdimension child;
                child.subdim_id = rec.at("name").get<std::string>();
                child.definition = rec.value("definition", std::string{});
                child_names.push_back(child.subdim_id);
                split.children.push_back(std::move(child));
            }
            if (split.children.size() < 2)
                fail(Errc::constraint_violation, "split needs at least 2 children");
            response.split = std::move(split);
        }
        if (payload.contains("rows")) rows_json = &payload.at("rows");
    } else if (payload.is_array()) {
        rows_json = &payload;
    }
    if (!rows_json) fail(Errc::unparseable_response, "refinement payload has no rows");
    for (const auto& rec : *rows_json) {
        MappingRow row = row_from_json(rec);
        if (!constraints.neighborhood_items.empty() &&
            std::find(constraints.neighborhood_items.begin(), constraints.neighborhood_items.end(),
                      row.item_id) == constraints.neighborhood_items.end())
            fail(Errc::constraint_violation,
                 "row '" + row.item_id + "' is outside the refinement neighborhood");
        check_targets(row, constraints, child_names);
        validate_refinement_row(row, constraints, response.findings);
        response.rows.push_back(std::move(row));
    }
    return response;
}

namespace {

void audit_write(const std::string& audit_dir, const std::string& key, const std::string& name,
                 const std::string& content) {
    if (audit_dir.empty()) return;
    fs::create_directories(audit_dir);
    std::ofstream out(fs::path(audit_dir) / (key + "-" + name), std::ios::binary);
    if (out) out << content;
}

std::string request_record(const ProposalRequest& request) {
    ordered_json j;
    j["kind"] = std::string(to_string(request.kind));
    j["template_version"] = request.template_version;
    j["taxonomy_version"] = request.taxonomy_version;
    j["mapping_version"] = request.mapping_version;
    j["constraints"] = {{"max_nonzero", request.constraints.max_nonzero},
                        {"secondary_lo", request.constraints.secondary_lo},
                        {"secondary_hi", request.constraints.secondary_hi},
                        {"neighborhood_items", request.constraints.neighborhood_items}};
    j["prompt"] = request.prompt;
    return j.dump(2) + "\n";
}

} // namespace

FixtureProposer::FixtureProposer(std::string fixture_dir, std::string audit_dir)
    : fixture_dir_(std::move(fixture_dir)), audit_dir_(std::move(audit_dir)) {}

ProposalResponse FixtureProposer::propose(const ProposalRequest& request) {
    const std::string key = request_key(request);
    const fs::path hashed = fs::path(fixture_dir_) /
                            (std::string(to_string(request.kind)) + "_" + key + ".json");
    const fs::path fallback =
        fs::path(fixture_dir_) / (std::string(to_string(request.kind)) + ".json");
    fs::path chosen;
    if (fs::exists(hashed)) chosen = hashed;
    else if (fs::exists(fallback)) chosen = fallback;
    else
        fail(Errc::proposer_failure,
             "no fixture for " + std::string(to_string(request.kind)) + " (looked for " +
                 hashed.string() + " and " + fallback.string() + ")");

    std::ifstream in(chosen, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    audit_write(audit_dir_, key, "request.json", request_record(request));
    audit_write(audit_dir_, key, "response.txt", buf.str());
    return parse_and_validate(buf.str(), request.kind, request.constraints);
}

RemoteProposer::RemoteProposer(EndpointConfig config, std::string audit_dir)
    : config_(std::move(config)), audit_dir_(std::move(audit_dir)) {}

ProposalResponse RemoteProposer::propose(const ProposalRequest& request) {
    const std::string raw = fetch_remote(request, config_, audit_dir_);
    return parse_and_validate(raw, request.kind, request.constraints);
}

} // namespace mval

// fetch_remote lives below the httplib include to keep that header out of
// the rest of the translation unit.
#include <httplib.h>

namespace mval {

std::string fetch_remote(const ProposalRequest& request, const EndpointConfig& config,
                         const std::string& audit_dir) {
    if (config.url.empty()) fail(Errc::precondition, "no proposer endpoint configured");

    // scheme://host[:port]/path ; plain http (internal gateways)
    std::string url = config.url;
    const std::string scheme_sep = "://";
    const auto scheme_pos = url.find(scheme_sep);
    if (scheme_pos == std::string::npos) fail(Errc::precondition, "endpoint url needs a scheme");
    const std::string scheme = url.substr(0, scheme_pos);
    if (scheme != "http")
        fail(Errc::precondition, "only http endpoints are supported (got '" + scheme + "')");
    std::string rest = url.substr(scheme_pos + scheme_sep.size());
    const auto slash = rest.find('/');
    const std::string host_port = slash == std::string::npos ? rest : rest.substr(0, slash);
    const std::string path = slash == std::string::npos ? "/" : rest.substr(slash);

    ordered_json body;
    body["model"] = config.model;
    body["temperature"] = config.temperature;
    body["messages"] = ordered_json::array(
        {{{"role", "system"},
          {"content", "You produce strictly valid JSON following the requested schema."}},
         {{"role", "user"}, {"content", request.prompt}}});
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (const char* key = std::getenv(config.api_key_env.c_str()))
        headers.emplace("Authorization", std::string("Bearer ") + key);

    const std::string key = request_key(request);
    audit_write(audit_dir, key, "request.json", request_record(request));

    std::string last_error;
    int backoff_ms = config.initial_backoff_ms;
    for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
            backoff_ms *= 2;
        }
        httplib::Client client(host_port);
        client.set_read_timeout(120, 0);
        auto res = client.Post(path, headers, payload, "application/json");
        if (!res) {
            last_error = "connection failed: " + httplib::to_string(res.error());
            continue; // transient
        }
        if (res->status == 429) {
            last_error = "rate limited";
            continue;
        }
        if (res->status >= 500) {
            last_error = "server error " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            fail(Errc::network_error,
                 "endpoint returned " + std::to_string(res->status) + ": " + res->body);

        audit_write(audit_dir, key, "response.txt", res->body);
        // chat-completion shaped bodies carry the text in choices[0].message.content
        json parsed = json::parse(res->body, nullptr, false);
        if (parsed.is_object() && parsed.contains("choices") && parsed["choices"].is_array() &&
            !parsed["choices"].empty()) {
            const auto& choice = parsed["choices"][0];
            if (choice.contains("message") && choice["message"].contains("content"))
                return choice["message"]["content"].get<std::string>();
            if (choice.contains("text")) return choice["text"].get<std::string>();
        }
        return res->body;
    }
    audit_write(audit_dir, key, "response.txt", "<failed: " + last_error + ">");
    fail(Errc::max_retries,
         "gave up after " + std::to_string(config.max_retries) + " retries: " + last_error);
}

} // namespace mval
