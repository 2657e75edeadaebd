#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mval/common.hpp"
#include "mval/instrument.hpp"
#include "mval/mapping.hpp"
#include "mval/taxonomy.hpp"

namespace mval {

enum class ProposalKind { taxonomy_induction, soft_mapping, refinement };
std::string_view to_string(ProposalKind k);

struct ProposalConstraints {
    int max_nonzero = 3; // m
    double secondary_lo = 0.05;
    double secondary_hi = 0.20;
    std::vector<std::string> leaf_ids;            // admissible targets when non-empty
    std::vector<std::string> neighborhood_items;  // refinement locality
};

// Inputs a prompt is rendered from. Stems and definitions only: response
// data has no field here, and the guard below rejects any attempt to smuggle
// outcome values in.
struct PromptContext {
    std::vector<Anchor> anchors;
    std::vector<SurveyItem> items;
    std::vector<std::pair<std::string, std::string>> construct_definitions; // leaf -> definition
    int m = 3;
    std::string target_subdim;              // refinement
    std::vector<std::string> cluster;       // refinement
    std::vector<std::string> neighborhood_items;
    // Intentionally rejected when non-empty: requests are outcome-blind.
    std::vector<double> outcome_values;
};

struct ProposalRequest {
    ProposalKind kind = ProposalKind::soft_mapping;
    std::string prompt;
    std::string template_version;
    ProposalConstraints constraints;
    std::uint64_t taxonomy_version = 0;
    std::uint64_t mapping_version = 0;
};

struct RefinementSplit {
    std::string parent;
    std::vector<Subdimension> children;
};

struct ProposalResponse {
    std::string raw_text;
    std::optional<Taxonomy> taxonomy;     // taxonomy_induction
    std::vector<MappingRow> rows;         // soft_mapping / refinement reallocation
    std::optional<RefinementSplit> split; // refinement
    std::vector<Finding> findings;        // documented repairs (renormalization)
};

ProposalRequest render_prompt(ProposalKind kind, const PromptContext& context,
                              const ProposalConstraints& constraints);

// Extracts the JSON payload (tolerant of surrounding prose / fences) and
// validates it against the simplex and sparsity constraints. Rows with sums
// in [0.9, 1.1] are renormalized with a recorded finding; anything further
// off is a ConstraintViolation, never silently repaired.
ProposalResponse parse_and_validate(const std::string& raw, ProposalKind kind,
                                    const ProposalConstraints& constraints);

struct EndpointConfig {
    std::string url;
    std::string model;
    double temperature = 0.0;
    std::string api_key_env = "MVAL_PROPOSER_KEY";
    int max_retries = 5;
    int initial_backoff_ms = 250;
};

// Chat-completion style POST; retries transient failures with exponential
// backoff and archives every request/response pair in the audit store.
std::string fetch_remote(const ProposalRequest& request, const EndpointConfig& config,
                         const std::string& audit_dir);

std::uint64_t fnv1a64(std::string_view text);
std::string request_key(const ProposalRequest& request); // 16-hex-digit prompt hash

class Proposer {
public:
    virtual ~Proposer() = default;
    virtual ProposalResponse propose(const ProposalRequest& request) = 0;
};

// Reads payloads from a directory: "<kind>_<hash>.json" by request hash,
// falling back to "<kind>.json". Both lookups are recorded in the audit dir
// when one is configured.
class FixtureProposer : public Proposer {
public:
    explicit FixtureProposer(std::string fixture_dir, std::string audit_dir = {});
    ProposalResponse propose(const ProposalRequest& request) override;

private:
    std::string fixture_dir_;
    std::string audit_dir_;
};

class RemoteProposer : public Proposer {
public:
    RemoteProposer(EndpointConfig config, std::string audit_dir);
    ProposalResponse propose(const ProposalRequest& request) override;

private:
    EndpointConfig config_;
    std::string audit_dir_;
};

} // namespace mval
