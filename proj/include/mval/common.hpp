#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mval {

// Error codes shared across the pipeline. Each maps 1:1 onto a thrown
// Error; report-valued operations use Finding instead of throwing.
enum class Errc {
    schema_error,
    duplicate_id,
    unknown_item,
    unknown_subdimension,
    missing_rule,
    code_table_gap,
    shape_mismatch,
    precondition,
    single_class_train,
    empty_input,
    zero_variance_target,
    too_few_rows,
    stale_mapping,
    stale_version,
    cross_anchor_merge,
    not_a_leaf,
    duplicate_child_id,
    missing_coverage,
    neighborhood_violation,
    anchor_violation,
    proposer_failure,
    inconsistent_round,
    unparseable_response,
    constraint_violation,
    missing_slot,
    network_error,
    rate_limited,
    max_retries,
    io_error,
};

std::string_view errc_name(Errc c);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
    Errc code() const { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

// One entry of a report-valued check (validate_taxonomy, validate_mapping, ...).
struct Finding {
    std::string code;     // short machine tag, e.g. "row_sum", "orphan_parent"
    std::string subject;  // item/subdim the finding is about
    std::string detail;
};

struct ValidationReport {
    std::vector<Finding> findings;

    bool ok() const { return findings.empty(); }
    void add(std::string code, std::string subject, std::string detail) {
        findings.push_back({std::move(code), std::move(subject), std::move(detail)});
    }
    bool has(std::string_view code) const {
        for (const auto& f : findings)
            if (f.code == code) return true;
        return false;
    }
};

// Missing numeric cells are carried as quiet NaN inside matrices. All code
// goes through these helpers; no other NaN source is permitted in inputs.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return std::isnan(v); }

inline constexpr double kSimplexTol = 1e-9;

} // namespace mval
