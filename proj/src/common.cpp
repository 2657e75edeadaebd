#include "mval/common.hpp"

#include "mval/parallel.hpp"

namespace mval {

unsigned& worker_threads() {
    static unsigned threads = 0; // 0 = hardware concurrency
    return threads;
}

std::string_view errc_name(Errc c) {
    switch (c) {
        case Errc::schema_error: return "SchemaError";
        case Errc::duplicate_id: return "DuplicateId";
        case Errc::unknown_item: return "UnknownItem";
        case Errc::unknown_subdimension: return "UnknownSubdimension";
        case Errc::missing_rule: return "MissingRule";
        case Errc::code_table_gap: return "CodeTableGap";
        case Errc::shape_mismatch: return "ShapeMismatch";
        case Errc::precondition: return "PreconditionViolation";
        case Errc::single_class_train: return "SingleClassTrain";
        case Errc::empty_input: return "EmptyInput";
        case Errc::zero_variance_target: return "ZeroVarianceTarget";
        case Errc::too_few_rows: return "TooFewRows";
        case Errc::stale_mapping: return "StaleMapping";
        case Errc::stale_version: return "StaleVersion";
        case Errc::cross_anchor_merge: return "CrossAnchorMerge";
        case Errc::not_a_leaf: return "NotALeaf";
        case Errc::duplicate_child_id: return "DuplicateChildId";
        case Errc::missing_coverage: return "MissingCoverage";
        case Errc::neighborhood_violation: return "NeighborhoodViolation";
        case Errc::anchor_violation: return "AnchorViolation";
        case Errc::proposer_failure: return "ProposerFailure";
        case Errc::inconsistent_round: return "InconsistentRound";
        case Errc::unparseable_response: return "UnparseableResponse";
        case Errc::constraint_violation: return "ConstraintViolation";
        case Errc::missing_slot: return "MissingSlot";
        case Errc::network_error: return "NetworkError";
        case Errc::rate_limited: return "RateLimited";
        case Errc::max_retries: return "MaxRetries";
        case Errc::io_error: return "IoError";
    }
    return "UnknownError";
}

} // namespace mval
