#include "mval/refine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace mval {

std::string_view to_string(Decision d) {
    switch (d) {
        case Decision::retain: return "retain";
        case Decision::refine: return "refine";
        case Decision::defer: return "defer";
        case Decision::discard: return "discard";
    }
    return "defer";
}

namespace {

// Conservative joint label across outcomes: retained only when no outcome's
// primary metric classifies the candidate as noise-like.
TriageLabel joint_label(TriageLabel a, TriageLabel b) {
    return static_cast<int>(a) > static_cast<int>(b) ? a : b; // enum order: signal < weak < noise
}

} // namespace

std::vector<SubdimDecision> decide(const RoundInputs& inputs, const DecidePolicy& policy,
                                   const std::map<std::string, int>& noise_streak) {
    // cross-check the round's evidence hangs together
    for (const auto& cc : inputs.cc_results) {
        std::vector<std::string> sorted_cluster = cc.cluster;
        std::sort(sorted_cluster.begin(), sorted_cluster.end());
        const bool known = std::any_of(
            inputs.overlap.clusters.begin(), inputs.overlap.clusters.end(),
            [&](const std::vector<std::string>& c) { return c == sorted_cluster; });
        if (!known)
            fail(Errc::inconsistent_round, "conditional-contribution result for '" + cc.candidate +
                                               "' references a cluster absent from this round's "
                                               "overlap report");
    }

    // joint label per candidate: the best classification across outcomes
    std::map<std::string, TriageLabel> labels;
    for (const auto& report : inputs.primary_reports) {
        const TriageLabel label = classify(report, policy.thresholds);
        auto it = labels.find(report.candidate);
        if (it == labels.end()) labels.emplace(report.candidate, label);
        else it->second = joint_label(it->second, label);
    }

    std::set<std::string> limited;
    for (const auto& flag : inputs.limits) limited.insert(flag.subdim_id);

    std::vector<SubdimDecision> decisions;
    for (const auto& [subdim, label] : labels) {
        SubdimDecision d;
        d.subdim_id = subdim;
        d.label = label;
        const int prior = noise_streak.count(subdim) ? noise_streak.at(subdim) : 0;

        if (label != TriageLabel::noise_like) {
            d.action = Decision::retain;
            d.reason = "stable_gains";
            d.noise_streak = 0;
            decisions.push_back(std::move(d));
            continue;
        }
        d.noise_streak = prior + 1;

        if (limited.count(subdim)) {
            d.action = Decision::defer;
            d.reason = "data_limited";
            decisions.push_back(std::move(d));
            continue;
        }

        if (inputs.overlap.in_cluster(subdim)) {
            // rescue only on an unambiguous conditional contribution: every
            // evaluated outcome must pass
            bool any = false, all_pass = true;
            for (const auto& result : inputs.cc_results)
                if (result.candidate == subdim) {
                    any = true;
                    all_pass = all_pass && result.pass;
                }
            if (any && all_pass) {
                d.action = Decision::retain;
                d.reason = "cc_pass";
                d.noise_streak = 0;
            } else {
                d.action = Decision::refine;
                d.reason = "overlap_cc_fail";
            }
            decisions.push_back(std::move(d));
            continue;
        }

        if (d.noise_streak >= policy.discard_after) {
            d.action = Decision::discard;
            d.reason = "repeated_noise";
        } else {
            d.action = Decision::defer;
            d.reason = "watch";
        }
        decisions.push_back(std::move(d));
    }
    return decisions;
}

std::vector<std::string> neighborhood_items(const MappingMatrix& mapping,
                                            const std::vector<std::string>& cluster) {
    std::set<std::string> members(cluster.begin(), cluster.end());
    std::set<std::string> items;
    for (const auto& row : mapping.rows())
        for (const auto& entry : row.weights)
            if (entry.weight > 0.0 && members.count(entry.subdim_id)) items.insert(row.item_id);
    return {items.begin(), items.end()};
}

RefinementOutcome apply_refinement(const Taxonomy& taxonomy, const MappingMatrix& mapping,
                                   const std::vector<std::string>& cluster,
                                   const ProposalResponse& proposal,
                                   const Instrument& instrument) {
    const std::vector<std::string> neighborhood = neighborhood_items(mapping, cluster);
    const std::set<std::string> allowed(neighborhood.begin(), neighborhood.end());

    RefinementOutcome out{taxonomy, mapping};
    if (proposal.split) {
        if (std::find(cluster.begin(), cluster.end(), proposal.split->parent) == cluster.end())
            fail(Errc::neighborhood_violation,
                 "split parent '" + proposal.split->parent + "' is outside the target cluster");
        out.taxonomy = split_subdimension(taxonomy, proposal.split->parent,
                                          proposal.split->children);
    }

    for (const auto& row : proposal.rows) {
        if (!allowed.count(row.item_id))
            fail(Errc::neighborhood_violation,
                 "reallocation touches item '" + row.item_id + "' outside the neighborhood");
        if (!mapping.has_row(row.item_id))
            fail(Errc::neighborhood_violation,
                 "reallocation references unmapped item '" + row.item_id + "'");
        if (mapping.row_is_anchored(mapping.row(row.item_id)))
            fail(Errc::anchor_violation,
                 "reallocation modifies anchored row '" + row.item_id + "'");
    }

    for (const auto& new_row : proposal.rows) {
        for (auto& row : out.mapping.rows()) {
            if (row.item_id != new_row.item_id) continue;
            MappingRow replacement = new_row;
            if (replacement.proposer_id.empty()) replacement.proposer_id = "proposer";
            std::sort(replacement.weights.begin(), replacement.weights.end(),
                      [](const WeightEntry& a, const WeightEntry& b) {
                          return a.subdim_id < b.subdim_id;
                      });
            row = std::move(replacement);
        }
    }

    out.mapping.bind(out.taxonomy);
    out.mapping.set_version(mapping.version() + 1);
    const ValidationReport report = validate_mapping(out.mapping, out.taxonomy, &instrument);
    if (!report.ok()) {
        std::string detail = "refined mapping fails validation:";
        for (const auto& f : report.findings)
            detail += " [" + f.code + " " + f.subject + ": " + f.detail + "]";
        fail(Errc::proposer_failure, detail);
    }
    return out;
}

namespace {

// Leaves receiving positive weight from mechanism/control items.
std::vector<std::string> score_bearing_leaves(const MappingMatrix& mapping,
                                              const Taxonomy& taxonomy,
                                              const Instrument& instrument) {
    std::set<std::string> subdims;
    for (const auto& row : mapping.rows()) {
        if (!instrument.contains(row.item_id)) continue;
        const Usage usage = instrument.item(row.item_id).usage;
        if (usage == Usage::outcome || usage == Usage::excluded) continue;
        for (const auto& entry : row.weights)
            if (entry.weight > 0.0 && taxonomy.has_subdim(entry.subdim_id) &&
                taxonomy.is_leaf(entry.subdim_id))
                subdims.insert(entry.subdim_id);
    }
    return {subdims.begin(), subdims.end()};
}

std::set<std::string> anchored_leaves(const Taxonomy& taxonomy) {
    std::set<std::string> out;
    for (const auto& s : taxonomy.subdimensions())
        if (s.anchored) out.insert(s.subdim_id);
    return out;
}

} // namespace

LoopResult run_loop(const LoopInputs& inputs, Proposer& proposer, const LoopConfig& config) {
    if (!inputs.instrument || inputs.contexts.empty() ||
        inputs.contexts.size() != inputs.plans.size())
        fail(Errc::precondition, "run_loop needs an instrument and aligned contexts/plans");
    {
        const ValidationReport tr = validate_taxonomy(inputs.taxonomy);
        if (!tr.ok()) fail(Errc::precondition, "initial taxonomy fails validation");
        const ValidationReport mr =
            validate_mapping(inputs.mapping, inputs.taxonomy, inputs.instrument);
        if (!mr.ok()) fail(Errc::precondition, "initial mapping fails validation");
    }

    LoopResult result;
    Taxonomy taxonomy = inputs.taxonomy;
    MappingMatrix mapping = inputs.mapping;
    mapping.bind(taxonomy);

    std::map<std::string, int> noise_streak;
    std::set<std::string> retained = anchored_leaves(taxonomy);
    std::map<std::string, double> prev_best;
    int plateau_count = 0;

    for (int round = 0;; ++round) {
        IterationState state;
        state.round = round;
        state.outer_split = config.outer_split;
        state.taxonomy_version = taxonomy.version();
        state.mapping_version = mapping.version();

        const std::vector<std::string> candidates =
            score_bearing_leaves(mapping, taxonomy, *inputs.instrument);

        std::vector<DeltaReport> primary_reports;
        for (std::size_t i = 0; i < inputs.contexts.size(); ++i) {
            const EvalContext& ctx = *inputs.contexts[i];
            const FoldPlan& plan = *inputs.plans[i];
            const std::vector<Metric> metrics = default_metrics(ctx.outcome);
            std::vector<DeltaReport> reports =
                incremental_validity(ctx, mapping, plan, candidates, metrics, retained,
                                     config.outer_split);
            const Metric primary = primary_metric(ctx.outcome);
            for (auto& report : reports) {
                if (report.metric == primary) primary_reports.push_back(report);
                state.reports.push_back(std::move(report));
            }
        }

        // diagnostics on the split's training rows, first outcome's sample
        const EvalContext& diag_ctx = *inputs.contexts.front();
        const FoldPlan& diag_plan = *inputs.plans.front();
        const std::vector<std::size_t> train_rows =
            diag_plan.outer_train_rows(config.outer_split);
        std::vector<std::string> degenerate_items;
        const ScoreMatrix scores =
            scores_for_rows(diag_ctx, mapping, train_rows, &degenerate_items);
        const ScoreMatrix train_scores = subset_score_rows(scores, train_rows);
        state.overlap = correlation_screen(
            scores, config.overlap_cutoff, train_rows);
        state.cross_loading =
            cross_loading_concentration(mapping, config.closeness, inputs.instrument);
        state.limits = data_limit_flags(train_scores, score_coverage(train_scores),
                                        config.limit_thresholds, degenerate_items, &mapping);

        // conditional contribution for noise-like members of overlap clusters
        std::map<std::string, TriageLabel> labels;
        for (const auto& report : primary_reports) {
            const TriageLabel label = classify(report, config.policy.thresholds);
            auto it = labels.find(report.candidate);
            if (it == labels.end()) labels.emplace(report.candidate, label);
            else it->second = joint_label(it->second, label);
        }
        for (const auto& cluster : state.overlap.clusters) {
            for (const auto& member : cluster) {
                auto it = labels.find(member);
                if (it == labels.end() || it->second != TriageLabel::noise_like) continue;
                for (std::size_t i = 0; i < inputs.contexts.size(); ++i)
                    state.cc_results.push_back(conditional_contribution(
                        cluster, member, *inputs.contexts[i], mapping, *inputs.plans[i],
                        primary_metric(inputs.contexts[i]->outcome), retained,
                        config.outer_split, config.policy.cc_pass_share));
            }
        }

        RoundInputs round_inputs;
        round_inputs.round = round;
        round_inputs.primary_reports = primary_reports;
        round_inputs.overlap = state.overlap;
        round_inputs.limits = state.limits;
        round_inputs.cc_results = state.cc_results;
        state.decisions = decide(round_inputs, config.policy, noise_streak);

        for (const auto& d : state.decisions) {
            noise_streak[d.subdim_id] = d.noise_streak;
            if (d.action == Decision::retain) retained.insert(d.subdim_id);
            else retained.erase(d.subdim_id);
        }
        for (const auto& id : anchored_leaves(taxonomy)) retained.insert(id);

        // best oriented delta per outcome (primary metric)
        for (std::size_t i = 0; i < inputs.contexts.size(); ++i) {
            const std::string& outcome_id = inputs.contexts[i]->outcome.outcome_id;
            double best = -std::numeric_limits<double>::infinity();
            for (const auto& report : primary_reports)
                if (report.outcome_id == outcome_id)
                    best = std::max(best, report.oriented_mean);
            state.best_oriented_delta[outcome_id] = best;
        }

        bool plateau_round = false;
        if (!prev_best.empty()) {
            double max_gain = -std::numeric_limits<double>::infinity();
            for (const auto& [outcome_id, best] : state.best_oriented_delta)
                max_gain = std::max(max_gain, best - prev_best[outcome_id]);
            plateau_round = max_gain < config.stopping.plateau_delta;
        }
        plateau_count = plateau_round ? plateau_count + 1 : 0;
        prev_best = state.best_oriented_delta;

        std::vector<std::string> refine_marked;
        for (const auto& d : state.decisions)
            if (d.action == Decision::refine) refine_marked.push_back(d.subdim_id);

        if (round >= config.stopping.max_rounds) {
            state.status = "max_rounds";
            result.rounds.push_back(std::move(state));
            break;
        }
        if (plateau_count >= config.stopping.patience) {
            state.status = "plateau";
            result.rounds.push_back(std::move(state));
            break;
        }
        if (refine_marked.empty()) {
            state.status = "no_refine_targets";
            result.rounds.push_back(std::move(state));
            break;
        }

        // target cluster: the one holding a refine-marked subdim with the
        // strongest flagged correlation; deterministic tie-break
        const std::vector<std::string>* target_cluster = nullptr;
        double target_strength = -1.0;
        for (const auto& cluster : state.overlap.clusters) {
            const bool marked = std::any_of(refine_marked.begin(), refine_marked.end(),
                                            [&](const std::string& id) {
                                                return std::find(cluster.begin(), cluster.end(),
                                                                 id) != cluster.end();
                                            });
            if (!marked) continue;
            double strength = 0.0;
            for (const auto& pair : state.overlap.flagged) {
                const bool inside =
                    std::find(cluster.begin(), cluster.end(), pair.subdim_a) != cluster.end() &&
                    std::find(cluster.begin(), cluster.end(), pair.subdim_b) != cluster.end();
                if (inside) strength = std::max(strength, std::abs(pair.rho));
            }
            if (strength > target_strength) {
                target_strength = strength;
                target_cluster = &cluster;
            }
        }
        if (!target_cluster) {
            state.status = "no_refine_targets";
            result.rounds.push_back(std::move(state));
            break;
        }

        std::string target_subdim;
        for (const auto& member : *target_cluster)
            if (std::find(refine_marked.begin(), refine_marked.end(), member) !=
                refine_marked.end()) {
                target_subdim = member;
                break; // cluster members are sorted; first marked one
            }

        PromptContext prompt_ctx;
        prompt_ctx.anchors = taxonomy.anchors();
        prompt_ctx.cluster = *target_cluster;
        prompt_ctx.target_subdim = target_subdim;
        prompt_ctx.neighborhood_items = neighborhood_items(mapping, *target_cluster);
        for (const auto& item_id : prompt_ctx.neighborhood_items)
            prompt_ctx.items.push_back(inputs.instrument->item(item_id));
        for (const auto& member : *target_cluster)
            prompt_ctx.construct_definitions.emplace_back(member,
                                                          taxonomy.subdim(member).definition);

        ProposalConstraints constraints;
        constraints.max_nonzero = mapping.sparsity_m() > 0 ? mapping.sparsity_m() : 3;
        constraints.leaf_ids = taxonomy.leaf_ids();
        constraints.neighborhood_items = prompt_ctx.neighborhood_items;

        bool applied = false;
        std::string failure;
        for (int attempt = 0; attempt <= config.proposer_retries && !applied; ++attempt) {
            try {
                ProposalRequest request =
                    render_prompt(ProposalKind::refinement, prompt_ctx, constraints);
                request.taxonomy_version = taxonomy.version();
                request.mapping_version = mapping.version();
                const ProposalResponse proposal = proposer.propose(request);
                RefinementOutcome refined =
                    apply_refinement(taxonomy, mapping, *target_cluster, proposal,
                                     *inputs.instrument);
                taxonomy = std::move(refined.taxonomy);
                mapping = std::move(refined.mapping);
                applied = true;
            } catch (const Error& e) {
                failure = e.what();
            }
        }
        if (!applied) {
            state.status = "proposer_failure: " + failure;
            result.rounds.push_back(std::move(state));
            break;
        }
        state.refined_cluster.clear();
        for (const auto& member : *target_cluster) {
            if (!state.refined_cluster.empty()) state.refined_cluster += "+";
            state.refined_cluster += member;
        }
        state.status = "continue";
        result.rounds.push_back(std::move(state));
    }

    result.final_taxonomy = std::move(taxonomy);
    result.final_mapping = std::move(mapping);
    result.status = result.rounds.empty() ? "empty" : result.rounds.back().status;
    return result;
}

} // namespace mval
