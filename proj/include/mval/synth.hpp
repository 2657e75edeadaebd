#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mval/harmonize.hpp"
#include "mval/instrument.hpp"
#include "mval/mapping.hpp"
#include "mval/taxonomy.hpp"

namespace mval {

struct SynthFactor {
    std::string factor_id; // doubles as the v0 subdimension id
    int item_count = 3;
    double loading = 1.0;
    double beta_binary = 0.0;
    double beta_continuous = 0.0;
};

// A contaminated construct: its items mix the partner factor with hidden
// group factors, while the v0 mapping rows cross-load onto the partner
// construct with the configured primary weights.
struct SynthContamination {
    std::string construct_id = "beliefs_mix";
    std::string partner_factor_id = "beliefs_base";
    int groups = 3;
    int items_per_group = 2;
    double shared_loading = 0.65;
    double hidden_loading = 0.40;
    std::vector<double> map_primary_weights = {0.75, 0.60}; // cycled across items
};

// Baseline covariate in the synthetic instrument; may proxy a latent factor
// (an established covariate, like a literacy battery score) or be pure noise.
struct SynthControl {
    std::string factor_id; // empty = pure noise
    double loading = 1.0;
    double noise_sd = 0.3;
};

struct SynthSpec {
    std::size_t n = 2000;
    std::vector<SynthFactor> factors;
    std::optional<SynthContamination> contamination;
    double noise_sd = 0.4;
    double missing_rate = 0.05;
    double binary_base_rate = 0.5;
    double continuous_noise_sd = 1.0;
    std::vector<SynthControl> controls;
    std::uint64_t seed = 1;
};

SynthSpec default_synth_spec();

struct GroundTruth {
    std::map<std::string, std::map<std::string, double>> item_loadings; // item -> factor -> loading
    std::map<std::string, double> beta_binary;     // factor -> coefficient
    std::map<std::string, double> beta_continuous;
    std::map<std::string, double> subdim_effect;   // v0 subdim -> driving binary effect
    std::map<std::string, std::string> expected_label; // signal | noise_like | weak_or_noise
    std::string planted_parent;
    std::vector<std::string> planted_children;
};

struct SynthData {
    SynthSpec spec;
    Instrument instrument;
    ResponseMatrix responses;
    Taxonomy taxonomy;
    MappingMatrix mapping;
    std::vector<HarmonizationRule> rules;
    std::vector<OutcomeSpec> outcomes;
    GroundTruth truth;
    std::string planted_refinement_json; // fixture payload for the planted split
};

SynthData generate(const SynthSpec& spec);

// Deterministic expected labels given effect-size thresholds: effects at or
// above `signal_beta` must classify as signal, exact zeros as noise_like,
// anything between lands in a tolerated weak-or-noise band.
std::map<std::string, std::string> oracle_labels(const GroundTruth& truth,
                                                 double signal_beta = 0.5,
                                                 double weak_beta = 0.05);

void write_synth(const std::string& dir, const SynthData& data);

SynthSpec synth_spec_from_json_text(const std::string& text);
SynthSpec load_synth_spec(const std::string& path);
std::string synth_spec_to_json_text(const SynthSpec& spec);

} // namespace mval
