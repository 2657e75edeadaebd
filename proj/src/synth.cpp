#include "mval/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mval/csv.hpp"
#include "mval/rng.hpp"

namespace mval {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

SynthSpec default_synth_spec() {
    SynthSpec spec;
    spec.factors = {
        {"core_drive", 3, 1.0, 1.0, 1.0},
        {"null_construct", 3, 1.0, 0.0, 0.0},
        {"beliefs_base", 3, 1.0, 0.0, 0.0},
    };
    spec.contamination = SynthContamination{};
    // one pure-noise demographic plus an established covariate proxying the
    // contamination partner, so the belief constructs' shared content is
    // already in the baseline (as a real covariate set would be)
    spec.controls = {{"", 1.0, 0.3}, {"beliefs_base", 1.0, 0.3}};
    return spec;
}

namespace {

double stable_sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

void check_spec(const SynthSpec& spec) {
    if (spec.n < 10) fail(Errc::precondition, "synth spec: n too small");
    if (spec.factors.empty()) fail(Errc::precondition, "synth spec: no factors");
    if (spec.missing_rate < 0.0 || spec.missing_rate > 1.0 || spec.binary_base_rate <= 0.0 ||
        spec.binary_base_rate >= 1.0)
        fail(Errc::precondition, "synth spec: rates out of range");
    // all-null designs (every beta zero) are legitimate: placebo soundness
    if (spec.contamination) {
        const auto& c = *spec.contamination;
        if (c.groups < 2 || c.items_per_group < 1)
            fail(Errc::precondition, "synth spec: contamination needs >= 2 groups");
        const bool partner_known =
            std::any_of(spec.factors.begin(), spec.factors.end(),
                        [&](const SynthFactor& f) { return f.factor_id == c.partner_factor_id; });
        if (!partner_known)
            fail(Errc::precondition, "synth spec: contamination partner factor unknown");
        if (c.map_primary_weights.empty())
            fail(Errc::precondition, "synth spec: contamination needs mapping weights");
    }
}

std::string group_suffix(int g) {
    std::string s;
    int v = g;
    do {
        s.insert(s.begin(), static_cast<char>('a' + v % 26));
        v = v / 26 - 1;
    } while (v >= 0);
    return s;
}

} // namespace

SynthData generate(const SynthSpec& spec) {
    check_spec(spec);
    SynthData data;
    data.spec = spec;
    const std::size_t n = spec.n;

    // latent factors: clean factors in spec order, then hidden group factors
    std::vector<std::string> factor_names;
    for (const auto& f : spec.factors) factor_names.push_back(f.factor_id);
    std::vector<std::string> hidden_names;
    if (spec.contamination)
        for (int g = 0; g < spec.contamination->groups; ++g)
            hidden_names.push_back(spec.contamination->construct_id + "_h" + group_suffix(g));

    std::map<std::string, std::vector<double>> factors;
    Rng factor_rng = Rng::derive(spec.seed, 1);
    for (const auto& name : factor_names) {
        auto& column = factors[name];
        column.resize(n);
        for (std::size_t i = 0; i < n; ++i) column[i] = factor_rng.next_normal();
    }
    for (const auto& name : hidden_names) {
        auto& column = factors[name];
        column.resize(n);
        for (std::size_t i = 0; i < n; ++i) column[i] = factor_rng.next_normal();
    }

    // item plan
    struct ItemPlan {
        std::string item_id;
        std::string stem;
        Usage usage;
        std::map<std::string, double> loadings; // factor -> loading
        std::vector<WeightEntry> map_weights;
    };
    std::vector<ItemPlan> items;

    for (const auto& f : spec.factors) {
        for (int k = 0; k < f.item_count; ++k) {
            ItemPlan item;
            item.item_id = f.factor_id + "_it" + std::to_string(k + 1);
            item.stem = "Indicator " + std::to_string(k + 1) + " of " + f.factor_id;
            item.usage = Usage::mechanism;
            item.loadings[f.factor_id] = f.loading;
            item.map_weights = {{f.factor_id, 1.0}};
            items.push_back(std::move(item));
        }
    }
    if (spec.contamination) {
        const auto& c = *spec.contamination;
        int item_index = 0;
        for (int g = 0; g < c.groups; ++g) {
            for (int k = 0; k < c.items_per_group; ++k) {
                ItemPlan item;
                item.item_id = c.construct_id + "_" + group_suffix(g) + std::to_string(k + 1);
                item.stem = "Blended indicator " + std::to_string(k + 1) + " of " +
                            c.construct_id + " channel " + group_suffix(g);
                item.usage = Usage::mechanism;
                item.loadings[c.partner_factor_id] = c.shared_loading;
                item.loadings[hidden_names[static_cast<std::size_t>(g)]] = c.hidden_loading;
                const double pw =
                    c.map_primary_weights[static_cast<std::size_t>(item_index) %
                                          c.map_primary_weights.size()];
                item.map_weights = {{c.construct_id, pw}, {c.partner_factor_id, 1.0 - pw}};
                items.push_back(std::move(item));
                ++item_index;
            }
        }
    }
    std::map<std::string, double> control_noise;
    for (std::size_t k = 0; k < spec.controls.size(); ++k) {
        const SynthControl& ctrl = spec.controls[k];
        ItemPlan item;
        item.item_id = "ctrl_it" + std::to_string(k + 1);
        item.stem = "Background control " + std::to_string(k + 1);
        item.usage = Usage::control;
        if (!ctrl.factor_id.empty()) {
            if (!factors.count(ctrl.factor_id))
                fail(Errc::precondition, "synth spec: control proxies unknown factor '" +
                                             ctrl.factor_id + "'");
            item.loadings[ctrl.factor_id] = ctrl.loading;
        }
        control_noise[item.item_id] = ctrl.noise_sd;
        item.map_weights = {{"controls_misc", 1.0}};
        items.push_back(std::move(item));
    }

    // values
    Rng noise_rng = Rng::derive(spec.seed, 2);
    std::map<std::string, std::vector<double>> values;
    for (const auto& item : items) {
        auto& column = values[item.item_id];
        column.resize(n);
        const double sd = control_noise.count(item.item_id) ? control_noise.at(item.item_id)
                                                            : spec.noise_sd;
        for (std::size_t i = 0; i < n; ++i) {
            double v = sd * noise_rng.next_normal();
            for (const auto& [factor, loading] : item.loadings)
                v += loading * factors.at(factor)[i];
            column[i] = v;
        }
    }

    // outcomes
    Rng outcome_rng = Rng::derive(spec.seed, 4);
    std::vector<double> binary_index(n, 0.0), rate(n, 0.0);
    for (const auto& f : spec.factors) {
        const auto& column = factors.at(f.factor_id);
        for (std::size_t i = 0; i < n; ++i) {
            binary_index[i] += f.beta_binary * column[i];
            rate[i] += f.beta_continuous * column[i];
        }
    }
    // intercept hits the configured base rate in expectation over the sample
    double lo = -30.0, hi = 30.0;
    for (int iter = 0; iter < 100; ++iter) {
        const double mid = 0.5 * (lo + hi);
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += stable_sigmoid(binary_index[i] + mid);
        mean /= static_cast<double>(n);
        if (mean < spec.binary_base_rate) lo = mid;
        else hi = mid;
    }
    const double intercept = 0.5 * (lo + hi);
    std::vector<double> accept(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        accept[i] = outcome_rng.next_double() < stable_sigmoid(binary_index[i] + intercept) ? 1.0
                                                                                            : 0.0;
    for (std::size_t i = 0; i < n; ++i)
        rate[i] += spec.continuous_noise_sd * outcome_rng.next_normal();

    // instrument
    std::vector<SurveyItem> survey_items;
    for (const auto& item : items) {
        SurveyItem s;
        s.item_id = item.item_id;
        s.stem_text = item.stem;
        s.response_kind = ResponseKind::numeric;
        s.usage = item.usage;
        survey_items.push_back(std::move(s));
    }
    {
        SurveyItem accept_item;
        accept_item.item_id = "accept_bin";
        accept_item.stem_text = "Would you accept the proposed switch?";
        accept_item.response_kind = ResponseKind::binary;
        accept_item.usage = Usage::outcome;
        survey_items.push_back(std::move(accept_item));
        SurveyItem rate_item;
        rate_item.item_id = "req_rate";
        rate_item.stem_text = "Minimum required rate to accept the switch";
        rate_item.response_kind = ResponseKind::numeric;
        rate_item.usage = Usage::outcome;
        survey_items.push_back(std::move(rate_item));
    }
    data.instrument = Instrument(std::move(survey_items));

    // responses CSV tokens; missingness hits mechanism items only
    Rng missing_rng = Rng::derive(spec.seed, 3);
    ResponseMatrix responses;
    for (const auto& item : data.instrument.items()) responses.item_ids.push_back(item.item_id);
    responses.respondent_ids.reserve(n);
    responses.cells.reserve(n * responses.item_ids.size());
    for (std::size_t i = 0; i < n; ++i) {
        responses.respondent_ids.push_back("r" + std::to_string(i + 1));
        for (const auto& item_id : responses.item_ids) {
            if (item_id == "accept_bin") {
                responses.cells.push_back({csv::format_double(accept[i]), false});
                continue;
            }
            if (item_id == "req_rate") {
                responses.cells.push_back({csv::format_double(rate[i]), false});
                continue;
            }
            const bool mechanism =
                data.instrument.item(item_id).usage == Usage::mechanism;
            if (mechanism && missing_rng.next_double() < spec.missing_rate) {
                responses.cells.push_back({"", true});
                continue;
            }
            responses.cells.push_back({csv::format_double(values.at(item_id)[i]), false});
        }
    }
    data.responses = std::move(responses);

    // taxonomy: clean factors under CORE except the contamination partner,
    // which lives with the contaminated construct under BELIEFS
    std::vector<Anchor> anchors{{"CORE", "Primary behavioral mechanisms"},
                                {"BELIEFS", "Belief and perception channels"},
                                {"CONTROLS", "Background controls"}};
    std::vector<Subdimension> subdims;
    const std::string partner =
        spec.contamination ? spec.contamination->partner_factor_id : std::string{};
    for (const auto& f : spec.factors) {
        Subdimension s;
        s.subdim_id = f.factor_id;
        s.anchor_id = f.factor_id == partner ? "BELIEFS" : "CORE";
        s.definition = "Latent construct " + f.factor_id;
        subdims.push_back(std::move(s));
    }
    if (spec.contamination) {
        Subdimension s;
        s.subdim_id = spec.contamination->construct_id;
        s.anchor_id = "BELIEFS";
        s.definition = "Aggregate belief construct " + spec.contamination->construct_id;
        subdims.push_back(std::move(s));
    }
    {
        Subdimension s;
        s.subdim_id = "controls_misc";
        s.anchor_id = "CONTROLS";
        s.definition = "Bookkeeping bucket for control items";
        subdims.push_back(std::move(s));
    }
    data.taxonomy = Taxonomy(std::move(anchors), std::move(subdims));

    // mapping rows (outcome items carry no row)
    std::vector<MappingRow> rows;
    for (const auto& item : items) {
        MappingRow row;
        row.item_id = item.item_id;
        row.weights = item.map_weights;
        row.proposer_id = "synth";
        rows.push_back(std::move(row));
    }
    data.mapping = MappingMatrix(std::move(rows));
    data.mapping.bind(data.taxonomy);

    // harmonization rules
    for (const auto& item : items) {
        HarmonizationRule rule;
        rule.item_id = item.item_id;
        rule.kind = RuleKind::numeric_identity;
        rule.winsorize = WinsorizeSpec{0.01, 0.99};
        rule.standardize = true;
        data.rules.push_back(std::move(rule));
    }

    // outcomes
    {
        OutcomeSpec accept_spec;
        accept_spec.outcome_id = "accept_bin";
        accept_spec.kind = OutcomeSpec::Kind::binary;
        for (std::size_t k = 0; k < spec.controls.size(); ++k)
            accept_spec.covariate_item_ids.push_back("ctrl_it" + std::to_string(k + 1));
        data.outcomes.push_back(accept_spec);

        OutcomeSpec rate_spec;
        rate_spec.outcome_id = "req_rate";
        rate_spec.kind = OutcomeSpec::Kind::continuous;
        rate_spec.covariate_item_ids = accept_spec.covariate_item_ids;
        rate_spec.subsample_filter = SubsampleFilter{"accepters_only", "accept_bin", 1.0};
        data.outcomes.push_back(rate_spec);
    }

    // ground truth + planted split fixture
    for (const auto& item : items) data.truth.item_loadings[item.item_id] = item.loadings;
    for (const auto& f : spec.factors) {
        data.truth.beta_binary[f.factor_id] = f.beta_binary;
        data.truth.beta_continuous[f.factor_id] = f.beta_continuous;
        data.truth.subdim_effect[f.factor_id] = std::abs(f.beta_binary);
    }
    for (const auto& name : hidden_names) {
        data.truth.beta_binary[name] = 0.0;
        data.truth.beta_continuous[name] = 0.0;
    }
    data.truth.subdim_effect["controls_misc"] = 0.0;
    if (spec.contamination) data.truth.subdim_effect[spec.contamination->construct_id] = 0.0;
    data.truth.expected_label = oracle_labels(data.truth);

    if (spec.contamination) {
        const auto& c = *spec.contamination;
        data.truth.planted_parent = c.construct_id;
        ordered_json split;
        split["parent"] = c.construct_id;
        split["children"] = ordered_json::array();
        for (int g = 0; g < c.groups; ++g) {
            const std::string child = c.construct_id + "_" + group_suffix(g);
            data.truth.planted_children.push_back(child);
            split["children"].push_back(
                {{"name", child},
                 {"definition", "Refined channel " + group_suffix(g) + " of " + c.construct_id}});
        }
        ordered_json rows_json = ordered_json::array();
        for (const auto& item : items) {
            if (item.map_weights.empty() || item.map_weights.front().subdim_id != c.construct_id)
                continue;
            // channel letter is embedded in the planted item id
            const std::string suffix = item.item_id.substr(c.construct_id.size() + 1);
            std::string letters;
            for (char ch : suffix)
                if (ch >= 'a' && ch <= 'z') letters.push_back(ch);
            ordered_json rec;
            rec["item_id"] = item.item_id;
            rec["weights"] = {{c.construct_id + "_" + letters, 1.0}};
            rec["rationale"] = "planted channel assignment";
            rec["not_this"] = "other refined channels";
            rows_json.push_back(std::move(rec));
        }
        ordered_json payload;
        payload["split"] = std::move(split);
        payload["rows"] = std::move(rows_json);
        data.planted_refinement_json = payload.dump(2) + "\n";
    }

    return data;
}

std::map<std::string, std::string> oracle_labels(const GroundTruth& truth, double signal_beta,
                                                 double weak_beta) {
    std::map<std::string, std::string> labels;
    for (const auto& [subdim, effect] : truth.subdim_effect) {
        if (effect >= signal_beta) labels[subdim] = "signal";
        else if (effect <= weak_beta) labels[subdim] = "noise_like";
        else labels[subdim] = "weak_or_noise";
    }
    return labels;
}

void write_synth(const std::string& dir, const SynthData& data) {
    fs::create_directories(dir);
    const fs::path base(dir);
    write_instrument((base / "instrument.json").string(), data.instrument);
    write_responses((base / "responses.csv").string(), data.responses);
    write_taxonomy((base / "taxonomy.json").string(), data.taxonomy);
    write_mapping((base / "mapping.json").string(), data.mapping, /*bare_list=*/true);
    write_rules((base / "rules.json").string(), data.rules);
    write_outcomes((base / "outcomes.json").string(), data.outcomes);
    {
        std::ofstream out(base / "spec.json", std::ios::binary);
        out << synth_spec_to_json_text(data.spec);
    }
    {
        ordered_json truth;
        ordered_json loadings = ordered_json::object();
        for (const auto& [item, factor_loadings] : data.truth.item_loadings)
            loadings[item] = factor_loadings;
        truth["item_loadings"] = std::move(loadings);
        truth["beta_binary"] = data.truth.beta_binary;
        truth["beta_continuous"] = data.truth.beta_continuous;
        truth["subdim_effect"] = data.truth.subdim_effect;
        truth["expected_label"] = data.truth.expected_label;
        truth["planted_parent"] = data.truth.planted_parent;
        truth["planted_children"] = data.truth.planted_children;
        std::ofstream out(base / "truth.json", std::ios::binary);
        out << truth.dump(2) << '\n';
    }
    if (!data.planted_refinement_json.empty()) {
        fs::create_directories(base / "proposals");
        std::ofstream out(base / "proposals" / "refinement.json", std::ios::binary);
        out << data.planted_refinement_json;
    }
}

std::string synth_spec_to_json_text(const SynthSpec& spec) {
    ordered_json j;
    j["n"] = spec.n;
    j["seed"] = spec.seed;
    j["noise_sd"] = spec.noise_sd;
    j["missing_rate"] = spec.missing_rate;
    j["binary_base_rate"] = spec.binary_base_rate;
    j["continuous_noise_sd"] = spec.continuous_noise_sd;
    j["controls"] = ordered_json::array();
    for (const auto& ctrl : spec.controls)
        j["controls"].push_back({{"factor_id", ctrl.factor_id},
                                 {"loading", ctrl.loading},
                                 {"noise_sd", ctrl.noise_sd}});
    j["factors"] = ordered_json::array();
    for (const auto& f : spec.factors)
        j["factors"].push_back({{"factor_id", f.factor_id},
                                {"items", f.item_count},
                                {"loading", f.loading},
                                {"beta_binary", f.beta_binary},
                                {"beta_continuous", f.beta_continuous}});
    if (spec.contamination) {
        const auto& c = *spec.contamination;
        j["contamination"] = {{"construct_id", c.construct_id},
                              {"partner_factor_id", c.partner_factor_id},
                              {"groups", c.groups},
                              {"items_per_group", c.items_per_group},
                              {"shared_loading", c.shared_loading},
                              {"hidden_loading", c.hidden_loading},
                              {"map_primary_weights", c.map_primary_weights}};
    } else {
        j["contamination"] = nullptr;
    }
    return j.dump(2) + "\n";
}

SynthSpec synth_spec_from_json_text(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) fail(Errc::schema_error, "synth spec: invalid JSON");
    SynthSpec spec = default_synth_spec();
    spec.factors.clear();
    spec.contamination.reset();
    spec.n = j.value("n", 2000ULL);
    spec.seed = j.value("seed", 1ULL);
    spec.noise_sd = j.value("noise_sd", 0.4);
    spec.missing_rate = j.value("missing_rate", 0.05);
    spec.binary_base_rate = j.value("binary_base_rate", 0.5);
    spec.continuous_noise_sd = j.value("continuous_noise_sd", 1.0);
    if (j.contains("controls")) {
        spec.controls.clear();
        for (const auto& rec : j.at("controls")) {
            SynthControl ctrl;
            ctrl.factor_id = rec.value("factor_id", "");
            ctrl.loading = rec.value("loading", 1.0);
            ctrl.noise_sd = rec.value("noise_sd", 0.3);
            spec.controls.push_back(std::move(ctrl));
        }
    }
    if (j.contains("factors"))
        for (const auto& rec : j.at("factors")) {
            SynthFactor f;
            f.factor_id = rec.at("factor_id").get<std::string>();
            f.item_count = rec.value("items", 3);
            f.loading = rec.value("loading", 1.0);
            f.beta_binary = rec.value("beta_binary", 0.0);
            f.beta_continuous = rec.value("beta_continuous", 0.0);
            spec.factors.push_back(std::move(f));
        }
    if (j.contains("contamination") && !j.at("contamination").is_null()) {
        const auto& rec = j.at("contamination");
        SynthContamination c;
        c.construct_id = rec.value("construct_id", c.construct_id);
        c.partner_factor_id = rec.value("partner_factor_id", c.partner_factor_id);
        c.groups = rec.value("groups", c.groups);
        c.items_per_group = rec.value("items_per_group", c.items_per_group);
        c.shared_loading = rec.value("shared_loading", c.shared_loading);
        c.hidden_loading = rec.value("hidden_loading", c.hidden_loading);
        if (rec.contains("map_primary_weights"))
            c.map_primary_weights = rec.at("map_primary_weights").get<std::vector<double>>();
        spec.contamination = std::move(c);
    }
    check_spec(spec);
    return spec;
}

SynthSpec load_synth_spec(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::io_error, "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return synth_spec_from_json_text(buf.str());
}

} // namespace mval
