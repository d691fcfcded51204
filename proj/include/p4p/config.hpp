#pragma once

// Run configuration: one JSON file with named sections, every section
// validated against its module's contract before any work starts, unknown
// keys rejected.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "p4p/theory.hpp"
#include "p4p/world.hpp"

namespace p4p::cfg {

struct MetricConfig {
    int n_bins = 20;
    std::optional<int> fixed_subsample;
};

struct EstimatorConfig {
    std::string lag_interaction = "subject_grade_round"; // or "subject_round"
    std::vector<std::string> specs{"eq2", "eq3", "eq4", "eq5", "eq6", "eq7", "eq8",
                                   "eq9", "c1", "c2", "adjacency"};
};

struct InferenceConfig {
    int permutations = 2000;
    std::int64_t exhaustive_cap = 1000000;
    double alpha = 0.05;
    std::vector<std::string> hypotheses{"I", "II", "III", "IV", "V", "VI"};
    double ci_lo = -1.0;
    double ci_hi = 1.0;
    double ci_tol = 1e-3;
    bool ci_for_ks = true;
    // feasible advertised set: "fixed" permutes market labels with fixed
    // counts; "redraw" re-randomizes the two subject posts per market so the
    // mixed-arm composition varies
    std::string advertised_composition = "fixed";
};

struct PowerConfig {
    std::vector<double> deltas{0.0, 0.05, 0.1, 0.15, 0.2};
    std::vector<std::string> tests{"ks", "ols"};
    int n_sims = 200;
    int permutations = 299;
    double alpha = 0.05;
};

struct RunConfig {
    std::uint64_t seed = 20160201;
    std::string out_dir = "out";
    std::vector<std::string> stages{"simulate", "score-irt", "score-bn", "award", "infer", "tva"};
    world::WorldConfig world;
    world::EffectSpec effects;
    theory::ContractMenu menu;
    theory::TypeDistribution dist;
    MetricConfig metric;
    EstimatorConfig estimator;
    InferenceConfig inference;
    PowerConfig power;
};

// Throws ConfigError on unknown keys, bad types, or contract violations.
RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& json_text);
std::string config_to_json(const RunConfig& config);

} // namespace p4p::cfg
