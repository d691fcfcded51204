#include "p4p/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "p4p/errors.hpp"

namespace p4p::cfg {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& known,
                    const std::string& section) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!known.count(it.key()))
            throw ConfigError("unknown key '" + it.key() + "' in section '" + section + "'");
    }
}

template <class T>
void get_to(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) {
        try {
            obj.at(key).get_to(out);
        } catch (const json::exception& e) {
            throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
        }
    }
}

void parse_world(const json& j, world::WorldConfig& w) {
    reject_unknown(j, {"n_districts", "n_families", "advertised_counts", "n_schools",
                       "n_exp_p4p", "stratified_experienced", "grade_lo", "grade_hi",
                       "streams_per_grade", "pupils_per_stream", "sample_baseline",
                       "sample_endline", "recruit_slots_per_school", "applicants_per_market",
                       "n_subjects", "ar1_rho", "pupil_continue_prob", "ttc_base",
                       "ttc_theta_link", "ttc_noise_sd", "ttc_noise_kind", "covar_skill_link",
                       "covar_motiv_link", "district_adjacency", "effects"},
                   "world");
    get_to(j, "n_districts", w.n_districts);
    get_to(j, "n_families", w.n_families);
    if (j.contains("advertised_counts")) {
        auto& c = j.at("advertised_counts");
        reject_unknown(c, {"p4p", "fw", "mixed"}, "world.advertised_counts");
        get_to(c, "p4p", w.advertised_counts.p4p);
        get_to(c, "fw", w.advertised_counts.fw);
        get_to(c, "mixed", w.advertised_counts.mixed);
    }
    get_to(j, "n_schools", w.n_schools);
    get_to(j, "n_exp_p4p", w.n_exp_p4p);
    get_to(j, "stratified_experienced", w.stratified_experienced);
    get_to(j, "grade_lo", w.grade_lo);
    get_to(j, "grade_hi", w.grade_hi);
    get_to(j, "streams_per_grade", w.streams_per_grade);
    get_to(j, "pupils_per_stream", w.pupils_per_stream);
    get_to(j, "sample_baseline", w.sample_baseline);
    get_to(j, "sample_endline", w.sample_endline);
    get_to(j, "recruit_slots_per_school", w.recruit_slots_per_school);
    get_to(j, "applicants_per_market", w.applicants_per_market);
    get_to(j, "n_subjects", w.n_subjects);
    get_to(j, "ar1_rho", w.ar1_rho);
    get_to(j, "pupil_continue_prob", w.pupil_continue_prob);
    get_to(j, "ttc_base", w.ttc_base);
    get_to(j, "ttc_theta_link", w.ttc_theta_link);
    get_to(j, "ttc_noise_sd", w.ttc_noise_sd);
    get_to(j, "ttc_noise_kind", w.ttc_noise_kind);
    get_to(j, "covar_skill_link", w.covar_skill_link);
    get_to(j, "covar_motiv_link", w.covar_motiv_link);
    if (j.contains("district_adjacency")) {
        for (auto& e : j.at("district_adjacency")) {
            if (!e.is_array() || e.size() != 2)
                throw ConfigError("district_adjacency entries must be [a, b] pairs");
            w.district_adjacency.emplace_back(e[0].get<int>(), e[1].get<int>());
        }
    }
}

void parse_effects(const json& j, world::EffectSpec& fx) {
    reject_unknown(j, {"adv_learning", "exp_learning", "interact_learning", "incumbent_gap",
                       "exp_incumbent", "mixed_learning", "theory_link", "pupil_ability_scale",
                       "pupil_round_sd",
                       "noise_sd", "teacher_sd", "teacher_year_sd", "presence_base",
                       "presence_effect", "presence_sd", "prep_base", "prep_effect",
                       "pedagogy_base", "pedagogy_effect", "pedagogy_sd", "retention_base",
                       "retention_effect", "retention_covar_link", "absent_rate",
                       "endline_attr_rho", "endline_attr_sd", "endline_attr_effect",
                       "spot_checks_year1", "spot_checks_year2", "fw_inputs_year1",
                       "items_per_test"},
                   "world.effects");
    get_to(j, "adv_learning", fx.adv_learning);
    get_to(j, "exp_learning", fx.exp_learning);
    get_to(j, "interact_learning", fx.interact_learning);
    get_to(j, "incumbent_gap", fx.incumbent_gap);
    get_to(j, "exp_incumbent", fx.exp_incumbent);
    get_to(j, "mixed_learning", fx.mixed_learning);
    get_to(j, "theory_link", fx.theory_link);
    get_to(j, "pupil_ability_scale", fx.pupil_ability_scale);
    get_to(j, "pupil_round_sd", fx.pupil_round_sd);
    get_to(j, "noise_sd", fx.noise_sd);
    get_to(j, "teacher_sd", fx.teacher_sd);
    get_to(j, "teacher_year_sd", fx.teacher_year_sd);
    get_to(j, "presence_base", fx.presence_base);
    get_to(j, "presence_effect", fx.presence_effect);
    get_to(j, "presence_sd", fx.presence_sd);
    get_to(j, "prep_base", fx.prep_base);
    get_to(j, "prep_effect", fx.prep_effect);
    get_to(j, "pedagogy_base", fx.pedagogy_base);
    get_to(j, "pedagogy_effect", fx.pedagogy_effect);
    get_to(j, "pedagogy_sd", fx.pedagogy_sd);
    get_to(j, "retention_base", fx.retention_base);
    get_to(j, "retention_effect", fx.retention_effect);
    get_to(j, "retention_covar_link", fx.retention_covar_link);
    get_to(j, "absent_rate", fx.absent_rate);
    get_to(j, "endline_attr_rho", fx.endline_attr_rho);
    get_to(j, "endline_attr_sd", fx.endline_attr_sd);
    get_to(j, "endline_attr_effect", fx.endline_attr_effect);
    get_to(j, "spot_checks_year1", fx.spot_checks_year1);
    get_to(j, "spot_checks_year2", fx.spot_checks_year2);
    get_to(j, "fw_inputs_year1", fx.fw_inputs_year1);
    get_to(j, "items_per_test", fx.items_per_test);
}

void parse_menu(const json& j, theory::ContractMenu& m) {
    reject_unknown(j, {"w_outside", "bonus_b", "w_guaranteed", "w_fixed", "m_bar", "m_under",
                       "eps_lo", "eps_hi", "payout_p4p_rwf", "payout_fw_rwf",
                       "retention_bonus_rwf"},
                   "menu");
    get_to(j, "w_outside", m.w_outside);
    get_to(j, "bonus_b", m.bonus_b);
    get_to(j, "w_guaranteed", m.w_guaranteed);
    get_to(j, "w_fixed", m.w_fixed);
    get_to(j, "m_bar", m.m_bar);
    get_to(j, "m_under", m.m_under);
    get_to(j, "eps_lo", m.eps_lo);
    get_to(j, "eps_hi", m.eps_hi);
    get_to(j, "payout_p4p_rwf", m.payout_p4p_rwf);
    get_to(j, "payout_fw_rwf", m.payout_fw_rwf);
    get_to(j, "retention_bonus_rwf", m.retention_bonus_rwf);
}

void parse_dist(const json& j, theory::TypeDistribution& d) {
    reject_unknown(j, {"tau_lo", "tau_hi", "theta_lo", "theta_hi"}, "distribution");
    get_to(j, "tau_lo", d.tau_lo);
    get_to(j, "tau_hi", d.tau_hi);
    get_to(j, "theta_lo", d.theta_lo);
    get_to(j, "theta_hi", d.theta_hi);
}

} // namespace

RunConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    reject_unknown(j, {"seed", "out", "stages", "world", "menu", "distribution", "metric",
                       "estimator", "inference", "power"},
                   "(top level)");
    RunConfig c;
    get_to(j, "seed", c.seed);
    get_to(j, "out", c.out_dir);
    get_to(j, "stages", c.stages);
    if (j.contains("world")) {
        parse_world(j.at("world"), c.world);
        if (j.at("world").contains("effects")) parse_effects(j.at("world").at("effects"), c.effects);
    }
    if (j.contains("menu")) parse_menu(j.at("menu"), c.menu);
    if (j.contains("distribution")) parse_dist(j.at("distribution"), c.dist);
    if (j.contains("metric")) {
        auto& m = j.at("metric");
        reject_unknown(m, {"n_bins", "fixed_subsample"}, "metric");
        get_to(m, "n_bins", c.metric.n_bins);
        if (m.contains("fixed_subsample") && !m.at("fixed_subsample").is_null())
            c.metric.fixed_subsample = m.at("fixed_subsample").get<int>();
    }
    if (j.contains("estimator")) {
        auto& e = j.at("estimator");
        reject_unknown(e, {"lag_interaction", "specs"}, "estimator");
        get_to(e, "lag_interaction", c.estimator.lag_interaction);
        get_to(e, "specs", c.estimator.specs);
        if (c.estimator.lag_interaction != "subject_round" &&
            c.estimator.lag_interaction != "subject_grade_round")
            throw ConfigError("estimator.lag_interaction must be subject_round or "
                              "subject_grade_round");
    }
    if (j.contains("inference")) {
        auto& i = j.at("inference");
        reject_unknown(i, {"permutations", "exhaustive_cap", "alpha", "hypotheses", "ci_lo",
                           "ci_hi", "ci_tol", "ci_for_ks", "advertised_composition"},
                       "inference");
        get_to(i, "permutations", c.inference.permutations);
        get_to(i, "exhaustive_cap", c.inference.exhaustive_cap);
        get_to(i, "alpha", c.inference.alpha);
        get_to(i, "hypotheses", c.inference.hypotheses);
        get_to(i, "ci_lo", c.inference.ci_lo);
        get_to(i, "ci_hi", c.inference.ci_hi);
        get_to(i, "ci_tol", c.inference.ci_tol);
        get_to(i, "ci_for_ks", c.inference.ci_for_ks);
        get_to(i, "advertised_composition", c.inference.advertised_composition);
        if (c.inference.advertised_composition != "fixed" &&
            c.inference.advertised_composition != "redraw")
            throw ConfigError("inference.advertised_composition must be fixed or redraw");
    }
    if (j.contains("power")) {
        auto& p = j.at("power");
        reject_unknown(p, {"deltas", "tests", "n_sims", "permutations", "alpha"}, "power");
        get_to(p, "deltas", c.power.deltas);
        get_to(p, "tests", c.power.tests);
        get_to(p, "n_sims", c.power.n_sims);
        get_to(p, "permutations", c.power.permutations);
        get_to(p, "alpha", c.power.alpha);
    }

    static const std::set<std::string> known_stages{"simulate", "score-irt", "score-bn",
                                                    "award",    "infer",     "tva",
                                                    "power"};
    for (const auto& s : c.stages)
        if (!known_stages.count(s)) throw ConfigError("unknown stage '" + s + "'");

    c.world.validate();
    c.menu.validate();
    c.dist.validate();
    if (c.metric.n_bins < 1) throw ConfigError("metric.n_bins must be positive");
    if (c.inference.permutations < 1) throw ConfigError("inference.permutations must be positive");
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string config_to_json(const RunConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["out"] = c.out_dir;
    j["stages"] = c.stages;
    json w;
    w["n_districts"] = c.world.n_districts;
    w["n_families"] = c.world.n_families;
    w["advertised_counts"] = {{"p4p", c.world.advertised_counts.p4p},
                              {"fw", c.world.advertised_counts.fw},
                              {"mixed", c.world.advertised_counts.mixed}};
    w["n_schools"] = c.world.n_schools;
    w["n_exp_p4p"] = c.world.n_exp_p4p;
    w["stratified_experienced"] = c.world.stratified_experienced;
    w["grade_lo"] = c.world.grade_lo;
    w["grade_hi"] = c.world.grade_hi;
    w["streams_per_grade"] = c.world.streams_per_grade;
    w["pupils_per_stream"] = c.world.pupils_per_stream;
    w["sample_baseline"] = c.world.sample_baseline;
    w["sample_endline"] = c.world.sample_endline;
    w["recruit_slots_per_school"] = c.world.recruit_slots_per_school;
    w["applicants_per_market"] = c.world.applicants_per_market;
    w["n_subjects"] = c.world.n_subjects;
    w["ar1_rho"] = c.world.ar1_rho;
    w["pupil_continue_prob"] = c.world.pupil_continue_prob;
    w["ttc_base"] = c.world.ttc_base;
    w["ttc_theta_link"] = c.world.ttc_theta_link;
    w["ttc_noise_sd"] = c.world.ttc_noise_sd;
    w["ttc_noise_kind"] = c.world.ttc_noise_kind;
    w["covar_skill_link"] = c.world.covar_skill_link;
    w["covar_motiv_link"] = c.world.covar_motiv_link;
    if (!c.world.district_adjacency.empty()) {
        json adj = json::array();
        for (auto [a, b] : c.world.district_adjacency) adj.push_back({a, b});
        w["district_adjacency"] = adj;
    }
    json fx;
    fx["adv_learning"] = c.effects.adv_learning;
    fx["exp_learning"] = c.effects.exp_learning;
    fx["interact_learning"] = c.effects.interact_learning;
    fx["incumbent_gap"] = c.effects.incumbent_gap;
    fx["exp_incumbent"] = c.effects.exp_incumbent;
    fx["mixed_learning"] = c.effects.mixed_learning;
    fx["theory_link"] = c.effects.theory_link;
    fx["pupil_ability_scale"] = c.effects.pupil_ability_scale;
    fx["pupil_round_sd"] = c.effects.pupil_round_sd;
    fx["noise_sd"] = c.effects.noise_sd;
    fx["teacher_sd"] = c.effects.teacher_sd;
    fx["teacher_year_sd"] = c.effects.teacher_year_sd;
    fx["presence_base"] = c.effects.presence_base;
    fx["presence_effect"] = c.effects.presence_effect;
    fx["presence_sd"] = c.effects.presence_sd;
    fx["prep_base"] = c.effects.prep_base;
    fx["prep_effect"] = c.effects.prep_effect;
    fx["pedagogy_base"] = c.effects.pedagogy_base;
    fx["pedagogy_effect"] = c.effects.pedagogy_effect;
    fx["pedagogy_sd"] = c.effects.pedagogy_sd;
    fx["retention_base"] = c.effects.retention_base;
    fx["retention_effect"] = c.effects.retention_effect;
    fx["retention_covar_link"] = c.effects.retention_covar_link;
    fx["absent_rate"] = c.effects.absent_rate;
    fx["endline_attr_rho"] = c.effects.endline_attr_rho;
    fx["endline_attr_sd"] = c.effects.endline_attr_sd;
    fx["endline_attr_effect"] = c.effects.endline_attr_effect;
    fx["spot_checks_year1"] = c.effects.spot_checks_year1;
    fx["spot_checks_year2"] = c.effects.spot_checks_year2;
    fx["fw_inputs_year1"] = c.effects.fw_inputs_year1;
    fx["items_per_test"] = c.effects.items_per_test;
    w["effects"] = fx;
    j["world"] = w;
    j["menu"] = {{"w_outside", c.menu.w_outside},
                 {"bonus_b", c.menu.bonus_b},
                 {"w_guaranteed", c.menu.w_guaranteed},
                 {"w_fixed", c.menu.w_fixed},
                 {"m_bar", c.menu.m_bar},
                 {"m_under", c.menu.m_under},
                 {"eps_lo", c.menu.eps_lo},
                 {"eps_hi", c.menu.eps_hi},
                 {"payout_p4p_rwf", c.menu.payout_p4p_rwf},
                 {"payout_fw_rwf", c.menu.payout_fw_rwf},
                 {"retention_bonus_rwf", c.menu.retention_bonus_rwf}};
    j["distribution"] = {{"tau_lo", c.dist.tau_lo},
                         {"tau_hi", c.dist.tau_hi},
                         {"theta_lo", c.dist.theta_lo},
                         {"theta_hi", c.dist.theta_hi}};
    j["metric"]["n_bins"] = c.metric.n_bins;
    if (c.metric.fixed_subsample) j["metric"]["fixed_subsample"] = *c.metric.fixed_subsample;
    j["estimator"] = {{"lag_interaction", c.estimator.lag_interaction},
                      {"specs", c.estimator.specs}};
    j["inference"] = {{"permutations", c.inference.permutations},
                      {"exhaustive_cap", c.inference.exhaustive_cap},
                      {"alpha", c.inference.alpha},
                      {"hypotheses", c.inference.hypotheses},
                      {"ci_lo", c.inference.ci_lo},
                      {"ci_hi", c.inference.ci_hi},
                      {"ci_tol", c.inference.ci_tol},
                      {"ci_for_ks", c.inference.ci_for_ks},
                      {"advertised_composition", c.inference.advertised_composition}};
    j["power"] = {{"deltas", c.power.deltas},
                  {"tests", c.power.tests},
                  {"n_sims", c.power.n_sims},
                  {"permutations", c.power.permutations},
                  {"alpha", c.power.alpha}};
    return j.dump(2) + "\n";
}

} // namespace p4p::cfg
