#pragma once

// Synthetic two-tier experiment: labor markets randomized to advertised
// contracts, application and hiring driven by the occupational-choice model,
// schools re-randomized to experienced contracts, and a pupil panel with
// known treatment effects serving as ground truth for the estimators.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "p4p/theory.hpp"

namespace p4p::world {

using theory::Arm;

struct LaborMarket {
    int id = 0;
    int district = 0;
    int family = 0; // qualification family index
    Arm advertised = Arm::FW;
    std::vector<int> adjacent; // other market ids, symmetric, irreflexive
};

struct School {
    int id = 0;
    int district = 0;
    Arm experienced = Arm::FW;
};

struct Stream {
    int id = 0;
    int school = 0;
    int grade = 0;
};

struct Pupil {
    std::int64_t id = 0;
    int stream_by_round[3] = {-1, -1, -1}; // -1: not enrolled
    bool sampled[3] = {false, false, false};
    // latent ability per round x subject, row-major [round][subject]
    std::vector<double> latent;
    // pupil-round effect shared by all subjects, [round]
    double round_effect[3] = {0.0, 0.0, 0.0};
};

struct Teacher {
    int id = 0;
    bool recruit = false;
    int market = -1; // recruits only
    Arm advertised = Arm::FW; // defined for recruits; FW placeholder otherwise
    theory::TeacherType type;
    int qualification = 0; // family
    int school = 0;
    double grading_task = 0.0;   // baseline skill covariate
    double dictator_share = 0.0; // baseline motivation covariate
    double tva_effect = 0.0;     // persistent contribution to pupil learning
    int entered_year = 1;        // 2 for replacement hires
};

struct Applicant {
    std::int64_t id = 0;
    int market = 0;
    theory::TeacherType type;
    double ttc_score = 0.0;
    bool applied = false;
    bool hired = false;
    int teacher_id = -1;
};

// (year, stream, subject) -> teacher
struct TeachingCell {
    int year = 1; // 1 covers rounds 0-1, 2 covers round 2
    int stream = 0;
    int subject = 0;
    int teacher = -1;
};

struct ArmCounts {
    int p4p = 7;
    int fw = 7;
    int mixed = 0;
};

struct WorldConfig {
    int n_districts = 6;
    int n_families = 3;
    ArmCounts advertised_counts{7, 7, 4};
    int n_schools = 164;
    int n_exp_p4p = 85;
    bool stratified_experienced = false; // optional district-stratified draw
    int grade_lo = 4;
    int grade_hi = 6;
    int streams_per_grade = 1;
    int pupils_per_stream = 30; // enrolled
    int sample_baseline = 5;
    int sample_endline = 10;
    int recruit_slots_per_school = 2;
    int applicants_per_market = 80; // potential applicants drawn per market
    int n_subjects = 5;             // families: subjects round-robin over families
    double ar1_rho = 0.6;
    double pupil_continue_prob = 0.8; // year-1 pupil linked into a year-2 stream
    double ttc_base = 0.53;
    double ttc_theta_link = 0.05;  // TTC score loading on ability
    double ttc_noise_sd = 0.1;
    std::string ttc_noise_kind = "heavy"; // "normal" | "heavy" (t with 2 df)
    double covar_skill_link = 0.7; // grading task loading on ability
    double covar_motiv_link = 0.7; // dictator share loading on motivation
    // district adjacency edges; empty -> ring over districts
    std::vector<std::pair<int, int>> district_adjacency;

    int subject_family(int subject) const { return subject % n_families; }
    int n_markets() const { return n_districts * n_families; }
    int n_grades() const { return grade_hi - grade_lo + 1; }
    void validate() const;
};

struct AssignmentPlan {
    std::vector<Arm> advertised;  // per market id
    std::vector<Arm> experienced; // per school id
};

struct World {
    WorldConfig config;
    theory::ContractMenu menu;
    theory::TypeDistribution dist;
    std::uint64_t seed = 0;
    std::vector<LaborMarket> markets;
    std::vector<School> schools;
    std::vector<Stream> streams;
    std::vector<Teacher> teachers;
    std::vector<Pupil> pupils;
    std::vector<Applicant> applicants;
    std::vector<TeachingCell> teaching;
    int unfilled_vacancies = 0;

    const TeachingCell* find_teaching(int year, int stream, int subject) const;
    AssignmentPlan plan() const;
};

// Fixed-count random assignment of advertised arms over markets.
std::vector<Arm> assign_advertised(int n_markets, const ArmCounts& counts, std::uint64_t seed);

// Fixed-count random assignment of experienced arms over schools; optional
// district stratification keeps near-proportional counts per district.
std::vector<Arm> assign_experienced(const std::vector<School>& schools, int n_p4p,
                                    std::uint64_t seed, bool stratified = false);

World gen_world(const WorldConfig& config, const theory::ContractMenu& menu,
                const theory::TypeDistribution& dist, std::uint64_t seed);

struct EffectSpec {
    double adv_learning = 0.0;      // advertised-arm shift for recruits' pupils
    double exp_learning = 0.0;      // experienced-arm shift
    double interact_learning = 0.0; // advertised x experienced
    double incumbent_gap = 0.0;     // incumbent level shift
    double exp_incumbent = 0.0;     // experienced x incumbent
    double mixed_learning = 0.0;    // incidental mixed-arm shift
    double theory_link = 0.0;       // couples ability x effort into learning
    double pupil_ability_scale = 1.0; // loading on the AR(1) pupil latent
    double pupil_round_sd = 0.5;
    double noise_sd = 0.7;
    double teacher_sd = 0.2;        // sd of persistent teacher effect
    double teacher_year_sd = 0.1;   // sd of teacher-year shock
    double presence_base = 0.9, presence_effect = 0.0, presence_sd = 0.08;
    double prep_base = 0.5, prep_effect = 0.0;
    double pedagogy_base = 2.0, pedagogy_effect = 0.0, pedagogy_sd = 0.4;
    double retention_base = 0.8, retention_effect = 0.0, retention_covar_link = 0.0;
    double absent_rate = 0.03;
    // endline re-measurement of the baseline covariates (for ANCOVA)
    double endline_attr_rho = 0.6, endline_attr_sd = 0.5, endline_attr_effect = 0.0;
    int spot_checks_year1 = 2, spot_checks_year2 = 1;
    bool fw_inputs_year1 = false; // spot checks in FW schools start in year 2
    int items_per_test = 0;       // >0: also generate item responses
};

struct AssessmentRow {
    std::int64_t pupil = 0;
    int subject = 0;
    int round = 0;
    int grade = 0;
    int stream = 0;
    int school = 0;
    int district = 0;
    int teacher = -1; // teacher of (stream, subject) in the round's year; -1 at baseline
    double score = 0.0;
    bool absent = false;
    int enrolled = 0; // pupils enrolled in the stream that round
    int sampled = 0;  // pupils sampled in the stream that round
};

struct SpotCheckRow {
    int teacher = 0;
    int round = 1; // 1 or 2
    double presence = 0.0;
    double lesson_plan = 0.0;
    double ped_objective = 0.0;
    double ped_activities = 0.0;
    double ped_assessment = 0.0;
    double ped_engagement = 0.0;
    double pedagogy() const {
        return (ped_objective + ped_activities + ped_assessment + ped_engagement) / 4.0;
    }
};

struct ItemResponseRow {
    std::int64_t pupil = 0;
    int subject = 0;
    int grade = 0;
    int round = 0;
    int item = 0;
    int correct = 0;
};

struct Outcomes {
    std::vector<AssessmentRow> assessments;
    std::vector<SpotCheckRow> spot_checks;
    std::vector<ItemResponseRow> responses; // empty unless items_per_test > 0
    // realized retention into year 2 per teacher id (recruits may leave)
    std::map<int, bool> retained;
    // endline covariate re-measurements, teacher id -> value
    std::map<int, double> endline_grading;
    std::map<int, double> endline_dictator;
    // replacements hired for year 2 (appended to a copy of world.teachers)
    std::vector<Teacher> replacements;
};

Outcomes simulate_outcomes(const World& world, const EffectSpec& effects, std::uint64_t seed);

struct SaturationRow {
    int market = 0;
    int adjacent_p4p = 0;
    int adjacent_mixed = 0;
    int adjacent_total = 0;
};

std::vector<SaturationRow> saturation_covariates(const std::vector<LaborMarket>& markets);

} // namespace p4p::world
