#pragma once

// Pre-specified regression catalog: baseline-attribute OLS, pupil-learning
// mixed models, teacher-metric random-effects models, retention linear
// probability models, ANCOVA, and the applicant-pool tests.  Every fit
// accepts an assignment view so the permutation engine can re-run it under
// alternative treatment draws.

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "p4p/regress.hpp"
#include "p4p/world.hpp"

namespace p4p::est {

using world::Arm;

struct EstimateReport {
    std::string spec;
    std::string stat_kind = "t"; // "t" for OLS, "z" for mixed models
    std::vector<std::string> names;
    std::vector<double> beta;
    std::vector<double> se;
    std::vector<std::string> dropped;
    double log_likelihood = std::nan("");
    double sigma2_resid = std::nan("");
    double sigma2_group = std::nan("");
    bool boundary = false;
    long long n = 0;
    int n_groups = 0;
    int n_clusters = 0;

    double coef(const std::string& name) const;
    double se_of(const std::string& name) const;
    double stat(const std::string& name) const; // coef / se
};

// Which treatment labels to evaluate under; defaults to the world's own.
struct AssignView {
    const std::vector<Arm>* advertised = nullptr;  // per market
    const std::vector<Arm>* experienced = nullptr; // per school
};

// -------- pupil learning (student-subject-round rows) --------

struct LearningRow {
    double y = 0.0;
    int subject = 0;
    int grade = 0;
    int round = 1; // 1 or 2
    int district = 0;
    int school = 0;
    std::int64_t pupil = 0;
    int teacher = -1;
    bool incumbent = true;
    int market = -1; // recruit's market, -1 otherwise
    std::vector<double> lag_mean; // per subject, stream mean of lagged scores
    bool lag_missing = false;
};

struct LearningPanel {
    std::vector<LearningRow> rows;
    int n_subjects = 0;
};

// Lagged stream means from the previous round's sampled scores among the
// pupils enrolled in the row's stream; school-grade mean plus an indicator
// where a stream has no linked lagged scores.
LearningPanel build_learning_panel(const world::World& w,
                                   const std::vector<world::AssessmentRow>& assessments);

struct LearningSpecOptions {
    bool interacted = false;                        // adds advertised x experienced
    std::string lag_interaction = "subject_grade_round"; // or "subject_round"
    bool ols = false;                               // mixed model by default
};

// Pupil-learning model with pupil-round random intercepts.
EstimateReport fit_lmm_pupil(const LearningPanel& panel, const world::World& w,
                             const AssignView& assign = {},
                             const LearningSpecOptions& opts = {});

// -------- teacher-round metrics (round-school random effects) --------

struct TeacherMetricRow {
    int teacher = 0;
    int round = 1;
    double y = 0.0;
    int school = 0;
    int district = 0;
    int qualification = 0;
    bool incumbent = true;
    int market = -1;
};

EstimateReport fit_re_teacher(const std::vector<TeacherMetricRow>& rows, const world::World& w,
                              const AssignView& assign = {}, bool interacted = false);

// -------- retention and ANCOVA (teacher level) --------

struct RetentionRow {
    int teacher = 0;
    bool retained = false;
    int school = 0;
    int district = 0;
    int qualification = 0;
    double covariate = 0.0; // grading task or dictator share
};

EstimateReport fit_retention(const std::vector<RetentionRow>& rows, const world::World& w,
                             const AssignView& assign = {}, bool interacted = false);

struct AncovaRow {
    int teacher = 0;
    double y_end = 0.0;
    double y_base = 0.0;
    int school = 0;
    int district = 0;
    int qualification = 0;
};

EstimateReport fit_ancova(const std::vector<AncovaRow>& rows, const world::World& w,
                          const AssignView& assign = {});

// -------- baseline attributes of placed recruits (eq2) --------

EstimateReport fit_recruit_attribute(const world::World& w, const std::string& attribute,
                                     const AssignView& assign = {});

// -------- applicant-pool tests (c1, c2, adjacency) --------

enum class WeightMode { Unweighted, EmpiricalP, TopH };

struct ApplicantRow {
    std::int64_t id = 0;
    int market = 0;
    int district = 0;
    int family = 0;
    double score = 0.0;
    bool hired = false;
};

std::vector<ApplicantRow> applicant_rows(const world::World& w);

EstimateReport applicant_pool_test(const std::vector<ApplicantRow>& applicants,
                                   const world::World& w, WeightMode mode,
                                   const AssignView& assign = {});

// log application volume per market (c2)
EstimateReport applicant_volume_test(const std::vector<ApplicantRow>& applicants,
                                     const world::World& w, const AssignView& assign = {});

// own-arm effect plus adjacent-P4P saturation counts (App-C style)
EstimateReport adjacency_test(const std::vector<ApplicantRow>& applicants, const world::World& w,
                              const AssignView& assign = {});

// -------- shared helpers --------

EstimateReport from_ols(const reg::OlsFit& fit, std::string spec);
EstimateReport from_lmm(const reg::LmmFit& fit, std::string spec);

} // namespace p4p::est
