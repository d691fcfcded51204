#pragma once

// Teacher value added from the pupil pseudo-panel: fixed-effects residuals,
// covariance-based variance components, empirical-Bayes shrinkage, rank
// correlations, and stochastic-dominance comparisons.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "p4p/estimators.hpp"

namespace p4p::tva {

struct TeacherYear {
    int teacher = 0;
    int round = 1;
    double vbar = 0.0; // mean residual
    int n = 0;         // pupils behind it
};

struct Components {
    double sigma2_theta = 0.0; // persistent teacher variance (raw, may be < 0)
    double sigma2_eta = 0.0;   // teacher-year variance (residual of the identity)
    double sigma2_eps = 0.0;   // pupil-level variance
    double var_v = 0.0;        // total residual variance
    bool single_round = false; // covariance unidentified, sigma2_theta from config
    int n_teachers_linked = 0; // teachers observed in consecutive rounds
    std::vector<TeacherYear> teacher_years;
};

struct TvaOptions {
    std::string cov_weights = "sum"; // "sum" | "min" | "product" of year pupil counts
    double sigma2_theta_fallback = 0.0; // used when only one round is observed
    std::string lag_interaction = "subject_grade_round";
};

// OLS with school and subject-grade-round fixed effects plus lagged
// stream-mean controls; residual moments give the three components.
Components fit_tva_model(const est::LearningPanel& panel, const world::World& w,
                         const TvaOptions& opts = {});

struct TvaEstimate {
    int teacher = 0;
    double value_added = 0.0;
    double reliability = 0.0; // in [0,1]
    double vbar_weighted = 0.0;
    double precision_sum = 0.0;
};

// Precision-weighted teacher means shrunk by reliability; a non-positive
// persistent variance shrinks everything to zero (flagged by reliability 0).
std::vector<TvaEstimate> eb_value_added(const Components& components);

struct RankCorrResult {
    double rho = 0.0;
    double p_value = 1.0;
};

// Spearman with average-rank ties; p by permutation of one argument.
RankCorrResult rank_corr(std::span<const double> x, std::span<const double> y,
                         int n_permutations = 10000, std::uint64_t seed = 0);

struct FosdResult {
    bool dominates = false;    // every F_a(y) <= F_b(y) at pooled points
    double max_violation = 0.0;
};

FosdResult fosd_check(std::span<const double> dist_a, std::span<const double> dist_b);

// Share of the sample at or below x, in percent.
double percentile_of(std::span<const double> sample, double x);

} // namespace p4p::tva
