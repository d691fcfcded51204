#include "p4p/estimators.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <set>

#include "p4p/errors.hpp"
#include "p4p/stats.hpp"

namespace p4p::est {

double EstimateReport::coef(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return beta[i];
    throw ValidationError(spec + ": no coefficient '" + name + "'");
}

double EstimateReport::se_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return se[i];
    throw ValidationError(spec + ": no coefficient '" + name + "'");
}

double EstimateReport::stat(const std::string& name) const { return coef(name) / se_of(name); }

EstimateReport from_ols(const reg::OlsFit& fit, std::string spec) {
    EstimateReport r;
    r.spec = std::move(spec);
    r.stat_kind = "t";
    r.names = fit.names;
    r.beta.assign(fit.beta.data(), fit.beta.data() + fit.beta.size());
    r.se.assign(fit.se.data(), fit.se.data() + fit.se.size());
    r.dropped = fit.dropped;
    r.sigma2_resid = fit.sigma2;
    r.n = fit.n;
    r.n_clusters = fit.n_clusters;
    return r;
}

EstimateReport from_lmm(const reg::LmmFit& fit, std::string spec) {
    EstimateReport r;
    r.spec = std::move(spec);
    r.stat_kind = "z";
    r.names = fit.names;
    r.beta.assign(fit.beta.data(), fit.beta.data() + fit.beta.size());
    r.se.assign(fit.se.data(), fit.se.data() + fit.se.size());
    r.dropped = fit.dropped;
    r.log_likelihood = fit.log_likelihood;
    r.sigma2_resid = fit.sigma2_resid;
    r.sigma2_group = fit.sigma2_group;
    r.boundary = fit.boundary;
    r.n = fit.n;
    r.n_groups = fit.n_groups;
    return r;
}

namespace {

Arm advertised_of(const world::World& w, const AssignView& a, int market) {
    if (market < 0) return Arm::FW;
    return a.advertised ? (*a.advertised)[market] : w.markets[market].advertised;
}

Arm experienced_of(const world::World& w, const AssignView& a, int school) {
    return a.experienced ? (*a.experienced)[school] : w.schools[school].experienced;
}

// Column store with stable references; core columns (added first) may not be
// dropped as collinear.
struct Builder {
    std::vector<std::string> names;
    std::deque<std::vector<double>> cols;
    std::size_t n = 0;

    explicit Builder(std::size_t rows) : n(rows) {}

    std::vector<double>& add(const std::string& name) {
        names.push_back(name);
        cols.emplace_back(n, 0.0);
        return cols.back();
    }

    void add_dummies(const std::string& prefix, const std::vector<int>& values) {
        std::set<int> levels(values.begin(), values.end());
        bool first = true;
        for (int lvl : levels) {
            if (first) {
                first = false;
                continue;
            }
            auto& col = add(prefix + std::to_string(lvl));
            for (std::size_t i = 0; i < n; ++i) col[i] = values[i] == lvl ? 1.0 : 0.0;
        }
    }

    reg::Design finish(std::vector<double> y, int n_core) const {
        reg::Design d;
        d.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));
        for (std::size_t j = 0; j < cols.size(); ++j)
            for (std::size_t i = 0; i < n; ++i)
                d.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cols[j][i];
        d.y = Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
        d.names = names;
        d.n_core = n_core;
        return d;
    }
};

} // namespace

// ---------------------------------------------------------------------------
// pupil learning
// ---------------------------------------------------------------------------

LearningPanel build_learning_panel(const world::World& w,
                                   const std::vector<world::AssessmentRow>& assessments) {
    LearningPanel panel;
    const int S = w.config.n_subjects;
    panel.n_subjects = S;

    // lagged stream means: for stream k at round r, the mean round r-1 score
    // of pupils enrolled in k at round r who were tested at r-1
    std::map<std::pair<std::int64_t, int>, std::vector<double>> pupil_scores; // (pupil, round)
    for (const auto& row : assessments) {
        if (row.absent) continue;
        auto key = std::make_pair(row.pupil, row.round);
        auto it = pupil_scores.find(key);
        if (it == pupil_scores.end())
            it = pupil_scores.emplace(key, std::vector<double>(S, std::nan(""))).first;
        it->second[row.subject] = row.score;
    }

    std::map<std::pair<int, int>, std::vector<double>> stream_lag; // (stream, round)
    std::map<std::pair<int, int>, int> stream_lag_n;
    for (const auto& p : w.pupils) {
        for (int r = 1; r < 3; ++r) {
            int stream = p.stream_by_round[r];
            if (stream < 0) continue;
            auto lag = pupil_scores.find({p.id, r - 1});
            if (lag == pupil_scores.end()) continue;
            bool complete = true;
            for (int b = 0; b < S; ++b)
                if (std::isnan(lag->second[b])) complete = false;
            if (!complete) continue;
            auto key = std::make_pair(stream, r);
            auto it = stream_lag.find(key);
            if (it == stream_lag.end())
                it = stream_lag.emplace(key, std::vector<double>(S, 0.0)).first;
            for (int b = 0; b < S; ++b) it->second[b] += lag->second[b];
            stream_lag_n[key] += 1;
        }
    }
    for (auto& [key, sums] : stream_lag) {
        int cnt = stream_lag_n[key];
        if (cnt > 0)
            for (double& v : sums) v /= cnt;
    }

    // school-grade fallback for streams with no linked lagged scores
    std::map<std::tuple<int, int, int>, std::vector<double>> sg_sum; // (school, grade, round)
    std::map<std::tuple<int, int, int>, int> sg_n;
    for (const auto& [key, mean] : stream_lag) {
        const auto& st = w.streams[key.first];
        auto sg = std::make_tuple(st.school, st.grade, key.second);
        auto it = sg_sum.find(sg);
        if (it == sg_sum.end()) it = sg_sum.emplace(sg, std::vector<double>(S, 0.0)).first;
        for (int b = 0; b < S; ++b) it->second[b] += mean[b];
        sg_n[sg] += 1;
    }

    for (const auto& row : assessments) {
        if (row.round == 0 || row.teacher < 0 || row.absent) continue;
        LearningRow lr;
        lr.y = row.score;
        lr.subject = row.subject;
        lr.grade = row.grade;
        lr.round = row.round;
        lr.district = row.district;
        lr.school = row.school;
        lr.pupil = row.pupil;
        lr.teacher = row.teacher;
        if (row.teacher < static_cast<int>(w.teachers.size())) {
            lr.incumbent = !w.teachers[row.teacher].recruit;
            lr.market = w.teachers[row.teacher].market;
        } else {
            lr.incumbent = true; // replacement hire
            lr.market = -1;
        }
        auto key = std::make_pair(row.stream, row.round);
        auto it = stream_lag.find(key);
        if (it != stream_lag.end() && stream_lag_n[key] > 0) {
            lr.lag_mean = it->second;
        } else {
            lr.lag_missing = true;
            auto sg = std::make_tuple(row.school, row.grade, row.round);
            auto fb = sg_sum.find(sg);
            if (fb != sg_sum.end() && sg_n[sg] > 0) {
                lr.lag_mean = fb->second;
                for (double& v : lr.lag_mean) v /= sg_n[sg];
            } else {
                lr.lag_mean.assign(S, 0.0);
            }
        }
        panel.rows.push_back(std::move(lr));
    }
    return panel;
}

EstimateReport fit_lmm_pupil(const LearningPanel& panel, const world::World& w,
                             const AssignView& assign, const LearningSpecOptions& opts) {
    const auto& rows = panel.rows;
    if (rows.empty()) throw EmptySample("learning panel is empty");
    const int S = panel.n_subjects;

    Builder b(rows.size());
    auto& c_int = b.add("intercept");
    auto& c_advp = b.add("adv_p4p");
    auto& c_exp = b.add("exp_p4p");
    std::vector<double>* c_inter = opts.interacted ? &b.add("adv_x_exp") : nullptr;
    const int n_core = static_cast<int>(b.names.size());
    auto& c_advm = b.add("adv_mixed");
    auto& c_inc = b.add("incumbent");
    auto& c_expinc = b.add("exp_x_incumbent");

    std::vector<double> y(rows.size());
    std::vector<int> district(rows.size()), round(rows.size()), group(rows.size()),
        cluster(rows.size());
    std::map<std::pair<std::int64_t, int>, int> group_ids;

    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        y[i] = r.y;
        c_int[i] = 1.0;
        Arm adv = advertised_of(w, assign, r.market);
        bool is_recruit = !r.incumbent && r.market >= 0;
        bool expp = experienced_of(w, assign, r.school) == Arm::P4P;
        c_advp[i] = is_recruit && adv == Arm::P4P;
        c_advm[i] = is_recruit && adv == Arm::Mixed;
        c_exp[i] = expp;
        c_inc[i] = r.incumbent;
        c_expinc[i] = expp && r.incumbent;
        if (c_inter) (*c_inter)[i] = c_advp[i] && expp;
        district[i] = r.district;
        round[i] = r.round;
        cluster[i] = r.school;
        auto git =
            group_ids.try_emplace({r.pupil, r.round}, static_cast<int>(group_ids.size())).first;
        group[i] = git->second;
    }

    // lagged stream means with subject(-grade)-round coefficients
    bool with_grade = opts.lag_interaction == "subject_grade_round";
    std::map<std::tuple<int, int, int, int>, std::vector<double>*> lag_cols;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        int g = with_grade ? r.grade : 0;
        for (int bp = 0; bp < S; ++bp) {
            auto key = std::make_tuple(r.subject, g, r.round, bp);
            auto it = lag_cols.find(key);
            if (it == lag_cols.end()) {
                std::string name = "lag_s" + std::to_string(r.subject) +
                                   (with_grade ? "_g" + std::to_string(g) : "") + "_r" +
                                   std::to_string(r.round) + "_b" + std::to_string(bp);
                it = lag_cols.emplace(key, &b.add(name)).first;
            }
            (*it->second)[i] = r.lag_mean[bp];
        }
    }
    auto& c_lagmiss = b.add("lag_missing");
    for (std::size_t i = 0; i < rows.size(); ++i) c_lagmiss[i] = rows[i].lag_missing;

    b.add_dummies("district_", district);
    b.add_dummies("round_", round);

    reg::Design d = b.finish(std::move(y), n_core);
    if (opts.ols) {
        d.cluster = cluster;
        return from_ols(reg::fit_wls(d), opts.interacted ? "eq4_ols" : "eq3_ols");
    }
    d.group = group;
    return from_lmm(reg::fit_random_intercept(d), opts.interacted ? "eq4" : "eq3");
}

// ---------------------------------------------------------------------------
// teacher metrics
// ---------------------------------------------------------------------------

EstimateReport fit_re_teacher(const std::vector<TeacherMetricRow>& rows, const world::World& w,
                              const AssignView& assign, bool interacted) {
    if (rows.empty()) throw EmptySample("teacher metric panel is empty");
    Builder b(rows.size());
    auto& c_int = b.add("intercept");
    auto& c_advp = b.add("adv_p4p");
    auto& c_exp = b.add("exp_p4p");
    std::vector<double>* c_inter = interacted ? &b.add("adv_x_exp") : nullptr;
    const int n_core = static_cast<int>(b.names.size());
    auto& c_advm = b.add("adv_mixed");
    auto& c_inc = b.add("incumbent");
    auto& c_expinc = b.add("exp_x_incumbent");

    std::vector<double> y(rows.size());
    std::vector<int> district(rows.size()), qual(rows.size()), round(rows.size()),
        group(rows.size());
    std::map<std::pair<int, int>, int> group_ids; // (school, round)
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        y[i] = r.y;
        c_int[i] = 1.0;
        Arm adv = advertised_of(w, assign, r.market);
        bool is_recruit = !r.incumbent && r.market >= 0;
        bool expp = experienced_of(w, assign, r.school) == Arm::P4P;
        c_advp[i] = is_recruit && adv == Arm::P4P;
        c_advm[i] = is_recruit && adv == Arm::Mixed;
        c_exp[i] = expp;
        c_inc[i] = r.incumbent;
        c_expinc[i] = expp && r.incumbent;
        if (c_inter) (*c_inter)[i] = c_advp[i] && expp;
        district[i] = r.district;
        qual[i] = r.qualification;
        round[i] = r.round;
        auto git =
            group_ids.try_emplace({r.school, r.round}, static_cast<int>(group_ids.size())).first;
        group[i] = git->second;
    }
    b.add_dummies("qual_", qual);
    b.add_dummies("district_", district);
    b.add_dummies("round_", round);

    reg::Design d = b.finish(std::move(y), n_core);
    d.group = group;
    return from_lmm(reg::fit_random_intercept(d), interacted ? "eq6" : "eq5");
}

// ---------------------------------------------------------------------------
// retention / ANCOVA
// ---------------------------------------------------------------------------

EstimateReport fit_retention(const std::vector<RetentionRow>& rows, const world::World& w,
                             const AssignView& assign, bool interacted) {
    if (rows.empty()) throw EmptySample("retention sample is empty");
    Builder b(rows.size());
    auto& c_int = b.add("intercept");
    auto& c_exp = b.add("exp_p4p");
    std::vector<double>* c_inter = interacted ? &b.add("exp_x_covar") : nullptr;
    std::vector<double>* c_cov = interacted ? &b.add("covar") : nullptr;
    const int n_core = static_cast<int>(b.names.size());

    std::vector<double> y(rows.size());
    std::vector<int> district(rows.size()), qual(rows.size()), cluster(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        y[i] = r.retained ? 1.0 : 0.0;
        c_int[i] = 1.0;
        bool expp = experienced_of(w, assign, r.school) == Arm::P4P;
        c_exp[i] = expp;
        if (c_inter) (*c_inter)[i] = expp ? r.covariate : 0.0;
        if (c_cov) (*c_cov)[i] = r.covariate;
        district[i] = r.district;
        qual[i] = r.qualification;
        cluster[i] = r.school;
    }
    b.add_dummies("qual_", qual);
    b.add_dummies("district_", district);
    reg::Design d = b.finish(std::move(y), n_core);
    d.cluster = cluster;
    return from_ols(reg::fit_wls(d), interacted ? "eq8" : "eq7");
}

EstimateReport fit_ancova(const std::vector<AncovaRow>& rows, const world::World& w,
                          const AssignView& assign) {
    if (rows.empty()) throw EmptySample("ANCOVA sample is empty");
    Builder b(rows.size());
    auto& c_int = b.add("intercept");
    auto& c_exp = b.add("exp_p4p");
    auto& c_lag = b.add("baseline");
    const int n_core = 3;
    std::vector<double> y(rows.size());
    std::vector<int> district(rows.size()), qual(rows.size()), cluster(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        y[i] = r.y_end;
        c_int[i] = 1.0;
        c_exp[i] = experienced_of(w, assign, r.school) == Arm::P4P;
        c_lag[i] = r.y_base;
        district[i] = r.district;
        qual[i] = r.qualification;
        cluster[i] = r.school;
    }
    b.add_dummies("qual_", qual);
    b.add_dummies("district_", district);
    reg::Design d = b.finish(std::move(y), n_core);
    d.cluster = cluster;
    return from_ols(reg::fit_wls(d), "eq9");
}

// ---------------------------------------------------------------------------
// recruit baseline attributes (eq2)
// ---------------------------------------------------------------------------

EstimateReport fit_recruit_attribute(const world::World& w, const std::string& attribute,
                                     const AssignView& assign) {
    std::vector<const world::Teacher*> recruits;
    for (const auto& t : w.teachers)
        if (t.recruit) recruits.push_back(&t);
    if (recruits.empty()) throw EmptySample("no placed recruits");

    Builder b(recruits.size());
    auto& c_int = b.add("intercept");
    auto& c_advp = b.add("adv_p4p");
    const int n_core = 2;
    auto& c_advm = b.add("adv_mixed");
    std::vector<double> y(recruits.size());
    std::vector<int> district(recruits.size()), qual(recruits.size()), cluster(recruits.size());
    for (std::size_t i = 0; i < recruits.size(); ++i) {
        const auto* t = recruits[i];
        if (attribute == "grading_task") y[i] = t->grading_task;
        else if (attribute == "dictator_share") y[i] = t->dictator_share;
        else throw ConfigError("unknown recruit attribute '" + attribute + "'");
        c_int[i] = 1.0;
        Arm adv = advertised_of(w, assign, t->market);
        c_advp[i] = adv == Arm::P4P;
        c_advm[i] = adv == Arm::Mixed;
        district[i] = w.schools[t->school].district;
        qual[i] = t->qualification;
        cluster[i] = t->market;
    }
    b.add_dummies("qual_", qual);
    b.add_dummies("district_", district);
    reg::Design d = b.finish(std::move(y), n_core);
    d.cluster = cluster;
    return from_ols(reg::fit_wls(d), "eq2_" + attribute);
}

// ---------------------------------------------------------------------------
// applicant-pool tests
// ---------------------------------------------------------------------------

std::vector<ApplicantRow> applicant_rows(const world::World& w) {
    std::vector<ApplicantRow> out;
    for (const auto& a : w.applicants) {
        if (!a.applied) continue;
        ApplicantRow r;
        r.id = a.id;
        r.market = a.market;
        r.district = w.markets[a.market].district;
        r.family = w.markets[a.market].family;
        r.score = a.ttc_score;
        r.hired = a.hired;
        out.push_back(r);
    }
    return out;
}

namespace {

// logistic regression by IRLS for the hiring model
Eigen::VectorXd logistic_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(X.cols());
    for (int it = 0; it < 50; ++it) {
        Eigen::VectorXd eta = X * beta;
        Eigen::VectorXd mu = eta.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
        Eigen::VectorXd wt = mu.array() * (1.0 - mu.array()) + 1e-9;
        Eigen::MatrixXd XtW = X.transpose() * wt.asDiagonal();
        Eigen::VectorXd grad = X.transpose() * (y - mu);
        Eigen::VectorXd step = (XtW * X).ldlt().solve(grad);
        double cap = step.cwiseAbs().maxCoeff();
        if (cap > 5.0) step *= 5.0 / cap;
        beta += step;
        if (step.cwiseAbs().maxCoeff() < 1e-10) break;
    }
    return beta;
}

std::vector<double> hiring_weights(const std::vector<ApplicantRow>& apps, const world::World& w,
                                   const AssignView& assign, WeightMode mode) {
    std::vector<double> weights(apps.size(), 1.0);
    if (mode == WeightMode::Unweighted) return weights;

    double m = 0.0, sd = 0.0;
    for (const auto& a : apps) m += a.score;
    m /= static_cast<double>(apps.size());
    for (const auto& a : apps) sd += (a.score - m) * (a.score - m);
    sd = std::sqrt(sd / std::max<std::size_t>(apps.size() - 1, 1));
    if (sd <= 0.0) sd = 1.0;

    auto basis = [&](const ApplicantRow& a, std::vector<double>& row) {
        row.clear();
        row.push_back(1.0);
        double z = (a.score - m) / sd;
        double p = 1.0;
        for (int deg = 1; deg <= 5; ++deg) {
            p *= z;
            row.push_back(p);
        }
        for (int dd = 1; dd < w.config.n_districts; ++dd) row.push_back(a.district == dd);
        for (int ff = 1; ff < w.config.n_families; ++ff) row.push_back(a.family == ff);
    };

    // status-quo hiring behavior estimated on FW pools only
    std::vector<std::size_t> fw_idx;
    for (std::size_t i = 0; i < apps.size(); ++i)
        if (advertised_of(w, assign, apps[i].market) == Arm::FW) fw_idx.push_back(i);
    if (fw_idx.empty()) throw EmptyPool("no FW applicant pool to estimate hiring from");

    if (mode == WeightMode::EmpiricalP) {
        std::vector<double> tmp;
        basis(apps[0], tmp);
        const int k = static_cast<int>(tmp.size());
        Eigen::MatrixXd X(static_cast<Eigen::Index>(fw_idx.size()), k);
        Eigen::VectorXd y(static_cast<Eigen::Index>(fw_idx.size()));
        for (std::size_t r = 0; r < fw_idx.size(); ++r) {
            basis(apps[fw_idx[r]], tmp);
            for (int j = 0; j < k; ++j) X(static_cast<Eigen::Index>(r), j) = tmp[j];
            y(static_cast<Eigen::Index>(r)) = apps[fw_idx[r]].hired ? 1.0 : 0.0;
        }
        Eigen::VectorXd beta = logistic_fit(X, y);
        for (std::size_t i = 0; i < apps.size(); ++i) {
            basis(apps[i], tmp);
            double eta = 0.0;
            for (int j = 0; j < k; ++j) eta += beta(j) * tmp[j];
            weights[i] = 1.0 / (1.0 + std::exp(-eta));
        }
        return weights;
    }

    // TopH: hire counts predicted from FW pools by qualification family,
    // weight 1 for each market's top predicted-hire scorers
    double fw_hired = 0.0, fw_pool = 0.0;
    std::map<int, double> family_hired, family_pool;
    for (std::size_t i : fw_idx) {
        fw_hired += apps[i].hired;
        fw_pool += 1.0;
        family_hired[apps[i].family] += apps[i].hired;
        family_pool[apps[i].family] += 1.0;
    }
    std::map<int, std::vector<std::size_t>> by_market;
    for (std::size_t i = 0; i < apps.size(); ++i) by_market[apps[i].market].push_back(i);
    std::fill(weights.begin(), weights.end(), 0.0);
    for (auto& [mkt, idx] : by_market) {
        int fam = apps[idx[0]].family;
        double rate = family_pool.count(fam) && family_pool[fam] > 0
                          ? family_hired[fam] / family_pool[fam]
                          : fw_hired / std::max(fw_pool, 1.0);
        auto h = static_cast<std::size_t>(std::lround(rate * static_cast<double>(idx.size())));
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t bb) {
            if (apps[a].score != apps[bb].score) return apps[a].score > apps[bb].score;
            return apps[a].id < apps[bb].id;
        });
        for (std::size_t k = 0; k < idx.size() && k < h; ++k) weights[idx[k]] = 1.0;
    }
    return weights;
}

} // namespace

EstimateReport applicant_pool_test(const std::vector<ApplicantRow>& applicants,
                                   const world::World& w, WeightMode mode,
                                   const AssignView& assign) {
    if (applicants.empty()) throw EmptyPool("applicant pool is empty");
    Builder b(applicants.size());
    auto& c_int = b.add("intercept");
    auto& c_advp = b.add("adv_p4p");
    const int n_core = 2;
    auto& c_advm = b.add("adv_mixed");
    std::vector<double> y(applicants.size());
    std::vector<int> district(applicants.size()), family(applicants.size()),
        cluster(applicants.size());
    for (std::size_t i = 0; i < applicants.size(); ++i) {
        const auto& a = applicants[i];
        y[i] = a.score;
        c_int[i] = 1.0;
        Arm adv = advertised_of(w, assign, a.market);
        c_advp[i] = adv == Arm::P4P;
        c_advm[i] = adv == Arm::Mixed;
        district[i] = a.district;
        family[i] = a.family;
        cluster[i] = a.market;
    }
    b.add_dummies("qual_", family);
    b.add_dummies("district_", district);
    auto weights = hiring_weights(applicants, w, assign, mode);

    reg::Design d = b.finish(std::move(y), n_core);
    d.cluster = cluster;
    d.w = Eigen::Map<Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(weights.size()));
    const char* tag = mode == WeightMode::Unweighted ? "c1_unweighted"
                      : mode == WeightMode::EmpiricalP ? "c1_empirical"
                                                       : "c1_top_h";
    return from_ols(reg::fit_wls(d), tag);
}

EstimateReport applicant_volume_test(const std::vector<ApplicantRow>& applicants,
                                     const world::World& w, const AssignView& assign) {
    std::map<int, int> counts;
    for (const auto& a : applicants) counts[a.market] += 1;
    if (counts.empty()) throw EmptyPool("no applications at all");

    const std::size_t n = w.markets.size();
    Builder b(n);
    auto& c_int = b.add("intercept");
    auto& c_advp = b.add("adv_p4p");
    const int n_core = 2;
    auto& c_advm = b.add("adv_mixed");
    std::vector<double> y(n);
    std::vector<int> district(n), family(n);
    for (std::size_t i = 0; i < n; ++i) {
        int mkt = w.markets[i].id;
        int cnt = counts.count(mkt) ? counts[mkt] : 0;
        y[i] = std::log(static_cast<double>(std::max(cnt, 1)));
        c_int[i] = 1.0;
        Arm adv = advertised_of(w, assign, mkt);
        c_advp[i] = adv == Arm::P4P;
        c_advm[i] = adv == Arm::Mixed;
        district[i] = w.markets[i].district;
        family[i] = w.markets[i].family;
    }
    b.add_dummies("qual_", family);
    b.add_dummies("district_", district);
    reg::Design d = b.finish(std::move(y), n_core);
    return from_ols(reg::fit_wls(d), "c2");
}

EstimateReport adjacency_test(const std::vector<ApplicantRow>& applicants, const world::World& w,
                              const AssignView& assign) {
    if (applicants.empty()) throw EmptyPool("applicant pool is empty");
    std::vector<int> adj_p4p(w.markets.size(), 0), adj_mixed(w.markets.size(), 0),
        adj_total(w.markets.size(), 0);
    for (const auto& m : w.markets) {
        adj_total[m.id] = static_cast<int>(m.adjacent.size());
        for (int j : m.adjacent) {
            Arm arm = advertised_of(w, assign, j);
            if (arm == Arm::P4P) ++adj_p4p[m.id];
            if (arm == Arm::Mixed) ++adj_mixed[m.id];
        }
    }
    Builder b(applicants.size());
    auto& c_int = b.add("intercept");
    auto& c_advp = b.add("adv_p4p");
    auto& c_sat = b.add("adjacent_p4p");
    const int n_core = 3;
    auto& c_advm = b.add("adv_mixed");
    auto& c_satm = b.add("adjacent_mixed");
    auto& c_tot = b.add("adjacent_total");
    std::vector<double> y(applicants.size());
    std::vector<int> district(applicants.size()), family(applicants.size()),
        cluster(applicants.size());
    for (std::size_t i = 0; i < applicants.size(); ++i) {
        const auto& a = applicants[i];
        y[i] = a.score;
        c_int[i] = 1.0;
        Arm adv = advertised_of(w, assign, a.market);
        c_advp[i] = adv == Arm::P4P;
        c_advm[i] = adv == Arm::Mixed;
        c_sat[i] = adj_p4p[a.market];
        c_satm[i] = adj_mixed[a.market];
        c_tot[i] = adj_total[a.market];
        district[i] = a.district;
        family[i] = a.family;
        cluster[i] = a.market;
    }
    b.add_dummies("qual_", family);
    b.add_dummies("district_", district);
    reg::Design d = b.finish(std::move(y), n_core);
    d.cluster = cluster;
    return from_ols(reg::fit_wls(d), "adjacency");
}

} // namespace p4p::est
