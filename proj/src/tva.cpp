#include "p4p/tva.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <set>

#include "p4p/errors.hpp"
#include "p4p/regress.hpp"
#include "p4p/rng.hpp"
#include "p4p/stats.hpp"

namespace p4p::tva {

Components fit_tva_model(const est::LearningPanel& panel, const world::World& w,
                         const TvaOptions& opts) {
    (void)w;
    const auto& rows = panel.rows;
    if (rows.empty()) throw EmptySample("TVA panel is empty");
    const int S = panel.n_subjects;

    // design: subject-grade-round cells, school dummies, lagged stream means
    std::vector<std::string> names;
    std::deque<std::vector<double>> cols;
    auto add_col = [&](const std::string& name) -> std::vector<double>& {
        names.push_back(name);
        cols.emplace_back(rows.size(), 0.0);
        return cols.back();
    };
    auto& intercept = add_col("intercept");
    std::fill(intercept.begin(), intercept.end(), 1.0);

    std::map<std::tuple<int, int, int>, std::vector<double>*> cell_cols; // mu_bgr
    std::map<int, std::vector<double>*> school_cols;                     // lambda_s
    bool with_grade = opts.lag_interaction == "subject_grade_round";
    std::map<std::tuple<int, int, int, int>, std::vector<double>*> lag_cols;
    bool first_cell = true, first_school = true;

    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        auto cell = std::make_tuple(r.subject, r.grade, r.round);
        auto cit = cell_cols.find(cell);
        if (cit == cell_cols.end()) {
            if (first_cell) {
                first_cell = false; // reference cell absorbed by the intercept
                cell_cols.emplace(cell, nullptr);
            } else {
                cit = cell_cols
                          .emplace(cell, &add_col("cell_s" + std::to_string(r.subject) + "_g" +
                                                  std::to_string(r.grade) + "_r" +
                                                  std::to_string(r.round)))
                          .first;
            }
        }
        cit = cell_cols.find(cell);
        if (cit->second) (*cit->second)[i] = 1.0;

        auto sit = school_cols.find(r.school);
        if (sit == school_cols.end()) {
            if (first_school) {
                first_school = false;
                school_cols.emplace(r.school, nullptr);
            } else {
                school_cols.emplace(r.school, &add_col("school_" + std::to_string(r.school)));
            }
        }
        sit = school_cols.find(r.school);
        if (sit->second) (*sit->second)[i] = 1.0;

        int g = with_grade ? r.grade : 0;
        for (int bp = 0; bp < S; ++bp) {
            auto key = std::make_tuple(r.subject, g, r.round, bp);
            auto it = lag_cols.find(key);
            if (it == lag_cols.end()) {
                it = lag_cols
                         .emplace(key, &add_col("lag_s" + std::to_string(r.subject) + "_r" +
                                                std::to_string(r.round) + "_b" +
                                                std::to_string(bp) +
                                                (with_grade ? "_g" + std::to_string(g) : "")))
                         .first;
            }
            (*it->second)[i] = r.lag_mean[bp];
        }
    }
    {
        auto& lagmiss = add_col("lag_missing");
        for (std::size_t i = 0; i < rows.size(); ++i) lagmiss[i] = rows[i].lag_missing;
    }

    reg::Design d;
    d.X.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j)
        for (std::size_t i = 0; i < rows.size(); ++i)
            d.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cols[j][i];
    d.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        d.y(static_cast<Eigen::Index>(i)) = rows[i].y;
    d.names = names;
    d.n_core = 0;
    auto fit = reg::fit_wls(d);

    // residual moments per teacher-year
    std::map<std::pair<int, int>, std::pair<double, int>> sums; // (teacher, round)
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto& acc = sums[{rows[i].teacher, rows[i].round}];
        acc.first += fit.residuals(static_cast<Eigen::Index>(i));
        acc.second += 1;
    }
    Components comp;
    std::map<std::pair<int, int>, double> vbar;
    for (auto& [key, acc] : sums) {
        TeacherYear ty;
        ty.teacher = key.first;
        ty.round = key.second;
        ty.n = acc.second;
        ty.vbar = acc.first / acc.second;
        vbar[key] = ty.vbar;
        comp.teacher_years.push_back(ty);
    }

    std::vector<double> v(rows.size()), dev(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        v[i] = fit.residuals(static_cast<Eigen::Index>(i));
        dev[i] = v[i] - vbar[{rows[i].teacher, rows[i].round}];
    }
    comp.var_v = stats::variance(v);
    // within-teacher-year deviations lose one degree of freedom per cell
    double ss = 0.0;
    for (double d : dev) ss += d * d;
    auto cells = static_cast<double>(comp.teacher_years.size());
    comp.sigma2_eps = ss / std::max(static_cast<double>(rows.size()) - cells, 1.0);

    // persistent component from the cross-year covariance of teacher means,
    // weighted by pupils taught
    double sw = 0.0, swx = 0.0, swy = 0.0, swxy = 0.0;
    int linked = 0;
    for (const auto& ty : comp.teacher_years) {
        if (ty.round < 2) continue;
        auto prev = sums.find({ty.teacher, ty.round - 1});
        if (prev == sums.end()) continue;
        double x = vbar[{ty.teacher, ty.round - 1}];
        double y = ty.vbar;
        double wn;
        if (opts.cov_weights == "min")
            wn = std::min(prev->second.second, ty.n);
        else if (opts.cov_weights == "product")
            wn = static_cast<double>(prev->second.second) * ty.n;
        else
            wn = prev->second.second + ty.n;
        sw += wn;
        swx += wn * x;
        swy += wn * y;
        swxy += wn * x * y;
        ++linked;
    }
    comp.n_teachers_linked = linked;
    if (linked >= 2 && sw > 0.0) {
        comp.sigma2_theta = swxy / sw - (swx / sw) * (swy / sw);
    } else {
        comp.single_round = true;
        comp.sigma2_theta = opts.sigma2_theta_fallback;
    }
    comp.sigma2_eta = comp.var_v - comp.sigma2_theta - comp.sigma2_eps;
    return comp;
}

std::vector<TvaEstimate> eb_value_added(const Components& comp) {
    double s2_theta = std::max(comp.sigma2_theta, 0.0);
    double s2_eta = std::max(comp.sigma2_eta, 0.0);
    double s2_eps = std::max(comp.sigma2_eps, 0.0);

    std::map<int, TvaEstimate> acc;
    std::map<int, double> weighted_sum;
    for (const auto& ty : comp.teacher_years) {
        // noiseless worlds: keep the precision finite so the weighted mean
        // stays defined and reliability tends to one
        double h = 1.0 / std::max(s2_eta + s2_eps / std::max(ty.n, 1), 1e-12);
        auto& est = acc[ty.teacher];
        est.teacher = ty.teacher;
        est.precision_sum += h;
        weighted_sum[ty.teacher] += h * ty.vbar;
    }
    std::vector<TvaEstimate> out;
    out.reserve(acc.size());
    for (auto& [teacher, est] : acc) {
        est.vbar_weighted = est.precision_sum > 0.0 ? weighted_sum[teacher] / est.precision_sum
                                                    : 0.0;
        if (s2_theta <= 0.0) {
            est.reliability = 0.0;
            est.value_added = 0.0;
        } else {
            double var_vbar = s2_theta + 1.0 / est.precision_sum;
            est.reliability = s2_theta / var_vbar;
            est.value_added = est.vbar_weighted * est.reliability;
        }
        out.push_back(est);
    }
    return out;
}

RankCorrResult rank_corr(std::span<const double> x, std::span<const double> y,
                         int n_permutations, std::uint64_t seed) {
    if (x.size() != y.size()) throw ValidationError("rank_corr: length mismatch");
    if (x.size() < 2) throw EmptySample("rank_corr needs at least 2 points");
    auto rx = stats::average_ranks_asc(x);
    auto ry = stats::average_ranks_asc(y);

    auto pearson = [](const std::vector<double>& a, const std::vector<double>& b) {
        double ma = stats::mean(a), mb = stats::mean(b);
        double sab = 0.0, saa = 0.0, sbb = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            sab += (a[i] - ma) * (b[i] - mb);
            saa += (a[i] - ma) * (a[i] - ma);
            sbb += (b[i] - mb) * (b[i] - mb);
        }
        if (saa <= 0.0 || sbb <= 0.0) throw ZeroVariance("rank correlation of a constant sample");
        return sab / std::sqrt(saa * sbb);
    };

    RankCorrResult out;
    out.rho = pearson(rx, ry);
    int as_extreme = 0;
    std::vector<double> shuffled = ry;
    for (int m = 1; m <= n_permutations; ++m) {
        Rng rng = Rng::substream(seed, "tva.rankcorr", static_cast<std::uint64_t>(m));
        rng.shuffle(shuffled);
        if (std::abs(pearson(rx, shuffled)) >= std::abs(out.rho)) ++as_extreme;
    }
    out.p_value = (1.0 + as_extreme) / (1.0 + n_permutations);
    return out;
}

FosdResult fosd_check(std::span<const double> dist_a, std::span<const double> dist_b) {
    if (dist_a.empty() || dist_b.empty()) throw EmptySample("FOSD needs two non-empty samples");
    std::vector<double> a(dist_a.begin(), dist_a.end());
    std::vector<double> b(dist_b.begin(), dist_b.end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::vector<double> pooled;
    pooled.reserve(a.size() + b.size());
    pooled.insert(pooled.end(), a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    std::sort(pooled.begin(), pooled.end());
    pooled.erase(std::unique(pooled.begin(), pooled.end()), pooled.end());

    FosdResult out;
    for (double y : pooled) {
        double fa = stats::ecdf_at(a, y);
        double fb = stats::ecdf_at(b, y);
        out.max_violation = std::max(out.max_violation, fa - fb);
    }
    out.dominates = out.max_violation <= 0.0;
    return out;
}

double percentile_of(std::span<const double> sample, double x) {
    if (sample.empty()) throw EmptySample("percentile of an empty sample");
    std::vector<double> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end());
    return 100.0 * stats::ecdf_at(sorted, x);
}

} // namespace p4p::tva
