#include <doctest.h>

#include <cmath>
#include <map>

#include "p4p/errors.hpp"
#include "p4p/stats.hpp"
#include "p4p/tva.hpp"

using namespace p4p;
using namespace p4p::tva;
using world::EffectSpec;
using world::WorldConfig;

namespace {

WorldConfig tva_config() {
    WorldConfig c;
    c.n_districts = 3;
    c.n_families = 3;
    c.advertised_counts = {4, 3, 2};
    c.n_schools = 18;
    c.n_exp_p4p = 9;
    c.grade_lo = 4;
    c.grade_hi = 5;
    c.streams_per_grade = 1;
    c.pupils_per_stream = 12;
    c.sample_baseline = 5;
    c.sample_endline = 8;
    c.recruit_slots_per_school = 1;
    c.applicants_per_market = 25;
    c.n_subjects = 2;
    return c;
}

struct Lab {
    world::World w;
    world::Outcomes out;
    est::LearningPanel panel;
};

Lab make_lab(std::uint64_t seed, const EffectSpec& fx, WorldConfig cfg = tva_config()) {
    theory::ContractMenu menu;
    theory::TypeDistribution dist;
    Lab lab;
    lab.w = world::gen_world(cfg, menu, dist, seed);
    lab.out = world::simulate_outcomes(lab.w, fx, seed ^ 0xfeed);
    lab.panel = est::build_learning_panel(lab.w, lab.out.assessments);
    return lab;
}

} // namespace

TEST_CASE("noiseless world: pupil-level variance vanishes, teacher means constant") {
    EffectSpec fx;
    fx.noise_sd = 0.0;
    fx.pupil_round_sd = 0.0;
    fx.teacher_year_sd = 0.0;
    fx.teacher_sd = 0.4;
    fx.absent_rate = 0.0;
    auto cfg = tva_config();
    cfg.ar1_rho = 0.0;
    // one pupil signal source remains: the AR(1) latent; silence it by
    // making scores pure teacher effects plus the lag structure
    auto lab = make_lab(11, fx, cfg);
    auto comp = fit_tva_model(lab.panel, lab.w);
    // pupil latents still vary across pupils; eps is not zero, but the
    // teacher-year deviation of a teacher's own pupils has no teacher-year
    // component, so sigma2_eta should be near zero relative to var_v
    CHECK(comp.var_v ==
          doctest::Approx(comp.sigma2_theta + comp.sigma2_eta + comp.sigma2_eps).epsilon(1e-10));

    // fully noiseless: no pupil ability spread either
    EffectSpec silent = fx;
    silent.teacher_sd = 0.3;
    auto lab2 = make_lab(13, silent, cfg);
    // zero out latent variation by overwriting scores with teacher effects
    std::map<int, double> effect;
    for (const auto& t : lab2.w.teachers) effect[t.id] = 0.3 * t.tva_effect;
    for (auto& r : lab2.panel.rows) r.y = effect.count(r.teacher) ? effect[r.teacher] : 0.0;
    for (auto& r : lab2.panel.rows) r.lag_mean.assign(lab2.panel.n_subjects, 0.0);
    auto comp2 = fit_tva_model(lab2.panel, lab2.w);
    CHECK(comp2.sigma2_eps < 1e-12);
    std::map<std::pair<int, int>, double> seen;
    for (const auto& ty : comp2.teacher_years) seen[{ty.teacher, ty.round}] = ty.vbar;
    for (const auto& ty : comp2.teacher_years)
        CHECK(seen[{ty.teacher, ty.round}] == doctest::Approx(ty.vbar));
}

TEST_CASE("teacher relabeling leaves the components unchanged") {
    EffectSpec fx;
    fx.teacher_sd = 0.25;
    fx.teacher_year_sd = 0.1;
    auto lab = make_lab(17, fx);
    auto base = fit_tva_model(lab.panel, lab.w);
    // permute teacher ids jointly with their pupils (shift by a constant)
    auto shifted = lab.panel;
    for (auto& r : shifted.rows) r.teacher += 10000;
    auto moved = fit_tva_model(shifted, lab.w);
    CHECK(base.sigma2_theta == doctest::Approx(moved.sigma2_theta).epsilon(1e-12));
    CHECK(base.sigma2_eta == doctest::Approx(moved.sigma2_eta).epsilon(1e-12));
    CHECK(base.sigma2_eps == doctest::Approx(moved.sigma2_eps).epsilon(1e-12));
}

TEST_CASE("variance identity holds exactly by construction") {
    EffectSpec fx;
    auto lab = make_lab(19, fx);
    auto comp = fit_tva_model(lab.panel, lab.w);
    CHECK(comp.var_v ==
          doctest::Approx(comp.sigma2_theta + comp.sigma2_eta + comp.sigma2_eps).epsilon(1e-12));
}

TEST_CASE("outcome shifts are absorbed by the fixed effects") {
    EffectSpec fx;
    fx.teacher_sd = 0.3;
    auto lab = make_lab(23, fx);
    auto base_est = eb_value_added(fit_tva_model(lab.panel, lab.w));
    for (auto& r : lab.panel.rows) r.y += 11.0;
    auto moved_est = eb_value_added(fit_tva_model(lab.panel, lab.w));
    REQUIRE(base_est.size() == moved_est.size());
    for (std::size_t i = 0; i < base_est.size(); ++i)
        CHECK(base_est[i].value_added ==
              doctest::Approx(moved_est[i].value_added).epsilon(1e-6).scale(1.0));
}

TEST_CASE("shrinkage: zero persistent variance kills every estimate") {
    Components comp;
    comp.sigma2_theta = -0.01; // raw negative, clamped inside
    comp.sigma2_eta = 0.02;
    comp.sigma2_eps = 0.3;
    comp.teacher_years = {{1, 1, 0.5, 20}, {1, 2, 0.4, 25}, {2, 1, -0.3, 20}};
    auto est = eb_value_added(comp);
    for (const auto& e : est) {
        CHECK(e.value_added == 0.0);
        CHECK(e.reliability == 0.0);
    }
}

TEST_CASE("reliability reaches one as the noise components vanish") {
    Components comp;
    comp.sigma2_theta = 0.04;
    comp.sigma2_eta = 0.0;
    comp.sigma2_eps = 0.0;
    comp.teacher_years = {{1, 1, 0.2, 30}, {1, 2, 0.2, 30}};
    auto est = eb_value_added(comp);
    REQUIRE(est.size() == 1);
    // h = 1/(0 + 0/n) -> capped by the normalization below; with zero noise
    // the precision sum is huge and the estimate equals the weighted mean
    CHECK(est[0].value_added == doctest::Approx(0.2).epsilon(1e-6));
    CHECK(est[0].reliability == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("shrinkage contracts toward zero and monotonically in precision") {
    Components comp;
    comp.sigma2_theta = 0.04;
    comp.sigma2_eta = 0.01;
    comp.sigma2_eps = 0.25;
    comp.teacher_years = {{1, 1, 0.3, 5}, {2, 1, 0.3, 50}};
    auto est = eb_value_added(comp);
    REQUIRE(est.size() == 2);
    std::map<int, TvaEstimate> by_id;
    for (const auto& e : est) by_id[e.teacher] = e;
    CHECK(std::abs(by_id[1].value_added) <= std::abs(by_id[1].vbar_weighted) + 1e-15);
    CHECK(by_id[1].reliability < by_id[2].reliability); // fewer pupils, more shrinkage
    CHECK(by_id[1].reliability >= 0.0);
    CHECK(by_id[2].reliability <= 1.0);
}

TEST_CASE("rank correlation: identities and the concordance oracle") {
    std::vector<double> x{1, 2, 3, 4, 5};
    std::vector<double> y{2, 4, 6, 8, 10};
    CHECK(rank_corr(x, y, 100, 1).rho == doctest::Approx(1.0));
    std::vector<double> ny{10, 8, 6, 4, 2};
    CHECK(rank_corr(x, ny, 100, 1).rho == doctest::Approx(-1.0));

    Rng rng(5);
    std::vector<double> a, b;
    for (int i = 0; i < 15; ++i) {
        a.push_back(rng.normal());
        b.push_back(rng.normal());
    }
    auto got = rank_corr(a, b, 200, 2);
    // naive oracle: ranks by counting, Pearson by direct sums
    auto ranks_of = [](const std::vector<double>& v) {
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            double less = 0, equal = 0;
            for (std::size_t j = 0; j < v.size(); ++j) {
                less += v[j] < v[i];
                equal += v[j] == v[i];
            }
            r[i] = less + (equal + 1.0) / 2.0;
        }
        return r;
    };
    auto ra = ranks_of(a);
    auto rb = ranks_of(b);
    double ma = stats::mean(ra), mb = stats::mean(rb);
    double num = 0, da = 0, db = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        num += (ra[i] - ma) * (rb[i] - mb);
        da += (ra[i] - ma) * (ra[i] - ma);
        db += (rb[i] - mb) * (rb[i] - mb);
    }
    CHECK(got.rho == doctest::Approx(num / std::sqrt(da * db)).epsilon(1e-12));

    std::vector<double> flat{1, 1, 1, 1};
    std::vector<double> other{1, 2, 3, 4};
    CHECK_THROWS_AS(rank_corr(flat, other, 10, 3), ZeroVariance);
}

TEST_CASE("rank correlation p-value detects a strong monotone link") {
    Rng rng(7);
    std::vector<double> x, y;
    for (int i = 0; i < 40; ++i) {
        double v = rng.normal();
        x.push_back(v);
        y.push_back(v + 0.3 * rng.normal());
    }
    auto rc = rank_corr(x, y, 2000, 11);
    CHECK(rc.rho > 0.7);
    CHECK(rc.p_value < 0.01);
}

TEST_CASE("first-order dominance: identical, shifted, crossing") {
    std::vector<double> a{1, 2, 3, 4};
    auto same = fosd_check(a, a);
    CHECK(same.dominates);
    CHECK(same.max_violation == doctest::Approx(0.0));

    std::vector<double> worse{0.5, 1.5, 2.5, 3.5};
    auto up = fosd_check(a, worse);
    CHECK(up.dominates);
    CHECK_FALSE(fosd_check(worse, a).dominates);

    std::vector<double> cross{0.0, 10.0};
    std::vector<double> mid{2.5, 2.6};
    auto x = fosd_check(cross, mid);
    CHECK_FALSE(x.dominates);
    // grid oracle for the violation size
    std::vector<double> sc = cross, sm = mid;
    double worst = 0.0;
    for (double g = -1.0; g <= 11.0; g += 0.001)
        worst = std::max(worst, stats::ecdf_at(sc, g) - stats::ecdf_at(sm, g));
    CHECK(x.max_violation == doctest::Approx(worst).epsilon(1e-9));

    CHECK_THROWS_AS(fosd_check(std::vector<double>{}, a), EmptySample);
}

TEST_CASE("percentile lookup") {
    std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    CHECK(percentile_of(v, 5.0) == doctest::Approx(50.0));
    CHECK(percentile_of(v, 0.0) == doctest::Approx(0.0));
    CHECK(percentile_of(v, 10.0) == doctest::Approx(100.0));
}

TEST_CASE("single-round panels flag the covariance as unidentified") {
    EffectSpec fx;
    auto lab = make_lab(29, fx);
    // keep only round-1 rows
    est::LearningPanel one;
    one.n_subjects = lab.panel.n_subjects;
    for (const auto& r : lab.panel.rows)
        if (r.round == 1) one.rows.push_back(r);
    TvaOptions opts;
    opts.sigma2_theta_fallback = 0.05;
    auto comp = fit_tva_model(one, lab.w, opts);
    CHECK(comp.single_round);
    CHECK(comp.sigma2_theta == doctest::Approx(0.05));
    auto est = eb_value_added(comp);
    CHECK(est.size() > 0);
}

TEST_CASE("components are recovered in sign and scale at lab size") {
    EffectSpec fx;
    fx.teacher_sd = 0.2;      // sigma2_theta = 0.04
    fx.teacher_year_sd = 0.1; // sigma2_eta = 0.01
    fx.noise_sd = 0.5;
    fx.pupil_round_sd = 0.0;
    fx.absent_rate = 0.0;
    std::vector<double> th, eta, eps;
    for (int s = 0; s < 10; ++s) {
        auto lab = make_lab(4000 + s, fx);
        auto comp = fit_tva_model(lab.panel, lab.w);
        th.push_back(comp.sigma2_theta);
        eta.push_back(comp.sigma2_eta);
        eps.push_back(comp.sigma2_eps);
    }
    CHECK(stats::mean(th) == doctest::Approx(0.04).epsilon(0.5));
    CHECK(stats::mean(eps) > 0.2); // noise + pupil latent spread
}
