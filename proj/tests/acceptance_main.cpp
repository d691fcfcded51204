// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// fail.  Tolerances and thresholds are fixed in code below.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "bn_fixtures.hpp"
#include "p4p/awards.hpp"
#include "p4p/bn.hpp"
#include "p4p/config.hpp"
#include "p4p/estimators.hpp"
#include "p4p/irt.hpp"
#include "p4p/parallel.hpp"
#include "p4p/pipeline.hpp"
#include "p4p/randinf.hpp"
#include "p4p/sha256.hpp"
#include "p4p/stats.hpp"
#include "p4p/theory.hpp"
#include "p4p/tva.hpp"
#include "p4p/worldio.hpp"

using namespace p4p;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int g_failures = 0;

void run_criterion(const char* id, const char* label, const std::function<Outcome()>& body) {
    auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
        out = body();
    } catch (const std::exception& e) {
        out.pass = false;
        out.detail = std::string("exception: ") + e.what();
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] %-4s %-34s %s (%.1f s)\n", out.pass ? "PASS" : "FAIL", id, label,
                out.detail.c_str(), secs);
    std::fflush(stdout);
    if (!out.pass) ++g_failures;
}

char buf[512];
std::string fmt(const char* f, auto... args) {
    std::snprintf(buf, sizeof(buf), f, args...);
    return buf;
}

// ---------------------------------------------------------------------------

Outcome c1_golden_examples() {
    auto f1 = bn_fixtures::worked_example_1();
    auto s1 = bn::score_round(f1.baseline, f1.endline, bn::Options{10, std::nullopt, 0});
    double sum1 = -1;
    for (const auto& t : s1.teacher_scores)
        if (t.teacher == f1.teacher_id) sum1 = t.rank_sum;

    auto f2 = bn_fixtures::worked_example_2();
    auto s2 = bn::score_round(f2.baseline, f2.endline, bn::Options{5, std::nullopt, 0});
    double sum2 = -1;
    int absent_rank = -1, absent_bin_size = -1;
    for (const auto& t : s2.teacher_scores)
        if (t.teacher == f2.teacher_id) sum2 = t.rank_sum;
    for (const auto& r : s2.ranks)
        if (r.pupil == 1004) {
            absent_rank = r.rank;
            absent_bin_size = r.bin_size;
        }

    Outcome out;
    out.pass = sum1 == 17.0 && sum2 == 60.0 && absent_rank == 40 && absent_bin_size == 40;
    out.detail = fmt("rank sums %.0f/%.0f, absent pupil %d of %d", sum1, sum2, absent_rank,
                     absent_bin_size);
    return out;
}

Outcome c2_fairness() {
    // null world with identical teachers: streams differ (tracked classes),
    // pupils within a stream are similar, tests are noisy, and half the
    // endline sample is retained from the baseline as in the study design.
    // The mean tournament score per composition tercile must sit within
    // +-0.02 of the global mean.
    const int n_districts = 700;
    const int streams = 20, base_n = 5, end_n = 10, retained = 5;
    const double stream_sd = 1.5, pupil_sd = 0.4, meas_sd = 0.3;

    std::vector<std::vector<std::pair<double, double>>> district_rows(n_districts);
    par::for_index(n_districts, [&](std::int64_t d) {
        Rng rng = Rng::substream(20260101, "acc.fairness", static_cast<std::uint64_t>(d));
        std::vector<bn::PanelRow> baseline, endline;
        std::int64_t pupil = 0;
        for (int k = 0; k < streams; ++k) {
            double mu = stream_sd * rng.normal();
            std::vector<std::pair<std::int64_t, double>> base_pupils;
            for (int i = 0; i < base_n; ++i) {
                double ability = mu + pupil_sd * rng.normal();
                bn::PanelRow r;
                r.pupil = pupil++;
                r.cell = bn::Cell{0, 0, 4, k, k};
                r.score = ability + meas_sd * rng.normal();
                r.enrolled = end_n;
                r.sampled = base_n;
                baseline.push_back(r);
                base_pupils.push_back({r.pupil, ability});
            }
            for (int i = 0; i < end_n; ++i) {
                bn::PanelRow r;
                double ability;
                if (i < retained) {
                    r.pupil = base_pupils[i].first;
                    ability = base_pupils[i].second;
                } else {
                    r.pupil = pupil++;
                    ability = mu + pupil_sd * rng.normal();
                }
                r.cell = bn::Cell{0, 0, 4, k, k};
                r.teacher = k;
                r.score = ability + meas_sd * rng.normal();
                r.enrolled = end_n;
                r.sampled = end_n;
                endline.push_back(r);
            }
        }
        auto scores = bn::score_round(baseline, endline, bn::Options{20, std::nullopt, 0});
        std::map<std::int64_t, int> pupil_stream;
        for (const auto& r : baseline) pupil_stream[r.pupil] = r.cell.stream;
        std::vector<std::int64_t> ids;
        std::vector<double> vals;
        for (const auto& r : baseline) {
            ids.push_back(r.pupil);
            vals.push_back(r.score);
        }
        auto bb = bn::make_baseline_bins({0, 0, 4}, ids, vals, 20);
        std::map<int, std::pair<double, int>> comp;
        for (std::size_t i = 0; i < bb.pupils.size(); ++i) {
            auto& acc = comp[pupil_stream[bb.pupils[i]]];
            acc.first += bb.bin[i];
            acc.second += 1;
        }
        for (const auto& t : scores.teacher_scores)
            district_rows[d].push_back({comp[t.teacher].first / comp[t.teacher].second, t.score});
    });

    std::vector<std::pair<double, double>> rows;
    for (const auto& dr : district_rows) rows.insert(rows.end(), dr.begin(), dr.end());
    std::vector<double> comps;
    comps.reserve(rows.size());
    for (const auto& [c, s] : rows) comps.push_back(c);
    std::sort(comps.begin(), comps.end());
    double q1 = comps[comps.size() / 3], q2 = comps[2 * comps.size() / 3];
    std::array<std::array<double, 2>, 3> strata{{{0, 0}, {0, 0}, {0, 0}}};
    double global_sum = 0.0;
    for (const auto& [c, s] : rows) {
        int idx = c < q1 ? 0 : (c < q2 ? 1 : 2);
        strata[idx][0] += s;
        strata[idx][1] += 1;
        global_sum += s;
    }
    double global = global_sum / static_cast<double>(rows.size());
    double worst = 0.0;
    for (const auto& s : strata)
        if (s[1] > 0) worst = std::max(worst, std::abs(s[0] / s[1] - global));
    Outcome out;
    out.pass = worst <= 0.02;
    out.detail = fmt("max tercile deviation %.4f (limit 0.02, %d districts)", worst, n_districts);
    return out;
}

cfg::RunConfig fixture_config(int n_schools, int seed_tag) {
    cfg::RunConfig c;
    c.seed = 777000 + seed_tag;
    c.world.n_districts = 2;
    c.world.n_families = 3;
    c.world.advertised_counts = {3, 2, 1};
    c.world.n_schools = n_schools;
    c.world.n_exp_p4p = n_schools / 2;
    c.world.grade_lo = 4;
    c.world.grade_hi = 5;
    c.world.streams_per_grade = 1;
    c.world.pupils_per_stream = 12;
    c.world.sample_baseline = 4;
    c.world.sample_endline = 8;
    c.world.recruit_slots_per_school = 1;
    c.world.applicants_per_market = 20;
    c.world.n_subjects = 3;
    c.effects.fw_inputs_year1 = true;
    return c;
}

Outcome c3_monotone_invariance() {
    auto c = fixture_config(10, 3);
    auto w = world::gen_world(c.world, c.menu, c.dist, c.seed);
    auto out_sim = world::simulate_outcomes(w, c.effects, c.seed);

    auto run = [&](const world::Outcomes& sim) {
        pipe::PipelineState st;
        st.config = c;
        st.world = w;
        st.outcomes = sim;
        st.have_world = true;
        for (const auto& a : sim.assessments)
            if (!a.absent) st.scores[{a.pupil, a.subject, a.round}] = a.score;
        std::string dir = (fs::temp_directory_path() / "p4p_acc_c3").string();
        fs::remove_all(dir);
        fs::create_directories(dir);
        pipe::stage_score_bn(st, dir);
        pipe::stage_award(st, dir);
        return st;
    };
    auto base = run(out_sim);

    // strictly increasing transform of the endline scores (rounds 1 and 2)
    auto moved_sim = out_sim;
    for (auto& a : moved_sim.assessments)
        if (a.round >= 1) a.score = std::exp(a.score * 0.37) + 2.0 * a.score - 5.0;
    auto moved = run(moved_sim);

    bool same = true;
    for (int round = 0; round < 2 && same; ++round) {
        const auto& br = base.bn_rounds[round].ranks;
        const auto& mr = moved.bn_rounds[round].ranks;
        if (br.size() != mr.size()) same = false;
        for (std::size_t i = 0; same && i < br.size(); ++i)
            same = br[i].pupil == mr[i].pupil && br[i].pseudo_bin == mr[i].pseudo_bin &&
                   br[i].rank == mr[i].rank && br[i].pi == mr[i].pi;
        const auto& bt = base.bn_rounds[round].teacher_scores;
        const auto& mt = moved.bn_rounds[round].teacher_scores;
        if (bt.size() != mt.size()) same = false;
        for (std::size_t i = 0; same && i < bt.size(); ++i)
            same = bt[i].teacher == mt[i].teacher && bt[i].score == mt[i].score &&
                   bt[i].rank_sum == mt[i].rank_sum;
    }
    if (base.award_ledger.size() != moved.award_ledger.size()) same = false;
    for (std::size_t i = 0; same && i < base.award_ledger.size(); ++i)
        same = base.award_ledger[i].teacher == moved.award_ledger[i].teacher &&
               base.award_ledger[i].summary == moved.award_ledger[i].summary &&
               base.award_ledger[i].award == moved.award_ledger[i].award &&
               base.award_ledger[i].payout_rwf == moved.award_ledger[i].payout_rwf;

    Outcome res;
    res.pass = same;
    res.detail = same ? fmt("%zu ranks, %zu ledger rows bit-identical",
                            base.bn_rounds[0].ranks.size() + base.bn_rounds[1].ranks.size(),
                            base.award_ledger.size())
                      : "outputs diverged under the transform";
    return res;
}

// null menu: both contracts identical, so application behavior carries no
// signal and the sharp null holds by construction
theory::ContractMenu null_menu() {
    theory::ContractMenu m;
    m.bonus_b = 0.0;
    m.w_fixed = m.w_guaranteed;
    return m;
}

Outcome c4_ri_validity() {
    const int n_sims = 1000;
    const double alpha = 0.05;

    // (a) KS applicant test over the 18-market first tier
    world::WorldConfig wc;
    wc.n_schools = 18; // schools are incidental here; keep generation light
    wc.n_exp_p4p = 9;
    wc.grade_lo = 4;
    wc.grade_hi = 4;
    wc.pupils_per_stream = 2;
    wc.sample_baseline = 1;
    wc.sample_endline = 1;
    wc.applicants_per_market = 95;
    wc.recruit_slots_per_school = 1;
    auto menu = null_menu();
    theory::TypeDistribution dist;

    std::vector<unsigned char> reject_ks(n_sims, 0);
    par::for_index(n_sims, [&](std::int64_t s) {
        auto w = world::gen_world(wc, menu, dist, Rng::substream(41001, "acc.c4a", s).u64());
        std::vector<double> scores;
        std::vector<int> market;
        for (const auto& a : w.applicants) {
            if (!a.applied) continue;
            scores.push_back(a.ttc_score);
            market.push_back(a.market);
        }
        auto plan = w.plan();
        auto perms = ri::PermutationSet::make_advertised(
            plan.advertised, plan.experienced, 299,
            Rng::substream(41002, "acc.c4a.perm", s).u64());
        ri::StatFn stat = [&](const ri::Assignment& a) {
            std::vector<double> p4p, fw;
            for (std::size_t i = 0; i < scores.size(); ++i) {
                if (a.advertised[market[i]] == theory::Arm::P4P) p4p.push_back(scores[i]);
                else if (a.advertised[market[i]] == theory::Arm::FW) fw.push_back(scores[i]);
            }
            return ri::ks_statistic(p4p, fw);
        };
        reject_ks[s] = ri::ri_pvalue_serial(stat, perms).p_value <= alpha;
    });
    double rate_ks = 0;
    for (auto r : reject_ks) rate_ks += r;
    rate_ks /= n_sims;

    // (b) tau_E z-statistic over the 164-school second tier
    auto c = fixture_config(164, 4);
    c.world.n_districts = 6;
    c.world.advertised_counts = {7, 7, 4};
    c.world.n_exp_p4p = 85;
    c.world.grade_lo = 4;
    c.world.grade_hi = 5;
    // everyone sampled and linked so the round-2 pseudo-baseline always has
    // a source cell in every school
    c.world.pupils_per_stream = 6;
    c.world.sample_baseline = 6;
    c.world.sample_endline = 6;
    c.world.pupil_continue_prob = 1.0;
    c.world.applicants_per_market = 30;
    c.effects.absent_rate = 0.0;
    c.menu = null_menu();

    std::vector<unsigned char> reject_z(n_sims, 0);
    par::for_index(n_sims, [&](std::int64_t s) {
        auto w = world::gen_world(c.world, c.menu, c.dist,
                                  Rng::substream(41003, "acc.c4b", s).u64());
        auto sim = world::simulate_outcomes(w, c.effects,
                                            Rng::substream(41004, "acc.c4b.fx", s).u64());
        pipe::PipelineState st;
        st.config = c;
        st.world = w;
        st.outcomes = sim;
        st.have_world = true;
        for (const auto& a : sim.assessments)
            if (!a.absent) st.scores[{a.pupil, a.subject, a.round}] = a.score;
        std::map<std::pair<int, int>, const world::SpotCheckRow*> checks;
        for (const auto& sc : sim.spot_checks) checks[{sc.teacher, sc.round}] = &sc;
        std::vector<est::TeacherMetricRow> rows;
        for (int round = 1; round <= 2; ++round) {
            std::vector<bn::PanelRow> baseline, endline;
            pipe::bn_round_inputs(st, round, baseline, endline);
            auto scored = bn::score_round(baseline, endline, bn::Options{20, std::nullopt, 0});
            for (const auto& t : scored.teacher_scores) {
                auto it = checks.find({t.teacher, round});
                if (it == checks.end()) continue;
                est::TeacherMetricRow r;
                r.teacher = t.teacher;
                r.round = round;
                // a teacher-level composite; any fixed functional works for
                // the size check
                r.y = 0.5 * t.score + 0.5 *
                                          (it->second->presence + it->second->lesson_plan +
                                           it->second->pedagogy() / 3.0) /
                                          3.0;
                const auto& teacher = t.teacher < static_cast<int>(w.teachers.size())
                                          ? w.teachers[t.teacher]
                                          : sim.replacements[0];
                r.school = teacher.school;
                r.district = w.schools[teacher.school].district;
                r.qualification = teacher.qualification;
                r.incumbent = !teacher.recruit;
                r.market = teacher.market;
                rows.push_back(r);
            }
        }
        auto plan = w.plan();
        auto perms = ri::PermutationSet::make_experienced(
            plan.advertised, plan.experienced, 199,
            Rng::substream(41005, "acc.c4b.perm", s).u64());
        ri::StatFn stat = [&](const ri::Assignment& a) {
            std::vector<theory::Arm> exp(a.experienced.begin(), a.experienced.end());
            est::AssignView view;
            view.experienced = &exp;
            return est::fit_re_teacher(rows, w, view).stat("exp_p4p");
        };
        reject_z[s] = ri::ri_pvalue_serial(stat, perms).p_value <= alpha;
    });
    double rate_z = 0;
    for (auto r : reject_z) rate_z += r;
    rate_z /= n_sims;

    Outcome out;
    out.pass = rate_ks >= 0.035 && rate_ks <= 0.065 && rate_z >= 0.035 && rate_z <= 0.065;
    out.detail = fmt("rejection rates: KS %.3f, tau_E z %.3f (band [0.035, 0.065])", rate_ks,
                     rate_z);
    return out;
}

Outcome c5_exact_small_case() {
    // every assignment of 6 units, 3 treated, enumerated
    std::vector<double> y{0.3, 1.9, -0.7, 1.1, 0.4, -1.2};
    std::vector<theory::Arm> exp{theory::Arm::P4P, theory::Arm::P4P, theory::Arm::P4P,
                                 theory::Arm::FW, theory::Arm::FW, theory::Arm::FW};
    auto mean_diff = [&](std::span<const double> vals, std::span<const theory::Arm> a) {
        double s1 = 0, s0 = 0;
        int n1 = 0, n0 = 0;
        for (std::size_t i = 0; i < vals.size(); ++i) {
            if (a[i] == theory::Arm::P4P) {
                s1 += vals[i];
                ++n1;
            } else {
                s0 += vals[i];
                ++n0;
            }
        }
        return s1 / n1 - s0 / n0;
    };
    auto set = ri::PermutationSet::make_experienced({}, exp, 5000, 1);
    bool exhaustive_ok = set.exhaustive && set.size() == 20;

    ri::StatFn stat = [&](const ri::Assignment& a) { return mean_diff(y, a.experienced); };
    auto res = ri::ri_pvalue(stat, set);

    // brute-force enumeration over all 20 assignments
    double observed = mean_diff(y, exp);
    int extreme = 0, total = 0;
    for (int mask = 0; mask < 64; ++mask) {
        if (__builtin_popcount(mask) != 3) continue;
        std::vector<theory::Arm> assign(6, theory::Arm::FW);
        for (int i = 0; i < 6; ++i)
            if (mask & (1 << i)) assign[i] = theory::Arm::P4P;
        ++total;
        if (std::abs(mean_diff(y, assign)) >= std::abs(observed)) ++extreme;
    }
    bool p_exact = res.p_value == static_cast<double>(extreme) / total;

    // CI inversion against a dense-grid brute force
    std::vector<unsigned char> treated{1, 1, 1, 0, 0, 0};
    auto shift_stat = [&](std::span<const double> vals, const ri::Assignment& a) {
        return mean_diff(vals, a.experienced);
    };
    const double tol = 1e-3;
    auto ci = ri::ci_invert_shift(y, treated, shift_stat, set, {-6.0, 6.0, tol}, 0.2);
    auto pvalue_at = [&](double delta) {
        std::vector<double> adj = y;
        for (int i = 0; i < 6; ++i)
            if (treated[i]) adj[i] -= delta;
        ri::StatFn s2 = [&](const ri::Assignment& a) { return mean_diff(adj, a.experienced); };
        return ri::ri_pvalue_serial(s2, set).p_value;
    };
    double lo_grid = 6.0, hi_grid = -6.0;
    for (double d = -6.0; d <= 6.0; d += tol / 2.0) {
        if (pvalue_at(d) > 0.2) {
            lo_grid = std::min(lo_grid, d);
            hi_grid = std::max(hi_grid, d);
        }
    }
    bool ci_ok = !ci.empty && std::abs(ci.lo - lo_grid) <= tol && std::abs(ci.hi - hi_grid) <= tol;

    Outcome out;
    out.pass = exhaustive_ok && p_exact && ci_ok;
    out.detail = fmt("p=%.6f exact=%s, CI [%.4f, %.4f] vs grid [%.4f, %.4f]", res.p_value,
                     p_exact ? "yes" : "no", ci.lo, ci.hi, lo_grid, hi_grid);
    return out;
}

Outcome c6_power_ordering() {
    world::WorldConfig wc;
    wc.n_schools = 18;
    wc.n_exp_p4p = 9;
    wc.grade_lo = 4;
    wc.grade_hi = 4;
    wc.pupils_per_stream = 2;
    wc.sample_baseline = 1;
    wc.sample_endline = 1;
    wc.applicants_per_market = 95;
    wc.recruit_slots_per_school = 1;
    wc.ttc_noise_kind = "heavy";
    auto menu = null_menu();
    theory::TypeDistribution dist;

    ri::PowerOptions opts;
    opts.deltas = {0.0, 0.03, 0.06, 0.09, 0.12};
    opts.tests = {"ks", "ols"};
    opts.n_sims = 500;
    opts.permutations = 299;
    opts.alpha = 0.05;
    auto table = ri::power_harness(wc, menu, dist, opts, 52001);

    std::map<double, double> ks, ols;
    for (const auto& p : table) {
        if (p.test == "ks") ks[p.delta] = p.power;
        else ols[p.delta] = p.power;
    }
    bool ordered = true;
    std::string powers;
    for (double d : opts.deltas) {
        powers += fmt("d=%.2f ks=%.2f ols=%.2f; ", d, ks[d], ols[d]);
        if ((ks[d] > 0.2 || ols[d] > 0.2) && ks[d] < ols[d]) ordered = false;
    }
    // power must actually climb so the comparison is informative
    bool informative = ks[opts.deltas.back()] > 0.5;
    Outcome out;
    out.pass = ordered && informative;
    out.detail = powers + (ordered ? "KS >= OLS where powered" : "ORDERING VIOLATED");
    return out;
}

Outcome c7_lmm_recovery() {
    const int n_worlds = 200;
    const double truth = 0.15;
    cfg::RunConfig c;
    c.world.n_schools = 164;
    c.world.n_exp_p4p = 85;
    c.world.grade_lo = 4;
    c.world.grade_hi = 6;
    c.world.streams_per_grade = 1;
    c.world.pupils_per_stream = 30;
    c.world.sample_baseline = 5;
    c.world.sample_endline = 10;
    c.world.recruit_slots_per_school = 2;
    c.world.applicants_per_market = 60;
    c.world.n_subjects = 3;
    c.world.ar1_rho = 0.0; // pupil-round intercepts plus white noise: the
                           // fitted model is the data-generating process
    c.effects.exp_learning = truth;
    c.effects.teacher_sd = 0.0;
    c.effects.teacher_year_sd = 0.0;
    c.effects.pupil_round_sd = 0.5;
    c.effects.noise_sd = 0.7;
    c.effects.absent_rate = 0.0;
    c.menu = null_menu();

    std::vector<double> estimates(n_worlds);
    std::vector<unsigned char> covered(n_worlds, 0);
    par::for_index(n_worlds, [&](std::int64_t s) {
        auto w = world::gen_world(c.world, c.menu, c.dist,
                                  Rng::substream(61001, "acc.c7", s).u64());
        auto sim = world::simulate_outcomes(w, c.effects,
                                            Rng::substream(61002, "acc.c7.fx", s).u64());
        auto panel = est::build_learning_panel(w, sim.assessments);
        est::LearningSpecOptions opts;
        opts.lag_interaction = "subject_round";
        auto rep = est::fit_lmm_pupil(panel, w, {}, opts);
        estimates[s] = rep.coef("exp_p4p");
        double se = rep.se_of("exp_p4p");
        covered[s] = std::abs(estimates[s] - truth) <= 1.959963984540054 * se;
    });
    double bias = stats::mean(estimates) - truth;
    double coverage = 0;
    for (auto cvd : covered) coverage += cvd;
    coverage /= n_worlds;

    Outcome out;
    out.pass = std::abs(bias) <= 0.02 && coverage >= 0.93 && coverage <= 0.97;
    out.detail = fmt("bias %+.4f (limit 0.02), coverage %.3f (band [0.93, 0.97])", bias,
                     coverage);
    return out;
}

Outcome c8_irt_recovery() {
    Rng rng(71001);
    const int n_resp = 2000, n_items = 25;
    std::vector<std::string> rids, iids;
    for (int r = 0; r < n_resp; ++r) rids.push_back(std::to_string(r));
    for (int j = 0; j < n_items; ++j) iids.push_back(std::to_string(j));
    auto m = irt::ResponseMatrix::zeros(rids, iids);
    std::vector<double> true_a, true_b;
    for (int j = 0; j < n_items; ++j) {
        true_a.push_back(rng.uniform(0.5, 2.0));
        true_b.push_back(rng.uniform(-2.0, 2.0));
    }
    for (int r = 0; r < n_resp; ++r) {
        double theta = rng.normal();
        for (int j = 0; j < n_items; ++j) {
            double p = 1.0 / (1.0 + std::exp(-true_a[j] * (theta - true_b[j])));
            m.set(r, j, rng.bernoulli(p) ? 1 : 0);
        }
    }
    auto params = irt::fit_2pl(m);
    double rmse_a = 0, rmse_b = 0;
    for (int j = 0; j < n_items; ++j) {
        rmse_a += std::pow(params.discrimination[j] - true_a[j], 2);
        rmse_b += std::pow(params.difficulty[j] - true_b[j], 2);
    }
    rmse_a = std::sqrt(rmse_a / n_items);
    rmse_b = std::sqrt(rmse_b / n_items);

    // dense-quadrature oracle for the EAP scores (first 200 respondents)
    auto got = irt::eap_score(m, params);
    std::vector<double> diffs(200, 0.0);
    const int grid_n = 100000;
    par::for_index(200, [&](std::int64_t r) {
        double total = 0, m1 = 0;
        for (int q = 0; q < grid_n; ++q) {
            double t = -10.0 + 20.0 * (q + 0.5) / grid_n;
            double logw = -0.5 * t * t;
            for (int j = 0; j < n_items; ++j) {
                double p = 1.0 / (1.0 + std::exp(-params.discrimination[j] *
                                                 (t - params.difficulty[j])));
                logw += m.at(static_cast<int>(r), j) == 1 ? std::log(p) : std::log(1 - p);
            }
            double wgt = std::exp(logw);
            total += wgt;
            m1 += wgt * t;
        }
        diffs[r] = std::abs(m1 / total - got[r].eap);
    });
    double worst = 0.0;
    for (double d : diffs) worst = std::max(worst, d);

    Outcome out;
    out.pass = rmse_a <= 0.15 && rmse_b <= 0.10 && worst <= 1e-4;
    out.detail = fmt("RMSE(a)=%.3f (<=0.15), RMSE(b)=%.3f (<=0.10), |EAP-oracle|=%.2e (<=1e-4)",
                     rmse_a, rmse_b, worst);
    return out;
}

Outcome c9_tva() {
    const int n_sims = 200;
    cfg::RunConfig c;
    c.world.n_schools = 164;
    c.world.n_exp_p4p = 85;
    // six teachers per school keep the school fixed effects from absorbing
    // much of the persistent teacher variance; one subject each with all 40
    // pupils sampled gives 40 pupils per teacher-year
    c.world.grade_lo = 4;
    c.world.grade_hi = 5;
    c.world.streams_per_grade = 1;
    c.world.pupils_per_stream = 40;
    c.world.sample_baseline = 10;
    c.world.sample_endline = 40;
    c.world.recruit_slots_per_school = 1;
    c.world.applicants_per_market = 40;
    c.world.n_subjects = 3;
    c.world.ar1_rho = 0.0;
    c.effects.teacher_sd = 0.2;          // persistent variance 0.04
    c.effects.teacher_year_sd = 0.1;     // teacher-year variance 0.01
    c.effects.noise_sd = 0.4;
    c.effects.pupil_ability_scale = 0.3; // 0.4^2 + 0.3^2 = 0.25 pupil level
    c.effects.pupil_round_sd = 0.0;
    c.effects.absent_rate = 0.0;
    c.effects.retention_base = 1.0; // both years observed for every teacher
    c.menu = null_menu();

    std::vector<double> th(n_sims), eta(n_sims), eps(n_sims), spearman(n_sims);
    std::vector<unsigned char> reliability_ok(n_sims, 1);
    par::for_index(n_sims, [&](std::int64_t s) {
        auto w = world::gen_world(c.world, c.menu, c.dist,
                                  Rng::substream(81001, "acc.c9", s).u64());
        auto sim = world::simulate_outcomes(w, c.effects,
                                            Rng::substream(81002, "acc.c9.fx", s).u64());
        auto panel = est::build_learning_panel(w, sim.assessments);
        tva::TvaOptions opts;
        opts.lag_interaction = "subject_round";
        auto comp = tva::fit_tva_model(panel, w, opts);
        th[s] = comp.sigma2_theta;
        eta[s] = comp.sigma2_eta;
        eps[s] = comp.sigma2_eps;
        auto estimates = tva::eb_value_added(comp);
        std::vector<double> va, truth;
        for (const auto& e : estimates) {
            if (e.reliability < 0.0 || e.reliability > 1.0) reliability_ok[s] = 0;
            if (e.teacher >= static_cast<int>(w.teachers.size())) continue;
            va.push_back(e.value_added);
            truth.push_back(c.effects.teacher_sd * w.teachers[e.teacher].tva_effect);
        }
        spearman[s] = tva::rank_corr(va, truth, 1, 1).rho;
    });
    double m_th = stats::mean(th), m_eta = stats::mean(eta), m_eps = stats::mean(eps);
    double m_rho = stats::mean(spearman);
    bool rel_ok = true;
    for (auto ok : reliability_ok) rel_ok = rel_ok && ok;

    bool th_ok = std::abs(m_th - 0.04) <= 0.3 * 0.04;
    bool eta_ok = std::abs(m_eta - 0.01) <= 0.3 * 0.01;
    bool eps_ok = std::abs(m_eps - 0.25) <= 0.3 * 0.25;
    Outcome out;
    out.pass = th_ok && eta_ok && eps_ok && m_rho >= 0.8 && rel_ok;
    out.detail = fmt("components (%.4f, %.4f, %.4f) vs (0.04, 0.01, 0.25); Spearman %.3f; "
                     "reliability in [0,1]: %s",
                     m_th, m_eta, m_eps, m_rho, rel_ok ? "yes" : "no");
    return out;
}

Outcome c10_theory() {
    theory::ContractMenu menu; // the worked-example parameters
    theory::TypeDistribution dist;
    auto dec = theory::decompose_effects(menu, dist, 1000000, 91001);
    bool negatives = dec.selection_fw < 0 && dec.selection_p4p < 0 &&
                     dec.incentive_fw_applicants < 0 && dec.incentive_p4p_applicants < 0;

    // grid-search oracle for the boundary, both arms, across the support
    auto oracle = [&](theory::Scheme arm, double th) {
        auto gap = [&](double tau) {
            theory::TeacherType t{tau, th};
            return theory::expected_payoff(t, arm, menu) -
                   theory::expected_payoff(t, theory::Scheme::Outside, menu);
        };
        if (gap(dist.tau_lo) >= 0) return dist.tau_lo;
        if (gap(dist.tau_hi) < 0) return dist.tau_hi;
        double lo = dist.tau_lo, hi = dist.tau_hi;
        for (int stage = 0; stage < 2; ++stage) {
            const int n = 10000;
            double step = (hi - lo) / n;
            for (int i = 1; i <= n; ++i) {
                if (gap(lo + step * i) >= 0) {
                    hi = lo + step * i;
                    lo = hi - step;
                    break;
                }
            }
        }
        return hi;
    };
    double worst = 0.0;
    for (double th = dist.theta_lo; th <= dist.theta_hi + 1e-9; th += 0.25) {
        for (auto arm : {theory::Scheme::P4P, theory::Scheme::FW}) {
            double got = theory::selection_boundary(arm, th, menu, dist);
            worst = std::max(worst, std::abs(got - oracle(arm, th)));
        }
    }
    Outcome out;
    out.pass = negatives && worst <= 1e-4;
    out.detail = fmt("differences (%.3f, %.3f, %.2f, %.2f) all<0: %s; boundary |err|=%.2e",
                     dec.selection_fw, dec.selection_p4p, dec.incentive_fw_applicants,
                     dec.incentive_p4p_applicants, negatives ? "yes" : "no", worst);
    return out;
}

Outcome c11_determinism() {
    auto make = [&](const std::string& tag) {
        auto c = fixture_config(12, 11);
        c.effects.items_per_test = 8;
        c.world.n_subjects = 2;
        c.inference.permutations = 25;
        c.inference.ci_for_ks = false;
        c.power.n_sims = 3;
        c.power.permutations = 9;
        c.power.deltas = {0.0, 0.1};
        c.stages = {"simulate", "score-irt", "score-bn", "award", "infer", "tva", "power"};
        c.out_dir = (fs::temp_directory_path() / ("p4p_acc_c11_" + tag)).string();
        fs::remove_all(c.out_dir);
        return c;
    };
    auto digest_map = [](const pipe::BundleResult& b) {
        std::map<std::string, std::string> out;
        for (const auto& s : b.stages)
            for (const auto& [f, d] : s.outputs) out[s.stage + "/" + f] = d;
        return out;
    };

    int threads = par::max_threads();
    auto run1 = digest_map(pipe::run_pipeline(make("a")));
    auto run2 = digest_map(pipe::run_pipeline(make("b")));
    par::set_threads(1);
    auto run3 = digest_map(pipe::run_pipeline(make("c")));
    par::set_threads(std::max(threads, 8));
    auto run4 = digest_map(pipe::run_pipeline(make("d")));
    par::set_threads(threads);

    bool same = run1.size() > 10 && run1 == run2 && run1 == run3 && run1 == run4;
    Outcome out;
    out.pass = same;
    out.detail = fmt("%zu artifacts; repeat / 1-thread / 8-thread digests %s", run1.size(),
                     same ? "identical" : "DIFFER");
    return out;
}

} // namespace

int main(int argc, char** argv) {
    std::set<std::string> only;
    for (int i = 1; i < argc; ++i) only.insert(argv[i]);
    auto wanted = [&](const char* id) { return only.empty() || only.count(id); };
    std::printf("acceptance suite (%d threads)\n", par::max_threads());
    if (wanted("C1")) run_criterion("C1", "golden worked examples", c1_golden_examples);
    if (wanted("C2")) run_criterion("C2", "seeded-tournament fairness", c2_fairness);
    if (wanted("C3")) run_criterion("C3", "monotone invariance", c3_monotone_invariance);
    if (wanted("C4")) run_criterion("C4", "randomization-inference validity", c4_ri_validity);
    if (wanted("C5")) run_criterion("C5", "exact small-case equivalence", c5_exact_small_case);
    if (wanted("C6")) run_criterion("C6", "KS vs OLS power ordering", c6_power_ordering);
    if (wanted("C7")) run_criterion("C7", "mixed-model effect recovery", c7_lmm_recovery);
    if (wanted("C8")) run_criterion("C8", "IRT parameter and score recovery", c8_irt_recovery);
    if (wanted("C9")) run_criterion("C9", "value-added components and ranks", c9_tva);
    if (wanted("C10")) run_criterion("C10", "choice-model decomposition", c10_theory);
    if (wanted("C11")) run_criterion("C11", "pipeline determinism", c11_determinism);
    if (g_failures) {
        std::printf("%d criterion(s) FAILED\n", g_failures);
        return 1;
    }
    std::printf("all criteria passed\n");
    return 0;
}
