// Timing comparison of the OpenMP kernels against their serial reference
// paths: per-respondent EAP scoring and the permutation-statistic sweep.

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "p4p/estimators.hpp"
#include "p4p/irt.hpp"
#include "p4p/parallel.hpp"
#include "p4p/randinf.hpp"
#include "p4p/rng.hpp"
#include "p4p/theory.hpp"
#include "p4p/world.hpp"

using namespace p4p;

namespace {

double seconds(const std::function<void()>& body, int reps) {
    auto start = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r) body();
    auto end = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(end - start).count() / reps;
}

void report(const char* name, double serial, double parallel) {
    std::printf("%-28s serial %8.3f ms   parallel %8.3f ms   speedup %.2fx\n", name,
                serial * 1e3, parallel * 1e3, serial / parallel);
}

} // namespace

int main() {
    std::printf("kernel benchmark, %d threads\n\n", par::max_threads());

    // EAP scoring over a 4000 x 30 response matrix
    {
        Rng rng(1);
        const int n_resp = 4000, n_items = 30;
        std::vector<std::string> rids, iids;
        for (int r = 0; r < n_resp; ++r) rids.push_back(std::to_string(r));
        for (int j = 0; j < n_items; ++j) iids.push_back(std::to_string(j));
        auto m = irt::ResponseMatrix::zeros(rids, iids);
        irt::ItemParams items;
        items.item_ids = iids;
        for (int j = 0; j < n_items; ++j) {
            items.discrimination.push_back(rng.uniform(0.5, 2.0));
            items.difficulty.push_back(rng.uniform(-2.0, 2.0));
        }
        for (int r = 0; r < n_resp; ++r)
            for (int j = 0; j < n_items; ++j) m.set(r, j, rng.bernoulli(0.5) ? 1 : 0);

        auto a = irt::eap_score(m, items);
        auto b = irt::eap_score_serial(m, items);
        bool same = true;
        for (std::size_t i = 0; i < a.size(); ++i) same = same && a[i].eap == b[i].eap;
        double ts = seconds([&] { (void)irt::eap_score_serial(m, items); }, 3);
        double tp = seconds([&] { (void)irt::eap_score(m, items); }, 3);
        report("eap_score 4000x30", ts, tp);
        std::printf("  parallel == serial: %s\n\n", same ? "yes" : "NO");
    }

    // permutation sweep: teacher-metric mixed-model z statistic
    {
        world::WorldConfig wc;
        wc.n_schools = 60;
        wc.n_exp_p4p = 30;
        wc.grade_lo = 4;
        wc.grade_hi = 5;
        wc.pupils_per_stream = 4;
        wc.sample_baseline = 2;
        wc.sample_endline = 2;
        wc.applicants_per_market = 20;
        theory::ContractMenu menu;
        theory::TypeDistribution dist;
        auto w = world::gen_world(wc, menu, dist, 99);
        Rng rng(2);
        std::vector<est::TeacherMetricRow> rows;
        for (const auto& t : w.teachers) {
            for (int round = 1; round <= 2; ++round) {
                est::TeacherMetricRow r;
                r.teacher = t.id;
                r.round = round;
                r.school = t.school;
                r.district = w.schools[t.school].district;
                r.qualification = t.qualification;
                r.incumbent = !t.recruit;
                r.market = t.market;
                r.y = rng.normal();
                rows.push_back(r);
            }
        }
        auto plan = w.plan();
        auto perms = ri::PermutationSet::make_experienced(plan.advertised, plan.experienced,
                                                          400, 7);
        ri::StatFn stat = [&](const ri::Assignment& a) {
            std::vector<theory::Arm> exp(a.experienced.begin(), a.experienced.end());
            est::AssignView view;
            view.experienced = &exp;
            return est::fit_re_teacher(rows, w, view).stat("exp_p4p");
        };
        auto pa = ri::ri_pvalue(stat, perms);
        auto se = ri::ri_pvalue_serial(stat, perms);
        double ts = seconds([&] { (void)ri::ri_pvalue_serial(stat, perms); }, 1);
        double tp = seconds([&] { (void)ri::ri_pvalue(stat, perms); }, 1);
        report("ri_pvalue 400 LMM refits", ts, tp);
        std::printf("  parallel == serial: %s (p = %.4f)\n\n",
                    pa.p_value == se.p_value ? "yes" : "NO", pa.p_value);
    }

    // Monte Carlo decomposition draws
    {
        theory::ContractMenu menu;
        theory::TypeDistribution dist;
        double tp = seconds([&] { (void)theory::decompose_effects(menu, dist, 400000, 5); }, 2);
        std::printf("decompose_effects 4e5 draws    parallel %8.3f ms\n", tp * 1e3);
    }
    return 0;
}
