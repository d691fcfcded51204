#include <algorithm>
#include <cmath>

#include "p4p/errors.hpp"
#include "p4p/estimators.hpp"
#include "p4p/parallel.hpp"
#include "p4p/randinf.hpp"

namespace p4p::ri {

namespace {

struct SimPool {
    std::vector<double> scores;
    std::vector<int> market;
    world::World world;
};

double ks_stat_for(const SimPool& pool, std::span<const double> scores, const Assignment& a) {
    std::vector<double> p4p, fw;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        Arm arm = a.advertised[pool.market[i]];
        if (arm == Arm::P4P) p4p.push_back(scores[i]);
        else if (arm == Arm::FW) fw.push_back(scores[i]);
    }
    return ks_statistic(p4p, fw);
}

} // namespace

std::vector<PowerPoint> power_harness(const world::WorldConfig& config,
                                      const theory::ContractMenu& menu,
                                      const theory::TypeDistribution& dist,
                                      const PowerOptions& opts, std::uint64_t seed) {
    const std::size_t n_tests = opts.tests.size();
    const std::size_t n_deltas = opts.deltas.size();
    // rejected[sim][test * n_deltas + d]
    std::vector<std::vector<unsigned char>> rejected(
        opts.n_sims, std::vector<unsigned char>(n_tests * n_deltas, 0));

    par::for_index(opts.n_sims, [&](std::int64_t sim) {
        std::uint64_t wseed = Rng::substream(seed, "power.world",
                                             static_cast<std::uint64_t>(sim))
                                  .u64();
        SimPool pool;
        pool.world = world::gen_world(config, menu, dist, wseed);
        auto apps = est::applicant_rows(pool.world);
        pool.scores.reserve(apps.size());
        pool.market.reserve(apps.size());
        for (const auto& a : apps) {
            pool.scores.push_back(a.score);
            pool.market.push_back(a.market);
        }
        auto observed_plan = pool.world.plan();
        auto perms = PermutationSet::make_advertised(
            observed_plan.advertised, observed_plan.experienced, opts.permutations,
            Rng::substream(seed, "power.perms", static_cast<std::uint64_t>(sim)).u64());

        for (std::size_t d = 0; d < n_deltas; ++d) {
            // inject an additive shift for applicants in advertised-P4P markets
            std::vector<double> shifted = pool.scores;
            std::vector<est::ApplicantRow> shifted_apps = apps;
            for (std::size_t i = 0; i < shifted.size(); ++i) {
                if (pool.world.markets[pool.market[i]].advertised == Arm::P4P) {
                    shifted[i] += opts.deltas[d];
                    shifted_apps[i].score += opts.deltas[d];
                }
            }
            for (std::size_t t = 0; t < n_tests; ++t) {
                StatFn stat;
                if (opts.tests[t] == "ks") {
                    stat = [&](const Assignment& a) {
                        return ks_stat_for(pool, shifted, a);
                    };
                } else if (opts.tests[t] == "ols") {
                    stat = [&](const Assignment& a) {
                        est::AssignView view;
                        std::vector<Arm> adv(a.advertised.begin(), a.advertised.end());
                        view.advertised = &adv;
                        auto report = est::applicant_pool_test(shifted_apps, pool.world,
                                                               est::WeightMode::Unweighted, view);
                        return report.stat("adv_p4p");
                    };
                } else {
                    throw ConfigError("unknown power test '" + opts.tests[t] + "'");
                }
                auto res = ri_pvalue_serial(stat, perms);
                rejected[sim][t * n_deltas + d] = res.p_value <= opts.alpha;
            }
        }
    });

    std::vector<PowerPoint> out;
    for (std::size_t t = 0; t < n_tests; ++t) {
        for (std::size_t d = 0; d < n_deltas; ++d) {
            PowerPoint pt;
            pt.test = opts.tests[t];
            pt.delta = opts.deltas[d];
            pt.n_sims = opts.n_sims;
            for (int sim = 0; sim < opts.n_sims; ++sim)
                pt.rejections += rejected[sim][t * n_deltas + d];
            pt.power = static_cast<double>(pt.rejections) / opts.n_sims;
            out.push_back(pt);
        }
    }
    return out;
}

} // namespace p4p::ri
