#include "p4p/randinf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "p4p/errors.hpp"
#include "p4p/estimators.hpp"
#include "p4p/parallel.hpp"
#include "p4p/rng.hpp"

namespace p4p::ri {

namespace {

std::map<Arm, int> arm_counts(const std::vector<Arm>& labels) {
    std::map<Arm, int> counts;
    for (Arm a : labels) counts[a] += 1;
    return counts;
}

void check_counts(const std::vector<Arm>& member, const std::map<Arm, int>& want) {
    if (arm_counts(member) != want)
        throw ValidationError("permutation member violates the design's fixed counts");
}

// log of the multinomial coefficient, for the exhaustive-enumeration gate
double log_feasible_count(const std::map<Arm, int>& counts) {
    int n = 0;
    double lg = 0.0;
    for (auto& [arm, c] : counts) {
        n += c;
        lg -= std::lgamma(c + 1.0);
    }
    return lg + std::lgamma(n + 1.0);
}

// all fixed-count label vectors, lexicographic over arm order P4P < FW < Mixed
void enumerate_labels(std::vector<Arm>& current, std::map<Arm, int>& remaining, std::size_t pos,
                      std::vector<std::vector<Arm>>& out) {
    if (pos == current.size()) {
        out.push_back(current);
        return;
    }
    for (Arm a : {Arm::P4P, Arm::FW, Arm::Mixed}) {
        auto it = remaining.find(a);
        if (it == remaining.end() || it->second == 0) continue;
        it->second -= 1;
        current[pos] = a;
        enumerate_labels(current, remaining, pos + 1, out);
        it->second += 1;
    }
}

std::vector<std::vector<Arm>> all_members(const std::vector<Arm>& observed) {
    auto counts = arm_counts(observed);
    std::vector<Arm> current(observed.size(), Arm::FW);
    std::vector<std::vector<Arm>> out;
    enumerate_labels(current, counts, 0, out);
    return out;
}

std::vector<Arm> sample_member(const std::vector<Arm>& observed, Rng& rng) {
    std::vector<Arm> member = observed;
    rng.shuffle(member);
    return member;
}

// put the observed assignment at member 0
void promote_observed(std::vector<std::vector<Arm>>& members, const std::vector<Arm>& observed) {
    auto it = std::find(members.begin(), members.end(), observed);
    if (it == members.end()) throw ValidationError("observed assignment missing from enumeration");
    std::iter_swap(members.begin(), it);
}

std::vector<std::vector<Arm>> build_dimension(const std::vector<Arm>& observed, int count,
                                              std::uint64_t seed, std::string_view stage,
                                              std::int64_t cap, bool& exhaustive) {
    double logcap = std::log(static_cast<double>(cap));
    exhaustive = log_feasible_count(arm_counts(observed)) <= logcap + 1e-9;
    std::vector<std::vector<Arm>> members;
    if (exhaustive) {
        members = all_members(observed);
        if (static_cast<std::int64_t>(members.size()) > cap) {
            exhaustive = false;
        } else {
            promote_observed(members, observed);
            return members;
        }
    }
    members.clear();
    members.push_back(observed);
    for (int m = 1; m <= count; ++m) {
        Rng rng = Rng::substream(seed, stage, static_cast<std::uint64_t>(m));
        members.push_back(sample_member(observed, rng));
    }
    return members;
}

} // namespace

std::size_t PermutationSet::size() const {
    switch (dim) {
        case Dim::Advertised: return advertised.size();
        case Dim::Experienced: return experienced.size();
        case Dim::Joint: return advertised.size();
    }
    return 0;
}

Assignment PermutationSet::member(std::size_t i) const {
    const auto& adv = dim == Dim::Experienced ? advertised[0] : advertised[i];
    const auto& exp = dim == Dim::Advertised ? experienced[0] : experienced[i];
    return Assignment{std::span<const Arm>(adv), std::span<const Arm>(exp)};
}

PermutationSet PermutationSet::make_advertised(const std::vector<Arm>& observed_adv,
                                               const std::vector<Arm>& observed_exp, int count,
                                               std::uint64_t seed, std::int64_t cap) {
    PermutationSet set;
    set.dim = Dim::Advertised;
    set.advertised = build_dimension(observed_adv, count, seed, "ri.perm.adv", cap,
                                     set.exhaustive);
    set.experienced.push_back(observed_exp);
    auto want = arm_counts(observed_adv);
    for (const auto& m : set.advertised) check_counts(m, want);
    return set;
}

PermutationSet PermutationSet::make_advertised_redraw(const std::vector<Arm>& observed_adv,
                                                       const std::vector<Arm>& observed_exp,
                                                       int count, std::uint64_t seed) {
    PermutationSet set;
    set.dim = Dim::Advertised;
    set.exhaustive = false;
    set.advertised.push_back(observed_adv);
    set.experienced.push_back(observed_exp);
    // post pool implied by the observed market arms
    std::vector<Arm> posts;
    for (Arm a : observed_adv) {
        if (a == Arm::Mixed) {
            posts.push_back(Arm::P4P);
            posts.push_back(Arm::FW);
        } else {
            posts.push_back(a);
            posts.push_back(a);
        }
    }
    for (int m = 1; m <= count; ++m) {
        Rng rng = Rng::substream(seed, "ri.perm.adv.redraw", static_cast<std::uint64_t>(m));
        std::vector<Arm> shuffled = posts;
        rng.shuffle(shuffled);
        std::vector<Arm> member(observed_adv.size());
        for (std::size_t i = 0; i < member.size(); ++i) {
            Arm a = shuffled[2 * i], b = shuffled[2 * i + 1];
            member[i] = a == b ? a : Arm::Mixed;
        }
        set.advertised.push_back(std::move(member));
    }
    return set;
}

PermutationSet PermutationSet::make_experienced(const std::vector<Arm>& observed_adv,
                                                const std::vector<Arm>& observed_exp, int count,
                                                std::uint64_t seed, std::int64_t cap) {
    PermutationSet set;
    set.dim = Dim::Experienced;
    set.experienced = build_dimension(observed_exp, count, seed, "ri.perm.exp", cap,
                                      set.exhaustive);
    set.advertised.push_back(observed_adv);
    auto want = arm_counts(observed_exp);
    for (const auto& m : set.experienced) check_counts(m, want);
    return set;
}

PermutationSet PermutationSet::make_joint(const std::vector<Arm>& observed_adv,
                                          const std::vector<Arm>& observed_exp, int count,
                                          std::uint64_t seed, std::int64_t cap) {
    PermutationSet set;
    set.dim = Dim::Joint;
    double log_total = log_feasible_count(arm_counts(observed_adv)) +
                       log_feasible_count(arm_counts(observed_exp));
    if (log_total <= std::log(static_cast<double>(cap)) + 1e-9) {
        auto adv_all = all_members(observed_adv);
        auto exp_all = all_members(observed_exp);
        if (static_cast<std::int64_t>(adv_all.size()) *
                static_cast<std::int64_t>(exp_all.size()) <=
            cap) {
            set.exhaustive = true;
            for (const auto& a : adv_all) {
                for (const auto& e : exp_all) {
                    set.advertised.push_back(a);
                    set.experienced.push_back(e);
                }
            }
            // move the observed pair to the front
            for (std::size_t i = 0; i < set.advertised.size(); ++i) {
                if (set.advertised[i] == observed_adv && set.experienced[i] == observed_exp) {
                    std::swap(set.advertised[0], set.advertised[i]);
                    std::swap(set.experienced[0], set.experienced[i]);
                    break;
                }
            }
            return set;
        }
    }
    set.advertised.push_back(observed_adv);
    set.experienced.push_back(observed_exp);
    for (int m = 1; m <= count; ++m) {
        Rng arng = Rng::substream(seed, "ri.perm.joint.adv", static_cast<std::uint64_t>(m));
        Rng erng = Rng::substream(seed, "ri.perm.joint.exp", static_cast<std::uint64_t>(m));
        set.advertised.push_back(sample_member(observed_adv, arng));
        set.experienced.push_back(sample_member(observed_exp, erng));
    }
    return set;
}

double ks_statistic(std::span<const double> sample_a, std::span<const double> sample_b) {
    if (sample_a.empty() || sample_b.empty())
        throw EmptySample("KS statistic needs two non-empty samples");
    std::vector<double> a(sample_a.begin(), sample_a.end());
    std::vector<double> b(sample_b.begin(), sample_b.end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double best = 0.0;
    while (i < a.size() || j < b.size()) {
        double y = (i < a.size() && (j >= b.size() || a[i] <= b[j])) ? a[i] : b[j];
        while (i < a.size() && a[i] <= y) ++i;
        while (j < b.size() && b[j] <= y) ++j;
        best = std::max(best, std::abs(static_cast<double>(i) / na -
                                       static_cast<double>(j) / nb));
    }
    return best;
}

namespace {

TestResult pvalue_impl(const StatFn& statistic, const PermutationSet& perms, bool parallel) {
    const std::size_t M = perms.size();
    if (M == 0) throw ValidationError("empty permutation set");

    // observed member evaluated up front; its errors are the caller's problem
    double observed = statistic(perms.member(0));

    std::vector<double> stats(M, std::numeric_limits<double>::quiet_NaN());
    stats[0] = observed;
    auto body = [&](std::int64_t m) {
        if (m == 0) return;
        try {
            stats[m] = statistic(perms.member(static_cast<std::size_t>(m)));
        } catch (const std::exception&) {
            stats[m] = std::numeric_limits<double>::quiet_NaN();
        }
    };
    if (parallel) par::for_index(static_cast<std::int64_t>(M), body);
    else par::for_index_serial(static_cast<std::int64_t>(M), body);

    TestResult result;
    result.observed = observed;
    int as_extreme = 0;
    for (std::size_t m = 1; m < M; ++m) {
        if (std::isnan(stats[m])) {
            ++result.m_failed;
            continue;
        }
        ++result.m_used;
        if (std::abs(stats[m]) >= std::abs(observed)) ++as_extreme;
    }
    if (result.m_failed > 0 &&
        result.m_failed * 100 > static_cast<int>(M - 1)) {
        std::string failing;
        int listed = 0;
        for (std::size_t m = 1; m < M && listed < 8; ++m) {
            if (std::isnan(stats[m])) {
                failing += (listed ? "," : "") + std::to_string(m);
                ++listed;
            }
        }
        throw StatisticFailure("statistic failed on " + std::to_string(result.m_failed) + " of " +
                               std::to_string(M - 1) + " permutations (members " + failing + ")");
    }
    result.p_value = (1.0 + as_extreme) / (1.0 + result.m_used);
    return result;
}

} // namespace

TestResult ri_pvalue(const StatFn& statistic, const PermutationSet& perms) {
    return pvalue_impl(statistic, perms, true);
}

TestResult ri_pvalue_serial(const StatFn& statistic, const PermutationSet& perms) {
    return pvalue_impl(statistic, perms, false);
}

TestResult joint_permute(const StatFn& statistic, const PermutationSet& perms) {
    if (perms.dim != Dim::Joint)
        throw ValidationError("joint_permute needs a joint permutation set");
    return ri_pvalue(statistic, perms);
}

CiResult ci_invert(const std::function<double(double)>& pvalue_at, const GridSpec& grid,
                   double alpha) {
    if (!(grid.lo < grid.hi)) throw ValidationError("ci_invert: empty grid");
    CiResult out;
    auto accepted = [&](double delta) { return pvalue_at(delta) > alpha; };

    bool lo_acc = accepted(grid.lo);
    bool hi_acc = accepted(grid.hi);
    out.unbounded_lo = lo_acc;
    out.unbounded_hi = hi_acc;

    // find an accepted point to bracket from
    double inner = std::numeric_limits<double>::quiet_NaN();
    if (lo_acc) inner = grid.lo;
    else if (hi_acc) inner = grid.hi;
    else {
        const int kScan = 32;
        for (int i = 1; i < kScan; ++i) {
            double d = grid.lo + (grid.hi - grid.lo) * i / kScan;
            if (accepted(d)) {
                inner = d;
                break;
            }
        }
    }
    if (std::isnan(inner)) {
        out.empty = true;
        out.lo = out.hi = 0.0;
        return out;
    }

    if (lo_acc) {
        out.lo = grid.lo;
    } else {
        double rej = grid.lo, acc = inner;
        while (acc - rej > grid.tol) {
            double mid = 0.5 * (rej + acc);
            if (accepted(mid)) acc = mid;
            else rej = mid;
        }
        out.lo = acc;
    }
    if (hi_acc) {
        out.hi = grid.hi;
    } else {
        double acc = inner, rej = grid.hi;
        while (rej - acc > grid.tol) {
            double mid = 0.5 * (acc + rej);
            if (accepted(mid)) acc = mid;
            else rej = mid;
        }
        out.hi = acc;
    }
    return out;
}

CiResult ci_invert_shift(std::span<const double> outcomes, std::span<const unsigned char> treated,
                         const std::function<double(std::span<const double>, const Assignment&)>&
                             statistic,
                         const PermutationSet& perms, const GridSpec& grid, double alpha) {
    if (outcomes.size() != treated.size())
        throw ValidationError("ci_invert_shift: treated mask length mismatch");
    std::vector<double> adjusted(outcomes.begin(), outcomes.end());
    auto pvalue_at = [&](double delta) {
        for (std::size_t i = 0; i < adjusted.size(); ++i)
            adjusted[i] = outcomes[i] - (treated[i] ? delta : 0.0);
        StatFn stat = [&](const Assignment& a) {
            return statistic(std::span<const double>(adjusted), a);
        };
        return ri_pvalue_serial(stat, perms).p_value;
    };
    return ci_invert(pvalue_at, grid, alpha);
}

} // namespace p4p::ri
