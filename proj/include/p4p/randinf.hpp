#pragma once

// Randomization inference over the design's feasible assignments: fixed-count
// permutation sets (exhaustive when small, sampled otherwise), exact
// two-sample KS statistic, permutation p-values with the add-one convention,
// confidence intervals by test inversion, and the power-simulation harness.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "p4p/theory.hpp"
#include "p4p/world.hpp"

namespace p4p::ri {

using theory::Arm;

struct Assignment {
    std::span<const Arm> advertised;
    std::span<const Arm> experienced;
};

// Must be pure: same assignment, same value.  May throw; failures on more
// than 1% of members raise StatisticFailure.
using StatFn = std::function<double(const Assignment&)>;

enum class Dim { Advertised, Experienced, Joint };

struct PermutationSet {
    Dim dim = Dim::Experienced;
    bool exhaustive = false;
    // member 0 is always the observed assignment
    std::vector<std::vector<Arm>> advertised;
    std::vector<std::vector<Arm>> experienced;

    std::size_t size() const;
    Assignment member(std::size_t i) const;

    static constexpr std::int64_t kDefaultCap = 1000000;
    static constexpr int kDefaultCount = 2000;

    static PermutationSet make_advertised(const std::vector<Arm>& observed_adv,
                                          const std::vector<Arm>& observed_exp, int count,
                                          std::uint64_t seed,
                                          std::int64_t exhaustive_cap = kDefaultCap);
    // First-tier draw at the subject-post level: each market holds two
    // posts, post labels are permuted with fixed counts, and a market's arm
    // is the combination, so the mixed-arm composition varies across
    // members.  Always sampled.
    static PermutationSet make_advertised_redraw(const std::vector<Arm>& observed_adv,
                                                 const std::vector<Arm>& observed_exp, int count,
                                                 std::uint64_t seed);
    static PermutationSet make_experienced(const std::vector<Arm>& observed_adv,
                                           const std::vector<Arm>& observed_exp, int count,
                                           std::uint64_t seed,
                                           std::int64_t exhaustive_cap = kDefaultCap);
    static PermutationSet make_joint(const std::vector<Arm>& observed_adv,
                                     const std::vector<Arm>& observed_exp, int count,
                                     std::uint64_t seed,
                                     std::int64_t exhaustive_cap = kDefaultCap);
};

struct TestResult {
    double observed = 0.0;
    double p_value = 1.0;
    int m_used = 0;   // evaluated non-observed members
    int m_failed = 0; // members where the statistic errored
    std::string stat_kind = "stat";
    // inverted confidence interval, when requested
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    bool has_ci = false;
    bool ci_unbounded_lo = false;
    bool ci_unbounded_hi = false;
};

// Exact sup-distance between empirical CDFs at pooled points.
double ks_statistic(std::span<const double> sample_a, std::span<const double> sample_b);

// p = (1 + #{m >= 1 : |stat_m| >= |stat_0|}) / (1 + M').  Parallel over
// members; the reduction runs in member order.
TestResult ri_pvalue(const StatFn& statistic, const PermutationSet& perms);
TestResult ri_pvalue_serial(const StatFn& statistic, const PermutationSet& perms);

struct GridSpec {
    double lo = -1.0;
    double hi = 1.0;
    double tol = 1e-3; // endpoint bracketing resolution
};

struct CiResult {
    double lo = 0.0;
    double hi = 0.0;
    bool unbounded_lo = false;
    bool unbounded_hi = false;
    bool empty = false;
};

// Inverts H0: additive effect = delta via a caller-supplied p(delta).
CiResult ci_invert(const std::function<double(double)>& pvalue_at, const GridSpec& grid,
                   double alpha = 0.05);

// Convenience wrapper: shifts treated outcomes by -delta and re-runs the
// permutation test of the sharp null.
CiResult ci_invert_shift(std::span<const double> outcomes,
                         std::span<const unsigned char> treated,
                         const std::function<double(std::span<const double>, const Assignment&)>&
                             statistic,
                         const PermutationSet& perms, const GridSpec& grid, double alpha = 0.05);

// Simultaneous permutation of both treatment tiers.
TestResult joint_permute(const StatFn& statistic, const PermutationSet& perms);

// -------- blinded-style power harness --------

struct PowerPoint {
    std::string test;
    double delta = 0.0;
    double power = 0.0;
    int n_sims = 0;
    int rejections = 0;
};

struct PowerOptions {
    std::vector<double> deltas{0.0, 0.05, 0.1, 0.15, 0.2};
    std::vector<std::string> tests{"ks", "ols"}; // applicant-score tests
    int n_sims = 500;
    int permutations = 299;
    double alpha = 0.05;
};

// Simulates applicant pools from the world template, injects an additive
// score shift in advertised-P4P markets, and records each test's rejection
// rate under market-level randomization inference.
std::vector<PowerPoint> power_harness(const world::WorldConfig& config,
                                      const theory::ContractMenu& menu,
                                      const theory::TypeDistribution& dist,
                                      const PowerOptions& opts, std::uint64_t seed);

} // namespace p4p::ri
