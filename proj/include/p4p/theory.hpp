#pragma once

// Occupational-choice model behind the contract experiment: quadratic effort
// costs, uniform performance noise, and tournament vs fixed-wage vs outside
// compensation.  All operations are pure; Monte Carlo draws are partitioned
// by seed and draw index.

#include <cstdint>
#include <string>

#include "p4p/rng.hpp"

namespace p4p::theory {

enum class Scheme { FW, P4P, Outside };

// Advertised arm of a labor market.  Mixed markets offer both pure contracts
// and an applicant takes the better one.
enum class Arm { FW, P4P, Mixed };

std::string to_string(Scheme s);
std::string to_string(Arm a);
Arm arm_from_string(const std::string& s);

struct TeacherType {
    double tau = 0.0;   // intrinsic motivation, >= 0
    double theta = 1.0; // ability, >= 1
};

struct ContractMenu {
    double w_outside = 50.0;    // outside-option wage, paid when m >= m_under
    double bonus_b = 40.0;      // tournament bonus, paid when m >= m_bar
    double w_guaranteed = 15.0; // tournament base wage
    double w_fixed = 17.0;      // fixed-wage contract (w_guaranteed + 2 by default)
    double m_bar = 4.5;         // tournament threshold
    double m_under = 1.0;       // outside-sector threshold
    double eps_lo = -5.0;
    double eps_hi = 5.0;
    // real-contract amounts, RWF
    std::int64_t payout_p4p_rwf = 100000;
    std::int64_t payout_fw_rwf = 20000;
    std::int64_t retention_bonus_rwf = 80000;

    void validate() const; // throws ConfigError
    double eps_width() const { return eps_hi - eps_lo; }
};

struct TypeDistribution {
    double tau_lo = 0.0;
    double tau_hi = 10.0;
    double theta_lo = 1.0;
    double theta_hi = 5.0;

    void validate() const;
    TeacherType draw(Rng& rng) const;
};

// Optimal effort under each scheme.  Interior by the quadratic cost; clamped
// at zero for degenerate menus, with the clamp counted.
double effort(const TeacherType& type, Scheme scheme, const ContractMenu& menu);
std::int64_t effort_clamp_count();
void reset_effort_clamp_count();

// Pr[theta*e + eps > threshold] for eps ~ U[eps_lo, eps_hi].
double win_prob(double e, double theta, double threshold, const ContractMenu& menu);

// Expected payoff at the scheme's optimal effort.
double expected_payoff(const TeacherType& type, Scheme scheme, const ContractMenu& menu);

// Motivation level where a teacher of given ability is indifferent between
// the arm and the outside sector.  Returns dist.tau_lo when teaching
// dominates the whole support and dist.tau_hi when it is dominated.
// Throws NonMonotoneIndifference if the payoff gap changes sign more than
// once on the search grid.
double selection_boundary(Scheme arm, double theta, const ContractMenu& menu,
                          const TypeDistribution& dist);

// Application decision; indifferent types apply.  Mixed-arm applicants
// evaluate the better of the two pure contracts.
bool applies(const TeacherType& type, Arm arm, const ContractMenu& menu);

// Preferred pure scheme for an applicant facing the given advertised arm.
Scheme preferred_scheme(const TeacherType& type, Arm arm, const ContractMenu& menu);

struct Decomposition {
    // E[m^a]-E[m^b]: performance gap across application arms among those
    // experiencing FW (pure selection), and the same under experienced P4P.
    double selection_fw = 0.0;
    double selection_fw_se = 0.0;
    double selection_p4p = 0.0;
    double selection_p4p_se = 0.0;
    // E[m^a]-E[m^c] and E[m^b]-E[m^d]: experienced-contract gap within an
    // application pool (pure incentive).
    double incentive_fw_applicants = 0.0;
    double incentive_fw_se = 0.0;
    double incentive_p4p_applicants = 0.0;
    double incentive_p4p_se = 0.0;
    std::int64_t n_draws = 0;
    std::int64_t n_apply_fw = 0;
    std::int64_t n_apply_p4p = 0;
};

// Monte Carlo estimate of the four expected-performance differences.
// Throws EmptyApplicantSet when no sampled type applies under an arm.
Decomposition decompose_effects(const ContractMenu& menu, const TypeDistribution& dist,
                                std::int64_t n_draws, std::uint64_t seed);

} // namespace p4p::theory
