#include "p4p/theory.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <vector>

#include "p4p/errors.hpp"
#include "p4p/parallel.hpp"
#include "p4p/stats.hpp"

namespace p4p::theory {

namespace {
std::atomic<std::int64_t> g_effort_clamps{0};
}

std::string to_string(Scheme s) {
    switch (s) {
        case Scheme::FW: return "FW";
        case Scheme::P4P: return "P4P";
        case Scheme::Outside: return "OUTSIDE";
    }
    return "?";
}

std::string to_string(Arm a) {
    switch (a) {
        case Arm::FW: return "FW";
        case Arm::P4P: return "P4P";
        case Arm::Mixed: return "MIXED";
    }
    return "?";
}

Arm arm_from_string(const std::string& s) {
    if (s == "FW") return Arm::FW;
    if (s == "P4P") return Arm::P4P;
    if (s == "MIXED") return Arm::Mixed;
    throw ConfigError("unknown arm label: '" + s + "'");
}

void ContractMenu::validate() const {
    if (!(eps_lo < eps_hi)) throw ConfigError("contract menu: need eps_lo < eps_hi");
    if (!(m_under <= m_bar)) throw ConfigError("contract menu: need m_under <= m_bar");
    if (w_outside < 0 || bonus_b < 0 || w_guaranteed < 0 || w_fixed < 0)
        throw ConfigError("contract menu: wages must be non-negative");
}

void TypeDistribution::validate() const {
    if (!(tau_lo < tau_hi)) throw ConfigError("type distribution: need tau_lo < tau_hi");
    if (!(theta_lo < theta_hi)) throw ConfigError("type distribution: need theta_lo < theta_hi");
    if (tau_lo < 0.0) throw ConfigError("type distribution: tau support must be >= 0");
    if (theta_lo < 1.0) throw ConfigError("type distribution: theta support must be >= 1");
}

TeacherType TypeDistribution::draw(Rng& rng) const {
    TeacherType t;
    t.tau = rng.uniform(tau_lo, tau_hi);
    t.theta = rng.uniform(theta_lo, theta_hi);
    return t;
}

double effort(const TeacherType& type, Scheme scheme, const ContractMenu& menu) {
    double e = 0.0;
    switch (scheme) {
        case Scheme::FW: e = type.tau / 2.0; break;
        case Scheme::P4P:
            e = type.theta * menu.bonus_b / (2.0 * menu.eps_width()) + type.tau / 2.0;
            break;
        case Scheme::Outside:
            e = type.theta * menu.w_outside / (2.0 * menu.eps_width());
            break;
    }
    if (e < 0.0) {
        g_effort_clamps.fetch_add(1, std::memory_order_relaxed);
        e = 0.0;
    }
    return e;
}

std::int64_t effort_clamp_count() { return g_effort_clamps.load(); }
void reset_effort_clamp_count() { g_effort_clamps.store(0); }

double win_prob(double e, double theta, double threshold, const ContractMenu& menu) {
    double p = (menu.eps_hi - (threshold - theta * e)) / menu.eps_width();
    return std::clamp(p, 0.0, 1.0);
}

double expected_payoff(const TeacherType& type, Scheme scheme, const ContractMenu& menu) {
    double e = effort(type, scheme, menu);
    switch (scheme) {
        case Scheme::FW:
            return menu.w_fixed - e * e + type.tau * e;
        case Scheme::P4P:
            return win_prob(e, type.theta, menu.m_bar, menu) * menu.bonus_b + menu.w_guaranteed -
                   e * e + type.tau * e;
        case Scheme::Outside:
            return win_prob(e, type.theta, menu.m_under, menu) * menu.w_outside - e * e;
    }
    return 0.0;
}

double selection_boundary(Scheme arm, double theta, const ContractMenu& menu,
                          const TypeDistribution& dist) {
    menu.validate();
    auto gap = [&](double tau) {
        TeacherType t{tau, theta};
        return expected_payoff(t, arm, menu) - expected_payoff(t, Scheme::Outside, menu);
    };

    // The gap should be strictly increasing in tau; a second sign change on
    // the grid means the menu is outside the model's assumptions.
    constexpr int kGrid = 64;
    int sign_changes = 0;
    double prev = gap(dist.tau_lo);
    for (int i = 1; i <= kGrid; ++i) {
        double tau = dist.tau_lo + (dist.tau_hi - dist.tau_lo) * i / kGrid;
        double g = gap(tau);
        if ((prev < 0.0 && g >= 0.0) || (prev >= 0.0 && g < 0.0)) ++sign_changes;
        prev = g;
    }
    if (sign_changes > 1)
        throw NonMonotoneIndifference("payoff gap changes sign " + std::to_string(sign_changes) +
                                      " times on [tau_lo, tau_hi] at theta=" +
                                      std::to_string(theta));

    if (gap(dist.tau_lo) >= 0.0) return dist.tau_lo; // teaching dominates everywhere
    if (gap(dist.tau_hi) < 0.0) return dist.tau_hi;  // outside dominates everywhere

    double lo = dist.tau_lo, hi = dist.tau_hi;
    for (int it = 0; it < 200 && hi - lo > 1e-8; ++it) {
        double mid = 0.5 * (lo + hi);
        if (gap(mid) >= 0.0) hi = mid;
        else lo = mid;
    }
    // the accepted endpoint: the returned type itself applies (ties teach)
    return hi;
}

bool applies(const TeacherType& type, Arm arm, const ContractMenu& menu) {
    double outside = expected_payoff(type, Scheme::Outside, menu);
    double teach = 0.0;
    switch (arm) {
        case Arm::FW: teach = expected_payoff(type, Scheme::FW, menu); break;
        case Arm::P4P: teach = expected_payoff(type, Scheme::P4P, menu); break;
        case Arm::Mixed:
            teach = std::max(expected_payoff(type, Scheme::FW, menu),
                             expected_payoff(type, Scheme::P4P, menu));
            break;
    }
    return teach >= outside; // ties apply
}

Scheme preferred_scheme(const TeacherType& type, Arm arm, const ContractMenu& menu) {
    switch (arm) {
        case Arm::FW: return Scheme::FW;
        case Arm::P4P: return Scheme::P4P;
        case Arm::Mixed:
            return expected_payoff(type, Scheme::P4P, menu) >=
                           expected_payoff(type, Scheme::FW, menu)
                       ? Scheme::P4P
                       : Scheme::FW;
    }
    return Scheme::FW;
}

Decomposition decompose_effects(const ContractMenu& menu, const TypeDistribution& dist,
                                std::int64_t n_draws, std::uint64_t seed) {
    menu.validate();
    dist.validate();
    if (n_draws <= 0) throw ConfigError("decompose_effects: n_draws must be positive");

    std::vector<double> sel_fw(n_draws), sel_p4p(n_draws), inc_fw(n_draws), inc_p4p(n_draws);
    std::vector<unsigned char> in_fw(n_draws), in_p4p(n_draws);

    par::for_index(n_draws, [&](std::int64_t i) {
        Rng rng = Rng::substream(seed, "theory.decompose", static_cast<std::uint64_t>(i));
        TeacherType t = dist.draw(rng);
        double f = applies(t, Arm::FW, menu) ? 1.0 : 0.0;
        double p = applies(t, Arm::P4P, menu) ? 1.0 : 0.0;
        double m_fw = t.theta * effort(t, Scheme::FW, menu);
        double m_p4p = t.theta * effort(t, Scheme::P4P, menu);
        sel_fw[i] = m_fw * (f - p);
        sel_p4p[i] = m_p4p * (f - p);
        inc_fw[i] = (m_fw - m_p4p) * f;
        inc_p4p[i] = (m_fw - m_p4p) * p;
        in_fw[i] = static_cast<unsigned char>(f);
        in_p4p[i] = static_cast<unsigned char>(p);
    });

    Decomposition d;
    d.n_draws = n_draws;
    for (std::int64_t i = 0; i < n_draws; ++i) {
        d.n_apply_fw += in_fw[i];
        d.n_apply_p4p += in_p4p[i];
    }
    if (d.n_apply_fw == 0) throw EmptyApplicantSet("no sampled type applies under advertised FW");
    if (d.n_apply_p4p == 0) throw EmptyApplicantSet("no sampled type applies under advertised P4P");

    auto mean_se = [&](const std::vector<double>& v, double& m, double& se) {
        m = stats::mean(v);
        se = stats::sample_sd(v) / std::sqrt(static_cast<double>(v.size()));
    };
    mean_se(sel_fw, d.selection_fw, d.selection_fw_se);
    mean_se(sel_p4p, d.selection_p4p, d.selection_p4p_se);
    mean_se(inc_fw, d.incentive_fw_applicants, d.incentive_fw_se);
    mean_se(inc_p4p, d.incentive_p4p_applicants, d.incentive_p4p_se);
    return d;
}

} // namespace p4p::theory
