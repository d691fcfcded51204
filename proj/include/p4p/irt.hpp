#pragma once

// Two-parameter logistic IRT: marginal maximum likelihood by EM over a
// Gauss-Hermite grid with a standard-normal ability prior, and posterior-mean
// (EAP) ability scores.  Rounds are scored separately; no linking.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace p4p::irt {

constexpr std::int8_t kMissing = -1;

struct ResponseMatrix {
    std::vector<std::string> respondent_ids;
    std::vector<std::string> item_ids;
    std::vector<std::int8_t> cells; // row-major, 0/1/kMissing

    int n_resp() const { return static_cast<int>(respondent_ids.size()); }
    int n_items() const { return static_cast<int>(item_ids.size()); }
    std::int8_t at(int r, int j) const { return cells[static_cast<std::size_t>(r) * item_ids.size() + j]; }
    void set(int r, int j, std::int8_t v) { cells[static_cast<std::size_t>(r) * item_ids.size() + j] = v; }

    static ResponseMatrix zeros(std::vector<std::string> respondents, std::vector<std::string> items);
    void validate() const; // >=2 items, >=2 respondents, no all-missing row/column
};

struct ItemParams {
    std::vector<std::string> item_ids; // retained items only
    std::vector<double> discrimination;
    std::vector<double> difficulty;
    std::vector<std::string> dropped_items; // all-correct / all-wrong, removed with warning
    double log_likelihood = 0.0;
    int em_iterations = 0;
};

struct FitOptions {
    int quad_nodes = 41;
    double tol = 1e-4;  // max absolute parameter change between EM sweeps
    int max_iter = 500;
};

// Quadrature grid for an N(0,1) prior: nodes and weights summing to 1.
void gauss_hermite_normal(int n, std::vector<double>& nodes, std::vector<double>& weights);

ItemParams fit_2pl(const ResponseMatrix& responses, const FitOptions& opts = {});

struct AbilityScore {
    std::string respondent_id;
    double eap = 0.0;
    double posterior_sd = 1.0;
    int n_observed = 0;
};

std::vector<AbilityScore> eap_score(const ResponseMatrix& responses, const ItemParams& items,
                                    int quad_nodes = 41);
// serial reference for the parallel kernel above
std::vector<AbilityScore> eap_score_serial(const ResponseMatrix& responses, const ItemParams& items,
                                           int quad_nodes = 41);

// Subtract the reference group's mean and divide by its sample SD.
std::vector<double> standardize(std::span<const double> scores,
                                std::span<const unsigned char> in_reference);

} // namespace p4p::irt
