#pragma once

// Regression backbone: weighted least squares with cluster-robust standard
// errors, and a random-intercept linear mixed model fit by maximum
// likelihood with the variance ratio profiled out.

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace p4p::reg {

struct Design {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    Eigen::VectorXd w;               // empty -> unit weights
    std::vector<std::string> names;  // one per column of X
    std::vector<int> cluster;        // empty -> heteroskedasticity-robust
    std::vector<int> group;          // random-intercept level (LMM only)
    int n_core = 0; // leading columns that may not be dropped as collinear
};

struct OlsFit {
    std::vector<std::string> names;
    Eigen::VectorXd beta;
    Eigen::VectorXd se;
    Eigen::VectorXd fitted;
    Eigen::VectorXd residuals;
    std::vector<std::string> dropped; // collinear columns removed
    double sigma2 = 0.0;
    long long n = 0;
    int k = 0;
    int n_clusters = 0;
    double coef(const std::string& name) const;
    double stderr_of(const std::string& name) const;
    double tstat(const std::string& name) const;
};

// Throws RankDeficient when a core column is collinear.
OlsFit fit_wls(const Design& design);

struct LmmFit {
    std::vector<std::string> names;
    Eigen::VectorXd beta;
    Eigen::VectorXd se;
    std::vector<std::string> dropped;
    double sigma2_resid = 0.0;
    double sigma2_group = 0.0; // random-intercept variance
    double log_likelihood = 0.0;
    bool boundary = false; // variance ratio pinned at zero
    long long n = 0;
    int n_groups = 0;
    double coef(const std::string& name) const;
    double stderr_of(const std::string& name) const;
    double zstat(const std::string& name) const;
};

// Maximum-likelihood random-intercept model; the variance ratio is found by
// bounded one-dimensional search, convergence at relative log-likelihood
// change < 1e-9.
LmmFit fit_random_intercept(const Design& design);

// Gaussian log-likelihood of the OLS fit (used by boundary checks).
double ols_log_likelihood(const OlsFit& fit);

} // namespace p4p::reg
