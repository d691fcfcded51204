#include "p4p/regress.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "p4p/errors.hpp"

namespace p4p::reg {

namespace {

double lookup(const std::vector<std::string>& names, const Eigen::VectorXd& v,
              const std::string& name) {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return v(static_cast<Eigen::Index>(i));
    throw ValidationError("no coefficient named '" + name + "'");
}

// In-order rank detection: a semidefinite Cholesky sweep over the (weighted)
// Gram matrix that skips columns lying in the span of earlier ones.  Earlier
// columns win ties, so core regressors are only dropped when they are
// themselves degenerate, which raises RankDeficient.
std::vector<int> select_columns(const Eigen::MatrixXd& X, const Eigen::VectorXd& w,
                                const std::vector<std::string>& names, int n_core,
                                std::vector<std::string>& dropped) {
    const int k = static_cast<int>(X.cols());
    Eigen::MatrixXd G;
    if (w.size()) G = X.transpose() * w.asDiagonal() * X;
    else G.noalias() = X.transpose() * X;

    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(k, k);
    std::vector<int> kept;
    for (int j = 0; j < k; ++j) {
        double d = G(j, j);
        for (int m = 0; m < static_cast<int>(kept.size()); ++m) d -= L(j, m) * L(j, m);
        if (!(d > 1e-10 * std::max(G(j, j), 1e-30))) {
            if (j < n_core)
                throw RankDeficient("core regressor '" + names[j] + "' is collinear");
            dropped.push_back(names[j]);
            continue;
        }
        int col = static_cast<int>(kept.size());
        L(j, col) = std::sqrt(d);
        for (int i = j + 1; i < k; ++i) {
            double s = G(i, j);
            for (int m = 0; m < col; ++m) s -= L(i, m) * L(j, m);
            L(i, col) = s / L(j, col);
        }
        kept.push_back(j);
    }
    return kept;
}

Eigen::MatrixXd subset_cols(const Eigen::MatrixXd& X, const std::vector<int>& cols) {
    Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = X.col(cols[j]);
    return out;
}

} // namespace

double OlsFit::coef(const std::string& name) const { return lookup(names, beta, name); }
double OlsFit::stderr_of(const std::string& name) const { return lookup(names, se, name); }
double OlsFit::tstat(const std::string& name) const {
    return coef(name) / stderr_of(name);
}

double LmmFit::coef(const std::string& name) const { return lookup(names, beta, name); }
double LmmFit::stderr_of(const std::string& name) const { return lookup(names, se, name); }
double LmmFit::zstat(const std::string& name) const { return coef(name) / stderr_of(name); }

OlsFit fit_wls(const Design& design) {
    const auto n = design.X.rows();
    if (n == 0) throw EmptySample("regression has no rows");
    if (design.y.rows() != n) throw ValidationError("outcome length mismatch");
    if (static_cast<Eigen::Index>(design.names.size()) != design.X.cols())
        throw ValidationError("column name count mismatch");

    Eigen::VectorXd w = design.w.size() ? design.w : Eigen::VectorXd::Ones(n);
    OlsFit fit;
    auto kept = select_columns(design.X, design.w, design.names, design.n_core, fit.dropped);
    Eigen::MatrixXd X = subset_cols(design.X, kept);
    for (int j : kept) fit.names.push_back(design.names[j]);

    const int k = static_cast<int>(X.cols());
    Eigen::MatrixXd XtW = X.transpose() * w.asDiagonal();
    Eigen::MatrixXd XtWX = XtW * X;
    Eigen::VectorXd XtWy = XtW * design.y;
    Eigen::LDLT<Eigen::MatrixXd> solver(XtWX);
    if (solver.info() != Eigen::Success) throw RankDeficient("normal equations not positive definite");
    fit.beta = solver.solve(XtWy);
    fit.fitted = X * fit.beta;
    fit.residuals = design.y - fit.fitted;
    fit.n = n;
    fit.k = k;
    double wsum = w.sum();
    fit.sigma2 = (fit.residuals.array().square() * w.array()).sum() /
                 std::max(wsum - k, 1.0);

    Eigen::MatrixXd bread = solver.solve(Eigen::MatrixXd::Identity(k, k));
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
    double dof_c;
    const double nn = static_cast<double>(n);
    if (design.cluster.empty()) {
        // HC1
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::VectorXd xi = X.row(i).transpose() * (w(i) * fit.residuals(i));
            meat.noalias() += xi * xi.transpose();
        }
        fit.n_clusters = static_cast<int>(n);
        dof_c = nn / (nn - k);
    } else {
        std::map<int, Eigen::VectorXd> sums;
        for (Eigen::Index i = 0; i < n; ++i) {
            auto it = sums.try_emplace(design.cluster[i], Eigen::VectorXd::Zero(k)).first;
            it->second.noalias() += X.row(i).transpose() * (w(i) * fit.residuals(i));
        }
        for (const auto& [cid, s] : sums) meat.noalias() += s * s.transpose();
        fit.n_clusters = static_cast<int>(sums.size());
        const double g = static_cast<double>(fit.n_clusters);
        if (g < 2) throw ValidationError("cluster-robust errors need at least 2 clusters");
        dof_c = g / (g - 1.0) * (nn - 1.0) / (nn - k);
    }
    Eigen::MatrixXd vcov = dof_c * bread * meat * bread;
    fit.se = vcov.diagonal().array().max(0.0).sqrt();
    return fit;
}

double ols_log_likelihood(const OlsFit& fit) {
    double rss = fit.residuals.squaredNorm();
    double n = static_cast<double>(fit.n);
    double s2 = rss / n;
    return -0.5 * n * (std::log(2.0 * std::numbers::pi * s2) + 1.0);
}

namespace {

struct LmmWork {
    Eigen::MatrixXd XtX;
    Eigen::VectorXd Xty;
    double yty = 0.0;
    Eigen::MatrixXd S;      // per-group column sums of X (G x k)
    Eigen::VectorXd t;      // per-group sums of y
    Eigen::VectorXd ng;     // group sizes
    long long n = 0;
    int k = 0;
    int G = 0;
};

struct LmmEval {
    double loglik;
    Eigen::VectorXd beta;
    Eigen::MatrixXd A; // X' V^-1 X * sigma2 (shape only)
    double sigma2;
};

LmmEval eval_lambda(const LmmWork& w, double lambda) {
    Eigen::VectorXd c(w.G);
    for (int g = 0; g < w.G; ++g) c(g) = lambda / (1.0 + w.ng(g) * lambda);

    Eigen::MatrixXd A = w.XtX - w.S.transpose() * c.asDiagonal() * w.S;
    Eigen::VectorXd b = w.Xty - w.S.transpose() * (c.asDiagonal() * w.t);
    Eigen::LDLT<Eigen::MatrixXd> solver(A);
    Eigen::VectorXd beta = solver.solve(b);

    // generalized RSS: sum_g r'(I - c J)r
    double rss = w.yty - 2.0 * beta.dot(w.Xty) + beta.dot(w.XtX * beta);
    Eigen::VectorXd gr = w.t - w.S * beta; // per-group residual sums
    for (int g = 0; g < w.G; ++g) rss -= c(g) * gr(g) * gr(g);

    const double n = static_cast<double>(w.n);
    double sigma2 = rss / n;
    double logdet = 0.0;
    for (int g = 0; g < w.G; ++g) logdet += std::log1p(w.ng(g) * lambda);
    double ll = -0.5 * (n * std::log(2.0 * std::numbers::pi * sigma2) + logdet + n);
    return {ll, std::move(beta), std::move(A), sigma2};
}

} // namespace

LmmFit fit_random_intercept(const Design& design) {
    const auto n = design.X.rows();
    if (n == 0) throw EmptySample("mixed model has no rows");
    if (static_cast<Eigen::Index>(design.group.size()) != n)
        throw ValidationError("mixed model needs a group id per row");

    LmmFit fit;
    auto kept = select_columns(design.X, Eigen::VectorXd(), design.names, design.n_core,
                               fit.dropped);
    Eigen::MatrixXd X = subset_cols(design.X, kept);
    for (int j : kept) fit.names.push_back(design.names[j]);

    LmmWork w;
    w.k = static_cast<int>(X.cols());
    w.n = n;
    w.XtX = X.transpose() * X;
    w.Xty = X.transpose() * design.y;
    w.yty = design.y.squaredNorm();

    std::map<int, int> gid;
    for (Eigen::Index i = 0; i < n; ++i) gid.try_emplace(design.group[i], static_cast<int>(gid.size()));
    w.G = static_cast<int>(gid.size());
    w.S = Eigen::MatrixXd::Zero(w.G, w.k);
    w.t = Eigen::VectorXd::Zero(w.G);
    w.ng = Eigen::VectorXd::Zero(w.G);
    for (Eigen::Index i = 0; i < n; ++i) {
        int g = gid[design.group[i]];
        w.S.row(g) += X.row(i);
        w.t(g) += design.y(i);
        w.ng(g) += 1.0;
    }

    // golden-section search on log(lambda); the profile likelihood of a
    // single variance ratio is unimodal
    const double lo_l = std::log(1e-8), hi_l = std::log(1e6);
    const double gr_ratio = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo_l, b = hi_l;
    double x1 = b - gr_ratio * (b - a);
    double x2 = a + gr_ratio * (b - a);
    double f1 = eval_lambda(w, std::exp(x1)).loglik;
    double f2 = eval_lambda(w, std::exp(x2)).loglik;
    double best_prev = std::max(f1, f2);
    for (int it = 0; it < 200; ++it) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr_ratio * (b - a);
            f2 = eval_lambda(w, std::exp(x2)).loglik;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr_ratio * (b - a);
            f1 = eval_lambda(w, std::exp(x1)).loglik;
        }
        double best = std::max(f1, f2);
        if (it > 8 && std::abs(best - best_prev) <
                          1e-9 * (std::abs(best) + 1.0))
            break;
        best_prev = best;
    }
    double lambda = std::exp(0.5 * (a + b));

    // compare against the boundary at zero
    auto at_zero = eval_lambda(w, 0.0);
    auto at_opt = eval_lambda(w, lambda);
    if (at_zero.loglik >= at_opt.loglik) {
        lambda = 0.0;
        at_opt = std::move(at_zero);
        fit.boundary = true;
    }

    fit.beta = at_opt.beta;
    fit.sigma2_resid = at_opt.sigma2;
    fit.sigma2_group = lambda * at_opt.sigma2;
    fit.log_likelihood = at_opt.loglik;
    fit.n = n;
    fit.n_groups = w.G;

    Eigen::LDLT<Eigen::MatrixXd> asolver(at_opt.A);
    Eigen::MatrixXd cov = at_opt.sigma2 *
                          asolver.solve(Eigen::MatrixXd::Identity(w.k, w.k));
    fit.se = cov.diagonal().array().max(0.0).sqrt();
    return fit;
}

} // namespace p4p::reg
