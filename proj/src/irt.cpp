#include "p4p/irt.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <numbers>

#include "p4p/errors.hpp"
#include "p4p/parallel.hpp"
#include "p4p/stats.hpp"

namespace p4p::irt {

ResponseMatrix ResponseMatrix::zeros(std::vector<std::string> respondents,
                                     std::vector<std::string> items) {
    ResponseMatrix m;
    m.respondent_ids = std::move(respondents);
    m.item_ids = std::move(items);
    m.cells.assign(m.respondent_ids.size() * m.item_ids.size(), 0);
    return m;
}

void ResponseMatrix::validate() const {
    if (n_items() < 2) throw ValidationError("response matrix needs at least 2 items");
    if (n_resp() < 2) throw ValidationError("response matrix needs at least 2 respondents");
    for (int r = 0; r < n_resp(); ++r) {
        bool any = false;
        for (int j = 0; j < n_items() && !any; ++j) any = at(r, j) != kMissing;
        if (!any) throw ValidationError("respondent '" + respondent_ids[r] + "' has no responses");
    }
    for (int j = 0; j < n_items(); ++j) {
        bool any = false;
        for (int r = 0; r < n_resp() && !any; ++r) any = at(r, j) != kMissing;
        if (!any) throw ValidationError("item '" + item_ids[j] + "' has no responses");
    }
}

void gauss_hermite_normal(int n, std::vector<double>& nodes, std::vector<double>& weights) {
    // Golub-Welsch on the Hermite recurrence, rescaled to an N(0,1) weight.
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) {
        double off = std::sqrt(i / 2.0);
        jac(i, i - 1) = off;
        jac(i - 1, i) = off;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jac);
    nodes.resize(n);
    weights.resize(n);
    double top = 0.0;
    for (int i = 0; i < n; ++i) {
        nodes[i] = solver.eigenvalues()(i) * std::numbers::sqrt2;
        double v0 = solver.eigenvectors()(0, i);
        weights[i] = v0 * v0; // already sums to 1 for the normalized weight
        top = std::max(top, weights[i]);
    }
    // far-tail eigenvector components underflow into noise; their honest
    // mass is below e^{-t^2/2} of the retained range, so drop them
    for (double& w : weights)
        if (w < top * 1e-28) w = 0.0;
}

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct QuadGrid {
    std::vector<double> t; // ability nodes
    std::vector<double> w; // prior mass
};

// Posterior weights over quadrature nodes for one respondent, plus the
// respondent's marginal log-likelihood contribution.
double posterior_row(const ResponseMatrix& resp, int r, const QuadGrid& grid,
                     const std::vector<double>& a, const std::vector<double>& b,
                     const std::vector<int>& items, double* out) {
    const int nq = static_cast<int>(grid.t.size());
    double maxlog = -std::numeric_limits<double>::infinity();
    for (int q = 0; q < nq; ++q) {
        double lg = 0.0;
        for (int j : items) {
            std::int8_t x = resp.at(r, j);
            if (x == kMissing) continue;
            double eta = a[j] * (grid.t[q] - b[j]);
            // log sigma(eta) = -log(1+exp(-eta))
            double lp = -std::log1p(std::exp(-std::abs(eta)));
            if (eta < 0.0) lp += eta;
            double lq = lp - eta; // log(1 - sigma) = log sigma - eta
            lg += (x == 1) ? lp : lq;
        }
        out[q] = lg;
        maxlog = std::max(maxlog, lg);
    }
    double total = 0.0;
    for (int q = 0; q < nq; ++q) {
        out[q] = grid.w[q] * std::exp(out[q] - maxlog);
        total += out[q];
    }
    for (int q = 0; q < nq; ++q) out[q] /= total;
    return std::log(total) + maxlog;
}

} // namespace

ItemParams fit_2pl(const ResponseMatrix& input, const FitOptions& opts) {
    input.validate();

    // Degenerate items (all observed responses equal) leave the likelihood
    // unbounded; drop them up front.
    std::vector<int> keep;
    std::vector<std::string> dropped;
    for (int j = 0; j < input.n_items(); ++j) {
        int ones = 0, total = 0;
        for (int r = 0; r < input.n_resp(); ++r) {
            std::int8_t x = input.at(r, j);
            if (x == kMissing) continue;
            ++total;
            ones += (x == 1);
        }
        if (ones == 0 || ones == total) dropped.push_back(input.item_ids[j]);
        else keep.push_back(j);
    }
    if (static_cast<int>(keep.size()) < 2)
        throw ValidationError("fewer than 2 non-degenerate items remain");

    const int n_resp = input.n_resp();
    const int n_items = input.n_items();

    QuadGrid grid;
    gauss_hermite_normal(opts.quad_nodes, grid.t, grid.w);
    const int nq = opts.quad_nodes;

    // slope/difficulty start values from observed proportions
    std::vector<double> a(n_items, 0.0), b(n_items, 0.0);
    for (int j : keep) {
        int ones = 0, total = 0;
        for (int r = 0; r < n_resp; ++r) {
            std::int8_t x = input.at(r, j);
            if (x == kMissing) continue;
            ++total;
            ones += (x == 1);
        }
        double p = static_cast<double>(ones) / total;
        a[j] = 1.0;
        b[j] = -std::log(p / (1.0 - p));
    }

    std::vector<double> post(static_cast<std::size_t>(n_resp) * nq);
    std::vector<double> loglik_rows(n_resp);
    std::vector<double> njq(static_cast<std::size_t>(n_items) * nq);
    std::vector<double> rjq(static_cast<std::size_t>(n_items) * nq);

    double prev_ll = -std::numeric_limits<double>::infinity();
    double ll = prev_ll;
    int iter = 0;
    for (iter = 1; iter <= opts.max_iter; ++iter) {
        // E-step: per-respondent posteriors in parallel, then a serial
        // accumulation in respondent order so results are thread-count free.
        par::for_index(n_resp, [&](std::int64_t r) {
            loglik_rows[r] = posterior_row(input, static_cast<int>(r), grid, a, b, keep,
                                           post.data() + r * nq);
        });
        ll = 0.0;
        for (int r = 0; r < n_resp; ++r) ll += loglik_rows[r];
        assert(ll >= prev_ll - 1e-6 * (1.0 + std::abs(prev_ll)));
        prev_ll = ll;

        std::fill(njq.begin(), njq.end(), 0.0);
        std::fill(rjq.begin(), rjq.end(), 0.0);
        for (int r = 0; r < n_resp; ++r) {
            const double* pw = post.data() + static_cast<std::size_t>(r) * nq;
            for (int j : keep) {
                std::int8_t x = input.at(r, j);
                if (x == kMissing) continue;
                double* nj = njq.data() + static_cast<std::size_t>(j) * nq;
                for (int q = 0; q < nq; ++q) nj[q] += pw[q];
                if (x == 1) {
                    double* rj = rjq.data() + static_cast<std::size_t>(j) * nq;
                    for (int q = 0; q < nq; ++q) rj[q] += pw[q];
                }
            }
        }

        // M-step: per-item Newton iterations on (slope, intercept).
        double max_change = 0.0;
        std::vector<double> new_a(a), new_b(b);
        par::for_index(static_cast<std::int64_t>(keep.size()), [&](std::int64_t ki) {
            int j = keep[ki];
            const double* nj = njq.data() + static_cast<std::size_t>(j) * nq;
            const double* rj = rjq.data() + static_cast<std::size_t>(j) * nq;
            double alpha = a[j];
            double beta = -a[j] * b[j]; // eta = alpha*t + beta
            for (int step = 0; step < 12; ++step) {
                double g0 = 0.0, g1 = 0.0, h00 = 0.0, h01 = 0.0, h11 = 0.0;
                for (int q = 0; q < nq; ++q) {
                    double p = sigmoid(alpha * grid.t[q] + beta);
                    double resid = rj[q] - nj[q] * p;
                    double info = nj[q] * p * (1.0 - p);
                    g0 += resid * grid.t[q];
                    g1 += resid;
                    h00 += info * grid.t[q] * grid.t[q];
                    h01 += info * grid.t[q];
                    h11 += info;
                }
                double det = h00 * h11 - h01 * h01;
                if (det <= 1e-12) break;
                double da = (h11 * g0 - h01 * g1) / det;
                double db = (h00 * g1 - h01 * g0) / det;
                double norm = std::max(std::abs(da), std::abs(db));
                if (norm > 1.0) { // damp large jumps
                    da /= norm;
                    db /= norm;
                }
                alpha += da;
                beta += db;
                // box constraints; locally dependent or near-degenerate
                // items would otherwise drift without bound
                alpha = std::clamp(alpha, 0.05, 8.0);
                double bj = -beta / alpha;
                if (std::abs(bj) > 8.0) beta = -std::copysign(8.0, bj) * alpha;
                if (std::max(std::abs(da), std::abs(db)) < 1e-10) break;
            }
            new_a[j] = alpha;
            new_b[j] = -beta / alpha;
        });
        for (int j : keep) {
            max_change = std::max(max_change, std::abs(new_a[j] - a[j]));
            max_change = std::max(max_change, std::abs(new_b[j] - b[j]));
        }
        a = std::move(new_a);
        b = std::move(new_b);
        if (max_change < opts.tol) break;
    }
    if (iter > opts.max_iter)
        throw NoConvergence("2PL EM did not converge in " + std::to_string(opts.max_iter) +
                            " iterations");

    ItemParams out;
    out.dropped_items = std::move(dropped);
    out.log_likelihood = ll;
    out.em_iterations = iter;
    for (int j : keep) {
        out.item_ids.push_back(input.item_ids[j]);
        out.discrimination.push_back(a[j]);
        out.difficulty.push_back(b[j]);
    }
    return out;
}

namespace {

// Adaptive Gauss-Hermite: the grid recentered and rescaled at the
// respondent's posterior mode, so accuracy is uniform over extreme
// response patterns.
AbilityScore eap_one(const ResponseMatrix& resp, int r, const ItemParams& items,
                     const std::vector<int>& item_cols, const QuadGrid& grid) {
    AbilityScore s;
    s.respondent_id = resp.respondent_ids[r];
    const int nq = static_cast<int>(grid.t.size());

    std::vector<std::pair<double, double>> obs; // (a, b) of answered items
    std::vector<int> answer;
    for (std::size_t k = 0; k < item_cols.size(); ++k) {
        int col = item_cols[k];
        if (col < 0) continue;
        std::int8_t x = resp.at(r, col);
        if (x == kMissing) continue;
        obs.emplace_back(items.discrimination[k], items.difficulty[k]);
        answer.push_back(x);
    }
    s.n_observed = static_cast<int>(obs.size());
    if (obs.empty()) {
        s.eap = 0.0;
        s.posterior_sd = 1.0;
        return s;
    }

    auto log_post = [&](double t) {
        double lp = -0.5 * t * t;
        for (std::size_t k = 0; k < obs.size(); ++k) {
            double eta = obs[k].first * (t - obs[k].second);
            double lsig = -std::log1p(std::exp(-std::abs(eta)));
            if (eta < 0.0) lsig += eta;
            lp += (answer[k] == 1) ? lsig : lsig - eta;
        }
        return lp;
    };

    // posterior mode by Newton; the 2PL log-posterior is globally concave
    double mode = 0.0;
    double curv = 1.0;
    for (int it = 0; it < 40; ++it) {
        double g = -mode;
        double h = -1.0;
        for (std::size_t k = 0; k < obs.size(); ++k) {
            double p = sigmoid(obs[k].first * (mode - obs[k].second));
            g += obs[k].first * (answer[k] - p);
            h -= obs[k].first * obs[k].first * p * (1.0 - p);
        }
        curv = -h;
        double step = g / curv;
        mode += step;
        if (std::abs(step) < 1e-12) break;
    }
    double scale = 1.0 / std::sqrt(curv);

    double maxlog = -std::numeric_limits<double>::infinity();
    std::vector<double> logw(nq, -std::numeric_limits<double>::infinity());
    for (int q = 0; q < nq; ++q) {
        if (grid.w[q] <= 0.0) continue;
        double t = mode + scale * grid.t[q];
        logw[q] = std::log(grid.w[q]) + 0.5 * grid.t[q] * grid.t[q] + log_post(t);
        maxlog = std::max(maxlog, logw[q]);
    }
    double total = 0.0, m1 = 0.0, m2 = 0.0;
    for (int q = 0; q < nq; ++q) {
        double t = mode + scale * grid.t[q];
        double w = std::exp(logw[q] - maxlog);
        total += w;
        m1 += w * t;
        m2 += w * t * t;
    }
    m1 /= total;
    m2 /= total;
    s.eap = m1;
    s.posterior_sd = std::sqrt(std::max(m2 - m1 * m1, 1e-300));
    return s;
}

std::vector<int> map_item_columns(const ResponseMatrix& resp, const ItemParams& items) {
    std::vector<int> cols(items.item_ids.size(), -1);
    for (std::size_t k = 0; k < items.item_ids.size(); ++k) {
        for (int j = 0; j < resp.n_items(); ++j) {
            if (resp.item_ids[j] == items.item_ids[k]) {
                cols[k] = j;
                break;
            }
        }
    }
    return cols;
}

} // namespace

std::vector<AbilityScore> eap_score(const ResponseMatrix& responses, const ItemParams& items,
                                    int quad_nodes) {
    QuadGrid grid;
    gauss_hermite_normal(quad_nodes, grid.t, grid.w);
    auto cols = map_item_columns(responses, items);
    std::vector<AbilityScore> out(responses.n_resp());
    par::for_index(responses.n_resp(), [&](std::int64_t r) {
        out[r] = eap_one(responses, static_cast<int>(r), items, cols, grid);
    });
    return out;
}

std::vector<AbilityScore> eap_score_serial(const ResponseMatrix& responses, const ItemParams& items,
                                           int quad_nodes) {
    QuadGrid grid;
    gauss_hermite_normal(quad_nodes, grid.t, grid.w);
    auto cols = map_item_columns(responses, items);
    std::vector<AbilityScore> out(responses.n_resp());
    par::for_index_serial(responses.n_resp(), [&](std::int64_t r) {
        out[r] = eap_one(responses, static_cast<int>(r), items, cols, grid);
    });
    return out;
}

std::vector<double> standardize(std::span<const double> scores,
                                std::span<const unsigned char> in_reference) {
    if (scores.size() != in_reference.size())
        throw ValidationError("standardize: reference mask length mismatch");
    std::vector<double> ref;
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (in_reference[i]) ref.push_back(scores[i]);
    if (ref.empty()) throw ValidationError("standardize: empty reference group");
    double m = stats::mean(ref);
    double sd = stats::sample_sd(ref);
    if (ref.size() == 1 || sd == 0.0)
        throw ZeroVariance("standardize: reference group has zero variance");
    std::vector<double> out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = (scores[i] - m) / sd;
    return out;
}

} // namespace p4p::irt
