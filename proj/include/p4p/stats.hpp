#pragma once

// Small shared statistics helpers: ranks with the two tie conventions used
// throughout the tournament metric, moments, and empirical CDFs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "p4p/errors.hpp"

namespace p4p::stats {

inline double mean(std::span<const double> x) {
    if (x.empty()) return 0.0;
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

inline double variance(std::span<const double> x) {
    // population variance
    if (x.size() < 1) return 0.0;
    double m = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size());
}

inline double sample_sd(std::span<const double> x) {
    if (x.size() < 2) return 0.0;
    double m = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(x.size() - 1));
}

// Competition ranks, 1 = best (largest value).  Ties share the minimum rank.
inline std::vector<int> competition_ranks_desc(std::span<const double> x) {
    std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return x[a] > x[b]; });
    std::vector<int> rank(n, 0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = static_cast<int>(i) + 1;
        i = j + 1;
    }
    return rank;
}

// Average ranks, 1 = best (largest value).  Ties share the mean rank.
inline std::vector<double> average_ranks_desc(std::span<const double> x) {
    std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return x[a] > x[b]; });
    std::vector<double> rank(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
        double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
        i = j + 1;
    }
    return rank;
}

// Average ranks ascending (1 = smallest), the Spearman convention.
inline std::vector<double> average_ranks_asc(std::span<const double> x) {
    std::vector<double> neg(x.begin(), x.end());
    for (double& v : neg) v = -v;
    return average_ranks_desc(neg);
}

// Percentile in [0,1], 1 = best, from average ranks; a singleton scores 1.
inline std::vector<double> percentile_desc(std::span<const double> x) {
    std::size_t n = x.size();
    std::vector<double> out(n, 1.0);
    if (n <= 1) return out;
    auto ranks = average_ranks_desc(x);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = 1.0 - (ranks[i] - 1.0) / (static_cast<double>(n) - 1.0);
    return out;
}

// Exact empirical-CDF value: share of sample <= y.
inline double ecdf_at(std::span<const double> sorted, double y) {
    auto it = std::upper_bound(sorted.begin(), sorted.end(), y);
    return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
}

} // namespace p4p::stats
