#pragma once

// Slow, loop-based reference implementations used as test oracles. None of
// them call into the library code they check.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <vector>

namespace drift::testing {

/// Sum over samples of -log softmax(cos / tau)[y], one sample at a time.
inline double loop_ce(const Eigen::MatrixXd& z, const Eigen::MatrixXd& rows, std::span<const int> y, double tau) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        std::vector<double> logits;
        for (Eigen::Index c = 0; c < rows.rows(); ++c) {
            double dot = 0.0;
            for (Eigen::Index k = 0; k < z.cols(); ++k) dot += z(i, k) * rows(c, k);
            logits.push_back(dot / tau);
        }
        const double mx = *std::max_element(logits.begin(), logits.end());
        double denom = 0.0;
        for (double l : logits) denom += std::exp(l - mx);
        total -= logits[std::size_t(y[std::size_t(i)])] - mx - std::log(denom);
    }
    return total;
}

inline double direct_kl(const std::vector<std::vector<double>>& ps, const std::vector<double>& p0) {
    double total = 0.0;
    for (const auto& p : ps) {
        for (std::size_t c = 0; c < p.size(); ++c) {
            if (p[c] > 0.0) total += p[c] * std::log(p[c] / p0[c]);
        }
    }
    return total;
}

inline double loop_median_distance(const Eigen::MatrixXd& x) {
    std::vector<double> d;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < x.rows(); ++j) {
            double s = 0.0;
            for (Eigen::Index k = 0; k < x.cols(); ++k) s += (x(i, k) - x(j, k)) * (x(i, k) - x(j, k));
            d.push_back(std::sqrt(s));
        }
    }
    if (d.empty()) return 1.0;
    std::sort(d.begin(), d.end());
    const std::size_t n = d.size();
    const double med = n % 2 == 1 ? d[n / 2] : 0.5 * (d[n / 2 - 1] + d[n / 2]);
    return std::max(med, 1e-6);
}

inline double loop_rbf(const Eigen::MatrixXd& x, Eigen::Index i, Eigen::Index j, double sigma) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < x.cols(); ++k) s += (x(i, k) - x(j, k)) * (x(i, k) - x(j, k));
    return std::exp(-s / (2.0 * sigma * sigma));
}

/// Biased HSIC written as the expanded double sum
///   [sum_ij K_ij L_ij - 2/n sum_i (sum_j K_ij)(sum_q L_iq) + 1/n^2 sum K sum L] / (n-1)^2.
/// Non-positive sigma selects the median heuristic.
inline double brute_force_hsic(const Eigen::MatrixXd& u, const Eigen::MatrixXd& s, double sigma_u = 0.0,
                               double sigma_s = 0.0) {
    const Eigen::Index n = u.rows();
    if (n < 2) return 0.0;
    if (sigma_u <= 0.0) sigma_u = loop_median_distance(u);
    if (sigma_s <= 0.0) sigma_s = loop_median_distance(s);
    double kl = 0.0;
    double cross = 0.0;
    double sum_k = 0.0;
    double sum_l = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double row_k = 0.0;
        double row_l = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            const double k = loop_rbf(u, i, j, sigma_u);
            const double l = loop_rbf(s, i, j, sigma_s);
            kl += k * l;
            row_k += k;
            row_l += l;
        }
        cross += row_k * row_l;
        sum_k += row_k;
        sum_l += row_l;
    }
    const double nn = static_cast<double>(n);
    return (kl - 2.0 / nn * cross + sum_k * sum_l / (nn * nn)) / ((nn - 1.0) * (nn - 1.0));
}

/// Class-count-weighted average of per-class brute-force HSIC.
inline double brute_force_conditional_hsic(const Eigen::MatrixXd& u, const Eigen::MatrixXd& s,
                                           std::span<const int> y, int min_count = 2) {
    std::map<int, std::vector<Eigen::Index>> groups;
    for (std::size_t i = 0; i < y.size(); ++i) groups[y[i]].push_back(Eigen::Index(i));
    double num = 0.0;
    double den = 0.0;
    for (const auto& [c, idx] : groups) {
        if (static_cast<int>(idx.size()) < min_count) continue;
        Eigen::MatrixXd uc(Eigen::Index(idx.size()), u.cols());
        Eigen::MatrixXd sc(Eigen::Index(idx.size()), s.cols());
        for (std::size_t r = 0; r < idx.size(); ++r) {
            uc.row(Eigen::Index(r)) = u.row(idx[r]);
            sc.row(Eigen::Index(r)) = s.row(idx[r]);
        }
        num += static_cast<double>(idx.size()) * brute_force_hsic(uc, sc);
        den += static_cast<double>(idx.size());
    }
    return den == 0.0 ? 0.0 : num / den;
}

struct PermutationNull {
    double observed = 0.0;
    double mean = 0.0;
    double stddev = 0.0;
    double p99 = 0.0;
};

/// Null distribution of `stat(u, s_perm)` over row permutations of s.
template <class Stat>
PermutationNull permutation_null(const Eigen::MatrixXd& u, const Eigen::MatrixXd& s, Stat stat, int permutations,
                                 std::mt19937_64& rng) {
    PermutationNull out;
    out.observed = stat(u, s);
    std::vector<Eigen::Index> order(std::size_t(s.rows()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::vector<double> values;
    for (int p = 0; p < permutations; ++p) {
        std::shuffle(order.begin(), order.end(), rng);
        Eigen::MatrixXd sp(s.rows(), s.cols());
        for (std::size_t r = 0; r < order.size(); ++r) sp.row(Eigen::Index(r)) = s.row(order[r]);
        values.push_back(stat(u, sp));
    }
    out.mean = std::accumulate(values.begin(), values.end(), 0.0) / double(values.size());
    double var = 0.0;
    for (double v : values) var += (v - out.mean) * (v - out.mean);
    out.stddev = std::sqrt(var / double(values.size() - 1));
    std::sort(values.begin(), values.end());
    out.p99 = values[std::size_t(std::ceil(0.99 * double(values.size()))) - 1];
    return out;
}

}  // namespace drift::testing
