#pragma once

// Reference implementations for tests only. Deliberately naive: dense
// matrices, exhaustive enumeration, direct formulas. None of them share
// code paths with the library.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "nuv/core.hpp"
#include "nuv/matrix.hpp"

namespace oracles {

// Every contiguous partition of d_tau sorted values into b nonempty bins.
inline std::vector<nuv::BinPartition> all_partitions(int d_tau, int b) {
    std::vector<nuv::BinPartition> out;
    if (b < 1 || b > d_tau) return out;
    std::vector<int> interior(static_cast<std::size_t>(b) - 1);
    for (int i = 0; i < b - 1; ++i) interior[static_cast<std::size_t>(i)] = i + 1;
    for (;;) {
        nuv::BinPartition p;
        p.cuts.push_back(0);
        p.cuts.insert(p.cuts.end(), interior.begin(), interior.end());
        p.cuts.push_back(d_tau);
        out.push_back(p);
        // next combination of b-1 interior cuts from {1..d_tau-1}
        int i = b - 2;
        while (i >= 0 && interior[static_cast<std::size_t>(i)] == d_tau - (b - 1 - i)) --i;
        if (i < 0) break;
        ++interior[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < b - 1; ++j)
            interior[static_cast<std::size_t>(j)] = interior[static_cast<std::size_t>(j - 1)] + 1;
    }
    return out;
}

// Weighted sum of squared deviations of tau[lo..hi) around the weighted mean.
inline double interval_cost(std::span<const double> tau, std::span<const int> n, int lo,
                            int hi) {
    double weight = 0.0, mean = 0.0;
    for (int u = lo; u < hi; ++u) {
        weight += n[u];
        mean += n[u] * tau[u];
    }
    mean /= weight;
    double cost = 0.0;
    for (int u = lo; u < hi; ++u) cost += n[u] * (tau[u] - mean) * (tau[u] - mean);
    return cost;
}

inline double partition_cost(const nuv::FullRankDecomposition& fr, const nuv::BinPartition& p) {
    double total = 0.0;
    for (int j = 0; j + 1 < static_cast<int>(p.cuts.size()); ++j)
        total += interval_cost(fr.tau, fr.n_tau, p.cuts[static_cast<std::size_t>(j)],
                               p.cuts[static_cast<std::size_t>(j) + 1]);
    return total;
}

inline double best_partition_cost(const nuv::FullRankDecomposition& fr, int b) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : all_partitions(fr.d_tau(), b))
        best = std::min(best, partition_cost(fr, p));
    return best;
}

// Dense evaluation of the alignment objective: expand to coordinate space,
// materialize the projector A, and contract <A, S C S^T> entry by entry.
inline double frobenius_dense(const nuv::BinPartition& p, const nuv::SymMat& cross,
                              std::span<const int> n_tau) {
    std::vector<int> index_map; // coordinates in unique order
    for (int u = 0; u < static_cast<int>(n_tau.size()); ++u)
        for (int c = 0; c < n_tau[u]; ++c) index_map.push_back(u);
    const int d = static_cast<int>(index_map.size());

    std::vector<int> bin_of_unique(n_tau.size());
    for (int j = 0; j + 1 < static_cast<int>(p.cuts.size()); ++j)
        for (int u = p.cuts[static_cast<std::size_t>(j)];
             u < p.cuts[static_cast<std::size_t>(j) + 1]; ++u)
            bin_of_unique[static_cast<std::size_t>(u)] = j;

    std::vector<int> bin_of(static_cast<std::size_t>(d));
    std::vector<int> counts(p.cuts.size() - 1, 0);
    for (int i = 0; i < d; ++i) {
        bin_of[static_cast<std::size_t>(i)] =
            bin_of_unique[static_cast<std::size_t>(index_map[static_cast<std::size_t>(i)])];
        ++counts[static_cast<std::size_t>(bin_of[static_cast<std::size_t>(i)])];
    }

    double total = 0.0;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            if (bin_of[static_cast<std::size_t>(i)] != bin_of[static_cast<std::size_t>(j)])
                continue;
            const double a_ij =
                1.0 / counts[static_cast<std::size_t>(bin_of[static_cast<std::size_t>(i)])];
            total += a_ij * cross(index_map[static_cast<std::size_t>(i)],
                                  index_map[static_cast<std::size_t>(j)]);
        }
    return total;
}

// Dissimilarity via the explicit averaging matrix.
inline double dissim_dense(const nuv::BinAssignment& a, std::span<const double> w) {
    const int d = a.d();
    std::vector<double> aw(static_cast<std::size_t>(d), 0.0);
    for (int i = 0; i < d; ++i) {
        double sum = 0.0;
        for (int j = 0; j < d; ++j)
            if (a.bin_of[static_cast<std::size_t>(j)] == a.bin_of[static_cast<std::size_t>(i)])
                sum += w[static_cast<std::size_t>(j)];
        aw[static_cast<std::size_t>(i)] =
            sum / a.bin_counts[static_cast<std::size_t>(a.bin_of[static_cast<std::size_t>(i)])];
    }
    double mean = 0.0;
    for (int i = 0; i < d; ++i) mean += w[static_cast<std::size_t>(i)];
    mean /= d;
    double num = 0.0, den = 0.0;
    for (int i = 0; i < d; ++i) {
        num += (aw[static_cast<std::size_t>(i)] - w[static_cast<std::size_t>(i)]) *
               (aw[static_cast<std::size_t>(i)] - w[static_cast<std::size_t>(i)]);
        den += (w[static_cast<std::size_t>(i)] - mean) * (w[static_cast<std::size_t>(i)] - mean);
    }
    return num / den;
}

// Paired two-sample AUC through midranks: for each pair, rank the two values
// and convert the noise value's midrank to a win/tie/loss score.
inline double paired_rank_auc(const std::vector<std::pair<double, double>>& noise_distorted) {
    double total = 0.0;
    for (const auto& [noise, distorted] : noise_distorted) {
        double rank_noise;
        if (noise > distorted)
            rank_noise = 2.0;
        else if (noise < distorted)
            rank_noise = 1.0;
        else
            rank_noise = 1.5;
        total += rank_noise - 1.0;
    }
    return total / static_cast<double>(noise_distorted.size());
}

// Two-sided exact binomial p-value at p = 1/2 from Pascal's triangle.
inline double binomial_two_sided(long long n01, long long n10) {
    const long long n = n01 + n10;
    if (n == 0) return 1.0;
    std::vector<double> row{1.0};
    for (long long i = 1; i <= n; ++i) {
        std::vector<double> next(static_cast<std::size_t>(i) + 1, 0.0);
        for (long long j = 0; j <= i; ++j) {
            if (j > 0) next[static_cast<std::size_t>(j)] += row[static_cast<std::size_t>(j - 1)];
            if (j < i) next[static_cast<std::size_t>(j)] += row[static_cast<std::size_t>(j)];
        }
        row = std::move(next);
    }
    const long long k = std::min(n01, n10);
    double cdf = 0.0;
    for (long long j = 0; j <= k; ++j) cdf += row[static_cast<std::size_t>(j)];
    cdf *= std::pow(0.5, static_cast<double>(n));
    return std::min(1.0, 2.0 * cdf);
}

} // namespace oracles
