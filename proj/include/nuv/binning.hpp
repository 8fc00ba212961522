#pragma once

#include <cstdint>
#include <span>

#include "nuv/core.hpp"
#include "nuv/matrix.hpp"

namespace nuv {

// The three rule-of-thumb bin counts, each clamped to at most d_tau.
struct BinCountRules {
    int sturges;   // ceil(log2 d_tau) + 1
    int rice;      // ceil(2 * d_tau^(1/3))
    int sqrt_rule; // ceil(sqrt(d_tau))
};

BinCountRules bin_count_rules(int d_tau);

// b equal-width value intervals over [tau.front(), tau.back()]; intervals
// that catch no value are dropped, so the result may have fewer than b bins.
BinPartition eqw_binning(const FullRankDecomposition& fr, int b);

// Most balanced feasible partition: bin coordinate counts span the smallest
// achievable range (ties are never split, which bounds that range by the
// largest multiplicity), and within it each cut lands on the cumulative
// count nearest to j*d/b. Deterministic; equal gaps keep the earliest cut.
BinPartition eqf_binning(const FullRankDecomposition& fr, int b);

// Exact minimizer of representation_error over all contiguous b-partitions:
// weighted 1-D k-means solved by dynamic programming over the sorted unique
// values. O(d_tau^2 * b) time, O(d_tau * b) space. Equal-cost solutions
// resolve to the lexicographically smallest cut vector.
BinPartition kmeans_binning(const FullRankDecomposition& fr, int b);

// sum over bins of [sum_{p,q in bin} n_tau[p]*n_tau[q]*cross(p,q)] divided
// by the bin's total coordinate count. This is the alignment score that
// greedy_binning maximizes; higher values mean lower expected dissimilarity
// for distortions with the given cross-product structure.
double frobenius_objective(const BinPartition& p, const SymMat& cross,
                           std::span<const int> n_tau);

struct GreedyConfig {
    int restarts = 1;
    std::uint64_t seed = 0;
    long max_iterations = 1000000; // safety cap; the objective is bounded
};

struct GreedyResult {
    BinPartition partition;
    double objective = 0.0;
    // objective of the winning pass: initial value, then one entry per
    // accepted move; strictly increasing by construction
    std::vector<double> trace;
    int best_restart = 0;
    std::vector<std::size_t> moves_per_restart;
};

/*
 * Local search for the partition maximizing frobenius_objective. Each pass
 * starts from a uniformly random partition into b nonempty bins and
 * repeatedly applies the single-boundary move (one cut shifted by one
 * position in unique-index space) with the largest strictly positive gain,
 * evaluated incrementally from the affected bins' row/column sums.
 * Terminates when no move improves. With restarts > 1 the passes are
 * seeded independently (seed XOR restart index) and the best final
 * objective wins, earliest pass on ties.
 */
GreedyResult greedy_binning(const SymMat& cross, std::span<const int> n_tau, int b,
                            const GreedyConfig& cfg = {});

} // namespace nuv
