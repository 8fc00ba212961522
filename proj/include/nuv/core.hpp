#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace nuv {

// Requested structure cannot exist (bin count out of range and similar).
struct infeasible_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Input carries no usable variance (constant window, unusable covariance).
struct degenerate_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/*
 * Sorted-unique view of a template vector.
 *
 * tau holds the distinct values in strictly increasing order, n_tau their
 * multiplicities, and index_map[i] the position of coordinate i's value in
 * tau. The template (after optional rounding) is recoverable coordinate by
 * coordinate as tau[index_map[i]].
 */
struct FullRankDecomposition {
    std::vector<double> tau;
    std::vector<int> n_tau;
    std::vector<int> index_map;

    int d() const { return static_cast<int>(index_map.size()); }
    int d_tau() const { return static_cast<int>(tau.size()); }

    std::vector<double> reconstruct() const {
        std::vector<double> t(index_map.size());
        for (std::size_t i = 0; i < index_map.size(); ++i)
            t[i] = tau[index_map[i]];
        return t;
    }
};

/*
 * Contiguous partition of the sorted unique values into b bins, stored as
 * b+1 cut positions with cuts[0] = 0 and cuts[b] = d_tau. Bin j covers the
 * half-open index range [cuts[j], cuts[j+1]), so every bin is nonempty iff
 * the cuts are strictly increasing.
 */
struct BinPartition {
    std::vector<int> cuts;

    int bins() const { return static_cast<int>(cuts.size()) - 1; }
};

// Throws if cuts do not describe a valid partition of d_tau unique values.
void validate_partition(const BinPartition& p, int d_tau);

// Per-coordinate bin membership derived from a partition.
struct BinAssignment {
    std::vector<int> bin_of;
    std::vector<int> bin_counts;

    int d() const { return static_cast<int>(bin_of.size()); }
    int bins() const { return static_cast<int>(bin_counts.size()); }
};

// Population variance (1/d)*sum(v^2) - mean^2, computed in the numerically
// stable two-pass form. Throws std::invalid_argument on an empty vector.
double population_variance(std::span<const double> v);

// Splits v into distinct sorted values with multiplicities. When
// round_digits is given the values are first rounded half-to-even at that
// many decimal places, which merges near-ties.
FullRankDecomposition full_rank_decompose(std::span<const double> t,
                                          std::optional<int> round_digits = std::nullopt);

BinAssignment assign_bins(const FullRankDecomposition& fr, const BinPartition& p);

// Replaces every coordinate of w by the mean of the w-values sharing its
// bin. This is the projection of w onto the span of the bin indicator
// vectors; it is idempotent and preserves mean(w).
std::vector<double> conditional_means(const BinAssignment& a, std::span<const double> w);

/*
 * The dissimilarity D(t, w): squared residual of the conditional means,
 * divided by d * population_variance(w). Lies in [0, 1]; value 0 means w
 * is constant within every bin of t, value 1 means the within-bin means
 * explain none of w's variance (1 - D is the r^2 of the piecewise-constant
 * regression of w on t's bins).
 *
 * Throws degenerate_error when w is constant: the measure is undefined
 * there and a sentinel would silently corrupt downstream statistics.
 */
double dissimilarity(const BinAssignment& a, std::span<const double> w);

// Weighted within-bin sum of squared deviations of tau values from their
// bin means, i.e. the squared distance between the reconstructed template
// and its per-bin means. This is the quantity k-means binning minimizes.
double representation_error(const FullRankDecomposition& fr, const BinPartition& p);

} // namespace nuv
