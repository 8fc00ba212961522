#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nuv/core.hpp"
#include "nuv/matrix.hpp"

namespace nuv {

// First-order expected dissimilarity together with the terms it was built
// from, so callers can report which contribution drives a prediction.
struct Prediction {
    double value = 0.0;
    double numerator = 0.0;
    double denominator = 0.0;
    std::vector<std::pair<std::string, double>> components;
};

// Expected dissimilarity of a pure white-noise window: (d - b) / (d - 1).
// Depends only on the dimension and the number of nonempty bins.
Prediction predict_noise(int d, int b);

/*
 * Expected dissimilarity of a distorted window w = S m + noise, where the
 * distortion m over the unique template values has second-moment matrix
 * `cross` (E[m m^T]). The numerator couples the per-value second moments
 * with the partition through the alignment score (frobenius_objective);
 * maximizing that score minimizes this prediction, all else fixed.
 *
 * d is taken as sum(n_tau) and b as the partition's bin count.
 */
Prediction predict_distorted(const BinPartition& p, const SymMat& cross,
                             std::span<const int> n_tau, double noise_var);

// Variant for distortions centered on the template itself (E m = tau):
// cov_centered is the covariance of m - tau. The numerator gains the
// partition's representation error, the denominator the template scatter.
Prediction predict_localized(const BinPartition& p, const FullRankDecomposition& fr,
                             const SymMat& cov_centered, double noise_var);

// Template-centered distortion with isotropic covariance distortion_var * I.
// Requires a template with all-distinct values. Evaluates by reduction to
// predict_localized so the two agree bit for bit.
Prediction predict_spherical(const BinPartition& p, const FullRankDecomposition& fr,
                             double distortion_var, double noise_var);

// Closed form for a zero-mean isotropic distortion on an all-distinct
// template: the prediction collapses to (d - b)/(d - 1) regardless of the
// partition, so no binning beats any other in that setting.
Prediction predict_isotropic_closed_form(int d, int b, double distortion_var,
                                         double noise_var);

// Expected noise dissimilarity minus expected distorted dissimilarity: the
// separation the measure achieves between the two populations. Larger is
// better; binning strategies compete on exactly this quantity.
double discrimination_power(const Prediction& noise_pred, const Prediction& distorted_pred);

} // namespace nuv
