#pragma once

#include <span>
#include <vector>

#include "nuv/matrix.hpp"
#include "nuv/rng.hpp"

namespace nuv {

// Gaussian model for the distorted template over its unique values:
// m ~ N(mu, cov), both indexed by unique-value position.
struct DistortionModel {
    std::vector<double> mu;
    SymMat cov{0};

    int d_tau() const { return static_cast<int>(mu.size()); }
};

// E[m m^T] = cov + mu mu^T.
SymMat cross_from_model(const DistortionModel& model);

// Empirical second-moment matrix (1/N) * sum_i m_i m_i^T.
SymMat estimate_cross(const std::vector<std::vector<double>>& samples);

/*
 * Lower-triangular factor L with A ~= L L^T for a positive semidefinite A.
 * Zero pivots produce zero columns, so rank-deficient inputs (including the
 * zero matrix) factor cleanly. Returns false when a pivot falls below
 * -pivot_tol, i.e. the matrix is not PSD within tolerance.
 */
bool cholesky_factor(const SymMat& a, SymMat& lower, double pivot_tol = 0.0);

// One draw m ~ N(mu, cov). Roundoff can leave a sampled covariance slightly
// indefinite, so factorization is retried with diagonal jitter
// 1e-10 * trace(cov)/d_tau escalated tenfold, three attempts total, before
// giving up with degenerate_error. A zero covariance returns mu exactly.
std::vector<double> sample_distortion(const DistortionModel& model, Rng& rng);

// Dense random model: mu has standard normal entries and cov = G G^T / d_tau
// for a d_tau x d_tau standard normal G (drawn row-major after mu), giving
// expected unit variance per coordinate.
DistortionModel random_general_model(int d_tau, Rng& rng);

// Template-centered isotropic model: mu = tau, cov = sigma2_m * I.
DistortionModel spherical_model(std::span<const double> tau, double sigma2_m);

} // namespace nuv
