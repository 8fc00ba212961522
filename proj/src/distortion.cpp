#include "nuv/distortion.hpp"

#include <cmath>
#include <stdexcept>

#include "nuv/core.hpp"

namespace nuv {

SymMat cross_from_model(const DistortionModel& model) {
    const int k = model.d_tau();
    if (model.cov.size() != k)
        throw std::invalid_argument("covariance size does not match the mean");
    SymMat cross(k);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j)
            cross(i, j) = model.cov(i, j) + model.mu[i] * model.mu[j];
    return cross;
}

SymMat estimate_cross(const std::vector<std::vector<double>>& samples) {
    if (samples.empty())
        throw std::invalid_argument("need at least one sample");
    const int k = static_cast<int>(samples.front().size());
    for (const auto& s : samples)
        if (static_cast<int>(s.size()) != k)
            throw std::invalid_argument("samples have inconsistent lengths");
    SymMat cross(k);
    for (const auto& s : samples) {
        for (int i = 0; i < k; ++i) {
            const double si = s[i];
            for (int j = i; j < k; ++j) cross(i, j) += si * s[j];
        }
    }
    const double inv_n = 1.0 / static_cast<double>(samples.size());
    for (int i = 0; i < k; ++i)
        for (int j = i; j < k; ++j) {
            cross(i, j) *= inv_n;
            cross(j, i) = cross(i, j);
        }
    return cross;
}

bool cholesky_factor(const SymMat& a, SymMat& lower, double pivot_tol) {
    const int n = a.size();
    lower = SymMat(n);
    for (int j = 0; j < n; ++j) {
        double pivot = a(j, j);
        for (int k = 0; k < j; ++k) pivot -= lower(j, k) * lower(j, k);
        if (pivot < -pivot_tol) return false;
        if (pivot > 0.0) {
            const double ljj = std::sqrt(pivot);
            lower(j, j) = ljj;
            for (int i = j + 1; i < n; ++i) {
                double s = a(i, j);
                for (int k = 0; k < j; ++k) s -= lower(i, k) * lower(j, k);
                lower(i, j) = s / ljj;
            }
        }
        // pivot in [-tol, 0]: the column is linearly dependent, leave it zero
    }
    return true;
}

std::vector<double> sample_distortion(const DistortionModel& model, Rng& rng) {
    const int k = model.d_tau();
    if (model.cov.size() != k)
        throw std::invalid_argument("covariance size does not match the mean");

    const double base_jitter = 1e-10 * model.cov.trace() / std::max(k, 1);
    SymMat lower(k);
    bool ok = false;
    double jitter = base_jitter;
    for (int attempt = 0; attempt < 3 && !ok; ++attempt, jitter *= 10.0) {
        SymMat a = model.cov;
        for (int i = 0; i < k; ++i) a(i, i) += jitter;
        ok = cholesky_factor(a, lower);
    }
    if (!ok)
        throw degenerate_error("covariance is not positive semidefinite");

    std::vector<double> z(k);
    for (int i = 0; i < k; ++i) z[i] = rng.normal();
    std::vector<double> m(model.mu);
    for (int i = 0; i < k; ++i) {
        double s = 0.0;
        for (int j = 0; j <= i; ++j) s += lower(i, j) * z[j];
        m[i] += s;
    }
    return m;
}

DistortionModel random_general_model(int d_tau, Rng& rng) {
    if (d_tau < 1)
        throw std::invalid_argument("model dimension must be positive");
    DistortionModel model;
    model.mu.resize(d_tau);
    for (int i = 0; i < d_tau; ++i) model.mu[i] = rng.normal();

    std::vector<double> g(static_cast<std::size_t>(d_tau) * d_tau);
    for (double& x : g) x = rng.normal();

    model.cov = SymMat(d_tau);
    const double inv = 1.0 / static_cast<double>(d_tau);
    for (int i = 0; i < d_tau; ++i) {
        const double* gi = g.data() + static_cast<std::size_t>(i) * d_tau;
        for (int j = i; j < d_tau; ++j) {
            const double* gj = g.data() + static_cast<std::size_t>(j) * d_tau;
            double s = 0.0;
            for (int k = 0; k < d_tau; ++k) s += gi[k] * gj[k];
            model.cov(i, j) = s * inv;
            model.cov(j, i) = model.cov(i, j);
        }
    }
    return model;
}

DistortionModel spherical_model(std::span<const double> tau, double sigma2_m) {
    if (!(sigma2_m >= 0.0))
        throw std::invalid_argument("distortion variance must be nonnegative");
    DistortionModel model;
    model.mu.assign(tau.begin(), tau.end());
    model.cov = SymMat::scaled_identity(static_cast<int>(tau.size()), sigma2_m);
    return model;
}

} // namespace nuv
