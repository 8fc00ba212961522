#include "nuv/theory.hpp"

#include <cmath>
#include <stdexcept>

#include "nuv/binning.hpp"

namespace nuv {

namespace {

void check_noise_var(double noise_var) {
    if (!(noise_var >= 0.0))
        throw std::invalid_argument("noise variance must be nonnegative");
}

// Weighted d * Var(t) over the unique values, two-pass for stability.
double template_scatter(const FullRankDecomposition& fr) {
    const int k = fr.d_tau();
    const double d = static_cast<double>(fr.d());
    double mean = 0.0;
    for (int u = 0; u < k; ++u) mean += fr.n_tau[u] * fr.tau[u];
    mean /= d;
    double out = 0.0;
    for (int u = 0; u < k; ++u) {
        const double dev = fr.tau[u] - mean;
        out += fr.n_tau[u] * dev * dev;
    }
    return out;
}

} // namespace

Prediction predict_noise(int d, int b) {
    if (b < 1 || b >= d)
        throw infeasible_error("bin count must satisfy 1 <= b < d");
    Prediction p;
    p.numerator = static_cast<double>(d - b);
    p.denominator = static_cast<double>(d - 1);
    p.value = p.numerator / p.denominator;
    p.components = {{"d_minus_b", p.numerator}, {"d_minus_1", p.denominator}};
    return p;
}

Prediction predict_distorted(const BinPartition& p, const SymMat& cross,
                             std::span<const int> n_tau, double noise_var) {
    check_noise_var(noise_var);
    const int k = static_cast<int>(n_tau.size());
    if (cross.size() != k)
        throw std::invalid_argument("cross-moment matrix size does not match n_tau");
    validate_partition(p, k);

    double d = 0.0;
    for (int u = 0; u < k; ++u) d += n_tau[u];
    const int b = p.bins();

    // sum_u n_u * E[m_u^2]
    double second_moment = 0.0;
    for (int u = 0; u < k; ++u) second_moment += n_tau[u] * cross(u, u);

    // (1/d) * n^T Cross n
    double quad = 0.0;
    for (int u = 0; u < k; ++u) {
        double row = 0.0;
        for (int v = 0; v < k; ++v) row += n_tau[v] * cross(u, v);
        quad += n_tau[u] * row;
    }
    const double mean_square = quad / d;

    const double alignment = frobenius_objective(p, cross, n_tau);

    Prediction out;
    out.numerator = second_moment - alignment + noise_var * (d - b);
    out.denominator = second_moment - mean_square + noise_var * (d - 1);
    if (!(out.denominator > 0.0))
        throw degenerate_error("predicted window variance is not positive");
    out.value = out.numerator / out.denominator;
    out.components = {{"second_moment", second_moment},
                      {"alignment", alignment},
                      {"mean_square", mean_square},
                      {"noise_numerator", noise_var * (d - b)},
                      {"noise_denominator", noise_var * (d - 1)}};
    return out;
}

Prediction predict_localized(const BinPartition& p, const FullRankDecomposition& fr,
                             const SymMat& cov_centered, double noise_var) {
    check_noise_var(noise_var);
    const int k = fr.d_tau();
    if (cov_centered.size() != k)
        throw std::invalid_argument("covariance size does not match the template");
    validate_partition(p, k);

    const double d = static_cast<double>(fr.d());
    const int b = p.bins();

    double second_moment = 0.0;
    for (int u = 0; u < k; ++u) second_moment += fr.n_tau[u] * cov_centered(u, u);

    double quad = 0.0;
    for (int u = 0; u < k; ++u) {
        double row = 0.0;
        for (int v = 0; v < k; ++v) row += fr.n_tau[v] * cov_centered(u, v);
        quad += fr.n_tau[u] * row;
    }
    const double mean_square = quad / d;

    const double alignment = frobenius_objective(p, cov_centered, fr.n_tau);
    const double rep_err = representation_error(fr, p);
    const double scatter = template_scatter(fr);

    Prediction out;
    out.numerator = rep_err + second_moment - alignment + noise_var * (d - b);
    out.denominator = scatter + second_moment - mean_square + noise_var * (d - 1);
    if (!(out.denominator > 0.0))
        throw degenerate_error("predicted window variance is not positive");
    out.value = out.numerator / out.denominator;
    out.components = {{"representation_error", rep_err},
                      {"second_moment", second_moment},
                      {"alignment", alignment},
                      {"mean_square", mean_square},
                      {"template_scatter", scatter},
                      {"noise_numerator", noise_var * (d - b)},
                      {"noise_denominator", noise_var * (d - 1)}};
    return out;
}

Prediction predict_spherical(const BinPartition& p, const FullRankDecomposition& fr,
                             double distortion_var, double noise_var) {
    if (!(distortion_var >= 0.0))
        throw std::invalid_argument("distortion variance must be nonnegative");
    for (int n : fr.n_tau) {
        if (n != 1)
            throw infeasible_error(
                "isotropic prediction requires a template with all-distinct values");
    }
    return predict_localized(p, fr, SymMat::scaled_identity(fr.d_tau(), distortion_var),
                             noise_var);
}

Prediction predict_isotropic_closed_form(int d, int b, double distortion_var,
                                         double noise_var) {
    if (b < 1 || b >= d)
        throw infeasible_error("bin count must satisfy 1 <= b < d");
    if (!(distortion_var >= 0.0) || !(noise_var >= 0.0))
        throw std::invalid_argument("variances must be nonnegative");
    Prediction out;
    out.numerator = distortion_var * (d - b) + noise_var * (d - b);
    out.denominator = distortion_var * (d - 1) + noise_var * (d - 1);
    if (!(out.denominator > 0.0))
        throw degenerate_error("both variances are zero");
    out.value = out.numerator / out.denominator;
    out.components = {{"distortion_numerator", distortion_var * (d - b)},
                      {"noise_numerator", noise_var * (d - b)},
                      {"distortion_denominator", distortion_var * (d - 1)},
                      {"noise_denominator", noise_var * (d - 1)}};
    return out;
}

double discrimination_power(const Prediction& noise_pred, const Prediction& distorted_pred) {
    return noise_pred.value - distorted_pred.value;
}

} // namespace nuv
