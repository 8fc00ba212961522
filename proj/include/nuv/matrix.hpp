#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace nuv {

// Dense square matrix of doubles, row-major. Used for cross-product and
// covariance matrices over the unique template values, which are symmetric
// but stored in full for simple indexed access.
class SymMat {
public:
    SymMat() = default;
    explicit SymMat(int n) : n_(n), a_(static_cast<std::size_t>(n) * n, 0.0) {}

    int size() const { return n_; }

    double& operator()(int i, int j) { return a_[static_cast<std::size_t>(i) * n_ + j]; }
    double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * n_ + j]; }

    double* data() { return a_.data(); }
    const double* data() const { return a_.data(); }

    static SymMat scaled_identity(int n, double s) {
        SymMat m(n);
        for (int i = 0; i < n; ++i)
            m(i, i) = s;
        return m;
    }

    double trace() const {
        double t = 0.0;
        for (int i = 0; i < n_; ++i)
            t += (*this)(i, i);
        return t;
    }

    // symmetry check with a tolerance relative to the largest entry pair
    bool is_symmetric(double rel_tol) const {
        for (int i = 0; i < n_; ++i)
            for (int j = i + 1; j < n_; ++j) {
                double a = (*this)(i, j), b = (*this)(j, i);
                double scale = std::fmax(std::fabs(a), std::fabs(b));
                if (std::fabs(a - b) > rel_tol * std::fmax(scale, 1.0))
                    return false;
            }
        return true;
    }

private:
    int n_ = 0;
    std::vector<double> a_;
};

} // namespace nuv
