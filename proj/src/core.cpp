#include "nuv/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <string>

namespace nuv {

void validate_partition(const BinPartition& p, int d_tau) {
    const auto& c = p.cuts;
    if (c.size() < 2)
        throw std::invalid_argument("partition needs at least one bin");
    if (c.front() != 0 || c.back() != d_tau)
        throw std::invalid_argument("partition cuts must start at 0 and end at d_tau");
    for (std::size_t j = 1; j < c.size(); ++j)
        if (c[j] <= c[j - 1])
            throw std::invalid_argument("partition contains an empty bin");
}

double population_variance(std::span<const double> v) {
    if (v.empty())
        throw std::invalid_argument("variance of empty vector");
    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v)
        mean += x;
    mean /= n;
    double ss = 0.0;
    for (double x : v)
        ss += (x - mean) * (x - mean);
    return ss / n;
}

FullRankDecomposition full_rank_decompose(std::span<const double> t,
                                          std::optional<int> round_digits) {
    if (t.size() < 2)
        throw std::invalid_argument("template needs at least two coordinates");
    std::vector<double> values(t.begin(), t.end());
    for (double x : values)
        if (!std::isfinite(x))
            throw std::invalid_argument("template contains a non-finite value");
    if (round_digits) {
        if (*round_digits < 0)
            throw std::invalid_argument("round_digits must be non-negative");
        // Correctly rounded decimal rounding of the stored value, with exact
        // midpoints going to even. Scaling by a power of ten first re-rounds
        // the product and can carry a value across the decimal midpoint.
        for (double& x : values) {
            const int n = std::snprintf(nullptr, 0, "%.*f", *round_digits, x);
            std::string s(static_cast<std::size_t>(n), '\0');
            std::snprintf(s.data(), s.size() + 1, "%.*f", *round_digits, x);
            x = std::strtod(s.c_str(), nullptr);
        }
    }

    const int d = static_cast<int>(values.size());
    std::vector<int> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return values[a] < values[b]; });

    FullRankDecomposition fr;
    fr.index_map.resize(d);
    for (int k = 0; k < d; ++k) {
        const int i = order[k];
        if (fr.tau.empty() || values[i] != fr.tau.back()) {
            fr.tau.push_back(values[i]);
            fr.n_tau.push_back(0);
        }
        ++fr.n_tau.back();
        fr.index_map[i] = static_cast<int>(fr.tau.size()) - 1;
    }
    return fr;
}

BinAssignment assign_bins(const FullRankDecomposition& fr, const BinPartition& p) {
    validate_partition(p, fr.d_tau());
    const int b = p.bins();
    std::vector<int> bin_of_unique(fr.d_tau());
    for (int j = 0; j < b; ++j)
        for (int u = p.cuts[j]; u < p.cuts[j + 1]; ++u)
            bin_of_unique[u] = j;

    BinAssignment a;
    a.bin_of.resize(fr.d());
    a.bin_counts.assign(b, 0);
    for (int i = 0; i < fr.d(); ++i) {
        a.bin_of[i] = bin_of_unique[fr.index_map[i]];
        ++a.bin_counts[a.bin_of[i]];
    }
    return a;
}

namespace {

// Window values grouped per bin and sorted. Every accumulation below visits
// them in an order that depends only on the per-bin value multisets, never
// on the coordinate order, so jointly permuting template and window
// reproduces results bit for bit.
std::vector<std::vector<double>> sorted_bin_values(const BinAssignment& a,
                                                   std::span<const double> w) {
    std::vector<std::vector<double>> by_bin(a.bins());
    for (int j = 0; j < a.bins(); ++j)
        by_bin[j].reserve(a.bin_counts[j]);
    for (int i = 0; i < a.d(); ++i)
        by_bin[a.bin_of[i]].push_back(w[i]);
    for (auto& values : by_bin)
        std::sort(values.begin(), values.end());
    return by_bin;
}

std::vector<double> bin_means(const std::vector<std::vector<double>>& by_bin) {
    std::vector<double> means(by_bin.size());
    for (std::size_t j = 0; j < by_bin.size(); ++j) {
        // Sorted bin with equal endpoints holds one repeated value; take it
        // directly so repeated smoothing and full-rank bins are residual-free.
        if (by_bin[j].front() == by_bin[j].back()) {
            means[j] = by_bin[j].front();
            continue;
        }
        double sum = 0.0;
        for (double v : by_bin[j])
            sum += v;
        means[j] = sum / static_cast<double>(by_bin[j].size());
    }
    return means;
}

} // namespace

std::vector<double> conditional_means(const BinAssignment& a, std::span<const double> w) {
    if (static_cast<int>(w.size()) != a.d())
        throw std::invalid_argument("window length does not match assignment");
    const std::vector<double> means = bin_means(sorted_bin_values(a, w));
    std::vector<double> out(w.size());
    for (int i = 0; i < a.d(); ++i)
        out[i] = means[a.bin_of[i]];
    return out;
}

double dissimilarity(const BinAssignment& a, std::span<const double> w) {
    if (static_cast<int>(w.size()) != a.d())
        throw std::invalid_argument("window length does not match assignment");
    const int d = a.d();

    const std::vector<std::vector<double>> by_bin = sorted_bin_values(a, w);
    const std::vector<double> means = bin_means(by_bin);

    double total = 0.0;
    for (const auto& values : by_bin)
        for (double v : values)
            total += v;
    const double mean = total / d;

    double denom = 0.0;
    for (const auto& values : by_bin)
        for (double v : values)
            denom += (v - mean) * (v - mean);
    if (denom == 0.0)
        throw degenerate_error("window is constant: dissimilarity undefined");

    double num = 0.0;
    for (std::size_t j = 0; j < by_bin.size(); ++j)
        for (double v : by_bin[j])
            num += (v - means[j]) * (v - means[j]);

    // num <= denom holds exactly in real arithmetic (bin means minimize the
    // within-bin sum of squares); clamp the last-ulp rounding overshoot
    double r = num / denom;
    if (r < 0.0) r = 0.0;
    if (r > 1.0) r = 1.0;
    return r;
}

double representation_error(const FullRankDecomposition& fr, const BinPartition& p) {
    validate_partition(p, fr.d_tau());
    double total = 0.0;
    for (int j = 0; j < p.bins(); ++j) {
        double wsum = 0.0, vsum = 0.0;
        for (int u = p.cuts[j]; u < p.cuts[j + 1]; ++u) {
            wsum += fr.n_tau[u];
            vsum += fr.n_tau[u] * fr.tau[u];
        }
        const double mean = vsum / wsum;
        for (int u = p.cuts[j]; u < p.cuts[j + 1]; ++u)
            total += fr.n_tau[u] * (fr.tau[u] - mean) * (fr.tau[u] - mean);
    }
    return total;
}

} // namespace nuv
