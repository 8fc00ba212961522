#include "nuv/binning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "nuv/rng.hpp"

namespace nuv {

BinCountRules bin_count_rules(int d_tau) {
    if (d_tau < 1)
        throw std::invalid_argument("d_tau must be positive");
    const auto clamp = [d_tau](long long v) {
        return static_cast<int>(std::min<long long>(v, d_tau));
    };

    // ceil(log2 d_tau): number of bits needed for d_tau - 1
    long long sturges = 1;
    {
        int bits = 0;
        unsigned long long x = static_cast<unsigned long long>(d_tau) - 1;
        while (x) {
            ++bits;
            x >>= 1;
        }
        sturges = bits + 1;
    }

    // smallest k with k^3 >= 8*d_tau, i.e. ceil(2 * d_tau^(1/3)),
    // with integer correction of the floating-point guess
    long long rice = static_cast<long long>(std::ceil(2.0 * std::cbrt(static_cast<double>(d_tau))));
    while (rice > 1 && (rice - 1) * (rice - 1) * (rice - 1) >= 8LL * d_tau)
        --rice;
    while (rice * rice * rice < 8LL * d_tau)
        ++rice;

    // smallest k with k^2 >= d_tau
    long long sq = static_cast<long long>(std::ceil(std::sqrt(static_cast<double>(d_tau))));
    while (sq > 1 && (sq - 1) * (sq - 1) >= d_tau)
        --sq;
    while (sq * sq < d_tau)
        ++sq;

    return {clamp(sturges), clamp(rice), clamp(sq)};
}

BinPartition eqw_binning(const FullRankDecomposition& fr, int b) {
    if (b < 1)
        throw infeasible_error("bin count must be positive");
    const int d_tau = fr.d_tau();
    BinPartition p;
    if (b == 1 || d_tau == 1) {
        p.cuts = {0, d_tau};
        return p;
    }
    const double lo = fr.tau.front();
    const double span = fr.tau.back() - lo;
    p.cuts.push_back(0);
    int prev_interval = 0;
    for (int u = 1; u < d_tau; ++u) {
        int k = static_cast<int>((fr.tau[u] - lo) * b / span);
        if (k > b - 1)
            k = b - 1;
        if (k != prev_interval) {
            p.cuts.push_back(u);
            prev_interval = k;
        }
    }
    p.cuts.push_back(d_tau);
    return p;
}

BinPartition eqf_binning(const FullRankDecomposition& fr, int b) {
    const int d_tau = fr.d_tau();
    if (b < 1)
        throw infeasible_error("bin count must be positive");
    if (b > d_tau)
        throw infeasible_error("more bins than unique values");

    std::vector<long long> cum(d_tau + 1, 0);
    for (int u = 0; u < d_tau; ++u)
        cum[u + 1] = cum[u] + fr.n_tau[u];
    const long long total = cum[d_tau];

    BinPartition p;
    if (b == 1) {
        p.cuts = {0, d_tau};
        return p;
    }

    // Chasing each quantile target independently can leave the counts far
    // more uneven than the ties force. Fix the tightest achievable count
    // range [L, U] first, then place cuts near the targets within it.

    // can the values be cut into exactly b bins, every count in [L, U]?
    const auto feasible = [&](long long L, long long U) -> bool {
        std::vector<char> prev(d_tau + 1, 0), cur(d_tau + 1);
        prev[0] = 1;
        for (int k = 1; k <= b; ++k) {
            std::vector<int> pre(d_tau + 2, 0);
            for (int c = 0; c <= d_tau; ++c)
                pre[c + 1] = pre[c] + (prev[c] ? 1 : 0);
            std::fill(cur.begin(), cur.end(), 0);
            int qlo = 0, qhi = -1;
            for (int c = k; c <= d_tau; ++c) {
                while (qlo <= d_tau && cum[qlo] < cum[c] - U)
                    ++qlo;
                while (qhi + 1 < c && cum[qhi + 1] <= cum[c] - L)
                    ++qhi;
                if (qlo <= qhi && pre[qhi + 1] - pre[qlo] > 0)
                    cur[c] = 1;
            }
            std::swap(prev, cur);
        }
        return prev[d_tau] != 0;
    };

    long long best_spread = std::numeric_limits<long long>::max();
    long long bestL = 1, bestU = total;
    for (long long L = 1; L * b <= total; ++L) {
        long long lo = std::max(L, (total + b - 1) / b), hi = total;
        if (!feasible(L, hi))
            continue;
        while (lo < hi) {
            const long long mid = lo + (hi - lo) / 2;
            if (feasible(L, mid))
                hi = mid;
            else
                lo = mid + 1;
        }
        // on equal spread prefer the larger lower bound: counts hug the mean
        if (lo - L <= best_spread) {
            best_spread = lo - L;
            bestL = L;
            bestU = lo;
        }
    }

    // suffix[k][u] = uniques u.. splittable into exactly k in-range bins
    std::vector<std::vector<char>> suffix(
        static_cast<std::size_t>(b) + 1,
        std::vector<char>(static_cast<std::size_t>(d_tau) + 1, 0));
    suffix[0][static_cast<std::size_t>(d_tau)] = 1;
    for (int k = 1; k <= b; ++k) {
        std::vector<int> pre(d_tau + 2, 0);
        for (int c = 0; c <= d_tau; ++c)
            pre[c + 1] = pre[c] + (suffix[k - 1][c] ? 1 : 0);
        int clo = 0, chi = -1;
        for (int u = 0; u + k <= d_tau; ++u) {
            while (clo <= d_tau && cum[clo] < cum[u] + bestL)
                ++clo;
            while (chi + 1 <= d_tau && cum[chi + 1] <= cum[u] + bestU)
                ++chi;
            const int lo2 = std::max(clo, u + 1);
            if (lo2 <= chi && pre[chi + 1] - pre[lo2] > 0)
                suffix[k][u] = 1;
        }
    }

    p.cuts.assign(b + 1, 0);
    p.cuts[b] = d_tau;
    int prev_cut = 0;
    for (int j = 1; j < b; ++j) {
        const double target = static_cast<double>(total) * j / b;
        int best_c = -1;
        double best_gap = std::numeric_limits<double>::infinity();
        for (int c = prev_cut + 1; c < d_tau; ++c) {
            const long long count = cum[c] - cum[prev_cut];
            if (count < bestL)
                continue;
            if (count > bestU)
                break;
            if (!suffix[b - j][c])
                continue;
            const double gap = std::fabs(static_cast<double>(cum[c]) - target);
            if (gap < best_gap) {
                best_gap = gap;
                best_c = c;
            }
        }
        p.cuts[j] = best_c;
        prev_cut = best_c;
    }
    return p;
}

BinPartition kmeans_binning(const FullRankDecomposition& fr, int b) {
    const int d_tau = fr.d_tau();
    if (b < 1)
        throw infeasible_error("bin count must be positive");
    if (b > d_tau)
        throw infeasible_error("more bins than unique values");

    // prefix sums of weights, weighted values and weighted squares
    std::vector<double> w0(d_tau + 1, 0.0), w1(d_tau + 1, 0.0), w2(d_tau + 1, 0.0);
    for (int u = 0; u < d_tau; ++u) {
        const double n = fr.n_tau[u];
        w0[u + 1] = w0[u] + n;
        w1[u + 1] = w1[u] + n * fr.tau[u];
        w2[u + 1] = w2[u] + n * fr.tau[u] * fr.tau[u];
    }
    const auto cost = [&](int i, int c) {
        const double n = w0[c] - w0[i];
        const double s = w1[c] - w1[i];
        return (w2[c] - w2[i]) - s * s / n;
    };

    const double INF = std::numeric_limits<double>::infinity();

    // best[i] = minimal cost of splitting the suffix [i, d_tau) into the
    // current number of bins; filled bottom-up from one bin to b. Suffix
    // orientation lets the reconstruction fix the earliest cut first, which
    // combined with the smallest-argmin rule yields the lexicographically
    // smallest optimal cut vector.
    std::vector<double> best(d_tau + 1, INF), next(d_tau + 1, INF);
    std::vector<std::vector<int>> arg(b + 1);
    for (int i = 0; i <= d_tau - 1; ++i)
        best[i] = cost(i, d_tau);
    for (int m = 2; m <= b; ++m) {
        arg[m].assign(d_tau + 1, -1);
        std::fill(next.begin(), next.end(), INF);
        for (int i = 0; i <= d_tau - m; ++i) {
            double v = INF;
            int vc = -1;
            const int chi = d_tau - (m - 1);
            for (int c = i + 1; c <= chi; ++c) {
                const double cand = cost(i, c) + best[c];
                if (cand < v) {
                    v = cand;
                    vc = c;
                }
            }
            next[i] = v;
            arg[m][i] = vc;
        }
        std::swap(best, next);
    }

    BinPartition p;
    p.cuts.resize(b + 1);
    p.cuts[0] = 0;
    p.cuts[b] = d_tau;
    int at = 0;
    for (int m = b; m >= 2; --m) {
        at = arg[m][at];
        p.cuts[b - m + 1] = at;
    }
    return p;
}

double frobenius_objective(const BinPartition& p, const SymMat& cross,
                           std::span<const int> n_tau) {
    const int d_tau = static_cast<int>(n_tau.size());
    if (cross.size() != d_tau)
        throw std::invalid_argument("cross matrix size does not match n_tau");
    validate_partition(p, d_tau);

    double total = 0.0;
    for (int j = 0; j < p.bins(); ++j) {
        double s = 0.0, n = 0.0;
        for (int u = p.cuts[j]; u < p.cuts[j + 1]; ++u) {
            const double nu = n_tau[u];
            n += nu;
            s += nu * nu * cross(u, u);
            for (int v = u + 1; v < p.cuts[j + 1]; ++v)
                s += 2.0 * nu * n_tau[v] * cross(u, v);
        }
        total += s / n;
    }
    return total;
}

namespace {

struct GreedyPass {
    std::vector<int> cuts;
    double objective = 0.0;
    std::vector<double> trace;
};

// contribution of element e (diagonal plus cross terms against bin j's
// current members, e itself excluded)
double row_col_sum(const SymMat& cross, std::span<const int> n_tau,
                   const std::vector<int>& cuts, int e, int j) {
    const double ne = n_tau[e];
    double r = ne * ne * cross(e, e);
    for (int u = cuts[j]; u < cuts[j + 1]; ++u)
        if (u != e)
            r += 2.0 * ne * n_tau[u] * cross(e, u);
    return r;
}

GreedyPass greedy_pass(const SymMat& cross, std::span<const int> n_tau, int b,
                       std::uint64_t seed, long max_iterations) {
    const int d_tau = static_cast<int>(n_tau.size());
    GreedyPass pass;
    pass.cuts.resize(b + 1);
    pass.cuts[0] = 0;
    pass.cuts[b] = d_tau;

    // uniformly random set of b-1 interior cuts via partial Fisher-Yates
    if (b > 1) {
        Rng rng(seed);
        std::vector<int> positions(d_tau - 1);
        std::iota(positions.begin(), positions.end(), 1);
        for (int i = 0; i < b - 1; ++i) {
            const int j = i + rng.uniform_int(0, static_cast<int>(positions.size()) - 1 - i);
            std::swap(positions[i], positions[j]);
        }
        std::sort(positions.begin(), positions.begin() + (b - 1));
        for (int i = 0; i < b - 1; ++i)
            pass.cuts[i + 1] = positions[i];
    }

    // per-bin weighted block sums and weighted counts
    std::vector<double> s(b, 0.0), nw(b, 0.0);
    for (int j = 0; j < b; ++j) {
        for (int u = pass.cuts[j]; u < pass.cuts[j + 1]; ++u) {
            const double nu = n_tau[u];
            nw[j] += nu;
            s[j] += nu * nu * cross(u, u);
            for (int v = u + 1; v < pass.cuts[j + 1]; ++v)
                s[j] += 2.0 * nu * n_tau[v] * cross(u, v);
        }
    }
    double T = 0.0;
    for (int j = 0; j < b; ++j)
        T += s[j] / nw[j];
    pass.trace.push_back(T);

    struct Move {
        double gain = 0.0;
        int boundary = -1;
        int elem = -1;
        double s_left = 0.0, s_right = 0.0, nw_left = 0.0, nw_right = 0.0;
    };

    for (long iter = 0;; ++iter) {
        if (iter >= max_iterations)
            throw std::logic_error("greedy binning exceeded the iteration cap; "
                                   "the objective should be bounded");
        Move best;
        for (int i = 1; i < b; ++i) {
            const double base = s[i - 1] / nw[i - 1] + s[i] / nw[i];
            // shift boundary left: last element of bin i-1 moves into bin i
            if (pass.cuts[i] - 1 > pass.cuts[i - 1]) {
                const int e = pass.cuts[i] - 1;
                Move m;
                m.boundary = i;
                m.elem = e;
                m.s_left = s[i - 1] - row_col_sum(cross, n_tau, pass.cuts, e, i - 1);
                m.s_right = s[i] + row_col_sum(cross, n_tau, pass.cuts, e, i);
                m.nw_left = nw[i - 1] - n_tau[e];
                m.nw_right = nw[i] + n_tau[e];
                m.gain = m.s_left / m.nw_left + m.s_right / m.nw_right - base;
                if (m.gain > best.gain)
                    best = m;
            }
            // shift boundary right: first element of bin i moves into bin i-1
            if (pass.cuts[i] + 1 < pass.cuts[i + 1]) {
                const int e = pass.cuts[i];
                Move m;
                m.boundary = i;
                m.elem = e;
                m.s_left = s[i - 1] + row_col_sum(cross, n_tau, pass.cuts, e, i - 1);
                m.s_right = s[i] - row_col_sum(cross, n_tau, pass.cuts, e, i);
                m.nw_left = nw[i - 1] + n_tau[e];
                m.nw_right = nw[i] - n_tau[e];
                m.gain = m.s_left / m.nw_left + m.s_right / m.nw_right - base;
                if (m.gain > best.gain)
                    best = m;
            }
        }
        if (best.boundary < 0 || !(T + best.gain > T))
            break;
        const int i = best.boundary;
        s[i - 1] = best.s_left;
        s[i] = best.s_right;
        nw[i - 1] = best.nw_left;
        nw[i] = best.nw_right;
        pass.cuts[i] += (best.elem == pass.cuts[i]) ? 1 : -1;
        T += best.gain;
        pass.trace.push_back(T);
    }

    pass.objective = T;
    return pass;
}

} // namespace

GreedyResult greedy_binning(const SymMat& cross, std::span<const int> n_tau, int b,
                            const GreedyConfig& cfg) {
    const int d_tau = static_cast<int>(n_tau.size());
    if (b < 1)
        throw infeasible_error("bin count must be positive");
    if (b > d_tau)
        throw infeasible_error("more bins than unique values");
    if (cross.size() != d_tau)
        throw std::invalid_argument("cross matrix size does not match n_tau");
    if (cfg.restarts < 1 || cfg.max_iterations < 1)
        throw std::invalid_argument("restarts and max_iterations must be positive");

    GreedyResult result;
    for (int r = 0; r < cfg.restarts; ++r) {
        GreedyPass pass = greedy_pass(cross, n_tau, b,
                                      cfg.seed ^ static_cast<std::uint64_t>(r),
                                      cfg.max_iterations);
        result.moves_per_restart.push_back(pass.trace.size() - 1);
        if (r == 0 || pass.objective > result.objective) {
            result.partition.cuts = std::move(pass.cuts);
            result.objective = pass.objective;
            result.trace = std::move(pass.trace);
            result.best_restart = r;
        }
    }
    return result;
}

} // namespace nuv
