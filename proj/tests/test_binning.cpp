#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "nuv/binning.hpp"
#include "nuv/core.hpp"
#include "nuv/matrix.hpp"
#include "nuv/rng.hpp"
#include "oracles.hpp"

using namespace nuv;

namespace {

// Build a decomposition through the real path from unique values + counts.
FullRankDecomposition make_fr(const std::vector<double>& tau, const std::vector<int>& n) {
    std::vector<double> t;
    for (std::size_t u = 0; u < tau.size(); ++u)
        for (int c = 0; c < n[u]; ++c)
            t.push_back(tau[u]);
    return full_rank_decompose(t);
}

FullRankDecomposition random_fr(Rng& rng, int d_tau, int max_mult) {
    std::vector<double> tau(d_tau);
    double x = rng.uniform(0.0, 1.0);
    for (int u = 0; u < d_tau; ++u) {
        x += 0.05 + rng.uniform(0.0, 2.0);
        tau[u] = x;
    }
    std::vector<int> n(d_tau);
    for (int& v : n)
        v = rng.uniform_int(1, max_mult);
    return make_fr(tau, n);
}

SymMat random_psd(Rng& rng, int d) {
    SymMat g(d), out(d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            g(i, j) = rng.normal();
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) {
            double s = 0.0;
            for (int k = 0; k < d; ++k)
                s += g(i, k) * g(j, k);
            out(i, j) = s;
            out(j, i) = s;
        }
    return out;
}

double brute_force_best_objective(const SymMat& cross, std::span<const int> n_tau, int b) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& p : oracles::all_partitions(static_cast<int>(n_tau.size()), b))
        best = std::max(best, frobenius_objective(p, cross, n_tau));
    return best;
}

} // namespace

TEST_CASE("bin count rules") {
    const BinCountRules r256 = bin_count_rules(256);
    CHECK(r256.sturges == 9);
    CHECK(r256.rice == 13);
    CHECK(r256.sqrt_rule == 16);

    const BinCountRules r1000 = bin_count_rules(1000);
    CHECK(r1000.sturges == 11);
    CHECK(r1000.rice == 20);
    CHECK(r1000.sqrt_rule == 32);

    const BinCountRules r1 = bin_count_rules(1);
    CHECK(r1.sturges == 1);
    CHECK(r1.rice == 1);
    CHECK(r1.sqrt_rule == 1);

    SUBCASE("integer-exact formulas with clamping") {
        for (int d = 1; d <= 2100; ++d) {
            int sturges = 1;
            while ((1LL << (sturges - 1)) < d)
                ++sturges; // smallest k with 2^(k-1) >= d, i.e. ceil(log2 d)+1
            int rice = 1;
            while (static_cast<long long>(rice) * rice * rice < 8LL * d)
                ++rice;
            int sq = 1;
            while (static_cast<long long>(sq) * sq < d)
                ++sq;
            const BinCountRules r = bin_count_rules(d);
            CHECK(r.sturges == std::min(sturges, d));
            CHECK(r.rice == std::min(rice, d));
            CHECK(r.sqrt_rule == std::min(sq, d));
        }
    }

    CHECK_THROWS_AS(bin_count_rules(0), std::invalid_argument);
}

TEST_CASE("equal-width binning") {
    const FullRankDecomposition fr = make_fr({0.0, 2.0, 5.0}, {1, 1, 1});
    const BinPartition two = eqw_binning(fr, 2);
    CHECK(two.cuts == std::vector<int>{0, 2, 3}); // split at value 2.5

    const BinPartition one = eqw_binning(fr, 1);
    CHECK(one.cuts == std::vector<int>{0, 3});

    SUBCASE("empty value intervals are dropped") {
        const FullRankDecomposition gap = make_fr({0.0, 0.1, 10.0}, {1, 1, 1});
        const BinPartition p = eqw_binning(gap, 5);
        CHECK(p.bins() == 2);
        CHECK(p.cuts == std::vector<int>{0, 2, 3});
    }
    SUBCASE("b at least d_tau degenerates to singletons") {
        const BinPartition p = eqw_binning(fr, 50);
        CHECK(p.cuts == std::vector<int>{0, 1, 2, 3});
    }
    SUBCASE("every value lands in the interval that covers it") {
        Rng rng(11);
        for (int rep = 0; rep < 50; ++rep) {
            const FullRankDecomposition r = random_fr(rng, 12, 3);
            const int b = rng.uniform_int(1, 8);
            const BinPartition p = eqw_binning(r, b);
            REQUIRE_NOTHROW(validate_partition(p, r.d_tau()));
            CHECK(p.bins() <= b);
            const double lo = r.tau.front(), hi = r.tau.back();
            const double width = (hi - lo) / b;
            // interior cuts must sit at interval boundaries: the two values
            // they separate belong to different intervals
            for (std::size_t j = 1; j + 1 < p.cuts.size(); ++j) {
                const double left = r.tau[p.cuts[j] - 1];
                const double right = r.tau[p.cuts[j]];
                const int cell_left =
                    std::min(b - 1, static_cast<int>((left - lo) / width));
                const int cell_right =
                    std::min(b - 1, static_cast<int>((right - lo) / width));
                CHECK(cell_left < cell_right);
            }
        }
    }
    CHECK_THROWS_AS(eqw_binning(fr, 0), std::invalid_argument);
}

TEST_CASE("equal-frequency binning") {
    SUBCASE("exact divisibility") {
        const FullRankDecomposition fr =
            make_fr({1, 2, 3, 4, 5, 6}, {1, 1, 1, 1, 1, 1});
        const BinPartition p = eqf_binning(fr, 3);
        CHECK(p.cuts == std::vector<int>{0, 2, 4, 6});
    }
    SUBCASE("single feasible cut wins regardless of imbalance") {
        const FullRankDecomposition fr = make_fr({0.0, 1.0}, {5, 1});
        const BinPartition p = eqf_binning(fr, 2);
        CHECK(p.cuts == std::vector<int>{0, 1, 2});
    }
    SUBCASE("cuts chase the nearest cumulative count") {
        const FullRankDecomposition fr = make_fr({0.0, 1.0, 2.0, 3.0}, {1, 1, 1, 3});
        const BinPartition p = eqf_binning(fr, 2); // target 3|3
        CHECK(p.cuts == std::vector<int>{0, 3, 4});
    }
    SUBCASE("infeasible when bins exceed unique values") {
        const FullRankDecomposition fr = make_fr({0.0, 1.0}, {3, 3});
        CHECK_THROWS_AS(eqf_binning(fr, 3), infeasible_error);
    }
    SUBCASE("balance within the largest tie group") {
        Rng rng(23);
        for (int rep = 0; rep < 200; ++rep) {
            const int d_tau = rng.uniform_int(2, 26);
            const FullRankDecomposition fr = random_fr(rng, d_tau, 5);
            const int b = rng.uniform_int(1, d_tau);
            const BinPartition p = eqf_binning(fr, b);
            REQUIRE_NOTHROW(validate_partition(p, d_tau));
            CHECK(p.bins() == b);
            std::vector<int> counts(static_cast<std::size_t>(b), 0);
            for (int j = 0; j < b; ++j)
                for (int u = p.cuts[static_cast<std::size_t>(j)];
                     u < p.cuts[static_cast<std::size_t>(j) + 1]; ++u)
                    counts[static_cast<std::size_t>(j)] += fr.n_tau[static_cast<std::size_t>(u)];
            const auto [mn, mx] = std::minmax_element(counts.begin(), counts.end());
            const int max_mult = *std::max_element(fr.n_tau.begin(), fr.n_tau.end());
            CHECK(*mx - *mn <= max_mult);
        }
    }
}

TEST_CASE("k-means binning") {
    SUBCASE("obvious gap") {
        const FullRankDecomposition fr = make_fr({0, 1, 10, 11}, {1, 1, 1, 1});
        const BinPartition p = kmeans_binning(fr, 2);
        CHECK(p.cuts == std::vector<int>{0, 2, 4});
        CHECK(representation_error(fr, p) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("singleton bins cost nothing") {
        const FullRankDecomposition fr = make_fr({3, 5, 9}, {2, 1, 4});
        const BinPartition p = kmeans_binning(fr, 3);
        CHECK(p.cuts == std::vector<int>{0, 1, 2, 3});
        CHECK(representation_error(fr, p) == 0.0);
    }
    SUBCASE("equal-cost solutions resolve to the smallest cut vector") {
        const FullRankDecomposition fr = make_fr({0, 1, 2}, {1, 1, 1});
        const BinPartition p = kmeans_binning(fr, 2);
        CHECK(oracles::partition_cost(fr, BinPartition{{0, 1, 3}}) ==
              oracles::partition_cost(fr, BinPartition{{0, 2, 3}}));
        CHECK(p.cuts == std::vector<int>{0, 1, 3});
    }
    SUBCASE("matches exhaustive enumeration") {
        Rng rng(37);
        for (int rep = 0; rep < 100; ++rep) {
            const int d_tau = rng.uniform_int(2, 12);
            const int b = rng.uniform_int(1, std::min(4, d_tau));
            const FullRankDecomposition fr = random_fr(rng, d_tau, 3);
            const BinPartition p = kmeans_binning(fr, b);
            REQUIRE_NOTHROW(validate_partition(p, d_tau));

            // evaluate both sides through representation_error so equality
            // compares like against like
            double best = std::numeric_limits<double>::infinity();
            for (const auto& q : oracles::all_partitions(d_tau, b))
                best = std::min(best, representation_error(fr, q));
            CHECK(representation_error(fr, p) == best);

            // independent arithmetic agrees to rounding error
            CHECK(representation_error(fr, p) ==
                  doctest::Approx(oracles::best_partition_cost(fr, b))
                      .epsilon(1e-9));
        }
    }
    SUBCASE("infeasible beyond d_tau") {
        const FullRankDecomposition fr = make_fr({0.0, 1.0}, {1, 1});
        CHECK_THROWS_AS(kmeans_binning(fr, 3), infeasible_error);
    }
}

TEST_CASE("alignment objective") {
    SUBCASE("identity cross-products make every partition worth b sigma^2") {
        const double s2 = 0.7;
        const std::vector<int> n(6, 1);
        const SymMat cross = SymMat::scaled_identity(6, s2);
        for (int b = 1; b <= 6; ++b)
            for (const auto& p : oracles::all_partitions(6, b))
                CHECK(frobenius_objective(p, cross, n) ==
                      doctest::Approx(b * s2).epsilon(1e-12));
    }
    SUBCASE("single bin sums everything") {
        Rng rng(41);
        const SymMat cross = random_psd(rng, 5);
        const std::vector<int> n(5, 1);
        double sum = 0.0;
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j)
                sum += cross(i, j);
        CHECK(frobenius_objective(BinPartition{{0, 5}}, cross, n) ==
              doctest::Approx(sum / 5.0).epsilon(1e-12));
    }
    SUBCASE("agrees with the dense-matrix evaluation") {
        Rng rng(43);
        for (int rep = 0; rep < 100; ++rep) {
            const int d_tau = rng.uniform_int(2, 8);
            const SymMat cross = random_psd(rng, d_tau);
            std::vector<int> n(static_cast<std::size_t>(d_tau));
            for (int& v : n)
                v = rng.uniform_int(1, 3);
            const int b = rng.uniform_int(1, d_tau);
            const auto parts = oracles::all_partitions(d_tau, b);
            const auto& p = parts[static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<int>(parts.size()) - 1))];
            CHECK(frobenius_objective(p, cross, n) ==
                  doctest::Approx(oracles::frobenius_dense(p, cross, n))
                      .epsilon(1e-9));
        }
    }
}

TEST_CASE("greedy alignment search") {
    SUBCASE("finds the block boundary") {
        SymMat cross(6);
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j) {
                const bool same = (i < 3) == (j < 3);
                cross(i, j) = same ? (i == j ? 2.0 : 1.0) : 0.0;
            }
        const std::vector<int> n(6, 1);
        for (std::uint64_t seed = 0; seed < 6; ++seed) {
            GreedyConfig cfg;
            cfg.seed = seed;
            const GreedyResult res = greedy_binning(cross, n, 2, cfg);
            CHECK(res.partition.cuts == std::vector<int>{0, 3, 6});
            CHECK(res.objective == doctest::Approx(8.0).epsilon(1e-12));
        }
    }
    SUBCASE("only one feasible partition at b equal to d_tau") {
        Rng rng(47);
        const SymMat cross = random_psd(rng, 5);
        const std::vector<int> n(5, 1);
        const GreedyResult res = greedy_binning(cross, n, 5);
        CHECK(res.partition.cuts == std::vector<int>{0, 1, 2, 3, 4, 5});
        CHECK(res.moves_per_restart == std::vector<std::size_t>{0});
        CHECK(res.trace.size() == 1);
    }
    SUBCASE("trace climbs strictly and the final value checks out") {
        Rng rng(53);
        for (int rep = 0; rep < 100; ++rep) {
            const int d_tau = rng.uniform_int(4, 12);
            const SymMat cross = random_psd(rng, d_tau);
            std::vector<int> n(static_cast<std::size_t>(d_tau));
            for (int& v : n)
                v = rng.uniform_int(1, 3);
            const int b = rng.uniform_int(2, std::min(4, d_tau));
            GreedyConfig cfg;
            cfg.seed = 1000 + static_cast<std::uint64_t>(rep);
            const GreedyResult res = greedy_binning(cross, n, b, cfg);

            REQUIRE(!res.trace.empty());
            for (std::size_t i = 1; i < res.trace.size(); ++i)
                CHECK(res.trace[i] > res.trace[i - 1]);
            CHECK(res.trace.back() == res.objective);

            const double fresh = frobenius_objective(res.partition, cross, n);
            CHECK(res.objective ==
                  doctest::Approx(fresh).epsilon(1e-9));

            const double best = brute_force_best_objective(cross, n, b);
            CHECK(res.objective <= best + 1e-9 * std::abs(best));
        }
    }
    SUBCASE("reaches the optimum often enough to be useful") {
        Rng rng(59);
        int hits = 0;
        const int reps = 100;
        for (int rep = 0; rep < reps; ++rep) {
            const int d_tau = rng.uniform_int(4, 12);
            const SymMat cross = random_psd(rng, d_tau);
            const std::vector<int> n(static_cast<std::size_t>(d_tau), 1);
            const int b = rng.uniform_int(2, 4);
            GreedyConfig cfg;
            cfg.seed = static_cast<std::uint64_t>(rep);
            cfg.restarts = 4;
            const GreedyResult res = greedy_binning(cross, n, b, cfg);
            const double best = brute_force_best_objective(cross, n, b);
            if (res.objective >= best - 1e-9 * std::abs(best))
                ++hits;
        }
        MESSAGE("greedy hit the global optimum in ", hits, "/", reps, " runs");
        CHECK(hits > reps / 2);
    }
    SUBCASE("identity cross-products leave greedy indifferent") {
        // exactly representable variance: every gain evaluates to exactly
        // zero, so no move fires at all
        const SymMat exact = SymMat::scaled_identity(8, 1.25);
        const std::vector<int> n(8, 1);
        for (std::uint64_t seed = 0; seed < 4; ++seed) {
            GreedyConfig cfg;
            cfg.seed = seed;
            const GreedyResult res = greedy_binning(exact, n, 3, cfg);
            CHECK(res.objective == doctest::Approx(3 * 1.25).epsilon(1e-12));
            CHECK(res.moves_per_restart == std::vector<std::size_t>{0});
        }
        // a variance that rounds may let last-ulp noise trigger moves, but
        // the objective cannot leave b*sigma^2
        for (std::uint64_t seed = 0; seed < 4; ++seed) {
            GreedyConfig cfg;
            cfg.seed = seed;
            const GreedyResult res =
                greedy_binning(SymMat::scaled_identity(8, 1.3), n, 3, cfg);
            CHECK(res.objective == doctest::Approx(3 * 1.3).epsilon(1e-12));
        }
    }
    SUBCASE("same seed, same answer") {
        Rng rng(61);
        const SymMat cross = random_psd(rng, 10);
        const std::vector<int> n(10, 1);
        GreedyConfig cfg;
        cfg.seed = 99;
        cfg.restarts = 3;
        const GreedyResult a = greedy_binning(cross, n, 3, cfg);
        const GreedyResult b = greedy_binning(cross, n, 3, cfg);
        CHECK(a.partition.cuts == b.partition.cuts);
        CHECK(a.objective == b.objective);
        CHECK(a.best_restart == b.best_restart);
        CHECK(a.trace == b.trace);
    }
    SUBCASE("restarts never hurt") {
        Rng rng(67);
        for (int rep = 0; rep < 20; ++rep) {
            const SymMat cross = random_psd(rng, 9);
            const std::vector<int> n(9, 1);
            GreedyConfig one, many;
            one.seed = many.seed = static_cast<std::uint64_t>(rep);
            one.restarts = 1;
            many.restarts = 6;
            CHECK(greedy_binning(cross, n, 3, many).objective >=
                  greedy_binning(cross, n, 3, one).objective);
        }
    }
    SUBCASE("iteration cap trips the safety error") {
        SymMat cross(40);
        for (int i = 0; i < 40; ++i)
            for (int j = 0; j < 40; ++j) {
                const bool same = (i < 20) == (j < 20);
                cross(i, j) = same ? (i == j ? 2.0 : 1.0) : 0.0;
            }
        const std::vector<int> n(40, 1);
        GreedyConfig cfg;
        cfg.max_iterations = 1;
        CHECK_THROWS_AS(greedy_binning(cross, n, 2, cfg), std::logic_error);
    }
    SUBCASE("infeasible beyond d_tau") {
        const SymMat cross = SymMat::scaled_identity(3, 1.0);
        const std::vector<int> n(3, 1);
        CHECK_THROWS_AS(greedy_binning(cross, n, 4, GreedyConfig{}), infeasible_error);
    }
}
