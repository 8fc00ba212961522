#include "nuv/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "nuv/binning.hpp"
#include "nuv/core.hpp"
#include "nuv/distortion.hpp"
#include "nuv/rng.hpp"
#include "nuv/theory.hpp"

namespace nuv {

std::string strategy_name(Strategy s) {
    switch (s) {
        case Strategy::eqw: return "eqw";
        case Strategy::eqf: return "eqf";
        case Strategy::kmeans: return "kmeans";
        case Strategy::greedy: return "greedy";
    }
    throw std::invalid_argument("unknown strategy");
}

std::string BinSpec::label() const {
    switch (kind) {
        case Kind::fixed: return "fixed" + std::to_string(fixed);
        case Kind::sturges: return "sturges";
        case Kind::rice: return "rice";
        case Kind::sqrt_rule: return "sqrt";
    }
    throw std::invalid_argument("unknown bin spec");
}

int BinSpec::resolve(int d_tau) const {
    if (d_tau < 1) throw std::invalid_argument("d_tau must be positive");
    const BinCountRules rules = bin_count_rules(d_tau);
    switch (kind) {
        case Kind::fixed:
            if (fixed < 1) throw infeasible_error("fixed bin count must be positive");
            return std::min(fixed, d_tau);
        case Kind::sturges: return rules.sturges;
        case Kind::rice: return rules.rice;
        case Kind::sqrt_rule: return rules.sqrt_rule;
    }
    throw std::invalid_argument("unknown bin spec");
}

BinSpec BinSpec::parse(const std::string& text) {
    BinSpec spec;
    if (text == "sturges") { spec.kind = Kind::sturges; return spec; }
    if (text == "rice") { spec.kind = Kind::rice; return spec; }
    if (text == "sqrt") { spec.kind = Kind::sqrt_rule; return spec; }
    // Accept both plain integers and the round-tripped "fixedN" labels.
    const std::string digits = text.rfind("fixed", 0) == 0 ? text.substr(5) : text;
    std::size_t used = 0;
    int value = 0;
    try {
        value = std::stoi(digits, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("bin spec must be an integer or sturges|rice|sqrt");
    }
    if (used != digits.size())
        throw std::invalid_argument("bin spec must be an integer or sturges|rice|sqrt");
    // Nonpositive values parse fine and fail as infeasible when resolved.
    spec.kind = Kind::fixed;
    spec.fixed = value;
    return spec;
}

ExperimentConfig ExperimentConfig::defaults(Regime regime) {
    ExperimentConfig cfg;
    cfg.regime = regime;
    cfg.round_digits = (regime == Regime::general) ? std::optional<int>(3) : std::nullopt;
    cfg.bin_specs = {BinSpec{BinSpec::Kind::fixed, 2}, BinSpec{BinSpec::Kind::fixed, 5},
                     BinSpec{BinSpec::Kind::sturges}, BinSpec{BinSpec::Kind::rice},
                     BinSpec{BinSpec::Kind::sqrt_rule}};
    cfg.strategies = {Strategy::eqw, Strategy::eqf, Strategy::kmeans, Strategy::greedy};
    return cfg;
}

namespace {

constexpr const char* kTemplateDists[] = {"normal", "uniform", "bimodal"};

std::uint64_t hash_model(const DistortionModel& model) {
    std::uint64_t h = 1469598103934665603ull; // FNV-1a 64
    auto mix = [&h](double x) {
        std::uint64_t bits;
        std::memcpy(&bits, &x, sizeof bits);
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xffu;
            h *= 1099511628211ull;
        }
    };
    for (double x : model.mu) mix(x);
    const int k = model.cov.size();
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) mix(model.cov(i, j));
    return h;
}

// Coordinate grouping used by the eqf strategy: contiguous index ranges of
// near-equal size, bin_of[i] = floor(i * b / d). Deliberately blind to the
// template's values.
BinAssignment index_split_assignment(int d, int b) {
    BinAssignment a;
    a.bin_of.resize(d);
    a.bin_counts.assign(b, 0);
    for (int i = 0; i < d; ++i) {
        const int k = static_cast<int>(static_cast<long long>(i) * b / d);
        a.bin_of[i] = k;
        ++a.bin_counts[k];
    }
    return a;
}

// Alignment score of an arbitrary coordinate grouping against the
// unique-value second-moment matrix: sum over bins of the block sum of
// E[w_i w_j] (noise excluded) divided by the bin size.
double alignment_over_assignment(const BinAssignment& a, std::span<const int> index_map,
                                 const SymMat& cross) {
    const int b = a.bins();
    const int d = a.d();
    std::vector<std::vector<int>> members(b);
    for (int i = 0; i < d; ++i) members[a.bin_of[i]].push_back(index_map[i]);

    std::vector<double> cnt(cross.size(), 0.0);
    std::vector<int> touched;
    double total = 0.0;
    for (int k = 0; k < b; ++k) {
        touched.clear();
        for (int u : members[k]) {
            if (cnt[u] == 0.0) touched.push_back(u);
            cnt[u] += 1.0;
        }
        double block = 0.0;
        for (std::size_t p = 0; p < touched.size(); ++p) {
            const int u = touched[p];
            block += cnt[u] * cnt[u] * cross(u, u);
            for (std::size_t q = p + 1; q < touched.size(); ++q) {
                const int v = touched[q];
                block += 2.0 * cnt[u] * cnt[v] * cross(u, v);
            }
        }
        total += block / static_cast<double>(members[k].size());
        for (int u : touched) cnt[u] = 0.0;
    }
    return total;
}

// Per-bin squared-count sum of an assignment, sum over bins of
// (sum_u cnt_u^2) / |bin|, with cnt the multiplicity of unique value u in
// the bin. This is the alignment score for an identity second-moment
// matrix, used by the isotropic closed form below.
double identity_alignment_over_assignment(const BinAssignment& a,
                                          std::span<const int> index_map, int d_tau) {
    const int b = a.bins();
    const int d = a.d();
    std::vector<std::vector<int>> members(b);
    for (int i = 0; i < d; ++i) members[a.bin_of[i]].push_back(index_map[i]);

    std::vector<double> cnt(d_tau, 0.0);
    std::vector<int> touched;
    double total = 0.0;
    for (int k = 0; k < b; ++k) {
        touched.clear();
        for (int u : members[k]) {
            if (cnt[u] == 0.0) touched.push_back(u);
            cnt[u] += 1.0;
        }
        double block = 0.0;
        for (int u : touched) block += cnt[u] * cnt[u];
        total += block / static_cast<double>(members[k].size());
        for (int u : touched) cnt[u] = 0.0;
    }
    return total;
}

double within_bin_scatter(const BinAssignment& a, std::span<const double> values) {
    const int b = a.bins();
    std::vector<double> sums(b, 0.0);
    for (int i = 0; i < a.d(); ++i) sums[a.bin_of[i]] += values[i];
    double out = 0.0;
    for (int i = 0; i < a.d(); ++i) {
        const int k = a.bin_of[i];
        const double dev = values[i] - sums[k] / a.bin_counts[k];
        out += dev * dev;
    }
    return out;
}

double coordinate_scatter(std::span<const double> values) {
    return static_cast<double>(values.size()) * population_variance(values);
}

// Expected distorted dissimilarity for an arbitrary coordinate grouping
// under a second-moment model; same algebra as predict_distorted with the
// partition terms evaluated coordinate-wise.
double predict_distorted_coords(const BinAssignment& a, std::span<const int> index_map,
                                const SymMat& cross, std::span<const int> n_tau,
                                double noise_var) {
    const int k = static_cast<int>(n_tau.size());
    const double d = static_cast<double>(a.d());
    const int b = a.bins();

    double second_moment = 0.0;
    for (int u = 0; u < k; ++u) second_moment += n_tau[u] * cross(u, u);
    double quad = 0.0;
    for (int u = 0; u < k; ++u) {
        double row = 0.0;
        for (int v = 0; v < k; ++v) row += n_tau[v] * cross(u, v);
        quad += n_tau[u] * row;
    }
    const double alignment = alignment_over_assignment(a, index_map, cross);

    const double num = second_moment - alignment + noise_var * (d - b);
    const double den = second_moment - quad / d + noise_var * (d - 1);
    if (!(den > 0.0)) throw degenerate_error("predicted window variance is not positive");
    return num / den;
}

// Template-centered isotropic counterpart for an arbitrary coordinate
// grouping.
double predict_localized_isotropic_coords(const BinAssignment& a,
                                          std::span<const int> index_map,
                                          std::span<const double> t,
                                          std::span<const int> n_tau, double distortion_var,
                                          double noise_var) {
    const double d = static_cast<double>(a.d());
    const int b = a.bins();
    const int k = static_cast<int>(n_tau.size());

    const double rep_err = within_bin_scatter(a, t);
    const double scatter = coordinate_scatter(t);
    const double diag = distortion_var * d;
    const double alignment =
        distortion_var * identity_alignment_over_assignment(a, index_map, k);
    double sum_n2 = 0.0;
    for (int u = 0; u < k; ++u) sum_n2 += static_cast<double>(n_tau[u]) * n_tau[u];
    const double quad = distortion_var * sum_n2 / d;

    const double num = rep_err + diag - alignment + noise_var * (d - b);
    const double den = scatter + diag - quad + noise_var * (d - 1);
    if (!(den > 0.0)) throw degenerate_error("predicted window variance is not positive");
    return num / den;
}

} // namespace

std::vector<double> sample_template(int d, const ExperimentConfig& cfg, Rng& rng,
                                    std::string& dist_out, double& gamma_out) {
    if (d < 2) throw std::invalid_argument("template dimension must be at least 2");
    if (cfg.gamma_set.empty()) throw std::invalid_argument("gamma set is empty");

    std::vector<double> t(d);
    int kind = 0;
    for (int attempt = 0;; ++attempt) {
        if (attempt >= 100)
            throw std::invalid_argument("template sampling kept producing constant vectors");
        kind = static_cast<int>(rng.uniform_int(0, 2));
        for (int i = 0; i < d; ++i) {
            switch (kind) {
                case 0: t[i] = rng.normal(); break;
                case 1: t[i] = rng.next_unit(); break;
                default: {
                    const bool shifted = rng.uniform_int(0, 1) == 1;
                    t[i] = rng.normal() + (shifted ? 2.0 : 0.0);
                    break;
                }
            }
        }
        const auto [lo, hi] = std::minmax_element(t.begin(), t.end());
        if (*lo < *hi) {
            const double span = *hi - *lo;
            const double base = *lo;
            for (double& x : t) x = (x - base) / span;
            break;
        }
    }
    dist_out = kTemplateDists[kind];

    const auto pick = rng.uniform_int(0, static_cast<std::uint64_t>(cfg.gamma_set.size()) - 1);
    gamma_out = cfg.gamma_set[static_cast<std::size_t>(pick)];
    if (gamma_out != 1.0)
        for (double& x : t) x = std::pow(x, gamma_out);
    return t;
}

TrialRecord run_trial(const ExperimentConfig& cfg, long trial_index) {
    TrialRecord rec;
    rec.trial_index = trial_index;
    Rng rng(Rng::derive_stream(cfg.master_seed, static_cast<std::uint64_t>(trial_index)));

    try {
        rec.d = static_cast<int>(
            rng.uniform_int(static_cast<std::uint64_t>(cfg.d_min), static_cast<std::uint64_t>(cfg.d_max)));
        const int d = rec.d;

        std::vector<double> t = sample_template(d, cfg, rng, rec.template_dist, rec.gamma);

        const double sigma = rng.uniform(cfg.sigma_min, cfg.sigma_max);
        rec.sigma2 = sigma * sigma;

        std::vector<double> xi(d), zeta(d);
        for (double& x : xi) x = sigma * rng.normal();
        for (double& x : zeta) x = sigma * rng.normal();

        const FullRankDecomposition fr = full_rank_decompose(t, cfg.round_digits);
        rec.d_tau = fr.d_tau();
        const std::vector<double> t_used = fr.reconstruct();

        DistortionModel model;
        if (cfg.regime == Regime::general) {
            model = random_general_model(fr.d_tau(), rng);
            rec.model_hash = hash_model(model);
        } else {
            rec.sigma2_m = rng.uniform(cfg.sigma2m_min, cfg.sigma2m_max);
            model = spherical_model(fr.tau, rec.sigma2_m);
        }
        const SymMat cross = cross_from_model(model);

        const std::vector<double> m = sample_distortion(model, rng);
        std::vector<double> w(d);
        for (int i = 0; i < d; ++i) w[i] = m[fr.index_map[i]] + zeta[i];

        rec.cells.reserve(cfg.strategies.size() * cfg.bin_specs.size());
        for (Strategy strat : cfg.strategies) {
            for (const BinSpec& spec : cfg.bin_specs) {
                CellResult cell;
                cell.b_requested = spec.resolve(fr.d_tau());

                BinAssignment assign;
                std::optional<BinPartition> part;
                switch (strat) {
                    case Strategy::eqw:
                        part = eqw_binning(fr, cell.b_requested);
                        break;
                    case Strategy::kmeans:
                        part = kmeans_binning(fr, cell.b_requested);
                        break;
                    case Strategy::greedy: {
                        GreedyConfig gc;
                        gc.restarts = cfg.greedy_restarts;
                        gc.seed = rng.next_u64();
                        part = greedy_binning(cross, fr.n_tau, cell.b_requested, gc).partition;
                        break;
                    }
                    case Strategy::eqf:
                        assign = index_split_assignment(d, cell.b_requested);
                        break;
                }
                if (part) assign = assign_bins(fr, *part);
                cell.b_effective = assign.bins();

                cell.d_noise = dissimilarity(assign, xi);
                cell.d_distorted = dissimilarity(assign, w);
                cell.pred_noise = predict_noise(d, cell.b_effective).value;

                if (strat == Strategy::eqf) {
                    if (cfg.regime == Regime::general) {
                        cell.pred_distorted = predict_distorted_coords(
                            assign, fr.index_map, cross, fr.n_tau, rec.sigma2);
                    } else {
                        cell.pred_distorted = predict_localized_isotropic_coords(
                            assign, fr.index_map, t_used, fr.n_tau, rec.sigma2_m, rec.sigma2);
                    }
                } else if (cfg.regime == Regime::general) {
                    cell.pred_distorted =
                        predict_distorted(*part, cross, fr.n_tau, rec.sigma2).value;
                } else {
                    cell.pred_distorted =
                        predict_localized(*part, fr, model.cov, rec.sigma2).value;
                }

                cell.recognized = cell.d_distorted < cell.d_noise;
                cell.tie = cell.d_distorted == cell.d_noise;
                rec.cells.push_back(std::move(cell));
            }
        }
    } catch (const degenerate_error& e) {
        rec.failed = true;
        rec.failure = e.what();
        rec.cells.clear();
    } catch (const infeasible_error& e) {
        rec.failed = true;
        rec.failure = e.what();
        rec.cells.clear();
    }
    return rec;
}

std::vector<TrialRecord> run_experiment(const ExperimentConfig& cfg,
                                        const std::function<void(long, long)>& progress) {
    if (cfg.trials < 1) throw std::invalid_argument("trial count must be positive");
    if (cfg.bin_specs.empty() || cfg.strategies.empty())
        throw std::invalid_argument("need at least one bin spec and one strategy");
    if (cfg.d_min < 2 || cfg.d_max < cfg.d_min)
        throw std::invalid_argument("invalid dimension range");

    const long n = cfg.trials;
    std::vector<TrialRecord> records(static_cast<std::size_t>(n));

    int nthreads = cfg.threads;
    if (nthreads <= 0) nthreads = static_cast<int>(std::thread::hardware_concurrency());
    nthreads = std::clamp<int>(nthreads, 1, static_cast<int>(std::min<long>(n, 64)));

    std::atomic<long> next{0};
    std::atomic<long> completed{0};
    std::mutex progress_mutex;
    std::exception_ptr error;
    std::mutex error_mutex;

    auto worker = [&] {
        for (;;) {
            const long i = next.fetch_add(1);
            if (i >= n) return;
            try {
                records[static_cast<std::size_t>(i)] = run_trial(cfg, i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
            const long done = completed.fetch_add(1) + 1;
            if (progress) {
                std::lock_guard lock(progress_mutex);
                progress(done, n);
            }
        }
    };

    if (nthreads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(nthreads));
        for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (error) std::rethrow_exception(error);
    return records;
}

McNemarResult mcnemar_test(long long n01, long long n10, int exact_threshold) {
    if (n01 < 0 || n10 < 0) throw std::invalid_argument("disagreement counts must be nonnegative");
    McNemarResult res;
    res.n01 = n01;
    res.n10 = n10;
    const long long n = n01 + n10;
    if (n == 0) {
        res.exact = true;
        res.p_value = 1.0;
        return res;
    }
    if (n < exact_threshold) {
        // Exact two-sided binomial at p = 1/2 on the smaller count.
        res.exact = true;
        const long long k = std::min(n01, n10);
        res.statistic = static_cast<double>(k);
        const double log_half_n = -static_cast<double>(n) * std::log(2.0);
        double cdf = 0.0;
        for (long long i = 0; i <= k; ++i) {
            const double log_choose = std::lgamma(static_cast<double>(n) + 1.0) -
                                      std::lgamma(static_cast<double>(i) + 1.0) -
                                      std::lgamma(static_cast<double>(n - i) + 1.0);
            cdf += std::exp(log_choose + log_half_n);
        }
        res.p_value = std::min(1.0, 2.0 * cdf);
        return res;
    }
    const double diff = std::abs(static_cast<double>(n01 - n10)) - 1.0;
    res.statistic = diff * diff / static_cast<double>(n);
    res.p_value = std::erfc(std::sqrt(res.statistic / 2.0));
    return res;
}

AggregateResult aggregate(const ExperimentConfig& cfg, const std::vector<TrialRecord>& records) {
    const std::size_t n_strat = cfg.strategies.size();
    const std::size_t n_spec = cfg.bin_specs.size();

    AggregateResult agg;
    agg.trials = static_cast<long long>(records.size());

    std::vector<std::vector<long long>> recognized(n_strat, std::vector<long long>(n_spec, 0));
    std::vector<std::vector<long long>> ties(n_strat, std::vector<long long>(n_spec, 0));
    // disagreements[s1][s2] = {n01, n10} over pooled (trial, spec) bits
    std::vector<std::vector<std::pair<long long, long long>>> disagreements(
        n_strat, std::vector<std::pair<long long, long long>>(n_strat, {0, 0}));

    agg.alignment_per_spec.assign(n_spec, AlignmentStats{});

    for (const TrialRecord& rec : records) {
        if (rec.failed) {
            ++agg.failed_trials;
            agg.failures.emplace_back(rec.trial_index, rec.failure);
            continue;
        }
        if (rec.cells.size() != n_strat * n_spec)
            throw std::invalid_argument("trial record does not match the configuration");
        ++agg.usable_trials;
        for (std::size_t s = 0; s < n_strat; ++s) {
            for (std::size_t j = 0; j < n_spec; ++j) {
                const CellResult& cell = rec.cells[s * n_spec + j];
                recognized[s][j] += cell.recognized ? 1 : 0;
                ties[s][j] += cell.tie ? 1 : 0;

                AlignmentStats& pooled = agg.alignment_pooled;
                pooled.measured_noise += cell.d_noise;
                pooled.predicted_noise += cell.pred_noise;
                pooled.measured_distorted += cell.d_distorted;
                pooled.predicted_distorted += cell.pred_distorted;
                ++pooled.cells;

                AlignmentStats& per = agg.alignment_per_spec[j];
                per.measured_noise += cell.d_noise;
                per.predicted_noise += cell.pred_noise;
                per.measured_distorted += cell.d_distorted;
                per.predicted_distorted += cell.pred_distorted;
                ++per.cells;

                for (std::size_t s2 = 0; s2 < n_strat; ++s2) {
                    const CellResult& other = rec.cells[s2 * n_spec + j];
                    if (!cell.recognized && other.recognized) ++disagreements[s][s2].first;
                    if (cell.recognized && !other.recognized) ++disagreements[s][s2].second;
                }
            }
        }
    }
    if (agg.usable_trials == 0)
        throw std::invalid_argument("no usable trials to aggregate");

    auto finish = [](AlignmentStats& a) {
        a.measured_noise /= a.cells;
        a.predicted_noise /= a.cells;
        a.measured_distorted /= a.cells;
        a.predicted_distorted /= a.cells;
    };
    finish(agg.alignment_pooled);
    for (AlignmentStats& a : agg.alignment_per_spec) finish(a);

    agg.by_strategy.resize(n_strat);
    const double per_spec_n = static_cast<double>(agg.usable_trials);
    for (std::size_t s = 0; s < n_strat; ++s) {
        StrategySummary& sum = agg.by_strategy[s];
        sum.auc_per_spec.resize(n_spec);
        sum.ties_per_spec.assign(ties[s].begin(), ties[s].end());
        long long rec_total = 0, tie_total = 0;
        double spec_mean = 0.0;
        for (std::size_t j = 0; j < n_spec; ++j) {
            sum.auc_per_spec[j] = (recognized[s][j] + 0.5 * ties[s][j]) / per_spec_n;
            spec_mean += sum.auc_per_spec[j];
            rec_total += recognized[s][j];
            tie_total += ties[s][j];
        }
        sum.auc_mean_of_specs = spec_mean / static_cast<double>(n_spec);
        sum.auc_pooled =
            (rec_total + 0.5 * tie_total) / (per_spec_n * static_cast<double>(n_spec));
    }

    agg.mcnemar.resize(n_strat);
    for (std::size_t s = 0; s < n_strat; ++s) {
        agg.mcnemar[s].resize(n_strat);
        for (std::size_t s2 = 0; s2 < n_strat; ++s2) {
            agg.mcnemar[s][s2] = mcnemar_test(disagreements[s][s2].first,
                                              disagreements[s][s2].second,
                                              cfg.mcnemar_exact_threshold);
        }
    }
    return agg;
}

} // namespace nuv
