#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace nuv {

enum class Regime { general, spherical };

// How the harness picks a coordinate grouping for each trial cell.
//   eqw     equal-width intervals over the unique values
//   eqf     equal counts of coordinates in index order; ignores the values
//           entirely and serves as the structure-blind baseline
//   kmeans  optimal 1-D weighted k-means over the unique values
//   greedy  local search on the alignment score of the trial's
//           second-moment matrix
enum class Strategy { eqw, eqf, kmeans, greedy };

std::string strategy_name(Strategy s);

// Requested bin count: either a fixed number or a rule of the unique count.
struct BinSpec {
    enum class Kind { fixed, sturges, rice, sqrt_rule };
    Kind kind = Kind::fixed;
    int fixed = 0;

    std::string label() const;       // "fixed2", "sturges", ...
    int resolve(int d_tau) const;    // evaluated and clamped to [1, d_tau]
    static BinSpec parse(const std::string& text); // "5" | "sturges" | ...
};

struct ExperimentConfig {
    Regime regime = Regime::general;
    long trials = 500;
    std::uint64_t master_seed = 42;

    int d_min = 100;
    int d_max = 1000;
    std::vector<double> gamma_set = {1.0 / 3.0, 0.5, 1.0, 2.0, 3.0};
    double sigma_min = 0.1;   // noise standard deviation, uniform range
    double sigma_max = 2.0;
    double sigma2m_min = 0.1; // isotropic distortion variance, uniform range
    double sigma2m_max = 2.0;
    std::optional<int> round_digits; // see defaults()

    std::vector<BinSpec> bin_specs;
    std::vector<Strategy> strategies;
    int greedy_restarts = 1;
    int threads = 0; // 0 = hardware concurrency; output is thread-count invariant
    int mcnemar_exact_threshold = 25;

    // Canonical setup for a regime: 500 trials, bin specs
    // {fixed2, fixed5, sturges, rice, sqrt}, all four strategies, and
    // 3-digit template rounding in the general regime (none otherwise).
    static ExperimentConfig defaults(Regime regime);
};

// One strategy x bin-spec evaluation inside a trial.
struct CellResult {
    int b_requested = 0;
    int b_effective = 0;
    double d_noise = 0.0;
    double d_distorted = 0.0;
    double pred_noise = 0.0;
    double pred_distorted = 0.0;
    bool recognized = false; // d_distorted < d_noise, strict
    bool tie = false;        // d_distorted == d_noise
};

struct TrialRecord {
    long trial_index = 0;
    int d = 0;
    int d_tau = 0;
    std::string template_dist; // "normal", "uniform", "bimodal"
    double gamma = 1.0;
    double sigma2 = 0.0;           // noise variance
    double sigma2_m = 0.0;         // spherical regime only
    std::uint64_t model_hash = 0;  // general regime: fingerprint of (mu, cov)
    bool failed = false;
    std::string failure;
    std::vector<CellResult> cells; // strategy-major, bin-spec-minor
};

// Template draw for one trial: distribution choice, min-max normalization to
// [0, 1], then the power warp t^gamma. Exposed for direct testing; redraws a
// constant vector and gives up past 100 attempts.
std::vector<double> sample_template(int d, const ExperimentConfig& cfg, class Rng& rng,
                                    std::string& dist_out, double& gamma_out);

TrialRecord run_trial(const ExperimentConfig& cfg, long trial_index);

// Runs all trials on a small thread pool. Each trial derives its own RNG
// stream from (master_seed, trial_index) and writes a pre-sized slot, so
// results do not depend on the thread count or scheduling. The progress
// callback, if set, receives (completed, total) from worker threads under a
// lock.
std::vector<TrialRecord> run_experiment(const ExperimentConfig& cfg,
                                        const std::function<void(long, long)>& progress = {});

struct McNemarResult {
    long long n01 = 0; // first method failed, second succeeded
    long long n10 = 0;
    double statistic = 0.0;
    double p_value = 1.0;
    bool exact = false;
};

// Paired test on disagreement counts. Small samples (n01 + n10 below the
// threshold) use the exact two-sided binomial; larger ones the
// continuity-corrected chi-square with one degree of freedom.
McNemarResult mcnemar_test(long long n01, long long n10, int exact_threshold = 25);

struct AlignmentStats {
    double measured_noise = 0.0;
    double predicted_noise = 0.0;
    double measured_distorted = 0.0;
    double predicted_distorted = 0.0;
    long long cells = 0;
};

struct StrategySummary {
    // Fraction of distorted windows scored closer than the matched noise
    // window, ties worth half. Pooled counts all (trial, bin spec) pairs;
    // per_spec holds one value per configured bin spec, and mean_of_specs
    // averages those.
    double auc_pooled = 0.0;
    double auc_mean_of_specs = 0.0;
    std::vector<double> auc_per_spec;
    std::vector<long long> ties_per_spec;
};

struct AggregateResult {
    long long trials = 0;
    long long usable_trials = 0;
    long long failed_trials = 0;
    std::vector<StrategySummary> by_strategy;      // parallel to cfg.strategies
    AlignmentStats alignment_pooled;               // all cells of usable trials
    std::vector<AlignmentStats> alignment_per_spec;
    // Pairwise McNemar over pooled (trial, bin spec) recognition bits;
    // symmetric with unit diagonal.
    std::vector<std::vector<McNemarResult>> mcnemar;
    std::vector<std::pair<long, std::string>> failures; // (trial, reason)
};

// Folds records in trial order; throws std::invalid_argument when no trial
// is usable.
AggregateResult aggregate(const ExperimentConfig& cfg, const std::vector<TrialRecord>& records);

} // namespace nuv
