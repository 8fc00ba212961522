// Command-line front end: bin, nuv, predict, simulate.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nuv/binning.hpp"
#include "nuv/core.hpp"
#include "nuv/distortion.hpp"
#include "nuv/experiments.hpp"
#include "nuv/io.hpp"
#include "nuv/theory.hpp"

namespace {

using nlohmann::json;

std::string sig12(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void print_kv(const std::string& key, const std::string& value) {
    std::printf("%-22s %s\n", key.c_str(), value.c_str());
}

struct PartitionArgs {
    std::string template_path;
    std::string strategy = "kmeans";
    std::string bins;
    std::string cross_path;
    int round_digits = -1; // negative: no rounding
    std::uint64_t seed = 0;
    int restarts = 1;
};

void add_partition_flags(CLI::App* cmd, PartitionArgs& a, bool with_cross) {
    cmd->add_option("-t,--template,template", a.template_path, "Template vector file")
        ->required();
    cmd->add_option("--strategy", a.strategy, "Binning strategy")
        ->check(CLI::IsMember({"eqw", "eqf", "kmeans", "greedy"}))
        ->capture_default_str();
    cmd->add_option("-b,--bins", a.bins, "Bin count: integer or sturges|rice|sqrt")
        ->required();
    cmd->add_option("--round-digits", a.round_digits,
                    "Round template values to this many digits before binning "
                    "(negative disables)")
        ->capture_default_str();
    if (with_cross)
        cmd->add_option("--cross", a.cross_path,
                        "Second-moment matrix file (greedy strategy only)");
    cmd->add_option("--seed", a.seed, "Greedy restart seed")->capture_default_str();
    cmd->add_option("--restarts", a.restarts, "Greedy restart count")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
}

struct BuiltPartition {
    nuv::FullRankDecomposition fr;
    nuv::BinPartition partition;
    int b_requested = 0;
    std::optional<nuv::SymMat> cross;
    std::optional<nuv::GreedyResult> greedy;
};

// Matrix argument: for `bin` the greedy score matrix arrives via --cross and
// everything else must leave it alone; predict subcommands pass their own.
BuiltPartition build_partition(const PartitionArgs& a,
                               std::optional<nuv::SymMat> score_matrix = std::nullopt) {
    BuiltPartition out;
    const std::vector<double> t = nuv::io::read_vector_file(a.template_path);
    const std::optional<int> rd =
        a.round_digits >= 0 ? std::optional<int>(a.round_digits) : std::nullopt;
    out.fr = nuv::full_rank_decompose(t, rd);

    const nuv::BinSpec spec = nuv::BinSpec::parse(a.bins);
    out.b_requested = spec.resolve(out.fr.d_tau());

    if (!a.cross_path.empty()) {
        if (a.strategy != "greedy")
            throw std::invalid_argument("--cross is only used by the greedy strategy");
        out.cross = nuv::io::read_matrix_file(a.cross_path);
    }
    if (score_matrix) out.cross = std::move(score_matrix);

    if (a.strategy == "eqw") {
        out.partition = nuv::eqw_binning(out.fr, out.b_requested);
    } else if (a.strategy == "eqf") {
        out.partition = nuv::eqf_binning(out.fr, out.b_requested);
    } else if (a.strategy == "kmeans") {
        out.partition = nuv::kmeans_binning(out.fr, out.b_requested);
    } else {
        if (!out.cross)
            throw std::invalid_argument("the greedy strategy needs --cross");
        if (out.cross->size() != out.fr.d_tau())
            throw std::invalid_argument("matrix size does not match the template");
        nuv::GreedyConfig gc;
        gc.restarts = a.restarts;
        gc.seed = a.seed;
        out.greedy = nuv::greedy_binning(*out.cross, out.fr.n_tau, out.b_requested, gc);
        out.partition = out.greedy->partition;
    }
    return out;
}

json partition_json(const PartitionArgs& a, const BuiltPartition& bp) {
    const auto& cuts = bp.partition.cuts;
    json cut_values = json::array();
    for (int k = 1; k + 1 < static_cast<int>(cuts.size()); ++k)
        cut_values.push_back(bp.fr.tau[cuts[static_cast<std::size_t>(k)]]);

    json bins = json::array();
    for (int k = 0; k + 1 < static_cast<int>(cuts.size()); ++k) {
        const int lo = cuts[static_cast<std::size_t>(k)];
        const int hi = cuts[static_cast<std::size_t>(k) + 1];
        long long coords = 0;
        for (int u = lo; u < hi; ++u) coords += bp.fr.n_tau[u];
        bins.push_back({{"index", k},
                        {"low", bp.fr.tau[lo]},
                        {"high", bp.fr.tau[hi - 1]},
                        {"unique_values", hi - lo},
                        {"coordinates", coords}});
    }

    json j{{"strategy", a.strategy},
           {"b_requested", bp.b_requested},
           {"b_effective", bp.partition.bins()},
           {"d", bp.fr.d()},
           {"d_tau", bp.fr.d_tau()},
           {"cut_indices", cuts},
           {"cut_values", cut_values},
           {"bins", bins},
           {"representation_error", nuv::representation_error(bp.fr, bp.partition)}};
    if (bp.cross)
        j["objective"] = nuv::frobenius_objective(bp.partition, *bp.cross, bp.fr.n_tau);
    if (bp.greedy) {
        j["best_restart"] = bp.greedy->best_restart;
        j["moves_per_restart"] = bp.greedy->moves_per_restart;
    }
    return j;
}

int run_bin(const PartitionArgs& a, bool as_json) {
    const BuiltPartition bp = build_partition(a);
    const json j = partition_json(a, bp);
    if (as_json) {
        std::printf("%s\n", j.dump(2).c_str());
        return 0;
    }
    print_kv("strategy", a.strategy);
    print_kv("d", std::to_string(bp.fr.d()));
    print_kv("d_tau", std::to_string(bp.fr.d_tau()));
    print_kv("bins_requested", std::to_string(bp.b_requested));
    print_kv("bins_effective", std::to_string(bp.partition.bins()));
    std::string cut_values;
    for (const auto& v : j["cut_values"]) {
        if (!cut_values.empty()) cut_values += ' ';
        cut_values += sig12(v.get<double>());
    }
    print_kv("cut_values", cut_values.empty() ? "(none)" : cut_values);
    for (const auto& bin : j["bins"]) {
        std::printf("bin %-3d [%s, %s]  unique %d  coords %lld\n",
                    bin["index"].get<int>(), sig12(bin["low"].get<double>()).c_str(),
                    sig12(bin["high"].get<double>()).c_str(),
                    bin["unique_values"].get<int>(), bin["coordinates"].get<long long>());
    }
    print_kv("representation_error", sig12(j["representation_error"].get<double>()));
    if (bp.cross) print_kv("objective", sig12(j["objective"].get<double>()));
    if (bp.greedy) {
        print_kv("best_restart", std::to_string(bp.greedy->best_restart));
        std::string moves;
        for (long m : bp.greedy->moves_per_restart) {
            if (!moves.empty()) moves += ' ';
            moves += std::to_string(m);
        }
        print_kv("moves_per_restart", moves);
    }
    return 0;
}

int run_nuv(const PartitionArgs& a, const std::string& window_path, bool as_json) {
    const std::vector<double> w = nuv::io::read_vector_file(window_path);
    const BuiltPartition bp = build_partition(a);
    if (static_cast<int>(w.size()) != bp.fr.d())
        throw std::invalid_argument("template and window lengths differ");
    const nuv::BinAssignment assign = nuv::assign_bins(bp.fr, bp.partition);
    const double d = nuv::dissimilarity(assign, w);
    if (as_json) {
        const json j{{"dissimilarity", d},
                     {"explained_fraction", 1.0 - d},
                     {"b_effective", bp.partition.bins()}};
        std::printf("%s\n", j.dump(2).c_str());
        return 0;
    }
    print_kv("dissimilarity", sig12(d));
    print_kv("explained_fraction", sig12(1.0 - d));
    return 0;
}

int print_prediction(const nuv::Prediction& p, bool as_json) {
    if (as_json) {
        json components = json::object();
        for (const auto& [name, value] : p.components) components[name] = value;
        const json j{{"value", p.value},
                     {"numerator", p.numerator},
                     {"denominator", p.denominator},
                     {"components", components}};
        std::printf("%s\n", j.dump(2).c_str());
        return 0;
    }
    print_kv("value", sig12(p.value));
    print_kv("numerator", sig12(p.numerator));
    print_kv("denominator", sig12(p.denominator));
    for (const auto& [name, value] : p.components) print_kv(name, sig12(value));
    return 0;
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void apply_config_file(nuv::ExperimentConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw nuv::io::io_error("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw nuv::io::io_error(path + ": " + e.what());
    }
    if (j.contains("config")) j = j["config"]; // accept a whole manifest

    if (j.contains("regime")) {
        const std::string r = j["regime"].get<std::string>();
        if (r == "general")
            cfg.regime = nuv::Regime::general;
        else if (r == "spherical")
            cfg.regime = nuv::Regime::spherical;
        else
            throw std::invalid_argument("unknown regime: " + r);
        // Re-derive the regime-dependent default before explicit overrides.
        cfg.round_digits = nuv::ExperimentConfig::defaults(cfg.regime).round_digits;
    }
    if (j.contains("trials")) cfg.trials = j["trials"].get<long>();
    if (j.contains("master_seed")) cfg.master_seed = j["master_seed"].get<std::uint64_t>();
    if (j.contains("d_min")) cfg.d_min = j["d_min"].get<int>();
    if (j.contains("d_max")) cfg.d_max = j["d_max"].get<int>();
    if (j.contains("gamma_set")) cfg.gamma_set = j["gamma_set"].get<std::vector<double>>();
    if (j.contains("sigma_min")) cfg.sigma_min = j["sigma_min"].get<double>();
    if (j.contains("sigma_max")) cfg.sigma_max = j["sigma_max"].get<double>();
    if (j.contains("sigma2m_min")) cfg.sigma2m_min = j["sigma2m_min"].get<double>();
    if (j.contains("sigma2m_max")) cfg.sigma2m_max = j["sigma2m_max"].get<double>();
    if (j.contains("round_digits")) {
        if (j["round_digits"].is_null())
            cfg.round_digits = std::nullopt;
        else
            cfg.round_digits = j["round_digits"].get<int>();
    }
    if (j.contains("bin_specs")) {
        cfg.bin_specs.clear();
        for (const auto& s : j["bin_specs"])
            cfg.bin_specs.push_back(nuv::BinSpec::parse(s.get<std::string>()));
    }
    if (j.contains("strategies")) {
        cfg.strategies.clear();
        for (const auto& s : j["strategies"]) {
            const std::string name = s.get<std::string>();
            if (name == "eqw") cfg.strategies.push_back(nuv::Strategy::eqw);
            else if (name == "eqf") cfg.strategies.push_back(nuv::Strategy::eqf);
            else if (name == "kmeans") cfg.strategies.push_back(nuv::Strategy::kmeans);
            else if (name == "greedy") cfg.strategies.push_back(nuv::Strategy::greedy);
            else throw std::invalid_argument("unknown strategy: " + name);
        }
    }
    if (j.contains("greedy_restarts")) cfg.greedy_restarts = j["greedy_restarts"].get<int>();
    if (j.contains("mcnemar_exact_threshold"))
        cfg.mcnemar_exact_threshold = j["mcnemar_exact_threshold"].get<int>();
}

struct SimulateArgs {
    std::string regime;
    std::string config_path;
    std::string out_dir;
    long trials = -1;
    std::int64_t seed = -1;
    int threads = -1;
    int restarts = -1;
    int round_digits = -2; // -2: not given, -1: disable
    int d_min = -1, d_max = -1;
    int mcnemar_threshold = -1;
    std::vector<std::string> bins;
    std::vector<std::string> strategies;
};

int run_simulate(const SimulateArgs& a) {
    nuv::Regime regime = nuv::Regime::general;
    if (!a.regime.empty())
        regime = a.regime == "general" ? nuv::Regime::general : nuv::Regime::spherical;
    nuv::ExperimentConfig cfg = nuv::ExperimentConfig::defaults(regime);

    if (!a.config_path.empty()) apply_config_file(cfg, a.config_path);
    if (!a.regime.empty() && a.config_path.empty()) cfg.regime = regime;

    if (a.trials >= 0) cfg.trials = a.trials;
    if (a.seed >= 0) cfg.master_seed = static_cast<std::uint64_t>(a.seed);
    if (a.threads >= 0) cfg.threads = a.threads;
    if (a.restarts >= 0) cfg.greedy_restarts = a.restarts;
    if (a.round_digits >= 0) cfg.round_digits = a.round_digits;
    if (a.round_digits == -1) cfg.round_digits = std::nullopt;
    if (a.d_min >= 0) cfg.d_min = a.d_min;
    if (a.d_max >= 0) cfg.d_max = a.d_max;
    if (a.mcnemar_threshold >= 0) cfg.mcnemar_exact_threshold = a.mcnemar_threshold;
    if (!a.bins.empty()) {
        cfg.bin_specs.clear();
        for (const std::string& s : a.bins) cfg.bin_specs.push_back(nuv::BinSpec::parse(s));
    }
    if (!a.strategies.empty()) {
        cfg.strategies.clear();
        for (const std::string& s : a.strategies) {
            if (s == "eqw") cfg.strategies.push_back(nuv::Strategy::eqw);
            else if (s == "eqf") cfg.strategies.push_back(nuv::Strategy::eqf);
            else if (s == "kmeans") cfg.strategies.push_back(nuv::Strategy::kmeans);
            else if (s == "greedy") cfg.strategies.push_back(nuv::Strategy::greedy);
            else throw std::invalid_argument("unknown strategy: " + s);
        }
    }

    std::string out_dir = a.out_dir;
    if (out_dir.empty()) {
        if (const char* env = std::getenv("NUV_OUTPUT_DIR"); env && *env)
            out_dir = env;
        else
            out_dir = ".";
    }
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw nuv::io::io_error("cannot create " + out_dir + ": " + ec.message());

    const auto t0 = std::chrono::steady_clock::now();
    const long report_every = std::max<long>(1, cfg.trials / 50);
    const auto records = nuv::run_experiment(cfg, [&](long done, long total) {
        if (done % report_every == 0 || done == total)
            std::fprintf(stderr, "\rtrials %ld/%ld", done, total);
    });
    std::fprintf(stderr, "\n");
    const auto elapsed =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0);

    const nuv::AggregateResult agg = nuv::aggregate(cfg, records);

    const auto path = [&](const char* name) {
        return (std::filesystem::path(out_dir) / name).string();
    };
    auto open = [&](const char* name) {
        std::ofstream out(path(name), std::ios::binary);
        if (!out) throw nuv::io::io_error("cannot write " + path(name));
        return out;
    };

    {
        std::ofstream out = open("trials.csv");
        nuv::io::write_trials_csv(out, cfg, records);
        if (!out) throw nuv::io::io_error("write failed: " + path("trials.csv"));
    }
    {
        std::ofstream out = open("aggregate.json");
        out << nuv::io::aggregate_json(cfg, agg).dump(2) << '\n';
        if (!out) throw nuv::io::io_error("write failed: " + path("aggregate.json"));
    }
    {
        std::ofstream out = open("manifest.json");
        json manifest = nuv::io::manifest_json(cfg, utc_timestamp());
        manifest["elapsed_ms"] = elapsed.count();
        out << manifest.dump(2) << '\n';
        if (!out) throw nuv::io::io_error("write failed: " + path("manifest.json"));
    }

    std::fprintf(stderr, "wrote %s, %s, %s (%lld ms)\n", path("trials.csv").c_str(),
                 path("aggregate.json").c_str(), path("manifest.json").c_str(),
                 static_cast<long long>(elapsed.count()));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Piecewise-constant dissimilarity toolkit"};
    app.require_subcommand(1);
    int exit_code = 0;

    // bin
    PartitionArgs bin_args;
    bool bin_json = false;
    CLI::App* bin_cmd = app.add_subcommand("bin", "Partition a template's values into bins");
    add_partition_flags(bin_cmd, bin_args, true);
    bin_cmd->add_flag("--json", bin_json, "Emit JSON");
    bin_cmd->callback([&] { exit_code = run_bin(bin_args, bin_json); });

    // nuv
    PartitionArgs nuv_args;
    std::string window_path;
    bool nuv_json = false;
    CLI::App* nuv_cmd =
        app.add_subcommand("nuv", "Dissimilarity between a window and a binned template");
    add_partition_flags(nuv_cmd, nuv_args, true);
    nuv_cmd->add_option("-w,--window,window", window_path, "Window vector file")->required();
    nuv_cmd->add_flag("--json", nuv_json, "Emit JSON");
    nuv_cmd->callback([&] { exit_code = run_nuv(nuv_args, window_path, nuv_json); });

    // predict
    CLI::App* predict_cmd = app.add_subcommand("predict", "Expected dissimilarity");
    predict_cmd->require_subcommand(1);
    bool predict_json = false;
    predict_cmd->add_flag("--json", predict_json, "Emit JSON");

    int p_d = 0, p_b = 0;
    double p_sigma2 = 0.0, p_sigma2m = 0.0;

    CLI::App* noise_cmd = predict_cmd->add_subcommand("noise", "White-noise window");
    noise_cmd->add_option("-d", p_d, "Dimension")->required();
    noise_cmd->add_option("-b", p_b, "Bin count")->required();
    noise_cmd->callback(
        [&] { exit_code = print_prediction(nuv::predict_noise(p_d, p_b), predict_json); });

    CLI::App* corollary_cmd = predict_cmd->add_subcommand(
        "corollary", "Zero-mean isotropic distortion on an all-distinct template");
    corollary_cmd->add_option("-d", p_d, "Dimension")->required();
    corollary_cmd->add_option("-b", p_b, "Bin count")->required();
    corollary_cmd->add_option("--sigma2m", p_sigma2m, "Distortion variance")->required();
    corollary_cmd->add_option("--sigma2", p_sigma2, "Noise variance")->required();
    corollary_cmd->callback([&] {
        exit_code = print_prediction(
            nuv::predict_isotropic_closed_form(p_d, p_b, p_sigma2m, p_sigma2), predict_json);
    });

    PartitionArgs dist_args;
    std::string dist_cross_path;
    CLI::App* distorted_cmd =
        predict_cmd->add_subcommand("distorted", "Distortion with a known second-moment matrix");
    add_partition_flags(distorted_cmd, dist_args, false);
    distorted_cmd->add_option("--cross", dist_cross_path, "Second-moment matrix file")
        ->required();
    distorted_cmd->add_option("--sigma2", p_sigma2, "Noise variance")->capture_default_str();
    distorted_cmd->callback([&] {
        const nuv::SymMat cross = nuv::io::read_matrix_file(dist_cross_path);
        const BuiltPartition bp = build_partition(dist_args, cross);
        exit_code = print_prediction(
            nuv::predict_distorted(bp.partition, *bp.cross, bp.fr.n_tau, p_sigma2),
            predict_json);
    });

    PartitionArgs loc_args;
    std::string loc_cov_path;
    CLI::App* localized_cmd =
        predict_cmd->add_subcommand("localized", "Template-centered distortion");
    add_partition_flags(localized_cmd, loc_args, false);
    localized_cmd->add_option("--cov", loc_cov_path, "Covariance matrix file")->required();
    localized_cmd->add_option("--sigma2", p_sigma2, "Noise variance")->capture_default_str();
    localized_cmd->callback([&] {
        const nuv::SymMat cov = nuv::io::read_matrix_file(loc_cov_path);
        const BuiltPartition bp = build_partition(loc_args, cov);
        exit_code = print_prediction(
            nuv::predict_localized(bp.partition, bp.fr, *bp.cross, p_sigma2), predict_json);
    });

    PartitionArgs sph_args;
    CLI::App* spherical_cmd = predict_cmd->add_subcommand(
        "spherical", "Template-centered isotropic distortion, all-distinct template");
    add_partition_flags(spherical_cmd, sph_args, false);
    spherical_cmd->add_option("--sigma2m", p_sigma2m, "Distortion variance")->required();
    spherical_cmd->add_option("--sigma2", p_sigma2, "Noise variance")->capture_default_str();
    spherical_cmd->callback([&] {
        if (sph_args.strategy == "greedy")
            throw std::invalid_argument(
                "the greedy strategy needs a matrix; use predict distorted or localized");
        const BuiltPartition bp = build_partition(sph_args);
        exit_code = print_prediction(
            nuv::predict_spherical(bp.partition, bp.fr, p_sigma2m, p_sigma2), predict_json);
    });

    // simulate
    SimulateArgs sim_args;
    CLI::App* sim_cmd = app.add_subcommand("simulate", "Run the recognition experiment");
    sim_cmd->add_option("--regime", sim_args.regime, "Distortion regime")
        ->check(CLI::IsMember({"general", "spherical"}));
    sim_cmd->add_option("--config", sim_args.config_path,
                        "JSON config (a manifest.json also works); flags override");
    sim_cmd->add_option("--trials", sim_args.trials, "Trial count");
    sim_cmd->add_option("--seed", sim_args.seed, "Master seed");
    sim_cmd->add_option("-o,--output", sim_args.out_dir,
                        "Output directory (default: $NUV_OUTPUT_DIR or .)");
    sim_cmd->add_option("--threads", sim_args.threads,
                        "Worker threads, 0 = hardware (results do not depend on this)");
    sim_cmd->add_option("--restarts", sim_args.restarts, "Greedy restarts per cell");
    sim_cmd->add_option("--round-digits", sim_args.round_digits,
                        "Template rounding digits (-1 disables)");
    sim_cmd->add_option("--d-min", sim_args.d_min, "Smallest template dimension");
    sim_cmd->add_option("--d-max", sim_args.d_max, "Largest template dimension");
    sim_cmd->add_option("--mcnemar-threshold", sim_args.mcnemar_threshold,
                        "Exact-test threshold on disagreement count");
    sim_cmd->add_option("--bins", sim_args.bins,
                        "Bin specs (integers or sturges|rice|sqrt), replaces the default set");
    sim_cmd->add_option("--strategies", sim_args.strategies,
                        "Strategies to run, replaces the default set");
    sim_cmd->callback([&] {
        if (sim_args.regime.empty() && sim_args.config_path.empty())
            throw CLI::RequiredError("--regime or --config");
        exit_code = run_simulate(sim_args);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const nuv::infeasible_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const nuv::degenerate_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    } catch (const nuv::io::io_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 1;
    }
    return exit_code;
}
