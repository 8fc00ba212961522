#include "nuv/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace nuv::io {

namespace {

std::string strip(const std::string& s) {
    std::size_t begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return {};
    std::size_t end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

bool parse_double(const std::string& text, double& out) {
    const char* first = text.data();
    const char* last = first + text.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(strip(line.substr(start)));
            return fields;
        }
        fields.push_back(strip(line.substr(start, comma - start)));
        start = comma + 1;
    }
}

} // namespace

std::vector<double> read_vector_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);

    std::vector<double> values;
    std::string line;
    long line_no = 0;
    bool first_content = true;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string text = strip(line);
        if (text.empty()) continue;
        double v = 0.0;
        if (!parse_double(text, v)) {
            // A single non-numeric first line is a column header.
            if (first_content && text.find(',') == std::string::npos) {
                first_content = false;
                continue;
            }
            throw io_error(path + ":" + std::to_string(line_no) + ": not a number: " + text);
        }
        first_content = false;
        if (!std::isfinite(v))
            throw io_error(path + ":" + std::to_string(line_no) + ": value is not finite");
        values.push_back(v);
    }
    if (values.size() < 2)
        throw io_error(path + ": need at least two values");
    return values;
}

SymMat read_matrix_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);

    std::vector<std::vector<double>> rows;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string text = strip(line);
        if (text.empty()) continue;
        std::vector<double> row;
        for (const std::string& field : split_csv(text)) {
            double v = 0.0;
            if (!parse_double(field, v))
                throw io_error(path + ":" + std::to_string(line_no) +
                               ": not a number: " + field);
            if (!std::isfinite(v))
                throw io_error(path + ":" + std::to_string(line_no) + ": value is not finite");
            row.push_back(v);
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw io_error(path + ":" + std::to_string(line_no) + ": ragged row");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw io_error(path + ": empty matrix");
    if (rows.size() != rows.front().size())
        throw io_error(path + ": matrix is not square");

    const int n = static_cast<int>(rows.size());
    SymMat m(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = rows[i][j];
    if (!m.is_symmetric(1e-9))
        throw io_error(path + ": matrix is not symmetric");
    return m;
}

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc()) throw io_error("number formatting failed");
    return std::string(buf, ptr);
}

namespace {

std::string regime_name(Regime r) {
    return r == Regime::general ? "general" : "spherical";
}

nlohmann::json alignment_json(const AlignmentStats& a) {
    const double noise_gap =
        std::abs(a.measured_noise - a.predicted_noise) / std::abs(a.predicted_noise);
    const double distorted_gap = std::abs(a.measured_distorted - a.predicted_distorted) /
                                 std::abs(a.predicted_distorted);
    return {{"cells", a.cells},
            {"measured_noise", a.measured_noise},
            {"predicted_noise", a.predicted_noise},
            {"noise_relative_gap", noise_gap},
            {"measured_distorted", a.measured_distorted},
            {"predicted_distorted", a.predicted_distorted},
            {"distorted_relative_gap", distorted_gap}};
}

} // namespace

nlohmann::json config_json(const ExperimentConfig& cfg) {
    nlohmann::json specs = nlohmann::json::array();
    for (const BinSpec& s : cfg.bin_specs) specs.push_back(s.label());
    nlohmann::json strategies = nlohmann::json::array();
    for (Strategy s : cfg.strategies) strategies.push_back(strategy_name(s));

    nlohmann::json j{{"regime", regime_name(cfg.regime)},
                     {"trials", cfg.trials},
                     {"master_seed", cfg.master_seed},
                     {"d_min", cfg.d_min},
                     {"d_max", cfg.d_max},
                     {"gamma_set", cfg.gamma_set},
                     {"sigma_min", cfg.sigma_min},
                     {"sigma_max", cfg.sigma_max},
                     {"sigma2m_min", cfg.sigma2m_min},
                     {"sigma2m_max", cfg.sigma2m_max},
                     {"bin_specs", specs},
                     {"strategies", strategies},
                     {"greedy_restarts", cfg.greedy_restarts},
                     {"threads", cfg.threads},
                     {"mcnemar_exact_threshold", cfg.mcnemar_exact_threshold}};
    if (cfg.round_digits)
        j["round_digits"] = *cfg.round_digits;
    else
        j["round_digits"] = nullptr;
    return j;
}

nlohmann::json aggregate_json(const ExperimentConfig& cfg, const AggregateResult& agg) {
    nlohmann::json j{{"regime", regime_name(cfg.regime)},
                     {"master_seed", cfg.master_seed},
                     {"trials", agg.trials},
                     {"usable_trials", agg.usable_trials},
                     {"failed_trials", agg.failed_trials}};

    nlohmann::json auc = nlohmann::json::object();
    for (std::size_t s = 0; s < cfg.strategies.size(); ++s) {
        const StrategySummary& sum = agg.by_strategy[s];
        nlohmann::json per_spec = nlohmann::json::object();
        nlohmann::json spec_ties = nlohmann::json::object();
        for (std::size_t k = 0; k < cfg.bin_specs.size(); ++k) {
            per_spec[cfg.bin_specs[k].label()] = sum.auc_per_spec[k];
            spec_ties[cfg.bin_specs[k].label()] = sum.ties_per_spec[k];
        }
        auc[strategy_name(cfg.strategies[s])] = {{"pooled", sum.auc_pooled},
                                                 {"mean_of_specs", sum.auc_mean_of_specs},
                                                 {"per_spec", per_spec},
                                                 {"ties", spec_ties}};
    }
    j["auc"] = auc;

    nlohmann::json alignment{{"pooled", alignment_json(agg.alignment_pooled)}};
    nlohmann::json per_spec_alignment = nlohmann::json::object();
    for (std::size_t k = 0; k < cfg.bin_specs.size(); ++k)
        per_spec_alignment[cfg.bin_specs[k].label()] =
            alignment_json(agg.alignment_per_spec[k]);
    alignment["per_spec"] = per_spec_alignment;
    j["alignment"] = alignment;

    nlohmann::json mcnemar = nlohmann::json::object();
    for (std::size_t s = 0; s < cfg.strategies.size(); ++s) {
        nlohmann::json row = nlohmann::json::object();
        for (std::size_t s2 = 0; s2 < cfg.strategies.size(); ++s2) {
            const McNemarResult& r = agg.mcnemar[s][s2];
            row[strategy_name(cfg.strategies[s2])] = {{"n01", r.n01},
                                                      {"n10", r.n10},
                                                      {"statistic", r.statistic},
                                                      {"p_value", r.p_value},
                                                      {"exact", r.exact}};
        }
        mcnemar[strategy_name(cfg.strategies[s])] = row;
    }
    j["mcnemar"] = mcnemar;

    nlohmann::json failures = nlohmann::json::array();
    for (const auto& [trial, reason] : agg.failures)
        failures.push_back({{"trial", trial}, {"reason", reason}});
    j["failures"] = failures;
    return j;
}

nlohmann::json manifest_json(const ExperimentConfig& cfg, const std::string& timestamp_utc) {
    return {{"tool", "nuv"},
            {"version", kToolVersion},
            {"created_utc", timestamp_utc},
            {"config", config_json(cfg)}};
}

void write_trials_csv(std::ostream& out, const ExperimentConfig& cfg,
                      const std::vector<TrialRecord>& records) {
    out << "trial,d,d_tau,template_dist,gamma,sigma2,sigma2_m,model_hash,"
           "strategy,bin_spec,b_requested,b_effective,d_noise,d_distorted,"
           "pred_noise,pred_distorted,recognized,tie\n";
    const std::size_t n_spec = cfg.bin_specs.size();
    for (const TrialRecord& rec : records) {
        if (rec.failed) continue;
        for (std::size_t s = 0; s < cfg.strategies.size(); ++s) {
            for (std::size_t k = 0; k < n_spec; ++k) {
                const CellResult& cell = rec.cells[s * n_spec + k];
                out << rec.trial_index << ',' << rec.d << ',' << rec.d_tau << ','
                    << rec.template_dist << ',' << format_double(rec.gamma) << ','
                    << format_double(rec.sigma2) << ',';
                if (cfg.regime == Regime::spherical) out << format_double(rec.sigma2_m);
                out << ',';
                if (cfg.regime == Regime::general) {
                    char buf[17];
                    std::snprintf(buf, sizeof buf, "%016llx",
                                  static_cast<unsigned long long>(rec.model_hash));
                    out << buf;
                }
                out << ',' << strategy_name(cfg.strategies[s]) << ','
                    << cfg.bin_specs[k].label() << ',' << cell.b_requested << ','
                    << cell.b_effective << ',' << format_double(cell.d_noise) << ','
                    << format_double(cell.d_distorted) << ','
                    << format_double(cell.pred_noise) << ','
                    << format_double(cell.pred_distorted) << ','
                    << (cell.recognized ? 1 : 0) << ',' << (cell.tie ? 1 : 0) << '\n';
            }
        }
    }
}

} // namespace nuv::io
