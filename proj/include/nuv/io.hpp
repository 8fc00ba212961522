#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "nuv/experiments.hpp"
#include "nuv/matrix.hpp"

namespace nuv::io {

inline constexpr const char* kToolVersion = "0.1.0";

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/*
 * Numeric vector from a text file: one value per line, or a single-column
 * CSV whose optional first line is a non-numeric header. Values must be
 * finite and there must be at least two of them. Throws io_error on
 * missing files and malformed content.
 */
std::vector<double> read_vector_file(const std::string& path);

// Square matrix from comma-separated rows, symmetric to 1e-9 relative.
SymMat read_matrix_file(const std::string& path);

// Shortest decimal form that parses back to exactly the same double.
std::string format_double(double value);

nlohmann::json config_json(const ExperimentConfig& cfg);
nlohmann::json aggregate_json(const ExperimentConfig& cfg, const AggregateResult& agg);

// Reproduction record for a simulation run: tool version, full config, and
// the timestamp. Everything except the timestamp is deterministic.
nlohmann::json manifest_json(const ExperimentConfig& cfg, const std::string& timestamp_utc);

// One row per (usable trial, strategy, bin spec); LF line endings, '.'
// decimal separator, fields that do not apply to the regime left empty.
void write_trials_csv(std::ostream& out, const ExperimentConfig& cfg,
                      const std::vector<TrialRecord>& records);

} // namespace nuv::io
