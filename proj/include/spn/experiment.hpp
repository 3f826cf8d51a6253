#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spn/model.hpp"

namespace spn {

struct ExperimentStructure {
    std::string id;
    SpnModel truth;
    // Explicit grid sizes; when absent the grids follow eps / 6 as in pac_learn.
    std::optional<std::uint64_t> leaf_levels;
    std::optional<std::uint64_t> weight_levels;
};

struct ExperimentConfig {
    std::vector<ExperimentStructure> structures;
    std::vector<double> eps_grid;
    std::vector<std::size_t> m_grid;
    std::size_t trials = 0;
    std::uint64_t seed_base = 0;
    std::uint64_t cap = 1'000'000;
    std::size_t threads = 0; // 0 picks the hardware concurrency
};

// JSON document:
//   {"structures": [{"id": "mix", "model": {...model document...},
//                    "levels": {"leaf": 30, "weight": 30}}],
//    "eps_grid": [0.1], "m_grid": [100, 1000], "trials": 50,
//    "seed_base": 1, "cap": 1000000, "threads": 4}
// Throws ConfigError on a malformed document.
ExperimentConfig experiment_from_json(std::string_view text);

struct ExperimentRow {
    std::string structure_id;
    std::size_t e = 0;
    std::size_t k = 0;
    int n = 0;
    std::size_t depth = 0;
    double eps = 0.0;
    std::size_t m = 0;
    std::size_t trial = 0;
    double tv_error = 0.0;
    bool success = false;
};

// One row per (structure, eps, m, trial), sorted in that order. Each trial
// draws m samples from the truth with a seed derived from (seed_base,
// structure, m, trial), learns by tournament, and records the exact distance
// to the truth.
std::vector<ExperimentRow> run_scaling_experiment(const ExperimentConfig& config);

void write_rows_csv(std::ostream& out, const std::vector<ExperimentRow>& rows);

struct ExperimentSummary {
    std::string structure_id;
    double eps = 0.0;
    std::size_t m = 0;
    double median_tv = 0.0;
    double success_rate = 0.0;
};

std::vector<ExperimentSummary> summarize(const std::vector<ExperimentRow>& rows);

// Least-squares fit of log(median_tv) = intercept + slope * log(m).
struct LogLogFit {
    double intercept = 0.0;
    double slope = 0.0;
    // m at which the fitted median reaches target.
    double required_m(double target) const;
};

LogLogFit fit_log_log(const std::vector<ExperimentSummary>& points);

} // namespace spn
