#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "dsmp/config.h"

namespace dsmp {

struct RunOptions {
    /// Empty: nothing is written.
    std::string output_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> steps;
    /// Progress lines (evaluations); may be empty.
    std::function<void(const std::string&)> log;
};

struct SolverOutcome {
    BoundsEstimate bounds;
    double initial_value = 0.0;  // p0 or y
    std::int64_t skipped_updates = 0;
    TrainingHistory history;
};

struct ExperimentResult {
    ExperimentConfig config;
    std::optional<SolverOutcome> primal;
    std::optional<SolverOutcome> dual;
    std::optional<double> oracle_value;
    double wall_seconds = 0.0;
};

/// Applies overrides, trains the requested solvers, evaluates the final bounds and writes outputs.
ExperimentResult run_experiment(ExperimentConfig config, const RunOptions& options);

/// summary.json contents (deterministic for a fixed config and seed).
std::string summary_json(const ExperimentResult& result);
/// step,seconds,<value>,<lower>,<lower>_stderr,<upper>,<upper>_stderr
std::string history_csv(const TrainingHistory& history, const std::string& value_name, const std::string& lower,
                        const std::string& upper);
/// step,seconds,<value>
std::string trace_csv(const TrainingHistory& history, const std::string& value_name);

}  // namespace dsmp
