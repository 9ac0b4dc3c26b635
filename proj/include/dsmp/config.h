#pragma once

#include <stdexcept>
#include <string>
#include <variant>

#include "dsmp/dual.h"
#include "dsmp/market.h"
#include "dsmp/oracle.h"
#include "dsmp/primal.h"
#include "dsmp/problem.h"

namespace dsmp {

/// Invalid configuration; the message starts with the offending field path.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class SolverKind { Primal, Dual, Both };

using MarketParams = std::variant<DeterministicParams, MomentumParams, HestonParams, VasicekParams>;

struct ConstraintSpec {
    ConstraintSet::Kind kind = ConstraintSet::Kind::FullSpace;
    double kappa = 0.0;
    bool operator==(const ConstraintSpec&) const = default;
};

struct OracleSettings {
    bool enabled = false;
    std::size_t grid = 1000;
    double tolerance = 1e-10;
    bool midpoint = false;
    bool operator==(const OracleSettings&) const = default;
};

struct ExperimentConfig {
    std::string name = "experiment";
    SolverKind solver = SolverKind::Primal;
    MarketParams market = DeterministicParams{};
    Utility utility = Utility::log();
    ConstraintSpec constraint;
    double x0 = 1.0;
    double T = 0.5;
    std::size_t N = 10;
    /// Shared by both solvers; copied into primal.training and dual.training.
    TrainingSettings training;
    PrimalConfig primal;
    DualConfig dual;
    OracleSettings oracle;
    bool snapshots = false;
    bool operator==(const ExperimentConfig&) const = default;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string serialize_config(const ExperimentConfig& config);

/// Cross-field checks (dimensions, Feller condition, epoch divisibility, oracle applicability).
void validate_config(const ExperimentConfig& config);

std::shared_ptr<const MarketModel> build_market(const MarketParams& params);
Problem build_problem(const ExperimentConfig& config);
OracleConfig build_oracle(const ExperimentConfig& config);

std::string to_string(SolverKind kind);

}  // namespace dsmp
