#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "dsmp/config.h"
#include "dsmp/experiment.h"
#include "dsmp/gradcheck_suite.h"
#include "dsmp/oracle.h"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNonFinite = 3;

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

int cmd_run(const std::string& path, std::optional<std::uint64_t> seed, std::optional<std::int64_t> steps,
            std::string output, bool quiet) {
    dsmp::ExperimentConfig config;
    try {
        config = dsmp::load_config(path);
    } catch (const dsmp::ConfigError& e) {
        std::cerr << "invalid config: " << e.what() << "\n";
        return kExitConfig;
    }
    if (output.empty()) output = "runs/" + config.name;
    dsmp::RunOptions options;
    options.output_dir = output;
    options.seed = seed;
    options.steps = steps;
    if (!quiet) options.log = [](const std::string& line) { std::cout << line << std::endl; };
    try {
        const auto result = dsmp::run_experiment(config, options);
        if (result.primal)
            std::cout << "V_l " << fmt(result.primal->bounds.lower.mean) << "  V_u "
                      << fmt(result.primal->bounds.upper.mean) << "  p0 " << fmt(result.primal->initial_value) << "\n";
        if (result.dual)
            std::cout << "Vtilde_l " << fmt(result.dual->bounds.lower.mean) << "  Vtilde_u "
                      << fmt(result.dual->bounds.upper.mean) << "  y " << fmt(result.dual->initial_value) << "\n";
        if (result.oracle_value) std::cout << "oracle " << fmt(*result.oracle_value) << "\n";
        std::cout << "outputs written to " << output << "\n";
    } catch (const dsmp::ConfigError& e) {
        std::cerr << "invalid config: " << e.what() << "\n";
        return kExitConfig;
    } catch (const dsmp::NonFiniteError& e) {
        std::cerr << "training aborted: " << e.what() << "\n";
        return kExitNonFinite;
    }
    return 0;
}

int cmd_oracle(const std::string& path, const std::string& csv, bool midpoint) {
    dsmp::ExperimentConfig config;
    dsmp::OracleConfig oracle;
    try {
        config = dsmp::load_config(path);
        config.oracle.enabled = true;
        if (midpoint) config.oracle.midpoint = true;
        dsmp::validate_config(config);
        oracle = dsmp::build_oracle(config);
    } catch (const dsmp::ConfigError& e) {
        std::cerr << "invalid config: " << e.what() << "\n";
        return kExitConfig;
    }
    const auto result = dsmp::log_dual_value(oracle);
    std::printf("%.8f\n", result.value);
    if (!csv.empty()) {
        std::ofstream out(csv);
        if (!out) {
            std::cerr << "cannot write " << csv << "\n";
            return kExitFailure;
        }
        out << dsmp::oracle_points_csv(result);
    }
    return 0;
}

int cmd_gradcheck(bool inject_fault) {
    const auto report = dsmp::run_gradcheck_suite(inject_fault);
    std::cout << dsmp::format_report(report);
    return report.passed() ? 0 : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deep stochastic-maximum-principle portfolio solvers"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Train the configured solvers and write CSV/JSON outputs");
    std::string run_config;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> steps;
    std::string output;
    bool quiet = false;
    run->add_option("config", run_config, "Experiment config (JSON)")->required();
    run->add_option("--seed", seed, "Override the config seed");
    run->add_option("--steps", steps, "Override the number of training steps")->check(CLI::PositiveNumber);
    run->add_option("--output,-o", output, "Output directory (default runs/<name>)");
    run->add_flag("--quiet,-q", quiet, "Suppress progress lines");

    auto* oracle = app.add_subcommand("oracle", "Deterministic log-utility dual value");
    std::string oracle_config;
    std::string csv;
    bool midpoint = false;
    oracle->add_option("config", oracle_config, "Experiment config (JSON)")->required();
    oracle->add_option("--csv", csv, "Write the per-point minimizers to this CSV file");
    oracle->add_flag("--midpoint", midpoint, "Midpoint instead of left-endpoint quadrature");

    auto* grad = app.add_subcommand("gradcheck", "Compare reverse-mode gradients with finite differences");
    bool inject = false;
    grad->add_flag("--inject-fault", inject, "Add a primitive with a deliberately wrong adjoint");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(run_config, seed, steps, output, quiet);
        if (*oracle) return cmd_oracle(oracle_config, csv, midpoint);
        if (*grad) return cmd_gradcheck(inject);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitFailure;
}
