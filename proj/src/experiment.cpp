#include "dsmp/experiment.h"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace dsmp {

namespace {

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

template <typename Solver>
SolverOutcome train_solver(Solver& solver, const std::string& label, const RunOptions& options) {
    SolverOutcome out;
    const auto& s = solver.config().training;
    out.history = solver.train([&](const BoundsRecord& b) {
        if (options.log)
            options.log(label + " step " + std::to_string(b.step) + ": lower " + fmt(b.lower.mean) + " upper " +
                        fmt(b.upper.mean));
    });
    if (out.history.bounds.empty() || out.history.bounds.back().step != s.steps) {
        const BoundsEstimate b = solver.estimate_bounds(s.mc_size, static_cast<std::uint64_t>(s.steps));
        out.history.bounds.push_back({s.steps, b.lower, b.upper, 0.0});
    }
    const BoundsRecord& last = out.history.bounds.back();
    out.bounds.lower = last.lower;
    out.bounds.upper = last.upper;
    out.bounds.paths = s.mc_size;
    out.skipped_updates = solver.skipped_updates();
    return out;
}

}  // namespace

ExperimentResult run_experiment(ExperimentConfig config, const RunOptions& options) {
    if (options.seed) config.training.seed = *options.seed;
    if (options.steps) config.training.steps = *options.steps;
    if (config.training.epochs > 0 && config.training.steps % static_cast<std::int64_t>(config.training.epochs) != 0)
        config.training.epochs = 0;
    config.training.workers = default_workers();
    config.primal.training = config.training;
    config.dual.training = config.training;
    validate_config(config);

    const auto start = std::chrono::steady_clock::now();
    ExperimentResult result;
    result.config = config;
    const Problem problem = build_problem(config);

    if (config.solver != SolverKind::Dual) {
        PrimalSolver solver(problem, config.primal);
        result.primal = train_solver(solver, "primal", options);
        result.primal->initial_value = solver.p0();
        result.primal->history.bounds.back().value = solver.p0();
        if (config.snapshots && !options.output_dir.empty()) {
            std::filesystem::create_directories(options.output_dir);
            write_file(std::filesystem::path(options.output_dir) / "snapshot_primal.json",
                       nn::snapshot_to_json(solver.snapshot()));
        }
    }
    if (config.solver != SolverKind::Primal) {
        DualSolver solver(problem, config.dual);
        result.dual = train_solver(solver, "dual", options);
        result.dual->initial_value = solver.y();
        result.dual->history.bounds.back().value = solver.y();
        if (config.snapshots && !options.output_dir.empty()) {
            std::filesystem::create_directories(options.output_dir);
            write_file(std::filesystem::path(options.output_dir) / "snapshot_dual.json",
                       nn::snapshot_to_json(solver.snapshot()));
        }
    }
    if (config.oracle.enabled) result.oracle_value = log_dual_value(build_oracle(config)).value;
    result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    if (!options.output_dir.empty()) {
        const std::filesystem::path dir(options.output_dir);
        std::filesystem::create_directories(dir);
        if (result.primal) {
            write_file(dir / "history_primal.csv", history_csv(result.primal->history, "p0", "V_l", "V_u"));
            write_file(dir / "trace_primal.csv", trace_csv(result.primal->history, "p0"));
        }
        if (result.dual) {
            write_file(dir / "history_dual.csv", history_csv(result.dual->history, "y", "Vtilde_l", "Vtilde_u"));
            write_file(dir / "trace_dual.csv", trace_csv(result.dual->history, "y"));
        }
        write_file(dir / "summary.json", summary_json(result));
        nlohmann::ordered_json timing{{"wall_seconds", result.wall_seconds}};
        write_file(dir / "timing.json", timing.dump(2) + "\n");
    }
    return result;
}

std::string summary_json(const ExperimentResult& r) {
    nlohmann::ordered_json j;
    j["name"] = r.config.name;
    j["solver"] = to_string(r.config.solver);
    j["seed"] = r.config.training.seed;
    j["steps"] = r.config.training.steps;
    if (r.primal) {
        j["primal"] = {{"V_l", r.primal->bounds.lower.mean},
                       {"V_l_stderr", r.primal->bounds.lower.std_error},
                       {"V_u", r.primal->bounds.upper.mean},
                       {"V_u_stderr", r.primal->bounds.upper.std_error},
                       {"p0", r.primal->initial_value},
                       {"skipped_updates", r.primal->skipped_updates}};
    }
    if (r.dual) {
        j["dual"] = {{"Vtilde_l", r.dual->bounds.lower.mean},
                     {"Vtilde_l_stderr", r.dual->bounds.lower.std_error},
                     {"Vtilde_u", r.dual->bounds.upper.mean},
                     {"Vtilde_u_stderr", r.dual->bounds.upper.std_error},
                     {"y", r.dual->initial_value},
                     {"skipped_updates", r.dual->skipped_updates}};
    }
    if (r.oracle_value) j["oracle"] = {{"value", *r.oracle_value}};
    return j.dump(2) + "\n";
}

std::string history_csv(const TrainingHistory& h, const std::string& value_name, const std::string& lower,
                        const std::string& upper) {
    std::string out = "step,seconds," + value_name + "," + lower + "," + lower + "_stderr," + upper + "," + upper +
                      "_stderr\n";
    for (const auto& b : h.bounds) {
        double seconds = 0.0;
        if (b.step >= 1 && static_cast<std::size_t>(b.step) <= h.steps.size()) seconds = h.steps[b.step - 1].seconds;
        out += std::to_string(b.step) + "," + fmt(seconds) + "," + fmt(b.value) + "," + fmt(b.lower.mean) + "," +
               fmt(b.lower.std_error) + "," + fmt(b.upper.mean) + "," + fmt(b.upper.std_error) + "\n";
    }
    return out;
}

std::string trace_csv(const TrainingHistory& h, const std::string& value_name) {
    std::string out = "step,seconds," + value_name + "\n";
    for (const auto& s : h.steps) out += std::to_string(s.step) + "," + fmt(s.seconds) + "," + fmt(s.value) + "\n";
    return out;
}

}  // namespace dsmp
