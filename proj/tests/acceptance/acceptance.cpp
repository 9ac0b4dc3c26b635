#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <algorithm>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "dsmp/config.h"
#include "dsmp/experiment.h"
#include "dsmp/gradcheck_suite.h"
#include "dsmp/oracle.h"

using namespace dsmp;

namespace {

const std::string kConfigDir = DSMP_CONFIG_DIR;
const std::filesystem::path kRunDir = "acceptance_runs";

// Reference values and tolerances.
constexpr double kGradTolerance = 1e-4;
constexpr double kFenchelTolerance = 1e-10;
constexpr double kConstrained41 = 2.34335;
constexpr double kUnconstrained41 = 2.35058;
constexpr double kOracleTolConstrained = 1e-4;
constexpr double kOracleTolUnconstrained = 5e-4;
constexpr double kBoundTol = 0.003;
constexpr double kGapTol = 0.005;
constexpr double kHestonShort = 2.02225;
constexpr double kHestonShortTol = 0.003;
constexpr double kHestonMedium = 2.04268;
constexpr double kHestonMediumTol = 0.004;
constexpr double kPrimalMinutes = 30.0;
constexpr double kFastSeconds = 60.0;
constexpr std::size_t kDualityConfigs = 20;
constexpr std::size_t kDualityPaths = 20000;
constexpr std::size_t kEulerPaths = 100000;

int failures = 0;

void report(int id, bool ok, const std::string& title, const std::string& detail) {
    std::printf("%s [%d] %s: %s\n", ok ? "PASS" : "FAIL", id, title.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string sci(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2e", x);
    return buf;
}

std::string num(double x, int digits = 5) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, x);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

ExperimentResult run_config(const std::string& name, std::optional<SolverKind> only = {}) {
    auto cfg = load_config(kConfigDir + "/" + name + ".json");
    if (only) cfg.solver = *only;
    RunOptions opt;
    opt.output_dir = (kRunDir / name).string();
    opt.log = [&](const std::string& line) { std::printf("    %s %s\n", name.c_str(), line.c_str()); std::fflush(stdout); };
    return run_experiment(cfg, opt);
}

double training_seconds(const SolverOutcome& o) {
    return o.history.steps.empty() ? 0.0 : o.history.steps.back().seconds;
}

void criterion_gradients() {
    const auto start = std::chrono::steady_clock::now();
    const auto rep = run_gradcheck_suite(false, kGradTolerance);
    const double secs = seconds_since(start);
    report(1, rep.max_rel_error <= kGradTolerance && secs < kFastSeconds, "gradient suite",
           "max rel error " + sci(rep.max_rel_error) + " over " + std::to_string(rep.entries.size()) +
               " checks in " + num(secs, 1) + " s");
}

void criterion_fenchel() {
    double worst = 0.0;
    for (const Utility& U : {Utility::log(), Utility::power(0.5), Utility::power(0.9)}) {
        for (int k = 0; k <= 120; ++k) {
            const double x = std::pow(10.0, -3.0 + 6.0 * k / 120.0);
            const double up = U.u_prime(x);
            const double lhs = U.u(x);
            worst = std::max(worst, std::abs(lhs - (U.fenchel(up) + x * up)) / std::max(1.0, std::abs(lhs)));
            const double inv = U.inverse_marginal(x);
            worst = std::max(worst, std::abs(U.fenchel_prime(x) + inv) / std::max(1.0, inv));
        }
    }
    report(2, worst <= kFenchelTolerance, "Fenchel identities", "max rel error " + sci(worst));
}

void criterion_oracle() {
    auto value_of = [](const std::string& name, double& secs) {
        auto cfg = load_config(kConfigDir + "/" + name + ".json");
        cfg.oracle.enabled = true;
        const auto start = std::chrono::steady_clock::now();
        const double v = log_dual_value(build_oracle(cfg)).value;
        secs = seconds_since(start);
        return v;
    };
    double s1 = 0.0, s2 = 0.0;
    const double c = value_of("example_4_1", s1);
    const double u = value_of("example_4_1_unconstrained", s2);
    const bool ok = std::abs(c - kConstrained41) <= kOracleTolConstrained &&
                    std::abs(u - kUnconstrained41) <= kOracleTolUnconstrained && s1 < kFastSeconds && s2 < kFastSeconds;
    report(3, ok, "oracle benchmark",
           "constrained " + num(c) + " (" + num(s1, 1) + " s), unconstrained " + num(u) + " (" + num(s2, 1) + " s)");
}

void criteria_example_4_1() {
    const auto r = run_config("example_4_1");
    const auto& p = *r.primal;
    const double vl = p.bounds.lower.mean, vu = p.bounds.upper.mean;
    const double minutes = training_seconds(p) / 60.0;
    report(4,
           std::abs(vl - kConstrained41) <= kBoundTol && std::abs(vu - kConstrained41) <= kBoundTol &&
               std::abs(vu - vl) <= kGapTol && minutes <= kPrimalMinutes,
           "primal Example 4.1", "V_l " + num(vl) + ", V_u " + num(vu) + ", training " + num(minutes, 1) + " min");
    const auto& d = *r.dual;
    const double dl = d.bounds.lower.mean, du = d.bounds.upper.mean;
    report(6,
           std::abs(dl - kConstrained41) <= kBoundTol && std::abs(du - kUnconstrained41) <= kBoundTol &&
               std::abs(dl - vl) <= kBoundTol,
           "dual Example 4.1", "Vtilde_l " + num(dl) + ", Vtilde_u " + num(du) + ", y " + num(d.initial_value));
}

void criterion_heston() {
    const auto a = run_config("heston_T0.2_N6", SolverKind::Primal);
    const auto b = run_config("heston_T0.5_N15", SolverKind::Primal);
    const double va = a.primal->bounds.lower.mean, vb = b.primal->bounds.lower.mean;
    report(5, std::abs(va - kHestonShort) <= kHestonShortTol && std::abs(vb - kHestonMedium) <= kHestonMediumTol,
           "primal Heston", "(0.2,6) V_l " + num(va) + ", (0.5,15) V_l " + num(vb));
}

void criterion_weak_duality() {
    auto cfg = load_config(kConfigDir + "/example_4_1.json");
    const Problem prob = build_problem(cfg);
    const std::size_t d = prob.dim();
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> normal(0.0, 0.3);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::size_t held = 0;
    double worst_margin = 1e300;
    for (std::size_t k = 0; k < kDualityConfigs; ++k) {
        Matrix pi(1, d), v(1, d);
        for (std::size_t i = 0; i < d; ++i) {
            pi(0, i) = prob.constraints.project_component(normal(rng));
            v(0, i) = 0.2 * unif(rng) * unif(rng);
        }
        const double y = 0.05 + 0.3 * unif(rng);
        auto engine = make_engine({2024, k});
        const NoiseBatch noise = sample_noise(engine, kDualityPaths, d, prob.N, prob.dt());
        Matrix X(kDualityPaths, 1, prob.x0), Y(kDualityPaths, 1, y);
        Matrix P(kDualityPaths, d), V(kDualityPaths, d);
        for (std::size_t r = 0; r < kDualityPaths; ++r)
            for (std::size_t i = 0; i < d; ++i) {
                P(r, i) = pi(0, i);
                V(r, i) = v(0, i);
            }
        const Matrix delta = prob.constraints.support_on_dual_domain(V);
        auto aux = prob.market->initial_aux(kDualityPaths);
        for (std::size_t i = 0; i < prob.N; ++i) {
            const auto c = prob.market->coefficients(i, i * prob.dt(), aux);
            X = step_wealth(X, P, c, noise.increments[i], prob.dt());
            Y = step_dual(Y, V, delta, c, noise.increments[i], prob.dt());
        }
        MeanAccumulator lhs, rhs;
        for (std::size_t r = 0; r < kDualityPaths; ++r) {
            lhs.add(prob.utility.u(X(r, 0)));
            rhs.add(prob.utility.fenchel_guarded(Y(r, 0)));
        }
        const auto l = lhs.estimate(), u = rhs.estimate();
        const double margin = u.mean + prob.x0 * y + 3.0 * std::hypot(l.std_error, u.std_error) - l.mean;
        worst_margin = std::min(worst_margin, margin);
        if (margin >= 0.0) ++held;
    }
    report(7, held == kDualityConfigs, "weak duality",
           std::to_string(held) + "/" + std::to_string(kDualityConfigs) + " configurations, smallest margin " +
               num(worst_margin, 6));
}

void criterion_euler() {
    const double r = 0.03, mu = 0.08, sigma = 0.25, pi = 0.8, x0 = 2.0, T = 1.0;
    const double theta = (mu - r) / sigma;
    const double exact = std::log(x0) + (r + pi * sigma * theta - 0.5 * pi * pi * sigma * sigma) * T;
    Coefficients c;
    c.r = Matrix::scalar(r);
    c.mu = Matrix(1, 1, mu);
    c.theta = Matrix(1, 1, theta);
    c.sigma = Volatility::shared(Matrix(1, 1, sigma));
    bool ok = true;
    std::string detail;
    for (std::size_t N : {10u, 50u}) {
        const double dt = T / static_cast<double>(N);
        auto engine = make_engine({88, N});
        const NoiseBatch noise = sample_noise(engine, kEulerPaths, 1, N, dt);
        Matrix X(kEulerPaths, 1, x0), P(kEulerPaths, 1, pi);
        for (std::size_t i = 0; i < N; ++i) X = step_wealth(X, P, c, noise.increments[i], dt);
        MeanAccumulator acc;
        for (double x : X.values()) acc.add(std::log(x));
        const auto e = acc.estimate();
        const double allowed = 3.0 * e.std_error + 2.0 * dt;
        ok = ok && std::abs(e.mean - exact) <= allowed;
        detail += "N=" + std::to_string(N) + " |err| " + num(std::abs(e.mean - exact), 6) + " <= " + num(allowed, 6) + "; ";
    }
    report(8, ok, "Euler consistency", detail + "exact " + num(exact, 6));
}

void criterion_refinements() {
    const auto e = run_config("example_4_1_epochs_50", SolverKind::Primal);
    const auto a = run_config("example_4_1_arch_rc", SolverKind::Primal);
    const double vl = e.primal->bounds.lower.mean, vu = a.primal->bounds.upper.mean;
    report(9, std::abs(vl - kConstrained41) <= kBoundTol && std::abs(vu - kConstrained41) <= kBoundTol,
           "refinements", "50 epochs V_l " + num(vl) + ", semi-recurrent (r,c) V_u " + num(vu));
}

void criterion_determinism() {
    std::vector<std::string> names;
    for (const auto& entry : std::filesystem::directory_iterator(kConfigDir))
        if (entry.path().extension() == ".json") names.push_back(entry.path().stem().string());
    std::sort(names.begin(), names.end());
    std::size_t identical = 0;
    std::string mismatched;
    for (const auto& name : names) {
        auto cfg = load_config(kConfigDir + "/" + name + ".json");
        cfg.training.mc_size = 3000;
        cfg.training.mc_shard = 1024;
        cfg.oracle.grid = 100;
        RunOptions opt;
        opt.steps = 6;
        std::string summaries[2];
        for (int k = 0; k < 2; ++k) {
            ::setenv("DSMP_WORKERS", k == 0 ? "1" : "3", 1);
            summaries[k] = summary_json(run_experiment(cfg, opt));
        }
        if (summaries[0] == summaries[1]) ++identical;
        else mismatched += " " + name;
    }
    ::unsetenv("DSMP_WORKERS");
    report(10, identical == names.size(), "determinism",
           std::to_string(identical) + "/" + std::to_string(names.size()) +
               " bundled configs gave byte-identical summaries" + (mismatched.empty() ? "" : " (differ:" + mismatched + ")"));
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    auto wanted = [&](std::initializer_list<int> ids) {
        if (only.empty()) return true;
        for (int id : ids)
            if (only.count(id)) return true;
        return false;
    };
    std::filesystem::create_directories(kRunDir);
    const std::vector<std::pair<std::initializer_list<int>, std::function<void()>>> plan{
        {{1}, criterion_gradients},   {{2}, criterion_fenchel},         {{3}, criterion_oracle},
        {{7}, criterion_weak_duality}, {{8}, criterion_euler},           {{10}, criterion_determinism},
        {{4, 6}, criteria_example_4_1}, {{5}, criterion_heston},         {{9}, criterion_refinements},
    };
    for (const auto& [ids, fn] : plan) {
        if (!wanted(ids)) continue;
        try {
            fn();
        } catch (const std::exception& e) {
            for (int id : ids) report(id, false, "criterion", std::string("error: ") + e.what());
        }
    }
    std::printf("%s: %d failing\n", failures == 0 ? "ALL PASS" : "SOME FAIL", failures);
    return failures == 0 ? 0 : 1;
}
