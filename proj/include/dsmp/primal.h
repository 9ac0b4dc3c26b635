#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "dsmp/nn.h"
#include "dsmp/noise.h"
#include "dsmp/optim.h"
#include "dsmp/problem.h"

namespace dsmp {

struct PrimalConfig {
    Architecture arch;
    Range p0_init{-0.4, -0.2};
    Range pi0_init{0.0, 0.2};
    Range q0_init{-0.1, 0.1};
    optim::PiecewiseSchedule bsde_lr{{1000, 3000, 8000}, {1e-2, 1e-3, 1e-4, 1e-5}};
    optim::PiecewiseSchedule control_lr{{1000, 3000, 8000}, {1e-3, 1e-4, 1e-5, 1e-6}};
    TrainingSettings training;
    bool operator==(const PrimalConfig&) const = default;
};

struct BoundsEstimate {
    Estimate lower;
    Estimate upper;
    std::size_t paths = 0;
};

/// Time grid values X_0..X_N, p_0..p_N and the controls/integrands used on each interval.
struct PrimalTrajectories {
    std::vector<Matrix> wealth;
    std::vector<Matrix> adjoint;
    std::vector<Matrix> control;    // (b, d), padded coordinates zero
    std::vector<Matrix> integrand;  // (b, d)
};

struct StepDiagnostics {
    double bsde_loss = 0.0;
    std::vector<double> control_losses;
    int skipped = 0;
};

/// mean |p_N + U'(X_N)|^2
diff::Value primal_bsde_loss(diff::Value p_N, diff::Value X_N, const Utility& utility);
/// mean pi^T sigma (p theta + q)
diff::Value primal_control_loss(diff::Value pi, diff::Value p, diff::Value q, const Coefficients& c);

class PrimalSolver {
public:
    PrimalSolver(Problem problem, PrimalConfig config);

    /// One step of the two-substep training scheme on the given batch; `step` selects learning rates.
    StepDiagnostics training_step(const NoiseBatch& noise, std::int64_t step);

    /// Inference-mode simulation (running batch-norm statistics, no state change).
    PrimalTrajectories simulate(const NoiseBatch& noise) const;

    /// V_l = mean U(X_N), V_u = mean U~(-p_N) - x0 p0 over fresh paths derived from `seed`.
    BoundsEstimate estimate_bounds(std::size_t paths, std::uint64_t seed) const;

    TrainingHistory train(const std::function<void(const BoundsRecord&)>& on_eval = {});

    double p0() const;
    const Problem& problem() const noexcept { return problem_; }
    const PrimalConfig& config() const noexcept { return config_; }
    diff::ParameterStore& store() noexcept { return store_; }
    const diff::ParameterStore& store() const noexcept { return store_; }
    nn::ConstantHead& control0() noexcept { return pi0_; }
    nn::ConstantHead& integrand0() noexcept { return q0_; }
    std::vector<nn::FeedForwardHead>& control_heads() noexcept { return pi_heads_; }
    std::vector<nn::FeedForwardHead>& integrand_heads() noexcept { return q_heads_; }
    diff::ParamId p0_parameter() const noexcept { return p0_; }
    std::int64_t skipped_updates() const noexcept { return skipped_; }

    std::vector<nn::NamedTensor> snapshot() const;
    void restore(const std::vector<nn::NamedTensor>& tensors);

private:
    struct Terminal {
        diff::Value wealth;
        diff::Value adjoint;
    };

    Terminal forward_training(diff::Tape& tape, const NoiseBatch& noise);
    diff::Value pad(diff::Value inner) const;
    diff::Value control_input(diff::Value X, diff::Value previous) const;
    diff::Value integrand_input(diff::Tape& tape, diff::Value X, const AuxState& aux, diff::Value previous) const;
    void project_control0();
    std::vector<diff::ParamId> bsde_parameters() const;

    Problem problem_;
    PrimalConfig config_;
    diff::ParameterStore store_;
    diff::ParamId p0_ = 0;
    nn::ConstantHead pi0_;
    nn::ConstantHead q0_;
    std::vector<nn::FeedForwardHead> pi_heads_;  // t_1 .. t_{N-1}
    std::vector<nn::FeedForwardHead> q_heads_;
    optim::Adam bsde_optimizer_;
    std::vector<optim::Adam> control_optimizers_;  // one per time point
    std::int64_t skipped_ = 0;
};

}  // namespace dsmp
