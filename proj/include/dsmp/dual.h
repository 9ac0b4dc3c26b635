#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "dsmp/nn.h"
#include "dsmp/noise.h"
#include "dsmp/optim.h"
#include "dsmp/primal.h"
#include "dsmp/problem.h"

namespace dsmp {

struct DualConfig {
    Architecture arch;
    Range y_init{0.2, 0.4};
    Range v0_init{-0.1, 0.1};
    Range q0_init{-0.1, 0.1};
    optim::PiecewiseSchedule bsde_lr{{2000, 5000, 8000}, {1e-2, 1e-3, 1e-4, 1e-5}};
    optim::PiecewiseSchedule control_lr{{2000, 5000, 8000}, {1e-2, 1e-3, 1e-4, 1e-5}};
    optim::PiecewiseSchedule y_lr{{200, 1000, 8000}, {1e-2, 1e-4, 1e-5, 1e-6}};
    TrainingSettings training;
    /// Feed the current dual control into the q2 networks.
    bool integrand_uses_control = false;
    bool operator==(const DualConfig&) const = default;
};

struct DualTrajectories {
    std::vector<Matrix> state;      // Y_0..Y_N
    std::vector<Matrix> adjoint;    // p2_0..p2_N
    std::vector<Matrix> control;    // v_i, (b, d)
    std::vector<Matrix> integrand;  // q2_i, (b, d)
};

/// mean |p2_N - I(Y_N)|^2, i.e. the residual of p2(T) = -U~'(Y(T)).
diff::Value dual_bsde_loss(diff::Value p2_N, diff::Value Y_N, const Utility& utility);
/// mean |p2 delta_K(v) + (sigma^{-1} v)^T q2|^2; zero exactly where the complementary condition holds
diff::Value dual_control_loss(diff::Value p2, diff::Value v, diff::Value q2, const Coefficients& c,
                              const ConstraintSet& K);
/// h_K(p2^{-1} sigma^{-T} q2) row by row; rows with p2 == 0 are zero and flagged in `valid`.
Matrix dual_candidate_control(const Matrix& p2, const Matrix& q2, const Coefficients& c, const ConstraintSet& K,
                              std::vector<char>* valid = nullptr);

class DualSolver {
public:
    DualSolver(Problem problem, DualConfig config);

    StepDiagnostics training_step(const NoiseBatch& noise, std::int64_t step);
    DualTrajectories simulate(const NoiseBatch& noise) const;

    /// lower: mean U(X^_N) under the candidate primal control (paths with p2 = 0 dropped);
    /// upper: mean U~(Y_N) + x0 y.
    BoundsEstimate estimate_bounds(std::size_t paths, std::uint64_t seed) const;
    /// Wealth at T under the candidate primal control on the same noise; `valid` marks usable paths.
    Matrix candidate_wealth(const NoiseBatch& noise, const DualTrajectories& dual, std::vector<char>& valid) const;

    TrainingHistory train(const std::function<void(const BoundsRecord&)>& on_eval = {});

    double y() const;
    const Problem& problem() const noexcept { return problem_; }
    const DualConfig& config() const noexcept { return config_; }
    diff::ParameterStore& store() noexcept { return store_; }
    const diff::ParameterStore& store() const noexcept { return store_; }
    nn::ConstantHead& control0() noexcept { return v0_; }
    nn::ConstantHead& integrand0() noexcept { return q0_; }
    std::vector<nn::FeedForwardHead>& control_heads() noexcept { return v_heads_; }
    std::vector<nn::FeedForwardHead>& integrand_heads() noexcept { return q_heads_; }
    diff::ParamId log_y_parameter() const noexcept { return log_y_; }
    std::int64_t skipped_updates() const noexcept { return skipped_; }

    std::vector<nn::NamedTensor> snapshot() const;

private:
    struct Terminal {
        diff::Value state;
        diff::Value adjoint;
    };

    Terminal forward_training(diff::Tape& tape, const NoiseBatch& noise);
    diff::Value control_input(diff::Value Y, diff::Value previous) const;
    diff::Value integrand_input(diff::Tape& tape, diff::Value Y, const AuxState& aux, diff::Value v,
                                diff::Value previous) const;
    diff::Value initial_state(diff::Tape& tape, std::size_t batch) const;

    Problem problem_;
    DualConfig config_;
    diff::ParameterStore store_;
    diff::ParamId log_y_ = 0;
    nn::ConstantHead v0_;
    nn::ConstantHead q0_;
    std::vector<nn::FeedForwardHead> v_heads_;
    std::vector<nn::FeedForwardHead> q_heads_;
    optim::Adam bsde_optimizer_;
    optim::Adam y_optimizer_;
    std::vector<optim::Adam> control_optimizers_;
    std::int64_t skipped_ = 0;
};

}  // namespace dsmp
