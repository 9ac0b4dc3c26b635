#include "dsmp/dual.h"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace dsmp {

using diff::Value;

Value dual_bsde_loss(Value p2_N, Value Y_N, const Utility& utility) {
    return diff::mean_rows(diff::square(p2_N - utility.inverse_marginal(Y_N)));
}

Value dual_control_loss(Value p2, Value v, Value q2, const Coefficients& c, const ConstraintSet& K) {
    Value term = p2 * K.support_on_dual_domain(v) + diff::sum_cols(c.sigma.inv_apply(v) * q2);
    return diff::mean_rows(diff::square(term));
}

Matrix dual_candidate_control(const Matrix& p2, const Matrix& q2, const Coefficients& c, const ConstraintSet& K,
                              std::vector<char>* valid) {
    Matrix raw = c.sigma.inv_transpose_apply(q2);
    if (valid) valid->assign(raw.rows(), 1);
    for (std::size_t r = 0; r < raw.rows(); ++r) {
        const double p = p2(r, 0);
        const bool ok = p != 0.0 && std::isfinite(p);
        for (double& x : raw.row(r)) x = ok ? x / p : 0.0;
        if (!ok && valid) (*valid)[r] = 0;
    }
    return K.project(raw);
}

namespace {

nn::HeadSpec head_spec(const Architecture& arch, std::size_t in, std::size_t out, nn::OutputTransform t) {
    nn::HeadSpec spec;
    spec.in_dim = in;
    spec.out_dim = out;
    spec.hidden = arch.hidden;
    spec.bn_epsilon = arch.bn_epsilon;
    spec.bn_momentum = arch.bn_momentum;
    spec.transform = t;
    return spec;
}

}  // namespace

DualSolver::DualSolver(Problem problem, DualConfig config)
    : problem_(std::move(problem)),
      config_(std::move(config)),
      bsde_optimizer_(config_.training.adam),
      y_optimizer_(config_.training.adam) {
    problem_.validate();
    if (config_.training.batch == 0) throw std::invalid_argument("batch size must be positive");
    if (!(config_.y_init.low > 0.0) || config_.y_init.high < config_.y_init.low)
        throw std::invalid_argument("initial y range must be positive");
    if (config_.arch.integrand_extra_inputs && problem_.market->extra_feature_count() == 0)
        throw std::invalid_argument("market " + problem_.market->name() + " has no extra network inputs");

    const std::size_t d = problem_.dim();
    std::mt19937_64 rng = make_engine({config_.training.seed, kInitStream, 2});
    std::uniform_real_distribution<double> y_dist(config_.y_init.low, config_.y_init.high);
    const double y0 = config_.y_init.low == config_.y_init.high ? config_.y_init.low : y_dist(rng);
    log_y_ = store_.add("log_y", Matrix::scalar(std::log(y0)));

    const auto vt = problem_.constraints.dual_transform();
    v0_ = nn::ConstantHead::create(store_, "v0", d, config_.v0_init.low, config_.v0_init.high, vt, rng);
    q0_ = nn::ConstantHead::create(store_, "q2_0", d, config_.q0_init.low, config_.q0_init.high,
                                   nn::OutputTransform::identity(), rng);

    const std::size_t extra = config_.arch.integrand_extra_inputs ? problem_.market->extra_feature_count() : 0;
    const std::size_t v_in = 1 + (config_.arch.control_recurrent ? d : 0);
    const std::size_t q_in = 1 + extra + (config_.integrand_uses_control ? d : 0) +
                             (config_.arch.integrand_recurrent ? d : 0);
    for (std::size_t i = 1; i < problem_.N; ++i) {
        v_heads_.push_back(nn::FeedForwardHead::create(store_, "v" + std::to_string(i),
                                                       head_spec(config_.arch, v_in, d, vt), rng));
        q_heads_.push_back(nn::FeedForwardHead::create(
            store_, "q2_" + std::to_string(i),
            head_spec(config_.arch, q_in, d, nn::OutputTransform::identity()), rng));
    }
    for (std::size_t i = 0; i < problem_.N; ++i) control_optimizers_.emplace_back(config_.training.adam);
}

double DualSolver::y() const { return std::exp(store_.value(log_y_).item()); }

Value DualSolver::initial_state(diff::Tape& tape, std::size_t batch) const {
    return diff::broadcast_rows(diff::exp(tape.parameter(store_, log_y_)), batch);
}

Value DualSolver::control_input(Value Y, Value previous) const {
    return config_.arch.control_recurrent ? diff::concat_cols(Y, previous) : Y;
}

Value DualSolver::integrand_input(diff::Tape& tape, Value Y, const AuxState& aux, Value v, Value previous) const {
    Value in = Y;
    if (config_.arch.integrand_extra_inputs)
        in = diff::concat_cols(in, tape.constant(problem_.market->extra_features(aux, Y.rows())));
    if (config_.integrand_uses_control) in = diff::concat_cols(in, v);
    if (config_.arch.integrand_recurrent) in = diff::concat_cols(in, previous);
    return in;
}

DualSolver::Terminal DualSolver::forward_training(diff::Tape& tape, const NoiseBatch& noise) {
    const std::size_t b = noise.batch();
    const double dt = problem_.dt();
    const ConstraintSet& K = problem_.constraints;
    AuxState aux = problem_.market->initial_aux(b);
    Value Y = initial_state(tape, b);
    Value P = tape.constant(b, 1, problem_.x0);
    Value prev_v, prev_q;
    for (std::size_t i = 0; i < problem_.N; ++i) {
        const double t = static_cast<double>(i) * dt;
        const Coefficients c = problem_.market->coefficients(i, t, aux);
        Value v, q;
        if (i == 0) {
            v = v0_.forward(tape, store_, b);
            q = q0_.forward(tape, store_, b);
        } else {
            v = v_heads_[i - 1].forward(tape, store_, control_input(Y, prev_v), nn::Mode::Training);
            q = q_heads_[i - 1].forward(tape, store_, integrand_input(tape, Y, aux, v, prev_q), nn::Mode::Training);
        }
        const auto next = step_dual_adjoint(Y, P, v, K.support_on_dual_domain(v), q, c,
                                            tape.constant(noise.increments[i]), dt);
        Y = next.state;
        P = next.adjoint;
        problem_.market->step_aux(aux, i, t, dt, noise.increments[i]);
        prev_v = v;
        prev_q = q;
    }
    return {Y, P};
}

StepDiagnostics DualSolver::training_step(const NoiseBatch& noise, std::int64_t step) {
    if (noise.steps() != problem_.N || noise.dim() != problem_.dim())
        throw std::invalid_argument("noise batch does not match the problem dimensions");
    StepDiagnostics diag;
    const std::size_t b = noise.batch();
    const double dt = problem_.dt();
    const ConstraintSet& K = problem_.constraints;

    {
        diff::Tape tape;
        std::vector<diff::ParamId> ids{log_y_, q0_.parameter()};
        for (const auto& h : q_heads_)
            for (diff::ParamId id : h.parameters()) ids.push_back(id);
        tape.watch(store_, ids);
        const Terminal end = forward_training(tape, noise);
        Value loss = dual_bsde_loss(end.adjoint, end.state, problem_.utility);
        diag.bsde_loss = loss.value().item();
        bool applied = false;
        if (std::isfinite(diag.bsde_loss)) {
            diff::Gradients grads = tape.backward(loss);
            diff::Gradients y_grad;
            y_grad[log_y_] = std::move(grads.at(log_y_));
            grads.erase(log_y_);
            // y keeps its own, faster-decaying schedule; both updates are skipped together
            if (y_grad.at(log_y_).all_finite()) {
                applied = bsde_optimizer_.step(store_, grads, config_.bsde_lr.at(step));
                if (applied) y_optimizer_.step(store_, y_grad, config_.y_lr.at(step));
            }
        }
        if (!applied) ++diag.skipped;
    }

    const double lr = config_.control_lr.at(step);
    AuxState aux = problem_.market->initial_aux(b);
    Coefficients c = problem_.market->coefficients(0, 0.0, aux);
    Matrix Y(b, 1, y());
    Matrix P(b, 1, problem_.x0);
    Matrix v, q;
    {
        diff::Tape tape;
        tape.watch(store_, v0_.parameter());
        Value v_v = v0_.forward(tape, store_, b);
        Value q_v = q0_.forward(tape, store_, b);
        Value loss = dual_control_loss(tape.constant(P), v_v, q_v, c, K);
        diag.control_losses.push_back(loss.value().item());
        bool applied = false;
        if (std::isfinite(diag.control_losses.back()))
            applied = control_optimizers_[0].step(store_, tape.backward(loss), lr);
        if (!applied) ++diag.skipped;
    }
    {
        diff::Tape tape;
        v = v0_.forward(tape, store_, b).value();
        q = q0_.forward(tape, store_, b).value();
    }

    for (std::size_t n = 1; n < problem_.N; ++n) {
        diff::Tape tape;
        nn::FeedForwardHead& head = v_heads_[n - 1];
        tape.watch(store_, head.parameters());

        const double t_prev = static_cast<double>(n - 1) * dt;
        Value v_prev = tape.constant(v);
        Value q_prev = tape.constant(q);
        const auto next = step_dual_adjoint(tape.constant(Y), tape.constant(P), v_prev,
                                            tape.constant(K.support_on_dual_domain(v)), q_prev, c,
                                            tape.constant(noise.increments[n - 1]), dt);
        problem_.market->step_aux(aux, n - 1, t_prev, dt, noise.increments[n - 1]);
        c = problem_.market->coefficients(n, static_cast<double>(n) * dt, aux);

        Value v_v = head.forward(tape, store_, control_input(next.state, v_prev), nn::Mode::Training);
        Value q_v = q_heads_[n - 1].forward(tape, store_, integrand_input(tape, next.state, aux, v_v, q_prev),
                                            nn::Mode::Training);
        Value loss = dual_control_loss(next.adjoint, v_v, q_v, c, K);
        diag.control_losses.push_back(loss.value().item());
        bool applied = false;
        if (std::isfinite(diag.control_losses.back()))
            applied = control_optimizers_[n].step(store_, tape.backward(loss), lr);
        if (!applied) ++diag.skipped;

        Y = next.state.value();
        P = next.adjoint.value();
        v = v_v.value();
        q = q_v.value();
    }
    skipped_ += diag.skipped;
    return diag;
}

DualTrajectories DualSolver::simulate(const NoiseBatch& noise) const {
    if (noise.steps() != problem_.N || noise.dim() != problem_.dim())
        throw std::invalid_argument("noise batch does not match the problem dimensions");
    const std::size_t b = noise.batch();
    const double dt = problem_.dt();
    const ConstraintSet& K = problem_.constraints;
    DualTrajectories out;
    AuxState aux = problem_.market->initial_aux(b);
    out.state.push_back(Matrix(b, 1, y()));
    out.adjoint.push_back(Matrix(b, 1, problem_.x0));
    Matrix prev_v, prev_q;
    for (std::size_t i = 0; i < problem_.N; ++i) {
        diff::Tape tape;
        const double t = static_cast<double>(i) * dt;
        const Coefficients c = problem_.market->coefficients(i, t, aux);
        Value Y = tape.constant(out.state.back());
        Value v, q;
        if (i == 0) {
            v = v0_.forward(tape, store_, b);
            q = q0_.forward(tape, store_, b);
        } else {
            v = v_heads_[i - 1].infer(tape, store_, control_input(Y, tape.constant(prev_v)));
            q = q_heads_[i - 1].infer(tape, store_, integrand_input(tape, Y, aux, v, tape.constant(prev_q)));
        }
        const auto next = step_dual_adjoint(Y, tape.constant(out.adjoint.back()), v, K.support_on_dual_domain(v), q,
                                            c, tape.constant(noise.increments[i]), dt);
        problem_.market->step_aux(aux, i, t, dt, noise.increments[i]);
        out.control.push_back(v.value());
        out.integrand.push_back(q.value());
        out.state.push_back(next.state.value());
        out.adjoint.push_back(next.adjoint.value());
        prev_v = v.value();
        prev_q = q.value();
    }
    return out;
}

Matrix DualSolver::candidate_wealth(const NoiseBatch& noise, const DualTrajectories& dual,
                                    std::vector<char>& valid) const {
    const std::size_t b = noise.batch();
    const double dt = problem_.dt();
    valid.assign(b, 1);
    AuxState aux = problem_.market->initial_aux(b);
    Matrix X(b, 1, problem_.x0);
    std::vector<char> ok;
    for (std::size_t i = 0; i < problem_.N; ++i) {
        const double t = static_cast<double>(i) * dt;
        const Coefficients c = problem_.market->coefficients(i, t, aux);
        const Matrix pi = dual_candidate_control(dual.adjoint[i], dual.integrand[i], c, problem_.constraints, &ok);
        for (std::size_t r = 0; r < b; ++r) valid[r] = valid[r] && ok[r];
        X = step_wealth(X, pi, c, noise.increments[i], dt);
        problem_.market->step_aux(aux, i, t, dt, noise.increments[i]);
    }
    return X;
}

BoundsEstimate DualSolver::estimate_bounds(std::size_t paths, std::uint64_t seed) const {
    struct Shard {
        MeanAccumulator lower, upper;
    };
    const auto& s = config_.training;
    const std::function<Shard(std::size_t, std::size_t)> work = [&](std::size_t k, std::size_t count) {
        std::mt19937_64 engine = make_engine({s.seed, kEvalStream, seed, k, 2});
        const NoiseBatch noise = sample_noise(engine, count, problem_.dim(), problem_.N, problem_.dt());
        const DualTrajectories tr = simulate(noise);
        std::vector<char> valid;
        const Matrix X = candidate_wealth(noise, tr, valid);
        Shard out;
        const Matrix& Y = tr.state.back();
        for (std::size_t r = 0; r < count; ++r) {
            if (valid[r]) out.lower.add(problem_.utility.u(X(r, 0)));
            out.upper.add(problem_.utility.fenchel_guarded(Y(r, 0)));
        }
        return out;
    };
    const auto shards = run_shards<Shard>(paths, s.mc_shard, s.workers, work);
    MeanAccumulator lower, upper;
    for (const Shard& sh : shards) {
        lower.merge(sh.lower);
        upper.merge(sh.upper);
    }
    BoundsEstimate e;
    e.lower = lower.estimate();
    e.upper = upper.estimate();
    e.upper.mean += problem_.x0 * y();
    e.paths = paths;
    return e;
}

TrainingHistory DualSolver::train(const std::function<void(const BoundsRecord&)>& on_eval) {
    const auto& s = config_.training;
    TrainingHistory history;
    const auto start = std::chrono::steady_clock::now();
    for (std::int64_t k = 0; k < s.steps; ++k) {
        std::mt19937_64 engine = make_engine({s.seed, kTrainStream, training_batch_index(s, k), 2});
        const NoiseBatch noise = sample_noise(engine, s.batch, problem_.dim(), problem_.N, problem_.dt());
        training_step(noise, k);
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        history.steps.push_back({k + 1, seconds, y()});
        if (skipped_ > s.nan_limit) {
            history.skipped_updates = skipped_;
            throw NonFiniteError("more than " + std::to_string(s.nan_limit) +
                                 " updates skipped for non-finite values; consider a larger bn_epsilon");
        }
        if (s.eval_every > 0 && (k + 1) % static_cast<std::int64_t>(s.eval_every) == 0) {
            const BoundsEstimate b = estimate_bounds(s.mc_size, static_cast<std::uint64_t>(k + 1));
            history.bounds.push_back({k + 1, b.lower, b.upper, y()});
            if (on_eval) on_eval(history.bounds.back());
        }
    }
    history.skipped_updates = skipped_;
    return history;
}

std::vector<nn::NamedTensor> DualSolver::snapshot() const {
    std::vector<nn::NamedTensor> out;
    for (diff::ParamId id = 0; id < store_.size(); ++id) out.push_back({store_.name(id), store_.value(id)});
    auto stats = [&out](const std::vector<nn::FeedForwardHead>& heads) {
        for (const auto& h : heads)
            for (std::size_t k = 0; k < h.norms().size(); ++k) {
                const std::string base = h.prefix() + "/bn" + std::to_string(k);
                out.push_back({base + "/moving_mean", h.norms()[k].running_mean});
                out.push_back({base + "/moving_variance", h.norms()[k].running_var});
            }
    };
    stats(v_heads_);
    stats(q_heads_);
    return out;
}

}  // namespace dsmp
