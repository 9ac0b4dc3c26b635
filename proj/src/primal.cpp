#include "dsmp/primal.h"

#include <chrono>
#include <cmath>
#include <map>
#include <stdexcept>

namespace dsmp {

using diff::Value;

Value primal_bsde_loss(Value p_N, Value X_N, const Utility& utility) {
    return diff::mean_rows(diff::square(p_N + utility.u_prime(X_N)));
}

Value primal_control_loss(Value pi, Value p, Value q, const Coefficients& c) {
    diff::Tape& tape = *pi.tape();
    Value exposure = c.sigma.right_apply(pi);
    return diff::mean_rows(diff::sum_cols(exposure * (p * theta_of(tape, c) + q)));
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

bool finite(double x) { return std::isfinite(x); }

}  // namespace

PrimalSolver::PrimalSolver(Problem problem, PrimalConfig config)
    : problem_(std::move(problem)),
      config_(std::move(config)),
      bsde_optimizer_(config_.training.adam) {
    problem_.validate();
    if (config_.training.batch == 0) throw std::invalid_argument("batch size must be positive");
    if (config_.arch.integrand_extra_inputs && problem_.market->extra_feature_count() == 0)
        throw std::invalid_argument("market " + problem_.market->name() + " has no extra network inputs");

    const std::size_t m = problem_.traded();
    const std::size_t d = problem_.dim();
    std::mt19937_64 rng = make_engine({config_.training.seed, kInitStream});
    std::uniform_real_distribution<double> p0_dist(config_.p0_init.low, config_.p0_init.high);
    const double p0_value = config_.p0_init.low == config_.p0_init.high ? config_.p0_init.low : p0_dist(rng);
    p0_ = store_.add("p0", Matrix::scalar(p0_value));

    const auto& K = problem_.constraints;
    pi0_ = nn::ConstantHead::create(store_, "pi0", m, config_.pi0_init.low, config_.pi0_init.high,
                                    K.primal_transform(ConstraintSet::Position::Initial), rng);
    q0_ = nn::ConstantHead::create(store_, "q0", d, config_.q0_init.low, config_.q0_init.high,
                                   nn::OutputTransform::identity(), rng);
    project_control0();

    const std::size_t extra = config_.arch.integrand_extra_inputs ? problem_.market->extra_feature_count() : 0;
    const std::size_t pi_in = 1 + (config_.arch.control_recurrent ? m : 0);
    const std::size_t q_in = 1 + extra + (config_.arch.integrand_recurrent ? d : 0);
    const auto later = K.primal_transform(ConstraintSet::Position::Later);
    for (std::size_t i = 1; i < problem_.N; ++i) {
        pi_heads_.push_back(nn::FeedForwardHead::create(store_, "pi" + std::to_string(i),
                                                        head_spec(config_.arch, pi_in, m, later), rng));
        q_heads_.push_back(nn::FeedForwardHead::create(
            store_, "q" + std::to_string(i),
            head_spec(config_.arch, q_in, d, nn::OutputTransform::identity()), rng));
    }
    for (std::size_t i = 0; i < problem_.N; ++i) control_optimizers_.emplace_back(config_.training.adam);
}

double PrimalSolver::p0() const { return store_.value(p0_).item(); }

void PrimalSolver::project_control0() {
    const auto& t = pi0_.transform();
    if (t.kind != nn::OutputTransform::Kind::ClampFloor) return;
    for (double& x : store_.mutable_value(pi0_.parameter()).values()) x = std::max(-t.kappa, x);
}

std::vector<diff::ParamId> PrimalSolver::bsde_parameters() const {
    std::vector<diff::ParamId> ids{p0_, q0_.parameter()};
    for (const auto& h : q_heads_)
        for (diff::ParamId id : h.parameters()) ids.push_back(id);
    return ids;
}

Value PrimalSolver::pad(Value inner) const {
    const std::size_t extra = problem_.dim() - problem_.traded();
    if (extra == 0) return inner;
    return diff::concat_cols(inner, inner.tape()->constant(inner.rows(), extra, 0.0));
}

Value PrimalSolver::control_input(Value X, Value previous) const {
    return config_.arch.control_recurrent ? diff::concat_cols(X, previous) : X;
}

Value PrimalSolver::integrand_input(diff::Tape& tape, Value X, const AuxState& aux, Value previous) const {
    Value in = X;
    if (config_.arch.integrand_extra_inputs)
        in = diff::concat_cols(in, tape.constant(problem_.market->extra_features(aux, X.rows())));
    if (config_.arch.integrand_recurrent) in = diff::concat_cols(in, previous);
    return in;
}

PrimalSolver::Terminal PrimalSolver::forward_training(diff::Tape& tape, const NoiseBatch& noise) {
    const std::size_t b = noise.batch();
    const double dt = problem_.dt();
    AuxState aux = problem_.market->initial_aux(b);
    Value X = tape.constant(b, 1, problem_.x0);
    Value P = diff::broadcast_rows(tape.parameter(store_, p0_), b);
    Value prev_pi, prev_q;
    for (std::size_t i = 0; i < problem_.N; ++i) {
        const double t = static_cast<double>(i) * dt;
        const Coefficients c = problem_.market->coefficients(i, t, aux);
        Value pi, q;
        if (i == 0) {
            pi = pi0_.forward(tape, store_, b);
            q = q0_.forward(tape, store_, b);
        } else {
            pi = pi_heads_[i - 1].forward(tape, store_, control_input(X, prev_pi), nn::Mode::Training);
            q = q_heads_[i - 1].forward(tape, store_, integrand_input(tape, X, aux, prev_q), nn::Mode::Training);
        }
        const auto next = step_wealth_adjoint(X, P, pad(pi), q, c, tape.constant(noise.increments[i]), dt);
        X = next.wealth;
        P = next.adjoint;
        problem_.market->step_aux(aux, i, t, dt, noise.increments[i]);
        prev_pi = pi;
        prev_q = q;
    }
    return {X, P};
}

StepDiagnostics PrimalSolver::training_step(const NoiseBatch& noise, std::int64_t step) {
    if (noise.steps() != problem_.N || noise.dim() != problem_.dim())
        throw std::invalid_argument("noise batch does not match the problem dimensions");
    StepDiagnostics diag;
    const std::size_t b = noise.batch();
    const double dt = problem_.dt();

    // Substep 1: terminal-condition loss over {p0, q-heads}.
    {
        diff::Tape tape;
        const auto ids = bsde_parameters();
        tape.watch(store_, ids);
        const Terminal end = forward_training(tape, noise);
        Value loss = primal_bsde_loss(end.adjoint, end.wealth, problem_.utility);
        diag.bsde_loss = loss.value().item();
        bool applied = false;
        if (finite(diag.bsde_loss)) applied = bsde_optimizer_.step(store_, tape.backward(loss), config_.bsde_lr.at(step));
        if (!applied) ++diag.skipped;
    }

    // Substep 2: per-time control losses, carried forward one interval at a time.
    const double lr = config_.control_lr.at(step);
    AuxState aux = problem_.market->initial_aux(b);
    Coefficients c = problem_.market->coefficients(0, 0.0, aux);
    Matrix X(b, 1, problem_.x0);
    Matrix P(b, 1, p0());
    Matrix pi, q;
    {
        diff::Tape tape;
        tape.watch(store_, pi0_.parameter());
        Value pi_v = pi0_.forward(tape, store_, b);
        Value q_v = q0_.forward(tape, store_, b);
        Value loss = primal_control_loss(pad(pi_v), tape.constant(P), q_v, c);
        diag.control_losses.push_back(loss.value().item());
        bool applied = false;
        if (finite(diag.control_losses.back()))
            applied = control_optimizers_[0].step(store_, tape.backward(loss), lr);
        if (!applied) ++diag.skipped;
        project_control0();
    }
    {
        diff::Tape tape;
        pi = pi0_.forward(tape, store_, b).value();
        q = q0_.forward(tape, store_, b).value();
    }

    for (std::size_t n = 1; n < problem_.N; ++n) {
        diff::Tape tape;
        nn::FeedForwardHead& head = pi_heads_[n - 1];
        tape.watch(store_, head.parameters());

        const double t_prev = static_cast<double>(n - 1) * dt;
        Value pi_prev = tape.constant(pi);
        Value q_prev = tape.constant(q);
        const auto next = step_wealth_adjoint(tape.constant(X), tape.constant(P), pad(pi_prev), q_prev, c,
                                              tape.constant(noise.increments[n - 1]), dt);
        problem_.market->step_aux(aux, n - 1, t_prev, dt, noise.increments[n - 1]);
        c = problem_.market->coefficients(n, static_cast<double>(n) * dt, aux);

        Value pi_v = head.forward(tape, store_, control_input(next.wealth, pi_prev), nn::Mode::Training);
        Value q_v = q_heads_[n - 1].forward(tape, store_, integrand_input(tape, next.wealth, aux, q_prev),
                                            nn::Mode::Training);
        Value loss = primal_control_loss(pad(pi_v), next.adjoint, q_v, c);
        diag.control_losses.push_back(loss.value().item());
        bool applied = false;
        if (finite(diag.control_losses.back()))
            applied = control_optimizers_[n].step(store_, tape.backward(loss), lr);
        if (!applied) ++diag.skipped;

        X = next.wealth.value();
        P = next.adjoint.value();
        pi = pi_v.value();
        q = q_v.value();
    }
    skipped_ += diag.skipped;
    return diag;
}

PrimalTrajectories PrimalSolver::simulate(const NoiseBatch& noise) const {
    if (noise.steps() != problem_.N || noise.dim() != problem_.dim())
        throw std::invalid_argument("noise batch does not match the problem dimensions");
    const std::size_t b = noise.batch();
    const double dt = problem_.dt();
    PrimalTrajectories out;
    AuxState aux = problem_.market->initial_aux(b);
    out.wealth.push_back(Matrix(b, 1, problem_.x0));
    out.adjoint.push_back(Matrix(b, 1, p0()));
    Matrix prev_pi, prev_q;
    for (std::size_t i = 0; i < problem_.N; ++i) {
        diff::Tape tape;
        const double t = static_cast<double>(i) * dt;
        const Coefficients c = problem_.market->coefficients(i, t, aux);
        Value X = tape.constant(out.wealth.back());
        Value pi, q;
        if (i == 0) {
            pi = pi0_.forward(tape, store_, b);
            q = q0_.forward(tape, store_, b);
        } else {
            pi = pi_heads_[i - 1].infer(tape, store_, control_input(X, tape.constant(prev_pi)));
            q = q_heads_[i - 1].infer(tape, store_, integrand_input(tape, X, aux, tape.constant(prev_q)));
        }
        Value full = pad(pi);
        const auto next = step_wealth_adjoint(X, tape.constant(out.adjoint.back()), full, q, c,
                                              tape.constant(noise.increments[i]), dt);
        problem_.market->step_aux(aux, i, t, dt, noise.increments[i]);
        out.control.push_back(full.value());
        out.integrand.push_back(q.value());
        out.wealth.push_back(next.wealth.value());
        out.adjoint.push_back(next.adjoint.value());
        prev_pi = pi.value();
        prev_q = q.value();
    }
    return out;
}

BoundsEstimate PrimalSolver::estimate_bounds(std::size_t paths, std::uint64_t seed) const {
    struct Shard {
        MeanAccumulator lower, upper;
    };
    const auto& s = config_.training;
    const std::function<Shard(std::size_t, std::size_t)> work = [&](std::size_t k, std::size_t count) {
        std::mt19937_64 engine = make_engine({s.seed, kEvalStream, seed, k});
        const NoiseBatch noise = sample_noise(engine, count, problem_.dim(), problem_.N, problem_.dt());
        const PrimalTrajectories tr = simulate(noise);
        Shard out;
        const Matrix& X = tr.wealth.back();
        const Matrix& P = tr.adjoint.back();
        for (std::size_t r = 0; r < count; ++r) {
            out.lower.add(problem_.utility.u(X(r, 0)));
            out.upper.add(problem_.utility.fenchel_guarded(-P(r, 0)));
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
    e.upper.mean -= problem_.x0 * p0();
    e.paths = paths;
    return e;
}

TrainingHistory PrimalSolver::train(const std::function<void(const BoundsRecord&)>& on_eval) {
    const auto& s = config_.training;
    TrainingHistory history;
    const auto start = std::chrono::steady_clock::now();
    for (std::int64_t k = 0; k < s.steps; ++k) {
        std::mt19937_64 engine = make_engine({s.seed, kTrainStream, training_batch_index(s, k)});
        const NoiseBatch noise = sample_noise(engine, s.batch, problem_.dim(), problem_.N, problem_.dt());
        training_step(noise, k);
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        history.steps.push_back({k + 1, seconds, p0()});
        if (skipped_ > s.nan_limit) {
            history.skipped_updates = skipped_;
            throw NonFiniteError("more than " + std::to_string(s.nan_limit) +
                                 " updates skipped for non-finite values; consider a larger bn_epsilon");
        }
        if (s.eval_every > 0 && (k + 1) % static_cast<std::int64_t>(s.eval_every) == 0) {
            const BoundsEstimate b = estimate_bounds(s.mc_size, static_cast<std::uint64_t>(k + 1));
            history.bounds.push_back({k + 1, b.lower, b.upper, p0()});
            if (on_eval) on_eval(history.bounds.back());
        }
    }
    history.skipped_updates = skipped_;
    return history;
}

std::vector<nn::NamedTensor> PrimalSolver::snapshot() const {
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
    stats(pi_heads_);
    stats(q_heads_);
    return out;
}

void PrimalSolver::restore(const std::vector<nn::NamedTensor>& tensors) {
    std::map<std::string, const Matrix*> by_name;
    for (const auto& t : tensors) by_name[t.name] = &t.value;
    auto fetch = [&](const std::string& name, const Matrix& like) -> const Matrix& {
        auto it = by_name.find(name);
        if (it == by_name.end()) throw std::invalid_argument("snapshot lacks tensor " + name);
        if (!it->second->same_shape(like)) throw std::invalid_argument("snapshot tensor " + name + " has wrong shape");
        return *it->second;
    };
    for (diff::ParamId id = 0; id < store_.size(); ++id)
        store_.mutable_value(id) = fetch(store_.name(id), store_.value(id));
    auto stats = [&](std::vector<nn::FeedForwardHead>& heads) {
        for (auto& h : heads)
            for (std::size_t k = 0; k < h.norms().size(); ++k) {
                const std::string base = h.prefix() + "/bn" + std::to_string(k);
                h.norms()[k].running_mean = fetch(base + "/moving_mean", h.norms()[k].running_mean);
                h.norms()[k].running_var = fetch(base + "/moving_variance", h.norms()[k].running_var);
            }
    };
    stats(pi_heads_);
    stats(q_heads_);
}

}  // namespace dsmp
