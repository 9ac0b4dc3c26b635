#include <cmath>

#include "doctest.h"
#include "dsmp/config.h"
#include "dsmp/dual.h"

using dsmp::Matrix;
using namespace dsmp;

namespace {

Problem small_problem(ConstraintSet K) {
    DeterministicParams p;
    p.m = 2;
    p.rate_level = 0.04;
    p.mu_base = 0.08;
    p.mu_amplitude = 0.02;
    p.sigma_profile = SigmaProfile::OnePlusSqrt;
    p.sigma_diag = 0.3;
    p.sigma_off = 0.1;
    Problem prob;
    prob.market = std::make_shared<DeterministicMarket>(p);
    prob.utility = Utility::log();
    prob.constraints = K;
    prob.x0 = 1.5;
    prob.T = 0.5;
    prob.N = 5;
    return prob;
}

DualConfig small_config() {
    DualConfig c;
    c.arch.hidden = {6, 6};
    c.arch.bn_epsilon = 100.0;
    c.training.steps = 20;
    c.training.batch = 32;
    c.training.mc_size = 2000;
    c.training.eval_every = 10;
    c.training.mc_shard = 512;
    c.training.seed = 5;
    return c;
}

Coefficients one_d(double sigma) {
    Coefficients c;
    c.r = Matrix::scalar(0.0);
    c.mu = Matrix(1, 1, 0.0);
    c.theta = Matrix(1, 1, 0.0);
    c.sigma = Volatility::shared(Matrix(1, 1, sigma));
    return c;
}

}  // namespace

TEST_CASE("dual bsde loss targets the inverse marginal utility") {
    diff::Tape tape;
    Matrix p2(2, 1, {2.0, 0.5}), Y(2, 1, {0.25, 4.0});
    auto loss = dual_bsde_loss(tape.constant(p2), tape.constant(Y), Utility::log());
    CHECK(loss.value().item() == doctest::Approx((std::pow(2.0 - 4.0, 2) + std::pow(0.5 - 0.25, 2)) / 2.0));
}

TEST_CASE("dual control loss vanishes at zero control and at a stationary pair") {
    auto K = ConstraintSet::floor_box(0.2, 1);
    auto c = one_d(1.0);
    diff::Tape tape;
    Matrix p2(1, 1, 1.0);
    auto zero = dual_control_loss(tape.constant(p2), tape.constant(Matrix(1, 1, 0.0)),
                                  tape.constant(Matrix(1, 1, 5.0)), c, K);
    CHECK(zero.value().item() == 0.0);
    auto stationary = dual_control_loss(tape.constant(p2), tape.constant(Matrix(1, 1, 1.0)),
                                        tape.constant(Matrix(1, 1, -0.2)), c, K);
    CHECK(stationary.value().item() == doctest::Approx(0.0));
}

TEST_CASE("dual control loss against direct arithmetic") {
    auto K = ConstraintSet::floor_box(0.1, 2);
    Coefficients c;
    c.r = Matrix::scalar(0.0);
    c.mu = Matrix(1, 2, 0.0);
    c.theta = Matrix(1, 2, 0.0);
    c.sigma = Volatility::shared(Matrix(2, 2, {0.5, 0.0, 0.0, 0.25}));
    Matrix p2(2, 1, {1.0, 3.0}), v(2, 2, {1.0, 2.0, 0.0, 0.5}), q2(2, 2, {0.1, -0.2, 0.4, 0.3});
    diff::Tape tape;
    auto loss = dual_control_loss(tape.constant(p2), tape.constant(v), tape.constant(q2), c, K);
    double total = 0.0;
    for (std::size_t r = 0; r < 2; ++r) {
        const double delta = 0.1 * (v(r, 0) + v(r, 1));
        const double h = p2(r, 0) * delta + v(r, 0) / 0.5 * q2(r, 0) + v(r, 1) / 0.25 * q2(r, 1);
        total += h * h;
    }
    CHECK(loss.value().item() == doctest::Approx(total / 2.0));
}

TEST_CASE("candidate control projects and flags p2 = 0") {
    auto K = ConstraintSet::floor_box(0.1, 2);
    Coefficients c;
    c.sigma = Volatility::shared(Matrix::identity(2));
    std::vector<char> valid;
    Matrix out = dual_candidate_control(Matrix(2, 1, {2.0, 0.0}), Matrix(2, 2, {1.0, -1.0, 1.0, 1.0}), c, K, &valid);
    CHECK(out(0, 0) == doctest::Approx(0.5));
    CHECK(out(0, 1) == doctest::Approx(-0.1));
    CHECK(valid[0] == 1);
    CHECK(valid[1] == 0);
    auto full = ConstraintSet::full_space(2);
    Matrix raw = dual_candidate_control(Matrix(1, 1, 2.0), Matrix(1, 2, {1.0, -1.0}), c, full);
    CHECK(raw == Matrix(1, 2, {0.5, -0.5}));
}

TEST_CASE("dual simulation reproduces its recursion and keeps v in the dual domain") {
    auto prob = small_problem(ConstraintSet::floor_box(0.1, 2));
    DualSolver s(prob, small_config());
    CHECK(s.y() > 0.0);
    CHECK(s.y() >= 0.2);
    CHECK(s.y() <= 0.4);
    auto noise = sample_noise(3, 40, 2, prob.N, prob.dt());
    auto tr = s.simulate(noise);
    for (double y : tr.state[0].values()) CHECK(y == doctest::Approx(s.y()));
    for (double p : tr.adjoint[0].values()) CHECK(p == prob.x0);
    Matrix Y = tr.state[0];
    auto aux = prob.market->initial_aux(40);
    for (std::size_t i = 0; i < prob.N; ++i) {
        for (std::size_t r = 0; r < 40; ++r) CHECK(prob.constraints.dual_domain_contains(tr.control[i].row(r)));
        auto c = prob.market->coefficients(i, i * prob.dt(), aux);
        Y = step_dual(Y, tr.control[i], prob.constraints.support_on_dual_domain(tr.control[i]), c,
                      noise.increments[i], prob.dt());
        CHECK(max_abs_diff(Y, tr.state[i + 1]) < 1e-12);
    }
}

TEST_CASE("unconstrained problems force the dual control to zero") {
    auto prob = small_problem(ConstraintSet::full_space(2));
    DualSolver s(prob, small_config());
    s.train();
    auto tr = s.simulate(sample_noise(8, 30, 2, prob.N, prob.dt()));
    for (const auto& v : tr.control)
        for (double x : v.values()) CHECK(x == 0.0);
}

TEST_CASE("dual bounds are ordered and reproducible") {
    auto prob = small_problem(ConstraintSet::floor_box(0.1, 2));
    DualSolver a(prob, small_config());
    DualSolver b(prob, small_config());
    auto ha = a.train();
    auto hb = b.train();
    REQUIRE(!ha.bounds.empty());
    CHECK(ha.bounds.back().upper.mean == hb.bounds.back().upper.mean);
    CHECK(a.y() == b.y());
    auto e = a.estimate_bounds(4000, 2);
    CHECK(e.lower.mean <= e.upper.mean + 3.0 * std::hypot(e.lower.std_error, e.upper.std_error));
}

TEST_CASE("zero risk premium: dual converges to the riskless value") {
    auto cfg = load_config(std::string(DSMP_CONFIG_DIR) + "/zero_premium.json");
    auto prob = build_problem(cfg);
    auto dc = cfg.dual;
    dc.training.steps = 400;
    dc.training.eval_every = 400;
    dc.training.mc_size = 20000;
    DualSolver s(prob, dc);
    s.train();
    const double exact = std::log(2.0) + 0.05;
    auto e = s.estimate_bounds(20000, 3);
    CHECK(e.upper.mean >= exact - 3.0 * e.upper.std_error);
    CHECK(e.upper.mean == doctest::Approx(exact).epsilon(2e-3));
    CHECK(s.y() == doctest::Approx(0.5).epsilon(0.03));
}

TEST_CASE("zero learning rates leave dual parameters unchanged") {
    auto cfg = small_config();
    cfg.bsde_lr = optim::PiecewiseSchedule(0.0);
    cfg.control_lr = optim::PiecewiseSchedule(0.0);
    cfg.y_lr = optim::PiecewiseSchedule(0.0);
    auto prob = small_problem(ConstraintSet::floor_box(0.1, 2));
    DualSolver s(prob, cfg);
    std::vector<Matrix> before;
    for (std::size_t i = 0; i < s.store().size(); ++i) before.push_back(s.store().value(i));
    s.training_step(sample_noise(1, 32, 2, prob.N, prob.dt()), 0);
    for (std::size_t i = 0; i < s.store().size(); ++i) CHECK(s.store().value(i) == before[i]);
}
