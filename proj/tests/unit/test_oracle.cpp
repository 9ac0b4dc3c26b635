#include <cmath>
#include <numbers>

#include "doctest.h"
#include "dsmp/oracle.h"

using dsmp::Matrix;
using namespace dsmp;

namespace {

DeterministicParams example_params(std::size_t m) {
    DeterministicParams p;
    p.m = m;
    p.rate_level = 0.06;
    p.rate_growth = 0.5;
    p.mu_base = 0.07;
    p.mu_amplitude = 0.02;
    p.mu_phase = 15.0;
    p.sigma_profile = SigmaProfile::OnePlusSqrt;
    p.sigma_diag = 0.3;
    p.sigma_off = 0.1;
    return p;
}

double objective(const Coefficients& c, const ConstraintSet& K, const std::vector<double>& v) {
    const std::size_t d = v.size();
    Matrix vm(1, d, v);
    Matrix z = c.sigma.inv_apply(vm);
    double q = 0.0;
    for (std::size_t j = 0; j < d; ++j) q += 0.5 * std::pow(c.theta(0, j) + z(0, j), 2);
    return K.support_delta(v).value + q;
}

// cyclic exact coordinate minimization over v >= 0 of kappa*sum(v) + |theta + A v|^2 / 2, A = sigma^{-1}
std::vector<double> coordinate_descent(const Coefficients& c, double kappa, std::size_t d) {
    const Matrix& A = c.sigma.inverse_matrix();
    std::vector<double> v(d, 0.0);
    for (int sweep = 0; sweep < 20000; ++sweep) {
        double moved = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            double col_sq = 0.0, lin = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                double rest = c.theta(0, j);
                for (std::size_t k = 0; k < d; ++k)
                    if (k != i) rest += A(j, k) * v[k];
                col_sq += A(j, i) * A(j, i);
                lin += A(j, i) * rest;
            }
            const double next = std::max(0.0, -(kappa + lin) / col_sq);
            moved = std::max(moved, std::abs(next - v[i]));
            v[i] = next;
        }
        if (moved < 1e-15) break;
    }
    return v;
}

}  // namespace

TEST_CASE("pointwise minimizer agrees with coordinate descent") {
    DeterministicMarket market(example_params(8));
    auto K = ConstraintSet::floor_box(1.0 / 30.0, 8);
    for (double t : {0.0, 0.13, 0.31, 0.49}) {
        auto c = market.coefficients(0, t, market.initial_aux(1));
        auto fista = pointwise_dual_min(c, K, 1e-12, 200000);
        auto cd = coordinate_descent(c, 1.0 / 30.0, 8);
        CHECK(fista.objective == doctest::Approx(objective(c, K, cd)).epsilon(1e-10));
        for (std::size_t i = 0; i < 8; ++i) CHECK(fista.v[i] == doctest::Approx(cd[i]).epsilon(1e-6));
        for (double x : fista.v) CHECK(x >= 0.0);
    }
}

TEST_CASE("full space minimum is half the squared price of risk") {
    DeterministicMarket market(example_params(5));
    auto c = market.coefficients(0, 0.2, market.initial_aux(1));
    auto res = pointwise_dual_min(c, ConstraintSet::full_space(5), 1e-12, 1000);
    double half = 0.0;
    for (double x : c.theta.values()) half += 0.5 * x * x;
    CHECK(res.objective == doctest::Approx(half));
    for (double x : res.v) CHECK(x == 0.0);
}

TEST_CASE("non-negative orthant with positive price of risk keeps v at zero") {
    Coefficients c;
    c.r = Matrix::scalar(0.01);
    c.mu = Matrix(1, 2, {0.05, 0.06});
    c.sigma = Volatility::shared(Matrix(2, 2, {0.2, 0.0, 0.0, 0.25}));
    c.theta = Matrix(1, 2, {0.2, 0.2});
    auto res = pointwise_dual_min(c, ConstraintSet::non_negative(2), 1e-12, 1000);
    CHECK(res.v[0] == doctest::Approx(0.0));
    CHECK(res.v[1] == doctest::Approx(0.0));
    // negative premium on the first asset: optimal v cancels it
    c.theta = Matrix(1, 2, {-0.1, 0.2});
    auto neg = pointwise_dual_min(c, ConstraintSet::non_negative(2), 1e-12, 1000);
    CHECK(neg.v[0] == doctest::Approx(0.1 * 0.2).epsilon(1e-6));
    CHECK(neg.objective == doctest::Approx(0.02));
}

TEST_CASE("log dual value quadrature on a constant market") {
    // r constant, theta constant: V = log x0 + (r + |theta|^2/2) T exactly for any grid
    DeterministicParams p;
    p.m = 2;
    p.rate_level = 0.05;
    p.mu_base = 0.1;
    p.sigma_diag = 0.25;
    OracleConfig cfg;
    cfg.market = std::make_shared<DeterministicMarket>(p);
    cfg.constraints = ConstraintSet::full_space(2);
    cfg.x0 = 3.0;
    cfg.T = 0.7;
    cfg.grid = 50;
    auto res = log_dual_value(cfg);
    CHECK(res.value == doctest::Approx(std::log(3.0) + (0.05 + 0.2 * 0.2) * 0.7).epsilon(1e-12));
    CHECK(res.points.size() == 50);
    CHECK(res.points[1].t == doctest::Approx(0.014));
    cfg.midpoint = true;
    CHECK(log_dual_value(cfg).points[0].t == doctest::Approx(0.007));
}

TEST_CASE("oracle value is independent of the worker count and constraints lower it") {
    OracleConfig cfg;
    cfg.market = std::make_shared<DeterministicMarket>(example_params(6));
    cfg.constraints = ConstraintSet::floor_box(1.0 / 30.0, 6);
    cfg.x0 = 10.0;
    cfg.T = 0.5;
    cfg.grid = 250;
    cfg.workers = 1;
    auto one = log_dual_value(cfg);
    cfg.workers = 4;
    auto four = log_dual_value(cfg);
    CHECK(one.value == four.value);
    cfg.constraints = ConstraintSet::full_space(6);
    CHECK(one.value < log_dual_value(cfg).value);
}

TEST_CASE("csv table of per-point results") {
    OracleResult r;
    r.value = 1.0;
    r.points.push_back({0.0, 0.05, 0.1, {0.0, 0.25}});
    const std::string csv = oracle_points_csv(r);
    CHECK(csv.rfind("t,r,objective,v1,v2\n", 0) == 0);
    CHECK(csv.find("0.25") != std::string::npos);
}
