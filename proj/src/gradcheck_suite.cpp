#include "dsmp/gradcheck_suite.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>

#include "dsmp/dual.h"
#include "dsmp/market.h"
#include "dsmp/nn.h"
#include "dsmp/primal.h"
#include "dsmp/tape.h"
#include "dsmp/utility.h"

namespace dsmp {

using diff::ParameterStore;
using diff::ParamId;
using diff::Tape;
using diff::Value;

namespace {

constexpr double kStep = 1e-6;
constexpr std::size_t kRows = 5;

class Suite {
public:
    explicit Suite(double tolerance) : rng_(20240917) { report_.tolerance = tolerance; }

    Matrix uniform(std::size_t r, std::size_t c, double lo, double hi) {
        std::uniform_real_distribution<double> u(lo, hi);
        Matrix m(r, c);
        for (double& x : m.values()) x = u(rng_);
        return m;
    }

    /// Values bounded away from zero: |x| in [0.2, 1.5] with random sign.
    Matrix away_from_zero(std::size_t r, std::size_t c) {
        Matrix m = uniform(r, c, 0.2, 1.5);
        std::bernoulli_distribution coin(0.5);
        for (double& x : m.values())
            if (coin(rng_)) x = -x;
        return m;
    }

    /// Scalar reduction with fixed random weights so every output entry matters.
    Value reduce(Value out) {
        Tape& tape = *out.tape();
        auto it = weights_.find(out.rows() * 1000 + out.cols());
        if (it == weights_.end())
            it = weights_.emplace(out.rows() * 1000 + out.cols(), uniform(out.rows(), out.cols(), -1.0, 1.0)).first;
        return diff::mean_rows(diff::sum_cols(out * tape.constant(it->second)));
    }

    void check(const std::string& name, ParameterStore& store, const std::vector<ParamId>& ids,
               const diff::ScalarFunction& f) {
        const auto r = diff::grad_check(f, store, ids, kStep);
        report_.entries.push_back({name, r.max_rel_error});
        report_.max_rel_error = std::max(report_.max_rel_error, r.max_rel_error);
    }

    /// One- and two-argument elementwise/structural primitives on (rows, cols) inputs.
    void unary(const std::string& name, Matrix x, const std::function<Value(Value)>& op) {
        ParameterStore store;
        const ParamId a = store.add("a", std::move(x));
        check(name, store, {a}, [&, a](Tape& t, const ParameterStore& s) { return reduce(op(t.parameter(s, a))); });
    }

    void binary(const std::string& name, Matrix x, Matrix y, const std::function<Value(Value, Value)>& op) {
        ParameterStore store;
        const ParamId a = store.add("a", std::move(x));
        const ParamId b = store.add("b", std::move(y));
        check(name, store, {a, b}, [&, a, b](Tape& t, const ParameterStore& s) {
            return reduce(op(t.parameter(s, a), t.parameter(s, b)));
        });
    }

    GradCheckSuiteReport take() { return std::move(report_); }
    std::mt19937_64& rng() { return rng_; }

private:
    std::mt19937_64 rng_;
    std::map<std::size_t, Matrix> weights_;
    GradCheckSuiteReport report_;
};

Coefficients sample_coefficients(Suite& s, std::size_t d) {
    Coefficients c;
    c.r = Matrix::scalar(0.05);
    c.mu = s.uniform(1, d, 0.05, 0.1);
    Matrix sigma = s.uniform(d, d, 0.0, 0.05);
    for (std::size_t i = 0; i < d; ++i) sigma(i, i) = 0.3;
    c.sigma = Volatility::shared(sigma);
    c.theta = s.uniform(1, d, -0.3, 0.3);
    return c;
}

}  // namespace

GradCheckSuiteReport run_gradcheck_suite(bool inject_fault, double tolerance) {
    Suite s(tolerance);
    const std::size_t b = kRows;

    s.binary("add", s.uniform(b, 3, -1, 1), s.uniform(b, 3, -1, 1), [](Value x, Value y) { return x + y; });
    s.binary("add_broadcast_row", s.uniform(b, 3, -1, 1), s.uniform(1, 3, -1, 1),
             [](Value x, Value y) { return x + y; });
    s.binary("add_broadcast_col", s.uniform(b, 3, -1, 1), s.uniform(b, 1, -1, 1),
             [](Value x, Value y) { return x + y; });
    s.binary("sub_broadcast_scalar", s.uniform(b, 3, -1, 1), s.uniform(1, 1, -1, 1),
             [](Value x, Value y) { return x - y; });
    s.binary("mul", s.uniform(b, 3, -1, 1), s.uniform(b, 3, -1, 1), [](Value x, Value y) { return x * y; });
    s.binary("mul_broadcast_col", s.uniform(b, 3, -1, 1), s.uniform(b, 1, -1, 1),
             [](Value x, Value y) { return x * y; });
    s.binary("div", s.uniform(b, 3, -1, 1), s.away_from_zero(b, 3), [](Value x, Value y) { return x / y; });
    s.binary("matmul", s.uniform(b, 4, -1, 1), s.uniform(4, 3, -1, 1),
             [](Value x, Value y) { return diff::matmul(x, y); });
    s.binary("concat_cols", s.uniform(b, 2, -1, 1), s.uniform(b, 3, -1, 1),
             [](Value x, Value y) { return diff::concat_cols(x, y); });
    s.binary("where", s.uniform(b, 3, -1, 1), s.uniform(b, 3, -1, 1), [&](Value x, Value y) {
        Matrix mask(b, 3);
        for (std::size_t i = 0; i < mask.size(); ++i) mask.values()[i] = i % 2 == 0 ? 1.0 : 0.0;
        return diff::where(mask, x, y);
    });

    s.unary("negate", s.uniform(b, 3, -1, 1), [](Value x) { return -x; });
    s.unary("scale", s.uniform(b, 3, -1, 1), [](Value x) { return 2.5 * x; });
    s.unary("add_scalar", s.uniform(b, 3, -1, 1), [](Value x) { return x + 0.7; });
    s.unary("transpose", s.uniform(b, 3, -1, 1), [](Value x) { return diff::transpose(x); });
    s.unary("broadcast_rows", s.uniform(1, 3, -1, 1), [&](Value x) { return diff::broadcast_rows(x, b); });
    s.unary("relu", s.away_from_zero(b, 3), [](Value x) { return diff::relu(x); });
    s.unary("square", s.uniform(b, 3, -1, 1), [](Value x) { return diff::square(x); });
    s.unary("sqrt", s.uniform(b, 3, 0.2, 2), [](Value x) { return diff::sqrt(x); });
    s.unary("exp", s.uniform(b, 3, -1, 1), [](Value x) { return diff::exp(x); });
    s.unary("guarded_log", s.uniform(b, 3, 0.2, 2), [](Value x) { return diff::guarded_log(x); });
    s.unary("guarded_pow", s.uniform(b, 3, 0.2, 2), [](Value x) { return diff::guarded_pow(x, 0.5); });
    s.unary("sin", s.uniform(b, 3, -2, 2), [](Value x) { return diff::sin(x); });
    s.unary("sum_cols", s.uniform(b, 3, -1, 1), [](Value x) { return diff::sum_cols(x); });
    s.unary("mean_rows", s.uniform(b, 3, -1, 1), [](Value x) { return diff::mean_rows(x); });
    s.unary("slice_cols", s.uniform(b, 4, -1, 1), [](Value x) { return diff::slice_cols(x, 1, 2); });
    s.unary("clamp_floor", s.away_from_zero(b, 3), [](Value x) { return diff::clamp_floor(x, 0.05); });
    s.unary("abs", s.away_from_zero(b, 3), [](Value x) { return diff::abs(x); });
    s.unary("custom_unary", s.uniform(b, 3, -1, 1), [](Value x) {
        Matrix out = x.value();
        for (double& e : out.values()) e = std::tanh(e);
        return x.tape()->custom_unary(x, out, [](const Matrix&, const Matrix& y, const Matrix& g) {
            Matrix dx = g;
            for (std::size_t i = 0; i < dx.size(); ++i) dx.values()[i] *= 1.0 - y.values()[i] * y.values()[i];
            return dx;
        });
    });

    for (const auto& [label, u] : {std::pair<std::string, Utility>{"log", Utility::log()},
                                   std::pair<std::string, Utility>{"power", Utility::power(0.5)}}) {
        s.unary("utility_" + label, s.uniform(b, 1, 0.3, 3), [u](Value x) { return u.u(x); });
        s.unary("marginal_utility_" + label, s.uniform(b, 1, 0.3, 3), [u](Value x) { return u.u_prime(x); });
        s.unary("conjugate_utility_" + label, s.uniform(b, 1, 0.3, 3), [u](Value x) { return u.fenchel(x); });
        s.unary("inverse_marginal_" + label, s.uniform(b, 1, 0.3, 3),
                [u](Value x) { return u.inverse_marginal(x); });
    }

    using Kind = nn::OutputTransform::Kind;
    for (Kind k : {Kind::SquareMinusKappa, Kind::ClampFloor, Kind::Square, Kind::AbsMinusKappa}) {
        const nn::OutputTransform t{k, 0.1, 2};
        s.unary("transform_" + nn::to_string(k), s.away_from_zero(b, 3), [t](Value x) { return t.apply(x); });
    }

    {
        const std::size_t d = 3;
        const Coefficients c = sample_coefficients(s, d);
        const Matrix dB = s.uniform(b, d, -0.2, 0.2);
        ParameterStore store;
        const ParamId X = store.add("X", s.uniform(b, 1, 0.5, 2));
        const ParamId p = store.add("p", s.uniform(b, 1, -1, -0.2));
        const ParamId pi = store.add("pi", s.uniform(b, d, -0.5, 1));
        const ParamId q = store.add("q", s.uniform(b, d, -0.3, 0.3));
        s.check("step_wealth_adjoint", store, {X, p, pi, q}, [&](Tape& t, const ParameterStore& st) {
            const auto n = step_wealth_adjoint(t.parameter(st, X), t.parameter(st, p), t.parameter(st, pi),
                                               t.parameter(st, q), c, t.constant(dB), 0.05);
            return s.reduce(diff::concat_cols(n.wealth, n.adjoint));
        });
        s.check("primal_control_loss", store, {p, pi, q}, [&](Tape& t, const ParameterStore& st) {
            return primal_control_loss(t.parameter(st, pi), t.parameter(st, p), t.parameter(st, q), c);
        });
        s.check("primal_bsde_loss", store, {X, p}, [&](Tape& t, const ParameterStore& st) {
            return primal_bsde_loss(t.parameter(st, p), t.parameter(st, X), Utility::log());
        });

        const ConstraintSet K = ConstraintSet::floor_box(0.1, d);
        const ParamId Y = store.add("Y", s.uniform(b, 1, 0.05, 0.5));
        const ParamId v = store.add("v", s.uniform(b, d, 0.1, 1));
        s.check("step_dual_adjoint", store, {Y, p, v, q}, [&](Tape& t, const ParameterStore& st) {
            Value vv = t.parameter(st, v);
            const auto n = step_dual_adjoint(t.parameter(st, Y), t.parameter(st, p), vv,
                                             K.support_on_dual_domain(vv), t.parameter(st, q), c, t.constant(dB), 0.05);
            return s.reduce(diff::concat_cols(n.state, n.adjoint));
        });
        s.check("dual_control_loss", store, {p, v, q}, [&](Tape& t, const ParameterStore& st) {
            return dual_control_loss(t.parameter(st, p), t.parameter(st, v), t.parameter(st, q), c, K);
        });
        s.check("dual_bsde_loss", store, {Y, X}, [&](Tape& t, const ParameterStore& st) {
            return dual_bsde_loss(t.parameter(st, X), t.parameter(st, Y), Utility::power(0.5));
        });
    }

    {
        ParameterStore store;
        nn::BatchNorm bn;
        bn.gamma = store.add("gamma", s.uniform(1, 3, 0.5, 1.5));
        bn.beta = store.add("beta", s.uniform(1, 3, -0.5, 0.5));
        bn.running_mean = Matrix(1, 3, 0.0);
        bn.running_var = Matrix(1, 3, 1.0);
        bn.epsilon = 1e-3;
        const ParamId x = store.add("x", s.uniform(b, 3, -1, 1));
        s.check("batch_norm_training", store, {bn.gamma, bn.beta, x}, [&](Tape& t, const ParameterStore& st) {
            return s.reduce(nn::batch_norm_training(t, st, bn, t.parameter(st, x), nullptr, nullptr));
        });
        s.check("batch_norm_inference", store, {bn.gamma, bn.beta, x}, [&](Tape& t, const ParameterStore& st) {
            return s.reduce(nn::batch_norm_inference(t, st, bn, t.parameter(st, x)));
        });
    }

    {
        ParameterStore store;
        nn::HeadSpec spec;
        spec.in_dim = 2;
        spec.out_dim = 3;
        spec.bn_epsilon = 1e-3;
        spec.transform = nn::OutputTransform{Kind::SquareMinusKappa, 1.0 / 30.0, nn::OutputTransform::kAllCols};
        nn::FeedForwardHead head = nn::FeedForwardHead::create(store, "head", spec, s.rng());
        const ParamId x = store.add("input", s.uniform(16, 2, -1, 1));
        std::vector<ParamId> ids = head.parameters();
        ids.push_back(x);
        s.check("feed_forward_head_training", store, ids, [&](Tape& t, const ParameterStore& st) {
            return s.reduce(head.forward(t, st, t.parameter(st, x), nn::Mode::Training));
        });
    }

    if (inject_fault) {
        s.unary("injected_wrong_adjoint", s.uniform(b, 3, -1, 1), [](Value x) {
            Matrix out = x.value();
            for (double& e : out.values()) e = std::sin(e);
            return x.tape()->custom_unary(x, out, [](const Matrix& in, const Matrix&, const Matrix& g) {
                Matrix dx = g;
                for (std::size_t i = 0; i < dx.size(); ++i) dx.values()[i] *= 1.5 * std::cos(in.values()[i]);
                return dx;
            });
        });
    }
    return s.take();
}

std::string format_report(const GradCheckSuiteReport& report) {
    std::string out;
    char buf[160];
    for (const auto& e : report.entries) {
        std::snprintf(buf, sizeof buf, "%-32s %.3e %s\n", e.name.c_str(), e.max_rel_error,
                      e.max_rel_error <= report.tolerance ? "ok" : "FAIL");
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "max relative error %.3e (tolerance %.0e): %s\n", report.max_rel_error,
                  report.tolerance, report.passed() ? "PASS" : "FAIL");
    out += buf;
    return out;
}

}  // namespace dsmp
