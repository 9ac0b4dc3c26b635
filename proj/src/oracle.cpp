#include "dsmp/oracle.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <stdexcept>

#include "dsmp/problem.h"

namespace dsmp {

namespace {

constexpr std::size_t kChunk = 100;

struct Quadratic {
    Matrix A;  // sigma^{-1}
    std::vector<double> theta;
    std::vector<double> linear;  // gradient of delta_K on the dual domain
    std::vector<char> bounded;   // coordinate restricted to [0, inf)
    bool zero = false;           // dual domain is {0} on the constrained block

    std::vector<double> residual(const std::vector<double>& v) const {
        const std::size_t d = theta.size();
        std::vector<double> z(theta);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) z[i] += A(i, j) * v[j];
        return z;
    }

    double value(const std::vector<double>& v) const {
        const auto z = residual(v);
        double f = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) f += 0.5 * z[i] * z[i] + linear[i] * v[i];
        return f;
    }

    std::vector<double> gradient(const std::vector<double>& v) const {
        const auto z = residual(v);
        const std::size_t d = theta.size();
        std::vector<double> g(linear);
        for (std::size_t j = 0; j < d; ++j)
            for (std::size_t i = 0; i < d; ++i) g[j] += A(i, j) * z[i];
        return g;
    }

    void project(std::vector<double>& v) const {
        for (std::size_t i = 0; i < v.size(); ++i)
            if (bounded[i]) v[i] = zero ? 0.0 : std::max(0.0, v[i]);
    }

    /// Largest eigenvalue of A^T A by power iteration, slightly inflated.
    double lipschitz() const {
        const std::size_t d = theta.size();
        std::vector<double> x(d, 1.0), y(d);
        double lambda = 0.0;
        for (int it = 0; it < 200; ++it) {
            std::vector<double> ax(d, 0.0);
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < d; ++j) ax[i] += A(i, j) * x[j];
            std::fill(y.begin(), y.end(), 0.0);
            for (std::size_t j = 0; j < d; ++j)
                for (std::size_t i = 0; i < d; ++i) y[j] += A(i, j) * ax[i];
            double norm = 0.0;
            for (double e : y) norm += e * e;
            norm = std::sqrt(norm);
            if (norm == 0.0) return 1.0;
            lambda = norm;
            for (std::size_t j = 0; j < d; ++j) x[j] = y[j] / norm;
        }
        return 1.01 * lambda;
    }
};

Quadratic build(const Coefficients& c, const ConstraintSet& K) {
    const std::size_t d = K.dim();
    if (c.theta.cols() != d || c.theta.rows() != 1) throw std::invalid_argument("oracle needs a (1,d) theta");
    Quadratic q;
    if (c.sigma.is_shared()) {
        q.A = c.sigma.inverse_matrix();
    } else {
        q.A = Matrix(d, d);
        for (std::size_t i = 0; i < d; ++i) q.A(i, i) = 1.0 / c.sigma.diag()(0, i);
    }
    q.theta.assign(c.theta.values().begin(), c.theta.values().end());
    q.linear.assign(d, 0.0);
    q.bounded.assign(d, 0);
    for (std::size_t i = 0; i < K.traded(); ++i) q.bounded[i] = 1;
    switch (K.kind()) {
        case ConstraintSet::Kind::FullSpace: q.zero = true; break;
        case ConstraintSet::Kind::NonNegOrthant: break;
        case ConstraintSet::Kind::FloorBox:
            for (std::size_t i = 0; i < K.traded(); ++i) q.linear[i] = K.kappa();
            break;
    }
    return q;
}

}  // namespace

PointwiseResult pointwise_dual_min(const Coefficients& c, const ConstraintSet& K, double tolerance,
                                   std::size_t max_iterations, const std::vector<double>* start) {
    const Quadratic q = build(c, K);
    const std::size_t d = q.theta.size();
    const double L = q.lipschitz();

    std::vector<double> x = start && start->size() == d ? *start : std::vector<double>(d, 0.0);
    q.project(x);
    std::vector<double> y = x, x_prev = x;
    double t = 1.0;
    double f_prev = q.value(x);

    PointwiseResult out;
    for (std::size_t it = 0; it < max_iterations; ++it) {
        // fixed-point residual at the current iterate
        const auto gx = q.gradient(x);
        std::vector<double> step(x);
        for (std::size_t i = 0; i < d; ++i) step[i] -= gx[i] / L;
        q.project(step);
        double res = 0.0;
        for (std::size_t i = 0; i < d; ++i) res += (step[i] - x[i]) * (step[i] - x[i]);
        res = L * std::sqrt(res);
        if (res <= tolerance) {
            out.v = x;
            out.objective = q.value(x);
            out.residual = res;
            out.iterations = it;
            return out;
        }

        const auto gy = q.gradient(y);
        x_prev = x;
        for (std::size_t i = 0; i < d; ++i) x[i] = y[i] - gy[i] / L;
        q.project(x);
        const double f = q.value(x);
        if (f > f_prev) {
            // adaptive restart
            t = 1.0;
            y = x;
        } else {
            const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
            for (std::size_t i = 0; i < d; ++i) y[i] = x[i] + (t - 1.0) / t_next * (x[i] - x_prev[i]);
            t = t_next;
        }
        f_prev = f;
    }
    throw std::runtime_error("pointwise dual minimization did not converge within " +
                             std::to_string(max_iterations) + " iterations");
}

OracleResult log_dual_value(const OracleConfig& config) {
    if (!config.market) throw std::invalid_argument("oracle needs a market");
    if (!config.market->deterministic())
        throw std::invalid_argument("oracle requires deterministic coefficients, got " + config.market->name());
    if (config.constraints.dim() != config.market->noise_dim())
        throw std::invalid_argument("constraint dimension does not match the market");
    if (!(config.x0 > 0.0) || !(config.T > 0.0) || config.grid == 0)
        throw std::invalid_argument("oracle needs x0 > 0, T > 0 and a positive grid");

    const double h = config.T / static_cast<double>(config.grid);
    const AuxState aux = config.market->initial_aux(1);

    const std::function<std::vector<OraclePoint>(std::size_t, std::size_t)> work = [&](std::size_t k,
                                                                                       std::size_t count) {
        std::vector<OraclePoint> pts;
        std::vector<double> warm;
        for (std::size_t j = 0; j < count; ++j) {
            const std::size_t i = k * kChunk + j;
            const double t = (static_cast<double>(i) + (config.midpoint ? 0.5 : 0.0)) * h;
            const Coefficients c = config.market->coefficients(i, t, aux);
            const PointwiseResult p = pointwise_dual_min(c, config.constraints, config.tolerance,
                                                         config.max_iterations, warm.empty() ? nullptr : &warm);
            warm = p.v;
            pts.push_back({t, c.r(0, 0), p.objective, p.v});
        }
        return pts;
    };
    const auto parts = run_shards<std::vector<OraclePoint>>(config.grid, kChunk, config.workers, work);

    OracleResult result;
    double integral = 0.0;
    for (const auto& part : parts)
        for (const auto& p : part) {
            integral += (p.r + p.objective) * h;
            result.points.push_back(p);
        }
    result.value = std::log(config.x0) + integral;
    return result;
}

std::string oracle_points_csv(const OracleResult& result) {
    std::string out = "t,r,objective";
    const std::size_t d = result.points.empty() ? 0 : result.points.front().v.size();
    for (std::size_t i = 0; i < d; ++i) out += ",v" + std::to_string(i + 1);
    out += '\n';
    char buf[64];
    auto put = [&](double x) {
        std::snprintf(buf, sizeof buf, "%.6g", x);
        out += buf;
    };
    for (const auto& p : result.points) {
        put(p.t);
        out += ',';
        put(p.r);
        out += ',';
        put(p.objective);
        for (double v : p.v) {
            out += ',';
            put(v);
        }
        out += '\n';
    }
    return out;
}

}  // namespace dsmp
