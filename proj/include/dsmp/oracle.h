#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "dsmp/constraints.h"
#include "dsmp/market.h"

namespace dsmp {

struct OracleConfig {
    std::shared_ptr<const MarketModel> market;
    ConstraintSet constraints = ConstraintSet::full_space(1);
    double x0 = 1.0;
    double T = 0.5;
    std::size_t grid = 1000;
    double tolerance = 1e-10;
    std::size_t max_iterations = 200000;
    /// Evaluate at interval midpoints instead of left endpoints.
    bool midpoint = false;
    unsigned workers = 1;
};

struct PointwiseResult {
    std::vector<double> v;
    double objective = 0.0;
    /// Norm of the projected-gradient step at the returned point.
    double residual = 0.0;
    std::size_t iterations = 0;
};

/// argmin over the dual domain of delta_K(v) + |theta + sigma^{-1} v|^2 / 2.
/// `start` (optional) warm-starts the iteration. Throws std::runtime_error without convergence.
PointwiseResult pointwise_dual_min(const Coefficients& c, const ConstraintSet& K, double tolerance,
                                   std::size_t max_iterations, const std::vector<double>* start = nullptr);

struct OraclePoint {
    double t = 0.0;
    double r = 0.0;
    double objective = 0.0;
    std::vector<double> v;
};

struct OracleResult {
    double value = 0.0;
    std::vector<OraclePoint> points;
};

/// Log-utility dual value log x0 + sum_k (r(t_k) + min objective(t_k)) T / grid.
OracleResult log_dual_value(const OracleConfig& config);

/// Per-point table: t,r,objective,v_1..v_d
std::string oracle_points_csv(const OracleResult& result);

}  // namespace dsmp
