#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <vector>

#include "dsmp/tape.h"

namespace dsmp::optim {

/// Piecewise-constant learning rate. values[k] applies for boundaries[k-1] < step <= boundaries[k].
class PiecewiseSchedule {
public:
    PiecewiseSchedule() : values_{1e-3} {}
    explicit PiecewiseSchedule(double constant) : PiecewiseSchedule({}, {constant}) {}
    PiecewiseSchedule(std::vector<std::int64_t> boundaries, std::vector<double> values);

    double at(std::int64_t step) const;
    const std::vector<std::int64_t>& boundaries() const noexcept { return boundaries_; }
    const std::vector<double>& values() const noexcept { return values_; }

    bool operator==(const PiecewiseSchedule&) const = default;

private:
    std::vector<std::int64_t> boundaries_;
    std::vector<double> values_;
};

struct AdamOptions {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-7;
    bool operator==(const AdamOptions&) const = default;
};

class Adam {
public:
    explicit Adam(AdamOptions options = {});

    /// Applies one update to every parameter present in grads. Returns false, leaving everything
    /// untouched, when any gradient entry is non-finite.
    bool step(diff::ParameterStore& store, const diff::Gradients& grads, double lr);

    std::int64_t iterations() const noexcept { return t_; }
    std::int64_t skipped() const noexcept { return skipped_; }
    const AdamOptions& options() const noexcept { return options_; }

private:
    struct Moments {
        Matrix m;
        Matrix v;
    };

    AdamOptions options_;
    std::int64_t t_ = 0;
    std::int64_t skipped_ = 0;
    std::map<diff::ParamId, Moments> moments_;
};

}  // namespace dsmp::optim
