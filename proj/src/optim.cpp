#include "dsmp/optim.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dsmp::optim {

PiecewiseSchedule::PiecewiseSchedule(std::vector<std::int64_t> boundaries, std::vector<double> values)
    : boundaries_(std::move(boundaries)), values_(std::move(values)) {
    if (values_.size() != boundaries_.size() + 1)
        throw std::invalid_argument("schedule needs exactly one more value than boundaries");
    for (std::size_t k = 1; k < boundaries_.size(); ++k)
        if (boundaries_[k] <= boundaries_[k - 1]) throw std::invalid_argument("schedule boundaries must ascend strictly");
    for (double v : values_)
        if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("schedule values must be finite and non-negative");
}

double PiecewiseSchedule::at(std::int64_t step) const {
    const auto k = std::lower_bound(boundaries_.begin(), boundaries_.end(), step) - boundaries_.begin();
    return values_[static_cast<std::size_t>(k)];
}

Adam::Adam(AdamOptions options) : options_(options) {
    if (!(options_.beta1 >= 0.0 && options_.beta1 < 1.0) || !(options_.beta2 >= 0.0 && options_.beta2 < 1.0))
        throw std::invalid_argument("Adam betas must lie in [0,1)");
    if (!(options_.epsilon > 0.0)) throw std::invalid_argument("Adam epsilon must be positive");
}

bool Adam::step(diff::ParameterStore& store, const diff::Gradients& grads, double lr) {
    for (const auto& [id, g] : grads) {
        if (!g.all_finite()) {
            ++skipped_;
            return false;
        }
        if (!g.same_shape(store.value(id))) throw std::invalid_argument("Adam: gradient shape mismatch for " + store.name(id));
    }

    ++t_;
    const double b1 = options_.beta1;
    const double b2 = options_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (const auto& [id, g] : grads) {
        auto [it, fresh] = moments_.try_emplace(id);
        Moments& mo = it->second;
        if (fresh) {
            mo.m = Matrix(g.rows(), g.cols());
            mo.v = Matrix(g.rows(), g.cols());
        }
        Matrix& w = store.mutable_value(id);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double gi = g.data()[i];
            double& m = mo.m.data()[i];
            double& v = mo.v.data()[i];
            m = b1 * m + (1.0 - b1) * gi;
            v = b2 * v + (1.0 - b2) * gi * gi;
            w.data()[i] -= lr * (m / c1) / (std::sqrt(v / c2) + options_.epsilon);
        }
    }
    return true;
}

}  // namespace dsmp::optim
