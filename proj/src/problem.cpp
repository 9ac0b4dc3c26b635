#include "dsmp/problem.h"

#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>

namespace dsmp {

void Problem::validate() const {
    if (!market) throw std::invalid_argument("problem has no market");
    if (constraints.dim() != market->noise_dim()) {
        throw std::invalid_argument("constraint dimension " + std::to_string(constraints.dim()) +
                                    " does not match market dimension " + std::to_string(market->noise_dim()));
    }
    if (constraints.traded() != market->traded())
        throw std::invalid_argument("constraint must cover exactly the traded coordinates");
    if (!(x0 > 0.0)) throw std::invalid_argument("initial wealth must be positive");
    if (!(T > 0.0)) throw std::invalid_argument("horizon must be positive");
    if (N == 0) throw std::invalid_argument("number of time steps must be positive");
}

Estimate MeanAccumulator::estimate() const {
    Estimate e;
    if (n_ == 0) return e;
    const double n = static_cast<double>(n_);
    e.mean = sum_ / n;
    if (n_ > 1) {
        const double var = std::max(0.0, (sum_sq_ - n * e.mean * e.mean) / (n - 1.0));
        e.std_error = std::sqrt(var / n);
    }
    return e;
}

std::uint64_t training_batch_index(const TrainingSettings& s, std::int64_t k) {
    if (s.epochs == 0) return static_cast<std::uint64_t>(k);
    const auto per_epoch = static_cast<std::int64_t>(s.steps / static_cast<std::int64_t>(s.epochs));
    return static_cast<std::uint64_t>(per_epoch > 0 ? k % per_epoch : k);
}

unsigned default_workers() {
    if (const char* env = std::getenv("DSMP_WORKERS")) {
        try {
            const long v = std::stol(env);
            if (v >= 1) return static_cast<unsigned>(v);
        } catch (const std::exception&) {
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

}  // namespace dsmp
