#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "dsmp/constraints.h"
#include "dsmp/market.h"
#include "dsmp/optim.h"
#include "dsmp/utility.h"

namespace dsmp {

struct Problem {
    std::shared_ptr<const MarketModel> market;
    Utility utility = Utility::log();
    /// Constraint on the full control vector (dimension = market noise dimension).
    ConstraintSet constraints = ConstraintSet::full_space(1);
    double x0 = 1.0;
    double T = 0.5;
    std::size_t N = 10;

    double dt() const { return T / static_cast<double>(N); }
    std::size_t traded() const { return market->traded(); }
    std::size_t dim() const { return market->noise_dim(); }
    void validate() const;
};

struct Range {
    double low = 0.0;
    double high = 0.0;
    bool operator==(const Range&) const = default;
};

struct Architecture {
    std::vector<std::size_t> hidden{11, 11};
    double bn_epsilon = 1.0;
    double bn_momentum = 0.99;
    bool control_recurrent = false;
    bool integrand_recurrent = false;
    /// Feed the market's extra features (e.g. sqrt(nu)) into the integrand networks.
    bool integrand_extra_inputs = false;
    bool operator==(const Architecture&) const = default;
};

struct TrainingSettings {
    std::int64_t steps = 10000;
    std::size_t batch = 64;
    std::size_t mc_size = 100000;
    std::size_t eval_every = 200;
    /// 0 samples a fresh batch every step; otherwise the steps/epochs batches are cycled.
    std::size_t epochs = 0;
    std::uint64_t seed = 1;
    std::size_t mc_shard = 4096;
    unsigned workers = 1;
    /// Abort once this many optimizer updates were skipped for non-finite values.
    std::int64_t nan_limit = 100;
    optim::AdamOptions adam;
    bool operator==(const TrainingSettings&) const = default;
};

struct Estimate {
    double mean = 0.0;
    double std_error = 0.0;
};

class MeanAccumulator {
public:
    void add(double x) {
        sum_ += x;
        sum_sq_ += x * x;
        ++n_;
    }
    void merge(const MeanAccumulator& o) {
        sum_ += o.sum_;
        sum_sq_ += o.sum_sq_;
        n_ += o.n_;
    }
    std::size_t count() const noexcept { return n_; }
    Estimate estimate() const;

private:
    double sum_ = 0.0;
    double sum_sq_ = 0.0;
    std::size_t n_ = 0;
};

struct StepRecord {
    std::int64_t step = 0;
    double seconds = 0.0;
    double value = 0.0;  // p0 (primal) or y (dual)
};

struct BoundsRecord {
    std::int64_t step = 0;
    Estimate lower;
    Estimate upper;
    double value = 0.0;  // p0 (primal) or y (dual)
};

struct TrainingHistory {
    std::vector<StepRecord> steps;
    std::vector<BoundsRecord> bounds;
    std::int64_t skipped_updates = 0;
};

/// Raised when too many updates were skipped for non-finite losses or gradients.
class NonFiniteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Seed stream tags.
inline constexpr std::uint64_t kInitStream = 0x1a17;
inline constexpr std::uint64_t kTrainStream = 0x7a11;
inline constexpr std::uint64_t kEvalStream = 0xe7a1;

/// Seed of the training batch used at step k (epoch mode cycles through steps/epochs batches).
std::uint64_t training_batch_index(const TrainingSettings& s, std::int64_t k);

/// Splits `total` paths into shards of at most `shard` paths, runs fn(shard_index, count) on up to
/// `workers` threads and returns the results in shard order.
template <typename Result>
std::vector<Result> run_shards(std::size_t total, std::size_t shard, unsigned workers,
                               const std::function<Result(std::size_t, std::size_t)>& fn);

/// Worker count from the DSMP_WORKERS environment variable, else the hardware concurrency.
unsigned default_workers();

}  // namespace dsmp

#include "dsmp/detail/shards.h"
