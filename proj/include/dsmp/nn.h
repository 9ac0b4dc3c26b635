#pragma once

#include <cstddef>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "dsmp/matrix.h"
#include "dsmp/tape.h"

namespace dsmp::nn {

enum class Mode { Training, Inference };

/// Elementwise hard-constraint map applied to a head's raw output.
struct OutputTransform {
    enum class Kind { Identity, SquareMinusKappa, ClampFloor, Square, AbsMinusKappa, Zero };

    static constexpr std::size_t kAllCols = std::numeric_limits<std::size_t>::max();

    Kind kind = Kind::Identity;
    double kappa = 0.0;
    /// Only the leading columns are transformed; the rest pass through unchanged.
    std::size_t constrained_cols = kAllCols;

    static OutputTransform identity() { return {}; }
    static OutputTransform of(Kind kind, double kappa = 0.0) { return {kind, kappa, kAllCols}; }

    diff::Value apply(diff::Value raw) const;
    Matrix apply(const Matrix& raw) const;
    double apply_scalar(double x) const;

    bool operator==(const OutputTransform&) const = default;
};

std::string to_string(OutputTransform::Kind kind);

struct BatchNorm {
    diff::ParamId gamma = 0;
    diff::ParamId beta = 0;
    Matrix running_mean;
    Matrix running_var;
    double epsilon = 1e-3;
    double momentum = 0.99;
};

struct Dense {
    diff::ParamId weights = 0;
    bool has_bias = false;
    diff::ParamId bias = 0;
};

struct HeadSpec {
    std::size_t in_dim = 1;
    std::vector<std::size_t> hidden{11, 11};
    std::size_t out_dim = 1;
    double bn_epsilon = 1e-3;
    double bn_momentum = 0.99;
    OutputTransform transform;
};

/// BN -> [Dense(no bias) -> BN -> ReLU]* -> Dense(bias) -> transform.
class FeedForwardHead {
public:
    static FeedForwardHead create(diff::ParameterStore& store, const std::string& prefix,
                                  const HeadSpec& spec, std::mt19937_64& rng);

    /// Training mode normalizes with batch statistics and folds them into the running averages.
    diff::Value forward(diff::Tape& tape, const diff::ParameterStore& store, diff::Value input, Mode mode);
    /// Network input is (state | previous output).
    diff::Value forward_semi_recurrent(diff::Tape& tape, const diff::ParameterStore& store,
                                       diff::Value state, diff::Value previous, Mode mode);
    /// Inference mode; never mutates the head.
    diff::Value infer(diff::Tape& tape, const diff::ParameterStore& store, diff::Value input) const;

    std::vector<diff::ParamId> parameters() const;
    const HeadSpec& spec() const noexcept { return spec_; }
    std::vector<BatchNorm>& norms() noexcept { return norms_; }
    const std::vector<BatchNorm>& norms() const noexcept { return norms_; }
    const std::vector<Dense>& dense() const noexcept { return dense_; }
    const std::string& prefix() const noexcept { return prefix_; }

private:
    diff::Value run(diff::Tape& tape, const diff::ParameterStore& store, diff::Value input,
                    std::vector<BatchNorm>* update) const;

    HeadSpec spec_;
    std::string prefix_;
    std::vector<BatchNorm> norms_;
    std::vector<Dense> dense_;
};

/// Time-zero head: a trainable row vector, identical for every path.
class ConstantHead {
public:
    static ConstantHead create(diff::ParameterStore& store, const std::string& name, std::size_t dim,
                               double low, double high, OutputTransform transform, std::mt19937_64& rng);

    diff::Value forward(diff::Tape& tape, const diff::ParameterStore& store, std::size_t batch) const;
    diff::ParamId parameter() const noexcept { return bias_; }
    const OutputTransform& transform() const noexcept { return transform_; }
    std::size_t dim() const noexcept { return dim_; }

private:
    diff::ParamId bias_ = 0;
    std::size_t dim_ = 0;
    OutputTransform transform_;
};

diff::Value batch_norm_training(diff::Tape& tape, const diff::ParameterStore& store, const BatchNorm& bn,
                                diff::Value x, Matrix* batch_mean, Matrix* batch_var);
diff::Value batch_norm_inference(diff::Tape& tape, const diff::ParameterStore& store, const BatchNorm& bn,
                                 diff::Value x);

/// Flat (name, shape, row-major values) list used for parameter snapshots.
struct NamedTensor {
    std::string name;
    Matrix value;
};

std::string snapshot_to_json(const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> snapshot_from_json(const std::string& text);

}  // namespace dsmp::nn
