#include "dsmp/nn.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace dsmp::nn {

using diff::Value;

namespace {

double transform_scalar(OutputTransform::Kind kind, double kappa, double x) {
    switch (kind) {
        case OutputTransform::Kind::Identity: return x;
        case OutputTransform::Kind::SquareMinusKappa: return x * x - kappa;
        case OutputTransform::Kind::ClampFloor: return std::max(-kappa, x);
        case OutputTransform::Kind::Square: return x * x;
        case OutputTransform::Kind::AbsMinusKappa: return std::abs(x) - kappa;
        case OutputTransform::Kind::Zero: return 0.0;
    }
    return x;
}

Value transform_value(OutputTransform::Kind kind, double kappa, Value x) {
    switch (kind) {
        case OutputTransform::Kind::Identity: return x;
        case OutputTransform::Kind::SquareMinusKappa: return diff::square(x) - kappa;
        case OutputTransform::Kind::ClampFloor: return diff::clamp_floor(x, -kappa);
        case OutputTransform::Kind::Square: return diff::square(x);
        case OutputTransform::Kind::AbsMinusKappa: return diff::abs(x) - kappa;
        case OutputTransform::Kind::Zero: return x.tape()->constant(x.rows(), x.cols(), 0.0);
    }
    return x;
}

Matrix glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix w(fan_in, fan_out);
    for (double& v : w.values()) v = dist(rng);
    return w;
}

BatchNorm make_batch_norm(diff::ParameterStore& store, const std::string& name, std::size_t width,
                          double epsilon, double momentum) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("batch norm epsilon must be positive");
    if (!(momentum > 0.0 && momentum < 1.0)) throw std::invalid_argument("batch norm momentum must lie in (0,1)");
    BatchNorm bn;
    bn.gamma = store.add(name + "/gamma", Matrix(1, width, 1.0));
    bn.beta = store.add(name + "/beta", Matrix(1, width, 0.0));
    bn.running_mean = Matrix(1, width, 0.0);
    bn.running_var = Matrix(1, width, 1.0);
    bn.epsilon = epsilon;
    bn.momentum = momentum;
    return bn;
}

}  // namespace

// ---------------------------------------------------------------------------------------------

std::string to_string(OutputTransform::Kind kind) {
    switch (kind) {
        case OutputTransform::Kind::Identity: return "identity";
        case OutputTransform::Kind::SquareMinusKappa: return "square_minus_kappa";
        case OutputTransform::Kind::ClampFloor: return "clamp_floor";
        case OutputTransform::Kind::Square: return "square";
        case OutputTransform::Kind::AbsMinusKappa: return "abs_minus_kappa";
        case OutputTransform::Kind::Zero: return "zero";
    }
    return "unknown";
}

double OutputTransform::apply_scalar(double x) const { return transform_scalar(kind, kappa, x); }

Matrix OutputTransform::apply(const Matrix& raw) const {
    Matrix out = raw;
    const std::size_t active = std::min(constrained_cols, raw.cols());
    for (std::size_t r = 0; r < raw.rows(); ++r)
        for (std::size_t c = 0; c < active; ++c) out(r, c) = transform_scalar(kind, kappa, raw(r, c));
    return out;
}

Value OutputTransform::apply(Value raw) const {
    if (kind == Kind::Identity) return raw;
    const std::size_t cols = raw.cols();
    const std::size_t active = std::min(constrained_cols, cols);
    if (active == cols) return transform_value(kind, kappa, raw);
    if (active == 0) return raw;
    Value head = transform_value(kind, kappa, diff::slice_cols(raw, 0, active));
    return diff::concat_cols(head, diff::slice_cols(raw, active, cols - active));
}

// ---------------------------------------------------------------------------------------------

Value batch_norm_training(diff::Tape& tape, const diff::ParameterStore& store, const BatchNorm& bn, Value x,
                          Matrix* batch_mean, Matrix* batch_var) {
    if (x.rows() == 0) throw std::invalid_argument("batch norm on an empty batch");
    Value mean = diff::mean_rows(x);
    Value centered = x - mean;
    Value var = diff::mean_rows(diff::square(centered));
    if (batch_mean) *batch_mean = mean.value();
    if (batch_var) *batch_var = var.value();
    Value normalized = centered / diff::sqrt(var + bn.epsilon);
    return normalized * tape.parameter(store, bn.gamma) + tape.parameter(store, bn.beta);
}

Value batch_norm_inference(diff::Tape& tape, const diff::ParameterStore& store, const BatchNorm& bn, Value x) {
    Matrix scale(1, bn.running_var.cols());
    for (std::size_t c = 0; c < scale.cols(); ++c) scale(0, c) = 1.0 / std::sqrt(bn.running_var(0, c) + bn.epsilon);
    Value normalized = (x - tape.constant(bn.running_mean)) * tape.constant(std::move(scale));
    return normalized * tape.parameter(store, bn.gamma) + tape.parameter(store, bn.beta);
}

// ---------------------------------------------------------------------------------------------

FeedForwardHead FeedForwardHead::create(diff::ParameterStore& store, const std::string& prefix,
                                        const HeadSpec& spec, std::mt19937_64& rng) {
    if (spec.in_dim == 0 || spec.out_dim == 0) throw std::invalid_argument("head dimensions must be positive");
    FeedForwardHead head;
    head.spec_ = spec;
    head.prefix_ = prefix;

    std::size_t width = spec.in_dim;
    head.norms_.push_back(make_batch_norm(store, prefix + "/bn0", width, spec.bn_epsilon, spec.bn_momentum));
    for (std::size_t k = 0; k < spec.hidden.size(); ++k) {
        const std::size_t next = spec.hidden[k];
        if (next == 0) throw std::invalid_argument("hidden layer width must be positive");
        Dense d;
        d.weights = store.add(prefix + "/dense" + std::to_string(k) + "/kernel", glorot_uniform(width, next, rng));
        head.dense_.push_back(d);
        head.norms_.push_back(
            make_batch_norm(store, prefix + "/bn" + std::to_string(k + 1), next, spec.bn_epsilon, spec.bn_momentum));
        width = next;
    }
    Dense out;
    const std::string name = prefix + "/dense" + std::to_string(spec.hidden.size());
    out.weights = store.add(name + "/kernel", glorot_uniform(width, spec.out_dim, rng));
    out.has_bias = true;
    out.bias = store.add(name + "/bias", Matrix(1, spec.out_dim, 0.0));
    head.dense_.push_back(out);
    return head;
}

Value FeedForwardHead::run(diff::Tape& tape, const diff::ParameterStore& store, Value input,
                           std::vector<BatchNorm>* update) const {
    if (input.cols() != spec_.in_dim) {
        throw std::invalid_argument("head " + prefix_ + ": expected " + std::to_string(spec_.in_dim) +
                                    " input columns, got " + std::to_string(input.cols()));
    }
    if (input.rows() == 0) throw std::invalid_argument("head " + prefix_ + ": empty batch");

    auto normalize = [&](std::size_t k, Value x) {
        const BatchNorm& bn = norms_[k];
        if (!update) return batch_norm_inference(tape, store, bn, x);
        Matrix mean, var;
        Value y = batch_norm_training(tape, store, bn, x, &mean, &var);
        BatchNorm& target = (*update)[k];
        for (std::size_t c = 0; c < mean.cols(); ++c) {
            target.running_mean(0, c) = bn.momentum * target.running_mean(0, c) + (1.0 - bn.momentum) * mean(0, c);
            target.running_var(0, c) = bn.momentum * target.running_var(0, c) + (1.0 - bn.momentum) * var(0, c);
        }
        return y;
    };

    Value x = normalize(0, input);
    for (std::size_t k = 0; k + 1 < dense_.size(); ++k) {
        x = diff::matmul(x, tape.parameter(store, dense_[k].weights));
        x = diff::relu(normalize(k + 1, x));
    }
    const Dense& last = dense_.back();
    x = diff::matmul(x, tape.parameter(store, last.weights));
    if (last.has_bias) x = x + tape.parameter(store, last.bias);
    return spec_.transform.apply(x);
}

Value FeedForwardHead::forward(diff::Tape& tape, const diff::ParameterStore& store, Value input, Mode mode) {
    return run(tape, store, input, mode == Mode::Training ? &norms_ : nullptr);
}

Value FeedForwardHead::forward_semi_recurrent(diff::Tape& tape, const diff::ParameterStore& store, Value state,
                                              Value previous, Mode mode) {
    if (state.cols() + previous.cols() != spec_.in_dim) {
        throw std::invalid_argument("head " + prefix_ + ": state and previous output do not match input width");
    }
    return forward(tape, store, diff::concat_cols(state, previous), mode);
}

Value FeedForwardHead::infer(diff::Tape& tape, const diff::ParameterStore& store, Value input) const {
    return run(tape, store, input, nullptr);
}

std::vector<diff::ParamId> FeedForwardHead::parameters() const {
    std::vector<diff::ParamId> ids;
    for (const BatchNorm& bn : norms_) {
        ids.push_back(bn.gamma);
        ids.push_back(bn.beta);
    }
    for (const Dense& d : dense_) {
        ids.push_back(d.weights);
        if (d.has_bias) ids.push_back(d.bias);
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

// ---------------------------------------------------------------------------------------------

ConstantHead ConstantHead::create(diff::ParameterStore& store, const std::string& name, std::size_t dim,
                                  double low, double high, OutputTransform transform, std::mt19937_64& rng) {
    if (dim == 0) throw std::invalid_argument("constant head dimension must be positive");
    if (!(low <= high)) throw std::invalid_argument("constant head init range is empty");
    Matrix init(1, dim);
    if (low == high) {
        for (double& v : init.values()) v = low;
    } else {
        std::uniform_real_distribution<double> dist(low, high);
        for (double& v : init.values()) v = dist(rng);
    }
    ConstantHead head;
    head.bias_ = store.add(name, std::move(init));
    head.dim_ = dim;
    head.transform_ = transform;
    return head;
}

Value ConstantHead::forward(diff::Tape& tape, const diff::ParameterStore& store, std::size_t batch) const {
    return diff::broadcast_rows(transform_.apply(tape.parameter(store, bias_)), batch);
}

// ---------------------------------------------------------------------------------------------

std::string snapshot_to_json(const std::vector<NamedTensor>& tensors) {
    nlohmann::json doc = nlohmann::json::array();
    for (const NamedTensor& t : tensors) {
        doc.push_back({{"name", t.name},
                       {"shape", {t.value.rows(), t.value.cols()}},
                       {"values", t.value.values()}});
    }
    return doc.dump(1);
}

std::vector<NamedTensor> snapshot_from_json(const std::string& text) {
    const nlohmann::json doc = nlohmann::json::parse(text);
    if (!doc.is_array()) throw std::invalid_argument("snapshot: expected a JSON array");
    std::vector<NamedTensor> out;
    for (const auto& item : doc) {
        const auto shape = item.at("shape").get<std::vector<std::size_t>>();
        if (shape.size() != 2) throw std::invalid_argument("snapshot: shape must have two entries");
        out.push_back({item.at("name").get<std::string>(),
                       Matrix(shape[0], shape[1], item.at("values").get<std::vector<double>>())});
    }
    return out;
}

}  // namespace dsmp::nn
