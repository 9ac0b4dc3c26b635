#pragma once

// Reverse-mode differentiation over batched dense matrices.
//
// Forward values are computed eagerly as operations are recorded. Nodes are appended in
// creation order, so parents always precede children and backward() is a single reverse sweep.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dsmp/matrix.h"

namespace dsmp::diff {

using NodeId = std::uint32_t;
using ParamId = std::size_t;

/// Persistent trainable values. Tapes read from the store; optimizers write to it between steps.
class ParameterStore {
public:
    ParamId add(std::string name, Matrix init);

    const Matrix& value(ParamId id) const { return values_.at(id); }
    Matrix& mutable_value(ParamId id) { return values_.at(id); }
    const std::string& name(ParamId id) const { return names_.at(id); }
    std::size_t size() const noexcept { return values_.size(); }
    std::optional<ParamId> find(std::string_view name) const;

private:
    std::vector<Matrix> values_;
    std::vector<std::string> names_;
};

using Gradients = std::map<ParamId, Matrix>;

enum class Op : std::uint8_t {
    Constant,
    Parameter,
    Add,
    Sub,
    Mul,
    Div,
    MatMul,
    Transpose,
    BroadcastRows,
    Relu,
    Square,
    Sqrt,
    Exp,
    GuardedLog,
    GuardedPow,
    Sin,
    SumCols,
    MeanRows,
    Where,
    Scale,
    AddScalar,
    ConcatCols,
    SliceCols,
    Custom,
};

class Tape;

/// Handle to a node recorded on a Tape.
class Value {
public:
    Value() = default;

    Tape* tape() const noexcept { return tape_; }
    NodeId id() const noexcept { return id_; }
    bool valid() const noexcept { return tape_ != nullptr; }

    const Matrix& value() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
    bool requires_grad() const;

private:
    friend class Tape;
    Value(Tape* tape, NodeId id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    NodeId id_ = 0;
};

/// Adjoint of a custom unary node: (input value, output value, output adjoint) -> input adjoint.
using CustomAdjoint = std::function<Matrix(const Matrix&, const Matrix&, const Matrix&)>;

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Parameters read through parameter() receive gradients only when watched.
    void watch(const ParameterStore& store, ParamId id);
    void watch(const ParameterStore& store, std::span<const ParamId> ids);

    Value constant(Matrix value);
    Value constant(std::size_t rows, std::size_t cols, std::vector<double> values);
    Value constant(std::size_t rows, std::size_t cols, double fill);
    Value parameter(const ParameterStore& store, ParamId id);

    /// Records a unary node with a caller-supplied forward value and adjoint rule.
    Value custom_unary(Value input, Matrix output, CustomAdjoint adjoint);

    /// Exact adjoints of a (1,1) loss for every watched parameter. Unreachable ones map to zero.
    Gradients backward(Value loss) const;

    std::size_t node_count() const noexcept { return nodes_.size(); }
    const Matrix& value_of(NodeId id) const { return nodes_[id].value; }
    bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }

    Value record(Op op, Matrix value, std::initializer_list<Value> parents, double scalar = 0.0,
                 Matrix aux = {});

private:
    static constexpr NodeId kNone = UINT32_MAX;

    struct Node {
        Op op = Op::Constant;
        Matrix value;
        NodeId a = kNone;
        NodeId b = kNone;
        double scalar = 0.0;
        Matrix aux;
        ParamId param = 0;
        bool requires_grad = false;
        std::size_t custom = 0;
    };

    Value push(Node node);

    std::deque<Node> nodes_;
    std::vector<CustomAdjoint> custom_adjoints_;
    std::map<ParamId, std::pair<std::size_t, std::size_t>> watched_;
};

// Elementwise arithmetic. Shapes must agree, or one side has extent 1 along a mismatched axis
// (row broadcast (1,c) against (b,c), column broadcast (b,1) against (b,c), or (1,1)).
Value operator+(Value a, Value b);
Value operator-(Value a, Value b);
Value operator*(Value a, Value b);
Value operator/(Value a, Value b);
Value operator+(Value a, double s);
Value operator+(double s, Value a);
Value operator-(Value a, double s);
Value operator-(double s, Value a);
Value operator*(Value a, double s);
Value operator*(double s, Value a);
Value operator/(Value a, double s);
Value operator-(Value a);

Value matmul(Value a, Value b);
Value transpose(Value a);
Value broadcast_rows(Value a, std::size_t rows);
Value relu(Value a);
Value square(Value a);
Value sqrt(Value a);
Value exp(Value a);
/// log(x) for x > 0, exactly 0 (with zero derivative) otherwise.
Value guarded_log(Value a);
/// x^p for x > 0, exactly 0 (with zero derivative) otherwise.
Value guarded_pow(Value a, double p);
Value sin(Value a);
/// (b,c) -> (b,1)
Value sum_cols(Value a);
/// (b,c) -> (1,c)
Value mean_rows(Value a);
/// mask(i,j) != 0 selects a, otherwise b. a and b share the mask's shape.
Value where(const Matrix& mask, Value a, Value b);
Value concat_cols(Value a, Value b);
Value slice_cols(Value a, std::size_t begin, std::size_t count);

/// max(floor, x) with derivative 1 where x >= floor.
Value clamp_floor(Value a, double floor);
Value abs(Value a);

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::vector<std::pair<std::string, double>> per_parameter;
};

using ScalarFunction = std::function<Value(Tape&, const ParameterStore&)>;

/// Compares backward() against central differences with step h over every entry of `params`.
/// Relative error per entry is |ad - fd| / max(1, |fd|). Throws on non-finite evaluations.
GradCheckReport grad_check(const ScalarFunction& f, ParameterStore& store,
                           std::span<const ParamId> params, double h);

}  // namespace dsmp::diff
