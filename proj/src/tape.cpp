#include "dsmp/tape.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dsmp::diff {

// ---------------------------------------------------------------------------------------------
// ParameterStore

ParamId ParameterStore::add(std::string name, Matrix init) {
    if (init.empty()) throw std::invalid_argument("parameter '" + name + "' has zero-sized shape");
    if (!init.all_finite()) throw std::invalid_argument("parameter '" + name + "' has non-finite init");
    values_.push_back(std::move(init));
    names_.push_back(std::move(name));
    return values_.size() - 1;
}

std::optional<ParamId> ParameterStore::find(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return i;
    return std::nullopt;
}

// ---------------------------------------------------------------------------------------------
// Broadcasting helpers

namespace {

struct Broadcast {
    std::size_t rows, cols;
    std::size_t a_rs, a_cs, b_rs, b_cs;
};

std::size_t broadcast_extent(std::size_t x, std::size_t y, const Matrix& a, const Matrix& b) {
    if (x == y) return x;
    if (x == 1) return y;
    if (y == 1) return x;
    throw std::invalid_argument("shape mismatch " + a.shape_string() + " vs " + b.shape_string());
}

Broadcast plan(const Matrix& a, const Matrix& b) {
    Broadcast p{};
    p.rows = broadcast_extent(a.rows(), b.rows(), a, b);
    p.cols = broadcast_extent(a.cols(), b.cols(), a, b);
    p.a_rs = a.rows() == 1 ? 0 : a.cols();
    p.a_cs = a.cols() == 1 ? 0 : 1;
    p.b_rs = b.rows() == 1 ? 0 : b.cols();
    p.b_cs = b.cols() == 1 ? 0 : 1;
    return p;
}

template <typename F>
Matrix binary(const Matrix& a, const Matrix& b, F f) {
    const Broadcast p = plan(a, b);
    Matrix out(p.rows, p.cols);
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (std::size_t r = 0; r < p.rows; ++r) {
        const double* ra = pa + r * p.a_rs;
        const double* rb = pb + r * p.b_rs;
        double* ro = po + r * p.cols;
        for (std::size_t c = 0; c < p.cols; ++c) ro[c] = f(ra[c * p.a_cs], rb[c * p.b_cs]);
    }
    return out;
}

template <typename F>
Matrix unary(const Matrix& a, F f) {
    Matrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = f(a.data()[i]);
    return out;
}

/// Sums g over the axes along which a (rows, cols) operand was broadcast.
Matrix reduce_to(const Matrix& g, std::size_t rows, std::size_t cols) {
    if (g.rows() == rows && g.cols() == cols) return g;
    Matrix out(rows, cols);
    for (std::size_t r = 0; r < g.rows(); ++r) {
        const std::size_t rr = rows == 1 ? 0 : r;
        for (std::size_t c = 0; c < g.cols(); ++c) out(rr, cols == 1 ? 0 : c) += g(r, c);
    }
    return out;
}

void accumulate(Matrix& target, const Matrix& contribution) {
    if (target.empty()) {
        target = contribution;
        return;
    }
    for (std::size_t i = 0; i < target.size(); ++i) target.data()[i] += contribution.data()[i];
}

// a * b^T
Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ar = a.data() + i * a.cols();
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* br = b.data() + j * b.cols();
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += ar[k] * br[k];
            out(i, j) = s;
        }
    }
    return out;
}

// a^T * b
Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    Matrix out(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const double* ar = a.data() + k * a.cols();
        const double* br = b.data() + k * b.cols();
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = ar[i];
            if (aki == 0.0) continue;
            double* orow = out.data() + i * b.cols();
            for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aki * br[j];
        }
    }
    return out;
}

Tape& tape_of(Value a) {
    if (!a.valid()) throw std::invalid_argument("operation on an empty Value");
    return *a.tape();
}

Tape& tape_of(Value a, Value b) {
    Tape& t = tape_of(a);
    if (b.tape() != &t) throw std::invalid_argument("operands recorded on different tapes");
    return t;
}

}  // namespace

// ---------------------------------------------------------------------------------------------
// Value / Tape

const Matrix& Value::value() const { return tape_->value_of(id_); }
bool Value::requires_grad() const { return tape_->requires_grad(id_); }

void Tape::watch(const ParameterStore& store, ParamId id) {
    const Matrix& v = store.value(id);
    watched_[id] = {v.rows(), v.cols()};
}

void Tape::watch(const ParameterStore& store, std::span<const ParamId> ids) {
    for (ParamId id : ids) watch(store, id);
}

Value Tape::push(Node node) {
    if (nodes_.size() >= kNone) throw std::length_error("tape node limit reached");
    nodes_.push_back(std::move(node));
    return Value(this, static_cast<NodeId>(nodes_.size() - 1));
}

Value Tape::constant(Matrix value) {
    Node n;
    n.op = Op::Constant;
    n.value = std::move(value);
    return push(std::move(n));
}

Value Tape::constant(std::size_t rows, std::size_t cols, std::vector<double> values) {
    return constant(Matrix(rows, cols, std::move(values)));
}

Value Tape::constant(std::size_t rows, std::size_t cols, double fill) {
    return constant(Matrix(rows, cols, fill));
}

Value Tape::parameter(const ParameterStore& store, ParamId id) {
    Node n;
    n.op = Op::Parameter;
    n.value = store.value(id);
    n.param = id;
    n.requires_grad = watched_.contains(id);
    return push(std::move(n));
}

Value Tape::custom_unary(Value input, Matrix output, CustomAdjoint adjoint) {
    tape_of(input);
    Node n;
    n.op = Op::Custom;
    n.value = std::move(output);
    n.a = input.id();
    n.requires_grad = nodes_[input.id()].requires_grad;
    n.custom = custom_adjoints_.size();
    custom_adjoints_.push_back(std::move(adjoint));
    return push(std::move(n));
}

Value Tape::record(Op op, Matrix value, std::initializer_list<Value> parents, double scalar,
                   Matrix aux) {
    Node n;
    n.op = op;
    n.value = std::move(value);
    n.scalar = scalar;
    n.aux = std::move(aux);
    auto it = parents.begin();
    if (it != parents.end()) {
        n.a = it->id();
        n.requires_grad = nodes_[n.a].requires_grad;
        ++it;
    }
    if (it != parents.end()) {
        n.b = it->id();
        n.requires_grad = n.requires_grad || nodes_[n.b].requires_grad;
    }
    return push(std::move(n));
}

Gradients Tape::backward(Value loss) const {
    if (loss.tape() != this) throw std::invalid_argument("backward: loss recorded on another tape");
    const Node& root = nodes_[loss.id()];
    if (root.value.rows() != 1 || root.value.cols() != 1) {
        throw std::invalid_argument("backward: loss must have shape (1,1), got " +
                                    root.value.shape_string());
    }

    Gradients grads;
    for (const auto& [id, shape] : watched_) grads.emplace(id, Matrix(shape.first, shape.second));
    if (!root.requires_grad) return grads;

    std::vector<Matrix> adj(loss.id() + 1);
    adj[loss.id()] = Matrix(1, 1, 1.0);

    auto send = [&](NodeId parent, const Matrix& g) {
        if (parent == kNone || !nodes_[parent].requires_grad) return;
        const Matrix& pv = nodes_[parent].value;
        if (g.same_shape(pv)) accumulate(adj[parent], g);
        else accumulate(adj[parent], reduce_to(g, pv.rows(), pv.cols()));
    };
    auto wants = [&](NodeId parent) { return parent != kNone && nodes_[parent].requires_grad; };

    for (std::size_t idx = loss.id() + 1; idx-- > 0;) {
        if (adj[idx].empty()) continue;
        const Node& n = nodes_[idx];
        const Matrix& g = adj[idx];
        switch (n.op) {
            case Op::Constant:
                break;
            case Op::Parameter:
                accumulate(grads[n.param], g);
                break;
            case Op::Add:
                send(n.a, g);
                send(n.b, g);
                break;
            case Op::Sub:
                send(n.a, g);
                if (wants(n.b)) send(n.b, unary(g, [](double x) { return -x; }));
                break;
            case Op::Mul: {
                const Matrix& av = nodes_[n.a].value;
                const Matrix& bv = nodes_[n.b].value;
                if (wants(n.a)) send(n.a, binary(g, bv, [](double x, double y) { return x * y; }));
                if (wants(n.b)) send(n.b, binary(g, av, [](double x, double y) { return x * y; }));
                break;
            }
            case Op::Div: {
                const Matrix& bv = nodes_[n.b].value;
                if (wants(n.a)) send(n.a, binary(g, bv, [](double x, double y) { return x / y; }));
                if (wants(n.b)) {
                    Matrix t = binary(g, n.value, [](double x, double y) { return -x * y; });
                    send(n.b, binary(t, bv, [](double x, double y) { return x / y; }));
                }
                break;
            }
            case Op::MatMul:
                if (wants(n.a)) send(n.a, matmul_nt(g, nodes_[n.b].value));
                if (wants(n.b)) send(n.b, matmul_tn(nodes_[n.a].value, g));
                break;
            case Op::Transpose:
                send(n.a, transpose(g));
                break;
            case Op::BroadcastRows:
                send(n.a, reduce_to(g, 1, g.cols()));
                break;
            case Op::Relu: {
                Matrix d = binary(g, n.value, [](double x, double y) { return y > 0.0 ? x : 0.0; });
                send(n.a, d);
                break;
            }
            case Op::Square:
                send(n.a, binary(g, nodes_[n.a].value, [](double x, double y) { return 2.0 * x * y; }));
                break;
            case Op::Sqrt:
                send(n.a, binary(g, n.value, [](double x, double y) { return 0.5 * x / y; }));
                break;
            case Op::Exp:
                send(n.a, binary(g, n.value, [](double x, double y) { return x * y; }));
                break;
            case Op::GuardedLog:
                send(n.a, binary(g, nodes_[n.a].value,
                                 [](double x, double y) { return y > 0.0 ? x / y : 0.0; }));
                break;
            case Op::GuardedPow: {
                const double p = n.scalar;
                const Matrix& in = nodes_[n.a].value;
                Matrix d(g.rows(), g.cols());
                for (std::size_t i = 0; i < d.size(); ++i) {
                    const double x = in.data()[i];
                    d.data()[i] = x > 0.0 ? g.data()[i] * p * std::pow(x, p - 1.0) : 0.0;
                }
                send(n.a, d);
                break;
            }
            case Op::Sin:
                send(n.a, binary(g, nodes_[n.a].value,
                                 [](double x, double y) { return x * std::cos(y); }));
                break;
            case Op::SumCols: {
                const Matrix& in = nodes_[n.a].value;
                Matrix d(in.rows(), in.cols());
                for (std::size_t r = 0; r < in.rows(); ++r)
                    for (std::size_t c = 0; c < in.cols(); ++c) d(r, c) = g(r, 0);
                send(n.a, d);
                break;
            }
            case Op::MeanRows: {
                const Matrix& in = nodes_[n.a].value;
                const double inv = 1.0 / static_cast<double>(in.rows());
                Matrix d(in.rows(), in.cols());
                for (std::size_t r = 0; r < in.rows(); ++r)
                    for (std::size_t c = 0; c < in.cols(); ++c) d(r, c) = g(0, c) * inv;
                send(n.a, d);
                break;
            }
            case Op::Where:
                if (wants(n.a))
                    send(n.a, binary(g, n.aux, [](double x, double m) { return m != 0.0 ? x : 0.0; }));
                if (wants(n.b))
                    send(n.b, binary(g, n.aux, [](double x, double m) { return m != 0.0 ? 0.0 : x; }));
                break;
            case Op::Scale: {
                const double s = n.scalar;
                send(n.a, unary(g, [s](double x) { return s * x; }));
                break;
            }
            case Op::AddScalar:
                send(n.a, g);
                break;
            case Op::ConcatCols: {
                const Matrix& av = nodes_[n.a].value;
                const Matrix& bv = nodes_[n.b].value;
                if (wants(n.a)) {
                    Matrix d(av.rows(), av.cols());
                    for (std::size_t r = 0; r < av.rows(); ++r)
                        for (std::size_t c = 0; c < av.cols(); ++c) d(r, c) = g(r, c);
                    send(n.a, d);
                }
                if (wants(n.b)) {
                    Matrix d(bv.rows(), bv.cols());
                    for (std::size_t r = 0; r < bv.rows(); ++r)
                        for (std::size_t c = 0; c < bv.cols(); ++c) d(r, c) = g(r, av.cols() + c);
                    send(n.b, d);
                }
                break;
            }
            case Op::SliceCols: {
                const Matrix& in = nodes_[n.a].value;
                const auto begin = static_cast<std::size_t>(n.scalar);
                Matrix d(in.rows(), in.cols());
                for (std::size_t r = 0; r < in.rows(); ++r)
                    for (std::size_t c = 0; c < g.cols(); ++c) d(r, begin + c) = g(r, c);
                send(n.a, d);
                break;
            }
            case Op::Custom:
                send(n.a, custom_adjoints_[n.custom](nodes_[n.a].value, n.value, g));
                break;
        }
    }
    return grads;
}

// ---------------------------------------------------------------------------------------------
// Primitives

Value operator+(Value a, Value b) {
    Tape& t = tape_of(a, b);
    return t.record(Op::Add, binary(a.value(), b.value(), [](double x, double y) { return x + y; }),
                    {a, b});
}

Value operator-(Value a, Value b) {
    Tape& t = tape_of(a, b);
    return t.record(Op::Sub, binary(a.value(), b.value(), [](double x, double y) { return x - y; }),
                    {a, b});
}

Value operator*(Value a, Value b) {
    Tape& t = tape_of(a, b);
    return t.record(Op::Mul, binary(a.value(), b.value(), [](double x, double y) { return x * y; }),
                    {a, b});
}

Value operator/(Value a, Value b) {
    Tape& t = tape_of(a, b);
    return t.record(Op::Div, binary(a.value(), b.value(), [](double x, double y) { return x / y; }),
                    {a, b});
}

Value operator*(Value a, double s) {
    Tape& t = tape_of(a);
    return t.record(Op::Scale, unary(a.value(), [s](double x) { return s * x; }), {a}, s);
}
Value operator*(double s, Value a) { return a * s; }
Value operator/(Value a, double s) { return a * (1.0 / s); }
Value operator-(Value a) { return a * -1.0; }

Value operator+(Value a, double s) {
    Tape& t = tape_of(a);
    return t.record(Op::AddScalar, unary(a.value(), [s](double x) { return x + s; }), {a}, s);
}
Value operator+(double s, Value a) { return a + s; }
Value operator-(Value a, double s) { return a + (-s); }
Value operator-(double s, Value a) { return (-a) + s; }

Value matmul(Value a, Value b) {
    Tape& t = tape_of(a, b);
    return t.record(Op::MatMul, dsmp::matmul(a.value(), b.value()), {a, b});
}

Value transpose(Value a) {
    Tape& t = tape_of(a);
    return t.record(Op::Transpose, dsmp::transpose(a.value()), {a});
}

Value broadcast_rows(Value a, std::size_t rows) {
    Tape& t = tape_of(a);
    const Matrix& v = a.value();
    if (v.rows() != 1) throw std::invalid_argument("broadcast_rows: expected one row, got " + v.shape_string());
    if (rows == 0) throw std::invalid_argument("broadcast_rows: zero rows");
    Matrix out(rows, v.cols());
    for (std::size_t r = 0; r < rows; ++r) std::copy(v.data(), v.data() + v.cols(), out.data() + r * v.cols());
    return t.record(Op::BroadcastRows, std::move(out), {a});
}

Value relu(Value a) {
    return tape_of(a).record(Op::Relu, unary(a.value(), [](double x) { return x > 0.0 ? x : 0.0; }), {a});
}

Value square(Value a) {
    return tape_of(a).record(Op::Square, unary(a.value(), [](double x) { return x * x; }), {a});
}

Value sqrt(Value a) {
    return tape_of(a).record(Op::Sqrt, unary(a.value(), [](double x) { return std::sqrt(x); }), {a});
}

Value exp(Value a) {
    return tape_of(a).record(Op::Exp, unary(a.value(), [](double x) { return std::exp(x); }), {a});
}

Value guarded_log(Value a) {
    return tape_of(a).record(Op::GuardedLog,
                             unary(a.value(), [](double x) { return x > 0.0 ? std::log(x) : 0.0; }), {a});
}

Value guarded_pow(Value a, double p) {
    return tape_of(a).record(
        Op::GuardedPow, unary(a.value(), [p](double x) { return x > 0.0 ? std::pow(x, p) : 0.0; }), {a}, p);
}

Value sin(Value a) {
    return tape_of(a).record(Op::Sin, unary(a.value(), [](double x) { return std::sin(x); }), {a});
}

Value sum_cols(Value a) {
    const Matrix& v = a.value();
    Matrix out(v.rows(), 1);
    for (std::size_t r = 0; r < v.rows(); ++r) {
        double s = 0.0;
        for (double x : v.row(r)) s += x;
        out(r, 0) = s;
    }
    return tape_of(a).record(Op::SumCols, std::move(out), {a});
}

Value mean_rows(Value a) {
    const Matrix& v = a.value();
    if (v.rows() == 0) throw std::invalid_argument("mean_rows: empty batch");
    Matrix out(1, v.cols());
    for (std::size_t r = 0; r < v.rows(); ++r)
        for (std::size_t c = 0; c < v.cols(); ++c) out(0, c) += v(r, c);
    const double inv = 1.0 / static_cast<double>(v.rows());
    for (double& x : out.values()) x *= inv;
    return tape_of(a).record(Op::MeanRows, std::move(out), {a});
}

Value where(const Matrix& mask, Value a, Value b) {
    Tape& t = tape_of(a, b);
    if (!mask.same_shape(a.value()) || !mask.same_shape(b.value()))
        throw std::invalid_argument("where: mask and operands must share a shape");
    Matrix out(mask.rows(), mask.cols());
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data()[i] = mask.data()[i] != 0.0 ? a.value().data()[i] : b.value().data()[i];
    return t.record(Op::Where, std::move(out), {a, b}, 0.0, mask);
}

Value concat_cols(Value a, Value b) {
    Tape& t = tape_of(a, b);
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    if (av.rows() != bv.rows())
        throw std::invalid_argument("concat_cols: row mismatch " + av.shape_string() + " vs " + bv.shape_string());
    Matrix out(av.rows(), av.cols() + bv.cols());
    for (std::size_t r = 0; r < av.rows(); ++r) {
        std::copy(av.row(r).begin(), av.row(r).end(), out.row(r).begin());
        std::copy(bv.row(r).begin(), bv.row(r).end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(av.cols()));
    }
    return t.record(Op::ConcatCols, std::move(out), {a, b});
}

Value slice_cols(Value a, std::size_t begin, std::size_t count) {
    const Matrix& v = a.value();
    if (count == 0 || begin + count > v.cols()) throw std::invalid_argument("slice_cols: out of range");
    Matrix out(v.rows(), count);
    for (std::size_t r = 0; r < v.rows(); ++r)
        for (std::size_t c = 0; c < count; ++c) out(r, c) = v(r, begin + c);
    return tape_of(a).record(Op::SliceCols, std::move(out), {a}, static_cast<double>(begin));
}

Value clamp_floor(Value a, double floor) {
    const Matrix& v = a.value();
    Matrix mask(v.rows(), v.cols());
    for (std::size_t i = 0; i < v.size(); ++i) mask.data()[i] = v.data()[i] >= floor ? 1.0 : 0.0;
    Tape& t = tape_of(a);
    Value lower = t.constant(v.rows(), v.cols(), floor);
    return where(mask, a, lower);
}

Value abs(Value a) {
    const Matrix& v = a.value();
    Matrix mask(v.rows(), v.cols());
    for (std::size_t i = 0; i < v.size(); ++i) mask.data()[i] = v.data()[i] >= 0.0 ? 1.0 : 0.0;
    return where(mask, a, -a);
}

// ---------------------------------------------------------------------------------------------
// Gradient check

GradCheckReport grad_check(const ScalarFunction& f, ParameterStore& store,
                           std::span<const ParamId> params, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("grad_check: step must be positive");

    Gradients grads;
    {
        Tape tape;
        tape.watch(store, params);
        Value loss = f(tape, store);
        if (!std::isfinite(loss.value().item())) throw std::domain_error("grad_check: non-finite loss");
        grads = tape.backward(loss);
    }

    auto evaluate = [&]() {
        Tape tape;
        const double v = f(tape, store).value().item();
        if (!std::isfinite(v)) throw std::domain_error("grad_check: non-finite loss under perturbation");
        return v;
    };

    GradCheckReport report;
    for (ParamId id : params) {
        double worst = 0.0;
        Matrix& value = store.mutable_value(id);
        const Matrix& analytic = grads.at(id);
        for (std::size_t i = 0; i < value.size(); ++i) {
            const double saved = value.data()[i];
            value.data()[i] = saved + h;
            const double up = evaluate();
            value.data()[i] = saved - h;
            const double down = evaluate();
            value.data()[i] = saved;
            const double fd = (up - down) / (2.0 * h);
            const double err = std::abs(analytic.data()[i] - fd) / std::max(1.0, std::abs(fd));
            worst = std::max(worst, err);
        }
        report.per_parameter.emplace_back(store.name(id), worst);
        report.max_rel_error = std::max(report.max_rel_error, worst);
    }
    return report;
}

}  // namespace dsmp::diff
