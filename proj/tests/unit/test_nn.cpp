#include <cmath>
#include <random>

#include "doctest.h"
#include "dsmp/nn.h"

using dsmp::Matrix;
using namespace dsmp;
using nn::OutputTransform;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix m(r, c);
    for (double& x : m.values()) x = u(rng);
    return m;
}

nn::HeadSpec small_spec(std::size_t in, std::size_t out, OutputTransform t = {}) {
    nn::HeadSpec s;
    s.in_dim = in;
    s.out_dim = out;
    s.hidden = {5, 4};
    s.bn_epsilon = 0.01;
    s.transform = t;
    return s;
}

}  // namespace

TEST_CASE("batch norm in training mode normalizes with the biased batch variance") {
    diff::ParameterStore store;
    nn::BatchNorm bn;
    bn.gamma = store.add("g", Matrix(1, 2, {2.0, 0.5}));
    bn.beta = store.add("b", Matrix(1, 2, {1.0, -1.0}));
    bn.running_mean = Matrix(1, 2, 0.0);
    bn.running_var = Matrix(1, 2, 1.0);
    bn.epsilon = 0.1;
    Matrix x(4, 2, {1.0, 2.0, 3.0, 2.0, 5.0, 4.0, 7.0, 0.0});
    diff::Tape tape;
    Matrix mean, var;
    auto y = nn::batch_norm_training(tape, store, bn, tape.constant(x), &mean, &var);
    // column 0: mean 4, biased var 5; column 1: mean 2, biased var 2
    CHECK(mean(0, 0) == doctest::Approx(4.0));
    CHECK(var(0, 0) == doctest::Approx(5.0));
    CHECK(var(0, 1) == doctest::Approx(2.0));
    for (std::size_t r = 0; r < 4; ++r) {
        CHECK(y.value()(r, 0) == doctest::Approx(2.0 * (x(r, 0) - 4.0) / std::sqrt(5.1) + 1.0));
        CHECK(y.value()(r, 1) == doctest::Approx(0.5 * (x(r, 1) - 2.0) / std::sqrt(2.1) - 1.0));
    }
}

TEST_CASE("batch norm inference uses the running statistics") {
    diff::ParameterStore store;
    nn::BatchNorm bn;
    bn.gamma = store.add("g", Matrix(1, 1, 3.0));
    bn.beta = store.add("b", Matrix(1, 1, 0.5));
    bn.running_mean = Matrix(1, 1, 2.0);
    bn.running_var = Matrix(1, 1, 4.0);
    bn.epsilon = 0.0;
    diff::Tape tape;
    auto y = nn::batch_norm_inference(tape, store, bn, tape.constant(Matrix(2, 1, {4.0, 0.0})));
    CHECK(y.value()(0, 0) == doctest::Approx(3.5));
    CHECK(y.value()(1, 0) == doctest::Approx(-2.5));
}

TEST_CASE("training forward folds batch statistics into the running averages") {
    std::mt19937_64 rng(3);
    diff::ParameterStore store;
    auto head = nn::FeedForwardHead::create(store, "h", small_spec(2, 1), rng);
    Matrix x = random_matrix(16, 2, rng, 1.0, 3.0);
    double mean0 = 0.0, var0 = 0.0;
    for (std::size_t r = 0; r < 16; ++r) mean0 += x(r, 0) / 16.0;
    for (std::size_t r = 0; r < 16; ++r) var0 += (x(r, 0) - mean0) * (x(r, 0) - mean0) / 16.0;
    diff::Tape tape;
    head.forward(tape, store, tape.constant(x), nn::Mode::Training);
    CHECK(head.norms()[0].running_mean(0, 0) == doctest::Approx(0.01 * mean0));
    CHECK(head.norms()[0].running_var(0, 0) == doctest::Approx(0.99 + 0.01 * var0));

    const Matrix before = head.norms()[0].running_mean;
    diff::Tape t2;
    head.forward(t2, store, t2.constant(x), nn::Mode::Inference);
    head.infer(t2, store, t2.constant(x));
    CHECK(head.norms()[0].running_mean == before);
}

TEST_CASE("head layout and glorot initialization") {
    std::mt19937_64 rng(11);
    diff::ParameterStore store;
    auto head = nn::FeedForwardHead::create(store, "pi3", small_spec(3, 2), rng);
    REQUIRE(head.dense().size() == 3);
    CHECK(head.norms().size() == 3);
    CHECK_FALSE(head.dense()[0].has_bias);
    CHECK_FALSE(head.dense()[1].has_bias);
    CHECK(head.dense()[2].has_bias);
    const Matrix& w0 = store.value(head.dense()[0].weights);
    CHECK(w0.rows() == 3);
    CHECK(w0.cols() == 5);
    const double limit = std::sqrt(6.0 / 8.0);
    for (double w : w0.values()) CHECK(std::abs(w) <= limit);
    CHECK(store.value(head.dense()[2].bias) == Matrix(1, 2, 0.0));
    // 3 BN x (gamma, beta) + 3 kernels + 1 bias
    CHECK(head.parameters().size() == 10);
}

TEST_CASE("same seed gives the same head") {
    auto build = [] {
        std::mt19937_64 rng(99);
        diff::ParameterStore store;
        nn::FeedForwardHead::create(store, "h", small_spec(2, 2), rng);
        std::vector<Matrix> out;
        for (std::size_t i = 0; i < store.size(); ++i) out.push_back(store.value(i));
        return out;
    };
    CHECK(build() == build());
}

TEST_CASE("head output stays inside the transform image") {
    std::mt19937_64 rng(5);
    const double kappa = 0.2;
    for (auto kind : {OutputTransform::Kind::SquareMinusKappa, OutputTransform::Kind::ClampFloor,
                      OutputTransform::Kind::Square, OutputTransform::Kind::AbsMinusKappa,
                      OutputTransform::Kind::Zero}) {
        diff::ParameterStore store;
        auto head = nn::FeedForwardHead::create(store, "h", small_spec(2, 3, OutputTransform::of(kind, kappa)), rng);
        for (auto mode : {nn::Mode::Training, nn::Mode::Inference}) {
            diff::Tape tape;
            auto y = head.forward(tape, store, tape.constant(random_matrix(32, 2, rng, -5.0, 5.0)), mode);
            for (double v : y.value().values()) {
                if (kind == OutputTransform::Kind::Square) CHECK(v >= 0.0);
                else if (kind == OutputTransform::Kind::Zero) CHECK(v == 0.0);
                else CHECK(v >= -kappa);
            }
        }
    }
}

TEST_CASE("transform restricted to leading columns") {
    OutputTransform t = OutputTransform::of(OutputTransform::Kind::Square);
    t.constrained_cols = 1;
    Matrix out = t.apply(Matrix(1, 3, {-2.0, -3.0, 4.0}));
    CHECK(out == Matrix(1, 3, {4.0, -3.0, 4.0}));
    CHECK(OutputTransform::of(OutputTransform::Kind::ClampFloor, 0.1).apply_scalar(-0.5) == -0.1);
    CHECK(OutputTransform::of(OutputTransform::Kind::SquareMinusKappa, 0.1).apply_scalar(0.5) == doctest::Approx(0.15));
}

TEST_CASE("semi-recurrent head takes the previous output as extra input") {
    std::mt19937_64 rng(8);
    diff::ParameterStore store;
    auto head = nn::FeedForwardHead::create(store, "h", small_spec(3, 2), rng);
    diff::Tape tape;
    auto y = head.forward_semi_recurrent(tape, store, tape.constant(random_matrix(6, 1, rng)),
                                         tape.constant(random_matrix(6, 2, rng)), nn::Mode::Inference);
    CHECK(y.rows() == 6);
    CHECK(y.cols() == 2);
}

TEST_CASE("constant head repeats its row and respects the init range") {
    std::mt19937_64 rng(2);
    diff::ParameterStore store;
    auto head = nn::ConstantHead::create(store, "c", 4, -0.1, 0.1, OutputTransform::identity(), rng);
    for (double v : store.value(head.parameter()).values()) {
        CHECK(v >= -0.1);
        CHECK(v <= 0.1);
    }
    diff::Tape tape;
    auto y = head.forward(tape, store, 5);
    CHECK(y.rows() == 5);
    for (std::size_t r = 1; r < 5; ++r)
        for (std::size_t c = 0; c < 4; ++c) CHECK(y.value()(r, c) == y.value()(0, c));
}

TEST_CASE("full head gradients match finite differences in training mode") {
    std::mt19937_64 rng(13);
    diff::ParameterStore store;
    auto head = nn::FeedForwardHead::create(store, "h", small_spec(2, 2, OutputTransform::of(OutputTransform::Kind::SquareMinusKappa, 0.1)), rng);
    Matrix x = random_matrix(12, 2, rng);
    auto params = head.parameters();
    diff::ScalarFunction f = [&](diff::Tape& t, const diff::ParameterStore& s) {
        nn::FeedForwardHead copy = head;
        auto y = copy.forward(t, s, t.constant(x), nn::Mode::Training);
        return diff::sum_cols(diff::mean_rows(diff::square(y)));
    };
    CHECK(diff::grad_check(f, store, params, 1e-6).max_rel_error < 1e-5);
}

TEST_CASE("snapshot json round trip") {
    std::vector<nn::NamedTensor> in{{"a", Matrix(2, 2, {1.0, -2.5, 3.25, 1e-17})}, {"b/c", Matrix(1, 1, 0.1)}};
    auto out = nn::snapshot_from_json(nn::snapshot_to_json(in));
    REQUIRE(out.size() == 2);
    CHECK(out[0].name == "a");
    CHECK(out[0].value == in[0].value);
    CHECK(out[1].name == "b/c");
    CHECK(out[1].value == in[1].value);
}
