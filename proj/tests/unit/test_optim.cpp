#include <cmath>
#include <limits>

#include "doctest.h"
#include "dsmp/optim.h"

using dsmp::Matrix;
using namespace dsmp;

TEST_CASE("piecewise schedule boundaries are inclusive on the left segment") {
    optim::PiecewiseSchedule s({1000, 3000, 8000}, {1e-2, 1e-3, 1e-4, 1e-5});
    CHECK(s.at(0) == 1e-2);
    CHECK(s.at(1000) == 1e-2);
    CHECK(s.at(1001) == 1e-3);
    CHECK(s.at(3000) == 1e-3);
    CHECK(s.at(7999) == 1e-4);
    CHECK(s.at(8001) == 1e-5);
    CHECK(s.at(1000000) == 1e-5);
    CHECK(optim::PiecewiseSchedule(0.5).at(123) == 0.5);
}

TEST_CASE("malformed schedules are rejected") {
    CHECK_THROWS(optim::PiecewiseSchedule({10}, {1.0}));
    CHECK_THROWS(optim::PiecewiseSchedule({10, 5}, {1.0, 2.0, 3.0}));
    CHECK_THROWS(optim::PiecewiseSchedule({10}, {1.0, -2.0}));
}

TEST_CASE("adam steps match a hand-rolled reference") {
    diff::ParameterStore store;
    auto id = store.add("w", Matrix(1, 2, {1.0, -1.0}));
    optim::Adam adam;
    const double grads[3][2] = {{0.5, -2.0}, {0.1, 1.0}, {-0.3, 0.0}};
    double w[2] = {1.0, -1.0}, m[2] = {0, 0}, v[2] = {0, 0};
    for (int t = 1; t <= 3; ++t) {
        diff::Gradients g;
        g[id] = Matrix(1, 2, {grads[t - 1][0], grads[t - 1][1]});
        REQUIRE(adam.step(store, g, 0.01));
        for (int i = 0; i < 2; ++i) {
            m[i] = 0.9 * m[i] + 0.1 * grads[t - 1][i];
            v[i] = 0.999 * v[i] + 0.001 * grads[t - 1][i] * grads[t - 1][i];
            const double mh = m[i] / (1.0 - std::pow(0.9, t));
            const double vh = v[i] / (1.0 - std::pow(0.999, t));
            w[i] -= 0.01 * mh / (std::sqrt(vh) + 1e-7);
        }
        CHECK(store.value(id)(0, 0) == doctest::Approx(w[0]).epsilon(1e-14));
        CHECK(store.value(id)(0, 1) == doctest::Approx(w[1]).epsilon(1e-14));
    }
    CHECK(adam.iterations() == 3);
}

TEST_CASE("first adam step moves each coordinate by about the learning rate") {
    diff::ParameterStore store;
    auto id = store.add("w", Matrix(1, 3, 0.0));
    optim::Adam adam;
    diff::Gradients g;
    g[id] = Matrix(1, 3, {1e3, -1e-3, 7.0});
    adam.step(store, g, 0.1);
    CHECK(store.value(id)(0, 0) == doctest::Approx(-0.1));
    CHECK(store.value(id)(0, 1) == doctest::Approx(0.1).epsilon(1e-3));
    CHECK(store.value(id)(0, 2) == doctest::Approx(-0.1));
}

TEST_CASE("non-finite gradients skip the whole update") {
    diff::ParameterStore store;
    auto a = store.add("a", Matrix(1, 1, 1.0));
    auto b = store.add("b", Matrix(1, 1, 2.0));
    optim::Adam adam;
    diff::Gradients g;
    g[a] = Matrix(1, 1, 0.5);
    g[b] = Matrix(1, 1, std::numeric_limits<double>::quiet_NaN());
    CHECK_FALSE(adam.step(store, g, 0.1));
    CHECK(store.value(a).item() == 1.0);
    CHECK(store.value(b).item() == 2.0);
    CHECK(adam.iterations() == 0);
    CHECK(adam.skipped() == 1);
}

TEST_CASE("zero learning rate leaves parameters untouched") {
    diff::ParameterStore store;
    auto a = store.add("a", Matrix(2, 2, 1.5));
    optim::Adam adam;
    diff::Gradients g;
    g[a] = Matrix(2, 2, 3.0);
    adam.step(store, g, 0.0);
    CHECK(store.value(a) == Matrix(2, 2, 1.5));
}

TEST_CASE("adam minimizes a quadratic") {
    diff::ParameterStore store;
    auto id = store.add("x", Matrix(1, 1, 5.0));
    optim::Adam adam;
    for (int k = 0; k < 3000; ++k) {
        diff::Tape tape;
        tape.watch(store, id);
        auto loss = diff::square(tape.parameter(store, id) - 2.0);
        adam.step(store, tape.backward(loss), 0.01);
    }
    CHECK(store.value(id).item() == doctest::Approx(2.0).epsilon(1e-3));
}

TEST_CASE("invalid adam options") {
    CHECK_THROWS(optim::Adam({1.0, 0.999, 1e-7}));
    CHECK_THROWS(optim::Adam({0.9, 0.999, 0.0}));
}
