#include <random>
#include <vector>

#include "doctest.h"
#include "dsmp/constraints.h"

using dsmp::Matrix;
using namespace dsmp;

namespace {

// max of -pi^T v over a box [lo, hi]^m intersected with K, attained at a vertex
double support_on_box(const ConstraintSet& K, const std::vector<double>& v, double hi) {
    double s = 0.0;
    for (std::size_t i = 0; i < K.traded(); ++i) {
        double lo = K.kind() == ConstraintSet::Kind::FullSpace ? -hi
                    : K.kind() == ConstraintSet::Kind::NonNegOrthant ? 0.0
                                                                     : -K.kappa();
        s += std::max(-lo * v[i], -hi * v[i]);
    }
    return s;
}

}  // namespace

TEST_CASE("support function agrees with a growing-box supremum") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 1.0);
    for (const auto& K : {ConstraintSet::full_space(3), ConstraintSet::non_negative(3), ConstraintSet::floor_box(0.25, 3)}) {
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<double> v(3);
            for (double& x : v) x = trial % 5 == 0 ? std::abs(n(rng)) : n(rng);
            if (trial % 7 == 0) v.assign(3, 0.0);
            const auto d = K.support_delta(v);
            const double small = support_on_box(K, v, 1e3);
            const double large = support_on_box(K, v, 1e6);
            if (large > small + 1e-9) {
                CHECK(d.infinite);
                CHECK_FALSE(K.dual_domain_contains(v));
            } else {
                REQUIRE_FALSE(d.infinite);
                CHECK(d.value == doctest::Approx(large));
                CHECK(K.dual_domain_contains(v));
            }
        }
    }
}

TEST_CASE("support function examples") {
    auto K = ConstraintSet::floor_box(1.0 / 30.0, 2);
    std::vector<double> v{3.0, 6.0};
    CHECK(K.support_delta(v).value == doctest::Approx(0.3));
    std::vector<double> neg{-1.0, 1.0};
    CHECK(K.support_delta(neg).infinite);
    std::vector<double> zero{0.0, 0.0};
    CHECK(ConstraintSet::full_space(2).support_delta(zero).value == 0.0);
    CHECK(ConstraintSet::full_space(2).support_delta(v).infinite);
    CHECK(ConstraintSet::non_negative(2).support_delta(v).value == 0.0);
}

TEST_CASE("projection lands in K and is idempotent") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0.0, 2.0);
    for (const auto& K : {ConstraintSet::full_space(4), ConstraintSet::non_negative(4), ConstraintSet::floor_box(0.1, 4)}) {
        Matrix x(10, 4);
        for (double& e : x.values()) e = n(rng);
        Matrix p = K.project(x);
        for (std::size_t r = 0; r < 10; ++r) CHECK(K.contains(p.row(r), 1e-15));
        CHECK(K.project(p) == p);
    }
    auto K = ConstraintSet::floor_box(0.1, 2);
    CHECK(K.project(Matrix(1, 2, {-5.0, 0.3})) == Matrix(1, 2, {-0.1, 0.3}));
}

TEST_CASE("zero padding pins the extra coordinates") {
    auto K = ConstraintSet::floor_box(0.2, 1).zero_padded(1);
    CHECK(K.dim() == 2);
    std::vector<double> in{0.5, 0.0}, out{0.5, 0.1};
    CHECK(K.contains(in));
    CHECK_FALSE(K.contains(out));
    CHECK(K.project(Matrix(1, 2, {-1.0, 3.0})) == Matrix(1, 2, {-0.2, 0.0}));
    std::vector<double> v{1.0, -7.0};
    CHECK(K.support_delta(v).value == doctest::Approx(0.2));
    CHECK(K.dual_domain_contains(v));
}

TEST_CASE("transforms map raw outputs into K and the dual domain") {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> n(0.0, 3.0);
    for (const auto& K : {ConstraintSet::full_space(3), ConstraintSet::non_negative(3), ConstraintSet::floor_box(0.3, 3)}) {
        Matrix raw(20, 3);
        for (double& e : raw.values()) e = n(rng);
        for (auto pos : {ConstraintSet::Position::Initial, ConstraintSet::Position::Later}) {
            Matrix pi = K.primal_transform(pos).apply(raw);
            for (std::size_t r = 0; r < 20; ++r) CHECK(K.contains(pi.row(r), 1e-12));
        }
        Matrix v = K.dual_transform().apply(raw);
        for (std::size_t r = 0; r < 20; ++r) CHECK(K.dual_domain_contains(v.row(r)));
    }
    CHECK(ConstraintSet::floor_box(0.1, 1).primal_transform(ConstraintSet::Position::Initial).kind ==
          nn::OutputTransform::Kind::ClampFloor);
    CHECK(ConstraintSet::floor_box(0.1, 1).primal_transform(ConstraintSet::Position::Later).kind ==
          nn::OutputTransform::Kind::SquareMinusKappa);
}

TEST_CASE("batched support on the dual domain") {
    auto K = ConstraintSet::floor_box(0.5, 2).zero_padded(1);
    Matrix v(2, 3, {1.0, 2.0, 9.0, 0.0, 4.0, -9.0});
    CHECK(K.support_on_dual_domain(v) == Matrix(2, 1, {1.5, 2.0}));
    diff::Tape tape;
    CHECK(K.support_on_dual_domain(tape.constant(v)).value() == Matrix(2, 1, {1.5, 2.0}));
    CHECK(ConstraintSet::non_negative(3).support_on_dual_domain(Matrix(2, 3, 1.0)) == Matrix(2, 1, 0.0));
}

TEST_CASE("invalid constraint construction") {
    CHECK_THROWS(ConstraintSet::floor_box(0.0, 2));
    CHECK_THROWS(ConstraintSet::full_space(0));
}
