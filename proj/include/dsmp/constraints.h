#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "dsmp/matrix.h"
#include "dsmp/nn.h"
#include "dsmp/tape.h"

namespace dsmp {

/// A value in [0, inf] with infinity carried as a tag.
struct ExtendedReal {
    bool infinite = false;
    double value = 0.0;

    static ExtendedReal finite(double v) { return {false, v}; }
    static ExtendedReal infinity() { return {true, 0.0}; }
};

/// Closed convex portfolio constraint K on the first m coordinates, optionally followed by
/// `padding` coordinates pinned to zero (K x {0}).
class ConstraintSet {
public:
    enum class Kind { FullSpace, NonNegOrthant, FloorBox };
    enum class Position { Initial, Later };

    static ConstraintSet full_space(std::size_t m);
    static ConstraintSet non_negative(std::size_t m);
    static ConstraintSet floor_box(double kappa, std::size_t m);
    ConstraintSet zero_padded(std::size_t extra) const;

    Kind kind() const noexcept { return kind_; }
    double kappa() const noexcept { return kappa_; }
    std::size_t traded() const noexcept { return m_; }
    std::size_t padding() const noexcept { return padding_; }
    std::size_t dim() const noexcept { return m_ + padding_; }
    std::string describe() const;

    /// sup over pi in K of -pi^T v.
    ExtendedReal support_delta(std::span<const double> v) const;
    bool dual_domain_contains(std::span<const double> v, double tol = 0.0) const;
    bool contains(std::span<const double> pi, double tol = 0.0) const;

    /// Hard constraint for dual control heads (leading m columns; padded columns are free).
    nn::OutputTransform dual_transform() const;
    /// Hard constraint for the m traded outputs of a primal control head.
    nn::OutputTransform primal_transform(Position position) const;

    /// Componentwise projection into K.
    double project_component(double x) const;
    Matrix project(const Matrix& x) const;

    /// delta_K restricted to the dual domain, per row: (b, dim) -> (b, 1).
    diff::Value support_on_dual_domain(diff::Value v) const;
    Matrix support_on_dual_domain(const Matrix& v) const;

    bool operator==(const ConstraintSet&) const = default;

private:
    Kind kind_ = Kind::FullSpace;
    double kappa_ = 0.0;
    std::size_t m_ = 1;
    std::size_t padding_ = 0;
};

}  // namespace dsmp
