#include "dsmp/constraints.h"

#include <cmath>

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace dsmp {

ConstraintSet ConstraintSet::full_space(std::size_t m) {
    if (m == 0) throw std::invalid_argument("constraint dimension must be positive");
    ConstraintSet s;
    s.kind_ = Kind::FullSpace;
    s.m_ = m;
    return s;
}

ConstraintSet ConstraintSet::non_negative(std::size_t m) {
    ConstraintSet s = full_space(m);
    s.kind_ = Kind::NonNegOrthant;
    return s;
}

ConstraintSet ConstraintSet::floor_box(double kappa, std::size_t m) {
    if (!(kappa > 0.0)) throw std::invalid_argument("floor box needs kappa > 0");
    ConstraintSet s = full_space(m);
    s.kind_ = Kind::FloorBox;
    s.kappa_ = kappa;
    return s;
}

ConstraintSet ConstraintSet::zero_padded(std::size_t extra) const {
    ConstraintSet s = *this;
    s.padding_ += extra;
    return s;
}

std::string ConstraintSet::describe() const {
    std::ostringstream os;
    switch (kind_) {
        case Kind::FullSpace: os << "full_space(" << m_ << ")"; break;
        case Kind::NonNegOrthant: os << "non_negative(" << m_ << ")"; break;
        case Kind::FloorBox: os << "floor_box(" << kappa_ << ", " << m_ << ")"; break;
    }
    if (padding_ > 0) os << " x {0}^" << padding_;
    return os.str();
}

ExtendedReal ConstraintSet::support_delta(std::span<const double> v) const {
    if (v.size() != dim()) throw std::invalid_argument("support_delta: dimension mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
        switch (kind_) {
            case Kind::FullSpace:
                if (v[i] != 0.0) return ExtendedReal::infinity();
                break;
            case Kind::NonNegOrthant:
                if (v[i] < 0.0) return ExtendedReal::infinity();
                break;
            case Kind::FloorBox:
                if (v[i] < 0.0) return ExtendedReal::infinity();
                sum += kappa_ * v[i];
                break;
        }
    }
    return ExtendedReal::finite(sum);
}

bool ConstraintSet::dual_domain_contains(std::span<const double> v, double tol) const {
    if (v.size() != dim()) return false;
    for (std::size_t i = 0; i < m_; ++i) {
        if (kind_ == Kind::FullSpace && std::abs(v[i]) > tol) return false;
        if (kind_ != Kind::FullSpace && v[i] < -tol) return false;
    }
    return true;
}

bool ConstraintSet::contains(std::span<const double> pi, double tol) const {
    if (pi.size() != dim()) return false;
    for (std::size_t i = 0; i < m_; ++i) {
        if (kind_ == Kind::NonNegOrthant && pi[i] < -tol) return false;
        if (kind_ == Kind::FloorBox && pi[i] < -kappa_ - tol) return false;
    }
    for (std::size_t i = m_; i < dim(); ++i)
        if (std::abs(pi[i]) > tol) return false;
    return true;
}

nn::OutputTransform ConstraintSet::dual_transform() const {
    nn::OutputTransform t;
    t.kind = kind_ == Kind::FullSpace ? nn::OutputTransform::Kind::Zero : nn::OutputTransform::Kind::Square;
    t.constrained_cols = m_;
    return t;
}

nn::OutputTransform ConstraintSet::primal_transform(Position position) const {
    switch (kind_) {
        case Kind::FullSpace: return nn::OutputTransform::identity();
        case Kind::NonNegOrthant: return nn::OutputTransform::of(nn::OutputTransform::Kind::Square);
        case Kind::FloorBox:
            return position == Position::Initial
                       ? nn::OutputTransform::of(nn::OutputTransform::Kind::ClampFloor, kappa_)
                       : nn::OutputTransform::of(nn::OutputTransform::Kind::SquareMinusKappa, kappa_);
    }
    return nn::OutputTransform::identity();
}

double ConstraintSet::project_component(double x) const {
    switch (kind_) {
        case Kind::FullSpace: return x;
        case Kind::NonNegOrthant: return std::max(0.0, x);
        case Kind::FloorBox: return std::max(-kappa_, x);
    }
    return x;
}

Matrix ConstraintSet::project(const Matrix& x) const {
    if (x.cols() != dim()) throw std::invalid_argument("project: dimension mismatch");
    Matrix out(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < m_; ++c) out(r, c) = project_component(x(r, c));
    return out;
}

diff::Value ConstraintSet::support_on_dual_domain(diff::Value v) const {
    if (v.cols() != dim()) throw std::invalid_argument("support_on_dual_domain: dimension mismatch");
    if (kind_ != Kind::FloorBox) return v.tape()->constant(v.rows(), 1, 0.0);
    diff::Value inner = m_ == v.cols() ? v : diff::slice_cols(v, 0, m_);
    return diff::sum_cols(inner) * kappa_;
}

Matrix ConstraintSet::support_on_dual_domain(const Matrix& v) const {
    if (v.cols() != dim()) throw std::invalid_argument("support_on_dual_domain: dimension mismatch");
    Matrix out(v.rows(), 1);
    if (kind_ != Kind::FloorBox) return out;
    for (std::size_t r = 0; r < v.rows(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < m_; ++c) s += v(r, c);
        out(r, 0) = kappa_ * s;
    }
    return out;
}

}  // namespace dsmp
