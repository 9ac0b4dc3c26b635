#pragma once

#include <string>

#include "dsmp/matrix.h"
#include "dsmp/tape.h"

namespace dsmp {

/// Log utility or power utility x^p / p with p in (0,1).
class Utility {
public:
    enum class Kind { Log, Power };

    static Utility log() { return Utility(Kind::Log, 0.0); }
    static Utility power(double p);

    Kind kind() const noexcept { return kind_; }
    double p() const noexcept { return p_; }
    std::string describe() const;

    // Scalar API. u and u_prime are guarded (0 for x <= 0); the dual-side functions require y > 0.
    double u(double x) const;
    double u_prime(double x) const;
    double inverse_marginal(double y) const;
    double fenchel(double y) const;
    double fenchel_prime(double y) const;

    // Guarded batch versions for Monte-Carlo expressions: 0 outside the domain.
    double fenchel_guarded(double y) const { return y > 0.0 ? fenchel(y) : 0.0; }
    double inverse_marginal_guarded(double y) const { return y > 0.0 ? inverse_marginal(y) : 0.0; }

    // Differentiable guarded versions.
    diff::Value u(diff::Value x) const;
    diff::Value u_prime(diff::Value x) const;
    diff::Value inverse_marginal(diff::Value y) const;
    diff::Value fenchel(diff::Value y) const;

    bool operator==(const Utility&) const = default;

private:
    Utility(Kind kind, double p) : kind_(kind), p_(p) {}

    Kind kind_ = Kind::Log;
    double p_ = 0.0;
};

}  // namespace dsmp
