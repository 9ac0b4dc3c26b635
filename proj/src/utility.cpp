#include "dsmp/utility.h"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dsmp {

Utility Utility::power(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("power utility needs p in (0,1)");
    return Utility(Kind::Power, p);
}

std::string Utility::describe() const {
    if (kind_ == Kind::Log) return "log";
    std::ostringstream os;
    os << "power(" << p_ << ")";
    return os.str();
}

double Utility::u(double x) const {
    if (!(x > 0.0)) return 0.0;
    return kind_ == Kind::Log ? std::log(x) : std::pow(x, p_) / p_;
}

double Utility::u_prime(double x) const {
    if (!(x > 0.0)) return 0.0;
    return kind_ == Kind::Log ? 1.0 / x : std::pow(x, p_ - 1.0);
}

double Utility::inverse_marginal(double y) const {
    if (!(y > 0.0)) throw std::domain_error("inverse marginal utility needs y > 0");
    return kind_ == Kind::Log ? 1.0 / y : std::pow(y, 1.0 / (p_ - 1.0));
}

double Utility::fenchel(double y) const {
    if (!(y > 0.0)) throw std::domain_error("conjugate utility needs y > 0");
    if (kind_ == Kind::Log) return -std::log(y) - 1.0;
    return (1.0 - p_) / p_ * std::pow(y, p_ / (p_ - 1.0));
}

double Utility::fenchel_prime(double y) const { return -inverse_marginal(y); }

diff::Value Utility::u(diff::Value x) const {
    if (kind_ == Kind::Log) return diff::guarded_log(x);
    return diff::guarded_pow(x, p_) * (1.0 / p_);
}

diff::Value Utility::u_prime(diff::Value x) const {
    if (kind_ == Kind::Log) return diff::guarded_pow(x, -1.0);
    return diff::guarded_pow(x, p_ - 1.0);
}

diff::Value Utility::inverse_marginal(diff::Value y) const {
    if (kind_ == Kind::Log) return diff::guarded_pow(y, -1.0);
    return diff::guarded_pow(y, 1.0 / (p_ - 1.0));
}

diff::Value Utility::fenchel(diff::Value y) const {
    diff::Value value = kind_ == Kind::Log ? -diff::guarded_log(y) - 1.0
                                           : diff::guarded_pow(y, p_ / (p_ - 1.0)) * ((1.0 - p_) / p_);
    Matrix inside(y.rows(), y.cols());
    for (std::size_t i = 0; i < inside.size(); ++i) inside.values()[i] = y.value().values()[i] > 0.0 ? 1.0 : 0.0;
    return diff::where(inside, value, y.tape()->constant(y.rows(), y.cols(), 0.0));
}

}  // namespace dsmp
