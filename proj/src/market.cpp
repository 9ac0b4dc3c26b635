#include "dsmp/market.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dsmp {

using diff::Value;

// ---------------------------------------------------------------------------------------------
// Volatility

Volatility Volatility::shared(Matrix sigma) {
    auto inv = std::make_shared<const Matrix>(inverse(sigma));
    return shared(std::make_shared<const Matrix>(std::move(sigma)), std::move(inv));
}

Volatility Volatility::shared(std::shared_ptr<const Matrix> sigma, std::shared_ptr<const Matrix> inv) {
    if (!sigma || !inv || sigma->rows() != sigma->cols() || !inv->same_shape(*sigma))
        throw std::invalid_argument("Volatility::shared: square sigma and inverse required");
    Volatility v;
    v.matrix_t_ = std::make_shared<const Matrix>(transpose(*sigma));
    v.inverse_t_ = std::make_shared<const Matrix>(transpose(*inv));
    v.matrix_ = std::move(sigma);
    v.inverse_ = std::move(inv);
    return v;
}

Volatility Volatility::diagonal(Matrix diag) {
    for (double x : diag.values())
        if (!(x > 0.0) || !std::isfinite(x)) throw std::domain_error("Volatility::diagonal: entries must be positive");
    Volatility v;
    v.diag_ = std::move(diag);
    return v;
}

std::size_t Volatility::dim() const noexcept { return matrix_ ? matrix_->rows() : diag_.cols(); }

Value Volatility::right_apply(Value pi) const {
    if (matrix_) return diff::matmul(pi, pi.tape()->constant(*matrix_));
    return pi * pi.tape()->constant(diag_);
}

Value Volatility::inv_apply(Value v) const {
    if (matrix_) return diff::matmul(v, v.tape()->constant(*inverse_t_));
    return v / v.tape()->constant(diag_);
}

Value Volatility::inv_transpose_apply(Value q) const {
    if (matrix_) return diff::matmul(q, q.tape()->constant(*inverse_));
    return q / q.tape()->constant(diag_);
}

namespace {

Matrix elementwise(const Matrix& a, const Matrix& diag, bool divide) {
    Matrix out(a.rows(), a.cols());
    const bool row = diag.rows() == 1;
    if (diag.cols() != a.cols() || (!row && diag.rows() != a.rows()))
        throw std::invalid_argument("diagonal volatility shape mismatch");
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) {
            const double d = diag(row ? 0 : r, c);
            out(r, c) = divide ? a(r, c) / d : a(r, c) * d;
        }
    return out;
}

}  // namespace

Matrix Volatility::right_apply(const Matrix& pi) const {
    return matrix_ ? matmul(pi, *matrix_) : elementwise(pi, diag_, false);
}
Matrix Volatility::inv_apply(const Matrix& v) const {
    return matrix_ ? matmul(v, *inverse_t_) : elementwise(v, diag_, true);
}
Matrix Volatility::inv_transpose_apply(const Matrix& q) const {
    return matrix_ ? matmul(q, *inverse_) : elementwise(q, diag_, true);
}
Matrix Volatility::left_apply(const Matrix& x) const {
    return matrix_ ? matmul(x, *matrix_t_) : elementwise(x, diag_, false);
}

// ---------------------------------------------------------------------------------------------
// MarketModel defaults

AuxState MarketModel::initial_aux(std::size_t) const { return {}; }

void MarketModel::step_aux(AuxState&, std::size_t, double, double, const Matrix&) const {}

Matrix MarketModel::extra_features(const AuxState&, std::size_t) const {
    throw std::logic_error(name() + " market provides no extra network inputs");
}

double sigma_diagonal(SigmaProfile profile, double level, double t) {
    switch (profile) {
        case SigmaProfile::OnePlusSqrt: return level * (1.0 + std::sqrt(t));
        case SigmaProfile::OverOnePlusT: return level / (1.0 + t);
        case SigmaProfile::Constant: return level;
    }
    return level;
}

Matrix build_sigma(std::size_t m, SigmaProfile profile, double diag, double off, double t) {
    Matrix s(m, m, off);
    const double d = sigma_diagonal(profile, diag, t);
    for (std::size_t i = 0; i < m; ++i) s(i, i) = d;
    return s;
}

namespace {

Matrix sine_drift(std::size_t m, double base, double amplitude, double phase, double t) {
    Matrix mu(1, m);
    for (std::size_t i = 0; i < m; ++i) {
        const double k = static_cast<double>(i + 1);
        mu(0, i) = base + amplitude * std::sin(4.0 * std::numbers::pi * t + std::numbers::pi * k / phase);
    }
    return mu;
}

using SigmaPair = std::pair<std::shared_ptr<const Matrix>, std::shared_ptr<const Matrix>>;

template <typename Build>
SigmaPair cached_sigma(std::mutex& mutex, std::map<double, SigmaPair>& cache, double t, Build build) {
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(t);
    if (it != cache.end()) return it->second;
    Matrix s = build(t);
    auto inv = std::make_shared<const Matrix>(inverse(s));
    SigmaPair pair{std::make_shared<const Matrix>(std::move(s)), std::move(inv)};
    if (cache.size() > 4096) cache.clear();
    cache.emplace(t, pair);
    return pair;
}

}  // namespace

// ---------------------------------------------------------------------------------------------
// Deterministic coefficients

DeterministicMarket::DeterministicMarket(DeterministicParams params) : p_(params) {
    if (p_.m == 0) throw std::invalid_argument("market needs at least one stock");
    if (!(p_.mu_phase != 0.0)) throw std::invalid_argument("mu phase divisor must be non-zero");
    sigma(0.0);
}

double DeterministicMarket::rate(double t) const { return p_.rate_level * std::exp(p_.rate_growth * t); }

Matrix DeterministicMarket::mu(double t) const {
    return sine_drift(p_.m, p_.mu_base, p_.mu_amplitude, p_.mu_phase, t);
}

SigmaPair DeterministicMarket::sigma(double t) const {
    return cached_sigma(mutex_, cache_, t, [this](double s) {
        return build_sigma(p_.m, p_.sigma_profile, p_.sigma_diag, p_.sigma_off, s);
    });
}

Coefficients DeterministicMarket::coefficients(std::size_t, double t, const AuxState&) const {
    Coefficients c;
    const double r = rate(t);
    c.r = Matrix::scalar(r);
    c.mu = mu(t);
    auto [s, inv] = sigma(t);
    c.sigma = Volatility::shared(s, inv);
    Matrix excess = c.mu;
    for (double& x : excess.values()) x -= r;
    c.theta = matmul(excess, transpose(*inv));
    return c;
}

// ---------------------------------------------------------------------------------------------
// Momentum drift

MomentumMarket::MomentumMarket(MomentumParams params) : p_(params) {
    if (p_.m == 0) throw std::invalid_argument("market needs at least one stock");
    if (!(p_.s0 > 0.0)) throw std::invalid_argument("initial stock price must be positive");
    sigma_ = Volatility::shared(build_sigma(p_.m, SigmaProfile::Constant, p_.sigma_diag, p_.sigma_off, 0.0));
}

AuxState MomentumMarket::initial_aux(std::size_t batch) const {
    AuxState aux;
    aux.stocks = Matrix(batch, p_.m, p_.s0);
    aux.integrals = Matrix(batch, p_.m, 0.0);
    return aux;
}

Coefficients MomentumMarket::coefficients(std::size_t, double t, const AuxState& aux) const {
    const std::size_t b = aux.stocks.rows();
    Coefficients c;
    c.r = Matrix::scalar(p_.rate);
    c.mu = Matrix(b, p_.m, p_.mu_high);
    if (t > 0.0) {
        for (std::size_t r = 0; r < b; ++r)
            for (std::size_t i = 0; i < p_.m; ++i)
                if (aux.stocks(r, i) < aux.integrals(r, i) / t) c.mu(r, i) = p_.mu_low;
    }
    c.sigma = sigma_;
    Matrix excess = c.mu;
    for (double& x : excess.values()) x -= p_.rate;
    c.theta = sigma_.inv_apply(excess);
    return c;
}

void MomentumMarket::step_aux(AuxState& aux, std::size_t i, double t, double dt, const Matrix& dB) const {
    const Coefficients c = coefficients(i, t, aux);
    const Matrix shock = sigma_.left_apply(dB);
    Matrix next = aux.stocks;
    for (std::size_t r = 0; r < next.rows(); ++r)
        for (std::size_t k = 0; k < p_.m; ++k)
            next(r, k) = aux.stocks(r, k) * (1.0 + c.mu(r, k) * dt + shock(r, k));
    for (std::size_t r = 0; r < next.rows(); ++r)
        for (std::size_t k = 0; k < p_.m; ++k) {
            const double area = p_.trapezoid ? 0.5 * (aux.stocks(r, k) + next(r, k)) * dt : aux.stocks(r, k) * dt;
            aux.integrals(r, k) += area;
        }
    aux.stocks = std::move(next);
}

// ---------------------------------------------------------------------------------------------
// Heston

HestonMarket::HestonMarket(HestonParams params) : p_(params) {
    if (!(p_.kappa > 0.0 && p_.theta_nu > 0.0 && p_.xi > 0.0))
        throw std::invalid_argument("Heston kappa, theta_nu and xi must be positive");
    if (!(2.0 * p_.kappa * p_.theta_nu > p_.xi * p_.xi))
        throw std::invalid_argument("Heston parameters violate the Feller condition 2*kappa*theta_nu > xi^2");
    if (!(p_.rho >= -1.0 && p_.rho <= 1.0)) throw std::invalid_argument("Heston rho must lie in [-1,1]");
    if (!(p_.nu0 > 0.0)) throw std::invalid_argument("Heston nu0 must be positive");
    if (!(p_.truncation > 0.0)) throw std::invalid_argument("Heston truncation must be positive");
}

AuxState HestonMarket::initial_aux(std::size_t batch) const {
    AuxState aux;
    aux.nu = Matrix(batch, 1, std::max(p_.nu0, p_.truncation));
    return aux;
}

Coefficients HestonMarket::coefficients(std::size_t, double, const AuxState& aux) const {
    const std::size_t b = aux.nu.rows();
    Coefficients c;
    c.r = Matrix::scalar(p_.rate);
    c.mu = Matrix(b, 2);
    c.theta = Matrix(b, 2);
    Matrix diag(b, 2, 1.0);
    for (std::size_t r = 0; r < b; ++r) {
        const double nu = aux.nu(r, 0);
        const double vol = std::sqrt(nu);
        c.mu(r, 0) = p_.rate + p_.risk_premium * nu;
        c.mu(r, 1) = p_.rate;
        c.theta(r, 0) = p_.risk_premium * vol;
        diag(r, 0) = vol;
    }
    c.sigma = Volatility::diagonal(std::move(diag));
    return c;
}

void HestonMarket::step_aux(AuxState& aux, std::size_t, double, double dt, const Matrix& dB) const {
    const double orth = std::sqrt(std::max(0.0, 1.0 - p_.rho * p_.rho));
    for (std::size_t r = 0; r < aux.nu.rows(); ++r) {
        const double nu = aux.nu(r, 0);
        const double driver = p_.rho * dB(r, 0) + orth * dB(r, 1);
        const double next = nu + p_.kappa * (p_.theta_nu - nu) * dt + p_.xi * std::sqrt(nu) * driver;
        aux.nu(r, 0) = std::max(next, p_.truncation);
    }
}

Matrix HestonMarket::extra_features(const AuxState& aux, std::size_t) const {
    Matrix out(aux.nu.rows(), 1);
    for (std::size_t r = 0; r < out.rows(); ++r) out(r, 0) = std::sqrt(aux.nu(r, 0));
    return out;
}

// ---------------------------------------------------------------------------------------------
// Vasicek short rate with an artificial untraded stock

VasicekMarket::VasicekMarket(VasicekParams params) : p_(params) {
    if (p_.m == 0) throw std::invalid_argument("market needs at least one stock");
    if (!(p_.alpha > 0.0 && p_.gamma >= 0.0)) throw std::invalid_argument("Vasicek alpha must be positive, gamma >= 0");
}

AuxState VasicekMarket::initial_aux(std::size_t batch) const {
    AuxState aux;
    aux.rate = Matrix(batch, 1, p_.r0);
    return aux;
}

Coefficients VasicekMarket::coefficients(std::size_t, double t, const AuxState& aux) const {
    const std::size_t b = aux.rate.rows();
    const std::size_t d = p_.m + 1;
    auto [s, inv] = cached_sigma(mutex_, cache_, t, [this, d](double tt) {
        Matrix full(d, d);
        const Matrix inner = build_sigma(p_.m, p_.sigma_profile, p_.sigma_diag, p_.sigma_off, tt);
        for (std::size_t i = 0; i < p_.m; ++i)
            for (std::size_t j = 0; j < p_.m; ++j) full(i, j) = inner(i, j);
        full(p_.m, p_.m) = 1.0;
        return full;
    });
    const Matrix drift = sine_drift(p_.m, p_.mu_base, p_.mu_amplitude, p_.mu_phase, t);
    Coefficients c;
    c.r = aux.rate;
    c.mu = Matrix(b, d);
    Matrix excess(b, d);
    for (std::size_t r = 0; r < b; ++r) {
        const double rate = aux.rate(r, 0);
        for (std::size_t i = 0; i < p_.m; ++i) {
            c.mu(r, i) = drift(0, i);
            excess(r, i) = drift(0, i) - rate;
        }
        c.mu(r, p_.m) = rate;
    }
    c.sigma = Volatility::shared(s, inv);
    c.theta = c.sigma.inv_apply(excess);
    return c;
}

void VasicekMarket::step_aux(AuxState& aux, std::size_t, double, double dt, const Matrix& dB) const {
    for (std::size_t r = 0; r < aux.rate.rows(); ++r) {
        const double rate = aux.rate(r, 0);
        aux.rate(r, 0) = rate + p_.alpha * (p_.beta - rate) * dt + p_.gamma * dB(r, p_.m);
    }
}

Matrix VasicekMarket::extra_features(const AuxState& aux, std::size_t) const { return aux.rate; }

// ---------------------------------------------------------------------------------------------
// Euler recursions

Value r_of(diff::Tape& tape, const Coefficients& c) { return tape.constant(c.r); }
Value theta_of(diff::Tape& tape, const Coefficients& c) { return tape.constant(c.theta); }

WealthAdjoint step_wealth_adjoint(Value X, Value p, Value pi, Value q, const Coefficients& c, Value dB, double dt) {
    diff::Tape& tape = *X.tape();
    Value exposure = c.sigma.right_apply(pi);
    Value drift = r_of(tape, c) + diff::sum_cols(exposure * theta_of(tape, c));
    Value next_p = p - (drift * p + diff::sum_cols(exposure * q)) * dt + diff::sum_cols(q * dB);
    Value next_x = X + X * drift * dt + X * diff::sum_cols(exposure * dB);
    return {next_x, next_p};
}

Value step_wealth(Value X, Value pi, const Coefficients& c, Value dB, double dt) {
    diff::Tape& tape = *X.tape();
    Value exposure = c.sigma.right_apply(pi);
    Value drift = r_of(tape, c) + diff::sum_cols(exposure * theta_of(tape, c));
    return X + X * drift * dt + X * diff::sum_cols(exposure * dB);
}

DualAdjoint step_dual_adjoint(Value Y, Value p2, Value v, Value delta, Value q2, const Coefficients& c, Value dB,
                              double dt) {
    diff::Tape& tape = *Y.tape();
    Value price = theta_of(tape, c) + c.sigma.inv_apply(v);
    Value rate = r_of(tape, c) + delta;
    Value next_y = Y - Y * (rate * dt + diff::sum_cols(price * dB));
    Value next_p2 = p2 + (rate * p2 + diff::sum_cols(price * q2)) * dt + diff::sum_cols(q2 * dB);
    return {next_y, next_p2};
}

Matrix step_wealth(const Matrix& X, const Matrix& pi, const Coefficients& c, const Matrix& dB, double dt) {
    diff::Tape tape;
    return step_wealth(tape.constant(X), tape.constant(pi), c, tape.constant(dB), dt).value();
}

Matrix step_adjoint(const Matrix& p, const Matrix& pi, const Matrix& q, const Coefficients& c, const Matrix& dB,
                    double dt) {
    diff::Tape tape;
    Value X = tape.constant(p.rows(), 1, 1.0);
    return step_wealth_adjoint(X, tape.constant(p), tape.constant(pi), tape.constant(q), c, tape.constant(dB), dt)
        .adjoint.value();
}

Matrix step_dual(const Matrix& Y, const Matrix& v, const Matrix& delta, const Coefficients& c, const Matrix& dB,
                 double dt) {
    diff::Tape tape;
    Value zero = tape.constant(Y.rows(), v.cols(), 0.0);
    return step_dual_adjoint(tape.constant(Y), tape.constant(Y.rows(), 1, 0.0), tape.constant(v),
                             tape.constant(delta), zero, c, tape.constant(dB), dt)
        .state.value();
}

}  // namespace dsmp
