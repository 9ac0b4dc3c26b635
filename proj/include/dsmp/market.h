#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "dsmp/matrix.h"
#include "dsmp/tape.h"

namespace dsmp {

/// sigma(t) for a batch: either one d x d matrix shared by all paths, or a per-path diagonal.
class Volatility {
public:
    static Volatility shared(Matrix sigma);
    static Volatility shared(std::shared_ptr<const Matrix> sigma, std::shared_ptr<const Matrix> inverse);
    /// diag is (b, d) or (1, d) and must be strictly positive.
    static Volatility diagonal(Matrix diag);

    bool is_shared() const noexcept { return static_cast<bool>(matrix_); }
    std::size_t dim() const noexcept;
    const Matrix& matrix() const { return *matrix_; }
    const Matrix& inverse_matrix() const { return *inverse_; }
    const Matrix& diag() const noexcept { return diag_; }

    // Row-wise products, (b, d) -> (b, d):
    //   right_apply(pi)          rows of pi^T sigma
    //   inv_apply(v)             rows of (sigma^{-1} v)^T
    //   inv_transpose_apply(q)   rows of (sigma^{-T} q)^T
    diff::Value right_apply(diff::Value pi) const;
    diff::Value inv_apply(diff::Value v) const;
    diff::Value inv_transpose_apply(diff::Value q) const;
    Matrix right_apply(const Matrix& pi) const;
    Matrix inv_apply(const Matrix& v) const;
    Matrix inv_transpose_apply(const Matrix& q) const;
    /// sigma * x for rows x (used for stock dynamics): rows of (sigma x)^T.
    Matrix left_apply(const Matrix& x) const;

private:
    std::shared_ptr<const Matrix> matrix_;
    std::shared_ptr<const Matrix> inverse_;
    std::shared_ptr<const Matrix> inverse_t_;
    std::shared_ptr<const Matrix> matrix_t_;
    Matrix diag_;
};

/// Coefficients at one grid point. r is (1,1) or (b,1); mu and theta are (1,d) or (b,d).
struct Coefficients {
    Matrix r;
    Matrix mu;
    Matrix theta;
    Volatility sigma;
};

/// Auxiliary path state carried by non-deterministic markets.
struct AuxState {
    Matrix stocks;     // (b, m) momentum market
    Matrix integrals;  // (b, m) running integral of stock prices
    Matrix nu;         // (b, 1) Heston variance
    Matrix rate;       // (b, 1) short rate
};

class MarketModel {
public:
    virtual ~MarketModel() = default;

    virtual std::string name() const = 0;
    /// Tradable coordinates.
    virtual std::size_t traded() const = 0;
    /// Brownian dimension (traded plus artificial coordinates).
    virtual std::size_t noise_dim() const = 0;
    /// Whether the coefficients are deterministic functions of time.
    virtual bool deterministic() const { return false; }

    virtual AuxState initial_aux(std::size_t batch) const;
    /// Coefficients at t = i * dt given the auxiliary state at that time.
    virtual Coefficients coefficients(std::size_t i, double t, const AuxState& aux) const = 0;
    /// Advances the auxiliary state from t to t + dt with increments dB (b, d).
    virtual void step_aux(AuxState& aux, std::size_t i, double t, double dt, const Matrix& dB) const;
    /// Extra network inputs (b, k) derived from the auxiliary state; k = extra_feature_count().
    virtual std::size_t extra_feature_count() const { return 0; }
    virtual Matrix extra_features(const AuxState& aux, std::size_t batch) const;
};

enum class SigmaProfile { OnePlusSqrt, OverOnePlusT, Constant };

struct DeterministicParams {
    std::size_t m = 1;
    double rate_level = 0.06;   // r(t) = rate_level * exp(rate_growth * t)
    double rate_growth = 0.0;
    double mu_base = 0.07;      // mu_i(t) = mu_base + mu_amplitude * sin(4 pi t + pi i / mu_phase)
    double mu_amplitude = 0.0;
    double mu_phase = 15.0;
    SigmaProfile sigma_profile = SigmaProfile::Constant;
    double sigma_diag = 0.3;
    double sigma_off = 0.0;
    bool operator==(const DeterministicParams&) const = default;
};

struct MomentumParams {
    std::size_t m = 5;
    double rate = 0.1;
    double sigma_diag = 0.2;
    double sigma_off = 0.05;
    double mu_low = 0.08;
    double mu_high = 0.12;
    double s0 = 1.0;
    bool trapezoid = false;
    bool operator==(const MomentumParams&) const = default;
};

struct HestonParams {
    double rate = 0.05;
    double risk_premium = 0.5;  // A
    double kappa = 10.0;
    double theta_nu = 0.05;
    double xi = 0.5;
    double rho = -0.5;
    double nu0 = 0.5;
    double truncation = 1e-5;
    bool operator==(const HestonParams&) const = default;
};

struct VasicekParams {
    std::size_t m = 30;
    double r0 = 0.05;
    double alpha = 5.0;
    double beta = 0.05;
    double gamma = 0.05;
    double mu_base = 0.06;
    double mu_amplitude = 0.01;
    double mu_phase = 15.0;
    SigmaProfile sigma_profile = SigmaProfile::OverOnePlusT;
    double sigma_diag = 0.3;
    double sigma_off = 0.05;
    bool operator==(const VasicekParams&) const = default;
};

double sigma_diagonal(SigmaProfile profile, double level, double t);
Matrix build_sigma(std::size_t m, SigmaProfile profile, double diag, double off, double t);

class DeterministicMarket final : public MarketModel {
public:
    explicit DeterministicMarket(DeterministicParams params);
    std::string name() const override { return "deterministic"; }
    std::size_t traded() const override { return p_.m; }
    std::size_t noise_dim() const override { return p_.m; }
    bool deterministic() const override { return true; }
    Coefficients coefficients(std::size_t i, double t, const AuxState& aux) const override;

    double rate(double t) const;
    Matrix mu(double t) const;
    /// Shared sigma and its inverse at time t, cached.
    std::pair<std::shared_ptr<const Matrix>, std::shared_ptr<const Matrix>> sigma(double t) const;
    const DeterministicParams& params() const noexcept { return p_; }

private:
    DeterministicParams p_;
    mutable std::mutex mutex_;
    mutable std::map<double, std::pair<std::shared_ptr<const Matrix>, std::shared_ptr<const Matrix>>> cache_;
};

class MomentumMarket final : public MarketModel {
public:
    explicit MomentumMarket(MomentumParams params);
    std::string name() const override { return "momentum"; }
    std::size_t traded() const override { return p_.m; }
    std::size_t noise_dim() const override { return p_.m; }
    AuxState initial_aux(std::size_t batch) const override;
    Coefficients coefficients(std::size_t i, double t, const AuxState& aux) const override;
    void step_aux(AuxState& aux, std::size_t i, double t, double dt, const Matrix& dB) const override;
    const MomentumParams& params() const noexcept { return p_; }

private:
    MomentumParams p_;
    Volatility sigma_;
};

class HestonMarket final : public MarketModel {
public:
    explicit HestonMarket(HestonParams params);
    std::string name() const override { return "heston"; }
    std::size_t traded() const override { return 1; }
    std::size_t noise_dim() const override { return 2; }
    AuxState initial_aux(std::size_t batch) const override;
    Coefficients coefficients(std::size_t i, double t, const AuxState& aux) const override;
    void step_aux(AuxState& aux, std::size_t i, double t, double dt, const Matrix& dB) const override;
    std::size_t extra_feature_count() const override { return 1; }
    /// sqrt(nu)
    Matrix extra_features(const AuxState& aux, std::size_t batch) const override;
    const HestonParams& params() const noexcept { return p_; }

private:
    HestonParams p_;
};

class VasicekMarket final : public MarketModel {
public:
    explicit VasicekMarket(VasicekParams params);
    std::string name() const override { return "vasicek"; }
    std::size_t traded() const override { return p_.m; }
    std::size_t noise_dim() const override { return p_.m + 1; }
    AuxState initial_aux(std::size_t batch) const override;
    Coefficients coefficients(std::size_t i, double t, const AuxState& aux) const override;
    void step_aux(AuxState& aux, std::size_t i, double t, double dt, const Matrix& dB) const override;
    std::size_t extra_feature_count() const override { return 1; }
    /// short rate
    Matrix extra_features(const AuxState& aux, std::size_t batch) const override;
    const VasicekParams& params() const noexcept { return p_; }

private:
    VasicekParams p_;
    mutable std::mutex mutex_;
    mutable std::map<double, std::pair<std::shared_ptr<const Matrix>, std::shared_ptr<const Matrix>>> cache_;
};

// ---------------------------------------------------------------------------------------------
// Euler steps. X, p, Y, p2 are (b,1); controls are (b,d); dB is (b,d) with variance dt.

struct WealthAdjoint {
    diff::Value wealth;
    diff::Value adjoint;
};

/// Next wealth and adjoint for control pi (in K) and integrand q.
WealthAdjoint step_wealth_adjoint(diff::Value X, diff::Value p, diff::Value pi, diff::Value q,
                                  const Coefficients& c, diff::Value dB, double dt);
diff::Value step_wealth(diff::Value X, diff::Value pi, const Coefficients& c, diff::Value dB, double dt);

struct DualAdjoint {
    diff::Value state;
    diff::Value adjoint;
};

/// Next dual state and dual adjoint for dual control v (in the dual domain), support value delta (b,1)
/// and integrand q2.
DualAdjoint step_dual_adjoint(diff::Value Y, diff::Value p2, diff::Value v, diff::Value delta, diff::Value q2,
                              const Coefficients& c, diff::Value dB, double dt);

/// Differentiable coefficient constants on a tape.
diff::Value r_of(diff::Tape& tape, const Coefficients& c);
diff::Value theta_of(diff::Tape& tape, const Coefficients& c);

// Matrix-valued versions of the same recursions, for direct checks.
Matrix step_wealth(const Matrix& X, const Matrix& pi, const Coefficients& c, const Matrix& dB, double dt);
Matrix step_adjoint(const Matrix& p, const Matrix& pi, const Matrix& q, const Coefficients& c, const Matrix& dB,
                    double dt);
Matrix step_dual(const Matrix& Y, const Matrix& v, const Matrix& delta, const Coefficients& c, const Matrix& dB,
                 double dt);

}  // namespace dsmp
