#pragma once

#include "mww/panel.hpp"
#include "mww/wavelet.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <vector>

namespace mww {

/// Vector d of long-memory exponents, one per channel.
class MemoryParams {
public:
    MemoryParams() = default;
    /// Throws ConfigError on non-finite entries.
    explicit MemoryParams(Eigen::VectorXd d);

    Eigen::Index size() const noexcept { return d_.size(); }
    double operator[](Eigen::Index i) const { return d_[i]; }
    const Eigen::VectorXd& values() const noexcept { return d_; }

    /// Checks d_l <= M and d_l > (1 + beta)/2 - alpha for every channel.
    bool admissible(const WaveletSpec& spec, double beta = 2.0) const;

private:
    Eigen::VectorXd d_;
};

/// Long-run covariance (fractal connectivity) Omega: symmetric positive definite.
class LongRunCov {
public:
    LongRunCov() = default;
    /// Throws CovarianceError unless omega is symmetric positive definite.
    explicit LongRunCov(Eigen::MatrixXd omega);

    /// Unit diagonal, every off-diagonal entry equal to rho.
    static LongRunCov equicorrelated(Eigen::Index channels, double rho);

    Eigen::Index size() const noexcept { return omega_.rows(); }
    const Eigen::MatrixXd& matrix() const noexcept { return omega_; }
    double operator()(Eigen::Index l, Eigen::Index m) const { return omega_(l, m); }
    /// Omega_lm / sqrt(Omega_ll Omega_mm).
    Eigen::MatrixXd correlation() const;
    /// Lower Cholesky factor.
    const Eigen::MatrixXd& cholesky() const noexcept { return chol_; }

private:
    Eigen::MatrixXd omega_;
    Eigen::MatrixXd chol_;
};

/// Smoothness class H(beta, L) of the short-memory spectral factor.
struct HolderParams {
    double beta = 2.0;
    double L = 1.0;

    /// Throws ConfigError unless 0 < beta <= 2 and L > 0.
    void validate() const;
};

/// Multivariate ARFIMA(0, d, 0) with innovation covariance Omega.
struct ArfimaSpec {
    MemoryParams d;
    LongRunCov omega;
    Eigen::Index length = 512;
    /// Number of MA(inf) weights kept; 0 selects 10 * length.
    Eigen::Index truncation = 0;
    Eigen::Index burn_in = 0;
    std::uint64_t seed = 0;
    /// When set, d_l >= M is rejected.
    std::optional<int> vanishing_moments;
    /// Optional per-channel AR(1) coefficient applied after fractional
    /// filtering; empty means off.
    Eigen::VectorXd ar1;

    Eigen::Index effective_truncation() const { return truncation > 0 ? truncation : 10 * length; }
};

/// Number of integrations D = floor(d + 1/2), so that d - D lies in [-1/2, 1/2).
int integration_order(double d);

/// MA(inf) weights psi_0..psi_{count-1} of (1 - L)^(-d):
/// psi_0 = 1, psi_j = psi_{j-1} (j - 1 + d) / j.
std::vector<double> frac_diff_coeffs(double d, Eigen::Index count);

/// Draws a length-N panel. Each channel's stationary part d_l - D_l is a
/// truncated MA(inf) of Gaussian innovations with covariance Omega; it is
/// then summed D_l times (or differenced -D_l times). Deterministic in seed.
TimeSeriesPanel simulate_arfima(const ArfimaSpec& spec);

/// cos(pi * diff / 2), exactly zero when diff is an odd integer.
double phase_cosine(double diff);

enum class ApproximationOrder { first, second };

/// Model wavelet covariance Cov(W_{j,k}(l), W_{j,k}(m)) for a process whose
/// cross-spectral density is (1/2pi) Omega_lm (1-e^{-i lambda})^{-d_l}
/// (1-e^{i lambda})^{-d_m}:
///   Omega_lm 2^{j(d_l+d_m)} cos(pi (d_l-d_m)/2) K(d_l+d_m) / (2 pi).
/// The second order form uses K_j in place of K.
double model_wavelet_cov(int scale, Eigen::Index l, Eigen::Index m, const MemoryParams& d,
                         const LongRunCov& omega, const WaveletSpec& spec,
                         ApproximationOrder order = ApproximationOrder::first);

}  // namespace mww
