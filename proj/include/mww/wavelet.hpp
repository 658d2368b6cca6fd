#pragma once

#include <numbers>
#include <vector>

namespace mww {

/// Orthonormal two-channel filter bank of a Daubechies wavelet.
struct FilterPair {
    std::vector<double> low_pass;   ///< h_0..h_{2M-1}, sums to sqrt(2)
    std::vector<double> high_pass;  ///< g_n = (-1)^n h_{2M-1-n}
};

/// Frequency grid used to integrate |psi_hat|^2 against power-law weights.
///
/// The half line is split into three pieces: [0, origin_cutoff] where
/// |psi_hat|^2 behaves like c*lambda^(2M) and is integrated analytically,
/// [origin_cutoff, max_frequency] covered by geometric blocks (ratio
/// 2^(1/blocks_per_octave)) cut into Gauss-Legendre panels no wider than
/// panel_width, and a tail extrapolated geometrically from the last two
/// octaves.
struct QuadratureConfig {
    double max_frequency = 32768.0;
    double origin_cutoff = 1.0 / 1024.0;
    double panel_width = std::numbers::pi / 4.0;
    int nodes_per_panel = 8;
    int blocks_per_octave = 8;
};

class WaveletSpec {
public:
    /// Daubechies wavelet with M vanishing moments, 1 <= M <= 10.
    static WaveletSpec daubechies(int vanishing_moments, int cascade_depth = 16,
                                  QuadratureConfig quadrature = {});

    int vanishing_moments() const noexcept { return vanishing_moments_; }
    /// Fourier decay exponent alpha of |psi_hat|.
    double regularity() const noexcept { return regularity_; }
    /// psi is supported on [0, support_length()], T = 2M - 1.
    int support_length() const noexcept { return 2 * vanishing_moments_ - 1; }
    int filter_length() const noexcept { return 2 * vanishing_moments_; }
    int cascade_depth() const noexcept { return cascade_depth_; }
    const QuadratureConfig& quadrature() const noexcept { return quadrature_; }
    const FilterPair& filters() const noexcept { return filters_; }

private:
    WaveletSpec() = default;

    int vanishing_moments_ = 0;
    double regularity_ = 0.0;
    int cascade_depth_ = 16;
    QuadratureConfig quadrature_;
    FilterPair filters_;
};

/// Daubechies filters by spectral factorization of the half-band polynomial.
/// Throws UnsupportedOrderError outside 1 <= M <= 10.
FilterPair daubechies_filters(int vanishing_moments);

/// Tabulated Fourier decay exponent of the Daubechies wavelet of order M.
double daubechies_regularity(int vanishing_moments);

/// |psi_hat(lambda)|^2 with psi_hat(lambda) = int psi(t) exp(-i lambda t) dt,
/// evaluated through the infinite product of the filter transfer functions.
/// The product keeps cascade_depth factors past the one where
/// |lambda| / 2^k drops below 1.
double psi_hat_sq(double lambda, const WaveletSpec& spec);

/// Whether delta lies in (-alpha, M), where K(delta) is guaranteed finite.
bool k_domain_contains(double delta, const WaveletSpec& spec);

/// K(delta) = int_R |lambda|^(-delta) |psi_hat(lambda)|^2 d lambda.
/// K(0) = 2 pi. Throws DomainError outside (-alpha, M).
double k_integral(double delta, const WaveletSpec& spec);

/// K_j(d_l, d_m) = int_R |lambda|^(-(d_l+d_m)) cos(2^(-j) lambda (d_l-d_m)/2)
///                 |psi_hat(lambda)|^2 d lambda.
/// Equals K(d_l + d_m) when d_l == d_m and tends to it as j grows.
double k_integral_at_scale(int scale, double d_l, double d_m, const WaveletSpec& spec);

}  // namespace mww
