#include "mww/lrd_model.hpp"

#include "mww/errors.hpp"

#include <Eigen/Cholesky>
#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>
#include <random>
#include <string>

namespace mww {

namespace {

// FFTW's planner is not reentrant; plan creation and destruction are
// serialized, execution is not.
std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

template <class T>
struct FftwBuffer {
    T* data;
    explicit FftwBuffer(std::size_t n) : data(static_cast<T*>(fftw_malloc(sizeof(T) * n))) {
        if (!data) throw std::bad_alloc();
    }
    ~FftwBuffer() { fftw_free(data); }
    FftwBuffer(const FftwBuffer&) = delete;
    FftwBuffer& operator=(const FftwBuffer&) = delete;
};

struct FftwPlan {
    fftw_plan plan;
    explicit FftwPlan(fftw_plan p) : plan(p) {}
    ~FftwPlan() {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    FftwPlan(const FftwPlan&) = delete;
    FftwPlan& operator=(const FftwPlan&) = delete;
};

std::size_t next_pow2(std::size_t n) {
    std::size_t out = 1;
    while (out < n) out <<= 1;
    return out;
}

// out[t] = sum_{k < taps.size()} taps[k] * signal[t + taps.size() - 1 - k]
// for t = 0 .. signal.size() - taps.size().
std::vector<double> valid_convolution(const std::vector<double>& signal, const std::vector<double>& taps) {
    const std::size_t n = signal.size();
    const std::size_t m = taps.size();
    const std::size_t out_len = n - m + 1;
    const std::size_t size = next_pow2(n);
    const std::size_t bins = size / 2 + 1;

    FftwBuffer<double> real(size);
    FftwBuffer<fftw_complex> spec_a(bins);
    FftwBuffer<fftw_complex> spec_b(bins);

    fftw_plan forward_raw, backward_raw;
    {
        std::lock_guard lock(fftw_planner_mutex());
        forward_raw = fftw_plan_dft_r2c_1d(static_cast<int>(size), real.data, spec_a.data, FFTW_ESTIMATE);
        backward_raw = fftw_plan_dft_c2r_1d(static_cast<int>(size), spec_a.data, real.data, FFTW_ESTIMATE);
    }
    FftwPlan forward(forward_raw), backward(backward_raw);

    std::fill(real.data, real.data + size, 0.0);
    std::copy(taps.begin(), taps.end(), real.data);
    fftw_execute_dft_r2c(forward.plan, real.data, spec_b.data);

    std::fill(real.data, real.data + size, 0.0);
    std::copy(signal.begin(), signal.end(), real.data);
    fftw_execute_dft_r2c(forward.plan, real.data, spec_a.data);

    for (std::size_t i = 0; i < bins; ++i) {
        const double re = spec_a.data[i][0] * spec_b.data[i][0] - spec_a.data[i][1] * spec_b.data[i][1];
        const double im = spec_a.data[i][0] * spec_b.data[i][1] + spec_a.data[i][1] * spec_b.data[i][0];
        spec_a.data[i][0] = re;
        spec_a.data[i][1] = im;
    }
    fftw_execute_dft_c2r(backward.plan, spec_a.data, real.data);

    std::vector<double> out(out_len);
    const double scale = 1.0 / static_cast<double>(size);
    for (std::size_t t = 0; t < out_len; ++t) out[t] = real.data[t + m - 1] * scale;
    return out;
}

}  // namespace

MemoryParams::MemoryParams(Eigen::VectorXd d) : d_(std::move(d)) {
    if (!d_.allFinite()) throw ConfigError("memory parameters must be finite");
}

bool MemoryParams::admissible(const WaveletSpec& spec, double beta) const {
    const double lower = (1.0 + beta) / 2.0 - spec.regularity();
    for (Eigen::Index i = 0; i < d_.size(); ++i)
        if (!(d_[i] > lower && d_[i] <= spec.vanishing_moments())) return false;
    return true;
}

LongRunCov::LongRunCov(Eigen::MatrixXd omega) : omega_(std::move(omega)) {
    if (omega_.rows() != omega_.cols() || omega_.rows() == 0)
        throw CovarianceError("long-run covariance must be a non-empty square matrix");
    if (!omega_.allFinite()) throw CovarianceError("long-run covariance has non-finite entries");
    const double scale = omega_.cwiseAbs().maxCoeff();
    if ((omega_ - omega_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw CovarianceError("long-run covariance is not symmetric");
    if ((omega_.diagonal().array() <= 0.0).any())
        throw CovarianceError("long-run covariance has a non-positive diagonal entry");
    Eigen::LLT<Eigen::MatrixXd> llt(omega_);
    if (llt.info() != Eigen::Success) throw CovarianceError("long-run covariance is not positive definite");
    chol_ = llt.matrixL();
    if ((chol_.diagonal().array() <= 1e-12 * std::sqrt(scale)).any())
        throw CovarianceError("long-run covariance is numerically singular");
}

LongRunCov LongRunCov::equicorrelated(Eigen::Index channels, double rho) {
    Eigen::MatrixXd omega = Eigen::MatrixXd::Constant(channels, channels, rho);
    omega.diagonal().setOnes();
    return LongRunCov(std::move(omega));
}

Eigen::MatrixXd LongRunCov::correlation() const {
    const Eigen::VectorXd inv_sd = omega_.diagonal().cwiseSqrt().cwiseInverse();
    return inv_sd.asDiagonal() * omega_ * inv_sd.asDiagonal();
}

void HolderParams::validate() const {
    if (!(beta > 0.0 && beta <= 2.0)) throw ConfigError("Holder exponent beta must lie in (0, 2]");
    if (!(L > 0.0)) throw ConfigError("Holder constant L must be positive");
}

int integration_order(double d) { return static_cast<int>(std::floor(d + 0.5)); }

std::vector<double> frac_diff_coeffs(double d, Eigen::Index count) {
    if (count < 1) throw ConfigError("coefficient count must be at least 1");
    std::vector<double> psi(static_cast<std::size_t>(count));
    psi[0] = 1.0;
    for (Eigen::Index j = 1; j < count; ++j) psi[j] = psi[j - 1] * (static_cast<double>(j) - 1.0 + d) / j;
    return psi;
}

TimeSeriesPanel simulate_arfima(const ArfimaSpec& spec) {
    const Eigen::Index p = spec.d.size();
    const Eigen::Index n = spec.length;
    if (p == 0) throw ConfigError("at least one channel is required");
    if (spec.omega.size() != p)
        throw CovarianceError("long-run covariance is " + std::to_string(spec.omega.size()) + "x" +
                              std::to_string(spec.omega.size()) + " but d has " + std::to_string(p) +
                              " entries");
    if (n < 1) throw ConfigError("sample count must be at least 1");
    const Eigen::Index taps = spec.effective_truncation();
    if (taps < n) throw ConfigError("MA truncation must be at least the sample count");
    if (spec.burn_in < 0) throw ConfigError("burn-in must be non-negative");
    if (spec.ar1.size() != 0 && spec.ar1.size() != p)
        throw ConfigError("AR(1) coefficients must have one entry per channel");
    if (spec.ar1.size() != 0 && (spec.ar1.array().abs() >= 1.0).any())
        throw ConfigError("AR(1) coefficients must lie in (-1, 1)");
    if (spec.vanishing_moments) {
        for (Eigen::Index l = 0; l < p; ++l)
            if (spec.d[l] >= *spec.vanishing_moments)
                throw VanishingMomentError("d[" + std::to_string(l) + "] = " + std::to_string(spec.d[l]) +
                                           " is not below M = " + std::to_string(*spec.vanishing_moments));
    }

    std::vector<int> orders(p);
    Eigen::Index extra = 0;
    for (Eigen::Index l = 0; l < p; ++l) {
        orders[l] = integration_order(spec.d[l]);
        extra = std::max<Eigen::Index>(extra, -orders[l]);
    }
    const Eigen::Index stationary_len = n + spec.burn_in + extra;
    const Eigen::Index draws = stationary_len + taps - 1;

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd z(p, draws);
    for (Eigen::Index t = 0; t < draws; ++t)
        for (Eigen::Index l = 0; l < p; ++l) z(l, t) = normal(rng);
    const Eigen::MatrixXd innovations = spec.omega.cholesky() * z;

    Eigen::MatrixXd out(n, p);
    std::vector<double> u(static_cast<std::size_t>(draws));
    for (Eigen::Index l = 0; l < p; ++l) {
        for (Eigen::Index t = 0; t < draws; ++t) u[t] = innovations(l, t);
        std::vector<double> x = valid_convolution(u, frac_diff_coeffs(spec.d[l] - orders[l], taps));
        if (spec.ar1.size() != 0 && spec.ar1[l] != 0.0)
            for (std::size_t t = 1; t < x.size(); ++t) x[t] += spec.ar1[l] * x[t - 1];
        x.erase(x.begin(), x.begin() + spec.burn_in);
        for (int k = 0; k < orders[l]; ++k)
            for (std::size_t t = 1; t < x.size(); ++t) x[t] += x[t - 1];
        for (int k = 0; k < -orders[l]; ++k) {
            for (std::size_t t = x.size() - 1; t > 0; --t) x[t] -= x[t - 1];
            x.erase(x.begin());
        }
        const std::size_t offset = x.size() - static_cast<std::size_t>(n);
        for (Eigen::Index t = 0; t < n; ++t) out(t, l) = x[offset + t];
    }
    return TimeSeriesPanel(std::move(out));
}

double phase_cosine(double diff) {
    const double r = std::fmod(std::abs(diff), 2.0);
    if (r == 1.0) return 0.0;
    return std::cos(std::numbers::pi * diff / 2.0);
}

double model_wavelet_cov(int scale, Eigen::Index l, Eigen::Index m, const MemoryParams& d,
                         const LongRunCov& omega, const WaveletSpec& spec, ApproximationOrder order) {
    if (scale < 0) throw DomainError("scale index must be non-negative");
    if (l < 0 || m < 0 || l >= d.size() || m >= d.size() || omega.size() != d.size())
        throw ConfigError("channel index out of range");
    const double sum = d[l] + d[m];
    const double diff = d[l] - d[m];
    const double k = order == ApproximationOrder::first ? k_integral(sum, spec)
                                                        : k_integral_at_scale(scale, d[l], d[m], spec);
    return omega(l, m) * std::exp2(scale * sum) * phase_cosine(diff) * k /
           (2.0 * std::numbers::pi);
}

}  // namespace mww
