#pragma once

#include "mww/lrd_model.hpp"
#include "mww/optimize.hpp"
#include "mww/panel.hpp"
#include "mww/pyramid.hpp"
#include "mww/wavelet.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mww {

/// Unnormalized scalogram I(j) = sum_k W_{j,k} W_{j,k}^T over j0..j1.
class Scalogram {
public:
    /// matrices[i] and counts[i] belong to scale j0 + i.
    Scalogram(int j0, std::vector<Eigen::MatrixXd> matrices, std::vector<Eigen::Index> counts);

    int j0() const noexcept { return j0_; }
    int j1() const noexcept { return j0_ + static_cast<int>(matrices_.size()) - 1; }
    Eigen::Index channels() const noexcept { return matrices_.front().rows(); }
    const Eigen::MatrixXd& at(int scale) const { return matrices_.at(scale - j0_); }
    Eigen::Index count(int scale) const { return counts_.at(scale - j0_); }
    /// n = sum_j n_j.
    Eigen::Index total() const noexcept { return total_; }
    /// <J> = (1/n) sum_j j n_j.
    double mean_scale() const noexcept { return mean_scale_; }

    /// Lambda_j^{-1} I(j) Lambda_j^{-1} evaluated through log|I| to avoid
    /// overflow of 2^{-j(d_l+d_m)}.
    Eigen::MatrixXd rescaled(int scale, const Eigen::VectorXd& d) const;

private:
    int j0_;
    std::vector<Eigen::MatrixXd> matrices_;
    std::vector<Eigen::Index> counts_;
    std::vector<Eigen::MatrixXd> log_abs_;
    Eigen::Index total_ = 0;
    double mean_scale_ = 0.0;
};

struct EstimationConfig {
    int j0 = 1;
    /// Coarsest scale; unset selects the largest j with n_j >= p. Values past
    /// the last scale holding a coefficient are clamped.
    std::optional<int> j1;
    MinimizerOptions optimizer{};
    int multi_starts = 5;
    /// Half-width of the uniform jitter applied to the initializer for the
    /// extra starts.
    double start_jitter = 0.2;
    std::uint64_t jitter_seed = 0;
    double box_lower = -2.0;
    /// Upper end of the search box; unset means M.
    std::optional<double> box_upper;
    /// Pairs with |cos(pi (d_l - d_m)/2)| below this get a degeneracy warning.
    double degeneracy_threshold = 0.1;
    /// Above this dimension the simplex search gives way to projected BFGS.
    int max_simplex_dimension = 10;
};

/// j0 with 2^{j0} = N^{1/(1+2 beta)}, rounded to the nearest integer, at least 1.
int smoothness_rule_j0(Eigen::Index length, double beta);

/// Scales actually used for a series of given length and channel count.
struct ScaleRange {
    int j0 = 1;
    int j1 = 1;
    int requested_j1 = 1;
};

/// Resolves config.j0/j1 against the data. Throws RangeError when fewer than
/// two scales remain or when n < p, InsufficientDataError when no scale has
/// a coefficient.
ScaleRange resolve_scales(Eigen::Index length, Eigen::Index channels, const WaveletSpec& spec,
                          const EstimationConfig& config);

/// Throws RangeError on an empty range or when the pyramid lacks scale j1.
Scalogram scalogram(const WaveletPyramid& pyramid, int j0, int j1);

/// G_hat(d) = (1/n) sum_j Lambda_j(d)^{-1} I(j) Lambda_j(d)^{-1}.
Eigen::MatrixXd g_hat(const Scalogram& scalogram, const Eigen::VectorXd& d);

/// Wavelet Whittle criterion in trace form,
/// (1/n) sum_j [n_j log det(L_j G L_j) + tr((L_j G L_j)^{-1} I(j))].
/// Throws LikelihoodError when G is singular.
double whittle_likelihood(const Scalogram& scalogram, const Eigen::MatrixXd& G, const Eigen::VectorXd& d);

/// Profile criterion R(d) = log det G_hat(d) + 2 log(2) <J> sum_l d_l.
/// Returns +inf when G_hat(d) is singular.
double objective_R(const Scalogram& scalogram, const Eigen::VectorXd& d);
/// Same, also writing dR/dd into gradient (left untouched on +inf).
double objective_R(const Scalogram& scalogram, const Eigen::VectorXd& d, Eigen::VectorXd& gradient);

struct DEstimate {
    MemoryParams d;
    double objective = 0.0;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    std::vector<Eigen::VectorXd> starts;
};

/// Multi-start minimization of R over the box (box_lower, box_upper].
/// Throws ConfigError when j1 == j0 (R is flat) or n < p.
DEstimate estimate_d(const Scalogram& scalogram, const WaveletSpec& spec, const EstimationConfig& config);

struct PairFlag {
    enum class Kind { degenerate_phase, undefined_phase, outside_k_domain, invalid_variance, correlation_out_of_range };
    Kind kind;
    Eigen::Index l;
    Eigen::Index m;
    std::string message;
};

struct OmegaEstimate {
    Eigen::MatrixXd g_hat;
    Eigen::MatrixXd omega;
    Eigen::MatrixXd correlation;
    std::vector<PairFlag> flags;
};

/// Omega_lm = 2 pi G_hat_lm(d) / (cos(pi (d_l - d_m)/2) K(d_l + d_m)).
/// Undefined entries are NaN and flagged. Correlations are not clamped.
OmegaEstimate estimate_omega(const Scalogram& scalogram, const MemoryParams& d_hat, const WaveletSpec& spec,
                             const EstimationConfig& config);

struct MwwEstimate {
    MemoryParams d;
    Eigen::MatrixXd g_hat;
    Eigen::MatrixXd omega;
    Eigen::MatrixXd correlation;
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
    ScaleRange scales;
    std::vector<PairFlag> flags;
    std::vector<std::string> warnings;
};

/// Full pipeline: pyramid, scalogram, d, Omega.
MwwEstimate estimate(const TimeSeriesPanel& panel, const WaveletSpec& spec, const EstimationConfig& config);

/// One univariate estimate per channel, each with the same configuration.
std::vector<MwwEstimate> estimate_univariate_each(const TimeSeriesPanel& panel, const WaveletSpec& spec,
                                                  const EstimationConfig& config);

const char* to_string(PairFlag::Kind kind);

}  // namespace mww
