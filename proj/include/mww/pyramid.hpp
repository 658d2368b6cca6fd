#pragma once

#include "mww/panel.hpp"
#include "mww/wavelet.hpp"

#include <Eigen/Core>

#include <vector>

namespace mww {

/// Detail coefficients W_{j,k}(l) of every channel, scales 1..max_scale().
///
/// Only coefficients whose filter support lies entirely inside the observed
/// samples are kept, so level j holds
///   n_j = max(0, floor((N - (2^j - 1) T - 1) / 2^j) + 1)
/// rows, T = 2M - 1. At j = 1 this is floor((N - T + 1) / 2).
struct WaveletPyramid {
    std::vector<Eigen::MatrixXd> details;  ///< details[j-1] is n_j x p
    Eigen::Index source_length = 0;
    WaveletSpec spec = WaveletSpec::daubechies(1);

    int max_scale() const noexcept { return static_cast<int>(details.size()); }
    Eigen::Index channels() const noexcept {
        return details.empty() ? 0 : details.front().cols();
    }
    const Eigen::MatrixXd& level(int scale) const;
    Eigen::Index count(int scale) const { return level(scale).rows(); }
};

/// Number of fully observed coefficients at scale j for a series of length N.
Eigen::Index coefficient_count(Eigen::Index length, int scale, const WaveletSpec& spec);

/// Largest j with at least min_count coefficients (0 if none).
int max_feasible_scale(Eigen::Index length, const WaveletSpec& spec, Eigen::Index min_count = 1);

/// Mallat pyramid on the samples taken as scale-0 approximation coefficients:
///   a_j[k] = sum_t h_t a_{j-1}[2k + t],  W_{j,k} = sum_t g_t a_{j-1}[2k + t].
/// Throws InsufficientDataError when j_max exceeds the largest scale with a
/// coefficient.
WaveletPyramid dwt_pyramid(const TimeSeriesPanel& panel, const WaveletSpec& spec, int j_max);

}  // namespace mww
