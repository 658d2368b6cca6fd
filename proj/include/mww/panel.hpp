#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

namespace mww {

/// N x p matrix of samples: one row per time point, one column per channel.
class TimeSeriesPanel {
public:
    TimeSeriesPanel() = default;
    /// Throws ConfigError on non-finite samples or a name count mismatch.
    /// Missing names default to "X1".."Xp".
    explicit TimeSeriesPanel(Eigen::MatrixXd samples, std::vector<std::string> names = {});

    Eigen::Index length() const noexcept { return samples_.rows(); }
    Eigen::Index channels() const noexcept { return samples_.cols(); }
    const Eigen::MatrixXd& samples() const noexcept { return samples_; }
    auto channel(Eigen::Index index) const { return samples_.col(index); }
    const std::vector<std::string>& names() const noexcept { return names_; }

    /// Panel restricted to one channel.
    TimeSeriesPanel select(Eigen::Index index) const;
    /// Panel with each channel centred on its sample mean.
    TimeSeriesPanel demeaned() const;

private:
    Eigen::MatrixXd samples_;
    std::vector<std::string> names_;
};

}  // namespace mww
