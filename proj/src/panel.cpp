#include "mww/panel.hpp"

#include "mww/errors.hpp"

namespace mww {

TimeSeriesPanel::TimeSeriesPanel(Eigen::MatrixXd samples, std::vector<std::string> names)
    : samples_(std::move(samples)), names_(std::move(names)) {
    if (!samples_.allFinite()) throw ConfigError("panel contains non-finite samples");
    if (names_.empty()) {
        for (Eigen::Index c = 0; c < samples_.cols(); ++c) names_.push_back("X" + std::to_string(c + 1));
    } else if (static_cast<Eigen::Index>(names_.size()) != samples_.cols()) {
        throw ConfigError("panel has " + std::to_string(samples_.cols()) + " channels but " +
                          std::to_string(names_.size()) + " names");
    }
}

TimeSeriesPanel TimeSeriesPanel::select(Eigen::Index index) const {
    return TimeSeriesPanel(samples_.col(index), {names_[index]});
}

TimeSeriesPanel TimeSeriesPanel::demeaned() const {
    Eigen::MatrixXd centred = samples_.rowwise() - samples_.colwise().mean();
    return TimeSeriesPanel(std::move(centred), names_);
}

}  // namespace mww
