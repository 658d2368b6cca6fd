#include "mww/pyramid.hpp"

#include "mww/errors.hpp"

#include <string>

namespace mww {

const Eigen::MatrixXd& WaveletPyramid::level(int scale) const {
    if (scale < 1 || scale > max_scale())
        throw RangeError("scale " + std::to_string(scale) + " outside pyramid range [1, " +
                         std::to_string(max_scale()) + "]");
    return details[scale - 1];
}

Eigen::Index coefficient_count(Eigen::Index length, int scale, const WaveletSpec& spec) {
    if (scale < 1) return 0;
    const Eigen::Index stride = Eigen::Index{1} << scale;
    const Eigen::Index span = (stride - 1) * spec.support_length() + 1;
    if (length < span) return 0;
    return (length - span) / stride + 1;
}

int max_feasible_scale(Eigen::Index length, const WaveletSpec& spec, Eigen::Index min_count) {
    int j = 0;
    while (j < 62 && coefficient_count(length, j + 1, spec) >= std::max<Eigen::Index>(min_count, 1)) ++j;
    return j;
}

WaveletPyramid dwt_pyramid(const TimeSeriesPanel& panel, const WaveletSpec& spec, int j_max) {
    const int feasible = max_feasible_scale(panel.length(), spec);
    if (j_max < 1 || j_max > feasible)
        throw InsufficientDataError("series of length " + std::to_string(panel.length()) +
                                        " supports scales 1.." + std::to_string(feasible) +
                                        ", requested " + std::to_string(j_max),
                                    feasible);

    const auto& h = spec.filters().low_pass;
    const auto& g = spec.filters().high_pass;
    const Eigen::Index taps = static_cast<Eigen::Index>(h.size());

    WaveletPyramid out;
    out.source_length = panel.length();
    out.spec = spec;
    out.details.reserve(j_max);

    Eigen::MatrixXd approx = panel.samples();
    for (int j = 1; j <= j_max; ++j) {
        const Eigen::Index count = (approx.rows() - taps) / 2 + 1;
        Eigen::MatrixXd next = Eigen::MatrixXd::Zero(count, approx.cols());
        Eigen::MatrixXd detail = Eigen::MatrixXd::Zero(count, approx.cols());
        for (Eigen::Index c = 0; c < approx.cols(); ++c) {
            const double* a = approx.col(c).data();
            double* lo = next.col(c).data();
            double* hi = detail.col(c).data();
            for (Eigen::Index k = 0; k < count; ++k) {
                const double* window = a + 2 * k;
                double sl = 0.0, sh = 0.0;
                for (Eigen::Index t = 0; t < taps; ++t) {
                    sl += h[t] * window[t];
                    sh += g[t] * window[t];
                }
                lo[k] = sl;
                hi[k] = sh;
            }
        }
        out.details.push_back(std::move(detail));
        approx = std::move(next);
    }
    return out;
}

}  // namespace mww
