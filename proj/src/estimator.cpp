#include "mww/estimator.hpp"

#include "mww/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

namespace mww {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// log det of a symmetric matrix after scaling to unit diagonal; nullopt when
// the matrix is not numerically positive definite.
std::optional<double> log_det_spd(const Eigen::MatrixXd& a, Eigen::MatrixXd* inverse = nullptr) {
    const Eigen::VectorXd diag = a.diagonal();
    if (!(diag.array() > 0.0).all() || !diag.allFinite()) return std::nullopt;
    const Eigen::VectorXd inv_sd = diag.cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd scaled = inv_sd.asDiagonal() * a * inv_sd.asDiagonal();
    Eigen::LLT<Eigen::MatrixXd> llt(scaled);
    if (llt.info() != Eigen::Success) return std::nullopt;
    const Eigen::VectorXd l_diag = llt.matrixLLT().diagonal();
    if ((l_diag.array() <= 1e-150).any()) return std::nullopt;
    if (inverse) {
        const Eigen::MatrixXd scaled_inv = llt.solve(Eigen::MatrixXd::Identity(a.rows(), a.cols()));
        *inverse = inv_sd.asDiagonal() * scaled_inv * inv_sd.asDiagonal();
    }
    return diag.array().log().sum() + 2.0 * l_diag.array().log().sum();
}

std::string pair_name(Eigen::Index l, Eigen::Index m) {
    return "(" + std::to_string(l) + "," + std::to_string(m) + ")";
}

// Per-channel least-squares slope of log2(I_ll(j)/n_j) on j, weighted by n_j,
// halved: the univariate log-scale regression estimate of d.
Eigen::VectorXd regression_start(const Scalogram& scal) {
    const Eigen::Index p = scal.channels();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(p);
    for (Eigen::Index l = 0; l < p; ++l) {
        double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (int j = scal.j0(); j <= scal.j1(); ++j) {
            const double v = scal.at(j)(l, l);
            if (!(v > 0.0)) continue;
            const double w = static_cast<double>(scal.count(j));
            const double y = std::log2(v / w);
            sw += w;
            sx += w * j;
            sy += w * y;
            sxx += w * j * j;
            sxy += w * j * y;
        }
        const double denom = sw * sxx - sx * sx;
        if (sw > 0 && denom > 0) out[l] = 0.5 * (sw * sxy - sx * sy) / denom;
    }
    return out;
}

}  // namespace

Scalogram::Scalogram(int j0, std::vector<Eigen::MatrixXd> matrices, std::vector<Eigen::Index> counts)
    : j0_(j0), matrices_(std::move(matrices)), counts_(std::move(counts)) {
    if (matrices_.empty()) throw RangeError("scalogram needs at least one scale");
    if (matrices_.size() != counts_.size()) throw RangeError("one coefficient count per scale is required");
    const Eigen::Index p = matrices_.front().rows();
    double weighted = 0.0;
    log_abs_.reserve(matrices_.size());
    for (std::size_t i = 0; i < matrices_.size(); ++i) {
        if (matrices_[i].rows() != p || matrices_[i].cols() != p)
            throw RangeError("scalogram matrices must share one square shape");
        if (counts_[i] < 1) throw RangeError("scale " + std::to_string(j0_ + i) + " holds no coefficient");
        total_ += counts_[i];
        weighted += static_cast<double>(j0_ + static_cast<int>(i)) * static_cast<double>(counts_[i]);
        log_abs_.push_back(matrices_[i].cwiseAbs().array().log().matrix());
    }
    mean_scale_ = weighted / static_cast<double>(total_);
}

Eigen::MatrixXd Scalogram::rescaled(int scale, const Eigen::VectorXd& d) const {
    const Eigen::MatrixXd& raw = at(scale);
    const Eigen::MatrixXd& logs = log_abs_.at(scale - j0_);
    const Eigen::Index p = raw.rows();
    Eigen::MatrixXd out(p, p);
    const double step = scale * std::numbers::ln2;
    for (Eigen::Index m = 0; m < p; ++m)
        for (Eigen::Index l = 0; l < p; ++l) {
            const double v = raw(l, m);
            out(l, m) = v == 0.0 ? 0.0 : std::copysign(std::exp(logs(l, m) - step * (d[l] + d[m])), v);
        }
    return out;
}

int smoothness_rule_j0(Eigen::Index length, double beta) {
    if (length < 2) throw ConfigError("series length must be at least 2");
    if (!(beta > 0.0)) throw ConfigError("beta must be positive");
    const double j = std::round(std::log2(static_cast<double>(length)) / (1.0 + 2.0 * beta));
    return std::max(1, static_cast<int>(j));
}

ScaleRange resolve_scales(Eigen::Index length, Eigen::Index channels, const WaveletSpec& spec,
                          const EstimationConfig& config) {
    const int feasible = max_feasible_scale(length, spec, 1);
    if (feasible < 1)
        throw InsufficientDataError("series of length " + std::to_string(length) +
                                        " is shorter than the wavelet support",
                                    0);
    if (config.j0 < 1) throw RangeError("j0 must be at least 1");
    ScaleRange out;
    out.j0 = config.j0;
    out.requested_j1 = config.j1 ? *config.j1 : max_feasible_scale(length, spec, channels);
    out.j1 = std::min(out.requested_j1, feasible);
    if (out.j0 > feasible)
        throw InsufficientDataError("j0 = " + std::to_string(out.j0) + " exceeds the largest scale with a coefficient (" +
                                        std::to_string(feasible) + ")",
                                    feasible);
    if (out.j1 <= out.j0)
        throw RangeError("need j0 < j1 after clamping, got j0 = " + std::to_string(out.j0) +
                         ", j1 = " + std::to_string(out.j1));
    Eigen::Index n = 0;
    for (int j = out.j0; j <= out.j1; ++j) n += coefficient_count(length, j, spec);
    if (n < channels)
        throw RangeError("scales " + std::to_string(out.j0) + ".." + std::to_string(out.j1) + " hold " +
                         std::to_string(n) + " coefficients, fewer than " + std::to_string(channels) + " channels");
    return out;
}

Scalogram scalogram(const WaveletPyramid& pyramid, int j0, int j1) {
    if (j0 < 1 || j1 < j0) throw RangeError("empty scale range " + std::to_string(j0) + ".." + std::to_string(j1));
    if (j1 > pyramid.max_scale())
        throw RangeError("pyramid stops at scale " + std::to_string(pyramid.max_scale()) + ", requested " +
                         std::to_string(j1));
    std::vector<Eigen::MatrixXd> matrices;
    std::vector<Eigen::Index> counts;
    for (int j = j0; j <= j1; ++j) {
        const Eigen::MatrixXd& w = pyramid.level(j);
        Eigen::MatrixXd i = w.transpose() * w;
        i = 0.5 * (i + i.transpose()).eval();
        matrices.push_back(std::move(i));
        counts.push_back(w.rows());
    }
    return Scalogram(j0, std::move(matrices), std::move(counts));
}

Eigen::MatrixXd g_hat(const Scalogram& scal, const Eigen::VectorXd& d) {
    if (d.size() != scal.channels()) throw ConfigError("d has the wrong number of channels");
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(d.size(), d.size());
    for (int j = scal.j0(); j <= scal.j1(); ++j) g += scal.rescaled(j, d);
    return g / static_cast<double>(scal.total());
}

double whittle_likelihood(const Scalogram& scal, const Eigen::MatrixXd& G, const Eigen::VectorXd& d) {
    if (G.rows() != scal.channels() || G.cols() != scal.channels() || d.size() != scal.channels())
        throw ConfigError("G and d must match the scalogram's channel count");
    Eigen::MatrixXd g_inv;
    const auto log_det = log_det_spd(G, &g_inv);
    if (!log_det) throw LikelihoodError("G is singular or not positive definite");
    // With Lambda_j = diag(2^{j d}):
    //   log det(Lambda_j G Lambda_j) = log det G + 2 j log(2) sum d,
    //   tr((Lambda_j G Lambda_j)^{-1} I(j)) = tr(G^{-1} Lambda_j^{-1} I(j) Lambda_j^{-1}).
    double total = 0.0;
    const double sum_d = d.sum();
    for (int j = scal.j0(); j <= scal.j1(); ++j) {
        const double nj = static_cast<double>(scal.count(j));
        total += nj * (*log_det + 2.0 * j * std::numbers::ln2 * sum_d);
        total += (g_inv.cwiseProduct(scal.rescaled(j, d))).sum();
    }
    return total / static_cast<double>(scal.total());
}

double objective_R(const Scalogram& scal, const Eigen::VectorXd& d) {
    const auto log_det = log_det_spd(g_hat(scal, d));
    if (!log_det) return kInf;
    return *log_det + 2.0 * std::numbers::ln2 * scal.mean_scale() * d.sum();
}

double objective_R(const Scalogram& scal, const Eigen::VectorXd& d, Eigen::VectorXd& gradient) {
    const Eigen::Index p = scal.channels();
    if (d.size() != p) throw ConfigError("d has the wrong number of channels");
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(p, p);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(p, p);
    for (int j = scal.j0(); j <= scal.j1(); ++j) {
        const Eigen::MatrixXd r = scal.rescaled(j, d);
        g += r;
        h += j * r;
    }
    const double n = static_cast<double>(scal.total());
    g /= n;
    h *= -std::numbers::ln2 / n;
    Eigen::MatrixXd g_inv;
    const auto log_det = log_det_spd(g, &g_inv);
    if (!log_det) return kInf;
    const double penalty = 2.0 * std::numbers::ln2 * scal.mean_scale();
    // dG/dd_l touches row and column l only, so tr(G^{-1} dG/dd_l) = 2 (G^{-1} o H) row sum.
    gradient = 2.0 * g_inv.cwiseProduct(h).rowwise().sum();
    gradient.array() += penalty;
    return *log_det + penalty * d.sum();
}

DEstimate estimate_d(const Scalogram& scal, const WaveletSpec& spec, const EstimationConfig& config) {
    const Eigen::Index p = scal.channels();
    if (scal.j1() == scal.j0())
        throw ConfigError("R(d) is flat in d on a single scale; need j0 < j1");
    if (scal.total() < p)
        throw ConfigError("n = " + std::to_string(scal.total()) + " coefficients for " + std::to_string(p) +
                          " channels");
    if (config.multi_starts < 1) throw ConfigError("at least one start is required");
    const double lower = config.box_lower;
    const double upper = config.box_upper ? *config.box_upper : spec.vanishing_moments();
    if (!(lower < upper)) throw ConfigError("empty search box");

    // Starts strictly inside the box, away from the excluded lower end.
    const double margin = std::min(0.01, 0.25 * (upper - lower));
    auto clamp_in = [&](Eigen::VectorXd x) {
        return Eigen::VectorXd(x.cwiseMax(lower + margin).cwiseMin(upper - margin));
    };

    DEstimate out;
    const Eigen::VectorXd base = clamp_in(regression_start(scal));
    std::mt19937_64 rng(config.jitter_seed);
    std::uniform_real_distribution<double> jitter(-config.start_jitter, config.start_jitter);
    out.starts.push_back(base);
    for (int s = 1; s < config.multi_starts; ++s) {
        Eigen::VectorXd x = base;
        for (Eigen::Index l = 0; l < p; ++l) x[l] += jitter(rng);
        out.starts.push_back(clamp_in(std::move(x)));
    }

    MinimizerResult best;
    best.value = kInf;
    bool have_best = false;
    auto consider = [&](const MinimizerResult& r) {
        out.iterations += r.iterations;
        out.evaluations += r.evaluations;
        if (!have_best || r.value < best.value) {
            best = r;
            have_best = true;
        }
    };

    if (p <= config.max_simplex_dimension) {
        const Objective f = [&](const Eigen::VectorXd& x) {
            if ((x.array() <= lower).any() || (x.array() > upper).any()) return kInf;
            return objective_R(scal, x);
        };
        for (const auto& start : out.starts) consider(nelder_mead(f, start, config.optimizer));
        // A fresh simplex at the winner guards against a collapsed simplex.
        if (std::isfinite(best.value)) {
            MinimizerResult polish = nelder_mead(f, best.x, config.optimizer);
            const bool first_converged = best.converged;
            consider(polish);
            best.converged = polish.converged || first_converged;
        }
    } else {
        const ObjectiveWithGradient f = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
            return objective_R(scal, x, grad);
        };
        const Eigen::VectorXd lo = Eigen::VectorXd::Constant(p, lower + 1e-9);
        const Eigen::VectorXd hi = Eigen::VectorXd::Constant(p, upper);
        for (const auto& start : out.starts) consider(bfgs_box(f, start, lo, hi, config.optimizer));
    }

    if (!std::isfinite(best.value)) throw LikelihoodError("G_hat(d) is singular at every start");
    out.d = MemoryParams(best.x);
    out.objective = best.value;
    out.converged = best.converged;
    return out;
}

OmegaEstimate estimate_omega(const Scalogram& scal, const MemoryParams& d_hat, const WaveletSpec& spec,
                             const EstimationConfig& config) {
    const Eigen::Index p = scal.channels();
    if (d_hat.size() != p) throw ConfigError("d has the wrong number of channels");
    OmegaEstimate out;
    out.g_hat = g_hat(scal, d_hat.values());
    out.omega = Eigen::MatrixXd::Constant(p, p, kNaN);
    out.correlation = Eigen::MatrixXd::Constant(p, p, kNaN);

    for (Eigen::Index m = 0; m < p; ++m)
        for (Eigen::Index l = 0; l <= m; ++l) {
            const double diff = d_hat[l] - d_hat[m];
            const double sum = d_hat[l] + d_hat[m];
            const double c = phase_cosine(diff);
            if (c == 0.0) {
                out.flags.push_back({PairFlag::Kind::undefined_phase, l, m,
                                     "pair " + pair_name(l, m) + ": cos(pi (d_l - d_m)/2) is zero"});
                continue;
            }
            if (l != m && std::abs(c) < config.degeneracy_threshold)
                out.flags.push_back({PairFlag::Kind::degenerate_phase, l, m,
                                     "pair " + pair_name(l, m) + ": |cos(pi (d_l - d_m)/2)| = " +
                                         std::to_string(std::abs(c)) + " is near zero"});
            if (!k_domain_contains(sum, spec)) {
                out.flags.push_back({PairFlag::Kind::outside_k_domain, l, m,
                                     "pair " + pair_name(l, m) + ": d_l + d_m = " + std::to_string(sum) +
                                         " is outside the domain of K"});
                continue;
            }
            const double value = 2.0 * std::numbers::pi * out.g_hat(l, m) / (c * k_integral(sum, spec));
            out.omega(l, m) = out.omega(m, l) = value;
        }

    for (Eigen::Index l = 0; l < p; ++l) {
        const double v = out.omega(l, l);
        if (!(std::isfinite(v) && v > 0.0)) {
            if (!std::isnan(v))
                out.flags.push_back({PairFlag::Kind::invalid_variance, l, l,
                                     "channel " + std::to_string(l) + ": estimated long-run variance " +
                                         std::to_string(v) + " is not positive"});
            out.omega(l, l) = kNaN;
        }
    }
    for (Eigen::Index m = 0; m < p; ++m)
        for (Eigen::Index l = 0; l <= m; ++l) {
            const double r = out.omega(l, m) / std::sqrt(out.omega(l, l) * out.omega(m, m));
            out.correlation(l, m) = out.correlation(m, l) = r;
            if (std::isfinite(r) && std::abs(r) > 1.0)
                out.flags.push_back({PairFlag::Kind::correlation_out_of_range, l, m,
                                     "pair " + pair_name(l, m) + ": correlation " + std::to_string(r) +
                                         " lies outside [-1, 1]"});
        }
    return out;
}

MwwEstimate estimate(const TimeSeriesPanel& panel, const WaveletSpec& spec, const EstimationConfig& config) {
    MwwEstimate out;
    out.scales = resolve_scales(panel.length(), panel.channels(), spec, config);
    const WaveletPyramid pyramid = dwt_pyramid(panel, spec, out.scales.j1);
    const Scalogram scal = scalogram(pyramid, out.scales.j0, out.scales.j1);
    const DEstimate d = estimate_d(scal, spec, config);
    OmegaEstimate omega = estimate_omega(scal, d.d, spec, config);

    out.d = d.d;
    out.objective = d.objective;
    out.iterations = d.iterations;
    out.converged = d.converged;
    out.g_hat = std::move(omega.g_hat);
    out.omega = std::move(omega.omega);
    out.correlation = std::move(omega.correlation);
    out.flags = std::move(omega.flags);

    if (out.scales.j1 != out.scales.requested_j1)
        out.warnings.push_back("j1 = " + std::to_string(out.scales.requested_j1) +
                               " has no coefficients; clamped to " + std::to_string(out.scales.j1));
    if (!out.converged) out.warnings.push_back("optimizer stopped before meeting its tolerance");
    for (const auto& flag : out.flags) out.warnings.push_back(flag.message);
    return out;
}

std::vector<MwwEstimate> estimate_univariate_each(const TimeSeriesPanel& panel, const WaveletSpec& spec,
                                                  const EstimationConfig& config) {
    // The scale range is fixed from the full panel so every channel sees the
    // same scales as the joint estimate.
    const ScaleRange scales = resolve_scales(panel.length(), panel.channels(), spec, config);
    EstimationConfig single = config;
    single.j0 = scales.j0;
    single.j1 = scales.j1;
    std::vector<MwwEstimate> out;
    out.reserve(static_cast<std::size_t>(panel.channels()));
    for (Eigen::Index l = 0; l < panel.channels(); ++l) {
        MwwEstimate e = estimate(panel.select(l), spec, single);
        e.scales.requested_j1 = scales.requested_j1;
        out.push_back(std::move(e));
    }
    return out;
}

const char* to_string(PairFlag::Kind kind) {
    switch (kind) {
        case PairFlag::Kind::degenerate_phase: return "degenerate_phase";
        case PairFlag::Kind::undefined_phase: return "undefined_phase";
        case PairFlag::Kind::outside_k_domain: return "outside_k_domain";
        case PairFlag::Kind::invalid_variance: return "invalid_variance";
        case PairFlag::Kind::correlation_out_of_range: return "correlation_out_of_range";
    }
    return "unknown";
}

}  // namespace mww
