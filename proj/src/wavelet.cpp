#include "mww/wavelet.hpp"

#include "mww/errors.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>

namespace mww {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kMaxOrder = 10;

// Rounded limits of the product estimate sup_xi prod_k |L(2^k xi)| for the
// remainder factor L of the Daubechies low-pass filter.
constexpr std::array<double, kMaxOrder> kRegularity = {
    1.00, 1.34, 1.64, 1.91, 2.17, 2.42, 2.67, 2.91, 3.15, 3.38};

using cplx = std::complex<double>;

double binomial(int n, int k) {
    double out = 1.0;
    for (int i = 1; i <= k; ++i) out = out * (n - k + i) / i;
    return out;
}

// Roots of sum_k coeffs[k] y^k, polished with a few Newton steps.
std::vector<cplx> polynomial_roots(const std::vector<double>& coeffs) {
    const int degree = static_cast<int>(coeffs.size()) - 1;
    if (degree < 1) return {};
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(degree, degree);
    for (int i = 1; i < degree; ++i) companion(i, i - 1) = 1.0;
    for (int i = 0; i < degree; ++i) companion(i, degree - 1) = -coeffs[i] / coeffs[degree];
    Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
    std::vector<cplx> roots;
    for (int i = 0; i < degree; ++i) {
        cplx y = solver.eigenvalues()[i];
        for (int it = 0; it < 8; ++it) {
            cplx value = 0.0, slope = 0.0;
            for (int k = degree; k >= 0; --k) {
                slope = slope * y + value;
                value = value * y + coeffs[k];
            }
            if (std::abs(slope) == 0.0) break;
            y -= value / slope;
        }
        roots.push_back(y);
    }
    return roots;
}

// Half-band factor P(y) = sum_{k<M} C(M-1+k, k) y^k, so that
// |m0(xi)|^2 = cos^{2M}(xi/2) P(sin^2(xi/2)) and |m1(xi)|^2 = |m0(xi + pi)|^2.
// The factored form stays accurate near the zeros of m0.
std::vector<double> half_band_coeffs(int m) {
    std::vector<double> c(static_cast<std::size_t>(m));
    double binom = 1.0;
    for (int k = 0; k < m; ++k) {
        c[static_cast<std::size_t>(k)] = binom;
        binom = binom * (m + k) / (k + 1);
    }
    return c;
}

double horner(const std::vector<double>& c, double y) {
    double acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * y + *it;
    return acc;
}

struct Cascade {
    std::vector<double> half_band;
    int m;
    int depth;

    explicit Cascade(const WaveletSpec& spec)
        : half_band(half_band_coeffs(spec.vanishing_moments())),
          m(spec.vanishing_moments()),
          depth(spec.cascade_depth()) {}

    double low(double xi) const {
        const double c = std::cos(xi / 2.0), s = std::sin(xi / 2.0);
        return std::pow(c * c, m) * horner(half_band, s * s);
    }
    double high(double xi) const {
        const double c = std::cos(xi / 2.0), s = std::sin(xi / 2.0);
        return std::pow(s * s, m) * horner(half_band, c * c);
    }

    double operator()(double lambda) const {
        const double a = std::abs(lambda);
        const int extra = a > 1.0 ? static_cast<int>(std::ceil(std::log2(a))) : 0;
        const int factors = depth + extra;
        double out = high(a / 2.0);
        double xi = a / 4.0;
        for (int k = 0; k < factors; ++k, xi /= 2.0) out *= low(xi);
        return out;
    }
};

std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
    std::vector<double> x(n), w(n);
    for (int i = 0; i < n; ++i) {
        double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = z;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (z * p1 - p0) / (z * z - 1.0);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    return {x, w};
}

constexpr int kMomentTerms = 18;

// Nodes and |psi_hat|^2-weighted quadrature weights on the positive half
// line, grouped in geometric blocks. Each block keeps the moments of
// log(lambda / center) so that power-law weights reduce to a short series.
struct SpectralTable {
    struct Block {
        double log_center;
        std::array<double, kMomentTerms> moments;
        std::size_t first;
        std::size_t last;
    };

    int vanishing_moments;
    int blocks_per_octave;
    double origin_cutoff;
    double origin_coeff;  // |psi_hat(lambda)|^2 ~ origin_coeff * lambda^(2M) near 0
    std::vector<double> lambda;
    std::vector<double> weight;
    std::vector<Block> blocks;
};

SpectralTable build_table(const WaveletSpec& spec) {
    const QuadratureConfig& q = spec.quadrature();
    if (!(q.origin_cutoff > 0.0) || !(q.max_frequency > 4.0 * q.origin_cutoff) ||
        !(q.panel_width > 0.0) || q.nodes_per_panel < 2 || q.blocks_per_octave < 1)
        throw ConfigError("invalid quadrature configuration");

    const Cascade cascade(spec);
    SpectralTable table;
    table.vanishing_moments = spec.vanishing_moments();
    table.blocks_per_octave = q.blocks_per_octave;
    table.origin_cutoff = q.origin_cutoff;
    table.origin_coeff = cascade(q.origin_cutoff) /
                         std::pow(q.origin_cutoff, 2.0 * spec.vanishing_moments());

    const auto [gx, gw] = gauss_legendre(q.nodes_per_panel);
    const int octaves = static_cast<int>(std::ceil(std::log2(q.max_frequency / q.origin_cutoff)));
    const int block_count = octaves * q.blocks_per_octave;
    const double ratio = std::exp2(1.0 / q.blocks_per_octave);

    double lo = q.origin_cutoff;
    for (int b = 0; b < block_count; ++b) {
        const double hi = q.origin_cutoff * std::exp2(static_cast<double>(b + 1) / q.blocks_per_octave);
        SpectralTable::Block block{};
        block.log_center = std::log(lo * std::sqrt(ratio));
        block.first = table.lambda.size();
        const int panels = std::max(1, static_cast<int>(std::ceil((hi - lo) / q.panel_width)));
        const double width = (hi - lo) / panels;
        for (int p = 0; p < panels; ++p) {
            const double a = lo + p * width;
            for (int i = 0; i < q.nodes_per_panel; ++i) {
                const double x = a + 0.5 * width * (gx[i] + 1.0);
                const double w = 0.5 * width * gw[i] * cascade(x);
                table.lambda.push_back(x);
                table.weight.push_back(w);
                const double u = std::log(x) - block.log_center;
                double power = 1.0;
                for (int m = 0; m < kMomentTerms; ++m) {
                    block.moments[m] += w * power;
                    power *= u;
                }
            }
        }
        block.last = table.lambda.size();
        table.blocks.push_back(block);
        lo = hi;
    }
    return table;
}

const SpectralTable& spectral_table(const WaveletSpec& spec) {
    using Key = std::tuple<int, int, double, double, double, int, int>;
    static std::mutex mutex;
    static std::map<Key, std::unique_ptr<const SpectralTable>> cache;

    const QuadratureConfig& q = spec.quadrature();
    const Key key{spec.vanishing_moments(), spec.cascade_depth(), q.max_frequency,
                  q.origin_cutoff, q.panel_width, q.nodes_per_panel, q.blocks_per_octave};
    std::lock_guard lock(mutex);
    auto it = cache.find(key);
    if (it == cache.end())
        it = cache.emplace(key, std::make_unique<const SpectralTable>(build_table(spec))).first;
    return *it->second;
}

// int_0^cutoff lambda^(-delta) c lambda^(2M) d lambda
double origin_part(const SpectralTable& t, double delta) {
    const double e = 2.0 * t.vanishing_moments + 1.0 - delta;
    return t.origin_coeff * std::pow(t.origin_cutoff, e) / e;
}

// Geometric extrapolation of the integral past the last block from the
// masses of the last two octaves.
double tail_estimate(double previous_octave, double last_octave) {
    if (!(previous_octave > 0.0) || !(last_octave > 0.0)) return 0.0;
    const double q = last_octave / previous_octave;
    if (q >= 1.0) return 0.0;
    return last_octave * q / (1.0 - q);
}

void check_domain(double delta, const WaveletSpec& spec) {
    if (!k_domain_contains(delta, spec))
        throw DomainError("K(delta) requires delta in (-alpha, M) = (" +
                          std::to_string(-spec.regularity()) + ", " +
                          std::to_string(spec.vanishing_moments()) + "), got " +
                          std::to_string(delta));
}

}  // namespace

FilterPair daubechies_filters(int vanishing_moments) {
    const int M = vanishing_moments;
    if (M < 1 || M > kMaxOrder)
        throw UnsupportedOrderError("Daubechies order must be in [1, 10], got " + std::to_string(M));

    // Half-band polynomial P(y) = sum_{k<M} C(M-1+k, k) y^k, y = sin^2(xi/2).
    std::vector<double> half_band(M);
    for (int k = 0; k < M; ++k) half_band[k] = binomial(M - 1 + k, k);

    // Minimum-phase factor: for each root y_i, the root of
    // z + 1/z = 2 - 4 y_i inside the unit circle.
    std::vector<cplx> poly{1.0};
    auto multiply_linear = [&poly](cplx root) {
        std::vector<cplx> next(poly.size() + 1, 0.0);
        for (std::size_t i = 0; i < poly.size(); ++i) {
            next[i + 1] += poly[i];
            next[i] -= root * poly[i];
        }
        poly = std::move(next);
    };
    for (const cplx& y : polynomial_roots(half_band)) {
        const cplx b = 2.0 - 4.0 * y;
        const cplx s = std::sqrt(b * b - 4.0);
        cplx z = (b + s) / 2.0;
        if (std::abs(z) > 1.0) z = (b - s) / 2.0;
        multiply_linear(z);
    }
    for (int k = 0; k < M; ++k) multiply_linear(-1.0);

    const int L = 2 * M;
    FilterPair out;
    out.low_pass.resize(L);
    double sum = 0.0;
    for (int n = 0; n < L; ++n) {
        out.low_pass[n] = poly[L - 1 - n].real();
        sum += out.low_pass[n];
    }
    for (double& h : out.low_pass) h *= std::sqrt(2.0) / sum;
    out.high_pass.resize(L);
    for (int n = 0; n < L; ++n)
        out.high_pass[n] = (n % 2 == 0 ? 1.0 : -1.0) * out.low_pass[L - 1 - n];
    return out;
}

double daubechies_regularity(int vanishing_moments) {
    if (vanishing_moments < 1 || vanishing_moments > kMaxOrder)
        throw UnsupportedOrderError("Daubechies order must be in [1, 10], got " +
                                    std::to_string(vanishing_moments));
    return kRegularity[vanishing_moments - 1];
}

WaveletSpec WaveletSpec::daubechies(int vanishing_moments, int cascade_depth,
                                    QuadratureConfig quadrature) {
    if (cascade_depth < 8) throw ConfigError("cascade depth must be at least 8");
    WaveletSpec spec;
    spec.vanishing_moments_ = vanishing_moments;
    spec.filters_ = daubechies_filters(vanishing_moments);
    spec.regularity_ = daubechies_regularity(vanishing_moments);
    spec.cascade_depth_ = cascade_depth;
    spec.quadrature_ = quadrature;
    return spec;
}

double psi_hat_sq(double lambda, const WaveletSpec& spec) {
    return Cascade(spec)(lambda);
}

bool k_domain_contains(double delta, const WaveletSpec& spec) {
    return std::isfinite(delta) && delta > -spec.regularity() && delta < spec.vanishing_moments();
}

double k_integral(double delta, const WaveletSpec& spec) {
    check_domain(delta, spec);
    const SpectralTable& t = spectral_table(spec);

    std::vector<double> block_values(t.blocks.size());
    std::array<double, kMomentTerms> coeff{};
    // exp(-delta u) = sum_m (-delta)^m u^m / m!
    coeff[0] = 1.0;
    for (int m = 1; m < kMomentTerms; ++m) coeff[m] = coeff[m - 1] * (-delta) / m;

    double total = origin_part(t, delta);
    for (std::size_t b = 0; b < t.blocks.size(); ++b) {
        const auto& block = t.blocks[b];
        double series = 0.0;
        for (int m = kMomentTerms - 1; m >= 0; --m) series += coeff[m] * block.moments[m];
        block_values[b] = std::exp(-delta * block.log_center) * series;
        total += block_values[b];
    }

    const std::size_t per = static_cast<std::size_t>(t.blocks_per_octave);
    double last = 0.0, previous = 0.0;
    for (std::size_t i = 0; i < per; ++i) {
        last += block_values[block_values.size() - 1 - i];
        previous += block_values[block_values.size() - 1 - per - i];
    }
    total += tail_estimate(previous, last);
    return 2.0 * total;
}

double k_integral_at_scale(int scale, double d_l, double d_m, const WaveletSpec& spec) {
    if (scale < 0) throw DomainError("scale index must be non-negative");
    const double delta = d_l + d_m;
    check_domain(delta, spec);
    if (d_l == d_m) return k_integral(delta, spec);

    const SpectralTable& t = spectral_table(spec);
    const double freq = std::ldexp(0.5 * (d_l - d_m), -scale);

    std::vector<double> block_values(t.blocks.size(), 0.0);
    double total = origin_part(t, delta);
    for (std::size_t b = 0; b < t.blocks.size(); ++b) {
        double acc = 0.0;
        for (std::size_t i = t.blocks[b].first; i < t.blocks[b].last; ++i)
            acc += t.weight[i] * std::pow(t.lambda[i], -delta) * std::cos(freq * t.lambda[i]);
        block_values[b] = acc;
        total += acc;
    }
    const std::size_t per = static_cast<std::size_t>(t.blocks_per_octave);
    double last = 0.0, previous = 0.0;
    for (std::size_t i = 0; i < per; ++i) {
        last += block_values[block_values.size() - 1 - i];
        previous += block_values[block_values.size() - 1 - per - i];
    }
    total += tail_estimate(previous, last);
    return 2.0 * total;
}

}  // namespace mww
