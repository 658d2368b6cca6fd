#include "doctest.h"
#include "oracles.hpp"

#include "mww/errors.hpp"
#include "mww/estimator.hpp"
#include "mww/lrd_model.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace mww;

namespace {

const WaveletSpec& db4() {
    static const WaveletSpec s = WaveletSpec::daubechies(4);
    return s;
}

TimeSeriesPanel simulate(const Eigen::VectorXd& d, double rho, Eigen::Index n, std::uint64_t seed) {
    ArfimaSpec spec;
    spec.d = MemoryParams(d);
    spec.omega = LongRunCov::equicorrelated(d.size(), rho);
    spec.length = n;
    spec.seed = seed;
    return simulate_arfima(spec);
}

Eigen::MatrixXd random_symmetric(std::mt19937_64& rng, Eigen::Index p) {
    std::normal_distribution<double> normal;
    Eigen::MatrixXd a(p, p);
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index k = 0; k < p; ++k) a(i, k) = normal(rng);
    return (a + a.transpose()) / 2.0;
}

Eigen::VectorXd random_d(std::mt19937_64& rng, Eigen::Index p) {
    std::uniform_real_distribution<double> u(-0.3, 1.3);
    Eigen::VectorXd d(p);
    for (auto& v : d) v = u(rng);
    return d;
}

}  // namespace

TEST_CASE("scalogram of a single coefficient") {
    const Scalogram scal(1, {Eigen::MatrixXd::Constant(1, 1, 9.0)}, {1});
    CHECK(scal.at(1)(0, 0) == 9.0);
    CHECK(scal.total() == 1);
    CHECK(scal.mean_scale() == 1.0);
    CHECK(scal.rescaled(1, Eigen::VectorXd::Constant(1, 0.5))(0, 0) == doctest::Approx(4.5));
    CHECK_THROWS_AS(Scalogram(1, {}, {}), RangeError);
    CHECK_THROWS_AS(Scalogram(1, {Eigen::MatrixXd::Ones(1, 1)}, {0}), RangeError);
}

TEST_CASE("scalogram from the pyramid matches explicit sums") {
    const TimeSeriesPanel panel = simulate(Eigen::Vector3d(0.2, 0.4, 0.1), 0.3, 700, 4);
    const WaveletPyramid pyr = dwt_pyramid(panel, db4(), 6);
    const Scalogram scal = scalogram(pyr, 2, 6);
    CHECK(scal.j0() == 2);
    CHECK(scal.j1() == 6);
    Eigen::Index n = 0;
    double weighted = 0;
    for (int j = 2; j <= 6; ++j) {
        const Eigen::MatrixXd expected = oracle::brute_force_scalogram(pyr.level(j));
        CHECK((scal.at(j) - expected).cwiseAbs().maxCoeff() <= 1e-10 * expected.cwiseAbs().maxCoeff());
        CHECK(scal.at(j) == scal.at(j).transpose());
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scal.at(j));
        CHECK(eig.eigenvalues().minCoeff() >= -1e-10 * eig.eigenvalues().maxCoeff());
        CHECK(scal.count(j) == pyr.count(j));
        n += pyr.count(j);
        weighted += j * static_cast<double>(pyr.count(j));
    }
    CHECK(scal.total() == n);
    CHECK(scal.mean_scale() == doctest::Approx(weighted / n));
    CHECK_THROWS_AS(scalogram(pyr, 3, 7), RangeError);
    CHECK_THROWS_AS(scalogram(pyr, 4, 3), RangeError);
}

TEST_CASE("g_hat small examples") {
    Eigen::Matrix2d i;
    i << 4, 2, 2, 4;
    const Scalogram scal(1, {i}, {1});
    const Eigen::MatrixXd g = g_hat(scal, Eigen::Vector2d(1.0, 1.0));
    CHECK(g(0, 0) == doctest::Approx(1.0));
    CHECK(g(0, 1) == doctest::Approx(0.5));
    CHECK(g(1, 0) == doctest::Approx(0.5));
    CHECK(g(1, 1) == doctest::Approx(1.0));

    // Two scales: (1/n) sum_j 2^{-j(d_l+d_m)} I_lm(j).
    Eigen::Matrix2d i2;
    i2 << 9, -3, -3, 5;
    const Scalogram two(1, {i, i2}, {2, 3});
    const Eigen::Vector2d d(0.3, -0.2);
    const Eigen::MatrixXd g2 = g_hat(two, d);
    for (int l = 0; l < 2; ++l)
        for (int m = 0; m < 2; ++m) {
            const double expected = (std::exp2(-(d[l] + d[m])) * i(l, m) + std::exp2(-2 * (d[l] + d[m])) * i2(l, m)) / 5.0;
            CHECK(g2(l, m) == doctest::Approx(expected).epsilon(1e-14));
        }
    CHECK_THROWS_AS(g_hat(two, Eigen::Vector3d::Zero()), ConfigError);
}

TEST_CASE("g_hat survives exponents whose scaling factor underflows") {
    const Scalogram scal(10, {Eigen::MatrixXd::Constant(1, 1, 1e300)}, {1});
    const double d = 60.0;
    const double expected = std::exp(std::log(1e300) - 2.0 * 10 * d * std::numbers::ln2);
    const double value = g_hat(scal, Eigen::VectorXd::Constant(1, d))(0, 0);
    CHECK(std::isfinite(value));
    CHECK(value == doctest::Approx(expected).epsilon(1e-12));
    const Scalogram tiny(10, {Eigen::MatrixXd::Constant(1, 1, 1e-300)}, {1});
    CHECK(g_hat(tiny, Eigen::VectorXd::Constant(1, -40.0))(0, 0) == doctest::Approx(1e-300 * std::exp2(800.0)).epsilon(1e-12));
}

TEST_CASE("trace form of the likelihood equals the sum over coefficients") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index p = 1 + trial % 4;
        const Eigen::VectorXd d = random_d(rng, p);
        const auto levels = oracle::random_levels(rng, p, {40, 19, 9, 4}, 2, d);
        const Scalogram scal = oracle::scalogram_of(levels, 2);
        Eigen::MatrixXd g = random_symmetric(rng, p);
        g = g * g.transpose() + Eigen::MatrixXd::Identity(p, p);
        const Eigen::VectorXd d_eval = random_d(rng, p);
        const double direct = oracle::likelihood_sum_over_k(levels, 2, g, d_eval);
        CHECK(whittle_likelihood(scal, g, d_eval) == doctest::Approx(direct).epsilon(1e-10));
    }
}

TEST_CASE("likelihood at a singular matrix is an error") {
    const Scalogram scal(1, {Eigen::Matrix2d::Identity(), Eigen::Matrix2d::Identity()}, {3, 2});
    Eigen::Matrix2d singular;
    singular << 1, 1, 1, 1;
    CHECK_THROWS_AS(whittle_likelihood(scal, singular, Eigen::Vector2d::Zero()), LikelihoodError);
    CHECK_THROWS_AS(whittle_likelihood(scal, Eigen::Matrix3d::Identity(), Eigen::Vector2d::Zero()), ConfigError);
}

TEST_CASE("profile criterion equals the likelihood at G_hat minus p") {
    std::mt19937_64 rng(23);
    for (Eigen::Index p = 1; p <= 4; ++p) {
        for (int trial = 0; trial < 10; ++trial) {
            const Eigen::VectorXd d = random_d(rng, p);
            const auto levels = oracle::random_levels(rng, p, {60, 30, 14, 6}, 1, d);
            const Scalogram scal = oracle::scalogram_of(levels, 1);
            const Eigen::VectorXd at = random_d(rng, p);
            const Eigen::MatrixXd g = g_hat(scal, at);
            const double l = whittle_likelihood(scal, g, at);
            CAPTURE(p);
            CHECK(objective_R(scal, at) == doctest::Approx(l - static_cast<double>(p)).epsilon(1e-10));
        }
    }
}

TEST_CASE("G_hat minimizes the likelihood over G") {
    std::mt19937_64 rng(29);
    int checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Index p = 1 + trial % 3;
        const Eigen::VectorXd d = random_d(rng, p);
        const auto levels = oracle::random_levels(rng, p, {50, 24, 11, 5}, 1, d);
        const Scalogram scal = oracle::scalogram_of(levels, 1);
        const Eigen::MatrixXd g = g_hat(scal, d);
        const double base = whittle_likelihood(scal, g, d);
        Eigen::MatrixXd delta = random_symmetric(rng, p);
        delta /= delta.norm();
        // Perturb in the metric of G_hat so the moved matrix stays positive definite.
        const Eigen::MatrixXd root = g.llt().matrixL();
        for (double eps : {1e-3, 1e-4}) {
            const Eigen::MatrixXd moved = g + eps * root * delta * root.transpose();
            CHECK(whittle_likelihood(scal, moved, d) - base >= -1e-8);
            ++checked;
        }
    }
    CHECK(checked == 200);
}

TEST_CASE("R is log det G_hat plus the scale penalty") {
    std::mt19937_64 rng(31);
    const Eigen::VectorXd d_true = Eigen::Vector3d(0.1, 0.5, 0.9);
    const auto levels = oracle::random_levels(rng, 3, {80, 40, 20, 10, 5}, 1, d_true);
    const Scalogram scal = oracle::scalogram_of(levels, 1);
    double weighted = 0;
    for (std::size_t i = 0; i < levels.size(); ++i) weighted += (1 + static_cast<double>(i)) * levels[i].rows();
    const double mean_j = weighted / 155.0;
    for (int trial = 0; trial < 5; ++trial) {
        const Eigen::VectorXd d = random_d(rng, 3);
        const double expected = std::log(g_hat(scal, d).determinant()) + 2.0 * std::numbers::ln2 * mean_j * d.sum();
        CHECK(objective_R(scal, d) == doctest::Approx(expected).epsilon(1e-10));
    }
}

TEST_CASE("univariate criterion has the scalar closed form") {
    const std::vector<double> values = {10.0, 14.0, 30.0, 41.0};
    const std::vector<Eigen::Index> counts = {8, 4, 2, 1};
    std::vector<Eigen::MatrixXd> mats;
    for (double v : values) mats.push_back(Eigen::MatrixXd::Constant(1, 1, v));
    const Scalogram scal(3, mats, counts);
    const double mean_j = (3 * 8 + 4 * 4 + 5 * 2 + 6 * 1) / 15.0;
    for (double d : {-0.4, 0.0, 0.3, 1.1}) {
        double s = 0;
        for (int i = 0; i < 4; ++i) s += std::exp2(-2.0 * (3 + i) * d) * values[i];
        const double expected = std::log(s / 15.0) + 2.0 * std::numbers::ln2 * mean_j * d;
        CHECK(objective_R(scal, Eigen::VectorXd::Constant(1, d)) == doctest::Approx(expected).epsilon(1e-13));
    }
}

TEST_CASE("analytic gradient agrees with central differences") {
    std::mt19937_64 rng(37);
    for (Eigen::Index p : {1, 2, 5}) {
        const Eigen::VectorXd d_true = random_d(rng, p);
        const auto levels = oracle::random_levels(rng, p, {120, 60, 30, 15, 7}, 1, d_true);
        const Scalogram scal = oracle::scalogram_of(levels, 1);
        const Eigen::VectorXd at = random_d(rng, p);
        Eigen::VectorXd grad;
        const double value = objective_R(scal, at, grad);
        CHECK(value == objective_R(scal, at));
        REQUIRE(grad.size() == p);
        for (Eigen::Index l = 0; l < p; ++l) {
            const double h = 1e-6;
            Eigen::VectorXd up = at, down = at;
            up[l] += h;
            down[l] -= h;
            const double fd = (objective_R(scal, up) - objective_R(scal, down)) / (2 * h);
            CHECK(grad[l] == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
        }
    }
}

TEST_CASE("singular scalogram gives an infinite criterion") {
    // Identical channels make G_hat(d) rank one at d_1 = d_2.
    const Eigen::MatrixXd w = Eigen::MatrixXd::Ones(2, 2);
    const Scalogram scal(1, {w, 2 * w}, {4, 2});
    CHECK(std::isinf(objective_R(scal, Eigen::Vector2d(0.3, 0.3))));
    Eigen::VectorXd grad = Eigen::Vector2d(7, 7);
    CHECK(std::isinf(objective_R(scal, Eigen::Vector2d(0.3, 0.3), grad)));
    CHECK(grad == Eigen::Vector2d(7, 7));
}

TEST_CASE("a single scale is rejected by the estimator") {
    const Scalogram scal(2, {Eigen::Matrix2d::Identity()}, {5});
    CHECK_THROWS_AS(estimate_d(scal, db4(), EstimationConfig{}), ConfigError);
    const Scalogram thin(1, {Eigen::Matrix3d::Identity(), Eigen::Matrix3d::Identity()}, {1, 1});
    CHECK_THROWS_AS(estimate_d(thin, db4(), EstimationConfig{}), ConfigError);
}

TEST_CASE("estimate_d returns a local minimizer inside the box") {
    const TimeSeriesPanel panel = simulate(Eigen::Vector2d(0.2, 0.6), 0.4, 2048, 101);
    const WaveletPyramid pyr = dwt_pyramid(panel, db4(), 8);
    const Scalogram scal = scalogram(pyr, 1, 8);
    const DEstimate est = estimate_d(scal, db4(), EstimationConfig{});
    CHECK(est.converged);
    CHECK(est.starts.size() == 5);
    CHECK(est.objective == doctest::Approx(objective_R(scal, est.d.values())).epsilon(1e-14));
    for (Eigen::Index l = 0; l < 2; ++l) {
        for (double h : {1e-3, -1e-3, 1e-2, -1e-2}) {
            Eigen::VectorXd moved = est.d.values();
            moved[l] += h;
            CHECK(objective_R(scal, moved) >= est.objective - 1e-10);
        }
        CHECK(est.d[l] > -2.0);
        CHECK(est.d[l] <= 4.0);
    }
    Eigen::VectorXd grad;
    objective_R(scal, est.d.values(), grad);
    CHECK(grad.cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("single replications land near the truth") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const TimeSeriesPanel panel = simulate(Eigen::Vector2d(0.2, 0.2), 0.4, 4096, seed);
        const MwwEstimate est = estimate(panel, db4(), EstimationConfig{});
        CAPTURE(seed);
        CHECK(std::abs(est.d[0] - 0.2) < 0.15);
        CHECK(std::abs(est.d[1] - 0.2) < 0.15);
        CHECK(est.converged);
        CHECK(std::abs(est.correlation(0, 1) - 0.4) < 0.2);
        CHECK(est.omega(0, 1) == est.omega(1, 0));
    }
}

TEST_CASE("channel permutation and rescaling") {
    const EstimationConfig config;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const TimeSeriesPanel panel = simulate(Eigen::Vector3d(0.1, 0.3, 0.7), 0.3, 512, 1000 + seed);
        const MwwEstimate base = estimate(panel, db4(), config);

        Eigen::MatrixXd permuted(panel.length(), 3);
        permuted << panel.samples().col(2), panel.samples().col(0), panel.samples().col(1);
        const MwwEstimate perm = estimate(TimeSeriesPanel(permuted), db4(), config);

        Eigen::MatrixXd scaled = panel.samples();
        scaled.col(0) *= 3.0;
        scaled.col(2) *= 0.01;
        const MwwEstimate sc = estimate(TimeSeriesPanel(scaled), db4(), config);

        CAPTURE(seed);
        CHECK(std::abs(perm.d[0] - base.d[2]) < 1e-6);
        CHECK(std::abs(perm.d[1] - base.d[0]) < 1e-6);
        CHECK(std::abs(perm.d[2] - base.d[1]) < 1e-6);
        CHECK((sc.d.values() - base.d.values()).cwiseAbs().maxCoeff() < 1e-6);
        CHECK(sc.omega(0, 0) == doctest::Approx(9.0 * base.omega(0, 0)).epsilon(1e-4));
        CHECK(std::abs(sc.correlation(0, 2) - base.correlation(0, 2)) < 1e-4);
    }
}

TEST_CASE("omega flags") {
    std::mt19937_64 rng(41);
    const auto levels = oracle::random_levels(rng, 2, {200, 100, 50, 25}, 1, Eigen::Vector2d(0.2, 0.2));
    const Scalogram scal = oracle::scalogram_of(levels, 1);
    const EstimationConfig config;
    auto has = [](const OmegaEstimate& e, PairFlag::Kind kind) {
        for (const auto& f : e.flags)
            if (f.kind == kind) return true;
        return false;
    };

    // Equal exponents: the correlation is that of G_hat and cannot leave [-1, 1].
    const OmegaEstimate clean = estimate_omega(scal, MemoryParams(Eigen::Vector2d(0.25, 0.25)), db4(), config);
    CHECK(clean.flags.empty());
    CHECK(clean.omega.allFinite());
    CHECK(clean.correlation(0, 0) == doctest::Approx(1.0));

    const OmegaEstimate undefined = estimate_omega(scal, MemoryParams(Eigen::Vector2d(0.2, 1.2)), db4(), config);
    CHECK(has(undefined, PairFlag::Kind::undefined_phase));
    CHECK(std::isnan(undefined.omega(0, 1)));
    CHECK(std::isnan(undefined.correlation(1, 0)));
    CHECK(std::isfinite(undefined.omega(1, 1)));

    const OmegaEstimate degenerate = estimate_omega(scal, MemoryParams(Eigen::Vector2d(0.2, 1.15)), db4(), config);
    CHECK(has(degenerate, PairFlag::Kind::degenerate_phase));
    CHECK(std::isfinite(degenerate.omega(0, 1)));

    const OmegaEstimate outside = estimate_omega(scal, MemoryParams(Eigen::Vector2d(0.2, 2.1)), db4(), config);
    CHECK(has(outside, PairFlag::Kind::outside_k_domain));
    CHECK(std::isnan(outside.omega(1, 1)));

    // Strongly correlated channels with a small phase cosine push the
    // off-diagonal estimate past the diagonal bound; it is reported, not clamped.
    const auto tight = oracle::random_levels(rng, 1, {200, 100, 50, 25}, 1, Eigen::VectorXd::Constant(1, 0.2));
    std::vector<Eigen::MatrixXd> twin;
    for (const auto& w : tight) {
        Eigen::MatrixXd pair(w.rows(), 2);
        pair << w, w;
        twin.push_back(pair);
    }
    const Scalogram twin_scal = oracle::scalogram_of(twin, 1);
    const OmegaEstimate over = estimate_omega(twin_scal, MemoryParams(Eigen::Vector2d(0.2, 0.9)), db4(), config);
    CHECK(std::abs(over.correlation(0, 1)) > 1.0);
    CHECK(has(over, PairFlag::Kind::correlation_out_of_range));
    CHECK(std::string(to_string(PairFlag::Kind::correlation_out_of_range)) == "correlation_out_of_range");
}

TEST_CASE("scale resolution") {
    EstimationConfig config;
    ScaleRange r = resolve_scales(512, 2, db4(), config);
    CHECK(r.j0 == 1);
    CHECK(r.j1 == 6);
    config.j1 = 9;
    r = resolve_scales(512, 2, db4(), config);
    CHECK(r.j1 == 6);
    CHECK(r.requested_j1 == 9);
    config.j0 = 7;
    try {
        resolve_scales(512, 2, db4(), config);
        FAIL("expected InsufficientDataError");
    } catch (const InsufficientDataError& e) {
        CHECK(e.largest_feasible_scale() == 6);
    }
    config.j0 = 6;
    CHECK_THROWS_AS(resolve_scales(512, 2, db4(), config), RangeError);
    config.j0 = 0;
    CHECK_THROWS_AS(resolve_scales(512, 2, db4(), config), RangeError);
    CHECK_THROWS_AS(resolve_scales(5, 1, db4(), EstimationConfig{}), InsufficientDataError);
    // Two coefficients at scales 5..6 of N = 512 cannot support 40 channels.
    config.j0 = 5;
    config.j1 = 6;
    CHECK_THROWS_AS(resolve_scales(512, 40, db4(), config), RangeError);

    const TimeSeriesPanel panel = simulate(Eigen::Vector2d(0.2, 0.2), 0.4, 512, 3);
    EstimationConfig clamp;
    clamp.j1 = 9;
    const MwwEstimate est = estimate(panel, db4(), clamp);
    CHECK(est.scales.j1 == 6);
    REQUIRE_FALSE(est.warnings.empty());
    CHECK(est.warnings.front().find("clamped") != std::string::npos);
}

TEST_CASE("smoothness rule for the finest scale") {
    CHECK(smoothness_rule_j0(512, 2.0) == 2);
    CHECK(smoothness_rule_j0(2048, 2.0) == 2);
    CHECK(smoothness_rule_j0(1 << 15, 2.0) == 3);
    CHECK(smoothness_rule_j0(4, 2.0) == 1);
    CHECK(smoothness_rule_j0(1 << 20, 0.5) == 10);
    CHECK_THROWS_AS(smoothness_rule_j0(512, 0.0), ConfigError);
}

TEST_CASE("univariate estimates equal single-channel runs on the shared scales") {
    const TimeSeriesPanel panel = simulate(Eigen::Vector3d(0.2, 0.4, 0.8), 0.5, 1024, 12);
    EstimationConfig config;
    config.j0 = 2;
    const auto uni = estimate_univariate_each(panel, db4(), config);
    REQUIRE(uni.size() == 3);
    const ScaleRange scales = resolve_scales(1024, 3, db4(), config);
    for (Eigen::Index l = 0; l < 3; ++l) {
        EstimationConfig single = config;
        single.j1 = scales.j1;
        const MwwEstimate direct = estimate(panel.select(l), db4(), single);
        CHECK(uni[l].d[0] == direct.d[0]);
        CHECK(uni[l].scales.j1 == scales.j1);
        CHECK(uni[l].omega(0, 0) == direct.omega(0, 0));
    }
}

TEST_CASE("quasi-Newton path agrees with the simplex path") {
    const TimeSeriesPanel panel = simulate(Eigen::Vector3d(0.1, 0.4, 0.9), 0.3, 2048, 55);
    EstimationConfig simplex;
    EstimationConfig newton;
    newton.max_simplex_dimension = 1;
    const MwwEstimate a = estimate(panel, db4(), simplex);
    const MwwEstimate b = estimate(panel, db4(), newton);
    CHECK(b.converged);
    CHECK(std::abs(a.objective - b.objective) < 1e-8);
    CHECK((a.d.values() - b.d.values()).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("twelve channels use the gradient path") {
    Eigen::VectorXd d(12);
    for (int l = 0; l < 12; ++l) d[l] = 0.1 + 0.05 * l;
    const TimeSeriesPanel panel = simulate(d, 0.3, 4096, 8);
    const MwwEstimate est = estimate(panel, db4(), EstimationConfig{});
    CHECK(est.converged);
    CHECK((est.d.values() - d).cwiseAbs().maxCoeff() < 0.2);
    Eigen::VectorXd grad;
    const Scalogram scal = scalogram(dwt_pyramid(panel, db4(), est.scales.j1), est.scales.j0, est.scales.j1);
    objective_R(scal, est.d.values(), grad);
    CHECK(grad.cwiseAbs().maxCoeff() < 1e-3);
}
