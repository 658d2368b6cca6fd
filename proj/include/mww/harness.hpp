#pragma once

#include "mww/estimator.hpp"
#include "mww/lrd_model.hpp"
#include "mww/wavelet.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mww {

inline constexpr const char* kVersion = "1.0.0";

/// Seed of replication `index` under `root`: splitmix64 of root + (index+1)*phi.
/// Distinct indices give distinct seeds.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index);

struct Scenario {
    std::string name = "scenario";
    /// Simulation template; its seed is replaced per replication.
    ArfimaSpec model;
    int vanishing_moments = 4;
    EstimationConfig estimation;
    int replications = 200;
    std::uint64_t root_seed = 1;
    /// Also run per-channel univariate estimates on the same panels.
    bool univariate = true;
    bool collect_omega = true;
    bool keep_raw = false;
    /// Worker threads; 0 uses the hardware concurrency.
    int threads = 0;

    /// Throws ConfigError on inconsistent settings.
    void validate() const;
};

struct QuantitySummary {
    std::string name;
    double truth = 0.0;
    double mean = 0.0;
    double bias = 0.0;
    /// Population standard deviation over the kept replications.
    double std = 0.0;
    /// sqrt(bias^2 + std^2).
    double rmse = 0.0;
    /// Multivariate over univariate RMSE; d entries only.
    std::optional<double> ratio_mu;
};

struct MCReport {
    std::vector<QuantitySummary> quantities;
    int replications = 0;
    int failures = 0;
    /// kept replications x quantities, filled when keep_raw is set.
    Eigen::MatrixXd raw;
    /// Per-channel univariate d estimates on the kept replications (keep_raw).
    Eigen::MatrixXd raw_univariate;
    /// Wall-clock seconds; never written to report files.
    double seconds = 0.0;

    const QuantitySummary& find(const std::string& name) const;
};

/// Simulate, estimate and aggregate. Replications that throw, fail to
/// converge or give a non-finite quantity are excluded and counted.
/// Bit-reproducible for a fixed root seed, whatever the thread count.
/// Throws ScenarioError when every replication fails.
MCReport run_scenario(const Scenario& scenario);

/// Per-channel RMSE ratio of the joint and univariate estimators on shared
/// panels. Throws ScenarioError if a univariate RMSE is zero.
std::vector<double> ratio_m_u(const Scenario& scenario);

struct RateRow {
    Eigen::Index length = 0;
    int j0 = 1;
    int j1 = 1;
    std::vector<double> rmse;  ///< per channel
    double mean_rmse = 0.0;
};

struct RateTable {
    std::vector<RateRow> rows;
    /// Least-squares slope of log mean RMSE on log N; unset with one row.
    std::optional<double> slope;
    bool monotone_decreasing = true;
};

/// Runs the base scenario at each length, with j1 = floor(log2 N) and, when
/// beta is given, j0 = smoothness_rule_j0(N, beta). Lengths must increase.
RateTable rate_check(const Scenario& base, const std::vector<Eigen::Index>& lengths,
                     std::optional<double> beta = std::nullopt);

/// Monte-Carlo mean and standard error of I(j)/n_j for j = 1..max_scale.
struct WaveletCovarianceMC {
    std::vector<Eigen::MatrixXd> mean;
    std::vector<Eigen::MatrixXd> std_error;
    std::vector<Eigen::Index> counts;
    int replications = 0;
};

WaveletCovarianceMC wavelet_covariance_mc(const ArfimaSpec& model, const WaveletSpec& spec, int max_scale,
                                          int replications, std::uint64_t root_seed, int threads = 0);

struct Histogram {
    std::vector<double> edges;  ///< bins + 1 increasing edges
    std::vector<long> counts;
};

/// Equal-width bins over [min, max]; the last bin is closed.
Histogram histogram(const std::vector<double>& values, int bins);

/// Key/value scenario text. Keys: name, d, rho, omega (rows split by ';'),
/// N, M, j0, j1 (integer or auto), reps, seed, truncation, burn_in,
/// threads, univariate, omega_stats. '#' starts a comment.
/// Throws ParseError with the offending line.
Scenario parse_scenario(std::istream& in);
Scenario parse_scenario_file(const std::string& path);

/// Report in CSV (with "# " configuration lines) and JSON.
std::string report_csv(const MCReport& report, const Scenario& scenario);
std::string report_json(const MCReport& report, const Scenario& scenario);

}  // namespace mww
