// Command-line front end: simulate panels, estimate d and Omega from CSV,
// run Monte-Carlo scenarios.

#include "mww/errors.hpp"
#include "mww/estimator.hpp"
#include "mww/harness.hpp"
#include "mww/lrd_model.hpp"
#include "mww/panel_io.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

enum Exit { kOk = 0, kConfig = 2, kScales = 3, kCovariance = 4 };

using nlohmann::json;

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json matrix_json(const Eigen::MatrixXd& m) {
    json out = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(number_or_null(m(i, j)));
        out.push_back(row);
    }
    return out;
}

void emit(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-")
        std::cout << content;
    else
        mww::write_file_atomic(path, content);
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            throw mww::ConfigError("not a number in list: '" + item + "'");
        }
        if (used != item.size() || !std::isfinite(v)) throw mww::ConfigError("not a number in list: '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) throw mww::ConfigError("empty list");
    return out;
}

std::string join(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + mww::format_double(v[i]);
    return out;
}

struct SimulateOptions {
    std::string d;
    double rho = 0.0;
    std::string omega_file;
    long long n = 512;
    std::optional<int> m;
    unsigned long long seed = 0;
    long long truncation = 0;
    long long burn_in = 0;
    std::string output;
};

struct EstimateOptions {
    std::string input;
    std::string output;
    std::string format = "json";
    int m = 4;
    int j0 = 1;
    std::optional<int> j1;
    bool demean = false;
    std::string hist_output;
    int hist_bins = 20;
    std::string corr_output;
};

struct McOptions {
    std::string scenario;
    std::string output;
    std::optional<int> reps;
    std::optional<unsigned long long> seed;
    int threads = 0;
    bool raw = false;
};

int run_simulate(const SimulateOptions& o) {
    const std::vector<double> d = parse_list(o.d);
    const auto p = static_cast<Eigen::Index>(d.size());
    mww::ArfimaSpec spec;
    spec.d = mww::MemoryParams(Eigen::Map<const Eigen::VectorXd>(d.data(), p));
    spec.omega = o.omega_file.empty() ? mww::LongRunCov::equicorrelated(p, o.rho) : mww::read_omega_file(o.omega_file);
    spec.length = o.n;
    spec.truncation = o.truncation;
    spec.burn_in = o.burn_in;
    spec.seed = o.seed;
    spec.vanishing_moments = o.m;
    const mww::TimeSeriesPanel panel = mww::simulate_arfima(spec);

    std::vector<std::string> echo{
        std::string("mww ") + mww::kVersion + " simulate",
        "d=" + join(d),
        o.omega_file.empty() ? "rho=" + mww::format_double(o.rho) : "omega_file=" + o.omega_file,
        "N=" + std::to_string(o.n) + " truncation=" + std::to_string(spec.effective_truncation()) +
            " burn_in=" + std::to_string(o.burn_in),
        "seed=" + std::to_string(o.seed) + (o.m ? " M=" + std::to_string(*o.m) : std::string()),
    };
    std::ostringstream out;
    mww::write_panel_csv(out, panel, echo);
    emit(o.output, out.str());
    return kOk;
}

json estimate_config_json(const EstimateOptions& o, const mww::MwwEstimate& e) {
    json c;
    c["input"] = o.input;
    c["M"] = o.m;
    c["j0"] = o.j0;
    c["j1"] = o.j1 ? json(*o.j1) : json("auto");
    c["j1_used"] = e.scales.j1;
    c["demean"] = o.demean;
    c["version"] = mww::kVersion;
    return c;
}

std::string estimate_json(const EstimateOptions& o, const mww::TimeSeriesPanel& panel, const mww::MwwEstimate& e) {
    json j;
    j["config"] = estimate_config_json(o, e);
    j["channels"] = panel.names();
    j["N"] = panel.length();
    json d = json::array();
    for (Eigen::Index l = 0; l < e.d.size(); ++l) d.push_back(e.d[l]);
    j["d"] = d;
    j["omega"] = matrix_json(e.omega);
    j["correlation"] = matrix_json(e.correlation);
    j["g_hat"] = matrix_json(e.g_hat);
    j["objective"] = number_or_null(e.objective);
    j["iterations"] = e.iterations;
    j["converged"] = e.converged;
    j["scales"] = {{"j0", e.scales.j0}, {"j1", e.scales.j1}, {"requested_j1", e.scales.requested_j1}};
    json flags = json::array();
    for (const auto& f : e.flags)
        flags.push_back({{"kind", mww::to_string(f.kind)}, {"l", f.l}, {"m", f.m}, {"message", f.message}});
    j["flags"] = flags;
    j["warnings"] = e.warnings;
    return j.dump(2) + "\n";
}

std::string estimate_csv(const EstimateOptions& o, const mww::TimeSeriesPanel& panel, const mww::MwwEstimate& e) {
    std::ostringstream out;
    out << "# mww " << mww::kVersion << " estimate\n";
    out << "# input=" << o.input << " M=" << o.m << " j0=" << o.j0
        << " j1=" << (o.j1 ? std::to_string(*o.j1) : "auto") << " j1_used=" << e.scales.j1
        << " demean=" << (o.demean ? "true" : "false") << "\n";
    out << "# objective=" << mww::format_double(e.objective) << " iterations=" << e.iterations
        << " converged=" << (e.converged ? "true" : "false") << "\n";
    for (const auto& w : e.warnings) out << "# warning: " << w << "\n";
    out << "quantity,row,col,value\n";
    const auto& names = panel.names();
    for (Eigen::Index l = 0; l < e.d.size(); ++l) out << "d," << names[l] << ",," << mww::format_double(e.d[l]) << "\n";
    auto matrix = [&](const char* label, const Eigen::MatrixXd& m) {
        for (Eigen::Index l = 0; l < m.rows(); ++l)
            for (Eigen::Index k = 0; k < m.cols(); ++k)
                out << label << ',' << names[l] << ',' << names[k] << ','
                    << (std::isfinite(m(l, k)) ? mww::format_double(m(l, k)) : std::string("nan")) << "\n";
    };
    matrix("omega", e.omega);
    matrix("correlation", e.correlation);
    return out.str();
}

int run_estimate(const EstimateOptions& o) {
    if (o.format != "json" && o.format != "csv") throw mww::ConfigError("--format must be json or csv");
    mww::TimeSeriesPanel panel = mww::read_panel_csv_file(o.input);
    if (o.demean) panel = panel.demeaned();
    const mww::WaveletSpec spec = mww::WaveletSpec::daubechies(o.m);
    mww::EstimationConfig config;
    config.j0 = o.j0;
    config.j1 = o.j1;
    const mww::MwwEstimate e = mww::estimate(panel, spec, config);
    emit(o.output, o.format == "json" ? estimate_json(o, panel, e) : estimate_csv(o, panel, e));

    if (!o.hist_output.empty()) {
        std::vector<double> values(e.d.values().data(), e.d.values().data() + e.d.size());
        const mww::Histogram h = mww::histogram(values, o.hist_bins);
        std::ostringstream out;
        out << "# histogram of estimated d, " << o.hist_bins << " bins; last row is the upper edge\n";
        out << "edge,count\n";
        for (std::size_t b = 0; b < h.counts.size(); ++b)
            out << mww::format_double(h.edges[b]) << ',' << h.counts[b] << "\n";
        out << mww::format_double(h.edges.back()) << ",0\n";
        mww::write_file_atomic(o.hist_output, out.str());
    }
    if (!o.corr_output.empty()) {
        std::ostringstream out;
        const auto& names = panel.names();
        out << "channel";
        for (const auto& n : names) out << ',' << n;
        out << "\n";
        for (Eigen::Index l = 0; l < e.correlation.rows(); ++l) {
            out << names[l];
            for (Eigen::Index m = 0; m < e.correlation.cols(); ++m) {
                const double v = e.correlation(l, m);
                out << ',' << (std::isfinite(v) ? mww::format_double(v) : std::string("nan"));
            }
            out << "\n";
        }
        mww::write_file_atomic(o.corr_output, out.str());
    }
    for (const auto& w : e.warnings) std::cerr << "warning: " << w << "\n";
    return kOk;
}

int run_mc(const McOptions& o) {
    mww::Scenario s = mww::parse_scenario_file(o.scenario);
    if (o.reps) s.replications = *o.reps;
    if (o.seed) s.root_seed = *o.seed;
    s.threads = o.threads;
    s.keep_raw = o.raw;
    s.validate();
    const mww::MCReport report = mww::run_scenario(s);
    std::string base = o.output;
    for (const char* ext : {".json", ".csv"}) {
        const std::string e(ext);
        if (base.size() > e.size() && base.compare(base.size() - e.size(), e.size(), e) == 0)
            base.erase(base.size() - e.size());
    }
    mww::write_file_atomic(base + ".csv", mww::report_csv(report, s));
    mww::write_file_atomic(base + ".json", mww::report_json(report, s));
    std::cerr << "mc: " << report.replications - report.failures << "/" << report.replications
              << " replications kept in " << report.seconds << " s\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multivariate wavelet Whittle estimation of long-memory parameters"};
    app.require_subcommand(1);

    SimulateOptions sim;
    auto* simulate = app.add_subcommand("simulate", "Simulate an ARFIMA(0,d,0) panel as CSV");
    simulate->add_option("--d", sim.d, "Comma-separated memory parameters")->required();
    auto* rho_opt = simulate->add_option("--rho", sim.rho, "Equal off-diagonal correlation of Omega");
    simulate->add_option("--omega-file", sim.omega_file, "CSV file holding Omega")->excludes(rho_opt);
    simulate->add_option("--N", sim.n, "Sample count")->check(CLI::PositiveNumber);
    simulate->add_option("--M", sim.m, "Reject d >= M");
    simulate->add_option("--seed", sim.seed, "Random seed");
    simulate->add_option("--truncation", sim.truncation, "MA weights kept (0: 10 N)");
    simulate->add_option("--burn-in", sim.burn_in, "Samples discarded before output");
    simulate->add_option("--output", sim.output, "Output path (default stdout)");

    EstimateOptions est;
    auto* estimate = app.add_subcommand("estimate", "Estimate d, Omega and correlations from a CSV panel");
    estimate->add_option("--input", est.input, "CSV panel with a header row")->required();
    estimate->add_option("--output", est.output, "Output path (default stdout)");
    estimate->add_option("--format", est.format, "json or csv");
    estimate->add_option("--M", est.m, "Vanishing moments of the Daubechies wavelet");
    estimate->add_option("--j0", est.j0, "Finest scale");
    estimate->add_option("--j1", est.j1, "Coarsest scale (default: largest with n_j >= p)");
    estimate->add_flag("--demean", est.demean, "Remove each channel's mean first");
    estimate->add_option("--hist-output", est.hist_output, "Write a histogram of estimated d");
    estimate->add_option("--hist-bins", est.hist_bins, "Histogram bin count")->check(CLI::PositiveNumber);
    estimate->add_option("--corr-output", est.corr_output, "Write the correlation matrix as a CSV grid");

    McOptions mc;
    auto* mcc = app.add_subcommand("mc", "Run a Monte-Carlo scenario file");
    mcc->add_option("--scenario", mc.scenario, "Scenario file")->required();
    mcc->add_option("--output", mc.output, "Report path prefix; writes <prefix>.csv and <prefix>.json")->required();
    mcc->add_option("--reps", mc.reps, "Override the replication count");
    mcc->add_option("--seed", mc.seed, "Override the root seed");
    mcc->add_option("--threads", mc.threads, "Worker threads (0: all cores)");
    mcc->add_flag("--raw", mc.raw, "Include per-replication estimates in the JSON report");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (*simulate) return run_simulate(sim);
        if (*estimate) return run_estimate(est);
        if (*mcc) return run_mc(mc);
    } catch (const mww::ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kConfig;
    } catch (const mww::CovarianceError& e) {
        std::cerr << "invalid covariance: " << e.what() << "\n";
        return kCovariance;
    } catch (const mww::InsufficientDataError& e) {
        std::cerr << "infeasible scales: " << e.what() << " (largest feasible scale " << e.largest_feasible_scale()
                  << ")\n";
        return kScales;
    } catch (const mww::RangeError& e) {
        std::cerr << "infeasible scales: " << e.what() << "\n";
        return kScales;
    } catch (const mww::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfig;
    }
    return kConfig;
}
