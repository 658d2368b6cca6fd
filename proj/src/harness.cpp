#include "mww/harness.hpp"

#include "mww/errors.hpp"
#include "mww/panel_io.hpp"
#include "mww/pyramid.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

namespace mww {

namespace {

using nlohmann::json;

// Runs task(i) for i in [0, count) on a shared counter; each index is owned
// by exactly one worker, so results land in caller-owned slots.
template <class Task>
void parallel_for(int count, int threads, Task task) {
    int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::clamp(workers, 1, std::max(count, 1));
    std::atomic<int> next{0};
    auto loop = [&] {
        for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) task(i);
    };
    if (workers == 1) {
        loop();
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers - 1));
    for (int w = 1; w < workers; ++w) pool.emplace_back(loop);
    loop();
    for (auto& t : pool) t.join();
}

std::string idx(Eigen::Index i) { return std::to_string(i + 1); }

struct Replication {
    bool ok = false;
    std::vector<double> values;
    std::vector<double> univariate;
};

std::vector<std::string> quantity_names(Eigen::Index p, bool omega) {
    std::vector<std::string> names;
    for (Eigen::Index l = 0; l < p; ++l) names.push_back("d_" + idx(l));
    if (omega) {
        for (Eigen::Index m = 0; m < p; ++m)
            for (Eigen::Index l = 0; l <= m; ++l) names.push_back("Omega_" + idx(l) + "_" + idx(m));
        for (Eigen::Index m = 0; m < p; ++m)
            for (Eigen::Index l = 0; l < m; ++l) names.push_back("corr_" + idx(l) + "_" + idx(m));
    }
    return names;
}

std::vector<double> quantity_truth(const Scenario& s) {
    const Eigen::Index p = s.model.d.size();
    std::vector<double> truth(s.model.d.values().data(), s.model.d.values().data() + p);
    if (s.collect_omega) {
        const Eigen::MatrixXd& omega = s.model.omega.matrix();
        const Eigen::MatrixXd corr = s.model.omega.correlation();
        for (Eigen::Index m = 0; m < p; ++m)
            for (Eigen::Index l = 0; l <= m; ++l) truth.push_back(omega(l, m));
        for (Eigen::Index m = 0; m < p; ++m)
            for (Eigen::Index l = 0; l < m; ++l) truth.push_back(corr(l, m));
    }
    return truth;
}

Replication run_one(const Scenario& s, const WaveletSpec& spec, int index) {
    Replication out;
    const std::uint64_t seed = derive_seed(s.root_seed, static_cast<std::uint64_t>(index));
    ArfimaSpec model = s.model;
    model.seed = seed;
    model.vanishing_moments = s.vanishing_moments;
    EstimationConfig config = s.estimation;
    config.jitter_seed = seed;
    try {
        const TimeSeriesPanel panel = simulate_arfima(model);
        const MwwEstimate e = estimate(panel, spec, config);
        if (!e.converged) return out;
        const Eigen::Index p = e.d.size();
        for (Eigen::Index l = 0; l < p; ++l) out.values.push_back(e.d[l]);
        if (s.collect_omega) {
            for (Eigen::Index m = 0; m < p; ++m)
                for (Eigen::Index l = 0; l <= m; ++l) out.values.push_back(e.omega(l, m));
            for (Eigen::Index m = 0; m < p; ++m)
                for (Eigen::Index l = 0; l < m; ++l) out.values.push_back(e.correlation(l, m));
        }
        if (s.univariate) {
            for (const auto& u : estimate_univariate_each(panel, spec, config)) {
                if (!u.converged) return out;
                out.univariate.push_back(u.d[0]);
            }
        }
    } catch (const Error&) {
        return out;
    }
    out.ok = std::all_of(out.values.begin(), out.values.end(), [](double v) { return std::isfinite(v); });
    return out;
}

struct Moments {
    double mean = 0.0;
    double bias = 0.0;
    double std = 0.0;
    double rmse = 0.0;
};

Moments moments(const std::vector<double>& xs, double truth) {
    Moments m;
    const double n = static_cast<double>(xs.size());
    for (double x : xs) m.mean += x;
    m.mean /= n;
    double ss = 0.0;
    for (double x : xs) ss += (x - m.mean) * (x - m.mean);
    m.std = std::sqrt(ss / n);
    m.bias = m.mean - truth;
    m.rmse = std::sqrt(m.bias * m.bias + m.std * m.std);
    return m;
}

std::string join(const Eigen::VectorXd& v) {
    std::string out;
    for (Eigen::Index i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_double(v[i]);
    return out;
}

std::string matrix_text(const Eigen::MatrixXd& m) {
    std::string out;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        if (i) out += ";";
        out += join(m.row(i).transpose());
    }
    return out;
}

json config_json(const Scenario& s) {
    json c;
    c["name"] = s.name;
    c["d"] = std::vector<double>(s.model.d.values().data(), s.model.d.values().data() + s.model.d.size());
    std::vector<std::vector<double>> omega;
    for (Eigen::Index i = 0; i < s.model.omega.size(); ++i) {
        omega.emplace_back();
        for (Eigen::Index j = 0; j < s.model.omega.size(); ++j) omega.back().push_back(s.model.omega(i, j));
    }
    c["omega"] = omega;
    c["N"] = s.model.length;
    c["truncation"] = s.model.effective_truncation();
    c["burn_in"] = s.model.burn_in;
    c["M"] = s.vanishing_moments;
    c["j0"] = s.estimation.j0;
    c["j1"] = s.estimation.j1 ? json(*s.estimation.j1) : json("auto");
    c["reps"] = s.replications;
    c["seed"] = s.root_seed;
    c["univariate"] = s.univariate;
    c["omega_stats"] = s.collect_omega;
    c["multi_starts"] = s.estimation.multi_starts;
    c["version"] = kVersion;
    return c;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// Parsing helpers for the scenario format.
std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& text, int line) {
    const std::string t = trim(text);
    double v = 0.0;
    const char* first = t.data();
    if (!t.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v))
        throw ParseError("not a number: '" + t + "'", line);
    return v;
}

long long to_integer(const std::string& text, int line) {
    const std::string t = trim(text);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
        throw ParseError("not an integer: '" + t + "'", line);
    return v;
}

std::vector<double> to_list(const std::string& text, int line) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_double(item, line));
    if (out.empty()) throw ParseError("empty list", line);
    return out;
}

bool to_bool(const std::string& text, int line) {
    const std::string t = trim(text);
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    throw ParseError("not a boolean: '" + t + "'", line);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) {
    std::uint64_t z = root + (index + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

void Scenario::validate() const {
    if (replications < 1) throw ConfigError("replication count must be at least 1");
    if (model.d.size() == 0) throw ConfigError("scenario needs at least one channel");
    if (model.omega.size() != model.d.size())
        throw ConfigError("Omega is " + std::to_string(model.omega.size()) + "x" +
                          std::to_string(model.omega.size()) + " but d has " + std::to_string(model.d.size()) +
                          " entries");
    if (model.length < 1) throw ConfigError("N must be positive");
    if (threads < 0) throw ConfigError("thread count must be non-negative");
}

const QuantitySummary& MCReport::find(const std::string& name) const {
    for (const auto& q : quantities)
        if (q.name == name) return q;
    throw ConfigError("report has no quantity '" + name + "'");
}

MCReport run_scenario(const Scenario& scenario) {
    scenario.validate();
    const auto started = std::chrono::steady_clock::now();
    const WaveletSpec spec = WaveletSpec::daubechies(scenario.vanishing_moments);
    // Build the K table before the workers start sharing it.
    (void)k_integral(0.0, spec);

    std::vector<Replication> reps(static_cast<std::size_t>(scenario.replications));
    parallel_for(scenario.replications, scenario.threads,
                 [&](int i) { reps[static_cast<std::size_t>(i)] = run_one(scenario, spec, i); });

    const Eigen::Index p = scenario.model.d.size();
    const auto names = quantity_names(p, scenario.collect_omega);
    const auto truth = quantity_truth(scenario);

    MCReport report;
    report.replications = scenario.replications;
    std::vector<const Replication*> kept;
    for (const auto& r : reps) {
        if (r.ok)
            kept.push_back(&r);
        else
            ++report.failures;
    }
    if (kept.empty())
        throw ScenarioError("all " + std::to_string(scenario.replications) + " replications of '" + scenario.name +
                            "' failed");

    std::vector<double> column(kept.size());
    for (std::size_t q = 0; q < names.size(); ++q) {
        for (std::size_t r = 0; r < kept.size(); ++r) column[r] = kept[r]->values[q];
        const Moments m = moments(column, truth[q]);
        QuantitySummary s{names[q], truth[q], m.mean, m.bias, m.std, m.rmse, std::nullopt};
        if (scenario.univariate && static_cast<Eigen::Index>(q) < p) {
            for (std::size_t r = 0; r < kept.size(); ++r) column[r] = kept[r]->univariate[q];
            const double uni = moments(column, truth[q]).rmse;
            s.ratio_mu = uni > 0.0 ? m.rmse / uni : std::numeric_limits<double>::quiet_NaN();
        }
        report.quantities.push_back(std::move(s));
    }

    if (scenario.keep_raw) {
        report.raw.resize(static_cast<Eigen::Index>(kept.size()), static_cast<Eigen::Index>(names.size()));
        for (std::size_t r = 0; r < kept.size(); ++r)
            for (std::size_t q = 0; q < names.size(); ++q) report.raw(r, q) = kept[r]->values[q];
        if (scenario.univariate) {
            report.raw_univariate.resize(static_cast<Eigen::Index>(kept.size()), p);
            for (std::size_t r = 0; r < kept.size(); ++r)
                for (Eigen::Index l = 0; l < p; ++l) report.raw_univariate(r, l) = kept[r]->univariate[l];
        }
    }
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
}

std::vector<double> ratio_m_u(const Scenario& scenario) {
    Scenario s = scenario;
    s.univariate = true;
    const MCReport report = run_scenario(s);
    std::vector<double> out;
    for (Eigen::Index l = 0; l < s.model.d.size(); ++l) {
        const auto& q = report.find("d_" + idx(l));
        if (!q.ratio_mu || !std::isfinite(*q.ratio_mu))
            throw ScenarioError("univariate RMSE of channel " + idx(l) + " is zero; ratio undefined");
        out.push_back(*q.ratio_mu);
    }
    return out;
}

RateTable rate_check(const Scenario& base, const std::vector<Eigen::Index>& lengths, std::optional<double> beta) {
    if (lengths.empty()) throw ConfigError("at least one length is required");
    for (std::size_t i = 1; i < lengths.size(); ++i)
        if (lengths[i] <= lengths[i - 1]) throw ConfigError("lengths must be strictly increasing");
    RateTable table;
    const Eigen::Index p = base.model.d.size();
    for (const Eigen::Index n : lengths) {
        Scenario s = base;
        s.model.length = n;
        s.univariate = false;
        s.collect_omega = false;
        s.estimation.j1 = static_cast<int>(std::floor(std::log2(static_cast<double>(n))));
        if (beta) s.estimation.j0 = smoothness_rule_j0(n, *beta);
        const MCReport report = run_scenario(s);
        RateRow row;
        row.length = n;
        const ScaleRange scales =
            resolve_scales(n, p, WaveletSpec::daubechies(s.vanishing_moments), s.estimation);
        row.j0 = scales.j0;
        row.j1 = scales.j1;
        for (Eigen::Index l = 0; l < p; ++l) row.rmse.push_back(report.find("d_" + idx(l)).rmse);
        for (double r : row.rmse) row.mean_rmse += r;
        row.mean_rmse /= static_cast<double>(p);
        table.rows.push_back(std::move(row));
    }
    for (std::size_t i = 1; i < table.rows.size(); ++i)
        if (!(table.rows[i].mean_rmse < table.rows[i - 1].mean_rmse)) table.monotone_decreasing = false;
    if (table.rows.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const double k = static_cast<double>(table.rows.size());
        for (const auto& row : table.rows) {
            const double x = std::log(static_cast<double>(row.length));
            const double y = std::log(row.mean_rmse);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        table.slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    }
    return table;
}

WaveletCovarianceMC wavelet_covariance_mc(const ArfimaSpec& model, const WaveletSpec& spec, int max_scale,
                                          int replications, std::uint64_t root_seed, int threads) {
    if (replications < 2) throw ConfigError("at least two replications are needed for a standard error");
    const int feasible = max_feasible_scale(model.length, spec);
    if (max_scale < 1 || max_scale > feasible)
        throw InsufficientDataError("scale " + std::to_string(max_scale) + " is not available for N = " +
                                        std::to_string(model.length),
                                    feasible);
    std::vector<std::vector<Eigen::MatrixXd>> per_rep(static_cast<std::size_t>(replications));
    parallel_for(replications, threads, [&](int r) {
        ArfimaSpec m = model;
        m.seed = derive_seed(root_seed, static_cast<std::uint64_t>(r));
        const WaveletPyramid pyr = dwt_pyramid(simulate_arfima(m), spec, max_scale);
        auto& out = per_rep[static_cast<std::size_t>(r)];
        for (int j = 1; j <= max_scale; ++j) {
            const Eigen::MatrixXd& w = pyr.level(j);
            out.push_back(w.transpose() * w / static_cast<double>(w.rows()));
        }
    });

    WaveletCovarianceMC out;
    out.replications = replications;
    const double reps = static_cast<double>(replications);
    for (int j = 1; j <= max_scale; ++j) {
        const auto s = static_cast<std::size_t>(j - 1);
        Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(per_rep[0][s].rows(), per_rep[0][s].cols());
        for (const auto& r : per_rep) mean += r[s];
        mean /= reps;
        Eigen::MatrixXd ss = Eigen::MatrixXd::Zero(mean.rows(), mean.cols());
        for (const auto& r : per_rep) ss += (r[s] - mean).cwiseAbs2();
        out.mean.push_back(mean);
        out.std_error.push_back((ss / (reps - 1.0) / reps).cwiseSqrt());
        out.counts.push_back(coefficient_count(model.length, j, spec));
    }
    return out;
}

Histogram histogram(const std::vector<double>& values, int bins) {
    if (bins < 1) throw ConfigError("histogram needs at least one bin");
    std::vector<double> finite;
    for (double v : values)
        if (std::isfinite(v)) finite.push_back(v);
    if (finite.empty()) throw ConfigError("histogram needs at least one finite value");
    double lo = *std::min_element(finite.begin(), finite.end());
    double hi = *std::max_element(finite.begin(), finite.end());
    if (lo == hi) {
        lo -= 0.5;
        hi += 0.5;
    }
    Histogram h;
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    const double width = (hi - lo) / bins;
    for (int b = 0; b <= bins; ++b) h.edges.push_back(b == bins ? hi : lo + b * width);
    for (double v : finite) {
        auto b = static_cast<int>(std::floor((v - lo) / width));
        h.counts[static_cast<std::size_t>(std::clamp(b, 0, bins - 1))] += 1;
    }
    return h;
}

Scenario parse_scenario(std::istream& in) {
    Scenario s;
    std::map<std::string, int> seen;
    std::optional<std::vector<double>> d;
    std::optional<double> rho;
    std::optional<Eigen::MatrixXd> omega;
    int omega_line = 0;
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string text = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (text.empty()) continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos) throw ParseError("expected key = value", line, 1);
        const std::string key = trim(text.substr(0, eq));
        const std::string value = trim(text.substr(eq + 1));
        if (key.empty()) throw ParseError("missing key", line, 1);
        if (value.empty()) throw ParseError("missing value for '" + key + "'", line, static_cast<int>(eq) + 2);
        if (seen.count(key)) throw ParseError("duplicate key '" + key + "'", line, 1);
        seen[key] = line;

        if (key == "name") {
            s.name = value;
        } else if (key == "d") {
            d = to_list(value, line);
        } else if (key == "rho") {
            rho = to_double(value, line);
        } else if (key == "omega") {
            std::vector<std::vector<double>> rows;
            std::stringstream ss(value);
            std::string row;
            while (std::getline(ss, row, ';')) rows.push_back(to_list(row, line));
            for (const auto& r : rows)
                if (r.size() != rows.size()) throw ParseError("omega must be square", line);
            Eigen::MatrixXd m(rows.size(), rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i)
                for (std::size_t j = 0; j < rows.size(); ++j) m(i, j) = rows[i][j];
            omega = m;
            omega_line = line;
        } else if (key == "N") {
            s.model.length = to_integer(value, line);
        } else if (key == "M") {
            s.vanishing_moments = static_cast<int>(to_integer(value, line));
        } else if (key == "j0") {
            s.estimation.j0 = static_cast<int>(to_integer(value, line));
        } else if (key == "j1") {
            if (value == "auto")
                s.estimation.j1.reset();
            else
                s.estimation.j1 = static_cast<int>(to_integer(value, line));
        } else if (key == "reps") {
            s.replications = static_cast<int>(to_integer(value, line));
        } else if (key == "seed") {
            s.root_seed = static_cast<std::uint64_t>(to_integer(value, line));
        } else if (key == "truncation") {
            s.model.truncation = to_integer(value, line);
        } else if (key == "burn_in") {
            s.model.burn_in = to_integer(value, line);
        } else if (key == "threads") {
            s.threads = static_cast<int>(to_integer(value, line));
        } else if (key == "univariate") {
            s.univariate = to_bool(value, line);
        } else if (key == "omega_stats") {
            s.collect_omega = to_bool(value, line);
        } else {
            throw ParseError("unknown key '" + key + "'", line, 1);
        }
    }
    if (!d) throw ParseError("missing required key 'd'", line + 1);
    if (rho && omega) throw ParseError("give either rho or omega, not both", omega_line);
    const auto p = static_cast<Eigen::Index>(d->size());
    s.model.d = MemoryParams(Eigen::Map<const Eigen::VectorXd>(d->data(), p));
    if (omega) {
        if (omega->rows() != p) throw ParseError("omega size does not match d", omega_line);
        s.model.omega = LongRunCov(*omega);
    } else {
        s.model.omega = LongRunCov::equicorrelated(p, rho.value_or(0.0));
    }
    s.model.vanishing_moments = s.vanishing_moments;
    s.validate();
    return s;
}

Scenario parse_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    return parse_scenario(in);
}

std::string report_csv(const MCReport& report, const Scenario& scenario) {
    std::ostringstream out;
    out << "# mww " << kVersion << " Monte-Carlo report\n";
    out << "# name=" << scenario.name << "\n";
    out << "# d=" << join(scenario.model.d.values()) << "\n";
    out << "# omega=" << matrix_text(scenario.model.omega.matrix()) << "\n";
    out << "# N=" << scenario.model.length << " truncation=" << scenario.model.effective_truncation()
        << " burn_in=" << scenario.model.burn_in << "\n";
    out << "# M=" << scenario.vanishing_moments << " j0=" << scenario.estimation.j0
        << " j1=" << (scenario.estimation.j1 ? std::to_string(*scenario.estimation.j1) : "auto") << "\n";
    out << "# reps=" << scenario.replications << " seed=" << scenario.root_seed
        << " failures=" << report.failures << "\n";
    out << "quantity,truth,mean,bias,std,rmse,ratio_mu\n";
    for (const auto& q : report.quantities) {
        out << q.name << ',' << format_double(q.truth) << ',' << format_double(q.mean) << ','
            << format_double(q.bias) << ',' << format_double(q.std) << ',' << format_double(q.rmse) << ',';
        if (q.ratio_mu) out << format_double(*q.ratio_mu);
        out << '\n';
    }
    return out.str();
}

std::string report_json(const MCReport& report, const Scenario& scenario) {
    json j;
    j["config"] = config_json(scenario);
    j["replications"] = report.replications;
    j["failures"] = report.failures;
    json quantities = json::array();
    for (const auto& q : report.quantities) {
        json e;
        e["quantity"] = q.name;
        e["truth"] = number_or_null(q.truth);
        e["mean"] = number_or_null(q.mean);
        e["bias"] = number_or_null(q.bias);
        e["std"] = number_or_null(q.std);
        e["rmse"] = number_or_null(q.rmse);
        e["ratio_mu"] = q.ratio_mu ? number_or_null(*q.ratio_mu) : json(nullptr);
        quantities.push_back(e);
    }
    j["quantities"] = quantities;
    if (report.raw.size() > 0) {
        json raw = json::array();
        for (Eigen::Index r = 0; r < report.raw.rows(); ++r) {
            json row = json::array();
            for (Eigen::Index q = 0; q < report.raw.cols(); ++q) row.push_back(number_or_null(report.raw(r, q)));
            raw.push_back(row);
        }
        j["raw"] = raw;
    }
    return j.dump(2) + "\n";
}

}  // namespace mww
