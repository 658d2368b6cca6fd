#include "doctest.h"

#include "mww/errors.hpp"
#include "mww/panel_io.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

using namespace mww;
namespace fs = std::filesystem;

namespace {

struct ParsePosition {
    int line = -1;
    int column = -1;
};

ParsePosition parse_error_at(const std::string& text) {
    std::istringstream in(text);
    try {
        read_panel_csv(in);
    } catch (const ParseError& e) {
        return {e.line(), e.column()};
    }
    return {};
}

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "mww_panel_io_test";
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("round trip preserves every bit") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd x(50, 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng) * std::pow(10.0, (i % 7) - 3);
    x(0, 0) = 0.1;
    x(1, 1) = -0.0;
    x(2, 2) = 1e-300;
    const TimeSeriesPanel panel(x, {"alpha", "beta, quoted", "gamma"});
    std::ostringstream out;
    write_panel_csv(out, panel, {"simulated", "seed=1"});
    const std::string text = out.str();
    CHECK(text.rfind("# simulated\n# seed=1\n", 0) == 0);
    CHECK(text.find("\"beta, quoted\"") != std::string::npos);

    std::istringstream in(text);
    const TimeSeriesPanel back = read_panel_csv(in);
    CHECK(back.samples() == x);
    CHECK(back.names() == panel.names());
}

TEST_CASE("reader accepts comments, blank lines, CRLF, BOM and quotes") {
    std::istringstream in("\xEF\xBB\xBF# header comment\r\nx,\"y\"\r\n1, 2\r\n\r\n# middle\r\n\"3\",+4e0\r\n");
    const TimeSeriesPanel p = read_panel_csv(in);
    REQUIRE(p.length() == 2);
    CHECK(p.names() == std::vector<std::string>{"x", "y"});
    CHECK(p.samples()(0, 1) == 2.0);
    CHECK(p.samples()(1, 0) == 3.0);
    CHECK(p.samples()(1, 1) == 4.0);
}

TEST_CASE("reader errors carry line and column") {
    ParsePosition at = parse_error_at("");
    CHECK(at.line == 1);
    CHECK(at.column == 1);

    at = parse_error_at("a,b\n");
    CHECK(at.line == 2);

    at = parse_error_at("a,b\n1,2\n3,\n");
    CHECK(at.line == 3);
    CHECK(at.column == 3);

    at = parse_error_at("a,b\n1,2\n3,abc\n");
    CHECK(at.line == 3);
    CHECK(at.column == 3);

    at = parse_error_at("a,b\n1,2\n3,2,5\n");
    CHECK(at.line == 3);

    at = parse_error_at("a,b\n1,nan\n");
    CHECK(at.line == 2);
    CHECK(at.column == 3);

    at = parse_error_at("a,b\n1,inf\n");
    CHECK(at.line == 2);

    at = parse_error_at("a,b\n1e999,1\n");
    CHECK(at.line == 2);
    CHECK(at.column == 1);

    at = parse_error_at("a,b\n\"1,2\n");
    CHECK(at.line == 2);

    at = parse_error_at("a,\n1,2\n");
    CHECK(at.line == 1);
    CHECK(at.column == 3);
}

TEST_CASE("omega file") {
    const fs::path dir = temp_dir();
    const fs::path good = dir / "omega.csv";
    {
        std::ofstream f(good);
        f << "1,0.3\n0.3,2\n";
    }
    const LongRunCov omega = read_omega_file(good.string());
    CHECK(omega(0, 1) == 0.3);
    CHECK(omega(1, 1) == 2.0);

    const fs::path rect = dir / "rect.csv";
    {
        std::ofstream f(rect);
        f << "1,0.3,0\n0.3,2,0\n";
    }
    CHECK_THROWS_AS(read_omega_file(rect.string()), CovarianceError);

    const fs::path indefinite = dir / "indefinite.csv";
    {
        std::ofstream f(indefinite);
        f << "1,1.5\n1.5,1\n";
    }
    CHECK_THROWS_AS(read_omega_file(indefinite.string()), CovarianceError);

    const fs::path ragged = dir / "ragged.csv";
    {
        std::ofstream f(ragged);
        f << "1,0\n0\n";
    }
    CHECK_THROWS_AS(read_omega_file(ragged.string()), ParseError);
    CHECK_THROWS_AS(read_omega_file((dir / "missing.csv").string()), ConfigError);
}

TEST_CASE("atomic writes replace the target") {
    const fs::path path = temp_dir() / "atomic.txt";
    write_file_atomic(path.string(), "first\n");
    write_file_atomic(path.string(), "second\n");
    std::ifstream in(path);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(content == "second\n");
    CHECK_FALSE(fs::exists(path.string() + ".tmp"));
    CHECK_THROWS_AS(write_file_atomic("/nonexistent/dir/file.txt", "x"), ConfigError);
    CHECK_THROWS_AS(read_panel_csv_file("/nonexistent/panel.csv"), ConfigError);
}

TEST_CASE("shortest round-trip formatting") {
    CHECK(format_double(0.2) == "0.2");
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(-3.5e-8) == "-3.5e-08");
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i) {
        const double v = u(rng) / (1 + i);
        CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
    }
    CHECK(std::strtod(format_double(std::numeric_limits<double>::denorm_min()).c_str(), nullptr) ==
          std::numeric_limits<double>::denorm_min());
}
