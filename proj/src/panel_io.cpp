#include "mww/panel_io.hpp"

#include "mww/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <sstream>

namespace mww {

namespace {

struct Field {
    std::string text;
    int line;
    int column;
    bool quoted;
};

using Record = std::vector<Field>;

// Splits RFC 4180 text into records. '#' at the start of a record marks a
// comment line; blank lines are skipped.
class CsvReader {
public:
    explicit CsvReader(std::string text) : text_(std::move(text)) {}

    bool next(Record& record) {
        record.clear();
        while (pos_ < text_.size()) {
            const char c = text_[pos_];
            if (c == '#') {
                skip_line();
            } else if (c == '\n' || c == '\r') {
                consume_newline();
            } else {
                break;
            }
        }
        if (pos_ >= text_.size()) return false;
        record_line_ = line_;
        while (true) {
            record.push_back(read_field());
            if (pos_ >= text_.size()) return true;
            const char c = text_[pos_];
            if (c == ',') {
                advance();
                continue;
            }
            consume_newline();
            return true;
        }
    }

    int record_line() const { return record_line_; }

private:
    void advance() {
        ++pos_;
        ++column_;
    }

    void consume_newline() {
        if (text_[pos_] == '\r') ++pos_;
        if (pos_ < text_.size() && text_[pos_] == '\n') ++pos_;
        ++line_;
        column_ = 1;
    }

    void skip_line() {
        while (pos_ < text_.size() && text_[pos_] != '\n' && text_[pos_] != '\r') ++pos_;
        if (pos_ < text_.size()) consume_newline();
    }

    Field read_field() {
        Field f{{}, line_, column_, false};
        if (pos_ < text_.size() && text_[pos_] == '"') {
            f.quoted = true;
            advance();
            while (true) {
                if (pos_ >= text_.size()) throw ParseError("unterminated quoted field", f.line, f.column);
                const char c = text_[pos_];
                if (c == '"') {
                    if (pos_ + 1 < text_.size() && text_[pos_ + 1] == '"') {
                        f.text.push_back('"');
                        advance();
                        advance();
                        continue;
                    }
                    advance();
                    break;
                }
                if (c == '\n') {
                    f.text.push_back(c);
                    ++pos_;
                    ++line_;
                    column_ = 1;
                    continue;
                }
                f.text.push_back(c);
                advance();
            }
            if (pos_ < text_.size() && text_[pos_] != ',' && text_[pos_] != '\n' && text_[pos_] != '\r')
                throw ParseError("unexpected character after closing quote", line_, column_);
            return f;
        }
        while (pos_ < text_.size()) {
            const char c = text_[pos_];
            if (c == ',' || c == '\n' || c == '\r') break;
            if (c == '"') throw ParseError("quote inside an unquoted field", line_, column_);
            f.text.push_back(c);
            advance();
        }
        return f;
    }

    std::string text_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int column_ = 1;
    int record_line_ = 1;
};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

double parse_number(const Field& f) {
    const std::string t = trim(f.text);
    if (t.empty()) throw ParseError("missing value", f.line, f.column);
    const char* first = t.data();
    const char* last = t.data() + t.size();
    if (*first == '+') ++first;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) throw ParseError("not a number: '" + t + "'", f.line, f.column);
    if (!std::isfinite(value)) throw ParseError("non-finite value: '" + t + "'", f.line, f.column);
    return value;
}

std::string read_all(std::istream& in) {
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::string strip_bom(std::string text) {
    if (text.rfind("\xEF\xBB\xBF", 0) == 0) text.erase(0, 3);
    return text;
}

std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos && !s.empty() && s.front() != '#') return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    return out + "\"";
}

}  // namespace

std::string format_double(double value) {
    char buf[32];
    for (int precision = 15; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof buf, "%.*g", precision, value);
        if (precision == 17 || std::strtod(buf, nullptr) == value) break;
    }
    return buf;
}

TimeSeriesPanel read_panel_csv(std::istream& in) {
    CsvReader reader(strip_bom(read_all(in)));
    Record record;
    if (!reader.next(record)) throw ParseError("empty input: a header row is required", 1, 1);
    std::vector<std::string> names;
    for (const auto& f : record) {
        const std::string name = f.quoted ? f.text : trim(f.text);
        if (name.empty()) throw ParseError("empty channel name in header", f.line, f.column);
        names.push_back(name);
    }
    const std::size_t p = names.size();

    std::vector<double> values;
    Eigen::Index rows = 0;
    while (reader.next(record)) {
        if (record.size() != p)
            throw ParseError("expected " + std::to_string(p) + " fields, found " + std::to_string(record.size()),
                             reader.record_line(), 1);
        for (const auto& f : record) values.push_back(parse_number(f));
        ++rows;
    }
    if (rows == 0) throw ParseError("no data rows after the header", reader.record_line() + 1, 1);

    Eigen::MatrixXd samples(rows, static_cast<Eigen::Index>(p));
    for (Eigen::Index t = 0; t < rows; ++t)
        for (std::size_t c = 0; c < p; ++c) samples(t, static_cast<Eigen::Index>(c)) = values[t * p + c];
    return TimeSeriesPanel(std::move(samples), std::move(names));
}

TimeSeriesPanel read_panel_csv_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    return read_panel_csv(in);
}

void write_panel_csv(std::ostream& out, const TimeSeriesPanel& panel, const std::vector<std::string>& comments) {
    for (const auto& c : comments) out << "# " << c << '\n';
    const auto& names = panel.names();
    for (std::size_t c = 0; c < names.size(); ++c) out << (c ? "," : "") << quote_if_needed(names[c]);
    out << '\n';
    const auto& x = panel.samples();
    for (Eigen::Index t = 0; t < x.rows(); ++t) {
        for (Eigen::Index c = 0; c < x.cols(); ++c) out << (c ? "," : "") << format_double(x(t, c));
        out << '\n';
    }
}

LongRunCov read_omega_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    CsvReader reader(strip_bom(read_all(in)));
    Record record;
    std::vector<std::vector<double>> rows;
    while (reader.next(record)) {
        std::vector<double> row;
        for (const auto& f : record) row.push_back(parse_number(f));
        if (!rows.empty() && row.size() != rows.front().size())
            throw ParseError("row has " + std::to_string(row.size()) + " entries, expected " +
                                 std::to_string(rows.front().size()),
                             reader.record_line(), 1);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError("empty covariance file", 1, 1);
    if (rows.size() != rows.front().size())
        throw CovarianceError("covariance file holds a " + std::to_string(rows.size()) + "x" +
                              std::to_string(rows.front().size()) + " matrix");
    const auto p = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd omega(p, p);
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j < p; ++j) omega(i, j) = rows[i][j];
    return LongRunCov(std::move(omega));
}

void write_file_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    fs::path temp = target;
    temp += ".tmp";
    {
        std::ofstream out(temp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write '" + temp.string() + "'");
        out << content;
        out.flush();
        if (!out) throw ConfigError("write to '" + temp.string() + "' failed");
    }
    std::error_code ec;
    fs::rename(temp, target, ec);
    if (ec) {
        fs::remove(temp);
        throw ConfigError("cannot rename onto '" + path + "': " + ec.message());
    }
}

}  // namespace mww
