#pragma once

#include "mww/lrd_model.hpp"
#include "mww/panel.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace mww {

/// Reads a comma-separated panel: one mandatory header row of channel names,
/// then one row per time point. Lines starting with '#' before or between
/// records are skipped. Quoted fields follow RFC 4180. Empty, missing or
/// non-numeric cells raise ParseError with the 1-based line and column.
TimeSeriesPanel read_panel_csv(std::istream& in);
TimeSeriesPanel read_panel_csv_file(const std::string& path);

/// Writes the header and samples at round-trip precision. Each entry of
/// comments becomes a leading "# " line.
void write_panel_csv(std::ostream& out, const TimeSeriesPanel& panel,
                     const std::vector<std::string>& comments = {});

/// Reads a square matrix, one comma-separated row per line, no header.
/// Throws ParseError on malformed text and CovarianceError when the matrix
/// is not symmetric positive definite.
LongRunCov read_omega_file(const std::string& path);

/// Writes content to a sibling temporary file and renames it over path.
void write_file_atomic(const std::string& path, const std::string& content);

/// Shortest "%.15g".."%.17g" rendering that reads back to the same double.
std::string format_double(double value);

}  // namespace mww
