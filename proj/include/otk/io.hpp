#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "otk/core.hpp"

// CSV ingestion, point clouds, and the command-line driver with its JSON
// report emission.

namespace otk {

/// Point cloud with optional weights (uniform when absent).
struct PointCloud {
  std::vector<Vector> points;  // all the same dimension
  std::optional<Histogram> weights;
};

/// Parses a rectangular comma-separated numeric grid, '.' decimal, no
/// header, LF or CRLF. Rejects ragged rows and non-finite values, with
/// line/column positions in the error message.
Matrix load_matrix(const std::string& path);

/// Parses one numeric vector per line; rows may have different lengths.
std::vector<Vector> load_rows(const std::string& path);

/// One point per CSV row.
PointCloud load_points(const std::string& path);

/// Symmetric zero-diagonal matrix of squared Euclidean distances.
CostMatrix pairwise_sqdist(const PointCloud& cloud);

/// Formats a double with 17 significant digits (exact round-trip).
std::string format_double(double v);

/// Runs one CLI invocation. Writes the JSON (or flattened CSV) report to
/// `out` and usage errors to `err`. Exit codes: 0 = computed and all
/// asserted properties pass, 1 = computed with a failed verdict,
/// 2 = usage or input error.
int run_command(const std::vector<std::string>& args, std::ostream& out,
                std::ostream& err);

}  // namespace otk
