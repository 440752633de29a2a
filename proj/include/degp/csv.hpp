#pragma once

#include <string>
#include <vector>

#include "degp/tensor.hpp"

namespace degp::io {

/// Comma-separated table as strings; no quoting or escapes, trimmed cells.
/// Missing file or ragged rows -> runtime_error naming the path.
std::vector<std::vector<std::string>> read_csv(const std::string& path);

/// All-numeric CSV (optional single header row autodetected) as a matrix.
nd::Tensor read_numeric_csv(const std::string& path);

/// Doubles are written with max round-trip precision so re-runs can be
/// compared byte for byte.
std::string format_double(double v);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace degp::io
