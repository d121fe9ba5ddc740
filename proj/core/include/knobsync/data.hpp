#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "knobsync/error.hpp"

namespace knobsync {

// Numeric n x p matrix with an observation mask. mask[i*p+j] == 1 means the
// cell was observed; values at masked-out cells are never read.
struct DataMatrix {
  std::size_t n = 0;
  std::size_t p = 0;
  std::vector<double> values;        // row-major, n*p
  std::vector<std::uint8_t> mask;    // row-major, n*p, 1 = observed
  std::vector<std::string> feature_names;  // empty, or exactly p names

  double operator()(std::size_t i, std::size_t j) const { return values[i * p + j]; }
  bool observed(std::size_t i, std::size_t j) const { return mask[i * p + j] != 0; }

  bool fully_observed() const;
  std::size_t observed_in_row(std::size_t i) const;
};

enum class ScaleMode { none, per_feature_sd };

struct ScalingSpec {
  ScaleMode mode = ScaleMode::none;
  std::vector<double> sds;  // present (size p) when mode == per_feature_sd
};

// Tokenized delimiter-separated file, before numeric interpretation.
struct RawTable {
  std::vector<std::string> header;              // empty when has_header false
  std::vector<std::vector<std::string>> cells;  // data rows only
  char delimiter = ',';
  bool has_header = false;
};

// Reads a delimited text file. The delimiter is auto-detected from the first
// non-empty line among {',', '\t', ';'}; a line with none of them is a single
// column. When detect_header is true the first row is treated as a header iff
// every field in it is neither numeric nor the missing token.
RawTable read_delimited(const std::string& path, const std::string& missing_token,
                        bool detect_header);

// Builds a DataMatrix from a RawTable, optionally excluding one column (used
// by the CLI to carve out a truth-label column). exclude_col < 0 keeps all.
DataMatrix matrix_from_table(const RawTable& table, const std::string& missing_token,
                             long exclude_col = -1);

DataMatrix load_matrix(const std::string& path, const std::string& missing_token = "NA",
                       bool has_header = false);

// Writes the matrix back out (delimited text, full round-trip precision,
// masked cells as missing_token). Counterpart of load_matrix.
void save_matrix(const DataMatrix& m, const std::string& path,
                 const std::string& missing_token = "NA", char delimiter = ',');

// Per-feature sample standard deviations over observed cells (divisor n-1).
// Features with fewer than two observed cells get NaN.
std::vector<double> feature_sds(const DataMatrix& m);

// Rule of thumb: scaling is worth a look when the most variable feature's sd
// exceeds four times the least variable one's. Advisory only, never applied
// automatically.
bool scaling_recommended(const DataMatrix& m);

std::pair<DataMatrix, ScalingSpec> standardize(const DataMatrix& m, ScaleMode mode);

// Principal-component scores of a fully observed matrix. Components are
// ordered by descending eigenvalue of the covariance (or correlation) matrix;
// the first nonzero loading of each component is made positive so output is
// reproducible across eigensolvers.
DataMatrix pca_project(const DataMatrix& m, std::size_t num_components,
                       bool use_correlation = false);

}  // namespace knobsync
