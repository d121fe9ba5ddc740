#include "knobsync/data.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

namespace knobsync {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool parse_double(const std::string& field, double& out) {
  if (field.empty()) return false;
  const char* begin = field.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  return end == begin + field.size();
}

char detect_delimiter(const std::string& line) {
  const char candidates[] = {',', '\t', ';'};
  char best = ',';
  std::size_t best_count = 0;
  for (char c : candidates) {
    std::size_t count = static_cast<std::size_t>(std::count(line.begin(), line.end(), c));
    if (count > best_count) {
      best = c;
      best_count = count;
    }
  }
  return best_count > 0 ? best : '\0';  // '\0' = single-column file
}

std::vector<std::string> split_fields(const std::string& line, char delimiter) {
  std::vector<std::string> fields;
  if (delimiter == '\0') {
    fields.push_back(trim(line));
    return fields;
  }
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(delimiter, start);
    if (pos == std::string::npos) {
      fields.push_back(trim(line.substr(start)));
      break;
    }
    fields.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return fields;
}

}  // namespace

bool DataMatrix::fully_observed() const {
  return std::all_of(mask.begin(), mask.end(), [](std::uint8_t v) { return v != 0; });
}

std::size_t DataMatrix::observed_in_row(std::size_t i) const {
  std::size_t count = 0;
  for (std::size_t j = 0; j < p; ++j)
    if (mask[i * p + j]) ++count;
  return count;
}

RawTable read_delimited(const std::string& path, const std::string& missing_token,
                        bool detect_header) {
  std::ifstream in(path);
  if (!in) throw error(errc::io, "cannot open '" + path + "' for reading");

  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    lines.push_back(line);
  }
  if (lines.empty()) throw error(errc::parse, "'" + path + "' contains no data");

  RawTable table;
  table.delimiter = detect_delimiter(lines.front());

  std::vector<std::vector<std::string>> rows;
  rows.reserve(lines.size());
  for (const std::string& l : lines) rows.push_back(split_fields(l, table.delimiter));

  // First row is a header iff, when asked to look, every one of its fields is
  // neither numeric nor the missing token.
  std::size_t first_data = 0;
  if (detect_header && !rows.empty()) {
    bool all_non_numeric = true;
    for (const std::string& f : rows.front()) {
      double value;
      if (f == missing_token || parse_double(f, value)) {
        all_non_numeric = false;
        break;
      }
    }
    if (all_non_numeric) {
      table.has_header = true;
      table.header = rows.front();
      first_data = 1;
    }
  }
  table.cells.assign(rows.begin() + static_cast<long>(first_data), rows.end());
  if (table.cells.empty()) throw error(errc::parse, "'" + path + "' has a header but no data rows");
  return table;
}

DataMatrix matrix_from_table(const RawTable& table, const std::string& missing_token,
                             long exclude_col) {
  const std::size_t width =
      table.has_header ? table.header.size() : table.cells.front().size();
  if (exclude_col >= static_cast<long>(width))
    throw error(errc::bad_argument, "excluded column index out of range");

  std::size_t p = width - (exclude_col >= 0 ? 1 : 0);
  if (p == 0) throw error(errc::degenerate, "table has no feature columns");

  DataMatrix m;
  m.n = table.cells.size();
  m.p = p;
  m.values.assign(m.n * p, 0.0);
  m.mask.assign(m.n * p, 0);
  if (table.has_header) {
    for (std::size_t j = 0; j < width; ++j)
      if (static_cast<long>(j) != exclude_col) m.feature_names.push_back(table.header[j]);
  }

  for (std::size_t i = 0; i < m.n; ++i) {
    const auto& row = table.cells[i];
    if (row.size() != width) {
      std::ostringstream msg;
      msg << "row " << i << " has " << row.size() << " fields, expected " << width;
      throw error(errc::parse, msg.str());
    }
    std::size_t out_j = 0;
    std::size_t observed = 0;
    for (std::size_t j = 0; j < width; ++j) {
      if (static_cast<long>(j) == exclude_col) continue;
      const std::string& field = row[j];
      if (field == missing_token) {
        ++out_j;
        continue;
      }
      double value;
      if (!parse_double(field, value)) {
        std::ostringstream msg;
        msg << "cannot parse '" << field << "' as a number at row " << i << " col " << j;
        throw error(errc::parse, msg.str());
      }
      m.values[i * p + out_j] = value;
      m.mask[i * p + out_j] = 1;
      ++observed;
      ++out_j;
    }
    if (observed == 0) {
      std::ostringstream msg;
      msg << "row " << i << " has no observed values";
      throw error(errc::degenerate, msg.str());
    }
  }
  return m;
}

DataMatrix load_matrix(const std::string& path, const std::string& missing_token,
                       bool has_header) {
  RawTable table = read_delimited(path, missing_token, has_header);
  return matrix_from_table(table, missing_token);
}

void save_matrix(const DataMatrix& m, const std::string& path,
                 const std::string& missing_token, char delimiter) {
  std::ofstream out(path);
  if (!out) throw error(errc::io, "cannot open '" + path + "' for writing");
  if (!m.feature_names.empty()) {
    for (std::size_t j = 0; j < m.p; ++j) {
      if (j) out << delimiter;
      out << m.feature_names[j];
    }
    out << '\n';
  }
  char buf[64];
  for (std::size_t i = 0; i < m.n; ++i) {
    for (std::size_t j = 0; j < m.p; ++j) {
      if (j) out << delimiter;
      if (m.observed(i, j)) {
        std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
        out << buf;
      } else {
        out << missing_token;
      }
    }
    out << '\n';
  }
  if (!out) throw error(errc::io, "failed while writing '" + path + "'");
}

std::vector<double> feature_sds(const DataMatrix& m) {
  std::vector<double> sds(m.p, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t j = 0; j < m.p; ++j) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < m.n; ++i) {
      if (!m.observed(i, j)) continue;
      sum += m(i, j);
      ++count;
    }
    if (count < 2) continue;
    double mean = sum / static_cast<double>(count);
    double ss = 0.0;
    for (std::size_t i = 0; i < m.n; ++i) {
      if (!m.observed(i, j)) continue;
      double d = m(i, j) - mean;
      ss += d * d;
    }
    sds[j] = std::sqrt(ss / static_cast<double>(count - 1));
  }
  return sds;
}

bool scaling_recommended(const DataMatrix& m) {
  std::vector<double> sds = feature_sds(m);
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (double sd : sds) {
    if (std::isnan(sd)) continue;
    lo = std::min(lo, sd);
    hi = std::max(hi, sd);
  }
  return std::isfinite(lo) && hi > 4.0 * lo;
}

std::pair<DataMatrix, ScalingSpec> standardize(const DataMatrix& m, ScaleMode mode) {
  ScalingSpec spec;
  spec.mode = mode;
  if (mode == ScaleMode::none) return {m, spec};

  spec.sds = feature_sds(m);
  for (std::size_t j = 0; j < m.p; ++j) {
    if (std::isnan(spec.sds[j]) || spec.sds[j] == 0.0) {
      std::ostringstream msg;
      msg << "feature " << j;
      if (j < m.feature_names.size()) msg << " ('" << m.feature_names[j] << "')";
      msg << " has zero variance; cannot scale by standard deviation";
      throw error(errc::degenerate, msg.str());
    }
  }

  DataMatrix out = m;
  for (std::size_t i = 0; i < m.n; ++i)
    for (std::size_t j = 0; j < m.p; ++j)
      if (out.observed(i, j)) out.values[i * m.p + j] /= spec.sds[j];
  return {std::move(out), spec};
}

DataMatrix pca_project(const DataMatrix& m, std::size_t num_components,
                       bool use_correlation) {
  if (!m.fully_observed())
    throw error(errc::bad_argument, "PCA requires fully observed data");
  if (num_components < 1 || num_components > m.p)
    throw error(errc::bad_argument, "number of components must be in 1..p");
  if (m.n < 2) throw error(errc::degenerate, "PCA requires at least two rows");

  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
      x(m.values.data(), static_cast<Eigen::Index>(m.n), static_cast<Eigen::Index>(m.p));
  Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  if (use_correlation) {
    Eigen::VectorXd sd =
        (centered.array().square().colwise().sum() / double(m.n - 1)).sqrt();
    for (Eigen::Index j = 0; j < sd.size(); ++j) {
      if (sd[j] == 0.0)
        throw error(errc::degenerate, "zero-variance feature in correlation PCA");
      centered.col(j) /= sd[j];
    }
  }
  Eigen::MatrixXd cov = (centered.transpose() * centered) / double(m.n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success)
    throw error(errc::no_convergence, "eigendecomposition failed");

  // Eigen returns ascending eigenvalues; take the top ones in descending
  // order and fix each component's sign (first nonzero loading positive).
  Eigen::MatrixXd loadings(m.p, num_components);
  for (std::size_t c = 0; c < num_components; ++c) {
    Eigen::VectorXd v = solver.eigenvectors().col(static_cast<Eigen::Index>(m.p - 1 - c));
    for (Eigen::Index j = 0; j < v.size(); ++j) {
      if (std::abs(v[j]) > 1e-12) {
        if (v[j] < 0.0) v = -v;
        break;
      }
    }
    loadings.col(static_cast<Eigen::Index>(c)) = v;
  }

  Eigen::MatrixXd scores = centered * loadings;
  DataMatrix out;
  out.n = m.n;
  out.p = num_components;
  out.values.resize(out.n * out.p);
  out.mask.assign(out.n * out.p, 1);
  for (std::size_t i = 0; i < out.n; ++i)
    for (std::size_t j = 0; j < out.p; ++j)
      out.values[i * out.p + j] =
          scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  for (std::size_t j = 0; j < num_components; ++j)
    out.feature_names.push_back("PC" + std::to_string(j + 1));
  return out;
}

}  // namespace knobsync
