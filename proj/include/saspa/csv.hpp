#pragma once

// Delimited-text ingestion and export, feature standardization and seeded
// train/test splitting.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "saspa/dataset.hpp"
#include "saspa/random.hpp"

namespace saspa {

struct CsvOptions {
  Task task = Task::regression;
  char delimiter = ',';
  /// Column holding the output; negative values count from the end.
  int label_column = -1;
  /// Classification label value mapped to +1; the single other value maps
  /// to -1.
  std::string positive_label = "1";
};

namespace detail {

inline std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_line(const std::string &line, char delim) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, delim)) {
    cells.push_back(trim(cell));
  }
  if (!line.empty() && line.back() == delim) {
    cells.emplace_back();
  }
  return cells;
}

inline std::optional<double> parse_number(const std::string &s) {
  if (s.empty()) {
    return std::nullopt;
  }
  double v = 0.0;
  const char *first = s.data();
  if (*first == '+') {
    ++first;
  }
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    return std::nullopt;
  }
  return v;
}

inline bool same_label(const std::string &a, const std::string &b) {
  if (a == b) {
    return true;
  }
  const auto na = parse_number(a);
  const auto nb = parse_number(b);
  return na && nb && *na == *nb;
}

} // namespace detail

/// Parses a delimited file. A first row containing any non-numeric cell is
/// taken as a header. Errors name the 1-based line and column.
inline Dataset load_csv(const std::string &path, const CsvOptions &opts = {}) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open '" + path + "'");
  }
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) {
      continue;
    }
    rows.push_back(detail::split_line(line, opts.delimiter));
    line_numbers.push_back(lineno);
  }
  if (rows.empty()) {
    throw DataError("'" + path + "' contains no data rows");
  }
  const auto ncol = rows.front().size();
  if (ncol < 2) {
    throw DataError("'" + path + "' needs at least one feature and a label");
  }
  const int label_col = opts.label_column < 0
                            ? static_cast<int>(ncol) + opts.label_column
                            : opts.label_column;
  if (label_col < 0 || label_col >= static_cast<int>(ncol)) {
    throw UsageError("label column out of range");
  }
  // Class labels may be symbolic, so they do not count towards detection.
  std::vector<std::string> header;
  bool has_header = false;
  for (std::size_t c = 0; c < rows.front().size(); ++c) {
    const bool symbolic_ok = opts.task == Task::classification &&
                             static_cast<int>(c) == label_col;
    if (!symbolic_ok && !detail::parse_number(rows.front()[c])) {
      has_header = true;
    }
  }
  if (has_header) {
    header = rows.front();
    rows.erase(rows.begin());
    line_numbers.erase(line_numbers.begin());
  }
  if (rows.empty()) {
    throw DataError("'" + path + "' contains a header but no data rows");
  }

  Dataset out;
  out.task = opts.task;
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(ncol - 1);
  out.inputs.resize(n, d);
  out.outputs.resize(n);
  for (std::size_t c = 0; c < ncol; ++c) {
    if (static_cast<int>(c) == label_col) {
      continue;
    }
    out.feature_names.push_back(has_header ? header[c]
                                           : "x" + std::to_string(c + 1));
  }
  std::set<std::string> negatives;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto &cells = rows[r];
    const auto where = "line " + std::to_string(line_numbers[r]);
    if (cells.size() != ncol) {
      throw DataError(where + ": expected " + std::to_string(ncol) +
                      " fields, found " + std::to_string(cells.size()));
    }
    Eigen::Index f = 0;
    for (std::size_t c = 0; c < ncol; ++c) {
      const auto &cell = cells[c];
      if (static_cast<int>(c) == label_col) {
        if (opts.task == Task::classification) {
          if (detail::same_label(cell, opts.positive_label)) {
            out.outputs(static_cast<Eigen::Index>(r)) = 1.0;
          } else {
            negatives.insert(cell);
            out.outputs(static_cast<Eigen::Index>(r)) = -1.0;
          }
          continue;
        }
      }
      const auto v = detail::parse_number(cell);
      if (!v || !std::isfinite(*v)) {
        throw DataError(where + ", column " + std::to_string(c + 1) +
                        ": non-numeric value '" + cell + "'");
      }
      if (static_cast<int>(c) == label_col) {
        out.outputs(static_cast<Eigen::Index>(r)) = *v;
      } else {
        out.inputs(static_cast<Eigen::Index>(r), f++) = *v;
      }
    }
  }
  if (opts.task == Task::classification) {
    // Numeric spellings of one value ("0", "0.0") count once.
    std::vector<std::string> distinct;
    for (const auto &s : negatives) {
      bool seen = false;
      for (const auto &t : distinct) {
        seen = seen || detail::same_label(s, t);
      }
      if (!seen) {
        distinct.push_back(s);
      }
    }
    if (distinct.size() > 1) {
      throw DataError("classification labels are not binary: found more than "
                      "one value besides '" + opts.positive_label + "'");
    }
  }
  out.validate();
  return out;
}

/// Writes features then the output column, with a header row, using 17
/// significant digits.
inline void write_csv(const std::string &path, const Dataset &data,
                      char delimiter = ',') {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot write '" + path + "'");
  }
  out << std::setprecision(17);
  for (Eigen::Index c = 0; c < data.dim(); ++c) {
    const auto name = static_cast<std::size_t>(c) < data.feature_names.size()
                          ? data.feature_names[static_cast<std::size_t>(c)]
                          : "x" + std::to_string(c + 1);
    out << name << delimiter;
  }
  out << "y\n";
  for (Eigen::Index r = 0; r < data.size(); ++r) {
    for (Eigen::Index c = 0; c < data.dim(); ++c) {
      out << data.inputs(r, c) << delimiter;
    }
    out << data.outputs(r) << '\n';
  }
}

/// Per-feature affine map to zero mean and unit variance (sample standard
/// deviation). Constant features keep scale 1.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static Standardizer fit(const Eigen::MatrixXd &inputs) {
    detail::require(inputs.rows() >= 1, "standardizer needs data");
    Standardizer s;
    s.mean = inputs.colwise().mean().transpose();
    s.scale.resize(inputs.cols());
    for (Eigen::Index c = 0; c < inputs.cols(); ++c) {
      const double ss = (inputs.col(c).array() - s.mean(c)).square().sum();
      const double sd =
          inputs.rows() > 1 ? std::sqrt(ss / static_cast<double>(inputs.rows() - 1))
                            : 0.0;
      s.scale(c) = sd > 0.0 ? sd : 1.0;
    }
    return s;
  }

  Eigen::VectorXd apply(const Eigen::VectorXd &x) const {
    return (x - mean).cwiseQuotient(scale);
  }

  Eigen::MatrixXd apply(const Eigen::MatrixXd &inputs) const {
    return (inputs.rowwise() - mean.transpose()).array().rowwise() /
           scale.transpose().array();
  }

  Eigen::MatrixXd invert(const Eigen::MatrixXd &z) const {
    return (z.array().rowwise() * scale.transpose().array()).matrix().rowwise() +
           mean.transpose();
  }
};

/// Seeded uniform shuffle, then the first n_train rows train and the rest
/// test.
inline std::pair<Dataset, Dataset>
train_test_split(const Dataset &data, Eigen::Index n_train, std::uint64_t seed) {
  if (n_train < 1 || n_train >= data.size()) {
    throw UsageError("train size must lie in [1, N - 1]; N = " +
                     std::to_string(data.size()));
  }
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(data.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    idx[i] = static_cast<Eigen::Index>(i);
  }
  std::mt19937_64 rng(seed);
  detail::shuffle(idx, rng);
  const std::vector<Eigen::Index> tr(idx.begin(), idx.begin() + n_train);
  const std::vector<Eigen::Index> te(idx.begin() + n_train, idx.end());
  return {data.subset(tr), data.subset(te)};
}

} // namespace saspa
