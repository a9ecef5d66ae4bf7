#include "catef/dataset.hpp"

#include "catef/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace catef {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_cell(const std::string& cell, std::size_t row, const std::string& col) {
  if (cell.empty() || cell == "NA" || cell == "na") {
    throw InputError("missing value in column '" + col + "', data row " + std::to_string(row));
  }
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) {
    throw InputError("non-numeric cell '" + cell + "' in column '" + col + "', data row " +
                     std::to_string(row));
  }
  return value;
}

} // namespace

Dataset make_dataset(Eigen::VectorXd y, Eigen::VectorXd d, Eigen::MatrixXd z,
                     std::vector<Eigen::Index> x_cols) {
  const Eigen::Index n = y.size();
  if (n < 1) throw InputError("dataset is empty");
  if (d.size() != n || z.rows() != n) {
    throw InputError("y, d and z must have the same number of rows");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(d[i] == 0.0 || d[i] == 1.0)) {
      throw InputError("invalid treatment value " + std::to_string(d[i]) + " at row " +
                       std::to_string(i) + " (must be exactly 0 or 1)");
    }
  }
  if (!y.allFinite() || !z.allFinite()) {
    throw InputError("non-finite value in outcome or covariates");
  }
  if (x_cols.empty() || x_cols.size() > 3) {
    throw InputError("x_cols must select one to three columns");
  }
  std::set<Eigen::Index> seen;
  for (const Eigen::Index c : x_cols) {
    if (c < 0 || c >= z.cols()) {
      throw InputError("x_cols index " + std::to_string(c) + " out of range");
    }
    if (!seen.insert(c).second) {
      throw InputError("x_cols index " + std::to_string(c) + " repeated");
    }
  }
  return Dataset{std::move(y), std::move(d), std::move(z), std::move(x_cols)};
}

Eigen::MatrixXd x_matrix(const Dataset& data) {
  Eigen::MatrixXd x(data.n(), data.dim_x());
  for (Eigen::Index j = 0; j < data.dim_x(); ++j) x.col(j) = data.z.col(data.x_cols[j]);
  return x;
}

void validate_design(const DesignSpec& spec, Eigen::Index p) {
  auto check = [p](Eigen::Index c) {
    if (c < 0 || c >= p) {
      throw InputError("design spec references column " + std::to_string(c) +
                       " outside [0, " + std::to_string(p) + ")");
    }
  };
  std::set<Eigen::Index> base;
  for (const Eigen::Index c : spec.base_cols) {
    check(c);
    if (!base.insert(c).second) throw InputError("duplicated base column " + std::to_string(c));
  }
  // A square and an interaction (i,i) produce the same column; treat both as
  // one specification when checking duplicates.
  std::set<std::pair<Eigen::Index, Eigen::Index>> quad;
  for (const Eigen::Index c : spec.squares) {
    check(c);
    if (!quad.insert({c, c}).second) throw InputError("duplicated square of column " + std::to_string(c));
  }
  for (const auto& [a, b] : spec.interactions) {
    check(a);
    check(b);
    const auto key = std::minmax(a, b);
    if (!quad.insert(key).second) {
      throw InputError("duplicated interaction (" + std::to_string(a) + "," + std::to_string(b) + ")");
    }
  }
}

Eigen::MatrixXd build_design(const Dataset& data, const DesignSpec& spec) {
  validate_design(spec, data.p());
  const Eigen::Index n = data.n();
  Eigen::MatrixXd design(n, spec.width());
  Eigen::Index col = 0;
  if (spec.add_intercept) design.col(col++).setOnes();
  for (const Eigen::Index c : spec.base_cols) design.col(col++) = data.z.col(c);
  for (const Eigen::Index c : spec.squares) design.col(col++) = data.z.col(c).array().square();
  for (const auto& [a, b] : spec.interactions) {
    design.col(col++) = data.z.col(a).array() * data.z.col(b).array();
  }
  return design;
}

Dataset load_csv(const std::string& path, const std::string& outcome,
                 const std::string& treatment, const std::vector<std::string>& covariates,
                 const std::vector<std::string>& x_cols) {
  std::ifstream file(path);
  if (!file) throw InputError("cannot open file '" + path + "'");

  std::string line;
  if (!std::getline(file, line)) throw InputError("empty file '" + path + "'");
  // Strip a UTF-8 BOM if present.
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const std::vector<std::string> header = split_line(line);

  auto column_index = [&header](const std::string& name) {
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (header[j] == name) return j;
    }
    throw InputError("missing column '" + name + "'");
  };

  const std::size_t y_idx = column_index(outcome);
  const std::size_t d_idx = column_index(treatment);
  if (covariates.empty()) throw InputError("no covariate columns given");
  std::vector<std::size_t> z_idx;
  z_idx.reserve(covariates.size());
  for (const auto& name : covariates) z_idx.push_back(column_index(name));

  std::vector<Eigen::Index> x_indices;
  for (const auto& name : x_cols) {
    const auto it = std::find(covariates.begin(), covariates.end(), name);
    if (it == covariates.end()) {
      throw InputError("x column '" + name + "' is not among the covariates");
    }
    x_indices.push_back(static_cast<Eigen::Index>(it - covariates.begin()));
  }

  std::vector<double> y_vals, d_vals;
  std::vector<std::vector<double>> z_vals(covariates.size());
  std::size_t row = 0;
  while (std::getline(file, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const std::vector<std::string> cells = split_line(line);
    if (cells.size() != header.size()) {
      throw InputError("data row " + std::to_string(row) + " has " +
                       std::to_string(cells.size()) + " cells, header has " +
                       std::to_string(header.size()));
    }
    const double yv = parse_cell(cells[y_idx], row, outcome);
    const double dv = parse_cell(cells[d_idx], row, treatment);
    if (!std::isfinite(yv)) {
      throw InputError("non-finite value in column '" + outcome + "', data row " + std::to_string(row));
    }
    if (dv != 0.0 && dv != 1.0) {
      throw InputError("invalid treatment value '" + cells[d_idx] + "' in data row " +
                       std::to_string(row));
    }
    y_vals.push_back(yv);
    d_vals.push_back(dv);
    for (std::size_t j = 0; j < z_idx.size(); ++j) {
      const double zv = parse_cell(cells[z_idx[j]], row, covariates[j]);
      if (!std::isfinite(zv)) {
        throw InputError("non-finite value in column '" + covariates[j] + "', data row " +
                         std::to_string(row));
      }
      z_vals[j].push_back(zv);
    }
  }
  if (y_vals.empty()) throw InputError("file '" + path + "' has no data rows");

  const Eigen::Index n = static_cast<Eigen::Index>(y_vals.size());
  Eigen::VectorXd y = Eigen::Map<Eigen::VectorXd>(y_vals.data(), n);
  Eigen::VectorXd d = Eigen::Map<Eigen::VectorXd>(d_vals.data(), n);
  Eigen::MatrixXd z(n, static_cast<Eigen::Index>(covariates.size()));
  for (std::size_t j = 0; j < z_vals.size(); ++j) {
    z.col(static_cast<Eigen::Index>(j)) = Eigen::Map<Eigen::VectorXd>(z_vals[j].data(), n);
  }
  return make_dataset(std::move(y), std::move(d), std::move(z), std::move(x_indices));
}

} // namespace catef
