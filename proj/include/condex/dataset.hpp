#pragma once

#include <Eigen/Dense>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "condex/errors.hpp"

namespace condex {

/// Ordered (Y_i, X_i) pairs, each optionally labeled with a model/action
/// index. Rows of x share dimension d; rows of y share a dimension.
struct PairedDataset {
  Eigen::MatrixXd x;  // n x d
  Eigen::MatrixXd y;  // n x dy
  std::vector<int> labels;  // empty, or one label per pair

  int size() const { return static_cast<int>(x.rows()); }
  int x_dim() const { return static_cast<int>(x.cols()); }

  void validate() const {
    if (x.rows() == 0) throw EmptyDataset("dataset has no pairs");
    if (y.rows() != x.rows()) {
      throw SizeMismatch("dataset has " + std::to_string(x.rows()) + " x rows but " +
                         std::to_string(y.rows()) + " y rows");
    }
    if (!labels.empty() && static_cast<int>(labels.size()) != size()) {
      throw SizeMismatch("label count does not match pair count");
    }
  }

  static PairedDataset from_scalar(const Eigen::VectorXd& xs, const Eigen::VectorXd& ys) {
    PairedDataset d;
    d.x = xs;
    d.y = ys;
    d.validate();
    return d;
  }

  /// Pairs whose label equals `want`, in original order.
  PairedDataset filter_label(int want) const {
    PairedDataset out;
    std::vector<int> keep;
    for (int i = 0; i < size(); ++i) {
      if (!labels.empty() && labels[i] == want) keep.push_back(i);
    }
    out.x.resize(keep.size(), x.cols());
    out.y.resize(keep.size(), y.cols());
    for (std::size_t k = 0; k < keep.size(); ++k) {
      out.x.row(k) = x.row(keep[k]);
      out.y.row(k) = y.row(keep[k]);
    }
    return out;
  }
};

/// Reads (x, y) or (x, y, label) CSV rows. A non-numeric first row is treated
/// as a header and skipped.
inline PairedDataset load_paired_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset file " + path);
  std::vector<double> xs, ys;
  std::vector<int> labels;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < 2) throw ConfigError("bad CSV row in " + path + ": " + line);
    char* end = nullptr;
    const double xv = std::strtod(cells[0].c_str(), &end);
    if (first && end == cells[0].c_str()) {
      first = false;
      continue;  // header
    }
    first = false;
    xs.push_back(xv);
    ys.push_back(std::strtod(cells[1].c_str(), nullptr));
    if (cells.size() >= 3) labels.push_back(std::atoi(cells[2].c_str()));
  }
  if (xs.empty()) throw EmptyDataset("no data rows in " + path);
  if (!labels.empty() && labels.size() != xs.size()) {
    throw ConfigError("mixed labeled/unlabeled rows in " + path);
  }
  PairedDataset d;
  d.x = Eigen::Map<Eigen::VectorXd>(xs.data(), xs.size());
  d.y = Eigen::Map<Eigen::VectorXd>(ys.data(), ys.size());
  d.labels = std::move(labels);
  d.validate();
  return d;
}

}  // namespace condex
