#pragma once

#include <Eigen/Dense>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "condex/errors.hpp"

namespace condex {

/// 17 significant digits: enough for byte-identity to imply bit-identity.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  int column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i] == name) return static_cast<int>(i);
    }
    throw ConfigError("no CSV column named '" + name + "'");
  }

  void add_row(const std::vector<double>& row) {
    if (row.size() != columns.size()) throw ShapeError("CSV row width does not match header");
    rows.push_back(row);
  }

  void write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open output file " + path);
    for (std::size_t i = 0; i < columns.size(); ++i) {
      out << (i ? "," : "") << columns[i];
    }
    out << "\n";
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        out << (i ? "," : "") << format_double(row[i]);
      }
      out << "\n";
    }
  }

  static CsvTable read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open CSV file " + path);
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty CSV file " + path);
    std::stringstream header(line);
    std::string cell;
    while (std::getline(header, cell, ',')) t.columns.push_back(cell);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::vector<double> row;
      while (std::getline(ss, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
      t.add_row(row);
    }
    return t;
  }
};

}  // namespace condex
