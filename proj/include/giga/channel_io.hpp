#pragma once

// Text import/export for externally generated channel matrices.
//
// Format: one header line "nr=<rows> k=<cols>" followed by exactly rows*cols
// lines "row col re im" with 1-based indices. Entries may appear in any
// order; duplicates, omissions, and trailing garbage are rejected.

#include <Eigen/Dense>

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace giga {

inline Eigen::MatrixXcd read_channel(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw std::invalid_argument("channel file: missing header line");
  }
  int n_r = 0;
  int k = 0;
  char extra = 0;
  if (std::sscanf(line.c_str(), "nr=%d k=%d %c", &n_r, &k, &extra) != 2) {
    throw std::invalid_argument("channel file: header must be 'nr=<rows> k=<cols>'");
  }
  if (n_r < 1 || k < 1) {
    throw std::invalid_argument("channel file: dimensions must be positive");
  }

  Eigen::MatrixXcd channel(n_r, k);
  std::vector<char> seen(static_cast<std::size_t>(n_r) * k, 0);
  for (long entry = 0; entry < static_cast<long>(n_r) * k; ++entry) {
    if (!std::getline(in, line)) {
      throw std::invalid_argument("channel file: missing entries");
    }
    int row = 0;
    int col = 0;
    double re = 0.0;
    double im = 0.0;
    if (std::sscanf(line.c_str(), "%d %d %lf %lf %c", &row, &col, &re, &im, &extra) != 4) {
      throw std::invalid_argument("channel file: malformed entry line");
    }
    if (row < 1 || row > n_r || col < 1 || col > k) {
      throw std::invalid_argument("channel file: entry index out of range");
    }
    const std::size_t idx = static_cast<std::size_t>(row - 1) * k + (col - 1);
    if (seen[idx]) {
      throw std::invalid_argument("channel file: duplicate entry");
    }
    seen[idx] = 1;
    channel(row - 1, col - 1) = {re, im};
  }
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) {
      throw std::invalid_argument("channel file: unexpected trailing data");
    }
  }
  return channel;
}

inline void write_channel(std::ostream& out, const Eigen::MatrixXcd& channel) {
  out << "nr=" << channel.rows() << " k=" << channel.cols() << "\n";
  char buf[128];
  for (Eigen::Index r = 0; r < channel.rows(); ++r) {
    for (Eigen::Index c = 0; c < channel.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%ld %ld %.17g %.17g\n", static_cast<long>(r + 1),
                    static_cast<long>(c + 1), channel(r, c).real(), channel(r, c).imag());
      out << buf;
    }
  }
}

inline Eigen::MatrixXcd load_channel_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::invalid_argument("channel file: cannot open '" + path + "'");
  }
  return read_channel(in);
}

}  // namespace giga
