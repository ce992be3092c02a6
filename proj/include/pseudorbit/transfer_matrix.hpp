#pragma once

#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pseudorbit/error.hpp"
#include "pseudorbit/partition.hpp"

namespace pseudorbit {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplets = std::vector<Eigen::Triplet<double>>;

enum class MatrixKind { unperturbed, perturbed };

inline std::string to_string(MatrixKind k) { return k == MatrixKind::unperturbed ? "unperturbed" : "perturbed"; }

/// Row-stochastic discretized transfer operator.  Densities are row vectors:
/// one step of the dynamics is f -> f P.
struct TransferMatrix {
  Grid grid;
  MatrixKind kind = MatrixKind::unperturbed;
  double eps = 0.0;
  std::optional<std::uint64_t> seed;
  SparseMatrix matrix;

  std::size_t size() const { return static_cast<std::size_t>(matrix.rows()); }

  double max_row_sum_deviation() const {
    double worst = 0.0;
    for (Eigen::Index r = 0; r < matrix.outerSize(); ++r) {
      double s = 0.0;
      for (SparseMatrix::InnerIterator it(matrix, r); it; ++it) s += it.value();
      worst = std::max(worst, std::abs(s - 1.0));
    }
    return worst;
  }

  double min_entry() const {
    double m = 0.0;
    for (Eigen::Index k = 0; k < matrix.nonZeros(); ++k) m = std::min(m, matrix.valuePtr()[k]);
    return m;
  }

  /// One dynamics step for a density row vector.
  Eigen::VectorXd push_forward(const Eigen::VectorXd& f) const {
    return (f.transpose() * matrix).transpose();
  }
};

/// Cells reached in one step from the support of f (entries > threshold).
inline std::vector<std::size_t> support_of(const Eigen::VectorXd& v, double threshold = 0.0) {
  std::vector<std::size_t> out;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (v[i] > threshold) out.push_back(static_cast<std::size_t>(i));
  return out;
}

inline SparseMatrix from_triplets(std::size_t rows, std::size_t cols, const Triplets& t) {
  SparseMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  m.setFromTriplets(t.begin(), t.end());
  m.prune(0.0, 0.0);
  m.makeCompressed();
  return m;
}

}  // namespace pseudorbit
