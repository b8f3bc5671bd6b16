#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace pdgd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Smallest eigenvalue of the symmetric part of `m`.
double min_eigenvalue(const Matrix& m);
/// Largest eigenvalue of the symmetric part of `m`.
double max_eigenvalue(const Matrix& m);

/// Dense block-diagonal matrix; empty blocks are skipped.
Matrix block_diagonal(std::span<const Matrix> blocks);

bool is_symmetric(const Matrix& m, double tol);

/// Numerical rank from a column-pivoted QR with relative threshold `rel_tol`.
int numerical_rank(const Matrix& m, double rel_tol = 1e-10);

inline Matrix symmetric_part(const Matrix& m) { return 0.5 * (m + m.transpose()); }

}  // namespace pdgd
