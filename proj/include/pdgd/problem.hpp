#pragma once

#include "pdgd/cost.hpp"
#include "pdgd/linalg.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdgd {

/// Separable equality-constrained program: minimize sum_i f_i(x_i) s.t. A x = b,
/// with A partitioned into M block rows and N block columns.
struct Problem {
  std::string name;
  std::vector<int> primal_dims;  // n_i
  std::vector<int> dual_dims;    // m_i, zero for agents without a dual block
  /// blocks[i][j] is the m_i x n_j block A_ij, for i < M.
  std::vector<std::vector<Matrix>> blocks;
  std::vector<Vector> rhs;  // b_i, i < M
  std::vector<CostModel> costs;

  int agents() const { return static_cast<int>(primal_dims.size()); }
  int block_rows() const { return static_cast<int>(blocks.size()); }
  int primal_size() const;
  int dual_size() const;
  int primal_offset(int agent) const;
  int dual_offset(int agent) const;

  /// A_ij, or an empty m_i x n_j matrix when i has no dual block.
  Matrix block(int i, int j) const;
  Matrix stacked_matrix() const;
  Vector stacked_rhs() const;

  double objective(const Vector& x) const;
  Vector gradient(const Vector& x) const;
  Matrix hessian(const Vector& x) const;
  Vector agent_slice(const Vector& x, int agent) const;
};

struct Violation {
  std::string code;
  std::string message;
};

/// Every violated structural or curvature assumption; empty means valid.
std::vector<Violation> validate_problem(const Problem& p);

struct KktPoint {
  Vector x;
  Vector lambda;
  double stationarity_residual = 0.0;
  double feasibility_residual = 0.0;
  int iterations = 0;
};

class NonConvergence : public std::runtime_error {
 public:
  NonConvergence(int iterations, double residual);
  int iterations;
  double residual;
};

/// Damped Newton with Armijo backtracking on grad f(x) + A'lambda = 0, Ax = b.
KktPoint solve_kkt(const Problem& p, double tol = 1e-10, int max_iter = 100,
                   const std::optional<KktPoint>& start = std::nullopt);

}  // namespace pdgd
