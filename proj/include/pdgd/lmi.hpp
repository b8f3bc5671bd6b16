#pragma once

#include "pdgd/block_sdp.hpp"
#include "pdgd/structure.hpp"

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdgd {

class VertexExplosion : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LmiOptions {
  double epsilon = 1.0;
  double margin = 1e-6;
  /// Share R, Q, S, S12 across all edges.
  bool tie_edges = false;
  std::size_t vertex_cap = 256;
};

/// Variable index of every entry of the structured unknowns; -1 marks a
/// structural zero.
struct VariableLayout {
  Eigen::MatrixXi Y11, Y12, Y22, P2, X;
  std::vector<Eigen::MatrixXi> R, Q, S, S12;  // one per edge
  std::vector<int> general_agents;            // agents handled by Young bounds
  std::vector<Eigen::MatrixXi> Omega1, Omega2, Omega3;  // one per general agent
  std::vector<int> w11;                                 // one per general agent
  int kappa_x = -1;
  int kappa_p = -1;
};

struct DecisionVars {
  Matrix Y11, Y12, Y22, P2, X;
  std::vector<Matrix> R, Q, S, S12;
  std::vector<Matrix> Omega1, Omega2, Omega3;
  double kappa_x = 0.0;
  double kappa_p = 0.0;

  static DecisionVars extract(const VariableLayout& layout, const Vector& y);
  /// Inverse of extract for entries that are variables; num_vars sizes y.
  Vector pack(const VariableLayout& layout, int num_vars) const;
  /// Block-diagonal pieces of P2 and X for agent i.
  Matrix p2_block(const StateLayout& s, int agent) const;
  Matrix x_block(const StateLayout& s, int agent) const;
};

struct LmiProgram {
  BlockSdp sdp;
  VariableLayout vars;
  LmiOptions options;
  std::vector<DelayBound> bounds;  // per edge
  std::vector<int> vertex_blocks;
  bool gain_objective = false;
};

/// Vertex LMIs -Xi_j >= margin, the Jensen and Y blocks, and positivity of
/// R, Q, S, Omega and P2 + P2^T. Delay bounds are read from the edges of `sys`.
LmiProgram assemble_delay_lmi(const ErrorSystem& sys, const LmiOptions& options);

/// Adds kappa_X, kappa_P, the two gain-size blocks and the objective
/// alpha1 * kappa_X + alpha2 * kappa_P.
LmiProgram assemble_gain_objective(LmiProgram base, const ErrorSystem& sys, double alpha1, double alpha2);

/// State-dependent Phi with the given Hessian factors B_i inside A.
Matrix evaluate_phi_with(const ErrorSystem& sys, const DecisionVars& vars, double epsilon,
                         const std::vector<Matrix>& hessians);
/// Phi at x_hat using the mean-value Hessians between x_hat and x*.
Matrix evaluate_phi_at(const ErrorSystem& sys, const DecisionVars& vars, double epsilon,
                       const Vector& x_hat);

/// Gain blocks (P2_i^T)^{-1} X_i.
GainMatrix recover_gain(const StateLayout& s, const DecisionVars& vars);

}  // namespace pdgd
