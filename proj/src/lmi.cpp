#include "pdgd/lmi.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace pdgd {

namespace {

std::string entry_name(const std::string& base, int i, int j) {
  return base + "(" + std::to_string(i) + "," + std::to_string(j) + ")";
}

Eigen::MatrixXi unset(int rows, int cols) { return Eigen::MatrixXi::Constant(rows, cols, -1); }

Eigen::MatrixXi symmetric_vars(BlockSdp& sdp, const std::string& name, int n) {
  Eigen::MatrixXi idx(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) idx(i, j) = idx(j, i) = sdp.add_variable(entry_name(name, i, j));
  return idx;
}

Eigen::MatrixXi full_vars(BlockSdp& sdp, const std::string& name, int rows, int cols) {
  Eigen::MatrixXi idx(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) idx(i, j) = sdp.add_variable(entry_name(name, i, j));
  return idx;
}

AffineMatrix var(const Eigen::MatrixXi& idx) { return AffineMatrix::from_indices(idx); }

Matrix take(const Eigen::MatrixXi& idx, const Vector& y) {
  Matrix m = Matrix::Zero(idx.rows(), idx.cols());
  for (int i = 0; i < idx.rows(); ++i)
    for (int j = 0; j < idx.cols(); ++j)
      if (idx(i, j) >= 0) m(i, j) = y[idx(i, j)];
  return m;
}

void put(const Eigen::MatrixXi& idx, const Matrix& m, Vector& y) {
  for (int i = 0; i < idx.rows(); ++i)
    for (int j = 0; j < idx.cols(); ++j)
      if (idx(i, j) >= 0) y[idx(i, j)] = m(i, j);
}

AffineMatrix identity(int n, double s = 1.0) { return AffineMatrix::constant(s * Matrix::Identity(n, n)); }

AffineMatrix scalar_identity(int var_index, int n) {
  AffineMatrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = LinExpr::variable(var_index);
  return m;
}

void scale_block(SdpBlock& b) {
  const double m = b.max_abs_entry();
  if (m > 0.0) b.apply_scale(1.0 / m);
}

}  // namespace

DecisionVars DecisionVars::extract(const VariableLayout& l, const Vector& y) {
  DecisionVars v;
  v.Y11 = take(l.Y11, y);
  v.Y12 = take(l.Y12, y);
  v.Y22 = take(l.Y22, y);
  v.P2 = take(l.P2, y);
  v.X = take(l.X, y);
  for (const auto& m : l.R) v.R.push_back(take(m, y));
  for (const auto& m : l.Q) v.Q.push_back(take(m, y));
  for (const auto& m : l.S) v.S.push_back(take(m, y));
  for (const auto& m : l.S12) v.S12.push_back(take(m, y));
  for (const auto& m : l.Omega1) v.Omega1.push_back(take(m, y));
  for (const auto& m : l.Omega2) v.Omega2.push_back(take(m, y));
  for (const auto& m : l.Omega3) v.Omega3.push_back(take(m, y));
  if (l.kappa_x >= 0) v.kappa_x = y[l.kappa_x];
  if (l.kappa_p >= 0) v.kappa_p = y[l.kappa_p];
  return v;
}

Vector DecisionVars::pack(const VariableLayout& l, int num_vars) const {
  Vector y = Vector::Zero(num_vars);
  put(l.Y11, Y11, y);
  put(l.Y12, Y12, y);
  put(l.Y22, Y22, y);
  put(l.P2, P2, y);
  put(l.X, X, y);
  for (std::size_t k = 0; k < l.R.size(); ++k) {
    put(l.R[k], R[k], y);
    put(l.Q[k], Q[k], y);
    put(l.S[k], S[k], y);
    put(l.S12[k], S12[k], y);
  }
  for (std::size_t g = 0; g < l.Omega1.size(); ++g) {
    put(l.Omega1[g], Omega1[g], y);
    put(l.Omega2[g], Omega2[g], y);
    put(l.Omega3[g], Omega3[g], y);
  }
  if (l.kappa_x >= 0) y[l.kappa_x] = kappa_x;
  if (l.kappa_p >= 0) y[l.kappa_p] = kappa_p;
  return y;
}

Matrix DecisionVars::p2_block(const StateLayout& s, int i) const {
  return P2.block(s.offset(i), s.offset(i), s.agent_size(i), s.agent_size(i));
}

Matrix DecisionVars::x_block(const StateLayout& s, int i) const {
  return X.block(s.offset(i), s.offset(i), s.agent_size(i), s.agent_size(i));
}

LmiProgram assemble_delay_lmi(const ErrorSystem& sys, const LmiOptions& options) {
  if (!(options.epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (!(options.margin >= 0.0)) throw std::invalid_argument("margin must be non-negative");
  const std::size_t nv = sys.vertex_count();
  if (nv > options.vertex_cap)
    throw VertexExplosion(std::to_string(nv) + " vertices exceed the cap of " +
                          std::to_string(options.vertex_cap));

  const StateLayout& L = sys.layout();
  const int r = L.size();
  const int rho = sys.rho();
  const double eps = options.epsilon;

  LmiProgram prog;
  prog.options = options;
  for (const auto& e : sys.edges()) {
    if (!(e.bound.h >= 0.0) || !(e.bound.d >= 0.0) || e.bound.d > 1.0)
      throw std::invalid_argument("delay bounds need h >= 0 and d in [0, 1]");
    prog.bounds.push_back(e.bound);
  }
  BlockSdp& sdp = prog.sdp;
  sdp.margin = options.margin;
  VariableLayout& v = prog.vars;

  v.Y11 = symmetric_vars(sdp, "Y11", r);
  v.Y12 = full_vars(sdp, "Y12", r, r);
  v.Y22 = symmetric_vars(sdp, "Y22", r);

  v.general_agents = sys.class_members(CostKind::GeneralSmooth);
  std::vector<bool> is_general(L.agents(), false);
  for (int i : v.general_agents) is_general[i] = true;

  v.P2 = unset(r, r);
  v.X = unset(r, r);
  for (int i = 0; i < L.agents(); ++i) {
    const int o = L.offset(i);
    const int ri = L.agent_size(i);
    const int n = L.primal_dim(i);
    const std::string tag = std::to_string(i + 1);
    if (is_general[i]) {
      const int w = sdp.add_variable("w11_" + tag);
      v.w11.push_back(w);
      for (int a = 0; a < ri; ++a)
        for (int b = 0; b < ri; ++b) {
          if (a < n && b < n) {
            if (a == b) v.P2(o + a, o + b) = w;
          } else {
            v.P2(o + a, o + b) = sdp.add_variable(entry_name("P2_" + tag, a, b));
          }
        }
    } else {
      v.P2.block(o, o, ri, ri) = full_vars(sdp, "P2_" + tag, ri, ri);
    }
    v.X.block(o, o, ri, ri) = full_vars(sdp, "X_" + tag, ri, ri);
  }

  bool any_slow = false;
  for (const auto& b : prog.bounds) any_slow = any_slow || b.d < 1.0;
  struct EdgeVars {
    Eigen::MatrixXi R, Q, S, S12;
    std::string tag;
  };
  std::vector<EdgeVars> distinct;
  for (int k = 0; k < rho; ++k) {
    if (!options.tie_edges || k == 0) {
      EdgeVars e;
      e.tag = options.tie_edges ? "" : std::to_string(k + 1);
      e.R = symmetric_vars(sdp, "R" + e.tag, r);
      const bool q = options.tie_edges ? any_slow : prog.bounds[k].d < 1.0;
      e.Q = q ? symmetric_vars(sdp, "Q" + e.tag, r) : unset(r, r);
      e.S = symmetric_vars(sdp, "S" + e.tag, r);
      e.S12 = full_vars(sdp, "S12" + e.tag, r, r);
      distinct.push_back(std::move(e));
    }
    const EdgeVars& e = distinct.back();
    v.R.push_back(e.R);
    v.Q.push_back(prog.bounds[k].d < 1.0 ? e.Q : unset(r, r));
    v.S.push_back(e.S);
    v.S12.push_back(e.S12);
  }

  int sum_m = 0, sum_n = 0;
  for (int i : v.general_agents) {
    const std::string tag = std::to_string(i + 1);
    v.Omega1.push_back(symmetric_vars(sdp, "Omega1_" + tag, L.dual_dim(i)));
    v.Omega2.push_back(symmetric_vars(sdp, "Omega2_" + tag, L.primal_dim(i)));
    v.Omega3.push_back(symmetric_vars(sdp, "Omega3_" + tag, L.dual_dim(i)));
    sum_m += L.dual_dim(i);
    sum_n += L.primal_dim(i);
  }

  const AffineMatrix Y11 = var(v.Y11), Y12 = var(v.Y12), Y22 = var(v.Y22);
  const AffineMatrix P2 = var(v.P2), X = var(v.X);
  const AffineMatrix P2t = P2.transpose(), Xt = X.transpose(), Y12t = Y12.transpose();

  AffineMatrix psi1(r, r), psi2(r, r);
  AffineMatrix theta1(r, sum_m), theta2(r, sum_n), theta3(r, sum_m);
  AffineMatrix omega1(sum_m, sum_m), omega2(sum_n, sum_n), omega3(sum_m, sum_m);
  {
    int cm = 0, cn = 0;
    for (std::size_t g = 0; g < v.general_agents.size(); ++g) {
      const int i = v.general_agents[g];
      const int o = L.offset(i), n = L.primal_dim(i), m = L.dual_dim(i);
      const CostModel& cost = sys.problem().costs[i];
      const double mu = cost.mu(), ell = cost.ell();
      const int w = v.w11[g];
      for (int a = 0; a < n; ++a) {
        psi1(o + a, o + a) = LinExpr::variable(w, -2.0 * mu);
        theta2(o + a, cn + a) = LinExpr::variable(w, eps * ell);
        for (int b = 0; b < n; ++b) psi2(o + a, o + b) = LinExpr::variable(v.Omega2[g](a, b));
        for (int b = 0; b < n; ++b) omega2(cn + a, cn + b) = LinExpr::variable(v.Omega2[g](a, b), -1.0);
        for (int b = 0; b < m; ++b) {
          theta1(o + a, cm + b) = LinExpr::variable(v.P2(o + a, o + n + b), ell);
          theta3(o + a, cm + b) = LinExpr::variable(v.P2(o + a, o + n + b), eps * ell);
        }
      }
      for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) {
          psi1(o + n + a, o + n + b) = LinExpr::variable(v.Omega1[g](a, b));
          psi2(o + n + a, o + n + b) = LinExpr::variable(v.Omega3[g](a, b));
          omega1(cm + a, cm + b) = LinExpr::variable(v.Omega1[g](a, b), -1.0);
          omega3(cm + a, cm + b) = LinExpr::variable(v.Omega3[g](a, b), -1.0);
        }
      cm += m;
      cn += n;
    }
  }

  const bool young = !v.general_agents.empty();
  std::vector<int> sizes(3 + 2 * rho, r);
  if (young) {
    sizes.push_back(sum_m);
    sizes.push_back(sum_n);
    sizes.push_back(sum_m);
  }
  const int uh = 3;        // first z(t - h_k) block
  const int ut = 3 + rho;  // first z(t - tau_k) block

  SymmetricBlockBuilder common(sizes);
  common.add(0, 0, -2.0 * Y22);
  common.add(0, 1, Y22 - Y12t - Xt);
  common.add(0, 2, Y12t - eps * Xt);
  common.add(1, 1, Y12 + Y12t + psi1 + X + Xt);
  common.add(1, 2, Y11 - P2t + eps * Xt);
  common.add(2, 2, psi2 - eps * (P2 + P2t));
  for (int k = 0; k < rho; ++k) {
    const AffineMatrix R = var(v.R[k]), Q = var(v.Q[k]), S = var(v.S[k]), S12 = var(v.S12[k]);
    const DelayBound& b = prog.bounds[k];
    const Matrix& T = sys.edges()[k].T;
    const AffineMatrix P2tT = P2t * T;
    common.add(1, 1, S + Q - R);
    common.add(2, 2, b.h * b.h * R);
    common.add(1, uh + k, S12);
    common.add(1, ut + k, R - S12 + P2tT);
    common.add(2, ut + k, eps * P2tT);
    common.add(uh + k, uh + k, -1.0 * (S + R));
    common.add(uh + k, ut + k, R - S12.transpose());
    common.add(ut + k, ut + k, S12 + S12.transpose() - 2.0 * R - (1.0 - b.d) * Q);
  }
  if (young) {
    const int t0 = 3 + 2 * rho;
    common.add(1, t0, theta1);
    common.add(1, t0 + 1, theta2);
    common.add(1, t0 + 2, theta3);
    common.add(t0, t0, omega1);
    common.add(t0 + 1, t0 + 1, omega2);
    common.add(t0 + 2, t0 + 2, omega3);
  }

  for (std::size_t j = 0; j < nv; ++j) {
    SymmetricBlockBuilder xi = common;
    const Matrix A = sys.vertex(j);
    const AffineMatrix P2tA = P2t * A;
    xi.add(1, 1, P2tA + P2tA.transpose());
    xi.add(1, 2, eps * P2tA.transpose());
    prog.vertex_blocks.push_back(static_cast<int>(sdp.blocks.size()));
    sdp.blocks.push_back(SdpBlock::from_affine("vertex_" + std::to_string(j + 1), -1.0 * xi.build()));
  }

  for (const EdgeVars& e : distinct) {
    SymmetricBlockBuilder jensen({r, r});
    jensen.add(0, 0, var(e.R));
    jensen.add(0, 1, var(e.S12));
    jensen.add(1, 1, var(e.R));
    sdp.blocks.push_back(SdpBlock::from_affine("jensen" + e.tag, jensen.build()));
  }
  {
    SymmetricBlockBuilder yb({r, r});
    yb.add(0, 0, Y11);
    yb.add(0, 1, Y12);
    yb.add(1, 1, Y22);
    sdp.blocks.push_back(SdpBlock::from_affine("Y", yb.build()));
  }
  for (const EdgeVars& e : distinct) {
    sdp.blocks.push_back(SdpBlock::from_affine("R" + e.tag, var(e.R)));
    if ((e.Q.array() >= 0).any()) sdp.blocks.push_back(SdpBlock::from_affine("Q" + e.tag, var(e.Q)));
    sdp.blocks.push_back(SdpBlock::from_affine("S" + e.tag, var(e.S)));
  }
  for (std::size_t g = 0; g < v.general_agents.size(); ++g) {
    const std::string tag = std::to_string(v.general_agents[g] + 1);
    sdp.blocks.push_back(SdpBlock::from_affine("Omega1_" + tag, var(v.Omega1[g])));
    sdp.blocks.push_back(SdpBlock::from_affine("Omega2_" + tag, var(v.Omega2[g])));
    sdp.blocks.push_back(SdpBlock::from_affine("Omega3_" + tag, var(v.Omega3[g])));
  }
  for (int i = 0; i < L.agents(); ++i) {
    const int o = L.offset(i), ri = L.agent_size(i);
    const AffineMatrix p = var(v.P2.block(o, o, ri, ri));
    sdp.blocks.push_back(SdpBlock::from_affine("P2_" + std::to_string(i + 1), p + p.transpose()));
  }

  sdp.normalize_scales({prog.vertex_blocks});
  return prog;
}

LmiProgram assemble_gain_objective(LmiProgram base, const ErrorSystem& sys, double alpha1, double alpha2) {
  if (!(alpha1 >= 0.0) || !(alpha2 >= 0.0)) throw std::invalid_argument("alpha must be non-negative");
  const int r = sys.layout().size();
  BlockSdp& sdp = base.sdp;
  VariableLayout& v = base.vars;
  if (sdp.objective.size() != sdp.num_vars) sdp.objective = Vector::Zero(sdp.num_vars);
  v.kappa_x = sdp.add_variable("kappa_X");
  v.kappa_p = sdp.add_variable("kappa_P");
  sdp.objective[v.kappa_x] = alpha1;
  sdp.objective[v.kappa_p] = alpha2;

  const AffineMatrix P2 = var(v.P2), X = var(v.X);
  SymmetricBlockBuilder bp({r, r});
  bp.add(0, 0, 0.5 * (P2 + P2.transpose()));
  bp.add(0, 1, identity(r));
  bp.add(1, 1, scalar_identity(v.kappa_p, r));
  sdp.blocks.push_back(SdpBlock::from_affine("gain_P", bp.build()));
  scale_block(sdp.blocks.back());

  SymmetricBlockBuilder bx({r, r});
  bx.add(0, 0, scalar_identity(v.kappa_x, r));
  bx.add(0, 1, -1.0 * X.transpose());
  bx.add(1, 1, identity(r));
  sdp.blocks.push_back(SdpBlock::from_affine("gain_X", bx.build()));
  scale_block(sdp.blocks.back());

  base.gain_objective = true;
  return base;
}

Matrix evaluate_phi_with(const ErrorSystem& sys, const DecisionVars& v, double eps,
                         const std::vector<Matrix>& hessians) {
  const StateLayout& L = sys.layout();
  const int r = L.size();
  const int rho = sys.rho();
  if (static_cast<int>(hessians.size()) != L.agents())
    throw DimensionMismatch("one Hessian per agent expected");
  std::vector<Matrix> local;
  for (int i = 0; i < L.agents(); ++i) local.push_back(sys.local_matrix(i, hessians[i]));
  const Matrix A = block_diagonal(local);

  const int dim = (3 + 2 * rho) * r;
  Matrix phi = Matrix::Zero(dim, dim);
  auto blk = [&](int bi, int bj) { return phi.block(bi * r, bj * r, r, r); };

  Matrix p22 = v.Y12 + v.Y12.transpose() + v.P2.transpose() * A + A.transpose() * v.P2 + v.X +
               v.X.transpose();
  Matrix p33 = -eps * (v.P2 + v.P2.transpose());
  for (int k = 0; k < rho; ++k) {
    const DelayBound& b = sys.edges()[k].bound;
    p22 += v.S[k] + v.Q[k] - v.R[k];
    p33 += b.h * b.h * v.R[k];
  }
  blk(0, 0) = -2.0 * v.Y22;
  blk(0, 1) = -v.Y12.transpose() + v.Y22 - v.X.transpose();
  blk(0, 2) = v.Y12.transpose() - eps * v.X.transpose();
  blk(1, 1) = p22;
  blk(1, 2) = v.Y11 - v.P2.transpose() + eps * A.transpose() * v.P2 + eps * v.X.transpose();
  blk(2, 2) = p33;
  for (int k = 0; k < rho; ++k) {
    const DelayBound& b = sys.edges()[k].bound;
    const Matrix& T = sys.edges()[k].T;
    const int h = 3 + k, t = 3 + rho + k;
    blk(1, h) = v.S12[k];
    blk(1, t) = v.R[k] - v.S12[k] + v.P2.transpose() * T;
    blk(2, t) = eps * v.P2.transpose() * T;
    blk(h, h) = -v.S[k] - v.R[k];
    blk(h, t) = v.R[k] - v.S12[k].transpose();
    blk(t, t) = -2.0 * v.R[k] + v.S12[k] + v.S12[k].transpose() - (1.0 - b.d) * v.Q[k];
  }
  const int nb = 3 + 2 * rho;
  for (int bi = 0; bi < nb; ++bi)
    for (int bj = bi + 1; bj < nb; ++bj) blk(bj, bi) = blk(bi, bj).transpose();
  return phi;
}

Matrix evaluate_phi_at(const ErrorSystem& sys, const DecisionVars& vars, double epsilon,
                       const Vector& x_hat) {
  return evaluate_phi_with(sys, vars, epsilon, sys.mean_value_hessians(x_hat));
}

GainMatrix recover_gain(const StateLayout& s, const DecisionVars& vars) {
  GainMatrix g;
  for (int i = 0; i < s.agents(); ++i) {
    const Matrix p = vars.p2_block(s, i);
    g.blocks.push_back(p.transpose().partialPivLu().solve(vars.x_block(s, i)));
  }
  return g;
}

}  // namespace pdgd
