#include "pdgd/sdp.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pdgd {

const char* to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::Optimal: return "Optimal";
    case SdpStatus::Feasible: return "Feasible";
    case SdpStatus::Infeasible: return "Infeasible";
    case SdpStatus::MaxIter: return "MaxIter";
    case SdpStatus::NumericalFailure: return "NumericalFailure";
  }
  return "NumericalFailure";
}

SdpStatus sdp_status_from_string(const std::string& s) {
  for (SdpStatus v : {SdpStatus::Optimal, SdpStatus::Feasible, SdpStatus::Infeasible,
                      SdpStatus::MaxIter, SdpStatus::NumericalFailure})
    if (s == to_string(v)) return v;
  throw std::invalid_argument("unknown SDP status '" + s + "'");
}

std::vector<double> check_certificate(const BlockSdp& sdp, const Vector& y) {
  return block_margins(sdp, y);
}

nlohmann::json solution_to_json(const SdpSolution& s) {
  nlohmann::json j;
  j["status"] = to_string(s.status);
  j["objective"] = s.objective;
  j["slack"] = s.slack;
  j["margins"] = s.margins;
  j["min_margin"] = s.min_margin;
  j["iterations"] = s.iterations;
  if (s.reduced_accuracy) j["reduced_accuracy"] = true;
  return j;
}

namespace {

using SparseRow = Eigen::SparseMatrix<double, Eigen::RowMajor>;

int packed(int p, int q) { return q * (q + 1) / 2 + p; }  // p <= q

// One SDP block of the standard form Z = C - sum_a y_a A_a.
struct StdBlock {
  int n = 0;
  Matrix C;
  std::vector<int> vars;               // variables with nonzero A_a here
  std::vector<std::vector<int>> index;  // distinct rows/cols touched by A_a
  std::vector<Matrix> local;            // A_a restricted to index x index
  SparseRow A;                          // num_vars x n(n+1)/2, upper packed
};

struct StdForm {
  int num_vars = 0;
  Vector b;
  std::vector<StdBlock> blocks;
  // Linear block: z = c - A y >= 0.
  Vector c_lp;
  SparseRow A_lp;  // n_lp x num_vars
};

// Builds the standard form. Original variables keep their indices; in
// feasibility mode the slack t is the last variable.
StdForm to_standard(const BlockSdp& sdp, bool feasibility, double offset, double box) {
  const int m = sdp.num_vars;
  StdForm f;
  f.num_vars = m + (feasibility ? 1 : 0);
  f.b = Vector::Zero(f.num_vars);
  if (feasibility) {
    f.b[m] = 1.0;
  } else if (sdp.objective.size() == m) {
    f.b = -sdp.objective;
  }
  for (const SdpBlock& blk : sdp.blocks) {
    StdBlock s;
    s.n = blk.dim;
    s.C = blk.constant - offset * Matrix::Identity(blk.dim, blk.dim);
    std::vector<Eigen::Triplet<double>> trip;
    std::size_t k = 0;
    const auto& co = blk.coefficients;
    while (k < co.size()) {
      const int a = co[k].var;
      std::size_t e = k;
      std::vector<int> idx;
      while (e < co.size() && co[e].var == a) {
        idx.push_back(co[e].row);
        idx.push_back(co[e].col);
        ++e;
      }
      std::sort(idx.begin(), idx.end());
      idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
      Matrix loc = Matrix::Zero(idx.size(), idx.size());
      for (std::size_t t = k; t < e; ++t) {
        const int p = static_cast<int>(std::lower_bound(idx.begin(), idx.end(), co[t].row) - idx.begin());
        const int q = static_cast<int>(std::lower_bound(idx.begin(), idx.end(), co[t].col) - idx.begin());
        loc(p, q) -= co[t].value;
        if (p != q) loc(q, p) -= co[t].value;
        trip.emplace_back(a, packed(co[t].row, co[t].col), -co[t].value);
      }
      s.vars.push_back(a);
      s.index.push_back(std::move(idx));
      s.local.push_back(std::move(loc));
      k = e;
    }
    if (feasibility) {
      std::vector<int> idx(blk.dim);
      for (int i = 0; i < blk.dim; ++i) {
        idx[i] = i;
        trip.emplace_back(m, packed(i, i), 1.0);
      }
      s.vars.push_back(m);
      s.index.push_back(std::move(idx));
      s.local.push_back(Matrix::Identity(blk.dim, blk.dim));
    }
    s.A.resize(f.num_vars, blk.dim * (blk.dim + 1) / 2);
    s.A.setFromTriplets(trip.begin(), trip.end());
    f.blocks.push_back(std::move(s));
  }
  if (box > 0.0) {
    f.c_lp = Vector::Constant(2 * m, box);
    std::vector<Eigen::Triplet<double>> trip;
    for (int a = 0; a < m; ++a) {
      trip.emplace_back(a, a, 1.0);
      trip.emplace_back(m + a, a, -1.0);
    }
    f.A_lp.resize(2 * m, f.num_vars);
    f.A_lp.setFromTriplets(trip.begin(), trip.end());
  } else {
    f.c_lp.resize(0);
    f.A_lp.resize(0, f.num_vars);
  }
  return f;
}

// Upper triangle of w + w^T (diagonal taken once), column by column.
template <typename Out>
void pack_upper_into(const Matrix& w, Out&& out) {
  const int n = static_cast<int>(w.rows());
  const Matrix s = w + w.transpose();
  for (int q = 0; q < n; ++q) {
    out.segment(packed(0, q), q + 1) = s.col(q).head(q + 1);
    out[packed(q, q)] *= 0.5;
  }
}

Vector pack_upper(const Matrix& w) {
  Vector v(w.rows() * (w.rows() + 1) / 2);
  pack_upper_into(w, v);
  return v;
}

// <A_a, W> for every a.
Vector apply_op(const StdForm& f, const std::vector<Matrix>& W, const Vector& w_lp) {
  Vector out = Vector::Zero(f.num_vars);
  for (std::size_t b = 0; b < f.blocks.size(); ++b) out += f.blocks[b].A * pack_upper(W[b]);
  if (w_lp.size() > 0) out += f.A_lp.transpose() * w_lp;
  return out;
}

Matrix apply_adjoint_block(const StdBlock& s, const Vector& y) {
  Matrix m = Matrix::Zero(s.n, s.n);
  for (std::size_t k = 0; k < s.vars.size(); ++k) {
    const double ya = y[s.vars[k]];
    if (ya == 0.0) continue;
    const auto& idx = s.index[k];
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < idx.size(); ++j) m(idx[i], idx[j]) += ya * s.local[k](i, j);
  }
  return m;
}

double inner(const Matrix& a, const Matrix& b) { return a.cwiseProduct(b).sum(); }

Matrix sym(const Matrix& w) { return 0.5 * (w + w.transpose()); }

// Largest alpha in (0, cap] with X + alpha dX >= 0 given chol(X) = L L^T.
double max_step(const Eigen::LLT<Matrix>& llt, const Matrix& dX, double cap) {
  const auto L = llt.matrixL();
  Matrix w = L.solve(dX);
  w = L.solve(w.transpose()).transpose();
  w = sym(w);
  Eigen::SelfAdjointEigenSolver<Matrix> es(w, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues()[0];
  if (!(lmin < 0.0)) return cap;
  return std::min(cap, -1.0 / lmin);
}

double max_step_lp(const Vector& x, const Vector& dx, double cap) {
  double a = cap;
  for (int i = 0; i < x.size(); ++i)
    if (dx[i] < 0.0) a = std::min(a, -x[i] / dx[i]);
  return a;
}

}  // namespace

SdpSolution solve(const BlockSdp& sdp, const SdpOptions& opt) {
  const auto start = std::chrono::steady_clock::now();
  const bool feasibility = !sdp.has_objective();
  const int m = sdp.num_vars;
  if (sdp.objective.size() != 0 && sdp.objective.size() != m)
    throw DimensionMismatch("objective length differs from the variable count");
  const double offset = feasibility ? 0.0 : opt.objective_margin_factor * sdp.margin;
  const double box = feasibility ? opt.feasibility_box : opt.objective_box;
  const StdForm f = to_standard(sdp, feasibility, offset, box);
  const int nv = f.num_vars;
  const int nb = static_cast<int>(f.blocks.size());
  const int n_lp = static_cast<int>(f.c_lp.size());

  SdpSolution sol;
  sol.y = Vector::Zero(m);

  // Bound on t over the box, used by the infeasibility test.
  double t_bound = std::numeric_limits<double>::infinity();
  if (feasibility) {
    for (const SdpBlock& blk : sdp.blocks) {
      Vector d = blk.constant.diagonal().cwiseAbs();
      for (const auto& c : blk.coefficients)
        if (c.row == c.col) d[c.row] += box * std::abs(c.value);
      if (d.size() > 0) t_bound = std::min(t_bound, d.minCoeff());
    }
  }

  int total_dim = n_lp;
  double normC = f.c_lp.squaredNorm();
  for (const auto& s : f.blocks) {
    total_dim += s.n;
    normC += s.C.squaredNorm();
  }
  normC = std::sqrt(normC);
  const double normb = f.b.norm();

  std::vector<Matrix> X(nb), Z(nb);
  for (int b = 0; b < nb; ++b) {
    const StdBlock& s = f.blocks[b];
    double amax = 0.0;
    for (const auto& loc : s.local) amax = std::max(amax, loc.norm());
    const double rn = std::sqrt(static_cast<double>(s.n));
    const double xi = std::max({10.0, rn, rn * (1.0 + f.b.cwiseAbs().maxCoeff()) / (1.0 + amax)});
    const double eta = std::max({10.0, rn, s.C.norm(), amax});
    X[b] = xi * Matrix::Identity(s.n, s.n);
    Z[b] = eta * Matrix::Identity(s.n, s.n);
  }
  Vector x_lp = Vector::Constant(n_lp, 10.0);
  Vector z_lp = Vector::Constant(n_lp, std::max(10.0, box));
  Vector y = Vector::Zero(nv);

  auto finish = [&](SdpStatus st, int it) {
    sol.status = st;
    sol.iterations = it;
    sol.y = y.head(m);
    sol.margins = check_certificate(sdp, sol.y);
    sol.min_margin = sol.margins.empty() ? 0.0 : *std::min_element(sol.margins.begin(), sol.margins.end());
    sol.slack = feasibility ? y[m] : sol.min_margin;
    sol.objective = feasibility ? sol.slack : sdp.objective.dot(sol.y);
    sol.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return sol;
  };

  // Best dual-feasible objective-mode iterate within the relaxed gap, kept for breakdowns.
  Vector y_best;
  double best_score = std::numeric_limits<double>::infinity();
  const double relaxed = std::sqrt(std::max(opt.gap_tol, opt.feas_tol));
  auto fail = [&](SdpStatus st, int it) {
    if (feasibility || y_best.size() == 0) return finish(st, it);
    y = y_best;
    SdpSolution s = finish(SdpStatus::Optimal, it);
    s.reduced_accuracy = true;
    return s;
  };

  double prev_t = std::numeric_limits<double>::quiet_NaN();
  Matrix M(nv, nv);
  const int batch = 32;

  for (int it = 0; it < opt.max_iter; ++it) {
    // Residuals.
    std::vector<Matrix> Rd(nb);
    double pobj = f.c_lp.dot(x_lp), gapsum = x_lp.dot(z_lp), dnorm = 0.0;
    for (int b = 0; b < nb; ++b) {
      Rd[b] = f.blocks[b].C - Z[b] - apply_adjoint_block(f.blocks[b], y);
      Rd[b] = sym(Rd[b]);
      pobj += inner(f.blocks[b].C, X[b]);
      gapsum += inner(X[b], Z[b]);
      dnorm += Rd[b].squaredNorm();
    }
    Vector rd_lp = f.c_lp - z_lp - f.A_lp * y;
    dnorm = std::sqrt(dnorm + rd_lp.squaredNorm());
    const Vector Rp = f.b - apply_op(f, X, x_lp);
    const double dobj = f.b.dot(y);
    const double mu = gapsum / total_dim;
    const double relgap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    const double pinf = Rp.norm() / (1.0 + normb);
    const double dinf = dnorm / (1.0 + normC);
    if (!std::isfinite(mu) || !std::isfinite(pobj) || !std::isfinite(dobj))
      return fail(SdpStatus::NumericalFailure, it);

    if (!feasibility) {
      const double score = std::max(relgap, dinf);
      if (score < relaxed && score < best_score) {
        const auto margins = check_certificate(sdp, y.head(m));
        if (!margins.empty() && *std::min_element(margins.begin(), margins.end()) >= sdp.margin) {
          best_score = score;
          y_best = y;
        }
      }
    }
    if (feasibility && opt.early_exit) {
      const auto margins = check_certificate(sdp, y.head(m));
      const double mm = margins.empty() ? 0.0 : *std::min_element(margins.begin(), margins.end());
      if (mm >= sdp.margin) return finish(SdpStatus::Feasible, it);
      double ub = pobj + std::abs(Rp[m]) * t_bound;
      for (int a = 0; a < m; ++a) ub += std::abs(Rp[a]) * box;
      if (ub < sdp.margin) return finish(SdpStatus::Infeasible, it);
    }
    const bool converged = relgap < opt.gap_tol && pinf < opt.feas_tol && dinf < opt.feas_tol;
    const bool stalled = feasibility && std::abs(y[m] - prev_t) < opt.slack_change_tol &&
                         relgap < opt.gap_tol;
    if (converged || stalled) {
      SdpSolution s = finish(SdpStatus::Optimal, it);
      if (feasibility)
        s.status = s.min_margin >= sdp.margin ? SdpStatus::Feasible : SdpStatus::Infeasible;
      else if (s.min_margin < sdp.margin)
        return fail(SdpStatus::NumericalFailure, it);
      return s;
    }
    prev_t = feasibility ? y[m] : prev_t;

    // Schur complement M_ab = tr(A_a X A_b Z^-1).
    std::vector<Eigen::LLT<Matrix>> zchol(nb), xchol(nb);
    std::vector<Matrix> Zinv(nb);
    for (int b = 0; b < nb; ++b) {
      zchol[b].compute(Z[b]);
      xchol[b].compute(X[b]);
      if (zchol[b].info() != Eigen::Success || xchol[b].info() != Eigen::Success)
        return fail(SdpStatus::NumericalFailure, it);
      Zinv[b] = zchol[b].solve(Matrix::Identity(f.blocks[b].n, f.blocks[b].n));
      Zinv[b] = sym(Zinv[b]);
    }
    M.setZero();
    for (int b = 0; b < nb; ++b) {
      const StdBlock& s = f.blocks[b];
      const int np = s.n * (s.n + 1) / 2;
      const int nvars = static_cast<int>(s.vars.size());
      Matrix packed_cols(np, batch);
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> gb(np, batch);
      Matrix S(s.n, s.n);
      for (int k0 = 0; k0 < nvars; k0 += batch) {
        const int cnt = std::min(batch, nvars - k0);
        for (int c = 0; c < cnt; ++c) {
          // G + G^T = U V + V^T U^T with U = X[:, J], V = A_loc Zinv[J, :].
          const auto& idx = s.index[k0 + c];
          const int sz = static_cast<int>(idx.size());
          Matrix w1(s.n, 2 * sz), w2(2 * sz, s.n);
          for (int t = 0; t < sz; ++t) {
            w1.col(t) = X[b].col(idx[t]);
            w2.row(sz + t) = X[b].col(idx[t]).transpose();
            w2.row(t) = Zinv[b].row(idx[t]);
          }
          w2.topRows(sz) = s.local[k0 + c] * w2.topRows(sz).eval();
          w1.rightCols(sz) = w2.topRows(sz).transpose();
          S.triangularView<Eigen::Upper>() = w1 * w2;
          for (int q = 0; q < s.n; ++q) {
            packed_cols.col(c).segment(packed(0, q), q + 1) = S.col(q).head(q + 1);
            packed_cols(packed(q, q), c) *= 0.5;
          }
        }
        gb.leftCols(cnt) = packed_cols.leftCols(cnt);
        const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> contrib =
            s.A * gb.leftCols(cnt);
        for (int c = 0; c < cnt; ++c) M.col(s.vars[k0 + c]) += contrib.col(c);
      }
    }
    if (n_lp > 0) {
      const Vector d = x_lp.cwiseQuotient(z_lp);
      const SparseRow AtDA = f.A_lp.transpose() * d.asDiagonal() * f.A_lp;
      M += Matrix(AtDA);
    }
    M = sym(M);

    Eigen::LLT<Matrix> mchol;
    const double diag_max = M.diagonal().cwiseAbs().maxCoeff();
    double ridge = 0.0;
    for (int attempt = 0; attempt < 12; ++attempt) {
      if (ridge > 0.0) {
        Matrix Mr = M;
        Mr.diagonal().array() += ridge;
        mchol.compute(Mr);
      } else {
        mchol.compute(M);
      }
      if (mchol.info() == Eigen::Success) break;
      ridge = ridge == 0.0 ? 1e-14 * std::max(diag_max, 1.0) : ridge * 10.0;
    }
    if (mchol.info() != Eigen::Success) return fail(SdpStatus::NumericalFailure, it);

    // X Rd Z^-1 does not depend on the centering term.
    std::vector<Matrix> XRZ(nb);
    for (int b = 0; b < nb; ++b) XRZ[b] = X[b] * Rd[b] * Zinv[b];
    const Vector xrz_lp = x_lp.cwiseProduct(rd_lp).cwiseQuotient(z_lp);
    const Vector base = apply_op(f, XRZ, xrz_lp);

    std::vector<Matrix> dX(nb), dZ(nb);
    Vector dy, dx_lp, dz_lp;
    auto direction = [&](const std::vector<Matrix>& G, const Vector& g_lp) {
      const Vector rhs = f.b - apply_op(f, G, g_lp) + base;
      dy = mchol.solve(rhs);
      for (int b = 0; b < nb; ++b) {
        dZ[b] = sym(Rd[b] - apply_adjoint_block(f.blocks[b], dy));
        dX[b] = sym(G[b] - X[b] * dZ[b] * Zinv[b]) - X[b];
      }
      dz_lp = rd_lp - f.A_lp * dy;
      dx_lp = g_lp - x_lp - x_lp.cwiseProduct(dz_lp).cwiseQuotient(z_lp);
    };
    auto steps = [&](double& ap, double& ad) {
      ap = max_step_lp(x_lp, dx_lp, 1e30);
      ad = max_step_lp(z_lp, dz_lp, 1e30);
      for (int b = 0; b < nb; ++b) {
        ap = max_step(xchol[b], dX[b], ap);
        ad = max_step(zchol[b], dZ[b], ad);
      }
    };

    // Predictor.
    std::vector<Matrix> G(nb);
    for (int b = 0; b < nb; ++b) G[b] = Matrix::Zero(f.blocks[b].n, f.blocks[b].n);
    direction(G, Vector::Zero(n_lp));
    double ap = 0.0, ad = 0.0;
    steps(ap, ad);
    ap = std::min(1.0, ap);
    ad = std::min(1.0, ad);
    double mu_aff = (x_lp + ap * dx_lp).dot(z_lp + ad * dz_lp);
    for (int b = 0; b < nb; ++b) mu_aff += inner(X[b] + ap * dX[b], Z[b] + ad * dZ[b]);
    mu_aff /= total_dim;
    double sigma = std::pow(std::max(0.0, mu_aff) / mu, 3.0);
    sigma = std::clamp(sigma, 0.0, 1.0);

    // Corrector.
    for (int b = 0; b < nb; ++b) G[b] = sigma * mu * Zinv[b] - dX[b] * dZ[b] * Zinv[b];
    const Vector g_lp = (Vector::Constant(n_lp, sigma * mu) - dx_lp.cwiseProduct(dz_lp)).cwiseQuotient(z_lp);
    direction(G, g_lp);
    steps(ap, ad);
    const double gamma = 0.9 + 0.09 * std::min({1.0, ap, ad});
    const double frac = std::max(opt.step_fraction, gamma);
    ap = std::min(1.0, frac * ap);
    ad = std::min(1.0, frac * ad);

    for (int b = 0; b < nb; ++b) {
      X[b] = sym(X[b] + ap * dX[b]);
      Z[b] = sym(Z[b] + ad * dZ[b]);
    }
    x_lp += ap * dx_lp;
    z_lp += ad * dz_lp;
    y += ad * dy;
  }
  if (!feasibility) return fail(SdpStatus::MaxIter, opt.max_iter);
  SdpSolution s = finish(SdpStatus::MaxIter, opt.max_iter);
  if (feasibility && s.min_margin >= sdp.margin) s.status = SdpStatus::Feasible;
  return s;
}

}  // namespace pdgd
