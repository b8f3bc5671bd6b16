#include "pdgd/problem.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace pdgd {

int Problem::primal_size() const {
  int s = 0;
  for (int d : primal_dims) s += d;
  return s;
}

int Problem::dual_size() const {
  int s = 0;
  for (int d : dual_dims) s += d;
  return s;
}

int Problem::primal_offset(int agent) const {
  int s = 0;
  for (int i = 0; i < agent; ++i) s += primal_dims[i];
  return s;
}

int Problem::dual_offset(int agent) const {
  int s = 0;
  for (int i = 0; i < agent; ++i) s += dual_dims[i];
  return s;
}

Matrix Problem::block(int i, int j) const {
  if (i < block_rows()) return blocks[i][j];
  return Matrix::Zero(0, primal_dims[j]);
}

Matrix Problem::stacked_matrix() const {
  Matrix a = Matrix::Zero(dual_size(), primal_size());
  for (int i = 0; i < block_rows(); ++i)
    for (int j = 0; j < agents(); ++j)
      a.block(dual_offset(i), primal_offset(j), dual_dims[i], primal_dims[j]) = blocks[i][j];
  return a;
}

Vector Problem::stacked_rhs() const {
  Vector b(dual_size());
  for (int i = 0; i < block_rows(); ++i) b.segment(dual_offset(i), dual_dims[i]) = rhs[i];
  return b;
}

Vector Problem::agent_slice(const Vector& x, int agent) const {
  return x.segment(primal_offset(agent), primal_dims[agent]);
}

double Problem::objective(const Vector& x) const {
  double v = 0.0;
  for (int i = 0; i < agents(); ++i) v += costs[i].value(agent_slice(x, i));
  return v;
}

Vector Problem::gradient(const Vector& x) const {
  Vector g(primal_size());
  for (int i = 0; i < agents(); ++i)
    g.segment(primal_offset(i), primal_dims[i]) = costs[i].gradient(agent_slice(x, i));
  return g;
}

Matrix Problem::hessian(const Vector& x) const {
  Matrix h = Matrix::Zero(primal_size(), primal_size());
  for (int i = 0; i < agents(); ++i) {
    const int o = primal_offset(i);
    h.block(o, o, primal_dims[i], primal_dims[i]) = costs[i].hessian(agent_slice(x, i));
  }
  return h;
}

namespace {

std::string agent_label(int i) { return "agent " + std::to_string(i + 1); }

void check_cost(const Problem& p, int i, std::vector<Violation>& out) {
  const CostModel& c = p.costs[i];
  const std::string who = agent_label(i);
  if (c.dim() != p.primal_dims[i]) {
    out.push_back({"dimension", who + ": cost dimension " + std::to_string(c.dim()) +
                                    " differs from n_i = " + std::to_string(p.primal_dims[i])});
    return;
  }
  if (!(c.mu() > 0.0)) {
    out.push_back({"mu must be positive", who + ": mu must be positive (got " +
                                              std::to_string(c.mu()) + ")"});
  }
  if (!(c.ell() >= c.mu())) {
    out.push_back({"ell below mu", who + ": ell must be >= mu"});
    return;
  }
  const double tol = 1e-9 * std::max(1.0, c.ell());
  if (c.kind() == CostKind::Quadratic) {
    const Matrix& h = c.quadratic_H();
    if (!is_symmetric(h, 1e-12)) out.push_back({"asymmetric Hessian", who + ": H is not symmetric"});
    if (min_eigenvalue(h) < c.mu() - tol || max_eigenvalue(h) > c.ell() + tol)
      out.push_back({"curvature bounds", who + ": eigenvalues of H outside [mu, ell]"});
  }
  if (c.kind() == CostKind::PolytopicHessian) {
    if (c.vertex_hessians().size() < 2)
      out.push_back({"too few vertices", who + ": polytopic cost needs at least two vertices"});
    for (const auto& v : c.vertex_hessians())
      if (min_eigenvalue(v) < c.mu() - tol || max_eigenvalue(v) > c.ell() + tol)
        out.push_back({"curvature bounds", who + ": vertex Hessian outside [mu, ell]"});
  }
  // sampled check over the declared box
  std::mt19937_64 rng(0x5eedULL + static_cast<unsigned>(i));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector x(c.dim());
  for (int s = 0; s < 64; ++s) {
    for (int k = 0; k < c.dim(); ++k) x[k] = c.box()[k].lo + (c.box()[k].hi - c.box()[k].lo) * u(rng);
    Matrix h;
    try {
      h = c.hessian(x);
    } catch (const EvaluatorFailure& e) {
      out.push_back({"evaluator failure", who + ": " + e.what()});
      return;
    }
    if (min_eigenvalue(h) < c.mu() - tol || max_eigenvalue(h) > c.ell() + tol) {
      out.push_back({"curvature bounds", who + ": sampled Hessian outside [mu, ell]"});
      return;
    }
  }
}

}  // namespace

std::vector<Violation> validate_problem(const Problem& p) {
  std::vector<Violation> out;
  const int N = p.agents();
  const int M = p.block_rows();
  if (N < 2) out.push_back({"agent count", "at least two agents are required"});
  if (M < 1 || M > N)
    out.push_back({"block rows", "block-row count M must satisfy 1 <= M <= N"});
  if (static_cast<int>(p.dual_dims.size()) != N || static_cast<int>(p.costs.size()) != N) {
    out.push_back({"dimension", "per-agent arrays have inconsistent lengths"});
    return out;
  }
  if (static_cast<int>(p.rhs.size()) != M)
    out.push_back({"dimension", "b must have one block per block row"});
  bool shapes_ok = out.empty();
  for (int i = 0; i < N; ++i) {
    if (p.primal_dims[i] < 1) {
      out.push_back({"dimension", agent_label(i) + ": n_i must be positive"});
      shapes_ok = false;
    }
    if (i < M && p.dual_dims[i] < 1) {
      out.push_back({"dimension", agent_label(i) + ": m_i must be positive for i <= M"});
      shapes_ok = false;
    }
    if (i >= M && p.dual_dims[i] != 0) {
      out.push_back({"dimension", agent_label(i) + ": m_i must be zero for i > M"});
      shapes_ok = false;
    }
  }
  for (int i = 0; i < M && shapes_ok; ++i) {
    if (static_cast<int>(p.blocks[i].size()) != N) {
      out.push_back({"dimension", "block row " + std::to_string(i + 1) + " has wrong length"});
      shapes_ok = false;
      continue;
    }
    for (int j = 0; j < N; ++j) {
      const Matrix& a = p.blocks[i][j];
      if (a.rows() != p.dual_dims[i] || a.cols() != p.primal_dims[j]) {
        std::ostringstream os;
        os << "block A_" << i + 1 << "," << j + 1 << " has shape " << a.rows() << "x" << a.cols()
           << ", expected " << p.dual_dims[i] << "x" << p.primal_dims[j];
        out.push_back({"block shape", os.str()});
        shapes_ok = false;
      }
    }
    if (i < static_cast<int>(p.rhs.size()) && p.rhs[i].size() != p.dual_dims[i]) {
      out.push_back({"dimension", "b block " + std::to_string(i + 1) + " has wrong length"});
      shapes_ok = false;
    }
  }
  if (!shapes_ok) return out;

  const int n = p.primal_size();
  const int m = p.dual_size();
  if (m >= n) out.push_back({"constraint count", "m must be smaller than n"});
  const Matrix a = p.stacked_matrix();
  if (!a.allFinite()) out.push_back({"non-finite", "A has non-finite entries"});
  else if (numerical_rank(a) < m)
    out.push_back({"rank deficient", "A is rank deficient (rank " +
                                         std::to_string(numerical_rank(a)) + " < m = " +
                                         std::to_string(m) + ")"});
  for (int i = 0; i < N; ++i) check_cost(p, i, out);
  return out;
}

NonConvergence::NonConvergence(int it, double res)
    : std::runtime_error("KKT Newton did not converge after " + std::to_string(it) +
                         " iterations (residual " + std::to_string(res) + ")"),
      iterations(it),
      residual(res) {}

KktPoint solve_kkt(const Problem& p, double tol, int max_iter, const std::optional<KktPoint>& start) {
  const int n = p.primal_size();
  const int m = p.dual_size();
  const Matrix a = p.stacked_matrix();
  const Vector b = p.stacked_rhs();

  Vector x = start ? start->x : Vector::Zero(n);
  Vector lam = start ? start->lambda : Vector::Zero(m);

  auto residual = [&](const Vector& xx, const Vector& ll) {
    Vector r(n + m);
    r.head(n) = p.gradient(xx) + a.transpose() * ll;
    r.tail(m) = a * xx - b;
    return r;
  };

  Vector r = residual(x, lam);
  int it = 0;
  while (r.norm() > tol) {
    if (it == max_iter) throw NonConvergence(it, r.norm());
    Matrix kkt = Matrix::Zero(n + m, n + m);
    kkt.topLeftCorner(n, n) = p.hessian(x);
    kkt.topRightCorner(n, m) = a.transpose();
    kkt.bottomLeftCorner(m, n) = a;
    const Vector step = kkt.partialPivLu().solve(-r);
    const double merit = 0.5 * r.squaredNorm();
    double alpha = 1.0;
    Vector r_new;
    for (int ls = 0; ls < 40; ++ls) {
      r_new = residual(x + alpha * step.head(n), lam + alpha * step.tail(m));
      // descent direction of the merit is -||r||^2
      if (0.5 * r_new.squaredNorm() <= (1.0 - 1e-4 * alpha) * merit || r_new.norm() <= tol) break;
      alpha *= 0.5;
    }
    x += alpha * step.head(n);
    lam += alpha * step.tail(m);
    r = r_new;
    ++it;
  }
  KktPoint out;
  out.x = x;
  out.lambda = lam;
  out.stationarity_residual = r.head(n).norm();
  out.feasibility_residual = r.tail(m).norm();
  out.iterations = it;
  return out;
}

}  // namespace pdgd
