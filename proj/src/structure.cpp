#include "pdgd/structure.hpp"

#include <fstream>
#include <iomanip>

namespace pdgd {

StateLayout::StateLayout(const Problem& p)
    : primal_dims_(p.primal_dims), dual_dims_(p.dual_dims) {
  offsets_.reserve(primal_dims_.size());
  for (std::size_t i = 0; i < primal_dims_.size(); ++i) {
    offsets_.push_back(size_);
    size_ += primal_dims_[i] + dual_dims_[i];
  }
}

Vector StateLayout::pack(const Vector& x, const Vector& lambda) const {
  Vector z(size_);
  int xo = 0, lo = 0;
  for (int i = 0; i < agents(); ++i) {
    z.segment(x_offset(i), primal_dims_[i]) = x.segment(xo, primal_dims_[i]);
    z.segment(lambda_offset(i), dual_dims_[i]) = lambda.segment(lo, dual_dims_[i]);
    xo += primal_dims_[i];
    lo += dual_dims_[i];
  }
  return z;
}

std::pair<Vector, Vector> StateLayout::unpack(const Vector& z) const {
  int n = 0, m = 0;
  for (int i = 0; i < agents(); ++i) {
    n += primal_dims_[i];
    m += dual_dims_[i];
  }
  Vector x(n), lambda(m);
  int xo = 0, lo = 0;
  for (int i = 0; i < agents(); ++i) {
    x.segment(xo, primal_dims_[i]) = z.segment(x_offset(i), primal_dims_[i]);
    lambda.segment(lo, dual_dims_[i]) = z.segment(lambda_offset(i), dual_dims_[i]);
    xo += primal_dims_[i];
    lo += dual_dims_[i];
  }
  return {x, lambda};
}

GainMatrix GainMatrix::zero(const StateLayout& layout) {
  GainMatrix g;
  for (int i = 0; i < layout.agents(); ++i)
    g.blocks.push_back(Matrix::Zero(layout.agent_size(i), layout.agent_size(i)));
  return g;
}

Matrix GainMatrix::assembled() const { return block_diagonal(blocks); }

Vector ErrorSystem::equilibrium_state() const {
  return layout_.pack(equilibrium_.x, equilibrium_.lambda);
}

Matrix ErrorSystem::local_matrix(int i, const Matrix& B) const {
  Matrix a = constant_part(i);
  a.topLeftCorner(layout_.primal_dim(i), layout_.primal_dim(i)) = -B;
  return a;
}

Matrix ErrorSystem::constant_part(int i) const {
  const int n = layout_.primal_dim(i);
  const int m = layout_.dual_dim(i);
  Matrix a = Matrix::Zero(n + m, n + m);
  if (m > 0) {
    const Matrix& aii = problem_->blocks[i][i];
    a.topRightCorner(n, m) = -aii.transpose();
    a.bottomLeftCorner(m, n) = aii;
  }
  return a;
}

std::vector<Matrix> ErrorSystem::mean_value_hessians(const Vector& x_hat) const {
  std::vector<Matrix> out;
  const Problem& p = *problem_;
  for (int i = 0; i < p.agents(); ++i)
    out.push_back(p.costs[i].secant_hessian(p.agent_slice(x_hat, i), p.agent_slice(equilibrium_.x, i)));
  return out;
}

Matrix ErrorSystem::a_of(const Vector& x_hat) const {
  const auto hess = mean_value_hessians(x_hat);
  std::vector<Matrix> blocks;
  for (int i = 0; i < layout_.agents(); ++i) blocks.push_back(local_matrix(i, hess[i]));
  return block_diagonal(blocks);
}

std::vector<int> ErrorSystem::class_members(CostKind kind) const {
  std::vector<int> out;
  for (int i = 0; i < problem_->agents(); ++i)
    if (problem_->costs[i].kind() == kind) out.push_back(i);
  return out;
}

std::size_t ErrorSystem::vertex_count() const {
  std::size_t count = 1;
  for (int i : class_members(CostKind::PolytopicHessian)) {
    count *= problem_->costs[i].vertex_hessians().size();
    if (count > (std::size_t{1} << 40)) break;
  }
  return count;
}

std::vector<int> ErrorSystem::vertex_tuple(std::size_t j) const {
  std::vector<int> tuple;
  for (int i : class_members(CostKind::PolytopicHessian)) {
    const std::size_t q = problem_->costs[i].vertex_hessians().size();
    tuple.push_back(static_cast<int>(j % q));
    j /= q;
  }
  return tuple;
}

Matrix ErrorSystem::vertex_local(int i, int choice) const {
  const CostModel& c = problem_->costs[i];
  switch (c.kind()) {
    case CostKind::Quadratic: return local_matrix(i, c.quadratic_H());
    case CostKind::PolytopicHessian: return local_matrix(i, c.vertex_hessians().at(choice));
    case CostKind::GeneralSmooth: return constant_part(i);
  }
  return constant_part(i);
}

Matrix ErrorSystem::vertex(std::size_t j) const {
  const auto poly = class_members(CostKind::PolytopicHessian);
  const auto tuple = vertex_tuple(j);
  std::vector<Matrix> blocks;
  std::size_t next = 0;
  for (int i = 0; i < layout_.agents(); ++i) {
    int choice = 0;
    if (next < poly.size() && poly[next] == i) choice = tuple[next++];
    blocks.push_back(vertex_local(i, choice));
  }
  return block_diagonal(blocks);
}

int ErrorSystem::edge_of(int target, int source) const {
  auto it = edge_index_.find({target, source});
  return it == edge_index_.end() ? -1 : it->second;
}

ErrorSystem ErrorSystem::with_gain(GainMatrix gain) const {
  if (static_cast<int>(gain.blocks.size()) != layout_.agents())
    throw std::invalid_argument("gain has wrong number of blocks");
  for (int i = 0; i < layout_.agents(); ++i)
    if (gain.blocks[i].rows() != layout_.agent_size(i) || gain.blocks[i].cols() != layout_.agent_size(i))
      throw std::invalid_argument("gain block " + std::to_string(i + 1) + " has wrong shape");
  ErrorSystem s = *this;
  s.gain_ = std::move(gain);
  return s;
}

ErrorSystem ErrorSystem::with_uniform_delay(DelayBound bound) const {
  if (bound.h < 0.0 || bound.d < 0.0 || bound.d > 1.0)
    throw std::invalid_argument("delay bounds need h >= 0 and d in [0, 1]");
  ErrorSystem s = *this;
  for (auto& e : s.edges_) e.bound = bound;
  return s;
}

double ErrorSystem::max_delay() const {
  double h = 0.0;
  for (const auto& e : edges_) h = std::max(h, e.bound.h);
  return h;
}

ErrorSystem build_error_system(std::shared_ptr<const Problem> p, const DelayConfig& delays) {
  const auto violations = validate_problem(*p);
  if (!violations.empty())
    throw std::invalid_argument("invalid problem: " + violations.front().message);
  auto check = [](const DelayBound& b) {
    if (!(b.h >= 0.0) || !(b.d >= 0.0) || !(b.d <= 1.0))
      throw std::invalid_argument("delay bounds need h >= 0 and d in [0, 1]");
  };
  check(delays.uniform);
  for (const auto& [k, b] : delays.per_edge) check(b);

  ErrorSystem sys;
  sys.problem_ = p;
  sys.layout_ = StateLayout(*p);
  sys.equilibrium_ = solve_kkt(*p);

  const StateLayout& L = sys.layout_;
  const int N = p->agents();
  const int M = p->block_rows();
  const int r = L.size();
  std::vector<DelayEdge> raw;
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < N; ++j) {
      if (i == j) continue;
      const int ni = L.primal_dim(i), mi = L.dual_dim(i);
      const int nj = L.primal_dim(j), mj = L.dual_dim(j);
      Matrix t = Matrix::Zero(ni + mi, nj + mj);
      if (j < M) t.topRightCorner(ni, mj) = -p->blocks[j][i].transpose();
      if (i < M) t.bottomLeftCorner(mi, nj) = p->blocks[i][j];
      if (t.cwiseAbs().maxCoeff() == 0.0) continue;
      DelayEdge e;
      e.target = i;
      e.source = j;
      e.members = {{i, j}};
      e.T = Matrix::Zero(r, r);
      e.T.block(L.offset(i), L.offset(j), ni + mi, nj + mj) = t;
      auto it = delays.per_edge.find({i, j});
      e.bound = it == delays.per_edge.end() ? delays.uniform : it->second;
      raw.push_back(std::move(e));
    }
  }
  for (const auto& [key, b] : delays.per_edge) {
    bool found = false;
    for (const auto& e : raw) found = found || (e.target == key.first && e.source == key.second);
    if (!found)
      throw std::invalid_argument("delay override for channel (" + std::to_string(key.first + 1) + ", " +
                                  std::to_string(key.second + 1) + ") which is not coupled");
  }

  if (raw.empty()) {
    bool diagonal = false;
    for (int i = 0; i < M; ++i) diagonal = diagonal || p->blocks[i][i].cwiseAbs().maxCoeff() > 0.0;
    if (!diagonal) throw EmptyCoupling("no coupling between agents and no diagonal constraint blocks");
  }

  bool homogeneous = !raw.empty();
  for (const auto& e : raw)
    homogeneous = homogeneous && e.bound.h == raw.front().bound.h && e.bound.d == raw.front().bound.d;

  if (homogeneous && delays.collapse_homogeneous && raw.size() > 1) {
    DelayEdge merged;
    merged.T = Matrix::Zero(r, r);
    merged.bound = raw.front().bound;
    for (const auto& e : raw) {
      merged.T += e.T;
      merged.members.push_back({e.target, e.source});
    }
    sys.edges_.push_back(std::move(merged));
    sys.collapsed_ = true;
  } else {
    sys.edges_ = std::move(raw);
  }
  for (int k = 0; k < sys.rho(); ++k)
    for (const auto& m : sys.edges_[k].members) sys.edge_index_[m] = k;
  return sys;
}

ErrorSystem build_error_system(const Problem& p, const DelayConfig& delays) {
  return build_error_system(std::make_shared<const Problem>(p), delays);
}

namespace {

std::vector<Vector> collect_delayed(const ErrorSystem& sys, const DelayedLookup& delayed) {
  std::vector<Vector> out;
  out.reserve(sys.rho());
  for (int k = 0; k < sys.rho(); ++k) out.push_back(delayed(k));
  return out;
}

// PDGD vector field written agent by agent from the constraint blocks.
Vector pdgd_field(const ErrorSystem& sys, const Vector& z, const std::vector<Vector>& lagged) {
  const Problem& p = sys.problem();
  const StateLayout& L = sys.layout();
  const int N = p.agents();
  const int M = p.block_rows();
  Vector dz = Vector::Zero(L.size());
  for (int i = 0; i < N; ++i) {
    const int ni = L.primal_dim(i);
    const Vector xi = z.segment(L.x_offset(i), ni);
    Vector dx = -p.costs[i].gradient(xi);
    if (i < M) dx -= p.blocks[i][i].transpose() * z.segment(L.lambda_offset(i), L.dual_dim(i));
    for (int j = 0; j < M; ++j) {
      if (j == i) continue;
      const int k = sys.edge_of(i, j);
      if (k < 0) continue;
      dx -= p.blocks[j][i].transpose() * lagged[k].segment(L.lambda_offset(j), L.dual_dim(j));
    }
    dz.segment(L.x_offset(i), ni) = dx;
    if (i >= M) continue;
    Vector dl = p.blocks[i][i] * xi - p.rhs[i];
    for (int j = 0; j < N; ++j) {
      if (j == i) continue;
      const int k = sys.edge_of(i, j);
      if (k < 0) continue;
      dl += p.blocks[i][j] * lagged[k].segment(L.x_offset(j), L.primal_dim(j));
    }
    dz.segment(L.lambda_offset(i), L.dual_dim(i)) = dl;
  }
  return dz;
}

}  // namespace

Vector rhs_standard(const ErrorSystem& sys, const Vector& z, const DelayedLookup& delayed) {
  return pdgd_field(sys, z, collect_delayed(sys, delayed));
}

Vector rhs_augmented(const ErrorSystem& sys, const Vector& state, const DelayedLookup& delayed) {
  if (!sys.gain()) throw std::logic_error("gain required for the augmented dynamics");
  const StateLayout& L = sys.layout();
  const int r = L.size();
  const Vector z = state.head(r);
  const Vector u = state.tail(r);
  Vector out(2 * r);
  out.head(r) = pdgd_field(sys, z, collect_delayed(sys, delayed));
  for (int i = 0; i < L.agents(); ++i) {
    const int o = L.offset(i), ri = L.agent_size(i);
    out.segment(o, ri) += sys.gain()->blocks[i] * (z.segment(o, ri) - u.segment(o, ri));
  }
  out.tail(r) = z - u;
  return out;
}

Vector rhs_error_compact(const ErrorSystem& sys, const Vector& z_err, const Vector& u_err,
                         const std::vector<Vector>& delayed_err, const Vector& x_hat) {
  if (!sys.gain()) throw std::logic_error("gain required for the error dynamics");
  if (static_cast<int>(delayed_err.size()) != sys.rho())
    throw std::invalid_argument("one delayed state per edge is required");
  const int r = sys.layout().size();
  const Matrix K = sys.gain()->assembled();
  Vector out(2 * r);
  Vector dz = (sys.a_of(x_hat) + K) * z_err - K * u_err;
  for (int k = 0; k < sys.rho(); ++k) dz += sys.edges()[k].T * delayed_err[k];
  out.head(r) = dz;
  out.tail(r) = z_err - u_err;
  return out;
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << m(i, j);
    out << "\n";
  }
}

void dump_structure_csv(const ErrorSystem& sys, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t j = 0; j < sys.vertex_count(); ++j)
    write_matrix_csv(dir / ("vertex_" + std::to_string(j) + ".csv"), sys.vertex(j));
  for (int k = 0; k < sys.rho(); ++k)
    write_matrix_csv(dir / ("T_" + std::to_string(k) + ".csv"), sys.edges()[k].T);
  if (sys.gain()) write_matrix_csv(dir / "K.csv", sys.gain()->assembled());
}

}  // namespace pdgd
