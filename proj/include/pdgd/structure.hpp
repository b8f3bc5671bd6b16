#pragma once

#include "pdgd/problem.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace pdgd {

/// Ordering of the stacked state z = col_i(x_i, lambda_i).
class StateLayout {
 public:
  StateLayout() = default;
  explicit StateLayout(const Problem& p);

  int agents() const { return static_cast<int>(primal_dims_.size()); }
  int size() const { return size_; }
  int agent_size(int i) const { return primal_dims_[i] + dual_dims_[i]; }
  int offset(int i) const { return offsets_[i]; }
  int primal_dim(int i) const { return primal_dims_[i]; }
  int dual_dim(int i) const { return dual_dims_[i]; }
  int x_offset(int i) const { return offsets_[i]; }
  int lambda_offset(int i) const { return offsets_[i] + primal_dims_[i]; }

  Vector pack(const Vector& x, const Vector& lambda) const;
  std::pair<Vector, Vector> unpack(const Vector& z) const;

 private:
  std::vector<int> primal_dims_;
  std::vector<int> dual_dims_;
  std::vector<int> offsets_;
  int size_ = 0;
};

struct DelayBound {
  double h = 0.0;  // upper bound on the delay, seconds
  double d = 0.0;  // bound on |d tau / dt|; 1 means fast-varying
};

/// Coupling through a delayed channel: the rows of `target` read the state of
/// `source` at t - tau_k(t). A collapsed edge merges every channel.
struct DelayEdge {
  int target = -1;
  int source = -1;
  std::vector<std::pair<int, int>> members;  // (target, source) pairs carried
  Matrix T;                                  // r x r coupling matrix
  DelayBound bound;
};

/// Block-diagonal gain, one r_i x r_i block per agent.
struct GainMatrix {
  std::vector<Matrix> blocks;

  static GainMatrix zero(const StateLayout& layout);
  Matrix assembled() const;
};

struct DelayConfig {
  DelayBound uniform;
  /// Per-channel overrides keyed by (target, source), zero-based agents.
  std::map<std::pair<int, int>, DelayBound> per_edge;
  /// Merge all channels into one edge when every bound is identical.
  bool collapse_homogeneous = true;
};

class EmptyCoupling : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MissingHistory : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Compact error dynamics around the KKT point:
///   dz = (A(x) + K) z + sum_k T_k z(t - tau_k) - K u,   du = z - u.
class ErrorSystem {
 public:
  const Problem& problem() const { return *problem_; }
  std::shared_ptr<const Problem> problem_ptr() const { return problem_; }
  const StateLayout& layout() const { return layout_; }
  const KktPoint& equilibrium() const { return equilibrium_; }
  /// z_bar = col(x*, lambda*) in layout order.
  Vector equilibrium_state() const;

  /// A_i for a given symmetric Hessian factor B.
  Matrix local_matrix(int agent, const Matrix& B) const;
  /// A_i with the Hessian block removed.
  Matrix constant_part(int agent) const;
  /// A(x) = blkdiag(A_i(x_i)) with B_i the mean-value Hessian between x_i and x*_i.
  Matrix a_of(const Vector& x_hat) const;
  std::vector<Matrix> mean_value_hessians(const Vector& x_hat) const;

  std::vector<int> class_members(CostKind kind) const;
  std::size_t vertex_count() const;
  /// Vertex index per polytopic agent; the first polytopic agent varies fastest.
  std::vector<int> vertex_tuple(std::size_t j) const;
  Matrix vertex(std::size_t j) const;
  /// Local vertex matrix of agent i for the given choice (quadratic and
  /// general agents ignore `choice`).
  Matrix vertex_local(int agent, int choice) const;

  const std::vector<DelayEdge>& edges() const { return edges_; }
  int rho() const { return static_cast<int>(edges_.size()); }
  bool collapsed() const { return collapsed_; }
  /// Edge that carries channel (target, source), or -1.
  int edge_of(int target, int source) const;

  const std::optional<GainMatrix>& gain() const { return gain_; }
  ErrorSystem with_gain(GainMatrix gain) const;
  /// Same system with every edge bound replaced.
  ErrorSystem with_uniform_delay(DelayBound bound) const;
  double max_delay() const;

 private:
  friend ErrorSystem build_error_system(std::shared_ptr<const Problem>, const DelayConfig&);

  std::shared_ptr<const Problem> problem_;
  StateLayout layout_;
  KktPoint equilibrium_;
  std::vector<DelayEdge> edges_;
  std::map<std::pair<int, int>, int> edge_index_;
  bool collapsed_ = false;
  std::optional<GainMatrix> gain_;
};

/// Enumerates the delayed channels (i, j), j != i, with T_ij != 0 and solves
/// for the equilibrium. Throws EmptyCoupling when nothing couples the agents.
ErrorSystem build_error_system(std::shared_ptr<const Problem> p, const DelayConfig& delays);
ErrorSystem build_error_system(const Problem& p, const DelayConfig& delays);

/// Delayed state z(t - tau_k(t)) for edge k, full r-vector in layout order.
using DelayedLookup = std::function<Vector(int edge)>;

/// Standard delayed PDGD right-hand side on z = col(x_i, lambda_i).
Vector rhs_standard(const ErrorSystem& sys, const Vector& z, const DelayedLookup& delayed);

/// Augmented PDGD on the stacked state col(z, u) (length 2r); requires a gain.
Vector rhs_augmented(const ErrorSystem& sys, const Vector& state, const DelayedLookup& delayed);

/// Compact error dynamics; returns col(dz, du). `x_hat` selects A(x).
Vector rhs_error_compact(const ErrorSystem& sys, const Vector& z_err, const Vector& u_err,
                         const std::vector<Vector>& delayed_err, const Vector& x_hat);

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m);
/// Writes vertex_<j>.csv, T_<k>.csv and, when present, K.csv into `dir`.
void dump_structure_csv(const ErrorSystem& sys, const std::filesystem::path& dir);

}  // namespace pdgd
