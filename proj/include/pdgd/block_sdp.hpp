#pragma once

#include "pdgd/affine.hpp"
#include "pdgd/linalg.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdgd {

/// One upper-triangular coefficient of F_a (row <= col).
struct SdpCoefficient {
  int var = 0;
  int row = 0;
  int col = 0;
  double value = 0.0;
};

/// PSD constraint F_0 + sum_a y_a F_a >= margin * I, stored after scaling.
struct SdpBlock {
  std::string name;
  int dim = 0;
  Matrix constant;
  std::vector<SdpCoefficient> coefficients;  // sorted by (var, row, col)
  double scale = 1.0;                        // factor already applied to the data

  /// Symmetric affine matrix -> block; throws DimensionMismatch if asymmetric.
  static SdpBlock from_affine(std::string name, const AffineMatrix& m);

  Matrix evaluate(const Vector& y) const;
  /// F_a alone, dense and symmetric.
  Matrix coefficient_matrix(int var) const;
  double max_abs_entry() const;
  void apply_scale(double s);
};

struct BlockSdp {
  int num_vars = 0;
  std::vector<std::string> var_names;
  std::vector<SdpBlock> blocks;
  Vector objective;  // minimize objective . y; empty means feasibility
  double margin = 1e-6;

  bool has_objective() const;
  int add_variable(std::string name);
  /// Scales each block to unit max entry; blocks in `groups` share one factor.
  void normalize_scales(const std::vector<std::vector<int>>& groups = {});
};

class SdpFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr int kBlockSdpFormatVersion = 1;

/// Sparse text format, one record per line:
///   format_version 1
///   vars <m>
///   margin <delta>
///   objective <var> <value>                  (1-based var)
///   block <b> <dim> <scale> <name>
///   entry <b> <var> <row> <col> <value>      (var 0 is F_0; row <= col, 0-based)
void write_sparse(std::ostream& out, const BlockSdp& sdp);
BlockSdp read_sparse(std::istream& in);

/// Smallest eigenvalue of every block at y.
std::vector<double> block_margins(const BlockSdp& sdp, const Vector& y);

}  // namespace pdgd
