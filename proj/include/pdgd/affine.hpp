#pragma once

#include "pdgd/linalg.hpp"

#include <stdexcept>
#include <utility>
#include <vector>

namespace pdgd {

/// c + sum_a coef_a * y_a with terms kept sorted by variable index.
struct LinExpr {
  double constant = 0.0;
  std::vector<std::pair<int, double>> terms;

  static LinExpr variable(int index, double coef = 1.0);
  bool is_zero() const { return constant == 0.0 && terms.empty(); }
  double evaluate(const Vector& y) const;

  LinExpr& operator+=(const LinExpr& other);
  LinExpr& operator*=(double s);
  /// Accumulates s * other.
  void add_scaled(const LinExpr& other, double s);
};

class DimensionMismatch : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Dense matrix whose entries are affine in the decision variables.
class AffineMatrix {
 public:
  AffineMatrix() = default;
  AffineMatrix(int rows, int cols);

  static AffineMatrix constant(const Matrix& m);
  /// Entry (i, j) is y_{idx(i, j)}; negative indices are structural zeros.
  static AffineMatrix from_indices(const Eigen::MatrixXi& idx);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  LinExpr& operator()(int i, int j) { return entries_[static_cast<std::size_t>(i) * cols_ + j]; }
  const LinExpr& operator()(int i, int j) const {
    return entries_[static_cast<std::size_t>(i) * cols_ + j];
  }

  AffineMatrix transpose() const;
  AffineMatrix& operator+=(const AffineMatrix& other);
  AffineMatrix& operator-=(const AffineMatrix& other);
  AffineMatrix& operator*=(double s);
  /// Adds s * I (square only).
  AffineMatrix& add_identity(double s);

  Matrix evaluate(const Vector& y) const;
  bool is_structurally_zero() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<LinExpr> entries_;
};

AffineMatrix operator+(AffineMatrix a, const AffineMatrix& b);
AffineMatrix operator-(AffineMatrix a, const AffineMatrix& b);
AffineMatrix operator*(double s, AffineMatrix a);
AffineMatrix operator*(const Matrix& c, const AffineMatrix& v);
AffineMatrix operator*(const AffineMatrix& v, const Matrix& c);

/// Symmetric block matrix assembled from its upper-triangular blocks; the lower
/// blocks are filled with transposes.
class SymmetricBlockBuilder {
 public:
  explicit SymmetricBlockBuilder(std::vector<int> sizes);

  /// Accumulates into block (bi, bj), bi <= bj.
  void add(int bi, int bj, const AffineMatrix& m);
  AffineMatrix build() const;
  int dim() const { return dim_; }

 private:
  std::vector<int> sizes_;
  std::vector<int> offsets_;
  int dim_ = 0;
  std::vector<std::vector<AffineMatrix>> blocks_;
};

}  // namespace pdgd
