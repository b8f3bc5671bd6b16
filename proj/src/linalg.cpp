#include "pdgd/linalg.hpp"

#include <Eigen/Eigenvalues>

namespace pdgd {

namespace {

Vector eigenvalues_sym(const Matrix& m) {
  if (m.size() == 0) return Vector();
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetric_part(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

}  // namespace

double min_eigenvalue(const Matrix& m) {
  Vector ev = eigenvalues_sym(m);
  return ev.size() == 0 ? 0.0 : ev.minCoeff();
}

double max_eigenvalue(const Matrix& m) {
  Vector ev = eigenvalues_sym(m);
  return ev.size() == 0 ? 0.0 : ev.maxCoeff();
}

Matrix block_diagonal(std::span<const Matrix> blocks) {
  Eigen::Index rows = 0, cols = 0;
  for (const auto& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  Matrix out = Matrix::Zero(rows, cols);
  Eigen::Index r = 0, c = 0;
  for (const auto& b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

bool is_symmetric(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol;
}

int numerical_rank(const Matrix& m, double rel_tol) {
  if (m.size() == 0) return 0;
  Eigen::ColPivHouseholderQR<Matrix> qr(m);
  qr.setThreshold(rel_tol);
  return static_cast<int>(qr.rank());
}

}  // namespace pdgd
