#include "pdgd/affine.hpp"

#include <algorithm>

namespace pdgd {

LinExpr LinExpr::variable(int index, double coef) {
  LinExpr e;
  if (coef != 0.0) e.terms.emplace_back(index, coef);
  return e;
}

double LinExpr::evaluate(const Vector& y) const {
  double v = constant;
  for (const auto& [a, c] : terms) v += c * y[a];
  return v;
}

void LinExpr::add_scaled(const LinExpr& other, double s) {
  if (s == 0.0) return;
  constant += s * other.constant;
  if (other.terms.empty()) return;
  std::vector<std::pair<int, double>> merged;
  merged.reserve(terms.size() + other.terms.size());
  auto a = terms.begin();
  auto b = other.terms.begin();
  while (a != terms.end() || b != other.terms.end()) {
    if (b == other.terms.end() || (a != terms.end() && a->first < b->first)) {
      merged.push_back(*a++);
    } else if (a == terms.end() || b->first < a->first) {
      merged.emplace_back(b->first, s * b->second);
      ++b;
    } else {
      const double c = a->second + s * b->second;
      if (c != 0.0) merged.emplace_back(a->first, c);
      ++a;
      ++b;
    }
  }
  terms = std::move(merged);
}

LinExpr& LinExpr::operator+=(const LinExpr& other) {
  add_scaled(other, 1.0);
  return *this;
}

LinExpr& LinExpr::operator*=(double s) {
  constant *= s;
  if (s == 0.0) {
    terms.clear();
    return *this;
  }
  for (auto& t : terms) t.second *= s;
  return *this;
}

AffineMatrix::AffineMatrix(int rows, int cols)
    : rows_(rows), cols_(cols), entries_(static_cast<std::size_t>(rows) * cols) {}

AffineMatrix AffineMatrix::constant(const Matrix& m) {
  AffineMatrix a(static_cast<int>(m.rows()), static_cast<int>(m.cols()));
  for (int i = 0; i < a.rows_; ++i)
    for (int j = 0; j < a.cols_; ++j) a(i, j).constant = m(i, j);
  return a;
}

AffineMatrix AffineMatrix::from_indices(const Eigen::MatrixXi& idx) {
  AffineMatrix a(static_cast<int>(idx.rows()), static_cast<int>(idx.cols()));
  for (int i = 0; i < a.rows_; ++i)
    for (int j = 0; j < a.cols_; ++j)
      if (idx(i, j) >= 0) a(i, j) = LinExpr::variable(idx(i, j));
  return a;
}

AffineMatrix AffineMatrix::transpose() const {
  AffineMatrix t(cols_, rows_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

AffineMatrix& AffineMatrix::operator+=(const AffineMatrix& other) {
  if (other.rows_ != rows_ || other.cols_ != cols_)
    throw DimensionMismatch("affine matrix sum with mismatched shapes");
  for (std::size_t k = 0; k < entries_.size(); ++k) entries_[k] += other.entries_[k];
  return *this;
}

AffineMatrix& AffineMatrix::operator-=(const AffineMatrix& other) {
  if (other.rows_ != rows_ || other.cols_ != cols_)
    throw DimensionMismatch("affine matrix difference with mismatched shapes");
  for (std::size_t k = 0; k < entries_.size(); ++k) entries_[k].add_scaled(other.entries_[k], -1.0);
  return *this;
}

AffineMatrix& AffineMatrix::operator*=(double s) {
  for (auto& e : entries_) e *= s;
  return *this;
}

AffineMatrix& AffineMatrix::add_identity(double s) {
  if (rows_ != cols_) throw DimensionMismatch("identity added to a non-square matrix");
  for (int i = 0; i < rows_; ++i) (*this)(i, i).constant += s;
  return *this;
}

Matrix AffineMatrix::evaluate(const Vector& y) const {
  Matrix m(rows_, cols_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) m(i, j) = (*this)(i, j).evaluate(y);
  return m;
}

bool AffineMatrix::is_structurally_zero() const {
  return std::all_of(entries_.begin(), entries_.end(), [](const LinExpr& e) { return e.is_zero(); });
}

AffineMatrix operator+(AffineMatrix a, const AffineMatrix& b) { return a += b; }
AffineMatrix operator-(AffineMatrix a, const AffineMatrix& b) { return a -= b; }
AffineMatrix operator*(double s, AffineMatrix a) { return a *= s; }

AffineMatrix operator*(const Matrix& c, const AffineMatrix& v) {
  if (c.cols() != v.rows()) throw DimensionMismatch("constant * affine with mismatched shapes");
  AffineMatrix out(static_cast<int>(c.rows()), v.cols());
  for (int i = 0; i < out.rows(); ++i)
    for (int k = 0; k < v.rows(); ++k) {
      const double ck = c(i, k);
      if (ck == 0.0) continue;
      for (int j = 0; j < v.cols(); ++j)
        if (!v(k, j).is_zero()) out(i, j).add_scaled(v(k, j), ck);
    }
  return out;
}

AffineMatrix operator*(const AffineMatrix& v, const Matrix& c) {
  if (v.cols() != c.rows()) throw DimensionMismatch("affine * constant with mismatched shapes");
  AffineMatrix out(v.rows(), static_cast<int>(c.cols()));
  for (int i = 0; i < v.rows(); ++i)
    for (int k = 0; k < v.cols(); ++k) {
      if (v(i, k).is_zero()) continue;
      for (int j = 0; j < out.cols(); ++j) {
        const double ck = c(k, j);
        if (ck != 0.0) out(i, j).add_scaled(v(i, k), ck);
      }
    }
  return out;
}

SymmetricBlockBuilder::SymmetricBlockBuilder(std::vector<int> sizes) : sizes_(std::move(sizes)) {
  for (int s : sizes_) {
    offsets_.push_back(dim_);
    dim_ += s;
  }
  blocks_.resize(sizes_.size());
  for (std::size_t i = 0; i < sizes_.size(); ++i)
    for (std::size_t j = 0; j < sizes_.size(); ++j) blocks_[i].emplace_back(sizes_[i], sizes_[j]);
}

void SymmetricBlockBuilder::add(int bi, int bj, const AffineMatrix& m) {
  if (bi > bj) throw DimensionMismatch("only upper blocks may be set");
  if (m.rows() != sizes_[bi] || m.cols() != sizes_[bj])
    throw DimensionMismatch("block (" + std::to_string(bi) + "," + std::to_string(bj) +
                            ") expects " + std::to_string(sizes_[bi]) + "x" +
                            std::to_string(sizes_[bj]) + ", got " + std::to_string(m.rows()) +
                            "x" + std::to_string(m.cols()));
  blocks_[bi][bj] += m;
}

AffineMatrix SymmetricBlockBuilder::build() const {
  AffineMatrix out(dim_, dim_);
  const int nb = static_cast<int>(sizes_.size());
  for (int bi = 0; bi < nb; ++bi)
    for (int bj = bi; bj < nb; ++bj) {
      const AffineMatrix& b = blocks_[bi][bj];
      for (int i = 0; i < sizes_[bi]; ++i)
        for (int j = 0; j < sizes_[bj]; ++j) {
          out(offsets_[bi] + i, offsets_[bj] + j) = b(i, j);
          if (bi != bj) out(offsets_[bj] + j, offsets_[bi] + i) = b(i, j);
        }
    }
  return out;
}

}  // namespace pdgd
