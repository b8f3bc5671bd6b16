#include "pdgd/affine.hpp"
#include "pdgd/block_sdp.hpp"
#include "pdgd/sdp.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace pdgd;

namespace {

struct Lyapunov {
  BlockSdp sdp;
  Eigen::MatrixXi idx;
};

// P > 0 and -(A'P + PA) > 0 with P symmetric n x n.
Lyapunov lyapunov(const Matrix& a) {
  Lyapunov l;
  const int n = static_cast<int>(a.rows());
  l.idx.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j)
      l.idx(i, j) = l.idx(j, i) = l.sdp.add_variable("p" + std::to_string(i) + std::to_string(j));
  const AffineMatrix p = AffineMatrix::from_indices(l.idx);
  l.sdp.blocks.push_back(SdpBlock::from_affine("P", p));
  l.sdp.blocks.push_back(SdpBlock::from_affine("L", -1.0 * (a.transpose() * p + p * a)));
  l.sdp.normalize_scales();
  return l;
}

Matrix unpack(const Eigen::MatrixXi& idx, const Vector& y) {
  Matrix m(idx.rows(), idx.cols());
  for (int i = 0; i < idx.rows(); ++i)
    for (int j = 0; j < idx.cols(); ++j) m(i, j) = y[idx(i, j)];
  return m;
}

double min_eig(const Matrix& m) { return Eigen::SelfAdjointEigenSolver<Matrix>(m).eigenvalues().minCoeff(); }

SdpOptions exact() {
  SdpOptions o;
  o.early_exit = false;
  return o;
}

}  // namespace

TEST_CASE("affine algebra evaluates like dense algebra") {
  Eigen::MatrixXi idx(2, 2);
  idx << 0, 1, -1, 2;
  const AffineMatrix v = AffineMatrix::from_indices(idx);
  Matrix c(2, 2);
  c << 1, 2, 3, 4;
  Vector y(3);
  y << 0.5, -1.0, 2.0;
  const Matrix vy = v.evaluate(y);
  CHECK(vy(1, 0) == 0.0);
  CHECK(((c * v + v.transpose() * c.transpose()).evaluate(y) - (c * vy + vy.transpose() * c.transpose())).norm() <
        1e-14);
  AffineMatrix w = v;
  w += AffineMatrix::constant(c);
  w *= 2.0;
  w.add_identity(1.0);
  CHECK((w.evaluate(y) - (2.0 * (vy + c) + Matrix::Identity(2, 2))).norm() < 1e-14);
  CHECK_THROWS_AS(v + AffineMatrix(3, 3), DimensionMismatch);
}

TEST_CASE("symmetric block builder mirrors the upper blocks") {
  SymmetricBlockBuilder b({1, 2});
  Matrix off(1, 2);
  off << 1, 2;
  b.add(0, 1, AffineMatrix::constant(off));
  b.add(1, 1, AffineMatrix::constant(Matrix::Identity(2, 2)));
  const Matrix m = b.build().evaluate(Vector());
  CHECK(m(1, 0) == 1.0);
  CHECK(m(2, 0) == 2.0);
  CHECK(m(0, 0) == 0.0);
  CHECK(m(2, 2) == 1.0);
}

TEST_CASE("blocks reject asymmetric data") {
  Matrix a(2, 2);
  a << 0, 1, 0, 0;
  CHECK_THROWS_AS(SdpBlock::from_affine("bad", AffineMatrix::constant(a)), DimensionMismatch);
}

TEST_CASE("sparse text format round trip") {
  Matrix a(2, 2);
  a << -1, 2, 0, -3;
  Lyapunov l = lyapunov(a);
  l.sdp.objective = Vector::Ones(l.sdp.num_vars);
  std::stringstream ss;
  write_sparse(ss, l.sdp);
  const BlockSdp back = read_sparse(ss);
  REQUIRE(back.blocks.size() == l.sdp.blocks.size());
  CHECK(back.num_vars == l.sdp.num_vars);
  CHECK(back.margin == l.sdp.margin);
  CHECK(back.has_objective());
  Vector y(3);
  y << 0.3, -0.2, 0.9;
  for (std::size_t b = 0; b < back.blocks.size(); ++b) {
    CHECK(back.blocks[b].name == l.sdp.blocks[b].name);
    CHECK(back.blocks[b].scale == l.sdp.blocks[b].scale);
    CHECK((back.blocks[b].evaluate(y) - l.sdp.blocks[b].evaluate(y)).norm() == 0.0);
  }
}

TEST_CASE("sparse reader reports the failing line") {
  std::istringstream in("format_version 1\nvars 2\nmargin 1e-6\nblock 0 2 1 A\nentry 0 5 0 0 1\n");
  try {
    read_sparse(in);
    FAIL("expected a format error");
  } catch (const SdpFormatError& e) {
    CHECK(std::string(e.what()).find("line 5") != std::string::npos);
  }
}

TEST_CASE("stable Lyapunov LMI is feasible") {
  Matrix a = -Matrix::Identity(2, 2);
  const Lyapunov l = lyapunov(a);
  const SdpSolution s = solve(l.sdp, exact());
  CHECK(s.status == SdpStatus::Feasible);
  const Matrix p = unpack(l.idx, s.y);
  CHECK(min_eig(p) >= 1e-6);
  CHECK(min_eig(-(a.transpose() * p + p * a)) >= 1e-6);
}

TEST_CASE("anti-stable Lyapunov LMI is infeasible") {
  const Lyapunov l = lyapunov(Matrix::Identity(2, 2));
  const SdpSolution s = solve(l.sdp, exact());
  CHECK(s.status == SdpStatus::Infeasible);
  // the best achievable slack is zero (P = 0)
  CHECK(std::abs(s.slack) <= 1e-6);
}

TEST_CASE("largest eigenvalue program") {
  BlockSdp sdp;
  sdp.margin = 0.0;
  const int t = sdp.add_variable("t");
  AffineMatrix f = AffineMatrix::constant(-Matrix(Eigen::Vector2d(1, 3).asDiagonal()));
  f.add_identity(0.0);
  f(0, 0) += LinExpr::variable(t);
  f(1, 1) += LinExpr::variable(t);
  sdp.blocks.push_back(SdpBlock::from_affine("F", f));
  sdp.objective = Vector::Ones(1);
  const SdpSolution s = solve(sdp);
  CHECK(s.status == SdpStatus::Optimal);
  CHECK(std::abs(s.objective - 3.0) <= 1e-6);
}

TEST_CASE("objective solve falls back to its best iterate when tolerances are out of reach") {
  BlockSdp sdp;
  sdp.margin = 1e-6;
  const int t = sdp.add_variable("t");
  AffineMatrix f = AffineMatrix::constant(-Matrix(Eigen::Vector2d(1, 3).asDiagonal()));
  f(0, 0) += LinExpr::variable(t);
  f(1, 1) += LinExpr::variable(t);
  sdp.blocks.push_back(SdpBlock::from_affine("F", f));
  sdp.objective = Vector::Ones(1);
  SdpOptions o;
  o.gap_tol = 0.0;
  o.max_iter = 60;
  const SdpSolution s = solve(sdp, o);
  CHECK(s.status == SdpStatus::Optimal);
  CHECK(s.reduced_accuracy);
  CHECK(s.min_margin >= sdp.margin);
  CHECK(std::abs(s.objective - (3.0 + 2e-6)) <= 1e-6);
  CHECK_FALSE(solve(sdp).reduced_accuracy);
}

TEST_CASE("random stable Lyapunov instances certify") {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int inst = 0; inst < 20; ++inst) {
    const int n = 2 + inst % 9;
    Matrix a(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = g(rng);
    const double shift = Eigen::EigenSolver<Matrix>(a).eigenvalues().real().maxCoeff();
    a -= (shift + 0.5) * Matrix::Identity(n, n);
    const Lyapunov l = lyapunov(a);
    const SdpSolution s = solve(l.sdp);
    CHECK(s.status == SdpStatus::Feasible);
    const Matrix p = unpack(l.idx, s.y);
    const double m1 = min_eig(p) * l.sdp.blocks[0].scale;
    const double m2 = min_eig(-(a.transpose() * p + p * a)) * l.sdp.blocks[1].scale;
    CHECK(std::min(m1, m2) >= l.sdp.margin);
  }
}

TEST_CASE("certificate check matches dense eigenvalues") {
  Matrix a(2, 2);
  a << -1, 4, 0, -2;
  const Lyapunov l = lyapunov(a);
  Vector y(3);
  y << 1.0, 0.2, 1.5;
  const auto m = check_certificate(l.sdp, y);
  const Matrix p = unpack(l.idx, y);
  CHECK(m[0] == doctest::Approx(min_eig(p) * l.sdp.blocks[0].scale));
  CHECK(m[1] == doctest::Approx(min_eig(-(a.transpose() * p + p * a)) * l.sdp.blocks[1].scale));
}
