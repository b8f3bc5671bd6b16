#include "fixtures.hpp"

#include "pdgd/cost.hpp"
#include "pdgd/linalg.hpp"
#include "pdgd/problem.hpp"
#include "pdgd/problem_io.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <random>

using namespace pdgd;
using nlohmann::json;

TEST_CASE("eigenvalue extremes of a 2x2 matrix") {
  Matrix m(2, 2);
  m << 2, 1, 1, 2;
  CHECK(min_eigenvalue(m) == doctest::Approx(1.0));
  CHECK(max_eigenvalue(m) == doctest::Approx(3.0));
}

TEST_CASE("block diagonal skips empty blocks") {
  std::vector<Matrix> blocks{Matrix::Ones(2, 2), Matrix(), 3.0 * Matrix::Identity(1, 1)};
  const Matrix d = block_diagonal(blocks);
  REQUIRE(d.rows() == 3);
  CHECK(d(2, 2) == 3.0);
  CHECK(d(0, 2) == 0.0);
  CHECK(d(1, 0) == 1.0);
}

TEST_CASE("numerical rank") {
  Matrix m(3, 3);
  m << 1, 2, 3, 2, 4, 6, 0, 1, 1;
  CHECK(numerical_rank(m) == 2);
  CHECK(numerical_rank(Matrix::Identity(4, 4)) == 4);
}

TEST_CASE("catalog derivatives agree with finite differences") {
  const std::vector<ScalarForm> forms{log_sum_exp_form(-0.1, 0.3, 0.9), sine_quadratic_form(1.0, 0.5, 0.5),
                                      sqrt_ratio_form(9.0, 0.6)};
  for (const auto& f : forms) {
    for (double x : {-7.0, -1.3, 0.0, 0.4, 2.5, 9.0}) {
      const double step = 1e-5;
      const double d1 = (f.value(x + step) - f.value(x - step)) / (2 * step);
      const double d2 = (f.d1(x + step) - f.d1(x - step)) / (2 * step);
      CHECK(f.d1(x) == doctest::Approx(d1).epsilon(1e-6));
      CHECK(f.d2(x) == doctest::Approx(d2).epsilon(1e-6));
    }
  }
}

TEST_CASE("catalog curvature bounds enclose sampled second derivatives") {
  const std::vector<ScalarForm> forms{log_sum_exp_form(-0.1, 0.3, 0.9), sine_quadratic_form(1.0, 0.5, 0.5),
                                      sqrt_ratio_form(9.0, 0.6)};
  for (const auto& f : forms) {
    double lo = 1e300, hi = -1e300;
    for (int k = 0; k <= 20000; ++k) {
      const double x = -50.0 + 100.0 * k / 20000.0;
      lo = std::min(lo, f.d2(x));
      hi = std::max(hi, f.d2(x));
    }
    CHECK(f.curvature_lo <= lo + 1e-12);
    CHECK(f.curvature_hi >= hi - 1e-12);
    CHECK(lo - f.curvature_lo < 1e-3);
    CHECK(f.curvature_hi - hi < 1e-3);
  }
}

TEST_CASE("quadratic cost curvature comes from the spectrum") {
  Matrix h(2, 2);
  h << 3, 1, 1, 3;
  const CostModel c = CostModel::quadratic(h, Vector::Zero(2), 0.0);
  CHECK(c.mu() == doctest::Approx(2.0));
  CHECK(c.ell() == doctest::Approx(4.0));
  CHECK(c.kind() == CostKind::Quadratic);
}

TEST_CASE("secant Hessian reproduces the gradient difference") {
  const CostModel c = CostModel::separable(sine_quadratic_form(1.0, 0.5, 0.5), 2, CostKind::PolytopicHessian);
  Vector x(2), y(2);
  x << 1.5, -2.0;
  y << -0.3, 4.0;
  const Matrix b = c.secant_hessian(x, y);
  const Vector lhs = c.gradient(x) - c.gradient(y);
  CHECK((lhs - b * (x - y)).norm() < 1e-10);
  for (int k = 0; k < 2; ++k) {
    CHECK(b(k, k) >= c.mu() - 1e-12);
    CHECK(b(k, k) <= c.ell() + 1e-12);
  }
}

TEST_CASE("hessian range contains every sampled Hessian") {
  const CostModel c = CostModel::separable(log_sum_exp_form(-0.1, 0.3, 0.9), 1, CostKind::PolytopicHessian);
  const auto [lo, hi] = hessian_range(c, {Interval{-5.0, 5.0}}, 101);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int k = 0; k < 200; ++k) {
    const double h = c.hessian(Vector::Constant(1, u(rng)))(0, 0);
    CHECK(h >= lo(0, 0));
    CHECK(h <= hi(0, 0));
  }
}

TEST_CASE("KKT point of the two-agent problem") {
  const KktPoint k = solve_kkt(fixtures::two_agents());
  CHECK(k.x(0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(k.x(1) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(k.lambda(0) == doctest::Approx(-2.0).epsilon(1e-12));
}

TEST_CASE("paper10 KKT point is the consensus minimizer") {
  const auto p = fixtures::paper10();
  CHECK(validate_problem(*p).empty());
  const KktPoint k = solve_kkt(*p);
  // independent oracle: the common value x solves sum_i f_i'(x) = 0, found by bisection
  auto dsum = [&](double x) {
    double s = 0.0;
    for (int i = 0; i < p->agents(); ++i) s += p->costs[i].gradient(Vector::Constant(1, x))(0);
    return s;
  };
  double lo = -100.0, hi = 100.0;
  REQUIRE(dsum(lo) < 0.0);
  REQUIRE(dsum(hi) > 0.0);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (dsum(mid) > 0.0 ? hi : lo) = mid;
  }
  for (int i = 0; i < p->agents(); ++i) CHECK(std::abs(k.x(i) - 0.5 * (lo + hi)) < 1e-9);
  CHECK(k.stationarity_residual < 1e-9);
  CHECK(k.feasibility_residual < 1e-9);
}

TEST_CASE("problem JSON round trip keeps the hash") {
  const auto p = fixtures::paper10();
  const json doc = problem_to_json(*p);
  const Problem q = problem_from_json(doc);
  CHECK(problem_hash(q) == problem_hash(*p));
  CHECK(problem_hash(q).size() == 16);
}

TEST_CASE("hash changes when a coefficient changes") {
  Problem p = fixtures::two_agents();
  const std::string before = problem_hash(p);
  p.rhs[0](0) = 0.5;
  CHECK(problem_hash(p) != before);
}

TEST_CASE("FNV-1a reference values") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("schema errors name the offending path") {
  json doc = problem_to_json(fixtures::two_agents());
  doc["agents"][1]["colour"] = "red";
  try {
    problem_from_json(doc);
    FAIL("expected a schema error");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("$.agents[1]") != std::string::npos);
  }
  json bad_box = problem_to_json(fixtures::two_agents());
  bad_box["agents"][0]["box"] = json::array({json::array({2.0, 1.0})});
  CHECK_THROWS_AS(problem_from_json(bad_box), SchemaError);
}
