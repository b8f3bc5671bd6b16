#pragma once

#include "pdgd/problem.hpp"
#include "pdgd/problem_io.hpp"
#include "pdgd/structure.hpp"

#include <memory>
#include <string>

namespace fixtures {

inline std::string paper10_path() { return PDGD_SOURCE_DIR "/examples/paper10.json"; }

inline std::shared_ptr<const pdgd::Problem> paper10() {
  static const auto p = std::make_shared<const pdgd::Problem>(pdgd::load_problem(paper10_path()));
  return p;
}

inline pdgd::Matrix m1(double v) { return pdgd::Matrix::Constant(1, 1, v); }
inline pdgd::Vector v1(double v) { return pdgd::Vector::Constant(1, v); }

// (x1 - 1)^2 + (x2 - 3)^2 subject to x1 - x2 = 0; x* = (2, 2), lambda* = -2.
inline pdgd::Problem two_agents() {
  pdgd::Problem p;
  p.name = "two";
  p.primal_dims = {1, 1};
  p.dual_dims = {1, 0};
  p.blocks = {{m1(1.0), m1(-1.0)}};
  p.rhs = {v1(0.0)};
  p.costs = {pdgd::CostModel::quadratic(m1(2.0), v1(-2.0), 1.0),
             pdgd::CostModel::quadratic(m1(2.0), v1(-6.0), 9.0)};
  return p;
}

// Chain of three agents, the last one with a log-sum-exp cost.
inline pdgd::Problem three_agents() {
  pdgd::Problem p;
  p.name = "three";
  p.primal_dims = {1, 1, 1};
  p.dual_dims = {1, 1, 0};
  p.blocks = {{m1(1.0), m1(-1.0), m1(0.0)}, {m1(0.0), m1(1.0), m1(-1.0)}};
  p.rhs = {v1(0.0), v1(0.0)};
  p.costs = {pdgd::CostModel::quadratic(m1(1.0), v1(-1.0), 0.0),
             pdgd::CostModel::quadratic(m1(2.0), v1(1.0), 0.0),
             pdgd::CostModel::separable(pdgd::catalog_form("log_sum_exp", {{"a", -0.1}, {"b", 0.3}, {"q", 0.9}}), 1,
                                        pdgd::CostKind::PolytopicHessian)};
  return p;
}

inline pdgd::ErrorSystem system_of(const pdgd::Problem& p, double h, double d) {
  pdgd::DelayConfig dc;
  dc.uniform = {h, d};
  return pdgd::build_error_system(std::make_shared<const pdgd::Problem>(p), dc);
}

}  // namespace fixtures
