#include "fixtures.hpp"

#include "pdgd/lmi.hpp"
#include "pdgd/simulate.hpp"
#include "pdgd/synthesis.hpp"

#include <doctest.h>

#include <filesystem>
#include <random>

using namespace pdgd;

namespace {

std::vector<Matrix> vertex_hessians(const ErrorSystem& sys, std::size_t j) {
  const Problem& p = sys.problem();
  const auto tuple = sys.vertex_tuple(j);
  std::vector<Matrix> out;
  std::size_t next = 0;
  for (int i = 0; i < p.agents(); ++i) {
    if (p.costs[i].kind() == CostKind::PolytopicHessian)
      out.push_back(p.costs[i].vertex_hessians()[tuple[next++]]);
    else
      out.push_back(p.costs[i].hessian(Vector::Zero(p.primal_dims[i])));
  }
  return out;
}

SynthesisOptions opts(double eps) {
  SynthesisOptions o;
  o.epsilon = eps;
  return o;
}

const Certificate& small_certificate() {
  static const Certificate c = synthesize(fixtures::system_of(fixtures::three_agents(), 0.5, 0.1), opts(1.5));
  return c;
}

}  // namespace

TEST_CASE("vertex blocks equal the dense Phi at the vertex Hessians") {
  const ErrorSystem sys = fixtures::system_of(fixtures::three_agents(), 0.7, 0.1);
  LmiOptions lo;
  lo.epsilon = 1.5;
  const LmiProgram prog = assemble_delay_lmi(sys, lo);
  REQUIRE(prog.vertex_blocks.size() == sys.vertex_count());
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector y(prog.sdp.num_vars);
  for (int a = 0; a < y.size(); ++a) y[a] = u(rng);
  const DecisionVars v = DecisionVars::extract(prog.vars, y);
  for (std::size_t j = 0; j < sys.vertex_count(); ++j) {
    const SdpBlock& b = prog.sdp.blocks[prog.vertex_blocks[j]];
    const Matrix phi = evaluate_phi_with(sys, v, 1.5, vertex_hessians(sys, j));
    CHECK((b.evaluate(y) + b.scale * phi).lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("variables pack and extract consistently") {
  const ErrorSystem sys = fixtures::system_of(fixtures::three_agents(), 0.7, 0.1);
  LmiOptions lo;
  const LmiProgram prog = assemble_delay_lmi(sys, lo);
  Vector y = Vector::LinSpaced(prog.sdp.num_vars, -1.0, 1.0);
  const DecisionVars v = DecisionVars::extract(prog.vars, y);
  CHECK((v.pack(prog.vars, prog.sdp.num_vars) - y).norm() == 0.0);
}

TEST_CASE("vertex cap guards the enumeration") {
  const ErrorSystem sys = fixtures::system_of(*fixtures::paper10(), 0.5, 0.1);
  LmiOptions lo;
  lo.vertex_cap = 4;
  CHECK_THROWS_AS(assemble_delay_lmi(sys, lo), VertexExplosion);
}

TEST_CASE("synthesized certificate satisfies its own checks") {
  const Certificate& c = small_certificate();
  const ErrorSystem sys = certificate_system(std::make_shared<const Problem>(fixtures::three_agents()), c);
  CHECK(gain_recovery_error(sys.layout(), c) <= 1e-9);
  const auto m = recheck_margins(sys, c);
  REQUIRE(m.size() == c.margins.size());
  for (std::size_t b = 0; b < m.size(); ++b) {
    CHECK(m[b].margin >= c.margin);
    CHECK(std::abs(m[b].margin - c.margins[b].margin) <= 1e-9);
  }
  CHECK(c.max_delay() == 0.5);
}

TEST_CASE("certificate JSON round trip reproduces margins") {
  const Certificate& c = small_certificate();
  const auto path = std::filesystem::temp_directory_path() / "pdgd_cert_roundtrip.json";
  save_certificate(path, c);
  const Certificate back = load_certificate(path);
  std::filesystem::remove(path);
  CHECK(back.problem_hash == c.problem_hash);
  const ErrorSystem sys = certificate_system(std::make_shared<const Problem>(fixtures::three_agents()), back);
  const auto m = recheck_margins(sys, back);
  for (std::size_t b = 0; b < m.size(); ++b) CHECK(std::abs(m[b].margin - c.margins[b].margin) <= 1e-9);
  CHECK(certificate_to_json(back).dump() == certificate_to_json(c).dump());
}

TEST_CASE("Phi is negative on random states") {
  const Certificate& c = small_certificate();
  const Problem p = fixtures::three_agents();
  const ErrorSystem sys = certificate_system(std::make_shared<const Problem>(p), c);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int s = 0; s < 20; ++s) {
    Vector x(3);
    for (int i = 0; i < 3; ++i) x[i] = u(rng);
    CHECK(max_eigenvalue(c.vertex_scale * evaluate_phi_at(sys, c.vars, c.epsilon, x)) < -0.5 * c.margin);
  }
}

TEST_CASE("gain minimization does not enlarge the gain") {
  const ErrorSystem sys = fixtures::system_of(fixtures::three_agents(), 0.5, 0.1);
  SynthesisOptions o = opts(1.5);
  o.minimize_gain = GainWeights{1.0, 1.0};
  const Certificate g = synthesize(sys, o);
  CHECK(g.gain_minimized);
  CHECK(g.gain.assembled().operatorNorm() <= small_certificate().gain.assembled().operatorNorm() + 1e-9);
  const ErrorSystem cs = certificate_system(std::make_shared<const Problem>(fixtures::three_agents()), g);
  for (const auto& m : recheck_margins(cs, g)) CHECK(m.margin >= g.margin);
}

TEST_CASE("bisection lands on the grid and stays monotone") {
  const ErrorSystem sys = fixtures::system_of(fixtures::three_agents(), 0.0, 0.1);
  MadubOptions mo;
  mo.h_hi = 40.0;
  mo.tol = 0.05;
  mo.synthesis = opts(1.5);
  const MadubResult r = madub(sys, mo);
  CHECK(r.trace_monotone());
  CHECK(std::abs(r.h_bar / 0.05 - std::round(r.h_bar / 0.05)) < 1e-9);
  REQUIRE(r.certificate);
  CHECK(r.certificate->max_delay() == doctest::Approx(r.h_bar));
  double lowest_infeasible = 1e9;
  for (const auto& s : r.trace)
    if (!s.feasible) lowest_infeasible = std::min(lowest_infeasible, s.h);
  CHECK(lowest_infeasible - r.h_bar == doctest::Approx(0.05));
}

TEST_CASE("unbracketed search reports a bracket") {
  const ErrorSystem sys = fixtures::system_of(fixtures::three_agents(), 0.0, 0.1);
  MadubOptions mo;
  mo.h_lo = 0.0;
  mo.h_hi = 0.01;
  mo.tol = 0.005;
  mo.synthesis = opts(1.5);
  try {
    madub(sys, mo);
    FAIL("expected NotBracketed");
  } catch (const NotBracketed& e) {
    CHECK(e.suggested_lo == doctest::Approx(0.01));
    CHECK(e.suggested_hi > 0.01);
  }
}

TEST_CASE("LKF quadrature converges under step refinement") {
  const Certificate& c = small_certificate();
  const ErrorSystem sys =
      certificate_system(std::make_shared<const Problem>(fixtures::three_agents()), c).with_gain(c.gain);
  std::vector<double> v_at;
  for (double dt : {0.01, 0.005, 0.0025}) {
    SimulationOptions o;
    o.dynamics = Dynamics::Augmented;
    o.T = 2.0;
    o.dt = dt;
    o.delays = {DelaySignal::sinusoid(0.5, 0.1)};
    const Trajectory tr = integrate(sys, random_initial_state(sys, true, 3), o);
    const LkfSeries l = evaluate_lkf(tr, c.vars, {DelayBound{0.5, 0.1}});
    v_at.push_back(l.V.back());
  }
  const double ratio = (v_at[0] - v_at[1]) / (v_at[1] - v_at[2]);
  CHECK(ratio >= 1.8);
  CHECK(ratio <= 4.5);
}
