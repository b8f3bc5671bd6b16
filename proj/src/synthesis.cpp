#include "pdgd/synthesis.hpp"

#include "pdgd/problem_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace pdgd {

using nlohmann::json;

Infeasible::Infeasible(double h_, double eps_, const std::string& detail)
    : std::runtime_error(detail), h(h_), epsilon(eps_) {}

NotBracketed::NotBracketed(const std::string& what, double lo, double hi)
    : std::runtime_error(what), suggested_lo(lo), suggested_hi(hi) {}

double Certificate::max_delay() const {
  double h = 0.0;
  for (const auto& e : edges) h = std::max(h, e.bound.h);
  return h;
}

namespace {

LmiOptions lmi_options(const SynthesisOptions& o) {
  LmiOptions lo;
  lo.epsilon = o.epsilon;
  lo.margin = o.margin;
  lo.tie_edges = o.tie_edges;
  lo.vertex_cap = o.vertex_cap;
  return lo;
}

Certificate make_certificate(const ErrorSystem& sys, const LmiProgram& prog, const Vector& y,
                             const SdpSolution& sol, const SynthesisOptions& o) {
  Certificate c;
  c.problem_hash = problem_hash(sys.problem());
  c.problem_name = sys.problem().name;
  c.epsilon = o.epsilon;
  c.margin = o.margin;
  c.tie_edges = o.tie_edges;
  c.collapsed = sys.collapsed();
  for (const auto& e : sys.edges()) c.edges.push_back({e.target, e.source, e.members, e.bound});
  c.vars = DecisionVars::extract(prog.vars, y);
  c.gain = recover_gain(sys.layout(), c.vars);
  const auto m = check_certificate(prog.sdp, y);
  c.min_margin = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < m.size(); ++b) {
    c.margins.push_back({prog.sdp.blocks[b].name, m[b]});
    c.min_margin = std::min(c.min_margin, m[b]);
  }
  if (!prog.vertex_blocks.empty()) c.vertex_scale = prog.sdp.blocks[prog.vertex_blocks[0]].scale;
  c.solver_status = sol.status;
  c.iterations = sol.iterations;
  c.reduced_accuracy = sol.reduced_accuracy;
  c.solver = o.solver;
  return c;
}

void check_p2(const Certificate& c) {
  for (const auto& bm : c.margins)
    if (bm.name.rfind("P2_", 0) == 0 && bm.margin < c.margin)
      throw SingularP2("block " + bm.name + " has margin " + std::to_string(bm.margin));
}

bool all_at_least(const std::vector<double>& m, double delta) {
  return std::all_of(m.begin(), m.end(), [&](double v) { return v >= delta; });
}

json options_to_json(const SdpOptions& o) {
  return {{"gap_tol", o.gap_tol},
          {"feas_tol", o.feas_tol},
          {"slack_change_tol", o.slack_change_tol},
          {"max_iter", o.max_iter},
          {"feasibility_box", o.feasibility_box},
          {"objective_box", o.objective_box},
          {"objective_margin_factor", o.objective_margin_factor},
          {"step_fraction", o.step_fraction},
          {"early_exit", o.early_exit}};
}

SdpOptions options_from_json(const json& j) {
  SdpOptions o;
  o.gap_tol = j.at("gap_tol").get<double>();
  o.feas_tol = j.at("feas_tol").get<double>();
  o.slack_change_tol = j.at("slack_change_tol").get<double>();
  o.max_iter = j.at("max_iter").get<int>();
  o.feasibility_box = j.at("feasibility_box").get<double>();
  o.objective_box = j.at("objective_box").get<double>();
  o.objective_margin_factor = j.at("objective_margin_factor").get<double>();
  o.step_fraction = j.at("step_fraction").get<double>();
  o.early_exit = j.at("early_exit").get<bool>();
  return o;
}

json matrices_to_json(const std::vector<Matrix>& ms) {
  json a = json::array();
  for (const auto& m : ms) a.push_back(matrix_to_json(m));
  return a;
}

std::vector<Matrix> matrices_from_json(const json& j, const std::string& path) {
  std::vector<Matrix> out;
  for (std::size_t k = 0; k < j.size(); ++k)
    out.push_back(matrix_from_json(j[k], path + "[" + std::to_string(k) + "]"));
  return out;
}

}  // namespace

SynthesisResult try_synthesize(const ErrorSystem& sys, const SynthesisOptions& options) {
  SynthesisResult result;
  const LmiProgram prog = assemble_delay_lmi(sys, lmi_options(options));
  result.solution = solve(prog.sdp, options.solver);
  if (result.solution.status != SdpStatus::Feasible) return result;
  result.feasible = true;
  Certificate cert = make_certificate(sys, prog, result.solution.y, result.solution, options);
  cert.gain_weights = options.minimize_gain;

  if (options.minimize_gain) {
    const LmiProgram gp =
        assemble_gain_objective(prog, sys, options.minimize_gain->alpha1, options.minimize_gain->alpha2);
    const SdpSolution gs = solve(gp.sdp, options.solver);
    if (gs.status == SdpStatus::Optimal && all_at_least(gs.margins, options.margin)) {
      cert = make_certificate(sys, gp, gs.y, gs, options);
      cert.gain_weights = options.minimize_gain;
      cert.gain_minimized = true;
    }
  }
  check_p2(cert);
  result.certificate = std::move(cert);
  return result;
}

Certificate synthesize(const ErrorSystem& sys, const SynthesisOptions& options) {
  SynthesisResult r = try_synthesize(sys, options);
  if (!r.feasible) {
    std::ostringstream msg;
    msg << "no certificate with margin " << options.margin << " at h = " << sys.max_delay()
        << ", epsilon = " << options.epsilon << " (solver status " << to_string(r.solution.status)
        << ", best margin " << r.solution.min_margin << "); try a smaller h";
    throw Infeasible(sys.max_delay(), options.epsilon, msg.str());
  }
  return *r.certificate;
}

LmiProgram certificate_program(const ErrorSystem& sys, const Certificate& cert) {
  LmiOptions lo;
  lo.epsilon = cert.epsilon;
  lo.margin = cert.margin;
  lo.tie_edges = cert.tie_edges;
  LmiProgram prog = assemble_delay_lmi(sys, lo);
  if (cert.gain_minimized && cert.gain_weights)
    prog = assemble_gain_objective(std::move(prog), sys, cert.gain_weights->alpha1, cert.gain_weights->alpha2);
  return prog;
}

ErrorSystem certificate_system(std::shared_ptr<const Problem> problem, const Certificate& cert) {
  DelayConfig dc;
  dc.collapse_homogeneous = cert.collapsed;
  if (!cert.edges.empty()) dc.uniform = cert.edges.front().bound;
  if (!cert.collapsed)
    for (const auto& e : cert.edges)
      for (const auto& m : e.members) dc.per_edge[m] = e.bound;
  return build_error_system(std::move(problem), dc);
}

std::vector<BlockMargin> recheck_margins(const ErrorSystem& sys, const Certificate& cert) {
  const LmiProgram prog = certificate_program(sys, cert);
  const Vector y = cert.vars.pack(prog.vars, prog.sdp.num_vars);
  const auto m = check_certificate(prog.sdp, y);
  std::vector<BlockMargin> out;
  for (std::size_t b = 0; b < m.size(); ++b) out.push_back({prog.sdp.blocks[b].name, m[b]});
  return out;
}

double gain_recovery_error(const StateLayout& layout, const Certificate& cert) {
  double err = 0.0;
  if (static_cast<int>(cert.gain.blocks.size()) != layout.agents())
    return std::numeric_limits<double>::infinity();
  for (int i = 0; i < layout.agents(); ++i) {
    const Matrix p = cert.vars.p2_block(layout, i);
    const Matrix& k = cert.gain.blocks[i];
    if (k.rows() != p.rows() || k.cols() != p.cols()) return std::numeric_limits<double>::infinity();
    err = std::max(err, (p.transpose() * k - cert.vars.x_block(layout, i)).cwiseAbs().maxCoeff());
  }
  return err;
}

json certificate_to_json(const Certificate& c) {
  json j;
  j["format_version"] = 1;
  j["kind"] = "pdgd-certificate";
  j["problem_hash"] = c.problem_hash;
  j["problem_name"] = c.problem_name;
  j["epsilon"] = c.epsilon;
  j["margin"] = c.margin;
  j["tie_edges"] = c.tie_edges;
  j["collapsed"] = c.collapsed;
  json edges = json::array();
  for (const auto& e : c.edges) {
    json members = json::array();
    for (const auto& [t, s] : e.members) members.push_back({t + 1, s + 1});
    edges.push_back({{"target", e.target + 1},
                     {"source", e.source + 1},
                     {"h", e.bound.h},
                     {"d", e.bound.d},
                     {"members", members}});
  }
  j["edges"] = edges;
  const DecisionVars& v = c.vars;
  j["vars"] = {{"Y11", matrix_to_json(v.Y11)},         {"Y12", matrix_to_json(v.Y12)},
               {"Y22", matrix_to_json(v.Y22)},         {"P2", matrix_to_json(v.P2)},
               {"X", matrix_to_json(v.X)},             {"R", matrices_to_json(v.R)},
               {"Q", matrices_to_json(v.Q)},           {"S", matrices_to_json(v.S)},
               {"S12", matrices_to_json(v.S12)},       {"Omega1", matrices_to_json(v.Omega1)},
               {"Omega2", matrices_to_json(v.Omega2)}, {"Omega3", matrices_to_json(v.Omega3)},
               {"kappa_X", v.kappa_x},                 {"kappa_P", v.kappa_p}};
  j["gain"] = matrices_to_json(c.gain.blocks);
  json margins = json::array();
  for (const auto& m : c.margins) margins.push_back({{"block", m.name}, {"margin", m.margin}});
  j["margins"] = margins;
  j["min_margin"] = c.min_margin;
  j["vertex_scale"] = c.vertex_scale;
  if (c.gain_weights)
    j["gain_weights"] = {{"alpha1", c.gain_weights->alpha1}, {"alpha2", c.gain_weights->alpha2}};
  else
    j["gain_weights"] = nullptr;
  j["gain_minimized"] = c.gain_minimized;
  j["solver"] = {{"status", to_string(c.solver_status)},
                 {"iterations", c.iterations},
                 {"reduced_accuracy", c.reduced_accuracy},
                 {"options", options_to_json(c.solver)}};
  return j;
}

Certificate certificate_from_json(const json& j) {
  try {
    if (j.at("format_version").get<int>() != 1) throw SchemaError("certificate: unsupported format_version");
    if (j.at("kind").get<std::string>() != "pdgd-certificate") throw SchemaError("certificate: wrong kind");
    Certificate c;
    c.problem_hash = j.at("problem_hash").get<std::string>();
    c.problem_name = j.at("problem_name").get<std::string>();
    c.epsilon = j.at("epsilon").get<double>();
    c.margin = j.at("margin").get<double>();
    c.tie_edges = j.at("tie_edges").get<bool>();
    c.collapsed = j.at("collapsed").get<bool>();
    for (const auto& e : j.at("edges")) {
      EdgeRecord r;
      r.target = e.at("target").get<int>() - 1;
      r.source = e.at("source").get<int>() - 1;
      r.bound = {e.at("h").get<double>(), e.at("d").get<double>()};
      for (const auto& m : e.at("members")) r.members.emplace_back(m.at(0).get<int>() - 1, m.at(1).get<int>() - 1);
      c.edges.push_back(std::move(r));
    }
    const json& v = j.at("vars");
    c.vars.Y11 = matrix_from_json(v.at("Y11"), "vars.Y11");
    c.vars.Y12 = matrix_from_json(v.at("Y12"), "vars.Y12");
    c.vars.Y22 = matrix_from_json(v.at("Y22"), "vars.Y22");
    c.vars.P2 = matrix_from_json(v.at("P2"), "vars.P2");
    c.vars.X = matrix_from_json(v.at("X"), "vars.X");
    c.vars.R = matrices_from_json(v.at("R"), "vars.R");
    c.vars.Q = matrices_from_json(v.at("Q"), "vars.Q");
    c.vars.S = matrices_from_json(v.at("S"), "vars.S");
    c.vars.S12 = matrices_from_json(v.at("S12"), "vars.S12");
    c.vars.Omega1 = matrices_from_json(v.at("Omega1"), "vars.Omega1");
    c.vars.Omega2 = matrices_from_json(v.at("Omega2"), "vars.Omega2");
    c.vars.Omega3 = matrices_from_json(v.at("Omega3"), "vars.Omega3");
    c.vars.kappa_x = v.at("kappa_X").get<double>();
    c.vars.kappa_p = v.at("kappa_P").get<double>();
    c.gain.blocks = matrices_from_json(j.at("gain"), "gain");
    for (const auto& m : j.at("margins"))
      c.margins.push_back({m.at("block").get<std::string>(), m.at("margin").get<double>()});
    c.min_margin = j.at("min_margin").get<double>();
    c.vertex_scale = j.at("vertex_scale").get<double>();
    if (!j.at("gain_weights").is_null())
      c.gain_weights = GainWeights{j["gain_weights"].at("alpha1").get<double>(),
                                   j["gain_weights"].at("alpha2").get<double>()};
    c.gain_minimized = j.at("gain_minimized").get<bool>();
    c.solver_status = sdp_status_from_string(j.at("solver").at("status").get<std::string>());
    c.iterations = j.at("solver").at("iterations").get<int>();
    c.reduced_accuracy = j.at("solver").value("reduced_accuracy", false);
    c.solver = options_from_json(j.at("solver").at("options"));
    return c;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("certificate: ") + e.what());
  }
}

void save_certificate(const std::filesystem::path& path, const Certificate& cert) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << certificate_to_json(cert).dump(1) << "\n";
}

Certificate load_certificate(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
  return certificate_from_json(j);
}

bool MadubResult::trace_monotone() const {
  double max_feasible = -std::numeric_limits<double>::infinity();
  double min_infeasible = std::numeric_limits<double>::infinity();
  for (const auto& s : trace) {
    if (s.feasible) max_feasible = std::max(max_feasible, s.h);
    else min_infeasible = std::min(min_infeasible, s.h);
  }
  return max_feasible < min_infeasible;
}

MadubResult madub(const ErrorSystem& sys, const MadubOptions& o) {
  if (!(o.tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
  if (!(o.h_lo >= 0.0) || !(o.h_hi > o.h_lo)) throw std::invalid_argument("need 0 <= h_lo < h_hi");
  if (!(o.d >= 0.0) || o.d > 1.0) throw std::invalid_argument("d must lie in [0, 1]");
  if (sys.rho() == 0) throw std::invalid_argument("no delayed channels to bound");

  MadubResult r;
  r.epsilon = o.synthesis.epsilon;
  r.d = o.d;
  r.tol = o.tol;
  SynthesisOptions plain = o.synthesis;
  plain.minimize_gain.reset();

  long long k_lo = std::llround(o.h_lo / o.tol);
  long long k_hi = std::llround(o.h_hi / o.tol);
  if (k_hi <= k_lo) throw std::invalid_argument("bracket narrower than the tolerance");

  auto test = [&](long long k) {
    const double h = static_cast<double>(k) * o.tol;
    SynthesisResult s = try_synthesize(sys.with_uniform_delay({h, o.d}), plain);
    r.trace.push_back({h, s.feasible, s.solution.status, s.solution.min_margin});
    return s;
  };

  SynthesisResult lo = test(k_lo);
  if (!lo.feasible)
    throw NotBracketed("infeasible at h_lo = " + std::to_string(k_lo * o.tol) + "; lower h_lo",
                       0.0, k_lo * o.tol);
  SynthesisResult hi = test(k_hi);
  if (hi.feasible)
    throw NotBracketed("feasible at h_hi = " + std::to_string(k_hi * o.tol) + "; raise h_hi",
                       k_hi * o.tol, 2.0 * k_hi * o.tol);
  std::optional<Certificate> best = lo.certificate;
  while (k_hi - k_lo > 1) {
    const long long mid = k_lo + (k_hi - k_lo) / 2;
    SynthesisResult s = test(mid);
    if (s.feasible) {
      k_lo = mid;
      best = std::move(s.certificate);
    } else {
      k_hi = mid;
    }
  }
  r.h_bar = static_cast<double>(k_lo) * o.tol;
  if (o.synthesis.minimize_gain) {
    SynthesisResult g = try_synthesize(sys.with_uniform_delay({r.h_bar, o.d}), o.synthesis);
    if (g.feasible) best = std::move(g.certificate);
  }
  r.certificate = std::move(best);
  return r;
}

json madub_to_json(const MadubResult& r) {
  json j;
  j["format_version"] = 1;
  j["kind"] = "pdgd-madub";
  j["epsilon"] = r.epsilon;
  j["d"] = r.d;
  j["h_bar"] = r.h_bar;
  j["tol"] = r.tol;
  j["trace_monotone"] = r.trace_monotone();
  json t = json::array();
  for (const auto& s : r.trace)
    t.push_back({{"h", s.h}, {"feasible", s.feasible}, {"status", to_string(s.status)}, {"margin", s.margin}});
  j["trace"] = t;
  if (r.certificate) {
    const Certificate& c = *r.certificate;
    j["certificate"] = {{"min_margin", c.min_margin},
                        {"gain_minimized", c.gain_minimized},
                        {"gain_norm", c.gain.assembled().operatorNorm()},
                        {"digest", fnv1a_hex(certificate_to_json(c).dump())}};
  } else {
    j["certificate"] = nullptr;
  }
  return j;
}

void write_trace_csv(const std::filesystem::path& path, const MadubResult& r) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "h,feasible,status,margin\n" << std::setprecision(17);
  for (const auto& s : r.trace)
    out << s.h << "," << (s.feasible ? 1 : 0) << "," << to_string(s.status) << "," << s.margin << "\n";
}

}  // namespace pdgd
