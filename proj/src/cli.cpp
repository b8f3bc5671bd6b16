#include "pdgd/cli.hpp"

#include "pdgd/problem_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <memory>
#include <random>
#include <sstream>

namespace pdgd {

using nlohmann::json;

namespace {

const std::vector<double> kSweepEps{0.5, 1.0, 1.5};

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("schema error: " + what);
}

void validate(const RunConfig& c) {
  static const std::vector<std::string> commands{"synthesize", "madub", "simulate", "verify", "dump", "export-sdp"};
  require(std::find(commands.begin(), commands.end(), c.command) != commands.end(),
          "unknown command '" + c.command + "'");
  require(!c.problem.empty(), "problem path is required");
  for (double e : c.eps) require(e > 0.0 && std::isfinite(e), "eps values must be positive");
  require(c.h >= 0.0 && std::isfinite(c.h), "h must be >= 0");
  require(c.d >= 0.0 && c.d <= 1.0, "d must lie in [0, 1]");
  for (const auto& e : c.edge_delays) {
    require(e.target >= 1 && e.source >= 1, "edge_delays agents are 1-based");
    require(e.bound.h >= 0.0 && e.bound.d >= 0.0 && e.bound.d <= 1.0, "edge_delays bounds out of range");
  }
  require(c.alpha1 >= 0.0 && c.alpha2 >= 0.0, "alpha1 and alpha2 must be >= 0");
  require(c.margin > 0.0, "margin must be positive");
  require(c.solver.max_iter > 0, "max_iter must be positive");
  require(c.solver.gap_tol > 0.0 && c.solver.feas_tol > 0.0, "solver tolerances must be positive");
  require(c.h_lo >= 0.0 && c.h_hi > c.h_lo, "need 0 <= h_lo < h_hi");
  require(c.tol > 0.0, "tol must be positive");
  require(c.dynamics == "standard" || c.dynamics == "augmented", "dynamics must be standard or augmented");
  require(c.dt > 0.0 && c.T >= c.dt, "need dt > 0 and T >= dt");
  require(c.record_stride >= 1, "record_stride must be >= 1");
  require(c.spread >= 0.0, "spread must be >= 0");
  require(c.phi_samples >= 0 && c.stress_runs >= 0, "sample counts must be >= 0");
  require(c.lkf_T > 0.0 && c.stress_T > 0.0, "horizons must be positive");
  require(c.lkf_slack >= 0.0 && c.stress_tol > 0.0, "slack and tol must be non-negative");
}

template <class T>
T get(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("schema error: wrong type for '" + key + "'");
  }
}

std::vector<double> eps_list(const RunConfig& c) {
  if (!c.eps.empty()) return c.eps;
  return c.sweep_eps ? kSweepEps : std::vector<double>{1.5};
}

std::string eps_tag(double e) {
  std::ostringstream s;
  s << "eps" << e;
  return s.str();
}

DelayConfig delay_config(const RunConfig& c) {
  DelayConfig dc;
  dc.uniform = {c.h, c.d};
  dc.collapse_homogeneous = c.collapse;
  for (const auto& e : c.edge_delays) dc.per_edge[{e.target - 1, e.source - 1}] = e.bound;
  return dc;
}

SynthesisOptions synthesis_options(const RunConfig& c, double eps) {
  SynthesisOptions o;
  o.epsilon = eps;
  o.margin = c.margin;
  o.tie_edges = c.tie_edges;
  o.solver = c.solver;
  if (c.minimize_gain) o.minimize_gain = GainWeights{c.alpha1, c.alpha2};
  return o;
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

json margins_json(const Certificate& cert) {
  json blocks = json::array();
  for (const auto& m : cert.margins) blocks.push_back({{"block", m.name}, {"margin", m.margin}});
  return {{"format_version", 1},      {"kind", "pdgd-margins"},       {"required", cert.margin},
          {"min_margin", cert.min_margin}, {"solver_status", to_string(cert.solver_status)},
          {"iterations", cert.iterations}, {"blocks", blocks}};
}

std::shared_ptr<const Problem> load_shared(const std::filesystem::path& p) {
  return std::make_shared<const Problem>(load_problem(p));
}

double max_deviation(const Trajectory& tr) {
  double m = 0.0;
  for (const auto& s : tr.state) m = std::max(m, (s - tr.state.front()).cwiseAbs().maxCoeff());
  return m;
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

class TeeBuf : public std::streambuf {
 public:
  TeeBuf(std::streambuf* a, std::streambuf* b) : a_(a), b_(b) {}

 protected:
  int overflow(int ch) override {
    if (ch == traits_type::eof()) return traits_type::not_eof(ch);
    const bool ok = a_->sputc(static_cast<char>(ch)) != traits_type::eof() &&
                    b_->sputc(static_cast<char>(ch)) != traits_type::eof();
    return ok ? ch : traits_type::eof();
  }
  int sync() override { return (a_->pubsync() == 0 && b_->pubsync() == 0) ? 0 : -1; }

 private:
  std::streambuf* a_;
  std::streambuf* b_;
};

}  // namespace

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("schema error: config must be a JSON object");
  RunConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "command") c.command = get<std::string>(v, key);
    else if (key == "problem") c.problem = get<std::string>(v, key);
    else if (key == "out_dir") c.out_dir = get<std::string>(v, key);
    else if (key == "eps") c.eps = v.is_array() ? get<std::vector<double>>(v, key) : std::vector<double>{get<double>(v, key)};
    else if (key == "sweep_eps") c.sweep_eps = get<bool>(v, key);
    else if (key == "h") c.h = get<double>(v, key);
    else if (key == "d") c.d = get<double>(v, key);
    else if (key == "edge_delays") {
      if (!v.is_array()) throw ConfigError("schema error: edge_delays must be an array");
      for (std::size_t i = 0; i < v.size(); ++i) {
        const json& e = v[i];
        const std::string path = "edge_delays[" + std::to_string(i) + "]";
        if (!e.is_object()) throw ConfigError("schema error: " + path + " must be an object");
        for (const auto& [k, _] : e.items())
          if (k != "target" && k != "source" && k != "h" && k != "d")
            throw ConfigError("schema error: unknown key '" + path + "." + k + "'");
        if (!e.contains("target") || !e.contains("source") || !e.contains("h"))
          throw ConfigError("schema error: " + path + " needs target, source and h");
        EdgeDelay ed;
        ed.target = get<int>(e["target"], path + ".target");
        ed.source = get<int>(e["source"], path + ".source");
        ed.bound.h = get<double>(e["h"], path + ".h");
        ed.bound.d = e.contains("d") ? get<double>(e["d"], path + ".d") : 0.0;
        c.edge_delays.push_back(ed);
      }
    }
    else if (key == "collapse") c.collapse = get<bool>(v, key);
    else if (key == "tie_edges") c.tie_edges = get<bool>(v, key);
    else if (key == "minimize_gain") c.minimize_gain = get<bool>(v, key);
    else if (key == "alpha1") c.alpha1 = get<double>(v, key);
    else if (key == "alpha2") c.alpha2 = get<double>(v, key);
    else if (key == "margin") c.margin = get<double>(v, key);
    else if (key == "gap_tol") c.solver.gap_tol = get<double>(v, key);
    else if (key == "feas_tol") c.solver.feas_tol = get<double>(v, key);
    else if (key == "max_iter") c.solver.max_iter = get<int>(v, key);
    else if (key == "early_exit") c.solver.early_exit = get<bool>(v, key);
    else if (key == "h_lo") c.h_lo = get<double>(v, key);
    else if (key == "h_hi") c.h_hi = get<double>(v, key);
    else if (key == "tol") c.tol = get<double>(v, key);
    else if (key == "dynamics") c.dynamics = get<std::string>(v, key);
    else if (key == "cert") c.cert = get<std::string>(v, key);
    else if (key == "delays") c.delays = v.is_array() ? get<std::vector<std::string>>(v, key) : std::vector<std::string>{get<std::string>(v, key)};
    else if (key == "T") c.T = get<double>(v, key);
    else if (key == "dt") c.dt = get<double>(v, key);
    else if (key == "record_stride") c.record_stride = get<int>(v, key);
    else if (key == "seed") c.seed = get<std::uint64_t>(v, key);
    else if (key == "spread") c.spread = get<double>(v, key);
    else if (key == "phi_samples") c.phi_samples = get<int>(v, key);
    else if (key == "lkf_T") c.lkf_T = get<double>(v, key);
    else if (key == "lkf_slack") c.lkf_slack = get<double>(v, key);
    else if (key == "stress_runs") c.stress_runs = get<int>(v, key);
    else if (key == "stress_T") c.stress_T = get<double>(v, key);
    else if (key == "stress_tol") c.stress_tol = get<double>(v, key);
    else throw ConfigError("schema error: unknown key '" + key + "'");
  }
  validate(c);
  return c;
}

json run_config_to_json(const RunConfig& c) {
  json edges = json::array();
  for (const auto& e : c.edge_delays)
    edges.push_back({{"target", e.target}, {"source", e.source}, {"h", e.bound.h}, {"d", e.bound.d}});
  return {{"command", c.command},
          {"problem", c.problem.string()},
          {"out_dir", c.out_dir.string()},
          {"eps", c.eps},
          {"sweep_eps", c.sweep_eps},
          {"h", c.h},
          {"d", c.d},
          {"edge_delays", edges},
          {"collapse", c.collapse},
          {"tie_edges", c.tie_edges},
          {"minimize_gain", c.minimize_gain},
          {"alpha1", c.alpha1},
          {"alpha2", c.alpha2},
          {"margin", c.margin},
          {"gap_tol", c.solver.gap_tol},
          {"feas_tol", c.solver.feas_tol},
          {"max_iter", c.solver.max_iter},
          {"early_exit", c.solver.early_exit},
          {"h_lo", c.h_lo},
          {"h_hi", c.h_hi},
          {"tol", c.tol},
          {"dynamics", c.dynamics},
          {"cert", c.cert.string()},
          {"delays", c.delays},
          {"T", c.T},
          {"dt", c.dt},
          {"record_stride", c.record_stride},
          {"seed", c.seed},
          {"spread", c.spread},
          {"phi_samples", c.phi_samples},
          {"lkf_T", c.lkf_T},
          {"lkf_slack", c.lkf_slack},
          {"stress_runs", c.stress_runs},
          {"stress_T", c.stress_T},
          {"stress_tol", c.stress_tol}};
}

void resolve_paths(RunConfig& c) {
  auto fix = [](std::filesystem::path& p) {
    if (!p.empty()) p = std::filesystem::weakly_canonical(std::filesystem::absolute(p));
  };
  fix(c.problem);
  fix(c.out_dir);
  fix(c.cert);
}

bool VerifyReport::passed() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const VerifyCheck& k) { return k.passed; });
}

std::vector<DelaySignal> certificate_delays(const Certificate& cert) {
  std::vector<DelaySignal> out;
  for (const auto& e : cert.edges) out.push_back(DelaySignal::sinusoid(e.bound.h, std::min(e.bound.d, 1.0)));
  return out;
}

VerifyReport verify_certificate(const Problem& problem, const Certificate& cert, const VerifyOptions& o) {
  VerifyReport rep;
  auto add = [&](std::string name, bool ok, std::string detail) {
    rep.checks.push_back({std::move(name), ok, std::move(detail)});
  };

  const std::string hash = problem_hash(problem);
  const bool same = hash == cert.problem_hash;
  add("provenance", same, same ? "problem hash " + hash : "certificate hash " + cert.problem_hash + " != problem hash " + hash);
  if (!same) return rep;

  auto shared = std::make_shared<const Problem>(problem);
  const ErrorSystem sys = certificate_system(shared, cert);
  const StateLayout& layout = sys.layout();

  const double gerr = gain_recovery_error(layout, cert);
  add("gain_recovery", gerr <= 1e-9, "max |P2'K - X| = " + fmt(gerr));

  const auto rechecked = recheck_margins(sys, cert);
  double worst = std::numeric_limits<double>::infinity(), drift = 0.0;
  for (std::size_t b = 0; b < rechecked.size(); ++b) {
    worst = std::min(worst, rechecked[b].margin);
    if (b < cert.margins.size()) drift = std::max(drift, std::abs(rechecked[b].margin - cert.margins[b].margin));
  }
  const bool margins_ok = rechecked.size() == cert.margins.size() && worst >= cert.margin && drift <= 1e-9;
  add("margins", margins_ok, "min margin " + fmt(worst) + ", drift " + fmt(drift) + ", required " + fmt(cert.margin));

  std::mt19937_64 rng(o.seed);
  double phi_max = -std::numeric_limits<double>::infinity();
  const Vector x_star = shared->agents() > 0 ? sys.equilibrium().x : Vector();
  for (int s = 0; s < o.phi_samples; ++s) {
    Vector x(x_star.size());
    for (int i = 0; i < problem.agents(); ++i) {
      const auto& box = problem.costs[i].box();
      for (int k = 0; k < problem.primal_dims[i]; ++k) {
        std::uniform_real_distribution<double> u(box[k].lo, box[k].hi);
        x[problem.primal_offset(i) + k] = u(rng);
      }
    }
    const Matrix phi = cert.vertex_scale * evaluate_phi_at(sys, cert.vars, cert.epsilon, x);
    phi_max = std::max(phi_max, max_eigenvalue(phi));
  }
  if (o.phi_samples > 0)
    add("phi_spot_checks", phi_max < -0.5 * cert.margin,
        std::to_string(o.phi_samples) + " states, max eigenvalue " + fmt(phi_max));

  const ErrorSystem closed = sys.with_gain(cert.gain);
  const auto delays = certificate_delays(cert);
  const bool have_edges = closed.rho() > 0;

  {
    SimulationOptions so;
    so.dynamics = Dynamics::Augmented;
    so.T = 10.0;
    so.dt = o.dt;
    so.record_stride = 100;
    if (have_edges) so.delays = delays;
    const Vector zb = closed.equilibrium_state();
    Vector s0(2 * zb.size());
    s0 << zb, zb;
    const Trajectory tr = integrate(closed, s0, so);
    const double dev = tr.diverged ? std::numeric_limits<double>::infinity() : max_deviation(tr);
    add("equilibrium", dev <= 1e-10, "max deviation over 10 s " + fmt(dev));
  }

  {
    SimulationOptions so;
    so.dynamics = Dynamics::Augmented;
    so.T = o.lkf_T;
    so.dt = o.dt;
    if (have_edges) so.delays = delays;
    const Trajectory tr = integrate(closed, random_initial_state(closed, true, o.seed, o.spread), so);
    std::vector<DelayBound> bounds;
    for (const auto& e : cert.edges) bounds.push_back(e.bound);
    if (tr.diverged) {
      add("lkf_decrease", false, "trajectory diverged at t = " + fmt(tr.diverged_at));
    } else {
      const LkfSeries lkf = evaluate_lkf(tr, cert.vars, bounds);
      const double inc = max_lkf_increase(lkf);
      const double slack = o.lkf_slack * lkf.V.front();
      add("lkf_decrease", inc <= slack && lkf.V.front() >= 0.0,
          "V(t0) = " + fmt(lkf.V.front()) + ", max step increase " + fmt(inc) + ", slack " + fmt(slack));
    }
  }

  if (o.stress_runs > 0) {
    bool fast = have_edges;
    for (const auto& e : cert.edges) fast = fast && e.bound.d >= 1.0;
    std::vector<std::vector<DelaySignal>> realizations{delays};
    if (fast) {
      std::vector<DelaySignal> saw;
      for (const auto& e : cert.edges) saw.push_back(DelaySignal::sawtooth(e.bound.h, 1.0));
      realizations.push_back(saw);
    }
    int converged = 0, total = 0;
    double worst_ratio = 0.0;
    for (const auto& real : realizations)
      for (int s = 0; s < o.stress_runs; ++s) {
        SimulationOptions so;
        so.dynamics = Dynamics::Augmented;
        so.T = o.stress_T;
        so.dt = o.dt;
        so.record_stride = 100;
        if (have_edges) so.delays = real;
        const auto seed = o.seed + 1 + static_cast<std::uint64_t>(s);
        const Trajectory tr = integrate(closed, random_initial_state(closed, true, seed, o.spread), so);
        const StabilityReport sr = classify_stability(tr, 0.2, o.stress_tol);
        ++total;
        if (sr.verdict == Stability::Converged) ++converged;
        worst_ratio = std::max(worst_ratio, sr.initial_error > 0.0 ? sr.tail_max / sr.initial_error : 0.0);
      }
    add("stress", converged == total,
        std::to_string(converged) + "/" + std::to_string(total) + " converged, worst tail ratio " + fmt(worst_ratio));
  }
  return rep;
}

json verify_report_to_json(const VerifyReport& r) {
  json checks = json::array();
  for (const auto& k : r.checks) checks.push_back({{"name", k.name}, {"passed", k.passed}, {"detail", k.detail}});
  return {{"format_version", 1}, {"kind", "pdgd-verify"}, {"passed", r.passed()}, {"checks", checks}};
}

int cmd_synthesize(const RunConfig& c, std::ostream& log) {
  const auto eps = eps_list(c);
  if (eps.size() != 1) throw ConfigError("schema error: synthesize takes exactly one eps");
  const ErrorSystem sys = build_error_system(load_shared(c.problem), delay_config(c));
  log << "synthesize: " << sys.rho() << " delayed edge(s), max h = " << sys.max_delay() << ", eps = " << eps[0]
      << "\n";
  const SynthesisResult r = try_synthesize(sys, synthesis_options(c, eps[0]));
  if (!r.feasible) {
    std::ostringstream hint;
    hint << "no certificate at h = " << sys.max_delay() << "; bisect with: pdgd madub " << c.problem.string()
         << " --eps " << eps[0] << " --d " << c.d << " --h-hi " << sys.max_delay();
    write_json(c.out_dir / "infeasible.json",
               {{"format_version", 1},
                {"kind", "pdgd-infeasible"},
                {"status", "Infeasible"},
                {"solver_status", to_string(r.solution.status)},
                {"h", sys.max_delay()},
                {"epsilon", eps[0]},
                {"best_margin", r.solution.min_margin},
                {"required_margin", c.margin},
                {"hint", hint.str()}});
    log << "Infeasible (" << to_string(r.solution.status) << ", best margin " << r.solution.min_margin << ")\n"
        << hint.str() << "\n";
    return kExitNegative;
  }
  const Certificate& cert = *r.certificate;
  save_certificate(c.out_dir / "certificate.json", cert);
  write_json(c.out_dir / "margins.json", margins_json(cert));
  log << "Feasible: min margin " << cert.min_margin << ", gain norm " << cert.gain.assembled().operatorNorm()
      << (cert.gain_minimized ? " (gain minimized)" : "") << "\n"
      << "certificate: " << (c.out_dir / "certificate.json").string() << "\n";
  return kExitOk;
}

int cmd_madub(const RunConfig& c, std::ostream& log) {
  const ErrorSystem sys = build_error_system(load_shared(c.problem), delay_config(c));
  json rows = json::array();
  json best = nullptr;
  bool negative = false;
  std::ofstream table(c.out_dir / "table.csv");
  if (!table) throw std::runtime_error("cannot write table.csv");
  table << "epsilon,h_bar\n" << std::setprecision(17);
  for (double e : eps_list(c)) {
    const std::string tag = eps_tag(e);
    MadubOptions mo;
    mo.d = c.d;
    mo.h_lo = c.h_lo;
    mo.h_hi = c.h_hi;
    mo.tol = c.tol;
    mo.synthesis = synthesis_options(c, e);
    log << "madub " << tag << ": bracket [" << c.h_lo << ", " << c.h_hi << "], d = " << c.d << ", tol = " << c.tol
        << "\n";
    try {
      const MadubResult r = madub(sys, mo);
      for (const auto& s : r.trace)
        log << "  h = " << fmt(s.h) << "  " << to_string(s.status) << "  margin " << fmt(s.margin) << "\n";
      write_json(c.out_dir / ("madub_" + tag + ".json"), madub_to_json(r));
      write_trace_csv(c.out_dir / ("trace_" + tag + ".csv"), r);
      std::string cert_file;
      if (r.certificate) {
        cert_file = "certificate_" + tag + ".json";
        save_certificate(c.out_dir / cert_file, *r.certificate);
      }
      if (!r.trace_monotone()) log << "  WARNING: bisection trace is not monotone\n";
      log << "  h_bar = " << r.h_bar << "\n";
      rows.push_back({{"epsilon", e}, {"h_bar", r.h_bar}, {"trace_monotone", r.trace_monotone()},
                      {"certificate", cert_file}});
      table << e << "," << r.h_bar << "\n";
      if (best.is_null() || r.h_bar > best["h_bar"].get<double>()) best = {{"epsilon", e}, {"h_bar", r.h_bar}};
    } catch (const NotBracketed& nb) {
      negative = true;
      log << "  NotBracketed: " << nb.what() << "; suggested bracket [" << nb.suggested_lo << ", "
          << nb.suggested_hi << "]\n";
      rows.push_back({{"epsilon", e},
                      {"h_bar", nullptr},
                      {"error", "NotBracketed"},
                      {"detail", nb.what()},
                      {"suggested_h_lo", nb.suggested_lo},
                      {"suggested_h_hi", nb.suggested_hi}});
    }
  }
  write_json(c.out_dir / "madub.json", {{"format_version", 1},
                                        {"kind", "pdgd-madub-sweep"},
                                        {"d", c.d},
                                        {"tol", c.tol},
                                        {"rows", rows},
                                        {"best", best}});
  log << "epsilon  h_bar\n";
  for (const auto& r : rows)
    log << std::setw(7) << r["epsilon"].get<double>() << "  "
        << (r["h_bar"].is_null() ? std::string("-") : fmt(r["h_bar"].get<double>())) << "\n";
  return negative ? kExitNegative : kExitOk;
}

int cmd_simulate(const RunConfig& c, std::ostream& log) {
  const bool aug = c.dynamics == "augmented";
  if (aug && c.cert.empty()) throw ConfigError("gain required: augmented dynamics need --cert");
  auto problem = load_shared(c.problem);
  std::vector<DelaySignal> delays;
  for (const auto& s : c.delays) delays.push_back(parse_delay(s));
  if (delays.empty()) delays.push_back(DelaySignal::constant(0.0));
  double hmax = 0.0;
  for (const auto& s : delays) hmax = std::max(hmax, s.bound());

  std::optional<Certificate> cert;
  ErrorSystem sys = [&] {
    if (!aug) {
      DelayConfig dc;
      dc.uniform = {hmax, 1.0};
      dc.collapse_homogeneous = c.collapse;
      return build_error_system(problem, dc);
    }
    cert = load_certificate(c.cert);
    if (cert->problem_hash != problem_hash(*problem))
      throw std::runtime_error("certificate was issued for a different problem (hash " + cert->problem_hash + ")");
    return certificate_system(problem, *cert).with_gain(cert->gain);
  }();
  if (delays.size() != 1 && static_cast<int>(delays.size()) != sys.rho())
    throw ConfigError("schema error: give one delay or one per edge (" + std::to_string(sys.rho()) + ")");

  SimulationOptions so;
  so.dynamics = aug ? Dynamics::Augmented : Dynamics::Standard;
  so.T = c.T;
  so.dt = c.dt;
  so.record_stride = c.record_stride;
  so.delays = delays;
  log << "simulate: " << c.dynamics << ", T = " << c.T << ", dt = " << c.dt << ", delays";
  for (const auto& d : delays) log << " " << d.describe();
  log << "\n";
  const Trajectory tr = integrate(sys, random_initial_state(sys, aug, c.seed, c.spread), so);
  const StabilityReport rep = classify_stability(tr);

  std::optional<LkfSeries> lkf;
  if (aug && !tr.diverged) {
    std::vector<DelayBound> bounds;
    for (const auto& e : cert->edges) bounds.push_back(e.bound);
    try {
      lkf = evaluate_lkf(tr, cert->vars, bounds);
    } catch (const Unsupported& u) {
      log << "LKF skipped: " << u.what() << "\n";
    }
  }
  write_trajectory_csv(c.out_dir / "trajectory.csv", tr, lkf ? &*lkf : nullptr);
  json summary = summary_json(tr, rep);
  summary["seed"] = c.seed;
  json dj = json::array();
  for (const auto& d : delays) dj.push_back(d.describe());
  summary["delays"] = dj;
  if (lkf) {
    summary["lkf_initial"] = lkf->V.front();
    summary["lkf_max_increase"] = max_lkf_increase(*lkf);
  }
  write_json(c.out_dir / "summary.json", summary);
  log << to_string(rep.verdict) << ": ||z~(0)|| = " << rep.initial_error << ", tail max " << rep.tail_max << "\n";
  return kExitOk;
}

int cmd_verify(const RunConfig& c, std::ostream& log) {
  if (c.cert.empty()) throw ConfigError("schema error: verify needs --cert");
  const Problem problem = load_problem(c.problem);
  const Certificate cert = load_certificate(c.cert);
  VerifyOptions vo;
  vo.phi_samples = c.phi_samples;
  vo.seed = c.seed;
  vo.dt = c.dt;
  vo.lkf_T = c.lkf_T;
  vo.lkf_slack = c.lkf_slack;
  vo.stress_runs = c.stress_runs;
  vo.stress_T = c.stress_T;
  vo.stress_tol = c.stress_tol;
  vo.spread = c.spread;
  const VerifyReport rep = verify_certificate(problem, cert, vo);
  write_json(c.out_dir / "verify.json", verify_report_to_json(rep));
  for (const auto& k : rep.checks) log << (k.passed ? "PASS " : "FAIL ") << k.name << ": " << k.detail << "\n";
  log << (rep.passed() ? "certificate verified" : "verification failed") << "\n";
  return rep.passed() ? kExitOk : kExitNegative;
}

int cmd_dump(const RunConfig& c, std::ostream& log) {
  const ErrorSystem sys = build_error_system(load_shared(c.problem), delay_config(c));
  const auto dir = c.out_dir / "structure";
  std::filesystem::create_directories(dir);
  dump_structure_csv(sys, dir);
  const KktPoint& k = sys.equilibrium();
  json edges = json::array();
  for (const auto& e : sys.edges()) {
    json members = json::array();
    for (const auto& [t, s] : e.members) members.push_back({t + 1, s + 1});
    edges.push_back({{"members", members}, {"h", e.bound.h}, {"d", e.bound.d}});
  }
  write_json(c.out_dir / "dump.json", {{"format_version", 1},
                                       {"kind", "pdgd-dump"},
                                       {"problem_hash", problem_hash(sys.problem())},
                                       {"x_star", vector_to_json(k.x)},
                                       {"lambda_star", vector_to_json(k.lambda)},
                                       {"stationarity_residual", k.stationarity_residual},
                                       {"feasibility_residual", k.feasibility_residual},
                                       {"vertex_count", sys.vertex_count()},
                                       {"edges", edges}});
  log << "dump: r = " << sys.layout().size() << ", " << sys.vertex_count() << " vertices, " << sys.rho()
      << " edge(s), KKT residual " << k.stationarity_residual << "\n";
  return kExitOk;
}

int cmd_export_sdp(const RunConfig& c, std::ostream& log) {
  const auto eps = eps_list(c);
  if (eps.size() != 1) throw ConfigError("schema error: export-sdp takes exactly one eps");
  const ErrorSystem sys = build_error_system(load_shared(c.problem), delay_config(c));
  LmiOptions lo;
  lo.epsilon = eps[0];
  lo.margin = c.margin;
  lo.tie_edges = c.tie_edges;
  LmiProgram prog = assemble_delay_lmi(sys, lo);
  if (c.minimize_gain) prog = assemble_gain_objective(std::move(prog), sys, c.alpha1, c.alpha2);
  std::ofstream out(c.out_dir / "lmi.sdp");
  if (!out) throw std::runtime_error("cannot write lmi.sdp");
  write_sparse(out, prog.sdp);
  log << "export-sdp: " << prog.sdp.num_vars << " variables, " << prog.sdp.blocks.size() << " blocks\n";
  return kExitOk;
}

int run_command(RunConfig c, std::ostream& console) {
  try {
    validate(c);
    resolve_paths(c);
    std::filesystem::create_directories(c.out_dir);
  } catch (const ConfigError& e) {
    console << e.what() << "\n";
    return kExitFault;
  } catch (const std::exception& e) {
    console << "error: " << e.what() << "\n";
    return kExitFault;
  }
  std::ofstream file(c.out_dir / "run.log");
  TeeBuf tee(file.rdbuf(), console.rdbuf());
  std::ostream log(&tee);
  log << std::setprecision(10);
  try {
    write_json(c.out_dir / "config.json", run_config_to_json(c));
    if (c.command == "synthesize") return cmd_synthesize(c, log);
    if (c.command == "madub") return cmd_madub(c, log);
    if (c.command == "simulate") return cmd_simulate(c, log);
    if (c.command == "verify") return cmd_verify(c, log);
    if (c.command == "dump") return cmd_dump(c, log);
    return cmd_export_sdp(c, log);
  } catch (const ConfigError& e) {
    log << e.what() << "\n";
  } catch (const SchemaError& e) {
    log << "schema error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
  }
  return kExitFault;
}

}  // namespace pdgd
