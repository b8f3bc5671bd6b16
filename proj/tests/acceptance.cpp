// Acceptance run on examples/paper10.json: one PASS/FAIL line per criterion.
#include "pdgd/cli.hpp"
#include "pdgd/problem_io.hpp"
#include "pdgd/sdp.hpp"
#include "pdgd/simulate.hpp"
#include "pdgd/synthesis.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

using namespace pdgd;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const double kReferenceHbar[] = {0.712, 0.915, 1.017};  // eps = 0.5, 1, 1.5
const double kStandardBound = 0.372;

struct Line {
  int id;
  bool pass;
  std::string detail;
};

std::vector<Line> lines;

void report(int id, bool pass, const std::string& detail) {
  lines.push_back({id, pass, detail});
  std::cout << "criterion " << std::setw(2) << id << " " << (pass ? "PASS" : "FAIL") << "  " << detail << std::endl;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string num(double v, int prec = 6) {
  std::ostringstream s;
  s << std::setprecision(prec) << v;
  return s.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_json(const fs::path& p, const json& j) { std::ofstream(p) << j.dump(2) << "\n"; }

std::shared_ptr<const Problem> problem() {
  static const auto p =
      std::make_shared<const Problem>(load_problem(PDGD_SOURCE_DIR "/examples/paper10.json"));
  return p;
}

// 1. undelayed standard flow against the Newton KKT point
json criterion1(const fs::path& dir) {
  const auto t0 = std::chrono::steady_clock::now();
  DelayConfig dc;
  const ErrorSystem sys = build_error_system(problem(), dc);
  SimulationOptions o;
  o.T = 200.0;
  o.dt = 1e-3;
  o.record_stride = 1000;
  o.delays = {DelaySignal::constant(0.0)};
  const Trajectory tr = integrate(sys, random_initial_state(sys, false, 1), o);
  const auto [x, lambda] = sys.layout().unpack(tr.state.back());
  const double dx = (x - sys.equilibrium().x).lpNorm<Eigen::Infinity>();
  json j = {{"dx_inf", dx}, {"diverged", tr.diverged}, {"final_state", vector_to_json(tr.state.back())}};
  write_json(dir / "criterion1.json", j);
  const double secs = seconds_since(t0);
  return {{"dx", dx}, {"secs", secs}, {"pass", !tr.diverged && dx <= 1e-6 && secs <= 60.0}};
}

// 3. SDP oracle suite
json criterion3(const fs::path& dir) {
  const auto t0 = std::chrono::steady_clock::now();
  SdpOptions exact;
  exact.early_exit = false;
  auto lyap = [](const Matrix& a, Eigen::MatrixXi& idx) {
    BlockSdp sdp;
    const int n = static_cast<int>(a.rows());
    idx.resize(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) idx(i, j) = idx(j, i) = sdp.add_variable("p");
    const AffineMatrix p = AffineMatrix::from_indices(idx);
    sdp.blocks.push_back(SdpBlock::from_affine("P", p));
    sdp.blocks.push_back(SdpBlock::from_affine("L", -1.0 * (a.transpose() * p + p * a)));
    sdp.normalize_scales();
    return sdp;
  };
  auto unpack = [](const Eigen::MatrixXi& idx, const Vector& y) {
    Matrix m(idx.rows(), idx.cols());
    for (int i = 0; i < idx.rows(); ++i)
      for (int j = 0; j < idx.cols(); ++j) m(i, j) = y[idx(i, j)];
    return m;
  };
  auto emin = [](const Matrix& m) { return Eigen::SelfAdjointEigenSolver<Matrix>(m).eigenvalues().minCoeff(); };

  Eigen::MatrixXi idx;
  const Matrix stable_a = -Matrix::Identity(2, 2);
  const SdpSolution st = solve(lyap(stable_a, idx), exact);
  const Matrix p = unpack(idx, st.y);
  const bool stable_ok = st.status == SdpStatus::Feasible && emin(p) >= 1e-6 &&
                         emin(-(stable_a.transpose() * p + p * stable_a)) >= 1e-6;
  const SdpSolution an = solve(lyap(Matrix::Identity(2, 2), idx), exact);
  const bool anti_ok = an.status == SdpStatus::Infeasible && std::abs(an.slack) <= 1e-6;

  BlockSdp lm;
  lm.margin = 0.0;
  const int t = lm.add_variable("t");
  AffineMatrix f = AffineMatrix::constant(-Matrix(Eigen::Vector2d(1, 3).asDiagonal()));
  f(0, 0) += LinExpr::variable(t);
  f(1, 1) += LinExpr::variable(t);
  lm.blocks.push_back(SdpBlock::from_affine("F", f));
  lm.objective = Vector::Ones(1);
  const SdpSolution ls = solve(lm);
  const bool lmax_ok = ls.status == SdpStatus::Optimal && std::abs(ls.objective - 3.0) <= 1e-6;

  std::mt19937_64 rng(2024);
  std::normal_distribution<double> g(0.0, 1.0);
  int certified = 0;
  json margins = json::array();
  for (int inst = 0; inst < 20; ++inst) {
    const int n = 1 + inst % 10;
    Matrix a(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = g(rng);
    a -= (Eigen::EigenSolver<Matrix>(a).eigenvalues().real().maxCoeff() + 0.5) * Matrix::Identity(n, n);
    const BlockSdp sdp = lyap(a, idx);
    const SdpSolution s = solve(sdp);
    const Matrix pp = unpack(idx, s.y);
    const double m = std::min(emin(pp) * sdp.blocks[0].scale,
                              emin(-(a.transpose() * pp + pp * a)) * sdp.blocks[1].scale);
    margins.push_back(m);
    if (s.status == SdpStatus::Feasible && m >= sdp.margin) ++certified;
  }
  write_json(dir / "criterion3.json", {{"stable_status", to_string(st.status)},
                                       {"anti_stable_status", to_string(an.status)},
                                       {"anti_stable_slack_ok", std::abs(an.slack) <= 1e-6},
                                       {"lambda_max_status", to_string(ls.status)},
                                       {"lambda_max_ok", lmax_ok},
                                       {"random_certified", certified}});
  const double secs = seconds_since(t0);
  return {{"stable", stable_ok}, {"anti", anti_ok}, {"lmax", lmax_ok},     {"lmax_value", ls.objective},
          {"certified", certified}, {"secs", secs},
          {"pass", stable_ok && anti_ok && lmax_ok && certified == 20 && secs <= 60.0}};
}

struct SweepRow {
  double eps = 0.0;
  double h_bar = 0.0;
  bool monotone = false;
  fs::path cert_file;
  std::optional<Certificate> cert;
  json trace;
};

std::vector<SweepRow> run_sweep(const fs::path& out, const std::vector<double>& eps, int& exit_code, double& secs) {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig c = run_config_from_json({{"command", "madub"},
                                      {"problem", PDGD_SOURCE_DIR "/examples/paper10.json"},
                                      {"out_dir", out.string()},
                                      {"sweep_eps", true},
                                      {"eps", eps},
                                      {"d", 0.1},
                                      {"h_lo", 0.0},
                                      {"h_hi", 2.0},
                                      {"tol", 1e-3},
                                      {"minimize_gain", true}});
  std::ostringstream log;
  exit_code = run_command(c, log);
  secs = seconds_since(t0);
  std::vector<SweepRow> rows;
  const json summary = json::parse(slurp(out / "madub.json"));
  for (const auto& r : summary["rows"]) {
    SweepRow row;
    row.eps = r["epsilon"].get<double>();
    if (r["h_bar"].is_null()) {
      rows.push_back(row);
      continue;
    }
    row.h_bar = r["h_bar"].get<double>();
    row.monotone = r["trace_monotone"].get<bool>();
    std::ostringstream tag;
    tag << "eps" << row.eps;
    row.trace = json::parse(slurp(out / ("madub_" + tag.str() + ".json")))["trace"];
    if (!r["certificate"].get<std::string>().empty()) {
      row.cert_file = out / r["certificate"].get<std::string>();
      row.cert = load_certificate(row.cert_file);
    }
    rows.push_back(row);
  }
  return rows;
}

ErrorSystem closed_loop(const Certificate& c) { return certificate_system(problem(), c).with_gain(c.gain); }

// 2. equilibrium preservation
json criterion2(const std::vector<SweepRow>& rows, const fs::path& dir) {
  double worst = 0.0;
  int n = 0;
  for (const auto& r : rows) {
    if (!r.cert) continue;
    const ErrorSystem sys = closed_loop(*r.cert);
    SimulationOptions o;
    o.dynamics = Dynamics::Augmented;
    o.T = 10.0;
    o.delays = certificate_delays(*r.cert);
    const Vector zb = sys.equilibrium_state();
    Vector s0(2 * zb.size());
    s0 << zb, zb;
    const Trajectory tr = integrate(sys, s0, o);
    for (const auto& s : tr.state) worst = std::max(worst, (s - s0).lpNorm<Eigen::Infinity>());
    ++n;
  }
  write_json(dir / "criterion2.json", {{"certificates", n}, {"max_deviation", worst}});
  return {{"worst", worst}, {"n", n}, {"pass", n > 0 && worst <= 1e-10}};
}

// 6. Phi(x) < 0 at random states in the declared box
json criterion6(const std::vector<SweepRow>& rows, const fs::path& dir) {
  double worst = -1e300;
  bool pass = true;
  int n = 0;
  json per = json::array();
  for (const auto& r : rows) {
    if (!r.cert) {
      pass = false;
      continue;
    }
    const ErrorSystem sys = certificate_system(problem(), *r.cert);
    std::mt19937_64 rng(600 + n);
    double cert_worst = -1e300;
    for (int s = 0; s < 50; ++s) {
      Vector x(problem()->primal_size());
      for (int i = 0; i < problem()->agents(); ++i)
        for (int k = 0; k < problem()->primal_dims[i]; ++k) {
          const Interval iv = problem()->costs[i].box()[k];
          x[problem()->primal_offset(i) + k] = std::uniform_real_distribution<double>(iv.lo, iv.hi)(rng);
        }
      const Matrix phi = r.cert->vertex_scale * evaluate_phi_at(sys, r.cert->vars, r.cert->epsilon, x);
      const double lmax = Eigen::SelfAdjointEigenSolver<Matrix>(phi).eigenvalues().maxCoeff();
      cert_worst = std::max(cert_worst, lmax);
    }
    pass = pass && cert_worst < -0.5 * r.cert->margin;
    worst = std::max(worst, cert_worst);
    per.push_back({{"epsilon", r.eps}, {"max_eigenvalue", cert_worst}});
    ++n;
  }
  write_json(dir / "criterion6.json", per);
  return {{"worst", worst}, {"n", n}, {"pass", pass && n == 3}};
}

// 7. LKF non-increasing after the history horizon
json criterion7(const std::vector<SweepRow>& rows, const fs::path& dir) {
  bool pass = true;
  json per = json::array();
  double worst_rel = -1e300;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k];
    if (!r.cert) {
      pass = false;
      continue;
    }
    const ErrorSystem sys = closed_loop(*r.cert);
    SimulationOptions o;
    o.dynamics = Dynamics::Augmented;
    o.T = 100.0;
    o.delays = {DelaySignal::sinusoid(r.h_bar, 0.1)};
    const Trajectory tr = integrate(sys, random_initial_state(sys, true, 700 + k), o);
    if (tr.diverged) {
      pass = false;
      per.push_back({{"epsilon", r.eps}, {"diverged", true}});
      continue;
    }
    const LkfSeries l = evaluate_lkf(tr, r.cert->vars, {DelayBound{r.h_bar, 0.1}});
    const double inc = max_lkf_increase(l);
    const double rel = inc / l.V.front();
    worst_rel = std::max(worst_rel, rel);
    pass = pass && inc <= 1e-3 * l.V.front();
    per.push_back({{"epsilon", r.eps}, {"V0", l.V.front()}, {"V_end", l.V.back()}, {"max_increase", inc}});
  }
  write_json(dir / "criterion7.json", per);
  return {{"worst_rel", worst_rel}, {"pass", pass && rows.size() == 3}};
}

// 8. 20 seeded initial conditions per certificate
json criterion8(const std::vector<SweepRow>& rows, const fs::path& dir, int runs) {
  int total = 0, converged = 0;
  double worst = 0.0;
  json per = json::array();
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k];
    if (!r.cert) continue;
    const ErrorSystem sys = closed_loop(*r.cert);
    std::vector<std::vector<DelaySignal>> signals{{DelaySignal::sinusoid(r.h_bar, 0.1)}};
    if (r.cert->edges.front().bound.d >= 1.0) signals.push_back({DelaySignal::sawtooth(r.h_bar, 1.0)});
    json finals = json::array();
    for (const auto& sig : signals)
      for (int s = 0; s < runs; ++s) {
        SimulationOptions o;
        o.dynamics = Dynamics::Augmented;
        o.T = 2000.0;
        o.record_stride = 100;
        o.delays = sig;
        const Trajectory tr = integrate(sys, random_initial_state(sys, true, 800 + 100 * k + s), o);
        const StabilityReport rep = classify_stability(tr, 0.2, 1e-4);
        ++total;
        if (rep.verdict == Stability::Converged) ++converged;
        worst = std::max(worst, rep.tail_max / rep.initial_error);
        finals.push_back(to_string(rep.verdict));
      }
    per.push_back({{"epsilon", r.eps}, {"verdicts", finals}});
  }
  write_json(dir / "criterion8.json", per);
  return {{"converged", converged}, {"total", total}, {"worst", worst},
          {"pass", total == 3 * runs && converged == total}};
}

bool same_files(const fs::path& a, const fs::path& b, const std::vector<std::string>& names, std::string& which) {
  for (const auto& n : names)
    if (!fs::exists(a / n) || slurp(a / n) != slurp(b / n)) {
      which = n;
      return false;
    }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::current_path() / "acceptance";
  const int stress_runs = 20;
  fs::remove_all(root);
  const fs::path run1 = root / "run1", run2 = root / "run2";
  fs::create_directories(run1);
  fs::create_directories(run2);

  const json c1 = criterion1(run1);
  report(1, c1["pass"], "||x_sim(200) - x*||_inf = " + num(c1["dx"].get<double>(), 3) + " (<= 1e-6), " +
                            num(c1["secs"].get<double>(), 3) + " s");

  // the sweep is needed by criterion 2, so it runs first
  int sweep_exit = 0;
  double sweep_secs = 0.0;
  const auto rows = run_sweep(run1 / "madub", {0.5, 1.0, 1.5}, sweep_exit, sweep_secs);

  const json c2 = criterion2(rows, run1);
  report(2, c2["pass"], "max deviation from (x*, lambda*, x*, lambda*) over 10 s = " +
                            num(c2["worst"].get<double>(), 3) + " for " + std::to_string(c2["n"].get<int>()) +
                            " gains");

  const json c3 = criterion3(run1);
  report(3, c3["pass"],
         std::string("stable ") + (c3["stable"].get<bool>() ? "ok" : "bad") + ", anti-stable " +
             (c3["anti"].get<bool>() ? "ok" : "bad") + ", lambda_max = " + num(c3["lmax_value"].get<double>(), 10) +
             ", random " + std::to_string(c3["certified"].get<int>()) + "/20, " +
             num(c3["secs"].get<double>(), 3) + " s");

  // 4. reference h_bar values
  bool c4 = sweep_exit == 0 && rows.size() == 3 && sweep_secs <= 1800.0;
  std::ostringstream d4;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const double target = kReferenceHbar[k];
    const bool ok = rows[k].cert && rows[k].h_bar >= 0.5 && std::abs(rows[k].h_bar - target) <= 0.3 * target;
    c4 = c4 && ok;
    d4 << "eps " << rows[k].eps << ": h_bar " << rows[k].h_bar << " (reference " << target << "); ";
  }
  int verified = 0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (!rows[k].cert) continue;
    RunConfig v = run_config_from_json({{"command", "verify"},
                                        {"problem", PDGD_SOURCE_DIR "/examples/paper10.json"},
                                        {"cert", rows[k].cert_file.string()},
                                        {"out_dir", (run1 / ("verify_" + std::to_string(k))).string()},
                                        {"seed", 400 + k}});
    std::ostringstream log;
    if (run_command(v, log) == kExitOk) ++verified;
  }
  c4 = c4 && verified == 3;
  d4 << "verified " << verified << "/3, sweep " << num(sweep_secs, 4) << " s";
  report(4, c4, d4.str());

  // 5. improvement over the standard flow's certified bound
  double best = 0.0;
  for (const auto& r : rows) best = std::max(best, r.h_bar);
  report(5, best >= 1.5 * kStandardBound,
         "best h_bar " + num(best) + " = " + num(best / kStandardBound, 4) + " x 0.372 s (needs >= 1.5)");

  const json c6 = criterion6(rows, run1);
  report(6, c6["pass"], "max lambda_max(Phi) over 3 x 50 states = " + num(c6["worst"].get<double>(), 4) +
                            " (< -margin/2 = -5e-07)");

  const json c7 = criterion7(rows, run1);
  report(7, c7["pass"], "max V step increase / V(t0) = " + num(c7["worst_rel"].get<double>(), 3) + " (<= 1e-3)");

  const json c8 = criterion8(rows, run1, stress_runs);
  report(8, c8["pass"], std::to_string(c8["converged"].get<int>()) + "/" + std::to_string(c8["total"].get<int>()) +
                            " Converged, worst tail ratio " + num(c8["worst"].get<double>(), 3) + " (<= 1e-4)");

  // 9. bisection integrity
  bool c9 = rows.size() == 3;
  for (const auto& r : rows) {
    const double k = r.h_bar / 1e-3;
    bool adjacent = false;
    for (const auto& s : r.trace)
      if (!s["feasible"].get<bool>() && std::abs(s["h"].get<double>() - r.h_bar - 1e-3) < 1e-12) adjacent = true;
    c9 = c9 && r.monotone && std::abs(k - std::round(k)) < 1e-9 && adjacent;
  }
  report(9, c9, "traces monotone, h_bar on the 1e-3 grid with h_bar + 1e-3 certified infeasible");

  // 10. rerun with the same seeds: criteria 1-3 and 6-8 in full, the sweep for eps = 1.5
  criterion1(run2);
  int exit2 = 0;
  double secs2 = 0.0;
  std::vector<SweepRow> rows2 = run_sweep(run2 / "madub", {1.5}, exit2, secs2);
  std::vector<SweepRow> rerun_rows;
  for (const auto& r : rows) rerun_rows.push_back(r);
  criterion2(rerun_rows, run2);
  criterion3(run2);
  criterion6(rerun_rows, run2);
  criterion7(rerun_rows, run2);
  criterion8(rerun_rows, run2, stress_runs);
  std::string differs;
  bool c10 = same_files(run1, run2,
                        {"criterion1.json", "criterion2.json", "criterion3.json", "criterion6.json",
                         "criterion7.json", "criterion8.json"},
                        differs) &&
             same_files(run1 / "madub", run2 / "madub",
                        {"madub_eps1.5.json", "certificate_eps1.5.json", "trace_eps1.5.csv"}, differs);
  report(10, c10, c10 ? "rerun outputs byte-identical" : "rerun differs in " + differs);

  int failed = 0;
  for (const auto& l : lines) failed += l.pass ? 0 : 1;
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
