#include "pdgd/simulate.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <Eigen/Sparse>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

namespace pdgd {

DelaySignal DelaySignal::constant(double tau0) {
  if (!(tau0 >= 0.0)) throw std::invalid_argument("constant delay must be non-negative");
  DelaySignal s;
  s.kind_ = DelayKind::Constant;
  s.h_ = tau0;
  return s;
}

DelaySignal DelaySignal::sinusoid(double h, double d) {
  if (!(h >= 0.0) || !(d >= 0.0)) throw std::invalid_argument("sinusoid needs h >= 0 and d >= 0");
  DelaySignal s;
  s.kind_ = DelayKind::Sinusoid;
  s.h_ = h;
  s.d_ = d;
  return s;
}

DelaySignal DelaySignal::sawtooth(double h, double period) {
  if (!(h >= 0.0) || !(period > 0.0)) throw std::invalid_argument("sawtooth needs h >= 0 and period > 0");
  DelaySignal s;
  s.kind_ = DelayKind::Sawtooth;
  s.h_ = h;
  s.period_ = period;
  s.d_ = std::numeric_limits<double>::infinity();
  return s;
}

DelaySignal DelaySignal::piecewise_random(double h, double dwell, std::uint64_t seed) {
  if (!(h >= 0.0) || !(dwell > 0.0)) throw std::invalid_argument("random delay needs h >= 0 and dwell > 0");
  DelaySignal s;
  s.kind_ = DelayKind::PiecewiseRandom;
  s.h_ = h;
  s.period_ = dwell;
  s.seed_ = seed;
  s.engine_.seed(seed);
  s.d_ = std::numeric_limits<double>::infinity();
  return s;
}

double DelaySignal::operator()(double t) const {
  switch (kind_) {
    case DelayKind::Constant: return h_;
    case DelayKind::Sinusoid:
      if (h_ == 0.0) return 0.0;
      return 0.5 * h_ * (1.0 + std::sin(2.0 * d_ * t / h_));
    case DelayKind::Sawtooth: {
      const double x = t / period_;
      return h_ * (x - std::floor(x));
    }
    case DelayKind::PiecewiseRandom: {
      const auto k = static_cast<std::size_t>(std::max(0.0, std::floor(t / period_)));
      std::uniform_real_distribution<double> u(0.0, 1.0);
      while (levels_.size() <= k) levels_.push_back(h_ * u(engine_));
      return levels_[k];
    }
  }
  return 0.0;
}

namespace {

std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string DelaySignal::describe() const {
  std::ostringstream s;
  switch (kind_) {
    case DelayKind::Constant: s << "const:" << shortest(h_); break;
    case DelayKind::Sinusoid: s << "sin:h=" << shortest(h_) << ",d=" << shortest(d_); break;
    case DelayKind::Sawtooth: s << "saw:h=" << shortest(h_) << ",period=" << shortest(period_); break;
    case DelayKind::PiecewiseRandom:
      s << "rand:h=" << shortest(h_) << ",dwell=" << shortest(period_) << ",seed=" << seed_;
      break;
  }
  return s.str();
}

DelaySignal parse_delay(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("delay spec '" + spec + "' lacks a kind");
  const std::string kind = spec.substr(0, colon);
  const std::string rest = spec.substr(colon + 1);
  auto number = [&](const std::string& v) {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != v.size() || v.empty()) throw std::invalid_argument("bad number '" + v + "' in delay spec");
    return x;
  };
  if (kind == "const") return DelaySignal::constant(number(rest));
  std::map<std::string, std::string> kv;
  std::stringstream ss(rest);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("expected key=value in delay spec, got '" + item + "'");
    kv[item.substr(0, eq)] = item.substr(eq + 1);
  }
  auto take = [&](const char* key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw std::invalid_argument(std::string("delay spec needs ") + key);
    const double v = number(it->second);
    kv.erase(it);
    return v;
  };
  DelaySignal out;
  if (kind == "sin") {
    const double h = take("h"), d = take("d");
    out = DelaySignal::sinusoid(h, d);
  } else if (kind == "saw") {
    const double h = take("h"), p = take("period");
    out = DelaySignal::sawtooth(h, p);
  } else if (kind == "rand") {
    const double h = take("h"), dwell = take("dwell");
    const double seed = kv.count("seed") ? take("seed") : 0.0;
    if (seed < 0.0 || seed != std::floor(seed)) throw std::invalid_argument("seed must be a non-negative integer");
    out = DelaySignal::piecewise_random(h, dwell, static_cast<std::uint64_t>(seed));
  } else {
    throw std::invalid_argument("unknown delay kind '" + kind + "'");
  }
  if (!kv.empty()) throw std::invalid_argument("unknown delay parameter '" + kv.begin()->first + "'");
  return out;
}

HistoryBuffer::HistoryBuffer(double dt, double max_delay, Vector initial)
    : dt_(dt), initial_(std::move(initial)) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  depth_ = static_cast<int>(std::ceil(max_delay / dt)) + 4;
  ring_.assign(depth_, initial_);
}

void HistoryBuffer::push(const Vector& state) {
  ++newest_;
  ring_[newest_ % depth_] = state;
}

const Vector& HistoryBuffer::sample(long long k) const {
  if (k < 0) return initial_;
  if (k > newest_) throw std::logic_error("history sample requested from the future");
  if (k <= newest_ - depth_) throw MissingHistory("delay exceeds the history buffer depth");
  return ring_[k % depth_];
}

Vector HistoryBuffer::at(double pos) const {
  if (pos <= 0.0) return initial_;
  const double fl = std::floor(pos);
  const auto i = static_cast<long long>(fl);
  const double frac = pos - fl;
  if (frac == 0.0) return sample(i);
  return (1.0 - frac) * sample(i) + frac * sample(i + 1);
}

std::vector<double> Trajectory::error_norm() const {
  std::vector<double> e;
  e.reserve(state.size());
  for (const auto& s : state) e.push_back((s.head(r) - z_bar).norm());
  return e;
}

namespace {

// Same field as rhs_standard / rhs_augmented, with the linear parts assembled once.
class Field {
 public:
  explicit Field(const ErrorSystem& sys, bool augmented) : sys_(sys), aug_(augmented) {
    const Problem& p = sys.problem();
    const StateLayout& L = sys.layout();
    const int r = L.size();
    std::vector<Eigen::Triplet<double>> lin;
    c_ = Vector::Zero(r);
    for (int i = 0; i < p.block_rows(); ++i) {
      const Matrix& a = p.blocks[i][i];
      for (int m = 0; m < a.rows(); ++m)
        for (int n = 0; n < a.cols(); ++n) {
          if (a(m, n) == 0.0) continue;
          lin.emplace_back(L.x_offset(i) + n, L.lambda_offset(i) + m, -a(m, n));
          lin.emplace_back(L.lambda_offset(i) + m, L.x_offset(i) + n, a(m, n));
        }
      c_.segment(L.lambda_offset(i), L.dual_dim(i)) = -p.rhs[i];
    }
    // quadratic gradients Hx + g are linear too
    for (int i = 0; i < p.agents(); ++i) {
      const CostModel& cost = p.costs[i];
      if (cost.form_name() != "quadratic") {
        nonlinear_.push_back(i);
        continue;
      }
      const Matrix& h = cost.quadratic_H();
      for (int m = 0; m < h.rows(); ++m)
        for (int n = 0; n < h.cols(); ++n)
          if (h(m, n) != 0.0) lin.emplace_back(L.x_offset(i) + m, L.x_offset(i) + n, -h(m, n));
      c_.segment(L.x_offset(i), L.primal_dim(i)) -= cost.quadratic_g();
    }
    if (augmented) {
      for (int i = 0; i < L.agents(); ++i) {
        const Matrix& k = sys.gain()->blocks[i];
        for (int m = 0; m < k.rows(); ++m)
          for (int n = 0; n < k.cols(); ++n)
            if (k(m, n) != 0.0) lin.emplace_back(L.offset(i) + m, L.offset(i) + n, k(m, n));
      }
    }
    lin_.resize(r, r);
    lin_.setFromTriplets(lin.begin(), lin.end());
    for (const auto& e : sys.edges()) {
      Sparse t = e.T.sparseView();
      t.makeCompressed();
      edges_.push_back(std::move(t));
    }
    if (augmented) {
      gain_ = sys.gain()->assembled().sparseView();
    }
    dz_.resize(r);
  }

  Vector operator()(const Vector& y, const std::vector<Vector>& lagged) {
    const StateLayout& L = sys_.layout();
    const Problem& p = sys_.problem();
    const int r = L.size();
    dz_.noalias() = lin_ * y.head(r);
    dz_ += c_;
    for (std::size_t k = 0; k < edges_.size(); ++k) dz_.noalias() += edges_[k] * lagged[k];
    for (int i : nonlinear_)
      dz_.segment(L.x_offset(i), L.primal_dim(i)) -= p.costs[i].gradient(y.segment(L.x_offset(i), L.primal_dim(i)));
    if (!aug_) return dz_;
    Vector out(2 * r);
    out.head(r) = dz_;
    out.head(r).noalias() -= gain_ * y.tail(r);
    out.tail(r) = y.head(r) - y.tail(r);
    return out;
  }

 private:
  using Sparse = Eigen::SparseMatrix<double, Eigen::RowMajor>;
  const ErrorSystem& sys_;
  bool aug_;
  Sparse lin_;
  Sparse gain_;
  std::vector<Sparse> edges_;
  std::vector<int> nonlinear_;
  Vector c_;
  Vector dz_;
};

}  // namespace

Trajectory integrate(const ErrorSystem& sys, const Vector& initial, const SimulationOptions& o) {
  const bool aug = o.dynamics == Dynamics::Augmented;
  const int r = sys.layout().size();
  const int rho = sys.rho();
  if (!(o.dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (!(o.T >= o.dt)) throw std::invalid_argument("T must be at least dt");
  if (o.record_stride < 1) throw std::invalid_argument("record stride must be >= 1");
  if (aug && !sys.gain()) throw std::logic_error("gain required for the augmented dynamics");
  if (initial.size() != (aug ? 2 * r : r)) throw std::invalid_argument("initial state has the wrong length");
  if (rho > 0 && o.delays.size() != 1 && static_cast<int>(o.delays.size()) != rho)
    throw std::invalid_argument("need one delay signal per edge or a single shared one");
  auto signal = [&](int k) -> const DelaySignal& { return o.delays.size() == 1 ? o.delays[0] : o.delays[k]; };

  double hmax = 0.0;
  for (int k = 0; k < rho; ++k) hmax = std::max(hmax, signal(k).bound());

  Trajectory tr;
  tr.augmented = aug;
  tr.r = r;
  tr.dt = o.dt;
  tr.z_bar = sys.equilibrium_state();

  HistoryBuffer hist(o.dt, hmax, initial);
  const long long steps = std::llround(o.T / o.dt);
  Vector x = initial;
  hist.push(x);

  std::vector<double> tau(rho);
  Vector k1, k2, k3, k4;
  long long n = 0;

  Field rhs(sys, aug);
  std::vector<Vector> lagged(rho, Vector(r));
  auto field = [&](double c, const Vector& y) {
    const double ts = (static_cast<double>(n) + c) * o.dt;
    for (int k = 0; k < rho; ++k) {
      const double t_k = signal(k)(ts);
      if (t_k == 0.0) {
        lagged[k] = y.head(r);
        continue;
      }
      double q = t_k / o.dt;
      if (std::abs(q - std::round(q)) < 1e-9) q = std::round(q);
      const double pos = (static_cast<double>(n) - q) + c;
      if (pos <= 0.0) {
        lagged[k] = initial.head(r);
      } else if (pos <= static_cast<double>(n)) {
        const double fl = std::floor(pos);
        const auto i = static_cast<long long>(fl);
        const double f = pos - fl;
        if (f == 0.0)
          lagged[k] = hist.sample(i).head(r);
        else
          lagged[k] = (1.0 - f) * hist.sample(i).head(r) + f * hist.sample(i + 1).head(r);
      } else {
        lagged[k] = x.head(r) + ((pos - static_cast<double>(n)) * o.dt) * k1.head(r);
      }
    }
    return rhs(y, lagged);
  };
  auto record = [&](const Vector& deriv) {
    tr.t.push_back(static_cast<double>(n) * o.dt);
    tr.state.push_back(x);
    tr.derivative.push_back(deriv);
    for (int k = 0; k < rho; ++k) tau[k] = signal(k)(static_cast<double>(n) * o.dt);
    tr.tau.push_back(tau);
  };

  for (n = 0; n < steps; ++n) {
    k1 = field(0.0, x);
    if (n % o.record_stride == 0) record(k1);
    k2 = field(0.5, x + 0.5 * o.dt * k1);
    k3 = field(0.5, x + 0.5 * o.dt * k2);
    k4 = field(1.0, x + o.dt * k3);
    x += (o.dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const double nx = x.norm();
    if (!std::isfinite(nx) || nx > o.blowup) {
      tr.diverged = true;
      tr.diverged_at = static_cast<double>(n + 1) * o.dt;
      return tr;
    }
    hist.push(x);
  }
  if (n % o.record_stride == 0) record(field(0.0, x));
  return tr;
}

LkfSeries evaluate_lkf(const Trajectory& traj, const DecisionVars& vars, const std::vector<DelayBound>& bounds) {
  if (!traj.augmented) throw std::invalid_argument("the functional needs the augmented dynamics");
  const int rho = static_cast<int>(bounds.size());
  if (static_cast<int>(vars.R.size()) != rho) throw std::invalid_argument("one bound per edge expected");
  const std::size_t ns = traj.t.size();
  if (ns < 2) throw Unsupported("trajectory too short");
  const int r = traj.r;
  const double dt = traj.t[1] - traj.t[0];
  double hmax = 0.0;
  for (const auto& b : bounds) hmax = std::max(hmax, b.h);
  const auto i0 = static_cast<std::size_t>(std::ceil(hmax / dt - 1e-9));
  if (i0 >= ns) throw Unsupported("trajectory ends before the history horizon t = " + std::to_string(hmax));

  Matrix Y(2 * r, 2 * r);
  Y << vars.Y11, vars.Y12, vars.Y12.transpose(), vars.Y22;

  // Cumulative trapezoid integrals of z~'S z~, z~'Q z~, dz'R dz and s * dz'R dz.
  std::vector<std::vector<double>> cs(rho, std::vector<double>(ns, 0.0)), cq = cs, cr = cs, crt = cs;
  std::vector<double> fs(rho), fq(rho), fr(rho), fs_prev(rho), fq_prev(rho), fr_prev(rho);
  for (std::size_t i = 0; i < ns; ++i) {
    const Vector ze = traj.state[i].head(r) - traj.z_bar;
    const Vector dz = traj.derivative[i].head(r);
    for (int k = 0; k < rho; ++k) {
      fs[k] = ze.dot(vars.S[k] * ze);
      fq[k] = ze.dot(vars.Q[k] * ze);
      fr[k] = dz.dot(vars.R[k] * dz);
      if (i > 0) {
        cs[k][i] = cs[k][i - 1] + 0.5 * dt * (fs[k] + fs_prev[k]);
        cq[k][i] = cq[k][i - 1] + 0.5 * dt * (fq[k] + fq_prev[k]);
        cr[k][i] = cr[k][i - 1] + 0.5 * dt * (fr[k] + fr_prev[k]);
        crt[k][i] = crt[k][i - 1] + 0.5 * dt * (traj.t[i] * fr[k] + traj.t[i - 1] * fr_prev[k]);
      }
    }
    fs_prev = fs;
    fq_prev = fq;
    fr_prev = fr;
  }
  auto at = [&](const std::vector<double>& c, double s) {
    double pos = (s - traj.t[0]) / dt;
    if (std::abs(pos - std::round(pos)) < 1e-9) pos = std::round(pos);
    if (pos <= 0.0) return c[0];
    const auto i = static_cast<std::size_t>(std::floor(pos));
    if (i + 1 >= c.size()) return c.back();
    const double f = pos - static_cast<double>(i);
    return (1.0 - f) * c[i] + f * c[i + 1];
  };

  LkfSeries out;
  for (std::size_t i = i0; i < ns; ++i) {
    const double t = traj.t[i];
    Vector w(2 * r);
    w << traj.state[i].head(r) - traj.z_bar, traj.state[i].tail(r) - traj.z_bar;
    const double v1 = w.dot(Y * w);
    double v2 = 0.0, v3 = 0.0, v4 = 0.0;
    for (int k = 0; k < rho; ++k) {
      const double h = bounds[k].h;
      v2 += cs[k][i] - at(cs[k], t - h);
      v3 += cq[k][i] - at(cq[k], t - traj.tau[i][k]);
      v4 += h * ((crt[k][i] - at(crt[k], t - h)) - (t - h) * (cr[k][i] - at(cr[k], t - h)));
    }
    out.t.push_back(t);
    out.V1.push_back(v1);
    out.V2.push_back(v2);
    out.V3.push_back(v3);
    out.V4.push_back(v4);
    out.V.push_back(v1 + v2 + v3 + v4);
  }
  return out;
}

double max_lkf_increase(const LkfSeries& s) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < s.V.size(); ++i) m = std::max(m, s.V[i] - s.V[i - 1]);
  return m;
}

const char* to_string(Stability s) {
  switch (s) {
    case Stability::Converged: return "Converged";
    case Stability::Oscillating: return "Oscillating";
    case Stability::Diverged: return "Diverged";
  }
  return "Oscillating";
}

StabilityReport classify_stability(const Trajectory& traj, double window, double tol) {
  StabilityReport rep;
  const auto e = traj.error_norm();
  if (!e.empty()) {
    rep.initial_error = e.front();
    rep.final_error = e.back();
  }
  if (traj.diverged) {
    rep.verdict = Stability::Diverged;
    rep.tail_max = std::numeric_limits<double>::infinity();
    return rep;
  }
  if (e.empty()) return rep;
  const double t_end = traj.t.back();
  const double t_tail = t_end - window * (t_end - traj.t.front());
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i)
    if (traj.t[i] >= t_tail) {
      lo = std::min(lo, e[i]);
      hi = std::max(hi, e[i]);
    }
  rep.tail_max = hi;
  rep.tail_peak_to_peak = hi - lo;
  rep.verdict = hi <= tol * rep.initial_error ? Stability::Converged : Stability::Oscillating;
  return rep;
}

Vector random_initial_state(const ErrorSystem& sys, bool augmented, std::uint64_t seed, double spread) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> u(-spread, spread);
  Vector z = sys.equilibrium_state();
  for (int i = 0; i < z.size(); ++i) z[i] += u(eng);
  if (!augmented) return z;
  Vector s(2 * z.size());
  s << z, z;
  return s;
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj, const LkfSeries* lkf) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(17) << "t";
  for (int i = 0; i < traj.r; ++i) out << ",z" << i + 1;
  if (traj.augmented)
    for (int i = 0; i < traj.r; ++i) out << ",u" << i + 1;
  const std::size_t rho = traj.tau.empty() ? 0 : traj.tau.front().size();
  for (std::size_t k = 0; k < rho; ++k) out << ",tau" << k + 1;
  out << ",V,err\n";
  const auto e = traj.error_norm();
  std::size_t j = 0;
  for (std::size_t i = 0; i < traj.t.size(); ++i) {
    out << traj.t[i];
    for (int c = 0; c < traj.state[i].size(); ++c) out << "," << traj.state[i][c];
    for (double tk : traj.tau[i]) out << "," << tk;
    out << ",";
    if (lkf && j < lkf->t.size() && std::abs(lkf->t[j] - traj.t[i]) < 1e-12) out << lkf->V[j++];
    out << "," << e[i] << "\n";
  }
}

nlohmann::json summary_json(const Trajectory& traj, const StabilityReport& rep) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["kind"] = "pdgd-simulation";
  j["dynamics"] = traj.augmented ? "augmented" : "standard";
  j["T"] = traj.t.empty() ? 0.0 : traj.t.back();
  j["dt"] = traj.dt;
  j["classification"] = to_string(rep.verdict);
  j["initial_error"] = rep.initial_error;
  j["final_error"] = rep.final_error;
  j["tail_max"] = traj.diverged ? nlohmann::json(nullptr) : nlohmann::json(rep.tail_max);
  j["tail_peak_to_peak"] = rep.tail_peak_to_peak;
  j["diverged"] = traj.diverged;
  if (traj.diverged) j["diverged_at"] = traj.diverged_at;
  return j;
}

}  // namespace pdgd
