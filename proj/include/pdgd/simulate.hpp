#pragma once

#include "pdgd/lmi.hpp"
#include "pdgd/structure.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdgd {

enum class DelayKind { Constant, Sinusoid, Sawtooth, PiecewiseRandom };

/// Admissible delay realization t -> tau(t) in [0, h].
class DelaySignal {
 public:
  static DelaySignal constant(double tau0);
  /// tau(t) = (h/2)(1 + sin(2 d t / h)), so |dtau/dt| <= d.
  static DelaySignal sinusoid(double h, double d);
  /// tau(t) = h * frac(t / period).
  static DelaySignal sawtooth(double h, double period);
  /// tau uniform in [0, h], redrawn every `dwell` seconds.
  static DelaySignal piecewise_random(double h, double dwell, std::uint64_t seed);

  double operator()(double t) const;
  DelayKind kind() const { return kind_; }
  double bound() const { return h_; }
  double rate() const { return d_; }
  bool fast_varying() const { return kind_ == DelayKind::Sawtooth || kind_ == DelayKind::PiecewiseRandom; }
  std::string describe() const;

 private:
  DelayKind kind_ = DelayKind::Constant;
  double h_ = 0.0;
  double d_ = 0.0;
  double period_ = 1.0;
  std::uint64_t seed_ = 0;
  mutable std::mt19937_64 engine_;
  mutable std::vector<double> levels_;
};

/// "const:0.2", "sin:h=1,d=0.1", "saw:h=1,period=0.5", "rand:h=1,dwell=0.3,seed=7".
DelaySignal parse_delay(const std::string& spec);

/// Uniformly sampled state history with a constant pre-history.
class HistoryBuffer {
 public:
  HistoryBuffer(double dt, double max_delay, Vector initial);

  double dt() const { return dt_; }
  /// Index of the newest stored sample.
  long long newest() const { return newest_; }
  void push(const Vector& state);
  /// Sample k (k <= newest, k >= newest - depth + 1); k < 0 returns the pre-history.
  const Vector& sample(long long k) const;
  /// Linear interpolation at fractional step position `pos` <= newest.
  Vector at(double pos) const;

 private:
  double dt_;
  int depth_;
  Vector initial_;
  std::vector<Vector> ring_;
  long long newest_ = -1;
};

enum class Dynamics { Standard, Augmented };

struct SimulationOptions {
  Dynamics dynamics = Dynamics::Standard;
  double T = 10.0;
  double dt = 1e-3;
  int record_stride = 1;
  double blowup = 1e9;
  /// One signal per edge, or a single signal shared by all edges.
  std::vector<DelaySignal> delays;
};

struct Trajectory {
  bool augmented = false;
  int r = 0;
  double dt = 0.0;
  Vector z_bar;
  std::vector<double> t;
  std::vector<Vector> state;       // z or col(z, u)
  std::vector<Vector> derivative;  // right-hand side at the recorded state
  std::vector<std::vector<double>> tau;
  bool diverged = false;
  double diverged_at = 0.0;

  /// ||z - z_bar|| per sample.
  std::vector<double> error_norm() const;
};

/// Fixed-step RK4 on the delayed dynamics. `initial` is z0, or col(z0, u0) for
/// the augmented dynamics, which also needs sys.gain().
Trajectory integrate(const ErrorSystem& sys, const Vector& initial, const SimulationOptions& options);

struct LkfSeries {
  std::vector<double> t;
  std::vector<double> V, V1, V2, V3, V4;
};

class Unsupported : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// LKF along an augmented trajectory, sampled from t = max h_k onward. The
/// delays tau_k(t) are the ones recorded in the trajectory.
LkfSeries evaluate_lkf(const Trajectory& traj, const DecisionVars& vars,
                       const std::vector<DelayBound>& bounds);

/// Largest V[i+1] - V[i].
double max_lkf_increase(const LkfSeries& s);

enum class Stability { Converged, Oscillating, Diverged };
const char* to_string(Stability s);

struct StabilityReport {
  Stability verdict = Stability::Oscillating;
  double initial_error = 0.0;
  double final_error = 0.0;
  double tail_max = 0.0;
  double tail_peak_to_peak = 0.0;
};

/// Converged when the tail maximum of ||z~|| is <= tol * ||z~(0)||; the tail
/// is the last `window` fraction of the horizon.
StabilityReport classify_stability(const Trajectory& traj, double window = 0.2, double tol = 1e-4);

/// Equilibrium state (z_bar, or col(z_bar, z_bar)) plus a uniform perturbation in [-spread, spread].
Vector random_initial_state(const ErrorSystem& sys, bool augmented, std::uint64_t seed, double spread = 1.0);

/// t, state..., tau_k..., V, ||z~||; V is left empty when no series is given.
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj,
                          const LkfSeries* lkf = nullptr);
nlohmann::json summary_json(const Trajectory& traj, const StabilityReport& report);

}  // namespace pdgd
