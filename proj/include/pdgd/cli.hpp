#pragma once

#include "pdgd/simulate.hpp"
#include "pdgd/synthesis.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdgd {

/// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFault = 1;
inline constexpr int kExitNegative = 2;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EdgeDelay {
  int target = 0;  // 1-based agents
  int source = 0;
  DelayBound bound;
};

struct RunConfig {
  std::string command;  // synthesize, madub, simulate, verify, dump, export-sdp
  std::filesystem::path problem;
  std::filesystem::path out_dir = "out";

  // synthesis
  std::vector<double> eps;  // empty: 1.5, or the sweep list
  bool sweep_eps = false;
  double h = 1.0;
  double d = 0.1;
  std::vector<EdgeDelay> edge_delays;
  bool collapse = true;
  bool tie_edges = false;
  bool minimize_gain = false;
  double alpha1 = 1.0;
  double alpha2 = 1.0;
  double margin = 1e-6;
  SdpOptions solver;

  // madub
  double h_lo = 0.0;
  double h_hi = 2.0;
  double tol = 1e-3;

  // simulate / verify
  std::string dynamics = "standard";
  std::filesystem::path cert;
  std::vector<std::string> delays;
  double T = 300.0;
  double dt = 1e-3;
  int record_stride = 10;
  std::uint64_t seed = 1;
  double spread = 1.0;
  int phi_samples = 50;
  double lkf_T = 100.0;
  double lkf_slack = 1e-3;
  int stress_runs = 0;
  double stress_T = 2000.0;
  double stress_tol = 1e-4;
};

/// Strict parse: unknown keys and out-of-range values raise ConfigError.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& c);
/// Makes every path absolute.
void resolve_paths(RunConfig& c);

struct VerifyCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyOptions {
  int phi_samples = 50;
  std::uint64_t seed = 1;
  double dt = 1e-3;
  double lkf_T = 100.0;
  double lkf_slack = 1e-3;
  int stress_runs = 0;
  double stress_T = 2000.0;
  double stress_tol = 1e-4;
  double spread = 1.0;
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;
  bool passed() const;
};

/// Admissible delay realization for a certificate: Sinusoid(h_k, d_k), or a
/// sawtooth when d_k >= 1.
std::vector<DelaySignal> certificate_delays(const Certificate& cert);

/// Provenance, gain recovery, margin recheck, Phi spot checks, equilibrium
/// preservation, LKF decrease and optional stress runs.
VerifyReport verify_certificate(const Problem& problem, const Certificate& cert, const VerifyOptions& options);
nlohmann::json verify_report_to_json(const VerifyReport& r);

int cmd_synthesize(const RunConfig& c, std::ostream& log);
int cmd_madub(const RunConfig& c, std::ostream& log);
int cmd_simulate(const RunConfig& c, std::ostream& log);
int cmd_verify(const RunConfig& c, std::ostream& log);
int cmd_dump(const RunConfig& c, std::ostream& log);
int cmd_export_sdp(const RunConfig& c, std::ostream& log);

/// Resolves paths, writes config.json and run.log into out_dir, dispatches on
/// c.command and maps exceptions to exit codes. `console` mirrors the log.
int run_command(RunConfig c, std::ostream& console);

}  // namespace pdgd
