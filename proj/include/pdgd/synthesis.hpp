#pragma once

#include "pdgd/lmi.hpp"
#include "pdgd/sdp.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pdgd {

struct GainWeights {
  double alpha1 = 1.0;
  double alpha2 = 1.0;
};

struct SynthesisOptions {
  double epsilon = 1.5;
  double margin = 1e-6;
  bool tie_edges = false;
  std::size_t vertex_cap = 256;
  std::optional<GainWeights> minimize_gain;
  SdpOptions solver;
};

struct EdgeRecord {
  int target = -1;
  int source = -1;
  std::vector<std::pair<int, int>> members;
  DelayBound bound;
};

struct BlockMargin {
  std::string name;
  double margin = 0.0;
};

struct Certificate {
  std::string problem_hash;
  std::string problem_name;
  double epsilon = 0.0;
  double margin = 1e-6;
  bool tie_edges = false;
  bool collapsed = false;
  std::vector<EdgeRecord> edges;
  DecisionVars vars;
  GainMatrix gain;
  std::vector<BlockMargin> margins;
  double min_margin = 0.0;
  double vertex_scale = 1.0;
  std::optional<GainWeights> gain_weights;
  bool gain_minimized = false;
  SdpStatus solver_status = SdpStatus::NumericalFailure;
  int iterations = 0;
  bool reduced_accuracy = false;
  SdpOptions solver;

  double max_delay() const;
};

class Infeasible : public std::runtime_error {
 public:
  Infeasible(double h, double epsilon, const std::string& detail);
  double h;
  double epsilon;
};

class SingularP2 : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotBracketed : public std::runtime_error {
 public:
  NotBracketed(const std::string& what, double suggested_lo, double suggested_hi);
  double suggested_lo;
  double suggested_hi;
};

struct SynthesisResult {
  bool feasible = false;
  std::optional<Certificate> certificate;
  SdpSolution solution;
};

/// Solves the vertex LMIs for the delay bounds carried by `sys`; with
/// minimize_gain the gain-size program is solved afterwards and kept when it
/// certifies with the same margin.
SynthesisResult try_synthesize(const ErrorSystem& sys, const SynthesisOptions& options);
/// As try_synthesize; throws Infeasible on a certified negative.
Certificate synthesize(const ErrorSystem& sys, const SynthesisOptions& options);

/// Program that a certificate claims to satisfy, re-assembled from scratch.
LmiProgram certificate_program(const ErrorSystem& sys, const Certificate& cert);
/// System carrying the certificate's delay bounds.
ErrorSystem certificate_system(std::shared_ptr<const Problem> problem, const Certificate& cert);
/// Margins of the re-assembled program at the certificate's variables.
std::vector<BlockMargin> recheck_margins(const ErrorSystem& sys, const Certificate& cert);
/// max |P2^T K - X| over all entries.
double gain_recovery_error(const StateLayout& layout, const Certificate& cert);

nlohmann::json certificate_to_json(const Certificate& cert);
Certificate certificate_from_json(const nlohmann::json& j);
void save_certificate(const std::filesystem::path& path, const Certificate& cert);
Certificate load_certificate(const std::filesystem::path& path);

struct MadubOptions {
  double d = 0.1;
  double h_lo = 0.0;
  double h_hi = 2.0;
  double tol = 1e-3;
  SynthesisOptions synthesis;
};

struct BisectionStep {
  double h = 0.0;
  bool feasible = false;
  SdpStatus status = SdpStatus::NumericalFailure;
  double margin = 0.0;
};

struct MadubResult {
  double epsilon = 0.0;
  double d = 0.0;
  double h_bar = 0.0;
  double tol = 0.0;
  std::optional<Certificate> certificate;
  std::vector<BisectionStep> trace;

  /// Every feasible h lies below every infeasible h.
  bool trace_monotone() const;
};

/// Bisection on the grid h = k * tol with a homogeneous bound (h, d) on every
/// edge. Throws NotBracketed when h_lo is infeasible or h_hi is feasible.
MadubResult madub(const ErrorSystem& sys, const MadubOptions& options);

nlohmann::json madub_to_json(const MadubResult& r);
void write_trace_csv(const std::filesystem::path& path, const MadubResult& r);

}  // namespace pdgd
