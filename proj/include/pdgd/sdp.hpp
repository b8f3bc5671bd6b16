#pragma once

#include "pdgd/block_sdp.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace pdgd {

enum class SdpStatus { Optimal, Feasible, Infeasible, MaxIter, NumericalFailure };

const char* to_string(SdpStatus s);
SdpStatus sdp_status_from_string(const std::string& s);

struct SdpOptions {
  double gap_tol = 1e-8;
  double feas_tol = 1e-8;
  double slack_change_tol = 1e-9;
  int max_iter = 200;
  /// Box |y_a| <= box in feasibility mode; it normalizes homogeneous LMIs.
  double feasibility_box = 1.0;
  /// Optional box for objective problems; 0 disables it.
  double objective_box = 0.0;
  /// Objective problems enforce F(y) >= factor * margin * I.
  double objective_margin_factor = 2.0;
  double step_fraction = 0.95;
  /// Stop as soon as the sign of the answer is certified.
  bool early_exit = true;
};

struct SdpSolution {
  SdpStatus status = SdpStatus::NumericalFailure;
  Vector y;
  double objective = 0.0;  // c.y, or the slack t for feasibility problems
  double slack = 0.0;      // solver's t (feasibility mode)
  std::vector<double> margins;
  double min_margin = 0.0;
  int iterations = 0;
  double wall_time = 0.0;
  /// Objective mode only: the solver stalled before reaching gap_tol/feas_tol and
  /// returned its best iterate with gap and dual residual below their square roots
  /// and margins >= sdp.margin.
  bool reduced_accuracy = false;

  bool ok() const { return status == SdpStatus::Optimal || status == SdpStatus::Feasible; }
};

/// Feasibility problems maximize t subject to F_b(y) >= t I for every block and
/// report Feasible iff the recomputed margins are >= sdp.margin. Objective
/// problems minimize objective . y subject to F_b(y) >= factor * margin * I.
SdpSolution solve(const BlockSdp& sdp, const SdpOptions& options = {});

/// Smallest eigenvalue of every block at y, by dense eigensolves.
std::vector<double> check_certificate(const BlockSdp& sdp, const Vector& y);

/// status, objective, margins and iterations (wall time omitted).
nlohmann::json solution_to_json(const SdpSolution& s);

}  // namespace pdgd
