#pragma once

#include "pdgd/linalg.hpp"

#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pdgd {

/// How an agent's Hessian enters the stability conditions.
enum class CostKind {
  Quadratic,         // constant Hessian
  PolytopicHessian,  // Hessian inside the convex hull of vertex matrices
  GeneralSmooth,     // only the bounds mu*I <= B <= ell*I are used
};

const char* to_string(CostKind kind);
CostKind cost_kind_from_string(const std::string& s);

class EvaluatorFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A scalar function applied to every coordinate, f(x) = sum_k phi(x_k).
struct ScalarForm {
  std::string name;
  std::map<std::string, double> params;
  std::function<double(double)> value;
  std::function<double(double)> d1;
  std::function<double(double)> d2;
  /// Global bounds of phi''.
  double curvature_lo = 0.0;
  double curvature_hi = 0.0;
};

/// ln(exp(a x) + exp(b x)) + q x^2
ScalarForm log_sum_exp_form(double a, double b, double q);
/// amp * sin(freq x) + q x^2
ScalarForm sine_quadratic_form(double amp, double freq, double q);
/// x^2 / sqrt(x^2 + s) + q x^2
ScalarForm sqrt_ratio_form(double s, double q);

/// Names accepted by `catalog_form`.
const std::vector<std::string>& catalog_form_names();
ScalarForm catalog_form(const std::string& name, const std::map<std::string, double>& params);

struct Interval {
  double lo = -10.0;
  double hi = 10.0;
};

/// Local cost of one agent together with its curvature metadata.
class CostModel {
 public:
  using ValueFn = std::function<double(const Vector&)>;
  using GradientFn = std::function<Vector(const Vector&)>;
  using HessianFn = std::function<Matrix(const Vector&)>;

  /// f(x) = 0.5 x'Hx + g'x + c. mu and ell are taken from the spectrum of H.
  static CostModel quadratic(Matrix H, Vector g, double c);
  /// Coordinate-separable catalog form; mu/ell from the form's global bounds.
  static CostModel separable(ScalarForm form, int dim, CostKind kind);
  /// Arbitrary evaluators (used for user extensions and tests).
  static CostModel custom(CostKind kind, int dim, ValueFn value, GradientFn gradient,
                          HessianFn hessian, double mu, double ell);

  CostKind kind() const { return kind_; }
  int dim() const { return dim_; }

  double value(const Vector& x) const;
  Vector gradient(const Vector& x) const;
  Matrix hessian(const Vector& x) const;
  /// Mean-value matrix B with grad f(x) - grad f(y) = B (x - y).
  Matrix secant_hessian(const Vector& x, const Vector& y) const;

  double mu() const { return mu_; }
  double ell() const { return ell_; }
  bool curvature_estimated() const { return estimated_; }
  void set_curvature(double mu, double ell, bool estimated);

  const std::vector<Matrix>& vertex_hessians() const { return vertices_; }
  void set_vertex_hessians(std::vector<Matrix> vertices);
  /// Diagonal vertices built from the current (mu, ell); 2^dim matrices.
  void reset_default_vertices();

  const std::vector<Interval>& box() const { return box_; }
  void set_box(std::vector<Interval> box);

  void set_kind(CostKind kind);

  // Provenance for serialization.
  const std::string& form_name() const { return form_name_; }
  const std::map<std::string, double>& form_params() const { return form_params_; }
  const Matrix& quadratic_H() const { return H_; }
  const Vector& quadratic_g() const { return g_; }
  double quadratic_c() const { return c_; }
  bool is_separable() const { return separable_.has_value(); }

 private:
  CostKind kind_ = CostKind::Quadratic;
  int dim_ = 0;
  ValueFn value_;
  GradientFn gradient_;
  HessianFn hessian_;
  std::optional<ScalarForm> separable_;
  double mu_ = 0.0;
  double ell_ = 0.0;
  bool estimated_ = false;
  std::vector<Matrix> vertices_;
  std::vector<Interval> box_;
  std::string form_name_;
  std::map<std::string, double> form_params_;
  Matrix H_;
  Vector g_;
  double c_ = 0.0;
};

/// Entry-wise min/max of the Hessian over a sample grid of `box`, widened on
/// each side by `safety` times the observed width.
std::pair<Matrix, Matrix> hessian_range(const CostModel& cost, const std::vector<Interval>& box,
                                        int samples, double safety = 0.05);

}  // namespace pdgd

namespace pdgd {

/// (mu, ell) from the extreme Hessian eigenvalues over a sample grid of `box`,
/// widened on each side by `safety` times the observed spread.
std::pair<double, double> estimate_curvature(const CostModel& cost,
                                             const std::vector<Interval>& box, int samples,
                                             double safety = 0.05);

}  // namespace pdgd
