#include "pdgd/cost.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace pdgd {

const char* to_string(CostKind kind) {
  switch (kind) {
    case CostKind::Quadratic: return "quadratic";
    case CostKind::PolytopicHessian: return "polytopic";
    case CostKind::GeneralSmooth: return "general";
  }
  return "unknown";
}

CostKind cost_kind_from_string(const std::string& s) {
  if (s == "quadratic") return CostKind::Quadratic;
  if (s == "polytopic") return CostKind::PolytopicHessian;
  if (s == "general") return CostKind::GeneralSmooth;
  throw std::invalid_argument("unknown cost class '" + s + "'");
}

ScalarForm log_sum_exp_form(double a, double b, double q) {
  ScalarForm f;
  f.name = "log_sum_exp";
  f.params = {{"a", a}, {"b", b}, {"q", q}};
  f.value = [a, b, q](double x) {
    const double m = std::max(a * x, b * x);
    return m + std::log(std::exp(a * x - m) + std::exp(b * x - m)) + q * x * x;
  };
  // sigma is the softmax weight of the b-exponent
  f.d1 = [a, b, q](double x) {
    const double s = 1.0 / (1.0 + std::exp((a - b) * x));
    return a + (b - a) * s + 2.0 * q * x;
  };
  f.d2 = [a, b, q](double x) {
    const double s = 1.0 / (1.0 + std::exp((a - b) * x));
    return (b - a) * (b - a) * s * (1.0 - s) + 2.0 * q;
  };
  f.curvature_lo = 2.0 * q;
  f.curvature_hi = 2.0 * q + 0.25 * (b - a) * (b - a);
  return f;
}

ScalarForm sine_quadratic_form(double amp, double freq, double q) {
  ScalarForm f;
  f.name = "sine_quadratic";
  f.params = {{"amp", amp}, {"freq", freq}, {"q", q}};
  f.value = [=](double x) { return amp * std::sin(freq * x) + q * x * x; };
  f.d1 = [=](double x) { return amp * freq * std::cos(freq * x) + 2.0 * q * x; };
  f.d2 = [=](double x) { return -amp * freq * freq * std::sin(freq * x) + 2.0 * q; };
  f.curvature_lo = 2.0 * q - std::abs(amp) * freq * freq;
  f.curvature_hi = 2.0 * q + std::abs(amp) * freq * freq;
  return f;
}

ScalarForm sqrt_ratio_form(double s, double q) {
  if (s <= 0.0) throw std::invalid_argument("sqrt_ratio requires s > 0");
  ScalarForm f;
  f.name = "sqrt_ratio";
  f.params = {{"s", s}, {"q", q}};
  f.value = [=](double x) { return x * x / std::sqrt(x * x + s) + q * x * x; };
  f.d1 = [=](double x) {
    const double w = x * x + s;
    return x * (x * x + 2.0 * s) / (w * std::sqrt(w)) + 2.0 * q * x;
  };
  f.d2 = [=](double x) {
    const double w = x * x + s;
    return s * (2.0 * s - x * x) / (w * w * std::sqrt(w)) + 2.0 * q;
  };
  // extrema of the ratio term at x = 0 and x^2 = 4s
  f.curvature_lo = 2.0 * q - 2.0 / (std::pow(5.0, 2.5) * std::sqrt(s));
  f.curvature_hi = 2.0 * q + 2.0 / std::sqrt(s);
  return f;
}

const std::vector<std::string>& catalog_form_names() {
  static const std::vector<std::string> names = {"log_sum_exp", "sine_quadratic", "sqrt_ratio"};
  return names;
}

ScalarForm catalog_form(const std::string& name, const std::map<std::string, double>& params) {
  auto get = [&](const char* key) {
    auto it = params.find(key);
    if (it == params.end())
      throw std::invalid_argument("catalog form '" + name + "' needs parameter '" + key + "'");
    return it->second;
  };
  auto check_keys = [&](std::initializer_list<const char*> keys) {
    for (const auto& [k, v] : params) {
      bool known = false;
      for (const char* key : keys) known = known || k == key;
      if (!known)
        throw std::invalid_argument("catalog form '" + name + "' has no parameter '" + k + "'");
    }
  };
  if (name == "log_sum_exp") {
    check_keys({"a", "b", "q"});
    return log_sum_exp_form(get("a"), get("b"), get("q"));
  }
  if (name == "sine_quadratic") {
    check_keys({"amp", "freq", "q"});
    return sine_quadratic_form(get("amp"), get("freq"), get("q"));
  }
  if (name == "sqrt_ratio") {
    check_keys({"s", "q"});
    return sqrt_ratio_form(get("s"), get("q"));
  }
  throw std::invalid_argument("unknown catalog form '" + name + "'");
}

CostModel CostModel::quadratic(Matrix H, Vector g, double c) {
  if (H.rows() != H.cols() || H.rows() != g.size())
    throw std::invalid_argument("quadratic cost: H must be square and match g");
  CostModel m;
  m.kind_ = CostKind::Quadratic;
  m.dim_ = static_cast<int>(g.size());
  m.H_ = H;
  m.g_ = g;
  m.c_ = c;
  m.value_ = [H, g, c](const Vector& x) { return 0.5 * x.dot(H * x) + g.dot(x) + c; };
  m.gradient_ = [H, g](const Vector& x) -> Vector { return H * x + g; };
  m.hessian_ = [H](const Vector&) -> Matrix { return H; };
  m.mu_ = min_eigenvalue(H);
  m.ell_ = max_eigenvalue(H);
  m.form_name_ = "quadratic";
  m.box_.assign(m.dim_, Interval{});
  return m;
}

CostModel CostModel::separable(ScalarForm form, int dim, CostKind kind) {
  if (dim < 1) throw std::invalid_argument("separable cost needs dim >= 1");
  if (kind == CostKind::Quadratic)
    throw std::invalid_argument("catalog forms are not quadratic; use polytopic or general");
  CostModel m;
  m.kind_ = kind;
  m.dim_ = dim;
  m.value_ = [f = form](const Vector& x) {
    double v = 0.0;
    for (Eigen::Index k = 0; k < x.size(); ++k) v += f.value(x[k]);
    return v;
  };
  m.gradient_ = [f = form](const Vector& x) -> Vector {
    Vector g(x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) g[k] = f.d1(x[k]);
    return g;
  };
  m.hessian_ = [f = form](const Vector& x) -> Matrix {
    Vector d(x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) d[k] = f.d2(x[k]);
    return d.asDiagonal();
  };
  m.mu_ = form.curvature_lo;
  m.ell_ = form.curvature_hi;
  m.form_name_ = form.name;
  m.form_params_ = form.params;
  m.separable_ = std::move(form);
  m.box_.assign(dim, Interval{});
  if (kind == CostKind::PolytopicHessian) m.reset_default_vertices();
  return m;
}

CostModel CostModel::custom(CostKind kind, int dim, ValueFn value, GradientFn gradient,
                            HessianFn hessian, double mu, double ell) {
  CostModel m;
  m.kind_ = kind;
  m.dim_ = dim;
  m.value_ = std::move(value);
  m.gradient_ = std::move(gradient);
  m.hessian_ = std::move(hessian);
  m.mu_ = mu;
  m.ell_ = ell;
  m.form_name_ = "custom";
  m.box_.assign(dim, Interval{});
  if (kind == CostKind::Quadratic) {
    m.H_ = m.hessian_(Vector::Zero(dim));
    m.g_ = m.gradient_(Vector::Zero(dim));
    m.c_ = m.value_(Vector::Zero(dim));
  }
  if (kind == CostKind::PolytopicHessian) m.reset_default_vertices();
  return m;
}

double CostModel::value(const Vector& x) const { return value_(x); }

Vector CostModel::gradient(const Vector& x) const { return gradient_(x); }

Matrix CostModel::hessian(const Vector& x) const {
  Matrix h = hessian_(x);
  if (!h.allFinite()) throw EvaluatorFailure("non-finite Hessian evaluation");
  return h;
}

Matrix CostModel::secant_hessian(const Vector& x, const Vector& y) const {
  if (kind_ == CostKind::Quadratic && H_.size() > 0) return H_;
  if (separable_) {
    const auto& f = *separable_;
    Vector d(dim_);
    for (int k = 0; k < dim_; ++k) {
      const double dx = x[k] - y[k];
      if (std::abs(dx) > 1e-6 * (1.0 + std::abs(x[k]) + std::abs(y[k])))
        d[k] = (f.d1(x[k]) - f.d1(y[k])) / dx;
      else
        d[k] = f.d2(0.5 * (x[k] + y[k]));
    }
    if (!d.allFinite()) throw EvaluatorFailure("non-finite secant Hessian");
    return d.asDiagonal();
  }
  // 8-point Gauss-Legendre rule along the segment y -> x
  static constexpr double nodes[8] = {-0.9602898564975363, -0.7966664774136267,
                                      -0.5255324099163290, -0.1834346424956498,
                                      0.1834346424956498,  0.5255324099163290,
                                      0.7966664774136267,  0.9602898564975363};
  static constexpr double weights[8] = {0.1012285362903763, 0.2223810344533745,
                                        0.3137066458778873, 0.3626837833783620,
                                        0.3626837833783620, 0.3137066458778873,
                                        0.2223810344533745, 0.1012285362903763};
  Matrix b = Matrix::Zero(dim_, dim_);
  for (int q = 0; q < 8; ++q) {
    const double s = 0.5 * (nodes[q] + 1.0);
    b += 0.5 * weights[q] * hessian(y + s * (x - y));
  }
  return symmetric_part(b);
}

void CostModel::set_curvature(double mu, double ell, bool estimated) {
  mu_ = mu;
  ell_ = ell;
  estimated_ = estimated;
  if (kind_ == CostKind::PolytopicHessian) reset_default_vertices();
}

void CostModel::set_vertex_hessians(std::vector<Matrix> vertices) {
  for (const auto& v : vertices)
    if (v.rows() != dim_ || v.cols() != dim_)
      throw std::invalid_argument("vertex Hessian has wrong shape");
  vertices_ = std::move(vertices);
}

void CostModel::reset_default_vertices() {
  vertices_.clear();
  if (dim_ > 16) throw std::invalid_argument("too many default polytopic vertices");
  const unsigned count = 1u << dim_;
  for (unsigned mask = 0; mask < count; ++mask) {
    Vector d(dim_);
    for (int k = 0; k < dim_; ++k) d[k] = (mask >> k) & 1u ? ell_ : mu_;
    vertices_.push_back(d.asDiagonal());
  }
}

void CostModel::set_box(std::vector<Interval> box) {
  if (static_cast<int>(box.size()) != dim_) throw std::invalid_argument("box dimension mismatch");
  box_ = std::move(box);
}

void CostModel::set_kind(CostKind kind) {
  if (kind == CostKind::Quadratic && kind_ != CostKind::Quadratic)
    throw std::invalid_argument("cannot reclassify a non-quadratic cost as quadratic");
  kind_ = kind;
  if (kind_ == CostKind::PolytopicHessian && vertices_.empty()) reset_default_vertices();
}

namespace {

template <typename Visit>
void for_each_sample(const std::vector<Interval>& box, int samples, Visit&& visit) {
  const int n = static_cast<int>(box.size());
  const double grid_size = std::pow(static_cast<double>(samples), n);
  Vector x(n);
  if (grid_size <= 200000.0) {
    std::vector<int> idx(n, 0);
    while (true) {
      for (int k = 0; k < n; ++k)
        x[k] = box[k].lo + (box[k].hi - box[k].lo) * idx[k] / (samples - 1);
      visit(x);
      int k = 0;
      while (k < n && ++idx[k] == samples) idx[k++] = 0;
      if (k == n) break;
    }
    return;
  }
  std::mt19937_64 rng(0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int s = 0; s < 200000; ++s) {
    for (int k = 0; k < n; ++k) x[k] = box[k].lo + (box[k].hi - box[k].lo) * u(rng);
    visit(x);
  }
}

}  // namespace

std::pair<double, double> estimate_curvature(const CostModel& cost,
                                             const std::vector<Interval>& box, int samples,
                                             double safety) {
  if (static_cast<int>(box.size()) != cost.dim())
    throw std::invalid_argument("box dimension mismatch");
  if (samples < 2) throw std::invalid_argument("estimate_curvature needs samples >= 2");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for_each_sample(box, samples, [&](const Vector& x) {
    const Matrix h = cost.hessian(x);
    lo = std::min(lo, min_eigenvalue(h));
    hi = std::max(hi, max_eigenvalue(h));
  });
  const double spread = hi - lo;
  return {lo - safety * spread, hi + safety * spread};
}

std::pair<Matrix, Matrix> hessian_range(const CostModel& cost, const std::vector<Interval>& box,
                                        int samples, double safety) {
  const int n = cost.dim();
  if (static_cast<int>(box.size()) != n) throw std::invalid_argument("box dimension mismatch");
  if (samples < 2) throw std::invalid_argument("hessian_range needs samples >= 2");

  Matrix lo = Matrix::Constant(n, n, std::numeric_limits<double>::infinity());
  Matrix hi = Matrix::Constant(n, n, -std::numeric_limits<double>::infinity());
  auto visit = [&](const Vector& x) {
    const Matrix h = cost.hessian(x);
    lo = lo.cwiseMin(h);
    hi = hi.cwiseMax(h);
  };

  for_each_sample(box, samples, visit);
  const Matrix width = hi - lo;
  return {lo - safety * width, hi + safety * width};
}

}  // namespace pdgd
