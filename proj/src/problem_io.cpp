#include "pdgd/problem_io.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace pdgd {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw SchemaError(path + ": " + what);
}

void reject_unknown(const json& obj, const std::string& path, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) fail(path, "expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) fail(path, "unknown key '" + it.key() + "'");
  }
}

const json& require(const json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(path, std::string("missing key '") + key + "'");
  return *it;
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

int integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<int>();
}

}  // namespace

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected a row-major array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  Eigen::Index cols = -1;
  for (const auto& row : j) {
    if (!row.is_array()) fail(path, "expected a row-major array of rows");
    if (cols < 0) cols = static_cast<Eigen::Index>(row.size());
    if (static_cast<Eigen::Index>(row.size()) != cols) fail(path, "ragged matrix rows");
  }
  Matrix m(rows, std::max<Eigen::Index>(cols, 0));
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = number(j[r][c], path + "[" + std::to_string(r) + "][" + std::to_string(c) + "]");
  return m;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Vector vector_from_json(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[i] = number(j[i], path + "[" + std::to_string(i) + "]");
  return v;
}

namespace {

CostModel parse_cost(const json& c, int n, const std::string& path) {
  reject_unknown(c, path, {"form", "H", "g", "c", "params", "class"});
  const json& form_j = require(c, "form", path);
  if (!form_j.is_string()) fail(path + ".form", "expected a string");
  const std::string form = form_j.get<std::string>();
  if (form == "quadratic") {
    if (c.contains("params")) fail(path, "quadratic cost takes H, g, c rather than params");
    Matrix H = matrix_from_json(require(c, "H", path), path + ".H");
    Vector g = c.contains("g") ? vector_from_json(c["g"], path + ".g") : Vector::Zero(n);
    double k = c.contains("c") ? number(c["c"], path + ".c") : 0.0;
    if (H.rows() != n || H.cols() != n || g.size() != n) fail(path, "H and g must match n");
    if (c.contains("class") && c["class"] != "quadratic")
      fail(path + ".class", "quadratic forms are always class 'quadratic'");
    return CostModel::quadratic(std::move(H), std::move(g), k);
  }
  for (const char* key : {"H", "g", "c"})
    if (c.contains(key)) fail(path, std::string("key '") + key + "' only applies to quadratic costs");
  std::map<std::string, double> params;
  if (c.contains("params")) {
    const json& pj = c["params"];
    if (!pj.is_object()) fail(path + ".params", "expected an object");
    for (auto it = pj.begin(); it != pj.end(); ++it)
      params[it.key()] = number(it.value(), path + ".params." + it.key());
  }
  CostKind kind = CostKind::PolytopicHessian;
  if (c.contains("class")) {
    if (!c["class"].is_string()) fail(path + ".class", "expected a string");
    try {
      kind = cost_kind_from_string(c["class"].get<std::string>());
    } catch (const std::invalid_argument& e) {
      fail(path + ".class", e.what());
    }
    if (kind == CostKind::Quadratic) fail(path + ".class", "non-quadratic form cannot be class 'quadratic'");
  }
  try {
    return CostModel::separable(catalog_form(form, params), n, kind);
  } catch (const std::invalid_argument& e) {
    fail(path, e.what());
  }
}

}  // namespace

Problem problem_from_json(const json& doc) {
  reject_unknown(doc, "$", {"format_version", "name", "agents", "A", "b"});
  if (doc.contains("format_version") && integer(doc["format_version"], "$.format_version") != kProblemFormatVersion)
    fail("$.format_version", "unsupported version");
  Problem p;
  if (doc.contains("name")) p.name = doc["name"].get<std::string>();

  const json& agents = require(doc, "agents", "$");
  if (!agents.is_array()) fail("$.agents", "expected an array");
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const std::string path = "$.agents[" + std::to_string(i) + "]";
    const json& a = agents[i];
    reject_unknown(a, path, {"n", "m", "cost", "mu", "ell", "box", "estimate_curvature", "curvature_estimated"});
    const int n = integer(require(a, "n", path), path + ".n");
    const int m = a.contains("m") ? integer(a["m"], path + ".m") : 0;
    if (n < 1) fail(path + ".n", "must be positive");
    if (m < 0) fail(path + ".m", "must be non-negative");
    CostModel cost = parse_cost(require(a, "cost", path), n, path + ".cost");
    if (a.contains("box")) {
      const json& bj = a["box"];
      if (!bj.is_array() || static_cast<int>(bj.size()) != n) fail(path + ".box", "expected n intervals");
      std::vector<Interval> box;
      for (std::size_t k = 0; k < bj.size(); ++k) {
        const std::string bp = path + ".box[" + std::to_string(k) + "]";
        if (!bj[k].is_array() || bj[k].size() != 2) fail(bp, "expected [lo, hi]");
        Interval iv{number(bj[k][0], bp), number(bj[k][1], bp)};
        if (!(iv.lo < iv.hi)) fail(bp, "lo must be below hi");
        box.push_back(iv);
      }
      cost.set_box(std::move(box));
    }
    const bool estimate = a.contains("estimate_curvature") && a["estimate_curvature"].get<bool>();
    if (estimate && (a.contains("mu") || a.contains("ell")))
      fail(path, "mu/ell overrides and estimate_curvature are mutually exclusive");
    if (estimate) {
      auto [mu, ell] = estimate_curvature(cost, cost.box(), 2001, 0.05);
      cost.set_curvature(mu, ell, true);
    } else if (a.contains("mu") || a.contains("ell")) {
      const double mu = a.contains("mu") ? number(a["mu"], path + ".mu") : cost.mu();
      const double ell = a.contains("ell") ? number(a["ell"], path + ".ell") : cost.ell();
      const bool flagged = a.contains("curvature_estimated") && a["curvature_estimated"].get<bool>();
      cost.set_curvature(mu, ell, flagged);
    }
    p.primal_dims.push_back(n);
    p.dual_dims.push_back(m);
    p.costs.push_back(std::move(cost));
  }

  const json& A = require(doc, "A", "$");
  if (!A.is_array()) fail("$.A", "expected an array of block rows");
  for (std::size_t i = 0; i < A.size(); ++i) {
    const std::string path = "$.A[" + std::to_string(i) + "]";
    if (!A[i].is_array()) fail(path, "expected an array of blocks");
    std::vector<Matrix> row;
    for (std::size_t j = 0; j < A[i].size(); ++j) {
      const std::string bp = path + "[" + std::to_string(j) + "]";
      Matrix blk = matrix_from_json(A[i][j], bp);
      // an empty list denotes a zero block of the implied shape
      if (blk.size() == 0 && i < p.dual_dims.size() && j < p.primal_dims.size())
        blk = Matrix::Zero(p.dual_dims[i], p.primal_dims[j]);
      row.push_back(std::move(blk));
    }
    p.blocks.push_back(std::move(row));
  }
  const json& b = require(doc, "b", "$");
  if (!b.is_array()) fail("$.b", "expected an array of blocks");
  for (std::size_t i = 0; i < b.size(); ++i) p.rhs.push_back(vector_from_json(b[i], "$.b[" + std::to_string(i) + "]"));
  return p;
}

Problem load_problem(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path.string() + ": cannot open file");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
  try {
    Problem p = problem_from_json(doc);
    if (p.name.empty()) p.name = path.stem().string();
    return p;
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

json problem_to_json(const Problem& p) {
  json doc;
  doc["format_version"] = kProblemFormatVersion;
  doc["name"] = p.name;
  json agents = json::array();
  for (int i = 0; i < p.agents(); ++i) {
    const CostModel& c = p.costs[i];
    json a;
    a["n"] = p.primal_dims[i];
    a["m"] = p.dual_dims[i];
    json cj;
    cj["form"] = c.form_name();
    if (c.form_name() == "quadratic") {
      cj["H"] = matrix_to_json(c.quadratic_H());
      cj["g"] = vector_to_json(c.quadratic_g());
      cj["c"] = c.quadratic_c();
    } else {
      cj["params"] = c.form_params();
      cj["class"] = to_string(c.kind());
    }
    a["cost"] = cj;
    a["mu"] = c.mu();
    a["ell"] = c.ell();
    json box = json::array();
    for (const auto& iv : c.box()) box.push_back({iv.lo, iv.hi});
    a["box"] = box;
    if (c.curvature_estimated()) a["curvature_estimated"] = true;
    agents.push_back(a);
  }
  doc["agents"] = agents;
  json A = json::array();
  for (const auto& row : p.blocks) {
    json r = json::array();
    for (const auto& blk : row) r.push_back(matrix_to_json(blk));
    A.push_back(r);
  }
  doc["A"] = A;
  json b = json::array();
  for (const auto& v : p.rhs) b.push_back(vector_to_json(v));
  doc["b"] = b;
  return doc;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string problem_hash(const Problem& p) { return fnv1a_hex(problem_to_json(p).dump()); }

}  // namespace pdgd
