#include "pdgd/block_sdp.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <tuple>
#include <ostream>
#include <sstream>

namespace pdgd {

SdpBlock SdpBlock::from_affine(std::string name, const AffineMatrix& m) {
  if (m.rows() != m.cols()) throw DimensionMismatch("block " + name + " is not square");
  SdpBlock b;
  b.name = std::move(name);
  b.dim = m.rows();
  b.constant = Matrix::Zero(b.dim, b.dim);
  for (int i = 0; i < b.dim; ++i)
    for (int j = i; j < b.dim; ++j) {
      const LinExpr& e = m(i, j);
      const LinExpr& t = m(j, i);
      if (i != j) {
        bool same = e.terms.size() == t.terms.size() &&
                    std::abs(e.constant - t.constant) <= 1e-12 * (1.0 + std::abs(e.constant));
        for (std::size_t k = 0; same && k < e.terms.size(); ++k)
          same = e.terms[k].first == t.terms[k].first &&
                 std::abs(e.terms[k].second - t.terms[k].second) <=
                     1e-12 * (1.0 + std::abs(e.terms[k].second));
        if (!same)
          throw DimensionMismatch("block " + b.name + " is not symmetric at (" +
                                  std::to_string(i) + "," + std::to_string(j) + ")");
      }
      b.constant(i, j) = e.constant;
      b.constant(j, i) = e.constant;
      for (const auto& [a, c] : e.terms) b.coefficients.push_back({a, i, j, c});
    }
  std::sort(b.coefficients.begin(), b.coefficients.end(), [](const auto& l, const auto& r) {
    return std::tie(l.var, l.row, l.col) < std::tie(r.var, r.row, r.col);
  });
  return b;
}

Matrix SdpBlock::evaluate(const Vector& y) const {
  Matrix f = constant;
  for (const auto& c : coefficients) {
    const double v = c.value * y[c.var];
    f(c.row, c.col) += v;
    if (c.row != c.col) f(c.col, c.row) += v;
  }
  return f;
}

Matrix SdpBlock::coefficient_matrix(int var) const {
  Matrix f = Matrix::Zero(dim, dim);
  for (const auto& c : coefficients)
    if (c.var == var) {
      f(c.row, c.col) += c.value;
      if (c.row != c.col) f(c.col, c.row) += c.value;
    }
  return f;
}

double SdpBlock::max_abs_entry() const {
  double m = constant.size() ? constant.cwiseAbs().maxCoeff() : 0.0;
  for (const auto& c : coefficients) m = std::max(m, std::abs(c.value));
  return m;
}

void SdpBlock::apply_scale(double s) {
  constant *= s;
  for (auto& c : coefficients) c.value *= s;
  scale *= s;
}

bool BlockSdp::has_objective() const {
  return objective.size() > 0 && objective.cwiseAbs().maxCoeff() > 0.0;
}

int BlockSdp::add_variable(std::string name) {
  var_names.push_back(std::move(name));
  if (objective.size() > 0) objective.conservativeResize(num_vars + 1), objective[num_vars] = 0.0;
  return num_vars++;
}

void BlockSdp::normalize_scales(const std::vector<std::vector<int>>& groups) {
  std::vector<int> group_of(blocks.size(), -1);
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (int b : groups[g]) group_of[b] = static_cast<int>(g);
  std::vector<double> group_max(groups.size(), 0.0);
  for (std::size_t b = 0; b < blocks.size(); ++b)
    if (group_of[b] >= 0)
      group_max[group_of[b]] = std::max(group_max[group_of[b]], blocks[b].max_abs_entry());
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const double m = group_of[b] >= 0 ? group_max[group_of[b]] : blocks[b].max_abs_entry();
    if (m > 0.0) blocks[b].apply_scale(1.0 / m);
  }
}

void write_sparse(std::ostream& out, const BlockSdp& sdp) {
  const auto old = out.precision(17);
  out << "# pdgd block-sdp\n";
  out << "format_version " << kBlockSdpFormatVersion << "\n";
  out << "vars " << sdp.num_vars << "\n";
  out << "margin " << sdp.margin << "\n";
  for (int a = 0; a < sdp.objective.size(); ++a)
    if (sdp.objective[a] != 0.0) out << "objective " << a + 1 << " " << sdp.objective[a] << "\n";
  for (std::size_t b = 0; b < sdp.blocks.size(); ++b) {
    const SdpBlock& blk = sdp.blocks[b];
    out << "block " << b << " " << blk.dim << " " << blk.scale << " "
        << (blk.name.empty() ? "-" : blk.name) << "\n";
    for (int i = 0; i < blk.dim; ++i)
      for (int j = i; j < blk.dim; ++j)
        if (blk.constant(i, j) != 0.0)
          out << "entry " << b << " 0 " << i << " " << j << " " << blk.constant(i, j) << "\n";
    for (const auto& c : blk.coefficients)
      out << "entry " << b << " " << c.var + 1 << " " << c.row << " " << c.col << " " << c.value
          << "\n";
  }
  out.precision(old);
}

BlockSdp read_sparse(std::istream& in) {
  BlockSdp sdp;
  std::string line;
  int lineno = 0;
  bool have_version = false;
  auto fail = [&](const std::string& msg) {
    throw SdpFormatError("line " + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "format_version") {
      int v = 0;
      if (!(ss >> v) || v != kBlockSdpFormatVersion) fail("unsupported format_version");
      have_version = true;
    } else if (key == "vars") {
      if (!(ss >> sdp.num_vars) || sdp.num_vars < 0) fail("bad vars record");
      sdp.var_names.assign(sdp.num_vars, "");
      for (int a = 0; a < sdp.num_vars; ++a) sdp.var_names[a] = "y" + std::to_string(a + 1);
    } else if (key == "margin") {
      if (!(ss >> sdp.margin)) fail("bad margin record");
    } else if (key == "objective") {
      int a = 0;
      double v = 0.0;
      if (!(ss >> a >> v) || a < 1 || a > sdp.num_vars) fail("bad objective record");
      if (sdp.objective.size() == 0) sdp.objective = Vector::Zero(sdp.num_vars);
      sdp.objective[a - 1] = v;
    } else if (key == "block") {
      int b = 0;
      SdpBlock blk;
      if (!(ss >> b >> blk.dim >> blk.scale >> blk.name)) fail("bad block record");
      if (b != static_cast<int>(sdp.blocks.size())) fail("blocks must be numbered in order");
      if (blk.dim <= 0) fail("block dimension must be positive");
      if (blk.name == "-") blk.name.clear();
      blk.constant = Matrix::Zero(blk.dim, blk.dim);
      sdp.blocks.push_back(std::move(blk));
    } else if (key == "entry") {
      int b = 0, a = 0, i = 0, j = 0;
      double v = 0.0;
      if (!(ss >> b >> a >> i >> j >> v)) fail("bad entry record");
      if (b < 0 || b >= static_cast<int>(sdp.blocks.size())) fail("entry for unknown block");
      SdpBlock& blk = sdp.blocks[b];
      if (a < 0 || a > sdp.num_vars) fail("entry variable out of range");
      if (i < 0 || j < i || j >= blk.dim) fail("entry must satisfy 0 <= row <= col < dim");
      if (a == 0) {
        blk.constant(i, j) = v;
        blk.constant(j, i) = v;
      } else {
        blk.coefficients.push_back({a - 1, i, j, v});
      }
    } else {
      fail("unknown record '" + key + "'");
    }
  }
  if (!have_version) throw SdpFormatError("missing format_version");
  for (auto& blk : sdp.blocks)
    std::sort(blk.coefficients.begin(), blk.coefficients.end(), [](const auto& l, const auto& r) {
      return std::tie(l.var, l.row, l.col) < std::tie(r.var, r.row, r.col);
    });
  return sdp;
}

std::vector<double> block_margins(const BlockSdp& sdp, const Vector& y) {
  if (y.size() != sdp.num_vars) throw DimensionMismatch("y has the wrong dimension");
  std::vector<double> m;
  m.reserve(sdp.blocks.size());
  for (const auto& blk : sdp.blocks) m.push_back(min_eigenvalue(blk.evaluate(y)));
  return m;
}

}  // namespace pdgd
