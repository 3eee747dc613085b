#include "invlim/phase_space.hpp"

#include <json.hpp>

#include <cstdio>
#include <sstream>

namespace invlim {

ModelSpace ModelSpace::circle() {
  ModelSpace s;
  s.kind = SpaceKind::Circle;
  s.dim = 1;
  s.lower = Vec::Zero(1);
  s.upper = Vec::Ones(1);
  return s;
}

ModelSpace ModelSpace::torus(int d) {
  if (d < 1) throw std::invalid_argument("torus dimension must be positive");
  ModelSpace s;
  s.kind = d == 1 ? SpaceKind::Circle : SpaceKind::Torus;
  s.dim = d;
  s.lower = Vec::Zero(d);
  s.upper = Vec::Ones(d);
  return s;
}

ModelSpace ModelSpace::box(const Vec& lo, const Vec& hi) {
  if (lo.size() != hi.size() || lo.size() == 0) throw std::invalid_argument("box bounds mismatch");
  if ((hi - lo).minCoeff() < 0.0) throw std::invalid_argument("box bounds reversed");
  ModelSpace s;
  s.kind = SpaceKind::Box;
  s.dim = static_cast<int>(lo.size());
  s.lower = lo;
  s.upper = hi;
  return s;
}

double ModelSpace::diameter() const {
  if (periodic()) return 0.5;
  return (upper - lower).maxCoeff();
}

std::string ModelSpace::describe() const {
  switch (kind) {
    case SpaceKind::Circle: return "circle";
    case SpaceKind::Torus: return "torus(" + std::to_string(dim) + ")";
    case SpaceKind::Box: return "box(" + std::to_string(dim) + ")";
  }
  return "unknown";
}

Vec ModelSpace::reduce(const Vec& x) const {
  if (!periodic()) return x;
  Vec r = x;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    r(i) -= std::floor(r(i));
    if (r(i) >= 1.0) r(i) -= 1.0;
  }
  return r;
}

Vec ModelSpace::exp(const Vec& x, const Vec& v) const { return reduce(x + v); }

Vec ModelSpace::log(const Vec& x, const Vec& y) const {
  Vec d = y - x;
  if (periodic())
    for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = wrap_half(d(i));
  return d;
}

bool ModelSpace::contains(const Vec& x, double tol) const {
  if (x.size() != dim) return false;
  if (periodic()) return true;
  for (int i = 0; i < dim; ++i)
    if (x(i) < lower(i) - tol || x(i) > upper(i) + tol) return false;
  return true;
}

bool ModelSpace::operator==(const ModelSpace& o) const {
  return kind == o.kind && dim == o.dim && lower == o.lower && upper == o.upper;
}

MetricValue d1(const OrbitWindow& a, const OrbitWindow& b) {
  if (a.space != b.space) throw std::invalid_argument("d1: mismatched model spaces");
  MetricValue m = d1_columns(a.space, a.coords, a.Kb, b.coords, b.Kb);
  const int kb = std::min(a.Kb, b.Kb), kf = std::min(a.Kf, b.Kf);
  const double diam = a.space.diameter();
  m.tail_bound = 2.0 * (diam / std::ldexp(1.0, kb) + diam / std::ldexp(1.0, kf));
  return m;
}

SupValue d_inf(const OrbitWindow& a, const OrbitWindow& b) {
  if (a.space != b.space) throw std::invalid_argument("d_inf: mismatched model spaces");
  return dinf_columns(a.space, a.coords, a.Kb, b.coords, b.Kb);
}

OrbitWindow shift(const OrbitWindow& a, int k) {
  const int ak = std::abs(k);
  if (ak >= std::min(a.Kb, a.Kf)) throw std::invalid_argument("shift: window too short");
  OrbitWindow r;
  r.space = a.space;
  r.Kb = a.Kb - ak;
  r.Kf = a.Kf - ak;
  r.coords.resize(a.coords.rows(), r.Kb + r.Kf + 1);
  for (int n = -r.Kb; n <= r.Kf; ++n) r.coords.col(n + r.Kb) = a.at(n + k);
  r.residual = a.residual;
  const double diam = a.space.diameter();
  r.tail_bound = diam / std::ldexp(1.0, r.Kb) + diam / std::ldexp(1.0, r.Kf);
  return r;
}

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

OrbitWindow from_rows(const std::vector<std::vector<double>>& rows, const ModelSpace& space) {
  if (rows.empty()) throw std::invalid_argument("empty window");
  OrbitWindow w;
  w.space = space;
  const int first = static_cast<int>(rows.front().at(0));
  w.Kb = -first;
  w.Kf = static_cast<int>(rows.size()) - w.Kb - 1;
  w.coords.resize(space.dim, static_cast<Eigen::Index>(rows.size()));
  for (size_t k = 0; k < rows.size(); ++k) {
    if (static_cast<int>(rows[k].size()) != space.dim + 1) throw std::invalid_argument("window row has wrong width");
    if (static_cast<int>(rows[k][0]) != first + static_cast<int>(k)) throw std::invalid_argument("window indices not contiguous");
    for (int i = 0; i < space.dim; ++i) w.coords(i, static_cast<Eigen::Index>(k)) = rows[k][i + 1];
  }
  const double diam = space.diameter();
  w.tail_bound = diam / std::ldexp(1.0, w.Kb) + diam / std::ldexp(1.0, w.Kf);
  return w;
}

}  // namespace

std::string window_to_csv(const OrbitWindow& w) {
  std::ostringstream os;
  os << "n";
  for (Eigen::Index i = 0; i < w.coords.rows(); ++i) os << ",x" << i + 1;
  os << "\n";
  for (int n = -w.Kb; n <= w.Kf; ++n) {
    os << n;
    for (Eigen::Index i = 0; i < w.coords.rows(); ++i) os << "," << fmt17(w.at(n)(i));
    os << "\n";
  }
  return os.str();
}

std::string window_to_json(const OrbitWindow& w) {
  std::ostringstream os;
  os << "[";
  for (int n = -w.Kb; n <= w.Kf; ++n) {
    if (n > -w.Kb) os << ",";
    os << "[" << n;
    for (Eigen::Index i = 0; i < w.coords.rows(); ++i) os << "," << fmt17(w.at(n)(i));
    os << "]";
  }
  os << "]";
  return os.str();
}

OrbitWindow window_from_json(const std::string& text, const ModelSpace& space) {
  auto j = nlohmann::json::parse(text);
  return from_rows(j.get<std::vector<std::vector<double>>>(), space);
}

OrbitWindow window_from_csv(const std::string& text, const ModelSpace& space) {
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);  // header
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  return from_rows(rows, space);
}

Subspaced embed_blocks(int ambient, const std::vector<std::pair<std::vector<int>, const Subspaced*>>& parts) {
  int total = 0;
  for (const auto& [idx, sub] : parts) total += sub->dim();
  Mat b = Mat::Zero(ambient, total);
  int col = 0;
  for (const auto& [idx, sub] : parts) {
    for (int c = 0; c < sub->dim(); ++c, ++col)
      for (size_t r = 0; r < idx.size(); ++r) b(idx[r], col) = sub->basis()(static_cast<Eigen::Index>(r), c);
  }
  if (total == 0) return Subspaced::zero(ambient);
  return Subspaced(b);
}

}  // namespace invlim
