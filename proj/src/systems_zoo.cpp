#include "invlim/systems_zoo.hpp"

#include "invlim/random.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace invlim {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

bool quadratic_window(double c) { return c > -0.75 && c < 0.25; }

Eigen::VectorXcd sorted_spectrum(const Mat& m) {
  Eigen::VectorXcd ev = Eigen::EigenSolver<Mat>(m, false).eigenvalues();
  std::vector<std::complex<double>> v(ev.data(), ev.data() + ev.size());
  std::sort(v.begin(), v.end(), [](auto a, auto b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  Eigen::VectorXcd out(static_cast<Eigen::Index>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

Eigen::VectorXcd real_spectrum(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  Eigen::VectorXcd out(static_cast<Eigen::Index>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

std::string fmt_num(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

std::map<std::string, std::string> parse_params(const std::string& s) {
  std::map<std::string, std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto eq = item.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("expected key=value in '" + s + "'");
    out[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return out;
}

double parse_double(const std::string& s) {
  size_t pos = 0;
  double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("bad number '" + s + "'");
  return v;
}

int parse_int(const std::string& s) {
  size_t pos = 0;
  int v = std::stoi(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("bad integer '" + s + "'");
  return v;
}

}  // namespace

double Block::beta() const { return 0.5 * (1.0 + std::sqrt(1.0 - 4.0 * c)); }
double Block::p_minus() const { return 0.5 * (1.0 - std::sqrt(1.0 - 4.0 * c)); }

double Block::core_lo() const {
  switch (kind) {
    case BlockKind::Uniform: return 0.0;
    case BlockKind::Null: return 0.0;
    case BlockKind::Quadratic: return c <= 0.0 ? c : p_minus();
  }
  return 0.0;
}

double Block::core_hi() const {
  switch (kind) {
    case BlockKind::Uniform: return 1.0;
    case BlockKind::Null: return 0.0;
    case BlockKind::Quadratic: return beta();
  }
  return 0.0;
}

Vec Block::piece_point(int k) const {
  if (kind == BlockKind::Quadratic) return Vec::Constant(1, k == 0 ? p_minus() : beta());
  return Vec::Zero(size());
}

std::pair<Vec, Vec> Endomorphism::core_box() const {
  if (known && known->core_lo.size() == dim()) return {known->core_lo, known->core_hi};
  return {space.lower, space.upper};
}

int Endomorphism::derivative_rank(const Vec& x) const {
  Mat d = derivative(x);
  Eigen::JacobiSVD<Mat> svd(d);
  const auto& s = svd.singularValues();
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > 1e-12 * std::max(1.0, s(0))) ++r;
  return r;
}

Endomorphism zoo_torus_linear(const Mat& A) {
  if (A.rows() != A.cols() || A.rows() == 0) throw std::invalid_argument("torus matrix must be square");
  for (Eigen::Index i = 0; i < A.size(); ++i)
    if (A.data()[i] != std::round(A.data()[i])) throw std::invalid_argument("torus matrix must be integer");
  Eigen::VectorXcd ev = sorted_spectrum(A);
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (std::abs(std::abs(ev(i)) - 1.0) <= 1e-8)
      throw std::invalid_argument("torus matrix has an eigenvalue of modulus 1");
  const int d = static_cast<int>(A.rows());
  Endomorphism f;
  std::ostringstream name;
  name << "torus:";
  for (Eigen::Index r = 0; r < A.rows(); ++r)
    for (Eigen::Index c = 0; c < A.cols(); ++c) name << (r || c ? "," : "") << A(r, c);
  f.name = name.str();
  f.space = ModelSpace::torus(d);
  ModelSpace sp = f.space;
  f.eval = [A, sp](const Vec& x) { return sp.reduce(A * x); };
  f.derivative = [A](const Vec&) { return A; };
  KnownData k;
  k.fixed_points = {Vec::Zero(d)};
  k.multipliers = {ev};
  Block b;
  b.kind = BlockKind::Uniform;
  for (int i = 0; i < d; ++i) b.coords.push_back(i);
  b.A = A;
  k.blocks = {b};
  k.core_lo = Vec::Zero(d);
  k.core_hi = Vec::Ones(d);
  k.covering = true;
  k.degree = static_cast<int>(std::llround(std::abs(A.determinant())));
  f.known = k;
  verify_known_data(f);
  return f;
}

Endomorphism zoo_doubling() {
  Endomorphism f = zoo_torus_linear(Mat::Constant(1, 1, 2.0));
  f.name = "doubling";
  return f;
}

Endomorphism zoo_quadratic(double c) {
  if (c > 0.25 || c < -2.0) throw std::invalid_argument("quadratic: no bounded invariant interval for this c");
  Block b;
  b.kind = BlockKind::Quadratic;
  b.coords = {0};
  b.c = c;
  const double beta = b.beta();
  Endomorphism f;
  f.name = "quadratic:c=" + fmt_num(c);
  f.space = ModelSpace::box(Vec::Constant(1, -beta), Vec::Constant(1, beta));
  f.eval = [c](const Vec& x) { return Vec::Constant(1, x(0) * x(0) + c); };
  f.derivative = [](const Vec& x) { return Mat::Constant(1, 1, 2.0 * x(0)); };
  if (quadratic_window(c)) {
    KnownData k;
    const double pm = b.p_minus();
    k.fixed_points = {Vec::Constant(1, pm), Vec::Constant(1, beta)};
    k.multipliers = {real_spectrum({2.0 * pm}), real_spectrum({2.0 * beta})};
    k.blocks = {b};
    k.core_lo = Vec::Constant(1, b.core_lo());
    k.core_hi = Vec::Constant(1, b.core_hi());
    f.known = k;
    verify_known_data(f);
  }
  return f;
}

Endomorphism zoo_delay(int m, int n, double c) {
  if (m < 1 || n < m) throw std::invalid_argument("delay: need 1 <= m <= n");
  if (c > 0.25 || c < -2.0) throw std::invalid_argument("delay: no bounded invariant interval for this c");
  if (m == 1 && n == 1) {
    Endomorphism f = zoo_quadratic(c);
    f.name = "delay:m=1,n=1,c=" + fmt_num(c);
    return f;
  }
  Block q;
  q.kind = BlockKind::Quadratic;
  q.c = c;
  const double beta = q.beta();
  Endomorphism f;
  f.name = "delay:m=" + std::to_string(m) + ",n=" + std::to_string(n) + ",c=" + fmt_num(c);
  f.space = ModelSpace::box(Vec::Constant(n, -beta), Vec::Constant(n, beta));
  f.eval = [m, n, c](const Vec& x) {
    Vec y = Vec::Zero(n);
    y(0) = x(m - 1) * x(m - 1) + c;
    for (int i = 1; i < m; ++i) y(i) = x(i - 1);
    return y;
  };
  f.derivative = [m, n](const Vec& x) {
    Mat d = Mat::Zero(n, n);
    d(0, m - 1) = 2.0 * x(m - 1);
    for (int i = 1; i < m; ++i) d(i, i - 1) = 1.0;
    return d;
  };
  if (quadratic_window(c)) {
    KnownData k;
    for (double p : {q.p_minus(), beta}) {
      Vec fp = Vec::Zero(n);
      fp.head(m).setConstant(p);
      k.fixed_points.push_back(fp);
      k.multipliers.push_back(sorted_spectrum(f.derivative(fp)));
    }
    if (m == 1) {
      q.coords = {0};
      k.blocks.push_back(q);
      for (int i = 1; i < n; ++i) {
        Block z;
        z.kind = BlockKind::Null;
        z.coords = {i};
        k.blocks.push_back(z);
      }
      k.core_lo = Vec::Zero(n);
      k.core_hi = Vec::Zero(n);
      k.core_lo(0) = q.core_lo();
      k.core_hi(0) = q.core_hi();
    } else {
      k.core_lo = Vec::Zero(n);
      k.core_hi = Vec::Zero(n);
      k.core_lo.head(m).setConstant(q.core_lo());
      k.core_hi.head(m).setConstant(beta);
    }
    f.known = k;
    verify_known_data(f);
  }
  return f;
}

Endomorphism zoo_product_squares() {
  Endomorphism f;
  f.name = "product_squares";
  f.space = ModelSpace::box(Vec::Zero(3), Vec::Ones(3));
  f.eval = [](const Vec& x) { return Vec((Vec(3) << x(0) * x(0), x(1) * x(1), 0.0).finished()); };
  f.derivative = [](const Vec& x) {
    Mat d = Mat::Zero(3, 3);
    d(0, 0) = 2.0 * x(0);
    d(1, 1) = 2.0 * x(1);
    return d;
  };
  KnownData k;
  for (double a : {0.0, 1.0})
    for (double b : {0.0, 1.0}) {
      k.fixed_points.push_back((Vec(3) << a, b, 0.0).finished());
      k.multipliers.push_back(real_spectrum({2.0 * a, 2.0 * b, 0.0}));
    }
  Block bx, by, bz;
  bx.kind = by.kind = BlockKind::Quadratic;
  bx.coords = {0};
  by.coords = {1};
  bz.kind = BlockKind::Null;
  bz.coords = {2};
  k.blocks = {bx, by, bz};
  k.core_lo = Vec::Zero(3);
  k.core_hi = (Vec(3) << 1.0, 1.0, 0.0).finished();
  f.known = k;
  verify_known_data(f);
  return f;
}

void verify_known_data(const Endomorphism& f) {
  if (!f.known) return;
  const auto& k = *f.known;
  if (k.multipliers.size() != k.fixed_points.size()) throw std::logic_error(f.name + ": multiplier list mismatch");
  for (size_t i = 0; i < k.fixed_points.size(); ++i) {
    const Vec& p = k.fixed_points[i];
    if (f.space.distance(f(p), p) > 1e-12) throw std::logic_error(f.name + ": known fixed point fails f(p)=p");
    Eigen::VectorXcd ev = sorted_spectrum(f.jacobian(p));
    if (ev.size() != k.multipliers[i].size() || (ev - k.multipliers[i]).cwiseAbs().maxCoeff() > 1e-10)
      throw std::logic_error(f.name + ": known multipliers disagree with Df");
  }
}

Endomorphism zoo_from_name(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string head = spec.substr(0, colon);
  const std::string tail = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (head == "doubling" && tail.empty()) return zoo_doubling();
  if (head == "product_squares" && tail.empty()) return zoo_product_squares();
  if (head == "quadratic") {
    auto p = parse_params(tail.empty() ? "c=0" : tail);
    for (const auto& [key, val] : p)
      if (key != "c") throw std::invalid_argument("quadratic: unknown parameter '" + key + "'");
    return zoo_quadratic(p.count("c") ? parse_double(p["c"]) : 0.0);
  }
  if (head == "delay") {
    auto p = parse_params(tail);
    for (const auto& [key, val] : p)
      if (key != "m" && key != "n" && key != "c") throw std::invalid_argument("delay: unknown parameter '" + key + "'");
    if (!p.count("m") || !p.count("n")) throw std::invalid_argument("delay: need m and n");
    return zoo_delay(parse_int(p["m"]), parse_int(p["n"]), p.count("c") ? parse_double(p["c"]) : 0.0);
  }
  if (head == "torus") {
    std::vector<double> entries;
    std::stringstream ss(tail);
    std::string item;
    while (std::getline(ss, item, ',')) entries.push_back(parse_double(item));
    const int d = static_cast<int>(std::llround(std::sqrt(static_cast<double>(entries.size()))));
    if (d < 1 || d * d != static_cast<int>(entries.size()))
      throw std::invalid_argument("torus: need d*d matrix entries");
    Mat A(d, d);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) A(r, c) = entries[static_cast<size_t>(r * d + c)];
    return zoo_torus_linear(A);
  }
  throw std::invalid_argument("unknown system '" + spec + "'");
}

std::vector<std::pair<std::string, std::string>> zoo_catalog() {
  return {
      {"doubling", "circle map x -> 2x mod 1; one piece, expansion 2"},
      {"quadratic:c=<c>", "x -> x^2 + c on [-beta, beta]; template for -3/4 < c < 1/4"},
      {"delay:m=<m>,n=<n>,c=<c>", "(x_i) -> (x_m^2 + c, x_1, ..., x_{m-1}, 0, ..., 0); template for m = 1"},
      {"product_squares", "(x, y, z) -> (x^2, y^2, 0) on [0,1]^3; four fixed points"},
      {"torus:<a11>,<a12>,...", "x -> A x mod 1 for an integer matrix A without unit-modulus eigenvalues"},
  };
}

double derivative_check(const Endomorphism& f, int points, double h, std::uint64_t seed) {
  Rng rng(seed);
  const int d = f.dim();
  double worst = 0.0;
  for (int k = 0; k < points; ++k) {
    Vec x(d);
    for (int i = 0; i < d; ++i) x(i) = uniform(rng, f.space.lower(i) + h, f.space.upper(i) - h);
    Mat an = f.jacobian(x);
    for (int i = 0; i < d; ++i) {
      Vec xp = x, xm = x;
      xp(i) += h;
      xm(i) -= h;
      Vec col = f.space.log(f(xm), f(xp)) / (2.0 * h);
      worst = std::max(worst, (col - an.col(i)).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

Endomorphism PerturbationFamily::at(double eps) const {
  validate(eps);
  Endomorphism g;
  g.name = base.name + "+" + kind + "(" + fmt_num(eps) + ")";
  g.space = base.space;
  auto p = perturb;
  auto pd = perturb_derivative;
  g.eval = [p, eps](const Vec& x) { return p(x, eps); };
  g.derivative = [pd, eps](const Vec& x) { return pd(x, eps); };
  g.smoothness = base.smoothness;
  return g;
}

double PerturbationFamily::c1_size(double eps, int points, std::uint64_t seed) const {
  Rng rng(seed);
  auto [lo, hi] = base.core_box();
  double c0 = 0.0, c1 = 0.0;
  for (int k = 0; k < points; ++k) {
    Vec x(lo.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = uniform(rng, lo(i), hi(i));
    c0 = std::max(c0, base.space.log(base(x), perturb(x, eps)).cwiseAbs().maxCoeff());
    Mat dd = perturb_derivative(x, eps) - base.jacobian(x);
    c1 = std::max(c1, Eigen::JacobiSVD<Mat>(dd).singularValues()(0));
  }
  return std::max(c0, c1);
}

PerturbationFamily perturb_translation(const Endomorphism& base, const Vec& direction) {
  if (direction.size() != base.dim()) throw std::invalid_argument("translation direction has wrong dimension");
  PerturbationFamily fam;
  fam.base = base;
  fam.kind = "translation";
  const ModelSpace sp = base.space;
  auto f = base.eval;
  auto df = base.derivative;
  fam.perturb = [f, sp, direction](const Vec& x, double eps) {
    Vec y = f(x) + eps * direction;
    return sp.periodic() ? sp.reduce(y) : y;
  };
  fam.perturb_derivative = [df](const Vec& x, double) { return df(x); };
  std::vector<Block> blocks = base.has_template() ? base.known->blocks : std::vector<Block>{};
  fam.validate = [blocks, direction](double eps) {
    for (const auto& b : blocks) {
      if (b.kind != BlockKind::Quadratic) continue;
      const double cc = b.c + eps * direction(b.coords[0]);
      if (!quadratic_window(cc)) throw std::invalid_argument("epsilon too large for invariant region");
    }
  };
  return fam;
}

PerturbationFamily perturb_fourier(const Endomorphism& base, int k) {
  PerturbationFamily fam;
  fam.base = base;
  fam.kind = "fourier";
  const ModelSpace sp = base.space;
  auto f = base.eval;
  auto df = base.derivative;
  const double w = kTwoPi * k;
  fam.perturb = [f, sp, w](const Vec& x, double eps) {
    Vec y = f(x);
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += eps * std::sin(w * x(i));
    return sp.periodic() ? sp.reduce(y) : y;
  };
  fam.perturb_derivative = [df, w](const Vec& x, double eps) {
    Mat d = df(x);
    for (Eigen::Index i = 0; i < x.size(); ++i) d(i, i) += eps * w * std::cos(w * x(i));
    return d;
  };
  std::vector<Block> blocks = base.has_template() ? base.known->blocks : std::vector<Block>{};
  fam.validate = [blocks, w](double eps) {
    if (std::abs(eps) * w >= 0.5) throw std::invalid_argument("epsilon too large for invariant region");
    for (const auto& b : blocks)
      if (b.kind == BlockKind::Quadratic && std::abs(eps) >= std::min(0.25 - b.c, b.c + 0.75))
        throw std::invalid_argument("epsilon too large for invariant region");
  };
  return fam;
}

}  // namespace invlim
