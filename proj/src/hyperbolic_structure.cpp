#include "invlim/hyperbolic_structure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace invlim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Mat power_derivative(const Endomorphism& f, Vec x, int steps) {
  Mat P = Mat::Identity(f.dim(), f.dim());
  for (int k = 0; k < steps; ++k) {
    P = f.jacobian(x) * P;
    x = f(x);
  }
  return P;
}

Vec iterate(const Endomorphism& f, Vec x, int steps) {
  for (int k = 0; k < steps; ++k) x = f(x);
  return x;
}

int count_unstable(const Eigen::VectorXcd& mult) {
  int u = 0;
  for (Eigen::Index i = 0; i < mult.size(); ++i)
    if (std::abs(mult(i)) > 1.0) ++u;
  return u;
}

Eigen::VectorXcd spectrum(const Mat& m) { return Eigen::EigenSolver<Mat>(m, false).eigenvalues(); }

/// Real spanning vectors of the eigenspaces with modulus above 1.
std::vector<Vec> unstable_directions(const Mat& m) {
  Eigen::EigenSolver<Mat> es(m);
  std::vector<Vec> out;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    if (std::abs(es.eigenvalues()(i)) <= 1.0) continue;
    Vec re = es.eigenvectors().col(i).real();
    Vec im = es.eigenvectors().col(i).imag();
    if (re.norm() > 1e-12) out.push_back(re.normalized());
    if (es.eigenvalues()(i).imag() > 0.0 && im.norm() > 1e-12) out.push_back(im.normalized());
  }
  return out;
}

std::vector<Vec> grid_points(const Vec& lo, const Vec& hi, int per_axis_target, int total_cap) {
  const int d = static_cast<int>(lo.size());
  int live = 0;
  for (int i = 0; i < d; ++i)
    if (hi(i) > lo(i)) ++live;
  int n = per_axis_target;
  if (live > 0) n = std::max(2, std::min(per_axis_target, static_cast<int>(std::floor(std::pow(total_cap, 1.0 / live)))));
  std::vector<int> counts(static_cast<size_t>(d));
  for (int i = 0; i < d; ++i) counts[static_cast<size_t>(i)] = hi(i) > lo(i) ? n : 1;
  std::vector<Vec> out;
  std::vector<int> digit(static_cast<size_t>(d), 0);
  while (true) {
    Vec x(d);
    for (int i = 0; i < d; ++i) {
      const int c = counts[static_cast<size_t>(i)];
      x(i) = c == 1 ? lo(i) : lo(i) + (hi(i) - lo(i)) * digit[static_cast<size_t>(i)] / (c - 1);
    }
    out.push_back(x);
    int i = d - 1;
    while (i >= 0 && ++digit[static_cast<size_t>(i)] == counts[static_cast<size_t>(i)]) {
      digit[static_cast<size_t>(i)] = 0;
      --i;
    }
    if (i < 0) break;
  }
  return out;
}

nlohmann::json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

nlohmann::json box_json(const Box& b) {
  auto side = [](double v) -> nlohmann::json {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
  };
  nlohmann::json lo = nlohmann::json::array(), hi = nlohmann::json::array();
  for (Eigen::Index i = 0; i < b.lo.size(); ++i) {
    lo.push_back(side(b.lo(i)));
    hi.push_back(side(b.hi(i)));
  }
  return {{"lo", lo}, {"hi", hi}};
}

}  // namespace

MaskLevels quadratic_mask_levels(const Block& b, double rho) {
  MaskLevels m;
  m.a = b.beta() - rho;
  m.w = m.a * m.a + b.c + 0.01;
  m.mid = 0.5 * (m.a + m.w);
  return m;
}

int PeriodicOrbit::unstable_dim() const { return count_unstable(multipliers); }

PeriodicSearch find_periodic(const Endomorphism& f, int period, int grid, const std::vector<Vec>& extra_seeds) {
  if (period < 1 || period > 12) throw std::invalid_argument("find_periodic: period must lie in [1, 12]");
  auto [lo, hi] = f.core_box();
  std::vector<Vec> seeds = grid_points(lo, hi, grid, 20000);
  if (f.space.periodic())
    for (auto& s : seeds) s = f.space.reduce(s);
  seeds.insert(seeds.end(), extra_seeds.begin(), extra_seeds.end());
  PeriodicSearch out;
  out.seeds = static_cast<int>(seeds.size());
  const int d = f.dim();
  auto known = [&](const Vec& x) {
    for (const auto& o : out.orbits)
      for (const auto& p : o.points)
        if (f.space.distance(p, x) < 1e-8) return true;
    return false;
  };
  for (const Vec& seed : seeds) {
    Vec x = seed;
    bool ok = false;
    double res = kInf;
    for (int it = 0; it < 60; ++it) {
      Vec fx = iterate(f, x, period);
      if (!f.space.contains(fx, 1e-9)) break;
      Vec F = f.space.log(x, fx);
      res = F.cwiseAbs().maxCoeff();
      if (!std::isfinite(res)) break;
      if (res <= 1e-12) {
        ok = true;
        break;
      }
      Mat J = power_derivative(f, x, period) - Mat::Identity(d, d);
      Vec step = J.completeOrthogonalDecomposition().solve(F);
      x = f.space.periodic() ? f.space.reduce(x - step) : Vec(x - step);
      if (!f.space.contains(x, 1e-9)) break;
    }
    if (!ok) {
      ++out.failures;
      continue;
    }
    bool lower = false;
    for (int q = 1; q < period && !lower; ++q)
      if (period % q == 0 && f.space.distance(iterate(f, x, q), x) < 1e-8) lower = true;
    if (lower || known(x)) continue;
    PeriodicOrbit o;
    o.period = period;
    o.residual = res;
    Vec y = x;
    for (int k = 0; k < period; ++k) {
      o.points.push_back(y);
      y = f(y);
    }
    o.multipliers = spectrum(power_derivative(f, x, period));
    out.orbits.push_back(std::move(o));
  }
  std::sort(out.orbits.begin(), out.orbits.end(), [](const PeriodicOrbit& a, const PeriodicOrbit& b) {
    for (Eigen::Index i = 0; i < a.points[0].size(); ++i)
      if (a.points[0](i) != b.points[0](i)) return a.points[0](i) < b.points[0](i);
    return false;
  });
  return out;
}

ConeResult cone_iterate_unstable(const Endomorphism& f, const OrbitWindow& window, const Subspaced& seed, int iters) {
  if (iters < 1 || iters > window.Kb) throw std::invalid_argument("cone_iterate_unstable: window past shorter than iters");
  if (seed.ambient() != f.dim()) throw std::invalid_argument("cone_iterate_unstable: seed has wrong ambient dimension");
  ConeResult r;
  Subspaced E = seed;
  if (E.dim() == 0) {
    r.subspace = E;
    r.increments.assign(static_cast<size_t>(iters), 0.0);
    return r;
  }
  for (int n = -iters; n < 0; ++n) {
    Subspaced next = image<double>(f.jacobian(Vec(window.at(n))), E);
    r.increments.push_back(grassmann_distance(E, next));
    E = next;
  }
  r.subspace = E;
  r.increment = r.increments.back();
  return r;
}

HyperbolicSplitting periodic_splitting(const Endomorphism& f, const std::vector<PeriodicOrbit>& orbits, int rate_steps) {
  HyperbolicSplitting out;
  out.min_angle = M_PI / 2;
  const int d = f.dim();
  for (const auto& o : orbits) {
    const int p = o.period;
    const int m = p * ((rate_steps + p - 1) / p);
    const int u = o.unstable_dim();
    std::vector<Subspaced> Eu(static_cast<size_t>(p)), Es(static_cast<size_t>(p));
    for (int k = 0; k < p; ++k) {
      const Vec& x = o.points[static_cast<size_t>(k)];
      Mat P = power_derivative(f, x, m);
      const double scale = std::max(P.norm(), 1e-300);
      Eigen::JacobiSVD<Mat> svd(P / scale, Eigen::ComputeFullU | Eigen::ComputeFullV);
      Es[static_cast<size_t>(k)] = u == d ? Subspaced::zero(d) : Subspaced(Mat(svd.matrixV().rightCols(d - u)));
      if (u == 0) {
        Eu[static_cast<size_t>(k)] = Subspaced::zero(d);
        continue;
      }
      const int iters = 60 * std::max(1, 8 / p + 1);
      OrbitWindow w;
      w.space = f.space;
      w.Kb = iters;
      w.Kf = 0;
      w.coords.resize(d, iters + 1);
      for (int n = -iters; n <= 0; ++n) w.coords.col(n + iters) = o.points[static_cast<size_t>(((k + n) % p + p) % p)];
      Eu[static_cast<size_t>(k)] = cone_iterate_unstable(f, w, Subspaced(Mat(svd.matrixU().leftCols(u))), iters).subspace;
    }
    for (int k = 0; k < p; ++k) {
      const Vec& x = o.points[static_cast<size_t>(k)];
      OrbitSplitting s;
      s.point = x;
      s.period = p;
      s.Es = Es[static_cast<size_t>(k)];
      s.Eu = Eu[static_cast<size_t>(k)];
      Mat P = power_derivative(f, x, m);
      if (s.Es.dim() > 0) {
        Eigen::JacobiSVD<Mat> sv(Mat(P * s.Es.basis()));
        s.contraction = std::pow(sv.singularValues()(0), 1.0 / m);
      }
      if (s.Eu.dim() > 0) {
        Eigen::JacobiSVD<Mat> sv(Mat(P * s.Eu.basis()));
        const double smin = sv.singularValues()(sv.singularValues().size() - 1);
        s.expansion = smin > 0.0 ? std::pow(1.0 / smin, 1.0 / m) : kInf;
      }
      s.min_angle = min_principal_angle(s.Es, s.Eu);
      const Mat Df = f.jacobian(x);
      const size_t next = static_cast<size_t>((k + 1) % p);
      double inv = 0.0;
      if (s.Eu.dim() > 0) inv = std::max(inv, grassmann_distance(image<double>(Df, s.Eu), Eu[next]));
      if (s.Es.dim() > 0) {
        Mat img = Df * s.Es.basis();
        for (Eigen::Index c = 0; c < img.cols(); ++c) {
          const double n = img.col(c).norm();
          if (n > 1e-300) {
            Vec v = img.col(c) / n;
            inv = std::max(inv, (v - Es[next].basis() * (Es[next].basis().transpose() * v)).norm());
          }
        }
      }
      s.invariance = inv;
      out.contraction = std::max(out.contraction, s.contraction);
      out.expansion = std::max(out.expansion, s.expansion);
      out.min_angle = std::min(out.min_angle, s.min_angle);
      out.invariance = std::max(out.invariance, s.invariance);
      out.points.push_back(std::move(s));
    }
  }
  return out;
}

AxiomAReport verify_axiom_A(const Endomorphism& f, const AxiomAConfig& cfg) {
  AxiomAReport rep;
  auto [lo, hi] = f.core_box();
  std::vector<Vec> grid = grid_points(lo, hi, cfg.recurrence_grid, 20000);
  std::vector<Vec> omega;
  std::vector<std::vector<Vec>> seeds_by_period(static_cast<size_t>(cfg.max_period + 1));
  for (Vec x : grid) {
    if (f.space.periodic()) x = f.space.reduce(x);
    Vec y = x;
    for (int n = 1; n <= cfg.max_period; ++n) {
      y = f(y);
      if (f.space.distance(x, y) < cfg.recurrence_eps) {
        omega.push_back(x);
        seeds_by_period[static_cast<size_t>(n)].push_back(x);
        break;
      }
    }
  }
  std::vector<PeriodicOrbit> orbits;
  for (int p = 1; p <= cfg.max_period; ++p) {
    auto found = find_periodic(f, p, cfg.grid, seeds_by_period[static_cast<size_t>(p)]);
    orbits.insert(orbits.end(), found.orbits.begin(), found.orbits.end());
  }
  rep.splitting = periodic_splitting(f, orbits, cfg.rate_steps);
  std::vector<Vec> per;
  for (const auto& o : orbits) per.insert(per.end(), o.points.begin(), o.points.end());
  omega.insert(omega.end(), per.begin(), per.end());
  rep.periodic_points = static_cast<int>(per.size());
  rep.omega_points = static_cast<int>(omega.size());
  double h = per.empty() ? kInf : 0.0;
  if (!per.empty())
    for (const auto& x : omega) {
      double best = kInf;
      for (const auto& p : per) best = std::min(best, f.space.distance(x, p));
      h = std::max(h, best);
    }
  rep.hausdorff = h;
  const auto& s = rep.splitting;
  rep.hyperbolic_pass = !s.points.empty() && s.contraction < 1.0 - cfg.rate_margin && s.expansion < 1.0 - cfg.rate_margin;
  rep.invariance_pass = s.invariance <= cfg.invariance_tol;
  rep.closure_pass = h <= cfg.hausdorff_tol;
  rep.pass = rep.hyperbolic_pass && rep.invariance_pass && rep.closure_pass;
  return rep;
}

nlohmann::json AxiomAReport::to_json() const {
  nlohmann::json j;
  j["contraction"] = splitting.contraction;
  j["expansion"] = splitting.expansion;
  j["min_angle"] = splitting.min_angle;
  j["invariance_defect"] = splitting.invariance;
  j["periodic_points"] = periodic_points;
  j["omega_points"] = omega_points;
  j["hausdorff_per_omega"] = hausdorff;
  j["hyperbolic_pass"] = hyperbolic_pass;
  j["invariance_pass"] = invariance_pass;
  j["closure_pass"] = closure_pass;
  j["pass"] = pass;
  return j;
}

// ---------------------------------------------------------------------------

Box Box::whole(int d) { return {Vec::Constant(d, -kInf), Vec::Constant(d, kInf)}; }

bool Box::contains(const Vec& x) const {
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (!(x(i) >= lo(i) && x(i) < hi(i))) return false;
  return true;
}

double Box::signed_distance(const Vec& x) const {
  double s = -kInf;
  for (Eigen::Index i = 0; i < x.size(); ++i) s = std::max({s, lo(i) - x(i), x(i) - hi(i)});
  return s;
}

bool BasicPieceSet::in_filtration(int i, const Vec& x) const {
  for (int k = 0; k <= i && k < static_cast<int>(filtration_regions.size()); ++k) {
    const Box& b = filtration_regions[static_cast<size_t>(k)];
    bool in = true;
    for (Eigen::Index c = 0; c < x.size() && in; ++c) in = x(c) >= b.lo(c) - 1e-12 && x(c) <= b.hi(c) + 1e-12;
    if (in) return true;
  }
  return false;
}

double BasicPieceSet::piece_distance(int i, const Vec& x) const {
  double best = kInf;
  for (const Vec& p : pieces[static_cast<size_t>(i)].orbit) {
    double m = 0.0;
    for (Eigen::Index c = 0; c < x.size(); ++c)
      if (uniform_coord.empty() || !uniform_coord[static_cast<size_t>(c)]) m = std::max(m, std::abs(x(c) - p(c)));
    best = std::min(best, m);
  }
  return best;
}

int BasicPieceSet::nearest_piece(const Vec& x, double tol) const {
  int best = -1;
  double bd = tol;
  for (int i = 0; i < q(); ++i) {
    const double d = piece_distance(i, x);
    if (d <= bd) {
      bd = d;
      best = i;
    }
  }
  return best;
}

bool BasicPieceSet::is_linear_extension() const {
  for (auto [i, j] : edges)
    if (i <= j) return false;
  return true;
}

nlohmann::json BasicPieceSet::to_json() const {
  nlohmann::json j;
  j["q"] = q();
  j["template"] = has_template;
  nlohmann::json ps = nlohmann::json::array();
  for (const auto& p : pieces) {
    nlohmann::json o;
    o["index"] = p.index + 1;
    o["unstable_dim"] = p.unstable_dim;
    nlohmann::json orb = nlohmann::json::array();
    for (const auto& x : p.orbit) orb.push_back(vec_json(x));
    o["orbit"] = orb;
    o["block_pieces"] = p.block_pieces;
    if (has_template) {
      o["cover"] = box_json(p.cover);
      o["core"] = box_json(p.core);
    }
    ps.push_back(o);
  }
  j["pieces"] = ps;
  nlohmann::json e = nlohmann::json::array();
  for (auto [a, b] : edges) e.push_back({a + 1, b + 1});
  j["order_edges"] = e;
  j["linear_extension"] = is_linear_extension();
  if (has_template) {
    nlohmann::json fj;
    fj["rho"] = rho;
    fj["cover_margin"] = cover_margin;
    nlohmann::json regs = nlohmann::json::array();
    for (const auto& r : filtration_regions) regs.push_back(box_json(r));
    fj["regions"] = regs;
    fj["invariance_margin"] = filtration_check.invariance_margin;
    fj["grid_points"] = filtration_check.grid_points;
    fj["isolation_distance"] = filtration_check.isolation;
    fj["isolation_points"] = filtration_check.isolation_points;
    fj["pass"] = filtration_check.pass;
    j["filtration"] = fj;
  }
  return j;
}

namespace {

void apply_template_masks(BasicPieceSet& ps, const Endomorphism& f, double rho) {
  const int d = f.dim();
  const auto& blocks = f.known->blocks;
  ps.rho = rho;
  ps.cover_margin = kInf;
  ps.filtration_regions.clear();
  for (auto& p : ps.pieces) {
    p.cover = Box::whole(d);
    p.core = Box::whole(d);
    Box region{f.known->core_lo, f.known->core_hi};
    for (size_t b = 0; b < blocks.size(); ++b) {
      const Block& blk = blocks[b];
      if (blk.kind != BlockKind::Quadratic) continue;
      const MaskLevels m = quadratic_mask_levels(blk, rho);
      if (!(m.w < m.a)) throw std::runtime_error("filtration template: cover boundaries cross for this c and rho");
      ps.cover_margin = std::min(ps.cover_margin, 0.5 * (m.a - m.w));
      const int c = blk.coords[0];
      if (p.block_pieces[b] == 0) {
        p.cover.hi(c) = m.a;
        p.core.hi(c) = m.mid;
        region.hi(c) = m.a;
      } else {
        p.cover.lo(c) = m.w;
        p.core.lo(c) = m.mid;
      }
    }
    ps.filtration_regions.push_back(region);
  }
  if (std::isinf(ps.cover_margin)) ps.cover_margin = 0.05;
}

FiltrationCheck check_filtration(const BasicPieceSet& ps, const Endomorphism& f, const SpectralConfig& cfg,
                                 const OrbitSample* sample) {
  FiltrationCheck fc;
  auto [lo, hi] = f.core_box();
  std::vector<Vec> grid = grid_points(lo, hi, cfg.filtration_grid, 4 * cfg.filtration_grid);
  fc.grid_points = static_cast<int>(grid.size());
  fc.invariance_margin = kInf;
  const int q = ps.q();
  for (const Vec& x : grid) {
    const Vec fx = f(x);
    for (int i = 0; i < q; ++i) {
      if (!ps.in_filtration(i, x)) continue;
      double best = -kInf;
      for (int k = 0; k <= i; ++k) {
        const Box& r = ps.filtration_regions[static_cast<size_t>(k)];
        double depth = kInf;
        bool inside = true;
        for (Eigen::Index c = 0; c < fx.size(); ++c) {
          if (fx(c) < r.lo(c) - 1e-12 || fx(c) > r.hi(c) + 1e-12) inside = false;
          if (r.hi(c) < hi(c)) depth = std::min(depth, r.hi(c) - fx(c));
        }
        if (!inside) continue;
        best = std::max(best, depth);
      }
      if (best == kInf) continue;
      fc.invariance_margin = std::min(fc.invariance_margin, best);
    }
  }
  if (fc.invariance_margin == kInf) fc.invariance_margin = 1.0;
  if (sample) {
    const int L = sample->length();
    const int n = cfg.isolation_steps;
    for (int s = 0; s < sample->strand_count(); ++s)
      for (int j = n; j + n < L; ++j)
        for (int i = 0; i < q; ++i) {
          bool trapped = true;
          for (int t = -n; t <= n && trapped; ++t) {
            const Vec y = sample->point(s, j + t);
            trapped = ps.in_filtration(i, y) && !(i > 0 && ps.in_filtration(i - 1, y));
          }
          if (!trapped) continue;
          ++fc.isolation_points;
          fc.isolation = std::max(fc.isolation, ps.piece_distance(i, Vec(sample->point(s, j))));
        }
  }
  fc.pass = fc.invariance_margin > 0.0 && fc.isolation <= cfg.isolation_tol;
  return fc;
}

std::vector<int> kahn_order(int q, const std::vector<std::pair<int, int>>& edges) {
  // piece i must come after every j with (i, j) an edge
  std::vector<int> pending(static_cast<size_t>(q), 0);
  for (auto [i, j] : edges) ++pending[static_cast<size_t>(i)];
  std::vector<int> order;
  std::vector<bool> placed(static_cast<size_t>(q), false);
  for (int step = 0; step < q; ++step) {
    int pick = -1;
    for (int i = 0; i < q && pick < 0; ++i)
      if (!placed[static_cast<size_t>(i)] && pending[static_cast<size_t>(i)] == 0) pick = i;
    if (pick < 0) throw std::runtime_error("spectral decomposition: order relation has a cycle");
    placed[static_cast<size_t>(pick)] = true;
    order.push_back(pick);
    for (auto [i, j] : edges)
      if (j == pick) --pending[static_cast<size_t>(i)];
  }
  return order;
}

}  // namespace

void build_filtration(BasicPieceSet& ps, const Endomorphism& f, const SpectralConfig& cfg, const OrbitSample* sample) {
  if (!ps.has_template) throw std::runtime_error("build_filtration: no filtration template for this system");
  double rho = cfg.rho;
  for (int attempt = 0; attempt < 2; ++attempt) {
    apply_template_masks(ps, f, rho);
    ps.filtration_check = check_filtration(ps, f, cfg, sample);
    if (ps.filtration_check.pass) return;
    rho *= 0.5;
  }
  throw std::runtime_error("build_filtration: template fails the invariance or isolation check after tightening");
}

BasicPieceSet spectral_decomposition(const Endomorphism& f, const SpectralConfig& cfg, const OrbitSample* sample) {
  BasicPieceSet ps;
  const int d = f.dim();
  ps.uniform_coord.assign(static_cast<size_t>(d), false);
  std::vector<Piece> raw;
  if (f.has_template()) {
    ps.has_template = true;
    const auto& blocks = f.known->blocks;
    for (const auto& b : blocks)
      if (b.kind == BlockKind::Uniform)
        for (int c : b.coords) ps.uniform_coord[static_cast<size_t>(c)] = true;
    for (const Vec& p : template_fixed_points(f)) {
      Piece pc;
      pc.orbit = {p};
      for (const auto& b : blocks) {
        int digit = 0;
        if (b.kind == BlockKind::Quadratic && std::abs(p(b.coords[0]) - b.beta()) < 1e-12) digit = 1;
        pc.block_pieces.push_back(digit);
        if (b.kind == BlockKind::Uniform) pc.unstable_dim += count_unstable(spectrum(b.A));
        if (b.kind == BlockKind::Quadratic && digit == 1) pc.unstable_dim += 1;
      }
      raw.push_back(pc);
    }
  } else {
    std::vector<PeriodicOrbit> orbits;
    for (int p = 1; p <= cfg.no_template_max_period; ++p) {
      auto found = find_periodic(f, p, 16);
      orbits.insert(orbits.end(), found.orbits.begin(), found.orbits.end());
    }
    for (size_t a = 0; a < orbits.size(); ++a)
      for (size_t b = a + 1; b < orbits.size(); ++b)
        for (const auto& x : orbits[a].points)
          for (const auto& y : orbits[b].points)
            if (f.space.distance(x, y) < cfg.resolution)
              throw std::runtime_error("spectral decomposition: ambiguous clustering (two orbits within resolution); known_data required");
    for (const auto& o : orbits) {
      Piece pc;
      pc.orbit = o.points;
      pc.unstable_dim = o.unstable_dim();
      raw.push_back(pc);
    }
  }
  ps.pieces = raw;
  for (int i = 0; i < ps.q(); ++i) ps.pieces[static_cast<size_t>(i)].index = i;

  std::set<std::pair<int, int>> edges;
  for (int i = 0; i < ps.q(); ++i) {
    const Piece& pc = ps.pieces[static_cast<size_t>(i)];
    if (pc.unstable_dim == 0) continue;
    const Vec& p = pc.orbit.front();
    const int period = static_cast<int>(pc.orbit.size());
    std::vector<Vec> dirs;
    for (const Vec& v : unstable_directions(power_derivative(f, p, period))) {
      double off = 0.0;
      for (int c = 0; c < d; ++c)
        if (!ps.uniform_coord[static_cast<size_t>(c)]) off = std::max(off, std::abs(v(c)));
      if (off > 1e-12) dirs.push_back(v);
    }
    const int nd = static_cast<int>(std::min<size_t>(dirs.size(), 4));
    for (int mask = 1; mask < (1 << nd); ++mask)
      for (int signs = 0; signs < (1 << nd); ++signs) {
        Vec x = p;
        for (int k = 0; k < nd; ++k)
          if (mask & (1 << k)) x += cfg.shot_size * ((signs & (1 << k)) ? -1.0 : 1.0) * dirs[static_cast<size_t>(k)];
        if (f.space.periodic()) x = f.space.reduce(x);
        bool left = !f.space.contains(x);
        for (int s = 0; s < cfg.shot_steps && !left; ++s) {
          x = f(x);
          left = !f.space.contains(x) || !x.allFinite();
        }
        if (left) continue;
        const int j = ps.nearest_piece(x, cfg.resolution);
        if (j < 0) {
          if (!ps.has_template) throw std::runtime_error("spectral decomposition: unresolved shot; known_data required");
          continue;
        }
        if (j != i) edges.insert({i, j});
      }
  }
  std::vector<int> order = kahn_order(ps.q(), {edges.begin(), edges.end()});
  std::vector<int> pos(static_cast<size_t>(ps.q()));
  std::vector<Piece> sorted;
  for (size_t k = 0; k < order.size(); ++k) {
    pos[static_cast<size_t>(order[k])] = static_cast<int>(k);
    sorted.push_back(ps.pieces[static_cast<size_t>(order[k])]);
    sorted.back().index = static_cast<int>(k);
  }
  ps.pieces = sorted;
  for (auto [i, j] : edges) ps.edges.push_back({pos[static_cast<size_t>(i)], pos[static_cast<size_t>(j)]});
  std::sort(ps.edges.begin(), ps.edges.end());
  if (!ps.is_linear_extension()) throw std::logic_error("spectral decomposition: enumeration is not a linear extension");
  if (ps.has_template) build_filtration(ps, f, cfg, sample);
  return ps;
}

}  // namespace invlim
