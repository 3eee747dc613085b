// Acceptance run: one PASS/FAIL line per criterion. Tolerances and time budgets are pinned here.

#include "invlim/conjugacy_solver.hpp"
#include "invlim/random.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace invlim;

namespace {

constexpr int kMetricPairs = 10000;
constexpr double kMetricSeconds = 5.0;
constexpr double kConeTol = 1e-8;
constexpr int kConeIters = 60;
constexpr double kInverseRelTol = 1e-10;
constexpr double kConvR = 0.05;
constexpr int kConvSamples = 100000;
constexpr double kPouTol = 1e-9;
constexpr int kRandomSections = 100;
constexpr double kTruncationTol = 1e-10;
constexpr double kDefectSlack = 1e-10;
constexpr double kKVariation = 0.10;
constexpr double kClosedFormTol = 1e-9;
constexpr double kClosedFormC1 = 1e-9;
constexpr double kNonlinearC1 = 1e-8;
constexpr double kContraction = 0.9;
constexpr double kFixedPointTol = 1e-6;
constexpr double kRobbin = 0.1;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

struct Solved {
  SolveReport report;
  std::string name;
};
std::vector<Solved> g_solves;

SampleConfig default_sample() { return SampleConfig{}; }

Outcome criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  int violations = 0, pairs = 0;
  for (const char* name : {"doubling", "quadratic:c=0", "product_squares", "torus:2,1,1,1", "delay:m=1,n=2,c=0"}) {
    SampleConfig sc;
    sc.strands = 32;
    const OrbitSample s(zoo_from_name(name), sc);
    const auto pts = s.window_points();
    Rng rng(derive_seed(11, static_cast<std::uint64_t>(pairs)));
    for (int k = 0; k < kMetricPairs; ++k, ++pairs) {
      const PointId a = pts[static_cast<size_t>(uniform01(rng) * static_cast<double>(pts.size()))];
      const PointId b = pts[static_cast<size_t>(uniform01(rng) * static_cast<double>(pts.size()))];
      const MetricValue m = d1(s.window_at(a.strand, a.index), s.window_at(b.strand, b.index));
      const double di = s.dinf(a, b);
      if (m.value + m.tail_bound > 3.0 * di + m.tail_bound) ++violations;
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {violations == 0 && secs < kMetricSeconds,
          fmt("%g pairs over 5 systems, %g violations, %.2f s", pairs, violations, secs)};
}

Outcome criterion2() {
  Mat A(2, 2);
  A << 2, 1, 1, 1;
  const Endomorphism f = zoo_torus_linear(A);
  const Mat Ainv = A.inverse();
  Mat c(2, kConeIters + 2);
  c.col(kConeIters) << 0.31, 0.77;
  for (int n = kConeIters - 1; n >= 0; --n) c.col(n) = f.space.reduce(Ainv * c.col(n + 1));
  c.col(kConeIters + 1) = f(Vec(c.col(kConeIters)));
  Mat exact(2, 1);
  exact << 1.0, (std::sqrt(5.0) - 1.0) / 2.0;
  Mat seed(2, 1);
  seed << 0.0, 1.0;
  int reached = -1;
  double dist = 1.0;
  for (int it = 1; it <= kConeIters && reached < 0; ++it) {
    const OrbitWindow w = make_window(f.space, c.rightCols(it + 2), it, f.eval);
    dist = grassmann_distance(cone_iterate_unstable(f, w, Subspaced(seed), it).subspace, Subspaced(exact));
    if (dist <= kConeTol) reached = it;
  }
  return {reached > 0, fmt("d_G = %.3g after %g iterations", dist, reached)};
}

Outcome criterion3() {
  const Endomorphism f = zoo_quadratic(0.0);
  const Vec x = Vec::Zero(1);
  double worst = 0.0;
  Rng rng(5);
  for (double d : {1e-1, 1e-2, 1e-3}) {
    const SmoothedDerivatived F = smoothed_derivative(f, d);
    for (int k = 0; k < 50; ++k) {
      Mat v(2, 1);
      v << uniform(rng, -1, 1), uniform(rng, -1, 1);
      worst = std::max(worst, (F.apply_inverse(x, F.apply(x, v)) - v).norm() / v.norm());
    }
  }
  return {worst <= kInverseRelTol, fmt("max relative error %.3g", worst)};
}

Outcome criterion4() {
  const ModelSpace circle = ModelSpace::circle();
  SampleConfig sc;
  sc.strands = 32;
  const OrbitSample s(zoo_doubling(), sc);
  std::vector<Mat> pts;
  for (const PointId& p : s.interior_points()) pts.push_back(Mat(s.point(p)));
  ConvolutionConfig cfg;
  cfg.r = kConvR;
  cfg.mc_samples = kConvSamples;
  const auto phi = [](const Mat& y) { return y(0, 0); };
  const ConvolutionResult r = convolve_on_inverse_limit(circle, pts, phi, cfg);
  int c0_fail = 0;
  double worst_excess = -1e300;
  for (size_t i = 0; i < pts.size(); ++i) {
    const double err = std::abs(r.ratio[i] - pts[i](0, 0));
    const double allowed = r.local_modulus[i] + 3.0 * r.sigma[i];
    worst_excess = std::max(worst_excess, err - allowed);
    if (err > allowed) ++c0_fail;
  }
  const bool lip = r.lipschitz_measured <= r.lipschitz_bound;
  const auto bump = [](const Mat& y) { return std::max(0.0, 0.1 - std::abs(y(0, 0) - 0.5)); };
  const ConvolutionResult rb = convolve_on_inverse_limit(circle, pts, bump, cfg);
  int outside = 0;
  for (size_t i = 0; i < pts.size(); ++i)
    if (std::abs(pts[i](0, 0) - 0.5) >= 0.1 + kConvR && rb.phi_r[i] != 0.0) ++outside;
  const bool support = rb.support_inflation <= kConvR && outside == 0;
  return {c0_fail == 0 && lip && support,
          fmt("C0 failures %g, Lipschitz %.3g <= %.3g, support inflation %.3g", c0_fail, r.lipschitz_measured,
              r.lipschitz_bound, rb.support_inflation)};
}

Outcome criterion5() {
  const Endomorphism f = zoo_product_squares();
  const OrbitSample s(f, default_sample());
  const BasicPieceSet ps = spectral_decomposition(f, {}, &s);
  const PartitionOfUnity pu = partition_of_unity(ps, s);
  double worst = 0.0;
  for (const PointId& p : s.window_points()) {
    double sum = 0.0;
    for (int i = 0; i < pu.size(); ++i) sum += pu.gamma_at(i, p.strand, p.index);
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  return {ps.q() == 4 && worst <= kPouTol, fmt("q = %g, max |sum - 1| = %.3g", ps.q(), worst)};
}

Outcome criterion6() {
  double worst = 0.0, const_err = 0.0;
  for (const char* name : {"doubling", "quadratic:c=0"}) {
    const Endomorphism f = zoo_from_name(name);
    const OrbitSample s(f, default_sample());
    const BasicPieceSet ps = spectral_decomposition(f, {}, &s);
    const PartitionOfUnity pu = partition_of_unity(ps, s);
    const double delta = std::string(name) == "doubling" ? 0.0 : 0.01;
    BundleConfig bc;
    bc.delta = delta;
    const BundleFamily fam = solve_bundle_family(ps, s, bc);
    const SmoothedDerivatived F = smoothed_derivative(f, delta);
    const RightInverse J(ps, fam, pu, F, s, kTruncationTol);
    for (int k = 0; k < kRandomSections; ++k)
      worst = std::max(worst, right_inverse_defect(J, random_smooth_section(s, 2, derive_seed(77, static_cast<std::uint64_t>(k))), F, s));
    if (delta == 0.0) {
      Section c = zero_section(s, 2);
      for (auto& m : c) m.row(0).setConstant(0.25);
      const Section Jc = J.apply(c);
      for (const PointId& p : s.interior_points())
        const_err = std::max(const_err, (Jc[static_cast<size_t>(p.strand)].col(p.index) - c[static_cast<size_t>(p.strand)].col(p.index))
                                            .lpNorm<Eigen::Infinity>());
    }
  }
  const double tol = kTruncationTol + kDefectSlack;
  return {worst <= tol && const_err <= tol, fmt("max defect %.3g, |J(c) - c| = %.3g (tol %.1g)", worst, const_err, tol)};
}

Outcome criterion7() {
  std::ostringstream os;
  bool pass = true;
  for (const char* name : {"doubling", "product_squares"}) {
    const Endomorphism f = zoo_from_name(name);
    const OrbitSample s(f, default_sample());
    const BasicPieceSet ps = spectral_decomposition(f, {}, &s);
    double kmin = 1e300, kmax = 0.0;
    for (double d : {1e-1, 1e-2, 1e-3}) {
      BundleConfig bc;
      bc.delta = d;
      const double K = solve_bundle_family(ps, s, bc).K;
      kmin = std::min(kmin, K);
      kmax = std::max(kmax, K);
    }
    const double var = (kmax - kmin) / kmin;
    pass = pass && var < kKVariation;
    os << name << " K in [" << kmin << ", " << kmax << "] variation " << var << "; ";
  }
  return {pass, os.str()};
}

Outcome criterion8() {
  const double c = 0.01;
  const Endomorphism f = zoo_doubling();
  const OrbitSample s(f, default_sample());
  const BasicPieceSet ps = spectral_decomposition(f, {}, &s);
  const PartitionOfUnity pu = partition_of_unity(ps, s);
  const Endomorphism g = perturb_translation(f, Vec::Ones(1)).at(c);
  ConjugacyConfig cc;
  const SolveReport r = solve_conjugacy(g, ConjugacyContext{&s, &ps, &pu}, cc);
  double err = 0.0;
  for (const PointId& p : s.interior_points())
    err = std::max(err, std::abs(r.w[static_cast<size_t>(p.strand)](0, p.index) + c));
  if (r.converged()) g_solves.push_back({r, "doubling"});
  return {r.converged() && err <= kClosedFormTol && r.c1 <= kClosedFormC1 && r.c2_pass && r.c3_pass,
          fmt("sup |w + c| = %.3g, C1 = %.3g, C2 = %.3g, C3 = %.3g", err, r.c1, r.c2, r.c3)};
}

/// Newton on x^2 + eps = x from x0.
double newton_fixed_point(double eps, double x0) {
  double x = x0;
  for (int k = 0; k < 100; ++k) {
    const double step = (x * x + eps - x) / (2.0 * x - 1.0);
    x -= step;
    if (std::abs(step) < 1e-16) break;
  }
  return x;
}

Outcome criterion9() {
  const double eps = 1e-3;
  const Endomorphism f = zoo_quadratic(0.0);
  const OrbitSample s(f, default_sample());
  const BasicPieceSet ps = spectral_decomposition(f, {}, &s);
  const PartitionOfUnity pu = partition_of_unity(ps, s);
  const Endomorphism g = perturb_translation(f, Vec::Ones(1)).at(eps);
  ConjugacyConfig cc;
  const SolveReport r = solve_conjugacy(g, ConjugacyContext{&s, &ps, &pu}, cc);
  const double oracle0 = newton_fixed_point(eps, 0.0) - 0.0;
  const double oracle1 = newton_fixed_point(eps, 1.0) - 1.0;
  double err0 = -1.0, err1 = -1.0;
  const int mid = s.length() / 2;
  for (int st = 0; st < s.strand_count(); ++st) {
    const Mat& X = s.strand(st);
    if ((X.array() - X(0, 0)).abs().maxCoeff() != 0.0) continue;  // constant strands only
    const double w = r.w[static_cast<size_t>(st)](0, mid);
    if (X(0, 0) == 0.0) err0 = std::max(err0, std::abs(w - oracle0));
    if (X(0, 0) == 1.0) err1 = std::max(err1, std::abs(w - oracle1));
  }
  if (r.converged()) g_solves.push_back({r, "quadratic"});
  const bool found = err0 >= 0.0 && err1 >= 0.0;
  return {r.converged() && r.contraction_factor < kContraction && r.c1 <= kNonlinearC1 && found &&
              err0 <= kFixedPointTol && err1 <= kFixedPointTol,
          fmt("factor %.3g, C1 = %.3g, displacement errors %.3g at 0 and %.3g at 1", r.contraction_factor, r.c1,
              err0, err1)};
}

Outcome criterion10() {
  const auto t0 = std::chrono::steady_clock::now();
  std::ostringstream os;
  bool pass = !g_solves.empty();
  for (const auto& sv : g_solves) {
    pass = pass && sv.report.robbin.Lambda <= kRobbin;
    os << sv.name << " Lambda " << sv.report.robbin.Lambda << "; ";
  }
  const OrbitSample s(zoo_doubling(), default_sample());
  Section w = zero_section(s, 2);
  for (int st = 0; st < s.strand_count(); ++st)
    for (int j = 0; j < s.length(); ++j) w[static_cast<size_t>(st)](0, j) = s.point(st, j)(0) < 0.5 ? 0.0 : 0.05;
  const RobbinCheck rc = robbin_injectivity_check(w, s, s.lipschitz_pairs(), kRobbin);
  const double xa = s.point(rc.witness.a)(0), xb = s.point(rc.witness.b)(0);
  const bool witness = !rc.pass && ((xa < 0.5) != (xb < 0.5)) && rc.witness.dinf > 0.0;
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  os << "jump section Lambda " << rc.Lambda << " witness (" << rc.witness.a.strand << "," << rc.witness.a.index
     << ")-(" << rc.witness.b.strand << "," << rc.witness.b.index << ")";
  return {pass && witness && secs < 10.0, os.str()};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"1 metric inequality d1 <= 3 d_inf + tail", criterion1},
      {"2 cone iteration on the cat map", criterion2},
      {"3 F^delta invertible at the critical point", criterion3},
      {"4 convolution on the inverse limit", criterion4},
      {"5 partition of unity on product_squares", criterion5},
      {"6 right-inverse identity", criterion6},
      {"7 delta-uniformity of K", criterion7},
      {"8 closed-form conjugacy on doubling", criterion8},
      {"9 nonlinear conjugacy on quadratic", criterion9},
      {"10 injectivity criterion", criterion10},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %s: %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
