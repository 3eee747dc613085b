#include "invlim/hyperbolic_structure.hpp"
#include "invlim/orbit_sample.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace invlim;

namespace {

OrbitWindow torus_window(const Endomorphism& f, const Mat& Ainv, int Kb) {
  Mat c(2, Kb + 2);
  c.col(Kb) << 0.1234, 0.5678;
  for (int n = Kb - 1; n >= 0; --n) c.col(n) = f.space.reduce(Ainv * c.col(n + 1));
  c.col(Kb + 1) = f(Vec(c.col(Kb)));
  return make_window(f.space, c, Kb, f.eval);
}

}  // namespace

TEST_CASE("doubling has 2^p - 1 points of period dividing p") {
  const Endomorphism f = zoo_doubling();
  CHECK(find_periodic(f, 1).orbits.size() == 1);
  // Minimal period 2: one orbit {1/3, 2/3}; minimal period 3: 6 points in 2 orbits.
  const PeriodicSearch p2 = find_periodic(f, 2, 32);
  REQUIRE(p2.orbits.size() == 1);
  std::vector<double> xs;
  for (const auto& p : p2.orbits[0].points) xs.push_back(p(0));
  std::sort(xs.begin(), xs.end());
  CHECK(xs[0] == doctest::Approx(1.0 / 3.0));
  CHECK(xs[1] == doctest::Approx(2.0 / 3.0));
  const PeriodicSearch p3 = find_periodic(f, 3, 32);
  CHECK(p3.orbits.size() == 2);
  size_t pts = 0;
  for (const auto& o : p3.orbits) pts += o.points.size();
  CHECK(pts == 6);
}

TEST_CASE("cone iteration converges to the expanding eigenline of the cat map") {
  Mat A(2, 2);
  A << 2, 1, 1, 1;
  const Endomorphism f = zoo_torus_linear(A);
  Mat Ainv = A.inverse();
  const OrbitWindow w = torus_window(f, Ainv, 60);
  Mat seed(2, 1);
  seed << 0.0, 1.0;
  const ConeResult r = cone_iterate_unstable(f, w, Subspaced(seed), 60);
  Mat exact(2, 1);
  exact << 1.0, (std::sqrt(5.0) - 1.0) / 2.0;
  CHECK(grassmann_distance(r.subspace, Subspaced(exact)) <= 1e-8);
  CHECK(r.increments.size() == 60);
}

TEST_CASE("Axiom A on the doubling map: expansion rate 1/2") {
  const AxiomAReport r = verify_axiom_A(zoo_doubling());
  CHECK(r.pass);
  CHECK(r.splitting.expansion == doctest::Approx(0.5));
  CHECK(r.hyperbolic_pass);
}

TEST_CASE("Axiom A on the cat map: rates from the eigenvalues") {
  Mat A(2, 2);
  A << 2, 1, 1, 1;
  const AxiomAReport r = verify_axiom_A(zoo_torus_linear(A));
  const double mu = (3.0 + std::sqrt(5.0)) / 2.0;
  CHECK(r.pass);
  CHECK(r.splitting.contraction == doctest::Approx(1.0 / mu).epsilon(1e-6));
  CHECK(r.splitting.expansion == doctest::Approx(1.0 / mu).epsilon(1e-6));
}

TEST_CASE("quadratic c = 0: two pieces, the attracting point then the repelling point") {
  const Endomorphism f = zoo_quadratic(0.0);
  SampleConfig sc;
  sc.strands = 16;
  const OrbitSample s(f, sc);
  const BasicPieceSet ps = spectral_decomposition(f, {}, &s);
  REQUIRE(ps.q() == 2);
  CHECK(ps.pieces[0].orbit.front()(0) == doctest::Approx(0.0));
  CHECK(ps.pieces[1].orbit.front()(0) == doctest::Approx(1.0));
  CHECK(ps.pieces[0].unstable_dim == 0);
  CHECK(ps.pieces[1].unstable_dim == 1);
  CHECK(ps.is_linear_extension());
  CHECK(ps.filtration_check.pass);
  // The repeller's unstable set reaches the attractor.
  CHECK(std::find(ps.edges.begin(), ps.edges.end(), std::pair{1, 0}) != ps.edges.end());
  const MaskLevels m = quadratic_mask_levels(f.known->blocks.front(), ps.rho);
  CHECK(m.a == doctest::Approx(0.9));
  CHECK(m.w == doctest::Approx(0.82));
  CHECK(ps.cover_margin == doctest::Approx(0.04));
}

TEST_CASE("product of two quadratic factors has four ordered pieces") {
  const Endomorphism f = zoo_product_squares();
  SampleConfig sc;
  sc.strands = 16;
  const OrbitSample s(f, sc);
  const BasicPieceSet ps = spectral_decomposition(f, {}, &s);
  REQUIRE(ps.q() == 4);
  CHECK(ps.is_linear_extension());
  CHECK(ps.filtration_check.pass);
  std::vector<int> dims;
  for (const auto& p : ps.pieces) dims.push_back(p.unstable_dim);
  CHECK(dims.front() == 0);
  CHECK(dims.back() == 2);
  // Filtration: sample transitions never climb the order.
  for (int st = 0; st < s.strand_count(); ++st)
    for (int j = 0; j + 1 < s.length(); ++j) {
      const int here = ps.nearest_piece(Vec(s.point(st, j)), 1e-9);
      const int next = ps.nearest_piece(Vec(s.point(st, j + 1)), 1e-9);
      if (here >= 0 && next >= 0) CHECK(next <= here);
    }
}

TEST_CASE("covers contain their pieces and boxes are half-open") {
  Box b{Vec::Zero(1), Vec::Ones(1)};
  CHECK(b.contains(Vec::Zero(1)));
  CHECK_FALSE(b.contains(Vec::Ones(1)));
  CHECK(b.signed_distance(Vec::Constant(1, 0.5)) == doctest::Approx(-0.5));
  CHECK(b.signed_distance(Vec::Constant(1, 1.5)) == doctest::Approx(0.5));
  const Endomorphism f = zoo_quadratic(0.0);
  const BasicPieceSet ps = spectral_decomposition(f);
  for (int i = 0; i < ps.q(); ++i) CHECK(ps.in_cover(i, ps.pieces[static_cast<size_t>(i)].orbit.front()));
}

TEST_CASE("non-template systems fall back to periodic orbits") {
  const Endomorphism f = zoo_delay(2, 2, 0.0);
  const BasicPieceSet ps = spectral_decomposition(f);
  CHECK_FALSE(ps.has_template);
  CHECK(ps.q() >= 2);
}
