#include "invlim/orbit_sample.hpp"
#include "invlim/phase_space.hpp"
#include "invlim/random.hpp"
#include "invlim/systems_zoo.hpp"

#include <doctest.h>

#include <cmath>

using namespace invlim;

namespace {

Mat line(double theta) {
  Mat m(2, 1);
  m << std::cos(theta), std::sin(theta);
  return m;
}

OrbitWindow doubling_window(double x0, int K) {
  // Backward branch x_{-n-1} = x_{-n} / 2, forward by doubling.
  Mat c(1, 2 * K + 1);
  c(0, K) = x0;
  for (int n = 1; n <= K; ++n) c(0, K - n) = c(0, K - n + 1) / 2.0;
  for (int n = 1; n <= K; ++n) c(0, K + n) = std::fmod(2.0 * c(0, K + n - 1), 1.0);
  const Endomorphism f = zoo_doubling();
  return make_window(f.space, c, K, f.eval);
}

}  // namespace

TEST_CASE("wrap_half maps to (-1/2, 1/2]") {
  CHECK(wrap_half(0.75) == doctest::Approx(-0.25));
  CHECK(wrap_half(-0.5) == doctest::Approx(0.5));
  CHECK(wrap_half(0.5) == doctest::Approx(0.5));
  CHECK(wrap_half(3.1) == doctest::Approx(0.1));
}

TEST_CASE("circle distance, exp and log") {
  const ModelSpace c = ModelSpace::circle();
  Vec a(1), b(1);
  a << 0.95;
  b << 0.05;
  CHECK(c.distance(a, b) == doctest::Approx(0.1));
  const Vec v = c.log(a, b);
  CHECK(v(0) == doctest::Approx(0.1));
  CHECK(c.exp(a, v)(0) == doctest::Approx(0.05));
  CHECK(c.diameter() == doctest::Approx(0.5));
}

TEST_CASE("d1 of constant windows matches the geometric series") {
  const ModelSpace c = ModelSpace::circle();
  const int K = 10;
  Mat a = Mat::Constant(1, 2 * K + 1, 0.1), b = Mat::Constant(1, 2 * K + 1, 0.3);
  const MetricValue m = d1_columns(c, a, K, b, K);
  const double oracle = 0.2 * (1.0 + 2.0 * (1.0 - std::ldexp(1.0, -K)));
  CHECK(m.value == doctest::Approx(oracle).epsilon(1e-14));
  const SupValue s = dinf_columns(c, a, K, b, K);
  CHECK(s.value == doctest::Approx(0.2));
}

TEST_CASE("d1 <= 3 d_inf + tail on random doubling windows") {
  Rng rng(42);
  for (int k = 0; k < 500; ++k) {
    const OrbitWindow a = doubling_window(uniform01(rng), 16), b = doubling_window(uniform01(rng), 16);
    const MetricValue m = d1(a, b);
    CHECK(m.value <= 3.0 * d_inf(a, b).value + m.tail_bound);
  }
}

TEST_CASE("shift moves the centre and shortens the window") {
  const OrbitWindow w = doubling_window(0.3, 8);
  const OrbitWindow s = shift(w, 1);
  CHECK(s.Kb == 7);
  CHECK(s.Kf == 7);
  CHECK(s.at(0)(0) == doctest::Approx(0.6));
  CHECK_THROWS(shift(w, 8));
}

TEST_CASE("window JSON and CSV round trip") {
  const OrbitWindow w = doubling_window(0.123, 5);
  const OrbitWindow a = window_from_json(window_to_json(w), w.space);
  const OrbitWindow b = window_from_csv(window_to_csv(w), w.space);
  CHECK((a.coords - w.coords).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((b.coords - w.coords).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(a.Kb == 5);
}

TEST_CASE("Grassmann distance and principal angle of two lines") {
  const double t = 0.3;
  const Subspaced p(line(0.0)), q(line(t));
  CHECK(grassmann_distance(p, q) == doctest::Approx(std::sin(t)));
  CHECK(min_principal_angle(p, q) == doctest::Approx(t));
  CHECK(containment_defect(p, q) == doctest::Approx(std::sin(t)));
  CHECK(grassmann_distance(p, p) < 1e-15);
  CHECK(min_principal_angle(p, Subspaced::zero(2)) == doctest::Approx(M_PI / 2));
}

TEST_CASE("subspace rank collapse is reported") {
  Mat m(2, 2);
  m << 1, 2, 2, 4;
  CHECK_THROWS_WITH(Subspaced{m}, "subspace rank collapse");
}

TEST_CASE("image and preimage under a linear map") {
  Mat A(2, 2);
  A << 2, 1, 1, 1;
  const Subspaced p(line(0.7));
  const Subspaced ip = image<double>(A, p);
  const Subspaced back = preimage<double>(A, ip);
  CHECK(grassmann_distance(back, p) < 1e-12);
  // Singular map: the preimage of the image line contains the kernel.
  Mat S = Mat::Zero(2, 2);
  S(0, 0) = 1.0;
  const Subspaced e2(line(M_PI / 2));
  CHECK(preimage<double>(S, Subspaced::zero(2)).dim() == 1);
  CHECK(grassmann_distance(preimage<double>(S, Subspaced::zero(2)), e2) < 1e-12);
}

TEST_CASE("embed_blocks places factor subspaces at coordinate sets") {
  const Subspaced a(line(0.0));
  const Subspaced full1 = Subspaced::full(1);
  const Subspaced e = embed_blocks(3, {{{0, 2}, &a}, {{1}, &full1}});
  CHECK(e.dim() == 2);
  Mat oracle = Mat::Zero(3, 2);
  oracle(0, 0) = 1.0;
  oracle(1, 1) = 1.0;
  CHECK(grassmann_distance(e, Subspaced(oracle)) < 1e-14);
}

TEST_CASE("orbit sample strands are orbits and windows are available") {
  SampleConfig cfg;
  cfg.strands = 8;
  const OrbitSample s(zoo_doubling(), cfg);
  CHECK(s.length() == 161);
  CHECK(s.residual() < 1e-12);
  CHECK(s.strand_count() >= 8);
  const OrbitWindow w = s.window_at(0, 80);
  CHECK(w.Kb == cfg.window);
  CHECK_THROWS(s.window_at(0, 3));
  const auto pairs = s.lipschitz_pairs(100);
  CHECK(pairs.size() >= 100);
  for (const auto& p : pairs) CHECK(p.dinf >= 1e-4);
}
