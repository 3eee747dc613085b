#include "invlim/orbit_sample.hpp"
#include "invlim/random.hpp"
#include "invlim/smoothing.hpp"

#include <doctest.h>

#include <cmath>

using namespace invlim;

TEST_CASE("F^delta block inverse matches a dense inverse") {
  const Endomorphism f = zoo_product_squares();
  const SmoothedDerivatived F = smoothed_derivative(f, 0.05);
  Vec x(3);
  x << 0.3, 0.7, 0.0;
  const Mat M = F.matrix(x);
  CHECK((F.inverse_matrix(x) - M.inverse()).cwiseAbs().maxCoeff() < 1e-10);
  Rng rng(1);
  Mat v(6, 4);
  for (Eigen::Index k = 0; k < v.size(); ++k) v.data()[k] = uniform(rng, -1, 1);
  CHECK((F.apply(x, v) - M * v).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((F.apply_inverse(x, F.apply(x, v)) - v).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("F^delta is invertible at the critical point for every delta > 0") {
  const Endomorphism f = zoo_quadratic(0.0);
  const Vec x = Vec::Zero(1);
  for (double d : {1e-1, 1e-2, 1e-3, 1e-4}) {
    const SmoothedDerivatived F = smoothed_derivative(f, d);
    CHECK(F.invertible());
    Mat v(2, 1);
    v << 0.3, -0.8;
    const Mat back = F.apply_inverse(x, F.apply(x, v));
    CHECK((back - v).norm() / v.norm() < 1e-10);
    CHECK(F.inverse_norm(x) <= F.inverse_norm_bound(x) * (1 + 1e-12));
  }
}

TEST_CASE("inverse norm bound 1/delta + |Df|/delta^2 holds on random points") {
  Rng rng(3);
  for (double d : {0.5, 0.1, 0.01}) {
    const SmoothedDerivatived F = smoothed_derivative(zoo_quadratic(-0.5), d);
    for (int k = 0; k < 200; ++k) {
      const Vec x = Vec::Constant(1, uniform(rng, -1.4, 1.4));
      CHECK(F.inverse_norm(x) <= F.inverse_norm_bound(x) * (1 + 1e-12));
    }
  }
}

TEST_CASE("delta = 0 has no inverse") {
  const SmoothedDerivatived F = smoothed_derivative(zoo_quadratic(0.0), 0.0);
  CHECK_FALSE(F.invertible());
  CHECK_THROWS_AS(F.inverse_matrix(Vec::Zero(1)), std::domain_error);
  CHECK_THROWS_WITH(F.apply_inverse(Vec::Zero(1), Mat::Zero(2, 1)), "inverse undefined at delta=0");
  CHECK_THROWS(smoothed_derivative(zoo_quadratic(0.0), -1.0));
}

TEST_CASE("bump kernel values and derivative") {
  CHECK(BumpKernel::value(0.0) == doctest::Approx(std::exp(-1.0)));
  CHECK(BumpKernel::value(1.0) == 0.0);
  CHECK(BumpKernel::value(-1.5) == 0.0);
  for (double t : {-0.7, -0.2, 0.3, 0.8}) {
    const double h = 1e-6;
    const double fd = (BumpKernel::value(t + h) - BumpKernel::value(t - h)) / (2 * h);
    CHECK(BumpKernel::derivative(t) == doctest::Approx(fd).epsilon(1e-6));
  }
  CHECK(BumpKernel::lipschitz() > 0.0);
}

TEST_CASE("mollification reproduces affine data and smooths a kink") {
  GridFunction1D lin{0.0, 0.01, {}};
  for (int i = 0; i <= 100; ++i) lin.values.push_back(3.0 * i * 0.01 - 1.0);
  const GridFunction1D m = mollify_c1_map(lin, 0.05);
  for (size_t i = 0; i < m.values.size(); ++i) CHECK(m.values[i] == doctest::Approx(lin.values[i]).epsilon(1e-12));
  GridFunction1D kink{-1.0, 0.01, {}};
  for (int i = 0; i <= 200; ++i) kink.values.push_back(std::abs(-1.0 + i * 0.01));
  const GridFunction1D mk = mollify_c1_map(kink, 0.1);
  CHECK(mk.at(0.0) > 0.0);
  CHECK(mk.at(0.0) < 0.1);
  CHECK_THROWS(mollify_c1_map(kink, 0.001));

  GridFunction2D plane;
  plane.hx = plane.hy = 0.05;
  plane.values.resize(21, 21);
  for (int i = 0; i <= 20; ++i)
    for (int j = 0; j <= 20; ++j) plane.values(i, j) = 2.0 * i * 0.05 - j * 0.05;
  const GridFunction2D mp = mollify_c1_map(plane, 0.15);
  CHECK((mp.values - plane.values).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("convolution of a constant is that constant") {
  const ModelSpace c = ModelSpace::circle();
  std::vector<Mat> pts;
  for (int i = 0; i < 20; ++i) pts.push_back(Mat::Constant(1, 1, i / 20.0));
  ConvolutionConfig cfg;
  cfg.mc_samples = 20000;
  const ConvolutionResult r = convolve_on_inverse_limit(c, pts, [](const Mat&) { return 2.5; }, cfg);
  for (double v : r.ratio) CHECK(v == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(r.lipschitz_bound == doctest::Approx(r.L / cfg.r * 2.5));
}

TEST_CASE("convolution support inflation stays within r") {
  const ModelSpace c = ModelSpace::circle();
  std::vector<Mat> pts;
  for (int i = 0; i < 200; ++i) pts.push_back(Mat::Constant(1, 1, i / 200.0));
  ConvolutionConfig cfg;
  cfg.mc_samples = 50000;
  auto phi = [](const Mat& y) { return std::max(0.0, 0.1 - std::abs(y(0, 0) - 0.5)); };
  const ConvolutionResult r = convolve_on_inverse_limit(c, pts, phi, cfg);
  CHECK(r.support_inflation <= cfg.r);
  for (size_t i = 0; i < pts.size(); ++i) {
    const double x = pts[i](0, 0);
    if (std::abs(x - 0.5) >= 0.1 + cfg.r) CHECK(r.phi_r[i] == 0.0);
  }
}

TEST_CASE("partition of unity on the quadratic cover") {
  const Endomorphism f = zoo_quadratic(0.0);
  SampleConfig sc;
  sc.strands = 16;
  const OrbitSample s(f, sc);
  const BasicPieceSet ps = spectral_decomposition(f, {}, &s);
  PartitionConfig pc;
  pc.mc_samples = 50000;
  const PartitionOfUnity pu = partition_of_unity(ps, s, pc);
  CHECK(pu.size() == 2);
  CHECK(pu.r == doctest::Approx(0.02));
  CHECK(pu.sum_defect <= 1e-9);
  CHECK(pu.support_violation == 0.0);
  CHECK(pu.range_violation == 0.0);
  // gamma_0 is one at the attracting point, gamma_1 at the repelling point.
  const int last = s.strand_count() - 1;
  bool seen0 = false, seen1 = false;
  for (int st = 0; st <= last; ++st) {
    const double x = s.point(st, 80)(0);
    if (x == 0.0) {
      CHECK(pu.gamma_at(0, st, 80) == doctest::Approx(1.0));
      seen0 = true;
    }
    if (x == 1.0) {
      CHECK(pu.gamma_at(1, st, 80) == doctest::Approx(1.0));
      seen1 = true;
    }
  }
  CHECK(seen0);
  CHECK(seen1);
}
