#include "invlim/systems_zoo.hpp"

#include <doctest.h>

#include <cmath>

using namespace invlim;

TEST_CASE("derivatives agree with central differences on every catalog system") {
  for (const char* name : {"doubling", "quadratic:c=0", "quadratic:c=-0.5", "delay:m=1,n=2,c=0",
                           "delay:m=2,n=2,c=0", "product_squares", "torus:2,1,1,1"}) {
    CAPTURE(name);
    const Endomorphism f = zoo_from_name(name);
    CHECK(derivative_check(f) < 1e-6);
  }
}

TEST_CASE("stored fixed points and multipliers verify") {
  for (const char* name : {"doubling", "quadratic:c=0", "quadratic:c=0.2", "product_squares", "torus:2,1,1,1"}) {
    CAPTURE(name);
    CHECK_NOTHROW(verify_known_data(zoo_from_name(name)));
  }
}

TEST_CASE("quadratic fixed points solve x^2 + c = x") {
  for (double c : {-0.7, -0.3, 0.0, 0.2}) {
    const Endomorphism f = zoo_quadratic(c);
    const Block& b = f.known->blocks.front();
    const double disc = std::sqrt(1.0 - 4.0 * c);
    CHECK(b.beta() == doctest::Approx((1.0 + disc) / 2.0));
    CHECK(b.p_minus() == doctest::Approx((1.0 - disc) / 2.0));
    CHECK(f(Vec::Constant(1, b.beta()))(0) == doctest::Approx(b.beta()));
  }
}

TEST_CASE("quadratic template only inside the period-1 window") {
  CHECK(zoo_quadratic(0.0).has_template());
  CHECK_FALSE(zoo_quadratic(-0.9).has_template());
}

TEST_CASE("torus constructor validates the matrix") {
  Mat A(2, 2);
  A << 2, 1, 1, 1;
  CHECK_NOTHROW(zoo_torus_linear(A));
  Mat B(2, 2);
  B << 1, 1, 0, 1;  // unipotent: eigenvalues on the unit circle
  CHECK_THROWS(zoo_torus_linear(B));
  Mat C(2, 2);
  C << 2.5, 1, 1, 1;
  CHECK_THROWS(zoo_torus_linear(C));
}

TEST_CASE("name parser rejects unknown systems and parameters") {
  CHECK_THROWS(zoo_from_name("henon"));
  CHECK_THROWS(zoo_from_name("quadratic:a=1"));
  CHECK_THROWS(zoo_from_name("torus:1,2,3"));
  CHECK(zoo_from_name("quadratic:c=-0.25").name.find("quadratic") != std::string::npos);
}

TEST_CASE("delay map with m = 1 has a quadratic and a null factor") {
  const Endomorphism f = zoo_delay(1, 2, 0.0);
  REQUIRE(f.has_template());
  CHECK(f.known->blocks.size() == 2);
  CHECK(f.derivative_rank(Vec::Constant(2, 0.5)) == 1);
  CHECK_FALSE(zoo_delay(2, 2, 0.0).has_template());
}

TEST_CASE("translation perturbation moves the parameter and validates epsilon") {
  const Endomorphism q = zoo_quadratic(0.0);
  const PerturbationFamily fam = perturb_translation(q, Vec::Ones(1));
  const Endomorphism g = fam.at(1e-3);
  CHECK(g(Vec::Constant(1, 0.5))(0) == doctest::Approx(0.251));
  CHECK(fam.c1_size(1e-3) == doctest::Approx(1e-3).epsilon(1e-6));
  CHECK_THROWS(fam.validate(0.3));
  CHECK_THROWS(perturb_translation(q, Vec::Ones(2)));
}

TEST_CASE("fourier perturbation keeps the derivative perturbation small") {
  const Endomorphism d = zoo_doubling();
  const PerturbationFamily fam = perturb_fourier(d, 1);
  CHECK_NOTHROW(fam.validate(0.01));
  CHECK_THROWS(fam.validate(0.2));
  CHECK(fam.c1_size(0.01) > 0.0);
}
