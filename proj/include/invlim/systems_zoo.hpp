#pragma once

#include "invlim/phase_space.hpp"

#include <Eigen/Eigenvalues>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace invlim {

enum class Smoothness { Analytic, C1 };
enum class BlockKind { Uniform, Quadratic, Null };

/// Factor of a product map acting on `coords` independently of the other factors.
/// Uniform: x -> A x mod 1 (one piece, the whole factor). Quadratic: x -> x^2 + c with
/// an attracting fixed point (piece 0) and the repelling endpoint beta (piece 1).
/// Null: x -> 0 (one piece, the origin).
struct Block {
  BlockKind kind = BlockKind::Null;
  std::vector<int> coords;
  Mat A;
  double c = 0.0;

  int size() const { return static_cast<int>(coords.size()); }
  int piece_count() const { return kind == BlockKind::Quadratic ? 2 : 1; }
  double beta() const;
  double p_minus() const;
  double core_lo() const;
  double core_hi() const;
  /// Block-local coordinates of the fixed point representing piece k.
  Vec piece_point(int k) const;
  /// True when piece k is the whole factor (Uniform blocks).
  bool piece_is_whole(int k) const { return kind == BlockKind::Uniform && k == 0; }
};

struct KnownData {
  std::vector<Vec> fixed_points;
  std::vector<Eigen::VectorXcd> multipliers;  // spectrum of Df at each fixed point
  std::vector<Block> blocks;                  // empty when no product template exists
  Vec core_lo, core_hi;                       // box containing pi_0 of the inverse limit
  bool covering = false;
  int degree = 0;
};

struct Endomorphism {
  std::string name;
  ModelSpace space;
  std::function<Vec(const Vec&)> eval;
  std::function<Mat(const Vec&)> derivative;
  Smoothness smoothness = Smoothness::Analytic;
  std::optional<KnownData> known;

  Vec operator()(const Vec& x) const { return eval(x); }
  Mat jacobian(const Vec& x) const { return derivative(x); }
  int dim() const { return space.dim; }
  bool has_template() const { return known.has_value() && !known->blocks.empty(); }
  /// Box where orbits of the inverse limit live (core region if known, else the space bounds).
  std::pair<Vec, Vec> core_box() const;
  /// Rank of Df at x (singular values above 1e-12 relative).
  int derivative_rank(const Vec& x) const;
};

Endomorphism zoo_doubling();
Endomorphism zoo_quadratic(double c);
Endomorphism zoo_delay(int m, int n, double c);
Endomorphism zoo_product_squares();
Endomorphism zoo_torus_linear(const Mat& A);

/// Parses CLI names such as "doubling", "quadratic:c=0", "torus:2,1,1,1",
/// "product_squares", "delay:m=1,n=2,c=0".
Endomorphism zoo_from_name(const std::string& spec);
std::vector<std::pair<std::string, std::string>> zoo_catalog();

/// Largest componentwise gap between Df and central differences at step h on random points.
double derivative_check(const Endomorphism& f, int points = 1000, double h = 1e-7,
                        std::uint64_t seed = 7);

/// Checks fixed points (1e-12) and multipliers (1e-10) stored in known_data; throws on mismatch.
void verify_known_data(const Endomorphism& f);

struct PerturbationFamily {
  Endomorphism base;
  std::string kind;
  std::function<Vec(const Vec&, double)> perturb;
  std::function<Mat(const Vec&, double)> perturb_derivative;
  std::function<void(double)> validate;  // throws when eps leaves the admissible range

  Endomorphism at(double eps) const;
  /// Measured C^1 distance to the base: max of C^0 gap and derivative gap on a sample grid.
  double c1_size(double eps, int points = 2000, std::uint64_t seed = 11) const;
};

PerturbationFamily perturb_translation(const Endomorphism& base, const Vec& direction);
PerturbationFamily perturb_fourier(const Endomorphism& base, int k = 1);

}  // namespace invlim
