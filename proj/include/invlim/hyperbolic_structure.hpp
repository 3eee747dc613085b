#pragma once

#include "invlim/orbit_sample.hpp"
#include "invlim/phase_space.hpp"
#include "invlim/systems_zoo.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace invlim {

// ---------------------------------------------------------------------------
// Periodic points and cone fields

struct PeriodicOrbit {
  int period = 1;
  std::vector<Vec> points;         // x, f(x), ..., f^{p-1}(x)
  Eigen::VectorXcd multipliers;    // spectrum of D f^p at points[0]
  double residual = 0.0;
  int unstable_dim() const;
};

struct PeriodicSearch {
  std::vector<PeriodicOrbit> orbits;
  int seeds = 0;
  int failures = 0;  // seeds whose Newton refinement did not converge
};

/// Newton refinement of f^p(x) = x from a grid of `grid` seeds per axis over the core box, plus
/// `extra_seeds`. Points of lower minimal period are excluded; duplicates merged at 1e-8.
PeriodicSearch find_periodic(const Endomorphism& f, int period, int grid = 16,
                             const std::vector<Vec>& extra_seeds = {});

struct ConeResult {
  Subspaced subspace;
  double increment = 0.0;             // d_G between the last two iterates
  std::vector<double> increments;     // full history, one entry per step
};

/// Pushes `seed` (a subspace of the tangent space at x_{-iters}) forward along the window to x_0.
ConeResult cone_iterate_unstable(const Endomorphism& f, const OrbitWindow& window, const Subspaced& seed, int iters);

// ---------------------------------------------------------------------------
// Axiom A

struct OrbitSplitting {
  Vec point;
  int period = 1;
  Subspaced Es, Eu;
  double contraction = 0.0;   // m-step rate of D f on E^s
  double expansion = 0.0;     // m-step rate of (D f|E^u)^{-1}
  double min_angle = 0.0;
  double invariance = 0.0;    // d_G(D f E^u(x), E^u(f x)) and the same for E^s
};

struct HyperbolicSplitting {
  std::vector<OrbitSplitting> points;
  double contraction = 0.0;
  double expansion = 0.0;
  double min_angle = 0.0;
  double invariance = 0.0;
};

struct AxiomAConfig {
  int max_period = 6;
  int grid = 16;
  int rate_steps = 8;        // rates measured over the smallest multiple of the period >= this
  double invariance_tol = 1e-8;
  double rate_margin = 1e-6; // contraction and expansion must stay below 1 - margin
  double recurrence_eps = 0.02;
  int recurrence_grid = 200; // grid points per axis for the recurrence sample (capped in total)
  double hausdorff_tol = 0.05;
};

struct AxiomAReport {
  HyperbolicSplitting splitting;
  int periodic_points = 0;
  int omega_points = 0;
  double hausdorff = 0.0;
  bool hyperbolic_pass = false;
  bool invariance_pass = false;
  bool closure_pass = false;
  bool pass = false;
  nlohmann::json to_json() const;
};

HyperbolicSplitting periodic_splitting(const Endomorphism& f, const std::vector<PeriodicOrbit>& orbits,
                                       int rate_steps = 8);
AxiomAReport verify_axiom_A(const Endomorphism& f, const AxiomAConfig& cfg = {});

// ---------------------------------------------------------------------------
// Spectral decomposition, covers and filtration

/// Axis-aligned region with possibly infinite sides; membership is lo <= x < hi.
struct Box {
  Vec lo, hi;
  static Box whole(int d);
  bool contains(const Vec& x) const;
  /// Sup-norm signed distance: negative inside (depth), positive outside.
  double signed_distance(const Vec& x) const;
};

struct Piece {
  int index = 0;                   // position in the enumeration (0-based; reported index is index + 1)
  std::vector<int> block_pieces;   // per block: 0 attractor / 1 repeller (template systems)
  std::vector<Vec> orbit;          // representative periodic orbit
  int unstable_dim = 0;
  Box cover;                       // W_i
  Box core;                        // support region of the partition function gamma_i
};

struct FiltrationCheck {
  double invariance_margin = 0.0;  // min over grid of the depth of f(M_i) inside M_i on cut sides
  int grid_points = 0;
  double isolation = 0.0;          // max distance to the piece of strand points trapped in M_i \ M_{i-1}
  int isolation_points = 0;
  bool pass = false;
};

struct BasicPieceSet {
  std::vector<Piece> pieces;
  std::vector<std::pair<int, int>> edges;  // (i, j): piece i > piece j in the order, i.e. W^u(i) meets W^s(j)
  bool has_template = false;
  double rho = 0.1;                        // filtration cut offset below the repelling endpoint
  double cover_margin = 0.0;               // half the gap between the cover boundary and the core boundary
  std::vector<Box> filtration_regions;     // R_k; M_i is the union of R_0..R_i
  std::vector<bool> uniform_coord;         // coordinates ignored by piece distances
  FiltrationCheck filtration_check;

  int q() const { return static_cast<int>(pieces.size()); }
  bool in_cover(int i, const Vec& x) const { return pieces[static_cast<size_t>(i)].cover.contains(x); }
  bool in_filtration(int i, const Vec& x) const;
  double piece_distance(int i, const Vec& x) const;
  /// Index of the piece within `tol`, or -1.
  int nearest_piece(const Vec& x, double tol) const;
  bool is_linear_extension() const;
  nlohmann::json to_json() const;
};

/// Cut levels of the mask template on a quadratic factor: attractor cover x < a, repeller cover
/// x > w, cores split at mid.
struct MaskLevels {
  double a = 0.0, w = 0.0, mid = 0.0;
};
MaskLevels quadratic_mask_levels(const Block& b, double rho);

struct SpectralConfig {
  double rho = 0.1;
  double shot_size = 1e-3;
  int shot_steps = 200;
  double resolution = 1e-3;
  int no_template_max_period = 4;
  int filtration_grid = 10000;
  int isolation_steps = 40;
  double isolation_tol = 1e-3;
};

/// Pieces, order and covers. Template systems use the block structure; other systems fall back
/// to periodic orbits (refusing ambiguous clusterings). Filtration checks run on `sample` when given.
BasicPieceSet spectral_decomposition(const Endomorphism& f, const SpectralConfig& cfg = {},
                                     const OrbitSample* sample = nullptr);

/// Filtration regions from the block template, checked for forward invariance and isolation;
/// tightens rho once on failure, then throws.
void build_filtration(BasicPieceSet& pieces, const Endomorphism& f, const SpectralConfig& cfg,
                      const OrbitSample* sample);

}  // namespace invlim
