#pragma once

#include "invlim/hyperbolic_structure.hpp"
#include "invlim/orbit_sample.hpp"
#include "invlim/smoothing.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace invlim {

/// A subspace of R^{N'} attached to every sample point; `valid` marks where it is defined.
struct PlaneField {
  std::vector<std::vector<Subspaced>> planes;  // [strand][index]
  std::vector<std::vector<char>> valid;
  int dim = 0;
  double lipschitz_est = 0.0;  // sup d_G / d_inf over sampled pairs where both planes are valid

  static PlaneField constant(const OrbitSample& sample, const Subspaced& p);
  const Subspaced& at(int s, int j) const { return planes[static_cast<size_t>(s)][static_cast<size_t>(j)]; }
  bool defined(int s, int j) const { return valid[static_cast<size_t>(s)][static_cast<size_t>(j)] != 0; }
  /// sup d_G over points where both fields are defined.
  double distance(const PlaneField& other) const;
  void measure_lipschitz(const OrbitSample& sample, const std::vector<LipschitzPair>& pairs);
};

/// [x -> F^{-1}_{x_0}(P_{f(x)})]: point j receives the preimage of the plane at j+1.
PlaneField graph_transform_pullback(const PlaneField& P, const SmoothedDerivatived& F, const OrbitSample& sample);
/// [x -> F_{x_{-1}}(P_{f^{-1}(x)})]: point j receives the image of the plane at j-1.
PlaneField graph_transform_pushforward(const PlaneField& P, const SmoothedDerivatived& F, const OrbitSample& sample);

/// Smooth ramp equal to 0 at or below lo and 1 at or above hi.
double smooth_ramp(double x, double lo, double hi);

/// Blend of the orthogonal projectors: span((rho pi_P + (1 - rho) pi_E) B_E). Throws on rank loss.
Subspaced blend_planes(const Subspaced& P, const Subspaced& E, double rho);

struct PieceBundles {
  PlaneField stable, unstable;
  int stable_iterations = 0, unstable_iterations = 0;
  double stable_change = 0.0, unstable_change = 0.0;  // last sup d_G change
  double min_angle = 0.0;       // over sample points in W_i
  double min_expansion = 0.0;   // min |F v| / |v| over v in E^u, points in W_i (inf if E^u = 0)
  double contraction = 0.0;     // sup |F|E^s| within 0.01 of the piece
  double inv_expansion = 0.0;   // sup 1 / min expansion within 0.01 of the piece
  double K = 0.0;
};

struct BundleConfig {
  double delta = 0.01;
  double eta = -1.0;        // angle guard; negative selects half the minimal angle on the pieces
  int max_iters = 200;
  double tol = 1e-9;
  double ramp_width = 0.03;
  double near_piece = 0.01;
};

struct BundleFamily {
  double delta = 0.0;
  double eta = 0.0;
  double K = 0.0;
  double lambda = 0.0;
  std::vector<PieceBundles> pieces;
};

/// E^s_i by pull-back iteration from the seeds E' (eigen-data of each factor) glued by the ramp.
std::vector<PieceBundles> solve_stable_family(const BasicPieceSet& pieces, const SmoothedDerivatived& F,
                                              const OrbitSample& sample, const BundleConfig& cfg);
/// E^u_i by push-forward iteration, angle guarded against E^s_i; fills K, lambda.
BundleFamily solve_unstable_family(const BasicPieceSet& pieces, const SmoothedDerivatived& F,
                                   const OrbitSample& sample, std::vector<PieceBundles> stable,
                                   const BundleConfig& cfg);
BundleFamily solve_bundle_family(const BasicPieceSet& pieces, const OrbitSample& sample, const BundleConfig& cfg);

struct PrincipalItem {
  std::string name;
  double measured = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

struct PrincipalReport {
  std::vector<PrincipalItem> items;  // seven structural checks
  bool pass = false;
  nlohmann::json to_json() const;
};

PrincipalReport verify_principal(const BundleFamily& family, const BasicPieceSet& pieces,
                                 const SmoothedDerivatived& F, const OrbitSample& sample);

/// CSV rows: piece, kind, strand, index, x..., dim, basis entries (column-major).
std::string bundles_to_csv(const BundleFamily& family, const OrbitSample& sample, bool interior_only = true);

}  // namespace invlim
