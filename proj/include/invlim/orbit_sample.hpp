#pragma once

#include "invlim/phase_space.hpp"
#include "invlim/systems_zoo.hpp"

#include <cstdint>
#include <vector>

namespace invlim {

/// Sample point: column `index` of strand `strand`.
struct PointId {
  int strand = 0;
  int index = 0;
  bool operator==(const PointId&) const = default;
};

struct SampleConfig {
  int strands = 64;   // random strands (constant strands at fixed points are added on top)
  int past = 80;
  int future = 80;
  int window = 24;    // half-length K of the window attached to a point
  int margin = 48;    // interior points sit at least this far from both strand ends
  std::uint64_t seed = 1;
};

struct LipschitzPair {
  PointId a, b;
  double dinf = 0.0;
};

/// A finite set of long orbit segments ("strands") x_0, ..., x_{L-1} of f. Every column j with
/// window <= j <= L-1-window carries the window (x_{j-K}, ..., x_{j+K}), a point of the inverse
/// limit up to the certified tail. f acts on the sample as j -> j+1.
class OrbitSample {
 public:
  OrbitSample(const Endomorphism& f, const SampleConfig& cfg);
  /// Sample over caller-supplied strands (all of the same length).
  OrbitSample(const Endomorphism& f, std::vector<Mat> strands, int window, int margin);

  const Endomorphism& map() const { return f_; }
  const ModelSpace& space() const { return f_.space; }
  int dim() const { return f_.dim(); }
  int strand_count() const { return static_cast<int>(strands_.size()); }
  int length() const { return length_; }
  int window() const { return window_; }
  int margin() const { return margin_; }
  const Mat& strand(int s) const { return strands_[static_cast<size_t>(s)]; }
  const std::vector<Mat>& strands() const { return strands_; }
  auto point(int s, int j) const { return strands_[static_cast<size_t>(s)].col(j); }
  auto point(PointId p) const { return point(p.strand, p.index); }

  bool windowed(int j) const { return j >= window_ && j <= length_ - 1 - window_; }
  bool interior(int j) const { return j >= margin_ && j <= length_ - 1 - margin_; }
  OrbitWindow window_at(int s, int j) const;
  std::vector<PointId> window_points() const;
  std::vector<PointId> interior_points() const;

  /// Largest d(f(x_j), x_{j+1}) over all strands.
  double residual() const { return residual_; }

  double dinf(PointId a, PointId b) const;
  double d1(PointId a, PointId b) const;

  /// Pairs of interior points for Lipschitz estimates: neighbours in x_0 order plus random pairs,
  /// keeping only pairs with d_inf >= min_dinf.
  std::vector<LipschitzPair> lipschitz_pairs(int min_pairs = 1000, double min_dinf = 1e-4,
                                             std::uint64_t seed = 3) const;

 private:
  void finish();

  Endomorphism f_;
  std::vector<Mat> strands_;
  int length_ = 0;
  int window_ = 0;
  int margin_ = 0;
  double residual_ = 0.0;
};

/// Known fixed points of the product template (all combinations of block piece points).
std::vector<Vec> template_fixed_points(const Endomorphism& f);

}  // namespace invlim
