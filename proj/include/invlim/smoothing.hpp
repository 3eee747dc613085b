#pragma once

#include "invlim/hyperbolic_structure.hpp"
#include "invlim/orbit_sample.hpp"
#include "invlim/phase_space.hpp"
#include "invlim/systems_zoo.hpp"

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

namespace invlim {

// ---------------------------------------------------------------------------
// Augmented derivative on the doubled trivialization R^N x R^N

/// v = (v1, v2) -> (Df(x) v1 + delta v2, delta v1). Invertible for delta > 0 even where Df is not.
template <class Scalar>
class SmoothedDerivative {
 public:
  using MatrixType = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using VectorType = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using DerivativeFn = std::function<MatrixType(const VectorType&)>;

  SmoothedDerivative(DerivativeFn derivative, int n, Scalar delta)
      : derivative_(std::move(derivative)), n_(n), delta_(delta) {
    if (!(delta >= Scalar(0))) throw std::invalid_argument("smoothed derivative: delta must be >= 0");
  }

  Scalar delta() const { return delta_; }
  int base_dim() const { return n_; }
  int doubled_dim() const { return 2 * n_; }
  bool invertible() const { return delta_ > Scalar(0); }

  MatrixType derivative(const VectorType& x) const { return derivative_(x); }

  MatrixType matrix(const VectorType& x) const {
    MatrixType m = MatrixType::Zero(2 * n_, 2 * n_);
    m.topLeftCorner(n_, n_) = derivative_(x);
    m.topRightCorner(n_, n_).diagonal().setConstant(delta_);
    m.bottomLeftCorner(n_, n_).diagonal().setConstant(delta_);
    return m;
  }

  /// Closed-form block inverse: v1 = w2 / delta, v2 = (w1 - Df v1) / delta.
  MatrixType inverse_matrix(const VectorType& x) const {
    require_invertible();
    const MatrixType D = derivative_(x);
    MatrixType m = MatrixType::Zero(2 * n_, 2 * n_);
    m.topRightCorner(n_, n_).diagonal().setConstant(Scalar(1) / delta_);
    m.bottomLeftCorner(n_, n_).diagonal().setConstant(Scalar(1) / delta_);
    m.bottomRightCorner(n_, n_) = -D / (delta_ * delta_);
    return m;
  }

  /// Applies F^delta at x to each column of v.
  template <class Derived>
  MatrixType apply(const VectorType& x, const Eigen::MatrixBase<Derived>& v) const {
    check_rows(v.rows());
    const MatrixType D = derivative_(x);
    MatrixType out(2 * n_, v.cols());
    out.topRows(n_) = D * v.topRows(n_) + delta_ * v.bottomRows(n_);
    out.bottomRows(n_) = delta_ * v.topRows(n_);
    return out;
  }

  template <class Derived>
  MatrixType apply_inverse(const VectorType& x, const Eigen::MatrixBase<Derived>& w) const {
    require_invertible();
    check_rows(w.rows());
    const MatrixType D = derivative_(x);
    MatrixType out(2 * n_, w.cols());
    out.topRows(n_) = w.bottomRows(n_) / delta_;
    out.bottomRows(n_) = (w.topRows(n_) - D * out.topRows(n_)) / delta_;
    return out;
  }

  /// Operator norm of the inverse at x.
  Scalar inverse_norm(const VectorType& x) const {
    Eigen::JacobiSVD<MatrixType> svd(inverse_matrix(x));
    return svd.singularValues()(0);
  }

  /// Bound from the block form of the inverse: 1/delta + |Df(x)| / delta^2.
  Scalar inverse_norm_bound(const VectorType& x) const {
    require_invertible();
    Eigen::JacobiSVD<MatrixType> svd(derivative_(x));
    return Scalar(1) / delta_ + svd.singularValues()(0) / (delta_ * delta_);
  }

 private:
  void require_invertible() const {
    if (!(delta_ > Scalar(0))) throw std::domain_error("inverse undefined at delta=0");
  }
  void check_rows(Eigen::Index r) const {
    if (r != 2 * n_) throw std::invalid_argument("smoothed derivative: vector is not in the doubled space");
  }

  DerivativeFn derivative_;
  int n_;
  Scalar delta_;
};

using SmoothedDerivatived = SmoothedDerivative<double>;

SmoothedDerivatived smoothed_derivative(const Endomorphism& f, double delta);

// ---------------------------------------------------------------------------
// Bump kernel and mollification

/// rho(t) = exp(1 / (t^2 - 1)) on (-1, 1), 0 elsewhere.
struct BumpKernel {
  static double value(double t) {
    const double t2 = t * t;
    return t2 < 1.0 ? std::exp(1.0 / (t2 - 1.0)) : 0.0;
  }
  static double derivative(double t) {
    const double t2 = t * t;
    if (t2 >= 1.0) return 0.0;
    const double s = t2 - 1.0;
    return value(t) * (-2.0 * t / (s * s));
  }
  /// L = sup |rho'|, evaluated once on a fine grid.
  static double lipschitz();
};

struct GridFunction1D {
  double x0 = 0.0, h = 1.0;
  std::vector<double> values;
  double at(double x) const;  // linear interpolation, clamped to the grid
};

struct GridFunction2D {
  double x0 = 0.0, y0 = 0.0, hx = 1.0, hy = 1.0;
  Mat values;  // values(i, j) at (x0 + i hx, y0 + j hy)
  double at(double x, double y) const;  // bilinear interpolation
};

/// Discrete convolution with the bump scaled to radius delta. Near the boundary the radius shrinks
/// so the kernel stays symmetric about each node; linear data are reproduced exactly.
GridFunction1D mollify_c1_map(const GridFunction1D& f, double delta);
GridFunction2D mollify_c1_map(const GridFunction2D& f, double delta);

// ---------------------------------------------------------------------------
// Convolution on the inverse limit

struct ConvolutionConfig {
  double r = 0.05;
  int mc_samples = 100000;
  int halfwidth = 0;            // sample windows are (y_{-H}, ..., y_H)
  std::uint64_t seed = 1;
  Vec domain_lo, domain_hi;     // coordinates are i.i.d. uniform on this box
  int lipschitz_pairs = 4000;
};

struct ConvolutionResult {
  std::vector<double> phi_r, one_r, ratio, sigma, local_modulus;
  double L = 0.0;
  double sup_phi = 0.0;
  double lipschitz_measured = 0.0;  // sup over evaluated pairs of |phi_r(a) - phi_r(b)| / d1(a, b)
  double lipschitz_bound = 0.0;     // (L / r) sup |phi|
  double support_inflation = 0.0;   // max d1 distance from a point with phi_r != 0 to the sampled support
  int pairs = 0;
};

/// Monte Carlo estimate of phi_r(x) = E[phi(y) rho(d1(x, y) / r)] and 1_r at each window in `points`
/// (columns -H..H of each matrix). Throws when 1_r < 1e-9 somewhere.
ConvolutionResult convolve_on_inverse_limit(const ModelSpace& space, const std::vector<Mat>& points,
                                            const std::function<double(const Mat&)>& phi,
                                            const ConvolutionConfig& cfg);

// ---------------------------------------------------------------------------
// Partition of unity on the sample

struct PartitionConfig {
  int mc_samples = 200000;
  std::uint64_t seed = 1;
};

struct PartitionOfUnity {
  double r = 0.0;
  std::vector<Mat> gamma;            // gamma[i](s, j) at sample point (s, j)
  std::vector<double> lipschitz;     // measured d_inf Lipschitz constant per function
  double sum_defect = 0.0;           // max |sum_i gamma_i - 1|
  double support_violation = 0.0;   // max gamma_i at points outside W_i
  double range_violation = 0.0;      // how far any value leaves [0, 1]
  double gamma_at(int i, int s, int j) const { return gamma[static_cast<size_t>(i)](s, j); }
  int size() const { return static_cast<int>(gamma.size()); }
};

/// gamma_i = (1_{C_i})_r / 1_r with the cores C_i of `pieces` and r = half the cover margin.
PartitionOfUnity partition_of_unity(const BasicPieceSet& pieces, const OrbitSample& sample,
                                    const PartitionConfig& cfg = {});

}  // namespace invlim
