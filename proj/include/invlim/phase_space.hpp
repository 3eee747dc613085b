#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace invlim {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class SpaceKind { Circle, Torus, Box };

/// Flat model space: the tangent bundle is trivial, exp is translation.
struct ModelSpace {
  SpaceKind kind = SpaceKind::Circle;
  int dim = 1;
  Vec lower;  // box bounds; unit cell for circle/torus
  Vec upper;

  static ModelSpace circle();
  static ModelSpace torus(int d);
  static ModelSpace box(const Vec& lo, const Vec& hi);

  int ambient_dim() const { return dim; }
  bool periodic() const { return kind != SpaceKind::Box; }
  double diameter() const;
  std::string describe() const;

  Vec reduce(const Vec& x) const;
  Vec exp(const Vec& x, const Vec& v) const;
  /// Displacement v with exp_x(v) = y; on periodic coordinates the shortest lift.
  Vec log(const Vec& x, const Vec& y) const;
  bool contains(const Vec& x, double tol = 0.0) const;

  template <class DA, class DB>
  double distance(const Eigen::MatrixBase<DA>& x, const Eigen::MatrixBase<DB>& y) const {
    double m = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      double d = std::abs(x(i) - y(i));
      if (periodic()) {
        d = d - std::floor(d);
        d = std::min(d, 1.0 - d);
      }
      m = std::max(m, d);
    }
    return m;
  }

  bool operator==(const ModelSpace& o) const;
  bool operator!=(const ModelSpace& o) const { return !(*this == o); }
};

/// Wraps a real number to (-1/2, 1/2].
inline double wrap_half(double t) {
  double r = t - std::round(t);
  if (r <= -0.5) r += 1.0;
  return r;
}

/// Finite truncation (x_{-Kb}, ..., x_{Kf}) of a point of the inverse limit.
struct OrbitWindow {
  ModelSpace space;
  int Kb = 0;
  int Kf = 0;
  Mat coords;  // dim x (Kb + Kf + 1); column k holds x_{k - Kb}
  double residual = 0.0;
  double tail_bound = 0.0;

  Eigen::Index length() const { return coords.cols(); }
  auto at(int n) const { return coords.col(n + Kb); }
};

/// Builds a window and records its pseudo-orbit residual under `map`.
template <class Map>
OrbitWindow make_window(const ModelSpace& space, const Mat& coords, int Kb, const Map& map) {
  if (Kb < 1 || coords.cols() - Kb - 1 < 1) throw std::invalid_argument("window needs Kb, Kf >= 1");
  OrbitWindow w;
  w.space = space;
  w.Kb = Kb;
  w.Kf = static_cast<int>(coords.cols()) - Kb - 1;
  w.coords = coords;
  for (Eigen::Index k = 0; k + 1 < coords.cols(); ++k)
    w.residual = std::max(w.residual, space.distance(map(Vec(coords.col(k))), coords.col(k + 1)));
  w.tail_bound = space.diameter() / std::ldexp(1.0, w.Kb) + space.diameter() / std::ldexp(1.0, w.Kf);
  return w;
}

struct MetricValue {
  double value = 0.0;
  double tail_bound = 0.0;  // true value lies in [value, value + tail_bound]
};

struct SupValue {
  double value = 0.0;
  bool interior = false;  // maximum attained away from the overlap endpoints
  int index = 0;
};

/// Weighted product metric over the overlap of two windows given as column blocks.
template <class DA, class DB>
MetricValue d1_columns(const ModelSpace& space, const Eigen::MatrixBase<DA>& a, int a_Kb,
                       const Eigen::MatrixBase<DB>& b, int b_Kb) {
  const int a_Kf = static_cast<int>(a.cols()) - a_Kb - 1;
  const int b_Kf = static_cast<int>(b.cols()) - b_Kb - 1;
  const int kb = std::min(a_Kb, b_Kb), kf = std::min(a_Kf, b_Kf);
  MetricValue out;
  for (int n = -kb; n <= kf; ++n)
    out.value += space.distance(a.col(n + a_Kb), b.col(n + b_Kb)) / std::ldexp(1.0, std::abs(n));
  out.tail_bound = 2.0 * (space.diameter() / std::ldexp(1.0, kb) + space.diameter() / std::ldexp(1.0, kf));
  return out;
}

template <class DA, class DB>
SupValue dinf_columns(const ModelSpace& space, const Eigen::MatrixBase<DA>& a, int a_Kb,
                      const Eigen::MatrixBase<DB>& b, int b_Kb) {
  const int a_Kf = static_cast<int>(a.cols()) - a_Kb - 1;
  const int b_Kf = static_cast<int>(b.cols()) - b_Kb - 1;
  const int kb = std::min(a_Kb, b_Kb), kf = std::min(a_Kf, b_Kf);
  SupValue out;
  out.value = -1.0;
  for (int n = -kb; n <= kf; ++n) {
    double d = space.distance(a.col(n + a_Kb), b.col(n + b_Kb));
    if (d > out.value) {
      out.value = d;
      out.index = n;
    }
  }
  out.interior = out.index != -kb && out.index != kf;
  return out;
}

MetricValue d1(const OrbitWindow& a, const OrbitWindow& b);
SupValue d_inf(const OrbitWindow& a, const OrbitWindow& b);
/// Window of the shifted point; both lengths shrink by |k|.
OrbitWindow shift(const OrbitWindow& a, int k);

std::string window_to_csv(const OrbitWindow& w);
std::string window_to_json(const OrbitWindow& w);
/// Parses the JSON form (array of rows [n, x_1, ..., x_d]); residual is not recomputed.
OrbitWindow window_from_json(const std::string& text, const ModelSpace& space);
OrbitWindow window_from_csv(const std::string& text, const ModelSpace& space);

// ---------------------------------------------------------------------------
// Grassmannian

template <class Scalar>
class Subspace {
 public:
  using MatrixType = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Subspace() = default;
  /// Orthonormal span of the columns of `m`; throws if the columns are rank deficient.
  explicit Subspace(const MatrixType& m, Scalar rank_tol = Scalar(1e-12)) {
    if (m.cols() == 0) {
      basis_ = MatrixType(m.rows(), 0);
      return;
    }
    Eigen::JacobiSVD<MatrixType> svd(m, Eigen::ComputeThinU);
    const auto& s = svd.singularValues();
    if (s(s.size() - 1) <= rank_tol * std::max(Scalar(1), s(0)))
      throw std::runtime_error("subspace rank collapse");
    basis_ = svd.matrixU().leftCols(m.cols());
  }
  static Subspace zero(int ambient) {
    Subspace s;
    s.basis_ = MatrixType(ambient, 0);
    return s;
  }
  static Subspace full(int ambient) {
    Subspace s;
    s.basis_ = MatrixType::Identity(ambient, ambient);
    return s;
  }

  const MatrixType& basis() const { return basis_; }
  int dim() const { return static_cast<int>(basis_.cols()); }
  int ambient() const { return static_cast<int>(basis_.rows()); }
  MatrixType projector() const { return basis_ * basis_.transpose(); }
  Scalar orthonormality_defect() const {
    if (dim() == 0) return Scalar(0);
    return (basis_.transpose() * basis_ - MatrixType::Identity(dim(), dim())).cwiseAbs().maxCoeff();
  }

 private:
  MatrixType basis_;
};

using Subspaced = Subspace<double>;

/// Operator norm of the difference of orthogonal projectors.
template <class Scalar>
Scalar grassmann_distance(const Subspace<Scalar>& p, const Subspace<Scalar>& q) {
  if (p.ambient() != q.ambient()) throw std::invalid_argument("subspaces in different ambient spaces");
  if (p.dim() != q.dim()) return Scalar(1);
  if (p.dim() == 0 || p.dim() == p.ambient()) return Scalar(0);
  using M = typename Subspace<Scalar>::MatrixType;
  M diff = p.projector() - q.projector();
  Eigen::SelfAdjointEigenSolver<M> es(diff, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Smallest angle between a nonzero vector of p and a nonzero vector of q (pi/2 if either is trivial).
template <class Scalar>
Scalar min_principal_angle(const Subspace<Scalar>& p, const Subspace<Scalar>& q) {
  if (p.dim() == 0 || q.dim() == 0) return Scalar(M_PI / 2);
  using M = typename Subspace<Scalar>::MatrixType;
  M c = p.basis().transpose() * q.basis();
  Eigen::JacobiSVD<M> svd(c);
  Scalar s = std::min(Scalar(1), svd.singularValues()(0));
  return std::acos(s);
}

/// sup over unit u in `inner` of the distance from u to `outer`.
template <class Scalar>
Scalar containment_defect(const Subspace<Scalar>& inner, const Subspace<Scalar>& outer) {
  if (inner.dim() == 0) return Scalar(0);
  using M = typename Subspace<Scalar>::MatrixType;
  M r = inner.basis() - outer.basis() * (outer.basis().transpose() * inner.basis());
  Eigen::JacobiSVD<M> svd(r);
  return svd.singularValues()(0);
}

/// Image of a subspace under a linear map.
template <class Scalar>
Subspace<Scalar> image(const typename Subspace<Scalar>::MatrixType& m, const Subspace<Scalar>& p) {
  if (p.dim() == 0) return Subspace<Scalar>::zero(static_cast<int>(m.rows()));
  return Subspace<Scalar>(m * p.basis());
}

/// Preimage {v : m v in p}; for invertible m this is m^{-1}(p).
template <class Scalar>
Subspace<Scalar> preimage(const typename Subspace<Scalar>::MatrixType& m, const Subspace<Scalar>& p) {
  using M = typename Subspace<Scalar>::MatrixType;
  const int n = static_cast<int>(m.cols());
  M q = (M::Identity(m.rows(), m.rows()) - p.projector()) * m;
  Eigen::JacobiSVD<M> svd(q, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const Scalar tol = Scalar(1e-10) * std::max(Scalar(1), m.norm());
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > tol) ++rank;
  if (rank == n) return Subspace<Scalar>::zero(n);
  return Subspace<Scalar>(M(svd.matrixV().rightCols(n - rank)));
}

/// Orthogonal direct sum of subspaces placed at the given coordinate index sets.
Subspaced embed_blocks(int ambient, const std::vector<std::pair<std::vector<int>, const Subspaced*>>& parts);

}  // namespace invlim
