#include "invlim/smoothing.hpp"

#include "invlim/parallel.hpp"
#include "invlim/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace invlim {

SmoothedDerivatived smoothed_derivative(const Endomorphism& f, double delta) {
  return SmoothedDerivatived(f.derivative, f.dim(), delta);
}

double BumpKernel::lipschitz() {
  static const double L = [] {
    double m = 0.0;
    const int n = 200000;
    for (int k = 1; k < n; ++k) m = std::max(m, std::abs(derivative(-1.0 + 2.0 * k / n)));
    return m;
  }();
  return L;
}

// ---------------------------------------------------------------------------

double GridFunction1D::at(double x) const {
  const int n = static_cast<int>(values.size());
  if (n == 1) return values[0];
  double t = std::clamp((x - x0) / h, 0.0, static_cast<double>(n - 1));
  const int i = std::min(static_cast<int>(t), n - 2);
  t -= i;
  return (1.0 - t) * values[static_cast<size_t>(i)] + t * values[static_cast<size_t>(i + 1)];
}

double GridFunction2D::at(double x, double y) const {
  const int nx = static_cast<int>(values.rows()), ny = static_cast<int>(values.cols());
  double s = std::clamp((x - x0) / hx, 0.0, static_cast<double>(nx - 1));
  double t = std::clamp((y - y0) / hy, 0.0, static_cast<double>(ny - 1));
  const int i = std::max(0, std::min(static_cast<int>(s), nx - 2));
  const int j = std::max(0, std::min(static_cast<int>(t), ny - 2));
  if (nx == 1 || ny == 1) return values(std::min(i, nx - 1), std::min(j, ny - 1));
  s -= i;
  t -= j;
  return (1 - s) * (1 - t) * values(i, j) + s * (1 - t) * values(i + 1, j) + (1 - s) * t * values(i, j + 1) +
         s * t * values(i + 1, j + 1);
}

namespace {

/// Symmetric normalized weights for node i of n, offsets -m..m.
std::vector<double> node_weights(int i, int n, double h, double delta) {
  const double R = std::min({delta, i * h, (n - 1 - i) * h});
  if (R < h) return {1.0};
  const int m = static_cast<int>(std::floor(R / h + 1e-12));
  std::vector<double> w(static_cast<size_t>(2 * m + 1));
  for (int k = -m; k <= m; ++k) w[static_cast<size_t>(k + m)] = BumpKernel::value(k * h / R);
  const double s = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& v : w) v /= s;
  return w;
}

}  // namespace

GridFunction1D mollify_c1_map(const GridFunction1D& f, double delta) {
  if (f.values.empty()) throw std::invalid_argument("mollify: empty grid");
  if (delta < f.h) throw std::invalid_argument("mollify: delta below grid resolution");
  const int n = static_cast<int>(f.values.size());
  GridFunction1D out = f;
  for (int i = 0; i < n; ++i) {
    auto w = node_weights(i, n, f.h, delta);
    const int m = static_cast<int>(w.size()) / 2;
    double acc = 0.0;
    for (int k = -m; k <= m; ++k) acc += w[static_cast<size_t>(k + m)] * f.values[static_cast<size_t>(i + k)];
    out.values[static_cast<size_t>(i)] = acc;
  }
  return out;
}

GridFunction2D mollify_c1_map(const GridFunction2D& f, double delta) {
  if (f.values.size() == 0) throw std::invalid_argument("mollify: empty grid");
  if (delta < std::max(f.hx, f.hy)) throw std::invalid_argument("mollify: delta below grid resolution");
  const int nx = static_cast<int>(f.values.rows()), ny = static_cast<int>(f.values.cols());
  GridFunction2D out = f;
  for (int i = 0; i < nx; ++i) {
    auto wx = node_weights(i, nx, f.hx, delta);
    const int mx = static_cast<int>(wx.size()) / 2;
    for (int j = 0; j < ny; ++j) {
      auto wy = node_weights(j, ny, f.hy, delta);
      const int my = static_cast<int>(wy.size()) / 2;
      double acc = 0.0;
      for (int a = -mx; a <= mx; ++a)
        for (int b = -my; b <= my; ++b)
          acc += wx[static_cast<size_t>(a + mx)] * wy[static_cast<size_t>(b + my)] * f.values(i + a, j + b);
      out.values(i, j) = acc;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

/// Monte Carlo windows binned by the first coordinate of y_0 in cells of width r.
class McSample {
 public:
  McSample(const ModelSpace& space, const Vec& lo, const Vec& hi, int halfwidth, int n, double r, std::uint64_t seed)
      : space_(space), H_(halfwidth), d_(space.dim), n_(n), r_(r), lo0_(lo(0)) {
    const int cols = 2 * H_ + 1;
    data_.resize(static_cast<size_t>(n) * static_cast<size_t>(d_ * cols));
    for (int k = 0; k < n; ++k) {
      SplitMixStream st(derive_seed(seed, static_cast<std::uint64_t>(k)));
      double* p = &data_[static_cast<size_t>(k) * static_cast<size_t>(d_ * cols)];
      for (int c = 0; c < cols; ++c)
        for (int i = 0; i < d_; ++i) p[c * d_ + i] = lo(i) + (hi(i) - lo(i)) * st.next01();
    }
    const double width = hi(0) - lo(0);
    nbins_ = width > 0 ? std::max(1, static_cast<int>(std::floor(width / r))) : 1;
    cell_ = width > 0 ? width / nbins_ : 1.0;
    bins_.resize(static_cast<size_t>(nbins_));
    for (int k = 0; k < n; ++k) bins_[static_cast<size_t>(bin_of(y0(k)(0)))].push_back(k);
  }

  int size() const { return n_; }
  Eigen::Map<const Mat> window(int k) const {
    return Eigen::Map<const Mat>(&data_[static_cast<size_t>(k) * static_cast<size_t>(d_ * (2 * H_ + 1))], d_, 2 * H_ + 1);
  }
  Eigen::Map<const Vec> y0(int k) const {
    return Eigen::Map<const Vec>(&data_[static_cast<size_t>(k) * static_cast<size_t>(d_ * (2 * H_ + 1)) + static_cast<size_t>(H_ * d_)], d_);
  }

  double d1(const Mat& x, int k) const {
    auto y = window(k);
    double s = 0.0;
    for (int c = 0; c <= 2 * H_; ++c) s += space_.distance(x.col(c), y.col(c)) / std::ldexp(1.0, std::abs(c - H_));
    return s;
  }

  /// Calls fn(k, d1) for every sample within d1 < r of the window x.
  template <class Fn>
  void for_each_near(const Mat& x, Fn&& fn) const {
    const int b = bin_of(x(0, H_));
    const bool wrap = space_.periodic();
    int seen[3];
    int count = 0;
    for (int db = -1; db <= 1; ++db) {
      int bb = b + db;
      if (wrap) bb = ((bb % nbins_) + nbins_) % nbins_;
      if (bb < 0 || bb >= nbins_) continue;
      bool dup = false;
      for (int t = 0; t < count; ++t) dup = dup || seen[t] == bb;
      if (dup) continue;
      seen[count++] = bb;
      for (int k : bins_[static_cast<size_t>(bb)]) {
        const double d = d1(x, k);
        if (d < r_) fn(k, d);
      }
    }
  }

 private:
  int bin_of(double v) const {
    const int b = static_cast<int>(std::floor((v - lo0_) / cell_));
    return std::clamp(b, 0, nbins_ - 1);
  }

  const ModelSpace& space_;
  int H_, d_, n_;
  double r_, lo0_;
  int nbins_ = 1;
  double cell_ = 1.0;
  std::vector<double> data_;
  std::vector<std::vector<int>> bins_;
};

}  // namespace

ConvolutionResult convolve_on_inverse_limit(const ModelSpace& space, const std::vector<Mat>& points,
                                            const std::function<double(const Mat&)>& phi,
                                            const ConvolutionConfig& cfg) {
  if (!(cfg.r > 0)) throw std::invalid_argument("convolution: r must be positive");
  if (cfg.mc_samples < 1) throw std::invalid_argument("convolution: need Monte Carlo samples");
  Vec lo = cfg.domain_lo.size() ? cfg.domain_lo : space.lower;
  Vec hi = cfg.domain_hi.size() ? cfg.domain_hi : space.upper;
  for (const auto& p : points)
    if (p.rows() != space.dim || p.cols() != 2 * cfg.halfwidth + 1)
      throw std::invalid_argument("convolution: evaluation window has wrong shape");
  McSample mc(space, lo, hi, cfg.halfwidth, cfg.mc_samples, cfg.r, cfg.seed);
  std::vector<double> phis(static_cast<size_t>(mc.size()));
  ConvolutionResult res;
  for (int k = 0; k < mc.size(); ++k) {
    phis[static_cast<size_t>(k)] = phi(Mat(mc.window(k)));
    res.sup_phi = std::max(res.sup_phi, std::abs(phis[static_cast<size_t>(k)]));
  }
  const int m = static_cast<int>(points.size());
  const double n = mc.size();
  res.phi_r.assign(static_cast<size_t>(m), 0.0);
  res.one_r = res.ratio = res.sigma = res.local_modulus = res.phi_r;
  std::vector<double> infl(static_cast<size_t>(m), 0.0);
  parallel_for(m, [&](int i) {
    const Mat& x = points[static_cast<size_t>(i)];
    const double px = phi(x);
    double A = 0, B = 0, w2 = 0, fw2 = 0, ffw2 = 0, mod = 0, supp = std::numeric_limits<double>::infinity();
    mc.for_each_near(x, [&](int k, double d) {
      const double w = BumpKernel::value(d / cfg.r);
      if (w <= 0.0) return;
      const double v = phis[static_cast<size_t>(k)];
      A += v * w;
      B += w;
      w2 += w * w;
      fw2 += v * w * w;
      ffw2 += v * v * w * w;
      mod = std::max(mod, std::abs(v - px));
      if (v != 0.0) supp = std::min(supp, d);
    });
    const size_t s = static_cast<size_t>(i);
    res.phi_r[s] = A / n;
    res.one_r[s] = B / n;
    if (res.one_r[s] >= 1e-9) {
      const double R = A / B;
      res.ratio[s] = R;
      const double var = (ffw2 - 2 * R * fw2 + R * R * w2) / n / (res.one_r[s] * res.one_r[s]) / n;
      res.sigma[s] = std::sqrt(std::max(var, 0.0));
    }
    res.local_modulus[s] = mod;
    infl[s] = A != 0.0 ? supp : 0.0;
  });
  for (int i = 0; i < m; ++i)
    if (res.one_r[static_cast<size_t>(i)] < 1e-9)
      throw std::runtime_error("convolution: 1_r below 1e-9 (r too small for the Monte Carlo density)");
  res.support_inflation = *std::max_element(infl.begin(), infl.end());
  res.L = BumpKernel::lipschitz();
  res.lipschitz_bound = res.L / cfg.r * res.sup_phi;

  std::vector<int> order(static_cast<size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return points[static_cast<size_t>(a)](0, cfg.halfwidth) < points[static_cast<size_t>(b)](0, cfg.halfwidth);
  });
  auto pair_ratio = [&](int a, int b) {
    double d = 0.0;
    const Mat& X = points[static_cast<size_t>(a)];
    const Mat& Y = points[static_cast<size_t>(b)];
    for (int c = 0; c <= 2 * cfg.halfwidth; ++c)
      d += space.distance(X.col(c), Y.col(c)) / std::ldexp(1.0, std::abs(c - cfg.halfwidth));
    if (d < 1e-12) return;
    ++res.pairs;
    res.lipschitz_measured =
        std::max(res.lipschitz_measured, std::abs(res.phi_r[static_cast<size_t>(a)] - res.phi_r[static_cast<size_t>(b)]) / d);
  };
  for (int k = 0; k + 1 < m; ++k) pair_ratio(order[static_cast<size_t>(k)], order[static_cast<size_t>(k + 1)]);
  Rng rng(cfg.seed ^ 0x5bd1e995ULL);
  for (int t = 0; t < cfg.lipschitz_pairs && m > 1; ++t)
    pair_ratio(static_cast<int>(uniform01(rng) * m), static_cast<int>(uniform01(rng) * m));
  return res;
}

// ---------------------------------------------------------------------------

PartitionOfUnity partition_of_unity(const BasicPieceSet& pieces, const OrbitSample& sample, const PartitionConfig& cfg) {
  PartitionOfUnity pu;
  const int q = pieces.q();
  const int S = sample.strand_count(), L = sample.length();
  pu.gamma.assign(static_cast<size_t>(q), Mat::Zero(S, L));
  pu.lipschitz.assign(static_cast<size_t>(q), 0.0);
  if (q == 1) {
    pu.gamma[0].setOnes();
    return pu;
  }
  if (!pieces.has_template) throw std::runtime_error("partition of unity: covers require a filtration template");
  pu.r = 0.5 * pieces.cover_margin;
  auto [lo, hi] = sample.map().core_box();
  McSample mc(sample.space(), lo, hi, 0, cfg.mc_samples, pu.r, cfg.seed);
  std::vector<int> label(static_cast<size_t>(mc.size()), -1);
  for (int k = 0; k < mc.size(); ++k) {
    const Vec y = mc.y0(k);
    for (int i = 0; i < q && label[static_cast<size_t>(k)] < 0; ++i)
      if (pieces.pieces[static_cast<size_t>(i)].core.contains(y)) label[static_cast<size_t>(k)] = i;
    if (label[static_cast<size_t>(k)] < 0) throw std::runtime_error("partition of unity: coverage gap in the cores");
  }
  std::vector<int> bad(static_cast<size_t>(S * L), 0);
  parallel_for(S * L, [&](int idx) {
    const int s = idx / L, j = idx % L;
    Mat x = sample.point(s, j);
    std::vector<double> acc(static_cast<size_t>(q), 0.0);
    mc.for_each_near(x, [&](int k, double d) { acc[static_cast<size_t>(label[static_cast<size_t>(k)])] += BumpKernel::value(d / pu.r); });
    const double total = std::accumulate(acc.begin(), acc.end(), 0.0);
    if (total / mc.size() < 1e-9) {
      bad[static_cast<size_t>(idx)] = 1;
      return;
    }
    for (int i = 0; i < q; ++i) pu.gamma[static_cast<size_t>(i)](s, j) = acc[static_cast<size_t>(i)] / total;
  });
  if (std::any_of(bad.begin(), bad.end(), [](int b) { return b != 0; }))
    throw std::runtime_error("partition of unity: 1_r below 1e-9 at a sample point (coverage gap)");
  for (int s = 0; s < S; ++s)
    for (int j = 0; j < L; ++j) {
      double sum = 0.0;
      const Vec x = sample.point(s, j);
      for (int i = 0; i < q; ++i) {
        const double g = pu.gamma[static_cast<size_t>(i)](s, j);
        sum += g;
        pu.range_violation = std::max({pu.range_violation, -g, g - 1.0});
        if (g > 0.0 && !pieces.in_cover(i, x)) pu.support_violation = std::max(pu.support_violation, g);
      }
      pu.sum_defect = std::max(pu.sum_defect, std::abs(sum - 1.0));
    }
  for (const auto& p : sample.lipschitz_pairs()) {
    for (int i = 0; i < q; ++i) {
      const double ga = pu.gamma[static_cast<size_t>(i)](p.a.strand, p.a.index);
      const double gb = pu.gamma[static_cast<size_t>(i)](p.b.strand, p.b.index);
      pu.lipschitz[static_cast<size_t>(i)] = std::max(pu.lipschitz[static_cast<size_t>(i)], std::abs(ga - gb) / p.dinf);
    }
  }
  return pu;
}

}  // namespace invlim
