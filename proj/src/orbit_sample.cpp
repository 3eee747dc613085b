#include "invlim/orbit_sample.hpp"

#include "invlim/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace invlim {

namespace {

Mat uniform_block_strand(const Block& b, int L, Rng& rng) {
  const int d = b.size();
  const Mat Ainv = b.A.inverse();
  const int deg = static_cast<int>(std::llround(std::abs(b.A.determinant())));
  Mat s(d, L);
  for (int i = 0; i < d; ++i) s(i, L - 1) = uniform01(rng);
  for (int j = L - 2; j >= 0; --j) {
    Vec y = s.col(j + 1);
    for (int i = 0; i < d; ++i) y(i) += std::floor(uniform01(rng) * deg);
    Vec x = Ainv * y;
    for (int i = 0; i < d; ++i) x(i) -= std::floor(x(i));
    s.col(j) = x;
  }
  return s;
}

Mat quadratic_block_strand(const Block& b, int L, int mid, Rng& rng) {
  Mat s(1, L);
  const double lo = b.core_lo(), hi = b.core_hi();
  s(0, mid) = uniform(rng, lo, hi);
  for (int j = mid - 1; j >= 0; --j) {
    const double r = std::sqrt(std::max(s(0, j + 1) - b.c, 0.0));
    const bool neg_ok = -r >= lo && r > 0.0;
    s(0, j) = (neg_ok && uniform01(rng) < 0.5) ? -r : r;
  }
  for (int j = mid + 1; j < L; ++j) s(0, j) = s(0, j - 1) * s(0, j - 1) + b.c;
  return s;
}

}  // namespace

std::vector<Vec> template_fixed_points(const Endomorphism& f) {
  std::vector<Vec> out;
  if (!f.has_template()) return out;
  const auto& blocks = f.known->blocks;
  std::vector<int> digit(blocks.size(), 0);
  while (true) {
    Vec p = Vec::Zero(f.dim());
    for (size_t b = 0; b < blocks.size(); ++b) {
      Vec q = blocks[b].piece_point(digit[b]);
      for (int i = 0; i < blocks[b].size(); ++i) p(blocks[b].coords[static_cast<size_t>(i)]) = q(i);
    }
    out.push_back(p);
    int b = static_cast<int>(blocks.size()) - 1;
    while (b >= 0 && ++digit[static_cast<size_t>(b)] == blocks[static_cast<size_t>(b)].piece_count()) {
      digit[static_cast<size_t>(b)] = 0;
      --b;
    }
    if (b < 0) break;
  }
  return out;
}

OrbitSample::OrbitSample(const Endomorphism& f, const SampleConfig& cfg)
    : f_(f), length_(cfg.past + cfg.future + 1), window_(cfg.window), margin_(cfg.margin) {
  if (cfg.strands < 1 || cfg.past < 1 || cfg.future < 1) throw std::invalid_argument("sample: strands and lengths must be positive");
  Rng rng(cfg.seed);
  const int d = f.dim();
  for (int s = 0; s < cfg.strands; ++s) {
    Mat st = Mat::Zero(d, length_);
    if (f.has_template()) {
      for (const auto& b : f.known->blocks) {
        Mat part;
        if (b.kind == BlockKind::Uniform) part = uniform_block_strand(b, length_, rng);
        else if (b.kind == BlockKind::Quadratic) part = quadratic_block_strand(b, length_, cfg.past, rng);
        else part = Mat::Zero(b.size(), length_);
        for (int i = 0; i < b.size(); ++i) st.row(b.coords[static_cast<size_t>(i)]) = part.row(i);
      }
    } else {
      auto [lo, hi] = f.core_box();
      Vec x(d);
      for (int i = 0; i < d; ++i) x(i) = uniform(rng, lo(i), hi(i));
      st.col(0) = x;
      for (int j = 1; j < length_; ++j) st.col(j) = f(Vec(st.col(j - 1)));
    }
    strands_.push_back(std::move(st));
  }
  std::vector<Vec> fixed = template_fixed_points(f);
  if (fixed.empty() && f.known) fixed = f.known->fixed_points;
  for (const Vec& p : fixed) strands_.push_back(p.replicate(1, length_));
  finish();
}

OrbitSample::OrbitSample(const Endomorphism& f, std::vector<Mat> strands, int window, int margin)
    : f_(f), strands_(std::move(strands)), window_(window), margin_(margin) {
  if (strands_.empty()) throw std::invalid_argument("sample: no strands");
  length_ = static_cast<int>(strands_.front().cols());
  for (const auto& s : strands_)
    if (s.cols() != length_ || s.rows() != f.dim()) throw std::invalid_argument("sample: strands differ in shape");
  finish();
}

void OrbitSample::finish() {
  if (window_ < 1 || 2 * window_ + 1 > length_) throw std::invalid_argument("sample: window does not fit the strands");
  if (margin_ < window_ || 2 * margin_ + 1 > length_) throw std::invalid_argument("sample: margin must lie in [window, (L-1)/2]");
  residual_ = 0.0;
  for (const auto& s : strands_)
    for (int j = 0; j + 1 < length_; ++j)
      residual_ = std::max(residual_, f_.space.distance(f_(Vec(s.col(j))), s.col(j + 1)));
}

OrbitWindow OrbitSample::window_at(int s, int j) const {
  if (!windowed(j)) throw std::out_of_range("sample: window exhaustion");
  return make_window(f_.space, Mat(strand(s).middleCols(j - window_, 2 * window_ + 1)), window_, f_);
}

std::vector<PointId> OrbitSample::window_points() const {
  std::vector<PointId> out;
  for (int s = 0; s < strand_count(); ++s)
    for (int j = window_; j <= length_ - 1 - window_; ++j) out.push_back({s, j});
  return out;
}

std::vector<PointId> OrbitSample::interior_points() const {
  std::vector<PointId> out;
  for (int s = 0; s < strand_count(); ++s)
    for (int j = margin_; j <= length_ - 1 - margin_; ++j) out.push_back({s, j});
  return out;
}

double OrbitSample::dinf(PointId a, PointId b) const {
  const auto& A = strand(a.strand);
  const auto& B = strand(b.strand);
  return dinf_columns(f_.space, A.middleCols(a.index - window_, 2 * window_ + 1), window_,
                      B.middleCols(b.index - window_, 2 * window_ + 1), window_)
      .value;
}

double OrbitSample::d1(PointId a, PointId b) const {
  const auto& A = strand(a.strand);
  const auto& B = strand(b.strand);
  return d1_columns(f_.space, A.middleCols(a.index - window_, 2 * window_ + 1), window_,
                    B.middleCols(b.index - window_, 2 * window_ + 1), window_)
      .value;
}

std::vector<LipschitzPair> OrbitSample::lipschitz_pairs(int min_pairs, double min_dinf, std::uint64_t seed) const {
  std::vector<PointId> pts = interior_points();
  std::vector<LipschitzPair> out;
  if (pts.size() < 2) return out;
  std::vector<size_t> order(pts.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return point(pts[a])(0) < point(pts[b])(0); });
  auto add = [&](PointId a, PointId b) {
    const double d = dinf(a, b);
    if (d >= min_dinf) out.push_back({a, b, d});
  };
  for (size_t k = 0; k + 1 < order.size(); ++k) add(pts[order[k]], pts[order[k + 1]]);
  Rng rng(seed);
  const size_t target = static_cast<size_t>(std::max(min_pairs, 0)) + out.size();
  for (size_t tries = 0; out.size() < target && tries < 50 * target; ++tries) {
    const size_t a = static_cast<size_t>(uniform01(rng) * static_cast<double>(pts.size()));
    const size_t b = static_cast<size_t>(uniform01(rng) * static_cast<double>(pts.size()));
    if (a != b) add(pts[a], pts[b]);
  }
  return out;
}

}  // namespace invlim
