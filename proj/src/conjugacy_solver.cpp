#include "invlim/conjugacy_solver.hpp"

#include "invlim/parallel.hpp"
#include "invlim/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace invlim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double op_norm(const Mat& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues()(0);
}

Vec top(const Mat& col, int n) { return col.topRows(n); }

}  // namespace

// ---------------------------------------------------------------------------
// Sections

Section zero_section(const OrbitSample& sample, int rows) {
  return Section(static_cast<size_t>(sample.strand_count()), Mat::Zero(rows, sample.length()));
}

double section_sup(const Section& v, const OrbitSample& sample, bool interior_only, int rows) {
  double m = 0.0;
  for (const Mat& M : v)
    for (int j = 0; j < M.cols(); ++j) {
      if (interior_only && !sample.interior(j)) continue;
      const double n = rows > 0 ? M.col(j).topRows(rows).lpNorm<Eigen::Infinity>() : M.col(j).lpNorm<Eigen::Infinity>();
      if (!std::isfinite(n)) return kInf;
      m = std::max(m, n);
    }
  return m;
}

Section operator+(const Section& a, const Section& b) {
  Section out(a.size());
  for (size_t s = 0; s < a.size(); ++s) out[s] = a[s] + b[s];
  return out;
}

Section operator-(const Section& a, const Section& b) {
  Section out(a.size());
  for (size_t s = 0; s < a.size(); ++s) out[s] = a[s] - b[s];
  return out;
}

Section push_forward(const Section& w, const SmoothedDerivatived& F, const OrbitSample& sample) {
  Section out = zero_section(sample, F.doubled_dim());
  parallel_for(sample.strand_count(), [&](int s) {
    for (int j = 1; j < sample.length(); ++j)
      out[static_cast<size_t>(s)].col(j) = F.apply(Vec(sample.point(s, j - 1)), w[static_cast<size_t>(s)].col(j - 1));
  });
  return out;
}

Section phi_operator(const Section& w, const Endomorphism& g, const OrbitSample& sample) {
  const int N = sample.dim();
  const ModelSpace& sp = sample.space();
  Section out = zero_section(sample, static_cast<int>(w.front().rows()));
  std::vector<char> bad(static_cast<size_t>(sample.strand_count()), 0);
  parallel_for(sample.strand_count(), [&](int s) {
    for (int j = 1; j < sample.length(); ++j) {
      const Vec y = sp.exp(Vec(sample.point(s, j - 1)), top(w[static_cast<size_t>(s)].col(j - 1), N));
      const Vec d = sp.log(Vec(sample.point(s, j)), g(y));
      if (sp.periodic() && d.lpNorm<Eigen::Infinity>() >= 0.25) bad[static_cast<size_t>(s)] = 1;
      out[static_cast<size_t>(s)].col(j).topRows(N) = d;
    }
  });
  if (std::any_of(bad.begin(), bad.end(), [](char b) { return b != 0; }))
    throw std::runtime_error("Phi: displacement reached 1/4 on a periodic coordinate");
  return out;
}

// ---------------------------------------------------------------------------
// Right inverse

RightInverse::RightInverse(const BasicPieceSet& pieces, const BundleFamily& family, const PartitionOfUnity& pou,
                           const SmoothedDerivatived& F, const OrbitSample& sample, double truncation_tol)
    : pou_(&pou), sample_(&sample) {
  S_ = static_cast<size_t>(sample.strand_count());
  L_ = static_cast<size_t>(sample.length());
  q_ = pieces.q();
  n_ = F.doubled_dim();
  if (static_cast<int>(family.pieces.size()) != q_ || pou.size() != q_)
    throw std::invalid_argument("right inverse: bundle family and partition do not match the pieces");
  lambda_ = family.lambda;
  if (!(lambda_ < 1.0)) throw std::runtime_error("right inverse: bundle rate lambda >= 1");
  Fmat_.resize(S_ * L_);
  local_.resize(static_cast<size_t>(q_) * S_ * L_);
  parallel_for(static_cast<int>(S_), [&](int s) {
    for (size_t j = 0; j < L_; ++j) {
      const Vec x = sample.point(s, static_cast<int>(j));
      const Mat Fx = F.matrix(x);
      Fmat_[static_cast<size_t>(s) * L_ + j] = Fx;
      for (int i = 0; i < q_; ++i) {
        Local& loc = local_[(static_cast<size_t>(i) * S_ + static_cast<size_t>(s)) * L_ + j];
        if (!pieces.in_cover(i, x)) continue;
        const auto& pb = family.pieces[static_cast<size_t>(i)];
        const Mat& Bs = pb.stable.at(s, static_cast<int>(j)).basis();
        const Mat& Bu = pb.unstable.at(s, static_cast<int>(j)).basis();
        Mat B(n_, n_);
        B << Bs, Bu;
        Mat P = Mat::Zero(n_, n_);
        P.topLeftCorner(Bs.cols(), Bs.cols()).setIdentity();
        loc.pi_s = B * P * B.inverse();
        if (Bu.cols() == 0) loc.R = Mat::Zero(n_, n_);
        else loc.R = Bu * Mat(Fx * Bu).completeOrthogonalDecomposition().pseudoInverse();
        loc.in = true;
      }
    }
  });
  measure_constants();
  n_trunc_ = 0;
  while (D_ * std::pow(lambda_, n_trunc_) / (1.0 - lambda_) >= truncation_tol) {
    ++n_trunc_;
    if (n_trunc_ > sample.margin())
      throw std::runtime_error("right inverse: truncation length exceeds the sample margin");
  }
}

int RightInverse::stable_target(int k_prev, int s, int j) const {
  for (int k = k_prev; k >= 0; --k)
    if (local(k, s, j).in) return k;
  return -1;
}

int RightInverse::unstable_target(int k_next, int s, int j) const {
  for (int k = k_next; k < q_; ++k)
    if (local(k, s, j).in) return k;
  return -1;
}

void RightInverse::measure_constants() {
  const int margin = sample_->margin();
  std::vector<double> Cs(S_, 1.0), Ds(S_, 1.0);
  parallel_for(static_cast<int>(S_), [&](int s) {
    double C = 1.0, D = 1.0;
    for (int i = 0; i < q_; ++i)
      for (size_t j0 = 0; j0 < L_; ++j0) {
        const Local& l0 = local(i, s, static_cast<int>(j0));
        if (!l0.in) continue;
        C = std::max({C, op_norm(l0.pi_s), op_norm(Mat::Identity(n_, n_) - l0.pi_s)});
        if (j0 % 3 != 0) continue;
        // Forward chain of the stable projection, backward chain of the unstable inverse.
        Mat M = l0.pi_s;
        int k = i;
        for (int n = 1; n <= margin && j0 + static_cast<size_t>(n) < L_; ++n) {
          const int j = static_cast<int>(j0) + n;
          k = stable_target(k, s, j);
          if (k < 0) break;
          M = local(k, s, j).pi_s * (Fmat_[static_cast<size_t>(s) * L_ + static_cast<size_t>(j - 1)] * M);
          D = std::max(D, op_norm(M) / (C * std::pow(lambda_, n)));
        }
        M = Mat::Identity(n_, n_) - l0.pi_s;
        k = i;
        for (int n = 1; n <= margin && static_cast<int>(j0) - n >= 0; ++n) {
          const int j = static_cast<int>(j0) - n;
          k = unstable_target(k, s, j);
          if (k < 0) break;
          M = local(k, s, j).R * M;
          D = std::max(D, op_norm(M) / (C * std::pow(lambda_, n)));
        }
      }
    Cs[static_cast<size_t>(s)] = C;
    Ds[static_cast<size_t>(s)] = D;
  });
  C_ = *std::max_element(Cs.begin(), Cs.end());
  D_ = *std::max_element(Ds.begin(), Ds.end());
}

double RightInverse::tail_bound() const {
  return C_ * D_ * q_ * std::pow(lambda_, sample_->margin()) / (1.0 - lambda_);
}

Section RightInverse::apply(const Section& v) const {
  Section out = zero_section(*sample_, n_);
  std::vector<int> orphan(S_, 0);
  parallel_for(static_cast<int>(S_), [&](int s) {
    Mat& o = out[static_cast<size_t>(s)];
    const Mat& vin = v[static_cast<size_t>(s)];
    const int L = static_cast<int>(L_);
    Mat vs = Mat::Zero(n_, L), vu = Mat::Zero(n_, L);
    for (int i = 0; i < q_; ++i) {
      std::vector<char> on(L_, 0);
      for (int j = 0; j < L; ++j) {
        const double gam = pou_->gamma_at(i, s, j);
        const Local& l = local(i, s, j);
        if (gam == 0.0 || !l.in) {
          vs.col(j).setZero();
          vu.col(j).setZero();
          continue;
        }
        on[static_cast<size_t>(j)] = 1;
        vs.col(j) = gam * (l.pi_s * vin.col(j));
        vu.col(j) = gam * vin.col(j) - vs.col(j);
      }
      // Stable chain: S(j) = v_s(j) + pi^s F S(j-1), carried to lower covers when x_j leaves W_k.
      Vec S = Vec::Zero(n_);
      bool active = false;
      int k = i;
      for (int j = 0; j < L; ++j) {
        if (active) {
          const int kj = stable_target(k, s, j);
          if (kj < 0) {
            ++orphan[static_cast<size_t>(s)];
            active = false;
            S.setZero();
          } else {
            S = local(kj, s, j).pi_s * (Fmat_[static_cast<size_t>(s) * L_ + static_cast<size_t>(j - 1)] * S);
            k = kj;
          }
        }
        if (on[static_cast<size_t>(j)]) {
          if (!active) {
            S = vs.col(j);
            k = i;
            active = true;
          } else {
            S += vs.col(j);
          }
        }
        if (active) o.col(j) -= S;
      }
      // Unstable chain: U(j) = R (v_u(j+1) + U(j+1)), carried to higher covers going backward.
      Vec U = Vec::Zero(n_);
      active = false;
      k = i;
      for (int j = L - 2; j >= 0; --j) {
        if (!active && !on[static_cast<size_t>(j + 1)]) continue;
        const int kj = unstable_target(active ? k : i, s, j);
        if (kj < 0) {
          ++orphan[static_cast<size_t>(s)];
          active = false;
          U.setZero();
          continue;
        }
        U = local(kj, s, j).R * (vu.col(j + 1) + U);
        k = kj;
        active = true;
        o.col(j) += U;
      }
    }
  });
  orphans_ = std::accumulate(orphan.begin(), orphan.end(), 0);
  return out;
}

double right_inverse_defect(const RightInverse& J, const Section& v, const SmoothedDerivatived& F,
                            const OrbitSample& sample) {
  const Section w = J.apply(v);
  const Section r = push_forward(w, F, sample) - w - v;
  double m = 0.0;
  for (const Mat& M : r)
    for (int j = 1; j < M.cols(); ++j)
      if (sample.interior(j)) m = std::max(m, M.col(j).lpNorm<Eigen::Infinity>());
  return m;
}

Section random_smooth_section(const OrbitSample& sample, int rows, std::uint64_t seed, double amplitude) {
  const int N = sample.dim();
  Rng rng(seed);
  const int kmax = 1 + static_cast<int>(uniform01(rng) * 4.0);
  Mat a(rows, N * kmax), b(rows, N * kmax);
  Vec c(rows);
  for (int r = 0; r < rows; ++r) {
    c(r) = uniform(rng, -1.0, 1.0);
    for (int m = 0; m < N * kmax; ++m) {
      a(r, m) = uniform(rng, -1.0, 1.0);
      b(r, m) = uniform(rng, -1.0, 1.0);
    }
  }
  Section out = zero_section(sample, rows);
  for (int s = 0; s < sample.strand_count(); ++s)
    for (int j = 0; j < sample.length(); ++j) {
      const auto x = sample.point(s, j);
      for (int r = 0; r < rows; ++r) {
        double val = c(r);
        for (int d = 0; d < N; ++d)
          for (int k = 1; k <= kmax; ++k) {
            const double t = 2.0 * M_PI * k * x(d);
            val += (a(r, d * kmax + k - 1) * std::cos(t) + b(r, d * kmax + k - 1) * std::sin(t)) / k;
          }
        out[static_cast<size_t>(s)](r, j) = amplitude * val;
      }
    }
  return out;
}

// ---------------------------------------------------------------------------
// Injectivity and Lipschitz quantities

LipschitzValue section_lipschitz(const Section& w, const OrbitSample& sample, const std::vector<LipschitzPair>& pairs,
                                 int rows) {
  LipschitzValue out;
  for (const auto& p : pairs) {
    const auto a = w[static_cast<size_t>(p.a.strand)].col(p.a.index);
    const auto b = w[static_cast<size_t>(p.b.strand)].col(p.b.index);
    const int n = rows > 0 ? rows : static_cast<int>(a.size());
    const double v = (a.topRows(n) - b.topRows(n)).lpNorm<Eigen::Infinity>() / p.dinf;
    if (v > out.value) {
      out.value = v;
      out.witness = p;
    }
  }
  (void)sample;
  return out;
}

nlohmann::json RobbinCheck::to_json() const {
  nlohmann::json j;
  j["Lambda"] = Lambda;
  j["threshold"] = threshold;
  j["pass"] = pass;
  j["witness"] = {{"a", {witness.a.strand, witness.a.index}},
                  {"b", {witness.b.strand, witness.b.index}},
                  {"dinf", witness.dinf}};
  return j;
}

RobbinCheck robbin_injectivity_check(const Section& w, const OrbitSample& sample,
                                     const std::vector<LipschitzPair>& pairs, double threshold) {
  const LipschitzValue lv = section_lipschitz(w, sample, pairs, sample.dim());
  RobbinCheck rc;
  rc.Lambda = lv.value;
  rc.threshold = threshold;
  rc.witness = lv.witness;
  rc.pass = std::isfinite(lv.value) && lv.value <= threshold;
  return rc;
}

nlohmann::json LipschitzLemmaFit::to_json() const {
  return {{"A", A}, {"B", B}, {"worst_ratio", worst_ratio}, {"sections", sections}, {"pass", pass}};
}

LipschitzLemmaFit lipschitz_lemma_measurement(const RightInverse& J, const OrbitSample& sample,
                                              const std::vector<LipschitzPair>& pairs, int sections,
                                              std::uint64_t seed) {
  const int rows = 2 * sample.dim();
  Mat X(sections, 2);
  Vec y(sections);
  for (int k = 0; k < sections; ++k) {
    const Section v = random_smooth_section(sample, rows, derive_seed(seed, static_cast<std::uint64_t>(k)),
                                            std::ldexp(1.0, -(k % 4)));
    X(k, 0) = section_lipschitz(v, sample, pairs).value;
    X(k, 1) = section_sup(v, sample, false);
    y(k) = section_lipschitz(J.apply(v), sample, pairs).value;
  }
  // Relative least squares: rows scaled by 1 / Lip(J v).
  Mat Xw = X;
  Vec yw = Vec::Ones(sections);
  for (int k = 0; k < sections; ++k) Xw.row(k) /= std::max(y(k), 1e-300);
  Vec ab = Xw.colPivHouseholderQr().solve(yw);
  LipschitzLemmaFit fit;
  fit.A = std::max(0.0, ab(0));
  fit.B = std::max(0.0, ab(1));
  fit.sections = sections;
  for (int k = 0; k < sections; ++k) {
    const double pred = fit.A * X(k, 0) + fit.B * X(k, 1);
    fit.worst_ratio = std::max(fit.worst_ratio, pred > 0.0 ? y(k) / pred : kInf);
  }
  fit.pass = fit.worst_ratio <= 1.1;
  return fit;
}

// ---------------------------------------------------------------------------
// Conjugacy solve

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIterations: return "max_iterations";
    case SolveStatus::Diverged: return "diverged";
    case SolveStatus::EtaExceeded: return "eta_exceeded";
  }
  return "unknown";
}

nlohmann::json SolveReport::to_json() const {
  nlohmann::json j;
  j["status"] = to_string(status);
  j["iterations"] = iterations;
  j["changes"] = changes;
  j["contraction_factor"] = contraction_factor;
  j["delta"] = delta;
  j["lambda"] = lambda;
  j["K"] = K;
  j["D"] = D;
  j["C"] = C;
  j["truncation_steps"] = truncation_steps;
  j["norm_bound"] = norm_bound;
  j["tail_bound"] = tail_bound;
  j["right_inverse_defect"] = right_inverse_defect;
  j["conditions"] = {{"C1", {{"value", c1}, {"pass", c1_pass}}},
                     {"C2", {{"value", c2}, {"pass", c2_pass}}},
                     {"C3", {{"value", c3}, {"pass", c3_pass}}}};
  j["robbin"] = robbin.to_json();
  nlohmann::json pp = nlohmann::json::array();
  for (const auto& [d, f] : delta_prepass) pp.push_back({{"delta", d}, {"contraction_factor", f}});
  j["delta_prepass"] = pp;
  return j;
}

namespace {

struct Iteration {
  SolveStatus status = SolveStatus::MaxIterations;
  std::vector<double> changes;
  double factor = 0.0;
  Section w;
};

Iteration iterate(const Endomorphism& g, const RightInverse& J, const SmoothedDerivatived& F,
                  const OrbitSample& sample, double eta, int max_iters, double tol) {
  Iteration it;
  Section phi = zero_section(sample, F.doubled_dim());
  int rising = 0;
  for (int n = 0; n < max_iters; ++n) {
    const Section w = J.apply(phi);
    if (section_sup(w, sample, true, sample.dim()) > 2.0 * eta) {
      it.status = SolveStatus::EtaExceeded;
      it.w = w;
      return it;
    }
    Section next;
    try {
      next = push_forward(w, F, sample) - phi_operator(w, g, sample);
    } catch (const std::runtime_error&) {
      it.status = SolveStatus::Diverged;
      it.w = w;
      return it;
    }
    const double change = section_sup(next - phi, sample, false);
    phi = std::move(next);
    if (!it.changes.empty() && it.changes.back() > 1e-13) {
      const double ratio = change / it.changes.back();
      it.factor = std::max(it.factor, ratio);
      rising = ratio > 1.0 ? rising + 1 : 0;
    }
    it.changes.push_back(change);
    if (!std::isfinite(change) || change > 1e6 || rising >= 3) {
      it.status = SolveStatus::Diverged;
      it.w = J.apply(phi);
      return it;
    }
    if (change < tol) {
      it.status = SolveStatus::Converged;
      break;
    }
  }
  it.w = J.apply(phi);
  return it;
}

struct Stage {
  SmoothedDerivatived F;
  BundleFamily family;
  RightInverse J;
};

Stage build_stage(const ConjugacyContext& ctx, const ConjugacyConfig& cfg, double delta) {
  BundleConfig bc = cfg.bundles;
  bc.delta = delta;
  SmoothedDerivatived F = smoothed_derivative(ctx.sample->map(), delta);
  BundleFamily fam = solve_bundle_family(*ctx.pieces, *ctx.sample, bc);
  RightInverse J(*ctx.pieces, fam, *ctx.pou, F, *ctx.sample, cfg.truncation_tol);
  return Stage{std::move(F), std::move(fam), std::move(J)};
}

}  // namespace

SolveReport solve_conjugacy(const Endomorphism& g, const ConjugacyContext& ctx, const ConjugacyConfig& cfg) {
  const OrbitSample& sample = *ctx.sample;
  if (g.space != sample.space()) throw std::invalid_argument("conjugacy: g lives on a different space");
  SolveReport rep;
  double delta = cfg.delta;
  if (!(delta > 0.0)) {
    double best = kInf;
    delta = 0.0;
    for (double d : {1e-1, 1e-2, 1e-3, 1e-4}) {
      double factor = kInf;
      try {
        Stage st = build_stage(ctx, cfg, d);
        Iteration it = iterate(g, st.J, st.F, sample, cfg.eta, 10, cfg.tol);
        if (it.status != SolveStatus::Diverged && it.status != SolveStatus::EtaExceeded) factor = it.factor;
      } catch (const std::runtime_error&) {
      }
      rep.delta_prepass.emplace_back(d, factor);
      if (factor < 0.9) {
        delta = d;
        break;
      }
      if (factor < best) {
        best = factor;
        delta = d;
      }
    }
    if (delta == 0.0) delta = 1e-4;
  }
  rep.delta = delta;
  Stage st = build_stage(ctx, cfg, delta);
  rep.lambda = st.J.lambda();
  rep.K = st.family.K;
  rep.D = st.J.D();
  rep.C = st.J.C();
  rep.truncation_steps = st.J.truncation_steps();
  rep.norm_bound = st.J.norm_bound();
  rep.tail_bound = st.J.tail_bound();
  rep.right_inverse_defect =
      right_inverse_defect(st.J, random_smooth_section(sample, st.F.doubled_dim(), 17), st.F, sample);

  Iteration it = iterate(g, st.J, st.F, sample, cfg.eta, cfg.max_iters, cfg.tol);
  rep.status = it.status;
  rep.iterations = static_cast<int>(it.changes.size());
  rep.changes = it.changes;
  rep.contraction_factor = it.factor;
  rep.w = std::move(it.w);

  const ModelSpace& sp = sample.space();
  const int N = sample.dim();
  for (int s = 0; s < sample.strand_count(); ++s)
    for (int j = 0; j + 1 < sample.length(); ++j) {
      if (!sample.interior(j)) continue;
      const Mat& W = rep.w[static_cast<size_t>(s)];
      rep.c2 = std::max(rep.c2, W.col(j).topRows(N).lpNorm<Eigen::Infinity>());
      if (!sample.interior(j + 1)) continue;
      const Vec hx = sp.exp(Vec(sample.point(s, j)), top(W.col(j), N));
      const Vec hy = sp.exp(Vec(sample.point(s, j + 1)), top(W.col(j + 1), N));
      rep.c1 = std::max(rep.c1, sp.distance(hy, g(hx)));
    }
  rep.robbin = robbin_injectivity_check(rep.w, sample, sample.lipschitz_pairs(), cfg.robbin_threshold);
  rep.c3 = rep.robbin.Lambda;
  rep.c1_pass = rep.c1 <= cfg.c1_tol;
  rep.c2_pass = rep.c2 <= cfg.eta;
  rep.c3_pass = rep.robbin.pass;
  return rep;
}

ConjugacyMap extract_h0(const Section& w, const OrbitSample& sample) {
  const auto pts = sample.interior_points();
  const int N = sample.dim();
  ConjugacyMap m;
  m.x.resize(N, static_cast<Eigen::Index>(pts.size()));
  m.h.resize(N, static_cast<Eigen::Index>(pts.size()));
  for (size_t k = 0; k < pts.size(); ++k) {
    const Vec x = sample.point(pts[k]);
    m.x.col(static_cast<Eigen::Index>(k)) = x;
    m.h.col(static_cast<Eigen::Index>(k)) =
        sample.space().reduce(sample.space().exp(x, top(w[static_cast<size_t>(pts[k].strand)].col(pts[k].index), N)));
  }
  return m;
}

nlohmann::json SurjectivityReport::to_json() const {
  return {{"resolution", resolution}, {"coverage", coverage}, {"worst", worst}, {"probes", probes}};
}

SurjectivityReport surjectivity_coverage(const Section& w, const OrbitSample& sample, const Endomorphism& g,
                                         int probes, std::uint64_t seed) {
  const ConjugacyMap hm = extract_h0(w, sample);
  const ModelSpace& sp = sample.space();
  const Eigen::Index P = hm.h.cols();
  SurjectivityReport rep;
  rep.probes = probes;
  if (P < 2) return rep;
  std::vector<double> nn(static_cast<size_t>(P), kInf);
  parallel_for(static_cast<int>(P), [&](int a) {
    for (Eigen::Index b = 0; b < P; ++b)
      if (b != a) nn[static_cast<size_t>(a)] = std::min(nn[static_cast<size_t>(a)], sp.distance(hm.h.col(a), hm.h.col(b)));
  });
  std::nth_element(nn.begin(), nn.begin() + P / 2, nn.end());
  rep.resolution = nn[static_cast<size_t>(P / 2)];
  auto [lo, hi] = g.core_box();
  Rng rng(seed);
  std::vector<Vec> pts(static_cast<size_t>(probes));
  for (auto& x : pts) {
    x.resize(sample.dim());
    for (int c = 0; c < sample.dim(); ++c) x(c) = uniform(rng, lo(c), hi(c));
    for (int n = 0; n < 60; ++n) x = g(x);
  }
  std::vector<double> dist(static_cast<size_t>(probes), kInf);
  parallel_for(probes, [&](int k) {
    for (Eigen::Index b = 0; b < P; ++b)
      dist[static_cast<size_t>(k)] = std::min(dist[static_cast<size_t>(k)], sp.distance(pts[static_cast<size_t>(k)], hm.h.col(b)));
  });
  int covered = 0;
  for (double d : dist) {
    if (d <= 2.0 * rep.resolution) ++covered;
    rep.worst = std::max(rep.worst, d);
  }
  rep.coverage = static_cast<double>(covered) / probes;
  return rep;
}

std::string section_to_csv(const Section& w, const OrbitSample& sample) {
  std::ostringstream os;
  os.precision(17);
  const int N = sample.dim();
  const int rows = static_cast<int>(w.front().rows());
  os << "strand,index";
  for (int c = 0; c < N; ++c) os << ",x" << c + 1;
  for (int r = 0; r < rows; ++r) os << ",w" << r + 1;
  os << "\n";
  for (const PointId& p : sample.interior_points()) {
    os << p.strand << "," << p.index;
    for (int c = 0; c < N; ++c) os << "," << sample.point(p)(c);
    for (int r = 0; r < rows; ++r) os << "," << w[static_cast<size_t>(p.strand)](r, p.index);
    os << "\n";
  }
  return os.str();
}

std::string residuals_to_csv(const Section& w, const OrbitSample& sample, const Endomorphism& g) {
  std::ostringstream os;
  os.precision(17);
  const ModelSpace& sp = sample.space();
  const int N = sample.dim();
  os << "strand,index,residual,displacement\n";
  for (const PointId& p : sample.interior_points()) {
    if (!sample.interior(p.index + 1)) continue;
    const Mat& W = w[static_cast<size_t>(p.strand)];
    const Vec hx = sp.exp(Vec(sample.point(p)), top(W.col(p.index), N));
    const Vec hy = sp.exp(Vec(sample.point(p.strand, p.index + 1)), top(W.col(p.index + 1), N));
    os << p.strand << "," << p.index << "," << sp.distance(hy, g(hx)) << ","
       << W.col(p.index).topRows(N).lpNorm<Eigen::Infinity>() << "\n";
  }
  return os.str();
}

}  // namespace invlim
