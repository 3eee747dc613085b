#include "invlim/invariant_bundles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace invlim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Real bases of the generalized eigenspaces of m inside / outside the unit circle.
std::pair<Subspaced, Subspaced> eigen_split(const Mat& m) {
  Eigen::EigenSolver<Mat> es(m);
  const int n = static_cast<int>(m.rows());
  std::vector<Vec> s, u;
  for (int i = 0; i < n; ++i) {
    const auto lam = es.eigenvalues()(i);
    if (lam.imag() < 0.0) continue;
    auto& dst = std::abs(lam) < 1.0 ? s : u;
    dst.push_back(es.eigenvectors().col(i).real());
    if (lam.imag() > 0.0) dst.push_back(es.eigenvectors().col(i).imag());
  }
  auto make = [n](const std::vector<Vec>& cols) {
    if (cols.empty()) return Subspaced::zero(n);
    Mat b(n, static_cast<Eigen::Index>(cols.size()));
    for (size_t k = 0; k < cols.size(); ++k) b.col(static_cast<Eigen::Index>(k)) = cols[k];
    return Subspaced(b);
  };
  return {make(s), make(u)};
}

Mat block_doubled(const Mat& Df, const std::vector<int>& coords, double delta) {
  const int m = static_cast<int>(coords.size());
  Mat b = Mat::Zero(2 * m, 2 * m);
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c) b(r, c) = Df(coords[static_cast<size_t>(r)], coords[static_cast<size_t>(c)]);
  b.topRightCorner(m, m).diagonal().setConstant(delta);
  b.bottomLeftCorner(m, m).diagonal().setConstant(delta);
  return b;
}

std::vector<int> doubled_indices(const Block& b, int N) {
  std::vector<int> idx(b.coords.begin(), b.coords.end());
  for (int c : b.coords) idx.push_back(N + c);
  return idx;
}

using Field = std::vector<std::vector<Subspaced>>;  // [strand][index]

struct BlockFields {
  Field stable, unstable;
  int stable_iterations = 0, unstable_iterations = 0;
  double stable_change = 0.0, unstable_change = 0.0;
};

double field_change(const Field& a, const Field& b) {
  double m = 0.0;
  for (size_t s = 0; s < a.size(); ++s)
    for (size_t j = 0; j < a[s].size(); ++j) m = std::max(m, grassmann_distance(a[s][j], b[s][j]));
  return m;
}

BlockFields constant_block_fields(const OrbitSample& sample, const Subspaced& s, const Subspaced& u) {
  BlockFields bf;
  bf.stable.assign(static_cast<size_t>(sample.strand_count()), std::vector<Subspaced>(static_cast<size_t>(sample.length()), s));
  bf.unstable.assign(static_cast<size_t>(sample.strand_count()), std::vector<Subspaced>(static_cast<size_t>(sample.length()), u));
  bf.stable_iterations = bf.unstable_iterations = 1;
  return bf;
}

/// Repelling quadratic factor: Gauss-Seidel graph-transform sweeps glued to the seed splitting by
/// the ramp, backward for E^s and forward for E^u.
BlockFields repeller_block_fields(const OrbitSample& sample, const Block& b, double delta, double w,
                                  const BundleConfig& cfg) {
  const int S = sample.strand_count(), L = sample.length();
  const int c = b.coords[0];
  auto [Es0, Eu0] = eigen_split(block_doubled(Mat::Constant(1, 1, 2.0 * b.beta()), {0}, delta));
  BlockFields bf = constant_block_fields(sample, Es0, Eu0);
  auto ramp = [&](int s, int j) { return smooth_ramp(sample.point(s, j)(c), w - cfg.ramp_width, w); };
  auto Fb = [&](int s, int j) {
    return block_doubled(sample.map().jacobian(Vec(sample.point(s, j))), {c}, delta);
  };
  for (int it = 1; it <= cfg.max_iters; ++it) {
    Field prev = bf.stable;
    for (int s = 0; s < S; ++s)
      for (int j = L - 2; j >= 0; --j) {
        const double r = ramp(s, j);
        auto& E = bf.stable[static_cast<size_t>(s)];
        if (r <= 0.0) {
          E[static_cast<size_t>(j)] = Es0;
          continue;
        }
        Subspaced P = preimage<double>(Fb(s, j), E[static_cast<size_t>(j + 1)]);
        if (P.dim() != Es0.dim()) throw std::runtime_error("stable field: fiber dimension changed under pull-back");
        E[static_cast<size_t>(j)] = blend_planes(P, Es0, r);
      }
    bf.stable_iterations = it;
    bf.stable_change = field_change(prev, bf.stable);
    if (bf.stable_change < cfg.tol) break;
  }
  for (int it = 1; it <= cfg.max_iters; ++it) {
    Field prev = bf.unstable;
    for (int s = 0; s < S; ++s)
      for (int j = 1; j < L; ++j) {
        const double r = ramp(s, j);
        auto& E = bf.unstable[static_cast<size_t>(s)];
        if (r <= 0.0) {
          E[static_cast<size_t>(j)] = Eu0;
          continue;
        }
        Subspaced P = image<double>(Fb(s, j - 1), E[static_cast<size_t>(j - 1)]);
        E[static_cast<size_t>(j)] = blend_planes(P, Eu0, r);
      }
    bf.unstable_iterations = it;
    bf.unstable_change = field_change(prev, bf.unstable);
    if (bf.unstable_change < cfg.tol) break;
  }
  return bf;
}

BlockFields block_fields(const OrbitSample& sample, const Block& b, int digit, double delta, double rho,
                         const BundleConfig& cfg) {
  const int m = b.size();
  if (b.kind == BlockKind::Uniform) {
    auto [s, u] = eigen_split(block_doubled(b.A, [m] {
      std::vector<int> v(static_cast<size_t>(m));
      for (int i = 0; i < m; ++i) v[static_cast<size_t>(i)] = i;
      return v;
    }(), delta));
    return constant_block_fields(sample, s, u);
  }
  if (b.kind == BlockKind::Quadratic && digit == 1)
    return repeller_block_fields(sample, b, delta, quadratic_mask_levels(b, rho).w, cfg);
  return constant_block_fields(sample, Subspaced::full(2 * m), Subspaced::zero(2 * m));
}

}  // namespace

// ---------------------------------------------------------------------------

PlaneField PlaneField::constant(const OrbitSample& sample, const Subspaced& p) {
  PlaneField f;
  f.dim = p.dim();
  f.planes.assign(static_cast<size_t>(sample.strand_count()), std::vector<Subspaced>(static_cast<size_t>(sample.length()), p));
  f.valid.assign(static_cast<size_t>(sample.strand_count()), std::vector<char>(static_cast<size_t>(sample.length()), 1));
  return f;
}

double PlaneField::distance(const PlaneField& o) const {
  double m = 0.0;
  for (size_t s = 0; s < planes.size(); ++s)
    for (size_t j = 0; j < planes[s].size(); ++j)
      if (valid[s][j] && o.valid[s][j]) m = std::max(m, grassmann_distance(planes[s][j], o.planes[s][j]));
  return m;
}

void PlaneField::measure_lipschitz(const OrbitSample&, const std::vector<LipschitzPair>& pairs) {
  lipschitz_est = 0.0;
  for (const auto& p : pairs) {
    if (!defined(p.a.strand, p.a.index) || !defined(p.b.strand, p.b.index)) continue;
    lipschitz_est = std::max(lipschitz_est, grassmann_distance(at(p.a.strand, p.a.index), at(p.b.strand, p.b.index)) / p.dinf);
  }
}

PlaneField graph_transform_pullback(const PlaneField& P, const SmoothedDerivatived& F, const OrbitSample& sample) {
  PlaneField out = P;
  const int L = sample.length();
  for (int s = 0; s < sample.strand_count(); ++s) {
    for (int j = 0; j + 1 < L; ++j) {
      if (!P.defined(s, j + 1)) {
        out.valid[static_cast<size_t>(s)][static_cast<size_t>(j)] = 0;
        continue;
      }
      const Vec x = sample.point(s, j);
      out.planes[static_cast<size_t>(s)][static_cast<size_t>(j)] =
          F.invertible() ? image<double>(F.inverse_matrix(x), P.at(s, j + 1)) : preimage<double>(F.matrix(x), P.at(s, j + 1));
    }
    out.valid[static_cast<size_t>(s)][static_cast<size_t>(L - 1)] = 0;
  }
  return out;
}

PlaneField graph_transform_pushforward(const PlaneField& P, const SmoothedDerivatived& F, const OrbitSample& sample) {
  PlaneField out = P;
  const int L = sample.length();
  for (int s = 0; s < sample.strand_count(); ++s) {
    out.valid[static_cast<size_t>(s)][0] = 0;
    for (int j = 1; j < L; ++j) {
      if (!P.defined(s, j - 1)) {
        out.valid[static_cast<size_t>(s)][static_cast<size_t>(j)] = 0;
        continue;
      }
      out.planes[static_cast<size_t>(s)][static_cast<size_t>(j)] =
          image<double>(F.matrix(Vec(sample.point(s, j - 1))), P.at(s, j - 1));
    }
  }
  return out;
}

double smooth_ramp(double x, double lo, double hi) {
  if (x <= lo) return 0.0;
  if (x >= hi) return 1.0;
  const double t = (x - lo) / (hi - lo);
  const double a = std::exp(-1.0 / t), b = std::exp(-1.0 / (1.0 - t));
  return a / (a + b);
}

Subspaced blend_planes(const Subspaced& P, const Subspaced& E, double rho) {
  if (rho >= 1.0) return P;
  if (rho <= 0.0) return E;
  if (P.dim() != E.dim()) throw std::runtime_error("blend: planes of different dimension");
  if (E.dim() == 0 || E.dim() == E.ambient()) return E;
  Mat m = (rho * P.projector() + (1.0 - rho) * E.projector()) * E.basis();
  try {
    return Subspaced(m, 1e-10);
  } catch (const std::runtime_error&) {
    throw std::runtime_error("blend: rank loss while gluing plane fields");
  }
}

// ---------------------------------------------------------------------------

std::vector<PieceBundles> solve_stable_family(const BasicPieceSet& pieces, const SmoothedDerivatived& F,
                                              const OrbitSample& sample, const BundleConfig& cfg) {
  const Endomorphism& f = sample.map();
  if (!f.has_template()) throw std::runtime_error("bundles: no product template for this system");
  const auto& blocks = f.known->blocks;
  const int N = f.dim(), S = sample.strand_count(), L = sample.length();
  std::vector<std::vector<BlockFields>> bf(blocks.size());
  for (size_t b = 0; b < blocks.size(); ++b)
    for (int digit = 0; digit < blocks[b].piece_count(); ++digit)
      bf[b].push_back(block_fields(sample, blocks[b], digit, F.delta(), pieces.rho, cfg));
  std::vector<PieceBundles> out(static_cast<size_t>(pieces.q()));
  for (int i = 0; i < pieces.q(); ++i) {
    const Piece& pc = pieces.pieces[static_cast<size_t>(i)];
    PieceBundles& pb = out[static_cast<size_t>(i)];
    for (auto* fld : {&pb.stable, &pb.unstable}) {
      fld->planes.assign(static_cast<size_t>(S), std::vector<Subspaced>(static_cast<size_t>(L)));
      fld->valid.assign(static_cast<size_t>(S), std::vector<char>(static_cast<size_t>(L), 0));
    }
    for (size_t b = 0; b < blocks.size(); ++b) {
      const BlockFields& B = bf[b][static_cast<size_t>(pc.block_pieces[b])];
      pb.stable_iterations = std::max(pb.stable_iterations, B.stable_iterations);
      pb.unstable_iterations = std::max(pb.unstable_iterations, B.unstable_iterations);
      pb.stable_change = std::max(pb.stable_change, B.stable_change);
      pb.unstable_change = std::max(pb.unstable_change, B.unstable_change);
    }
    for (int s = 0; s < S; ++s)
      for (int j = 0; j < L; ++j) {
        std::vector<std::pair<std::vector<int>, const Subspaced*>> ps, pu;
        for (size_t b = 0; b < blocks.size(); ++b) {
          const BlockFields& B = bf[b][static_cast<size_t>(pc.block_pieces[b])];
          ps.push_back({doubled_indices(blocks[b], N), &B.stable[static_cast<size_t>(s)][static_cast<size_t>(j)]});
          pu.push_back({doubled_indices(blocks[b], N), &B.unstable[static_cast<size_t>(s)][static_cast<size_t>(j)]});
        }
        pb.stable.planes[static_cast<size_t>(s)][static_cast<size_t>(j)] = embed_blocks(2 * N, ps);
        pb.unstable.planes[static_cast<size_t>(s)][static_cast<size_t>(j)] = embed_blocks(2 * N, pu);
        const char in = pieces.in_cover(i, Vec(sample.point(s, j))) ? 1 : 0;
        pb.stable.valid[static_cast<size_t>(s)][static_cast<size_t>(j)] = in;
        pb.unstable.valid[static_cast<size_t>(s)][static_cast<size_t>(j)] = in;
      }
    pb.stable.dim = pb.stable.planes[0][0].dim();
    pb.unstable.dim = pb.unstable.planes[0][0].dim();
  }
  return out;
}

BundleFamily solve_unstable_family(const BasicPieceSet& pieces, const SmoothedDerivatived& F, const OrbitSample& sample,
                                   std::vector<PieceBundles> stable, const BundleConfig& cfg) {
  BundleFamily fam;
  fam.delta = F.delta();
  fam.pieces = std::move(stable);
  const int S = sample.strand_count(), L = sample.length();
  const auto pairs = sample.lipschitz_pairs();
  double omega_angle = M_PI / 2;
  for (int i = 0; i < pieces.q(); ++i) {
    PieceBundles& pb = fam.pieces[static_cast<size_t>(i)];
    pb.min_angle = M_PI / 2;
    pb.min_expansion = kInf;
    for (int s = 0; s < S; ++s)
      for (int j = 0; j < L; ++j) {
        if (!pb.stable.defined(s, j)) continue;
        const Vec x = sample.point(s, j);
        const Subspaced& Es = pb.stable.at(s, j);
        const Subspaced& Eu = pb.unstable.at(s, j);
        if (Es.dim() + Eu.dim() != F.doubled_dim()) throw std::runtime_error("bundles: E^s and E^u do not span");
        const double ang = min_principal_angle(Es, Eu);
        pb.min_angle = std::min(pb.min_angle, ang);
        const Mat Fx = F.matrix(x);
        double expn = kInf;
        if (Eu.dim() > 0) {
          Eigen::JacobiSVD<Mat> sv(Mat(Fx * Eu.basis()));
          expn = sv.singularValues()(sv.singularValues().size() - 1);
        }
        pb.min_expansion = std::min(pb.min_expansion, expn);
        if (pieces.piece_distance(i, x) <= cfg.near_piece) {
          omega_angle = std::min(omega_angle, ang);
          if (Es.dim() > 0) {
            Eigen::JacobiSVD<Mat> sv(Mat(Fx * Es.basis()));
            pb.contraction = std::max(pb.contraction, sv.singularValues()(0));
          }
          if (Eu.dim() > 0) pb.inv_expansion = std::max(pb.inv_expansion, 1.0 / expn);
        }
      }
    pb.K = std::max(1.0 / pb.min_angle, std::isinf(pb.min_expansion) ? 0.0 : 1.0 / pb.min_expansion);
    pb.stable.measure_lipschitz(sample, pairs);
    pb.unstable.measure_lipschitz(sample, pairs);
    fam.K = std::max(fam.K, pb.K);
    fam.lambda = std::max({fam.lambda, pb.contraction, pb.inv_expansion});
  }
  fam.eta = cfg.eta > 0 ? cfg.eta : 0.5 * omega_angle;
  for (const auto& pb : fam.pieces)
    if (pb.min_angle < fam.eta) throw std::runtime_error("bundles: angle guard violated (E^u too close to E^s)");
  return fam;
}

BundleFamily solve_bundle_family(const BasicPieceSet& pieces, const OrbitSample& sample, const BundleConfig& cfg) {
  SmoothedDerivatived F = smoothed_derivative(sample.map(), cfg.delta);
  return solve_unstable_family(pieces, F, sample, solve_stable_family(pieces, F, sample, cfg), cfg);
}

// ---------------------------------------------------------------------------

PrincipalReport verify_principal(const BundleFamily& fam, const BasicPieceSet& pieces, const SmoothedDerivatived& F,
                                 const OrbitSample& sample) {
  const int S = sample.strand_count(), L = sample.length(), q = pieces.q();
  double equiv = 0.0, nest = 0.0, dims_bad = 0.0, min_angle = M_PI / 2, lip = 0.0, min_exp = kInf;
  int upward = 0;
  for (int s = 0; s < S; ++s)
    for (int j = 0; j < L; ++j) {
      const Vec x = sample.point(s, j);
      for (int i = 0; i < q; ++i) {
        if (!pieces.in_cover(i, x)) continue;
        const auto& pb = fam.pieces[static_cast<size_t>(i)];
        if (pb.stable.at(s, j).dim() + pb.unstable.at(s, j).dim() != F.doubled_dim()) dims_bad += 1.0;
      }
      if (j + 1 >= L) continue;
      const Vec y = sample.point(s, j + 1);
      const Mat Fx = F.matrix(x);
      int kmin = -1;
      for (int k = 0; k < q && kmin < 0; ++k)
        if (pieces.in_cover(k, x)) kmin = k;
      for (int k = 0; k < q; ++k) {
        if (!pieces.in_cover(k, x)) continue;
        const auto& Pk = fam.pieces[static_cast<size_t>(k)];
        const Subspaced FEs = image<double>(Fx, Pk.stable.at(s, j));
        const Subspaced FEu = image<double>(Fx, Pk.unstable.at(s, j));
        for (int jj = 0; jj <= k; ++jj) {
          if (!pieces.in_cover(jj, y)) continue;
          const auto& Pj = fam.pieces[static_cast<size_t>(jj)];
          if (jj == k) {
            equiv = std::max(equiv, grassmann_distance(FEs, Pj.stable.at(s, j + 1)));
            equiv = std::max(equiv, grassmann_distance(FEu, Pj.unstable.at(s, j + 1)));
          }
          nest = std::max(nest, containment_defect(FEs, Pj.stable.at(s, j + 1)));
          nest = std::max(nest, containment_defect(Pj.unstable.at(s, j + 1), FEu));
        }
      }
      for (int J = kmin + 1; J < q && kmin >= 0; ++J)
        if (pieces.in_cover(J, y)) ++upward;
    }
  for (const auto& pb : fam.pieces) {
    min_angle = std::min(min_angle, pb.min_angle);
    min_exp = std::min(min_exp, pb.min_expansion);
    lip = std::max({lip, pb.stable.lipschitz_est, pb.unstable.lipschitz_est});
  }
  PrincipalReport r;
  r.items.push_back({"equivariance F(E_i(x)) = E_i(f x)", equiv, 1e-8, equiv <= 1e-8});
  r.items.push_back({"dynamic nesting across pieces", nest, 1e-6, nest <= 1e-6});
  r.items.push_back({"direct sum, min angle >= 1/K", min_angle, 1.0 / fam.K,
                     dims_bad == 0.0 && min_angle > 0.0 && min_angle >= 1.0 / fam.K - 1e-12});
  r.items.push_back({"measured Lipschitz constant finite", lip, kInf, std::isfinite(lip)});
  r.items.push_back({"expansion on E^u >= 1/K", std::isinf(min_exp) ? 1.0 / fam.K : min_exp, 1.0 / fam.K,
                     std::isinf(min_exp) || min_exp >= 1.0 / fam.K - 1e-12});
  const bool iso = !pieces.has_template || pieces.filtration_check.pass;
  r.items.push_back({"no transitions into higher covers", static_cast<double>(upward), 0.0, upward == 0 && iso});
  r.items.push_back({"contraction rate lambda < 1", fam.lambda, 1.0, fam.lambda < 1.0});
  r.pass = std::all_of(r.items.begin(), r.items.end(), [](const PrincipalItem& it) { return it.pass; });
  return r;
}

nlohmann::json PrincipalReport::to_json() const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& it : items) {
    nlohmann::json o;
    o["item"] = it.name;
    o["measured"] = it.measured;
    if (std::isinf(it.threshold)) o["threshold"] = "inf";
    else o["threshold"] = it.threshold;
    o["pass"] = it.pass;
    j.push_back(o);
  }
  return j;
}

std::string bundles_to_csv(const BundleFamily& fam, const OrbitSample& sample, bool interior_only) {
  std::ostringstream os;
  os.precision(17);
  os << "piece,kind,strand,index";
  for (int i = 0; i < sample.dim(); ++i) os << ",x" << i + 1;
  os << ",dim,basis\n";
  for (size_t i = 0; i < fam.pieces.size(); ++i)
    for (int kind = 0; kind < 2; ++kind) {
      const PlaneField& fld = kind == 0 ? fam.pieces[i].stable : fam.pieces[i].unstable;
      for (int s = 0; s < sample.strand_count(); ++s)
        for (int j = 0; j < sample.length(); ++j) {
          if (!fld.defined(s, j) || (interior_only && !sample.interior(j))) continue;
          os << i + 1 << "," << (kind == 0 ? "s" : "u") << "," << s << "," << j;
          for (int c = 0; c < sample.dim(); ++c) os << "," << sample.point(s, j)(c);
          const Mat& B = fld.at(s, j).basis();
          os << "," << B.cols() << ",";
          for (Eigen::Index k = 0; k < B.size(); ++k) os << (k ? " " : "") << B.data()[k];
          os << "\n";
        }
    }
  return os.str();
}

}  // namespace invlim
