#pragma once

#include "invlim/hyperbolic_structure.hpp"
#include "invlim/invariant_bundles.hpp"
#include "invlim/orbit_sample.hpp"
#include "invlim/smoothing.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace invlim {

/// Vector field along the sample: one N' x L matrix per strand, column j at x_j.
using Section = std::vector<Mat>;

Section zero_section(const OrbitSample& sample, int rows);
/// sup of the column norms; `interior_only` restricts to interior columns, `rows` > 0 to the top rows.
double section_sup(const Section& v, const OrbitSample& sample, bool interior_only = true, int rows = -1);
Section operator+(const Section& a, const Section& b);
Section operator-(const Section& a, const Section& b);

/// (F_* w)_j = F_{x_{j-1}} w_{j-1}; zero at j = 0.
Section push_forward(const Section& w, const SmoothedDerivatived& F, const OrbitSample& sample);

/// Phi(w)_j = (log_{x_j} g(exp_{x_{j-1}} w_1(j-1)), 0); zero at j = 0. Throws when a periodic
/// displacement reaches 1/4.
Section phi_operator(const Section& w, const Endomorphism& g, const OrbitSample& sample);

/// Right inverse J of F_* - I built from the bundle family and the partition of unity.
class RightInverse {
 public:
  RightInverse(const BasicPieceSet& pieces, const BundleFamily& family, const PartitionOfUnity& pou,
               const SmoothedDerivatived& F, const OrbitSample& sample, double truncation_tol = 1e-10);

  Section apply(const Section& v) const;

  double lambda() const { return lambda_; }
  double D() const { return D_; }
  double C() const { return C_; }
  int q() const { return q_; }
  int truncation_steps() const { return n_trunc_; }
  /// 2 C D q / (1 - lambda).
  double norm_bound() const { return 2.0 * C_ * D_ * q_ / (1.0 - lambda_); }
  /// C D q lambda^margin / (1 - lambda): omitted tail of the series at interior points.
  double tail_bound() const;
  /// Points where a stable chain found no admissible cover (expected 0).
  int orphans() const { return orphans_; }

 private:
  struct Local {
    bool in = false;
    Mat pi_s;  // projector onto E^s along E^u
    Mat R;     // B_u (F B_u)^+
  };
  const Local& local(int i, int s, int j) const {
    return local_[(static_cast<size_t>(i) * S_ + static_cast<size_t>(s)) * L_ + static_cast<size_t>(j)];
  }
  int stable_target(int k_prev, int s, int j) const;
  int unstable_target(int k_next, int s, int j) const;
  void measure_constants();

  const PartitionOfUnity* pou_;
  const OrbitSample* sample_;
  size_t S_ = 0, L_ = 0;
  int q_ = 1, n_ = 0;
  std::vector<Local> local_;
  std::vector<Mat> Fmat_;  // F at every sample point, strand-major
  double lambda_ = 0.0, D_ = 1.0, C_ = 1.0;
  int n_trunc_ = 0;
  mutable int orphans_ = 0;
};

/// sup over interior points (j >= 1) of |(F_* - I) J v - v|.
double right_inverse_defect(const RightInverse& J, const Section& v, const SmoothedDerivatived& F,
                            const OrbitSample& sample);

/// Smooth section depending on x_0 only: random low-order trigonometric coefficients.
Section random_smooth_section(const OrbitSample& sample, int rows, std::uint64_t seed, double amplitude = 1.0);

// ---------------------------------------------------------------------------
// Injectivity and Lipschitz quantities

/// sup |w_1(a) - w_1(b)| / d_inf(a, b) over the pairs, with the maximizing pair.
struct LipschitzValue {
  double value = 0.0;
  LipschitzPair witness;
};
LipschitzValue section_lipschitz(const Section& w, const OrbitSample& sample, const std::vector<LipschitzPair>& pairs,
                                 int rows = -1);

struct RobbinCheck {
  double Lambda = 0.0;
  double threshold = 0.1;
  bool pass = false;
  LipschitzPair witness;
  nlohmann::json to_json() const;
};
/// h = id + w_1 is injective on the sample when Lambda = Lip(w_1) stays below the threshold.
RobbinCheck robbin_injectivity_check(const Section& w, const OrbitSample& sample,
                                     const std::vector<LipschitzPair>& pairs, double threshold = 0.1);

struct LipschitzLemmaFit {
  double A = 0.0, B = 0.0;          // Lip(J v) ~ A Lip(v) + B sup|v|
  double worst_ratio = 0.0;         // max measured / fitted
  int sections = 0;
  bool pass = false;                // worst_ratio <= 1.1
  nlohmann::json to_json() const;
};
LipschitzLemmaFit lipschitz_lemma_measurement(const RightInverse& J, const OrbitSample& sample,
                                              const std::vector<LipschitzPair>& pairs, int sections = 12,
                                              std::uint64_t seed = 5);

// ---------------------------------------------------------------------------
// Conjugacy solve

struct ConjugacyConfig {
  double delta = -1.0;          // <= 0 selects the automatic pre-pass
  double eta = 0.05;            // solve stops when sup |w| exceeds 2 eta on the interior
  int max_iters = 200;
  double tol = 1e-10;           // stop when the sup change of phi falls below this
  double truncation_tol = 1e-10;
  double c1_tol = 1e-8;
  double robbin_threshold = 0.1;
  BundleConfig bundles;
  PartitionConfig partition;
};

enum class SolveStatus { Converged, MaxIterations, Diverged, EtaExceeded };
std::string to_string(SolveStatus s);

struct SolveReport {
  SolveStatus status = SolveStatus::MaxIterations;
  int iterations = 0;
  std::vector<double> changes;
  double contraction_factor = 0.0;
  double delta = 0.0;
  double lambda = 0.0, K = 0.0, D = 0.0, C = 0.0;
  int truncation_steps = 0;
  double norm_bound = 0.0, tail_bound = 0.0;
  double right_inverse_defect = 0.0;
  double c1 = 0.0;   // interior sup |x_{j+1} + w_1(j+1) - g(x_j + w_1(j))|
  double c2 = 0.0;   // interior sup |w_1|
  double c3 = 0.0;   // Lambda(w)
  bool c1_pass = false, c2_pass = false, c3_pass = false;
  RobbinCheck robbin;
  std::vector<std::pair<double, double>> delta_prepass;  // (delta, contraction factor)
  Section w;

  bool converged() const { return status == SolveStatus::Converged; }
  nlohmann::json to_json() const;
};

struct ConjugacyContext {
  const OrbitSample* sample;
  const BasicPieceSet* pieces;
  const PartitionOfUnity* pou;
};

/// Fixed point of phi -> F_*(J phi) - Phi(J phi); w = J phi displaces x toward the g-orbit.
SolveReport solve_conjugacy(const Endomorphism& g, const ConjugacyContext& ctx, const ConjugacyConfig& cfg);

/// Rows x_1..x_N, h_1..h_N of h_0(x) = exp_x(w_1(x)) at interior points.
struct ConjugacyMap {
  Mat x, h;
};
ConjugacyMap extract_h0(const Section& w, const OrbitSample& sample);

struct SurjectivityReport {
  double resolution = 0.0;   // median nearest-neighbour distance among the h images
  double coverage = 0.0;     // fraction of g-orbit points within 2 x resolution of an image
  double worst = 0.0;
  int probes = 0;
  nlohmann::json to_json() const;
};
/// Compares h_0 images with forward g-orbits in the x_0 projection.
SurjectivityReport surjectivity_coverage(const Section& w, const OrbitSample& sample, const Endomorphism& g,
                                         int probes = 2000, std::uint64_t seed = 9);

std::string section_to_csv(const Section& w, const OrbitSample& sample);
/// Per interior point: conjugacy residual and |w_1|.
std::string residuals_to_csv(const Section& w, const OrbitSample& sample, const Endomorphism& g);

}  // namespace invlim
