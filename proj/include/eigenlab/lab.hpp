// SPDX-License-Identifier: Apache-2.0
//
// Empirical checks of the dynamics of the QR and LR maps: fixed-point
// classification, per-observation predicates over seeded samples, rotation
// speed, the one-step angle law, a continuity probe and an axiom audit.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "eigenlab/engine.hpp"
#include "eigenlab/json_io.hpp"

namespace eigenlab {

// ---------------------------------------------------------------------------
// Seeded sampling

/// Uniform and Gaussian draws built directly on mt19937_64 bits, so streams
/// are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t index(std::size_t lo, std::size_t hi) { return lo + static_cast<std::size_t>(engine_() % (hi - lo + 1)); }

  double gaussian() {
    double u = uniform();
    while (u <= 0.0) u = uniform();
    return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * std::numbers::pi * uniform());
  }

 private:
  std::mt19937_64 engine_;
};

/// Product of n random Householder reflections.
inline Matrix random_orthogonal(std::size_t n, Rng& rng) {
  Matrix q = Matrix::identity(n);
  std::vector<double> v(n);
  for (std::size_t r = 0; r < n; ++r) {
    double vv = 0.0;
    for (double& x : v) {
      x = rng.gaussian();
      vv += x * x;
    }
    for (std::size_t i = 0; i < n; ++i) {
      double w = 0.0;
      for (std::size_t k = 0; k < n; ++k) w += q(i, k) * v[k];
      w *= 2.0 / vv;
      for (std::size_t k = 0; k < n; ++k) q(i, k) -= w * v[k];
    }
  }
  return q;
}

/// Q · diag(spectrum) · Qᵀ
inline Matrix psd_from_spectrum(const std::vector<double>& spectrum, const Matrix& q) {
  return symmetrized(q * Matrix::diagonal(spectrum) * transpose(q));
}

/// Descending spectrum with lambda_1 in [0.5, 2] and consecutive ratios in
/// [0.1, max_ratio].
inline std::vector<double> gapped_spectrum(std::size_t n, double max_ratio, Rng& rng) {
  std::vector<double> s(n);
  s[0] = rng.uniform(0.5, 2.0);
  for (std::size_t i = 1; i < n; ++i) s[i] = s[i - 1] * rng.uniform(0.1, max_ratio);
  return s;
}

/// Positive definite spectrum spread over two decades.
inline std::vector<double> generic_spectrum(std::size_t n, Rng& rng) {
  const double scale = std::pow(10.0, rng.uniform(-1.0, 1.0));
  std::vector<double> s(n);
  for (double& x : s) x = scale * rng.uniform(0.01, 1.0);
  return s;
}

struct SamplerSpec {
  std::size_t min_n = 2;
  std::size_t max_n = 6;
  double max_ratio = 0.9;
};

inline SymPsdMatrix sample_gapped_psd(const SamplerSpec& spec, Rng& rng) {
  const std::size_t n = rng.index(spec.min_n, spec.max_n);
  const auto spectrum = gapped_spectrum(n, spec.max_ratio, rng);
  return SymPsdMatrix::unchecked(psd_from_spectrum(spectrum, random_orthogonal(n, rng)));
}

inline SymPsdMatrix sample_generic_psd(std::size_t min_n, std::size_t max_n, Rng& rng) {
  const std::size_t n = rng.index(min_n, max_n);
  const auto spectrum = generic_spectrum(n, rng);
  return SymPsdMatrix::unchecked(psd_from_spectrum(spectrum, random_orthogonal(n, rng)));
}

/// 2x2 sample parameters: major axis lambda1, axis ratio in [0.01, 0.99],
/// angle away from both coordinate axes.
struct Ellipse2Sample {
  double lambda1 = 1.0;
  double ratio = 0.5;
  double theta = 0.0;
  Matrix matrix() const { return rotated_diag2(lambda1, ratio * lambda1, theta); }
};

inline Ellipse2Sample sample_ellipse2(Rng& rng) {
  Ellipse2Sample s;
  s.lambda1 = rng.uniform(0.1, 10.0);
  s.ratio = rng.uniform(0.01, 0.99);
  const double mag = rng.uniform(0.01, std::numbers::pi / 2 - 0.01);
  s.theta = rng.uniform() < 0.5 ? -mag : mag;
  return s;
}

/// Clip negative eigenvalues to zero. Already-PSD input is returned as is.
inline SymPsdMatrix project_psd(const Matrix& m) {
  Matrix s = symmetrized(m);
  auto sd = jacobi_eigen(s);
  if (sd.eigenvalues.back() >= 0.0) return SymPsdMatrix::unchecked(std::move(s));
  for (double& x : sd.eigenvalues) x = std::max(0.0, x);
  return SymPsdMatrix::unchecked(psd_from_spectrum(sd.eigenvalues, sd.eigenvectors));
}

/// Gᵀ · m · G for G a product of Givens rotations with angles eps * N(0,1):
/// a small step along the orbit of matrices orthogonally similar to m.
inline Matrix isospectral_perturbation(const Matrix& m, double eps, Rng& rng) {
  const std::size_t n = m.size();
  Matrix g = Matrix::identity(n);
  for (std::size_t p = 0; p + 1 < n; ++p)
    for (std::size_t q = p + 1; q < n; ++q) {
      const double t = eps * rng.gaussian();
      const double c = std::cos(t);
      const double s = std::sin(t);
      for (std::size_t k = 0; k < n; ++k) {
        const double gp = g(k, p);
        const double gq = g(k, q);
        g(k, p) = c * gp - s * gq;
        g(k, q) = s * gp + c * gq;
      }
    }
  return symmetrized(transpose(g) * m * g);
}

// ---------------------------------------------------------------------------
// Step maps

/// A step function under study: QR (optionally shifted) or LR, applied to
/// the whole matrix without deflation.
struct StepMap {
  Algorithm algorithm = Algorithm::QR;
  ShiftStrategy shift;

  static StepMap qr() { return {}; }
  static StepMap lr() { return {Algorithm::LR, {}}; }
  static StepMap wilkinson_qr() { return {Algorithm::QR, ShiftStrategy::wilkinson()}; }

  std::string name() const {
    if (algorithm == Algorithm::LR) return "lr";
    return shift.kind == ShiftStrategy::Kind::None ? "qr" : "qr+" + shift.to_string();
  }

  SymPsdMatrix apply(const SymPsdMatrix& m) const {
    if (algorithm == Algorithm::LR) return lr_step(m);
    return shifted_qr_step(m, select_shift(shift, m)).matrix;
  }

  RunConfig run_config(double tol = 1e-10, std::size_t max_iters = 10000) const {
    RunConfig cfg;
    cfg.algorithm = algorithm;
    cfg.shift = shift;
    cfg.tol = tol;
    cfg.max_iters = max_iters;
    return cfg;
  }
};

inline double angle_after_step(Algorithm algorithm, const Matrix& m) {
  const auto s = SymPsdMatrix::unchecked(m);
  return major_axis_angle(algorithm == Algorithm::QR ? qr_step(s) : lr_step(s));
}

// ---------------------------------------------------------------------------
// Fixed points

enum class FixedPointClass { StableDescending, UnstableOrdering, MarginalTies, NotFixed };

inline std::string to_string(FixedPointClass c) {
  switch (c) {
    case FixedPointClass::StableDescending: return "StableDescending";
    case FixedPointClass::UnstableOrdering: return "UnstableOrdering";
    case FixedPointClass::MarginalTies: return "MarginalTies";
    case FixedPointClass::NotFixed: break;
  }
  return "NotFixed";
}

inline FixedPointClass classify_fixed_point(const Matrix& m, double tol) {
  const double threshold = tol * scale_of(m);
  if (offdiag_norm(m) > threshold) return FixedPointClass::NotFixed;
  const auto d = diagonal_of(m);
  bool descending = true;
  bool ties = false;
  for (std::size_t i = 0; i + 1 < d.size(); ++i) {
    descending = descending && d[i] > d[i + 1];
    ties = ties || std::abs(d[i] - d[i + 1]) <= threshold;
  }
  if (descending) return FixedPointClass::StableDescending;
  if (ties) return FixedPointClass::MarginalTies;
  return FixedPointClass::UnstableOrdering;
}

// ---------------------------------------------------------------------------
// Observation checks

struct Violation {
  std::size_t sample = 0;
  Matrix input;
  std::vector<double> measured;
  std::string note;
};

struct ObservationReport {
  int id = 0;
  std::string predicate;
  std::size_t samples_tested = 0;
  std::vector<Violation> violations;
  bool passed = true;
  double worst = 0.0;  // largest measured residual, where the predicate has one
};

namespace detail {

inline bool spectra_match(const Matrix& a, const Matrix& b, double rel) {
  const auto ea = eigenvalues_of(a);
  const auto eb = eigenvalues_of(b);
  const double ref = std::max({std::abs(ea.front()), std::abs(ea.back()), 1e-300});
  for (std::size_t i = 0; i < ea.size(); ++i)
    if (std::abs(ea[i] - eb[i]) > rel * ref) return false;
  return true;
}

inline double max_relative_spectrum_error(const Matrix& a, const Matrix& b) {
  const auto ea = eigenvalues_of(a);
  const auto eb = eigenvalues_of(b);
  const double ref = std::max({std::abs(ea.front()), std::abs(ea.back()), 1e-300});
  double worst = 0.0;
  for (std::size_t i = 0; i < ea.size(); ++i) worst = std::max(worst, std::abs(ea[i] - eb[i]) / ref);
  return worst;
}

inline void finish(ObservationReport& r) {
  r.passed = r.violations.empty();
  std::sort(r.violations.begin(), r.violations.end(),
            [](const Violation& a, const Violation& b) { return a.sample < b.sample; });
}

/// Largest-magnitude angle change |theta(f(M)) - theta(M)| of one step.
inline double rotation_of(Algorithm algorithm, const Matrix& m) {
  return std::abs(angle_after_step(algorithm, m) - major_axis_angle(m));
}

}  // namespace detail

inline std::string observation_predicate(int id) {
  switch (id) {
    case 1: return "run converges within budget (gapped spectra, ratio <= 0.9)";
    case 2: return "|theta'| < |theta| after one step (2x2, theta != 0)";
    case 3: return "sign of the off-diagonal entry preserved (2x2)";
    case 4: return "non-diagonal samples are not fixed; diagonal matrices are fixed exactly";
    case 5: return "descending diagonal attracts isospectral 1e-6 perturbations (2x2)";
    case 6: return "ascending diagonal repels, slower the closer the start (2x2)";
    case 7: return "rotation slows as the axis ratio approaches 1 (2x2)";
    case 8: return "rotation speeds up as the ellipse thins; near-segment aligns in one step (2x2)";
    case 9: return "f(lambda M) = lambda f(M), angle unchanged, lambda in {1e-3, 1e3}";
    case 10: return "eigenvalue multiset preserved (Euclidean congruence)";
    default: break;
  }
  throw ValidationError("unsupported observation id " + std::to_string(id) + " (expected 1..10)");
}

/// Runs the predicate for observation `id` on `count` seeded samples.
inline ObservationReport check_observation(int id, Algorithm algorithm, std::uint64_t seed, std::size_t count) {
  ObservationReport report;
  report.id = id;
  report.predicate = observation_predicate(id);
  Rng rng(seed);
  const auto step = [algorithm](const Matrix& m) {
    const auto s = SymPsdMatrix::unchecked(m);
    return Matrix(algorithm == Algorithm::QR ? qr_step(s) : lr_step(s));
  };
  auto violate = [&](std::size_t i, const Matrix& m, std::vector<double> measured, std::string note) {
    report.violations.push_back({i, m, std::move(measured), std::move(note)});
  };

  for (std::size_t i = 0; i < count; ++i) {
    ++report.samples_tested;
    switch (id) {
      case 1: {
        const auto m = sample_gapped_psd({2, 8, 0.9}, rng);
        RunConfig cfg;
        cfg.algorithm = algorithm;
        try {
          const auto res = run(m, cfg);
          report.worst = std::max(report.worst, static_cast<double>(res.final_state.k));
        } catch (const Error& e) {
          violate(i, m, {}, e.what());
        }
        break;
      }
      case 2: {
        const auto s = sample_ellipse2(rng);
        const Matrix m = s.matrix();
        const double before = major_axis_angle(m);
        const double after = angle_after_step(algorithm, m);
        if (!(std::abs(after) < std::abs(before))) violate(i, m, {before, after}, "angle did not shrink");
        break;
      }
      case 3: {
        const Matrix m = sample_ellipse2(rng).matrix();
        const Matrix next = step(m);
        const bool same = (m(0, 1) > 0.0 && next(0, 1) > 0.0) || (m(0, 1) < 0.0 && next(0, 1) < 0.0);
        if (!same) violate(i, m, {m(0, 1), next(0, 1)}, "off-diagonal sign changed");
        break;
      }
      case 4: {
        const auto m = sample_generic_psd(2, 8, rng);
        const double moved = frobenius_norm(step(m) - m);
        if (!(moved > 1e-12 * scale_of(m))) violate(i, m, {moved}, "non-diagonal matrix is fixed");
        auto spectrum = eigenvalues_of(m);
        std::shuffle(spectrum.begin(), spectrum.end(), std::mt19937_64(seed + i));
        const Matrix d = Matrix::diagonal(spectrum);
        if (step(d) != d) violate(i, d, {}, "diagonal matrix is not an exact fixed point");
        break;
      }
      case 5: {
        const auto s = sample_ellipse2(rng);
        const Matrix fixed = Matrix::diagonal({s.lambda1, s.ratio * s.lambda1});
        const Matrix start = isospectral_perturbation(fixed, 1e-6, rng);
        try {
          const auto res = run(SymPsdMatrix::unchecked(start), StepMap{algorithm, {}}.run_config());
          const double dist = frobenius_norm(working_matrix(res.final_state) - fixed);
          report.worst = std::max(report.worst, dist);
          if (dist > 1e-8 * scale_of(fixed)) violate(i, start, {dist}, "did not return to the descending fixed point");
        } catch (const Error& e) {
          violate(i, start, {}, e.what());
        }
        break;
      }
      case 6: {
        const auto s = sample_ellipse2(rng);
        const double sign = s.theta < 0.0 ? -1.0 : 1.0;
        auto escape = [&](double eps) {
          const Matrix m = rotated_diag2(s.lambda1, s.ratio * s.lambda1, sign * (std::numbers::pi / 2 - eps));
          const double before = std::numbers::pi / 2 - std::abs(major_axis_angle(m));
          const double after = std::numbers::pi / 2 - std::abs(angle_after_step(algorithm, m));
          return std::pair{before, after};
        };
        const auto [b_far, a_far] = escape(1e-2);
        const auto [b_near, a_near] = escape(1e-3);
        const Matrix m = rotated_diag2(s.lambda1, s.ratio * s.lambda1, sign * (std::numbers::pi / 2 - 1e-3));
        if (!(a_far > b_far && a_near > b_near)) {
          violate(i, m, {b_far, a_far, b_near, a_near}, "step did not move away from the ascending fixed point");
        } else if (!(a_near - b_near < a_far - b_far)) {
          violate(i, m, {a_far - b_far, a_near - b_near}, "escape is not slower closer to the fixed point");
        }
        break;
      }
      case 7: {
        const auto s = sample_ellipse2(rng);
        const double r2 = rng.uniform(0.01, 0.99);
        const double lo = std::min(s.ratio, r2);
        const double hi = std::max(s.ratio, r2);
        if (hi - lo < 1e-3) break;
        const double fast = detail::rotation_of(algorithm, rotated_diag2(s.lambda1, lo * s.lambda1, s.theta));
        const double slow = detail::rotation_of(algorithm, rotated_diag2(s.lambda1, hi * s.lambda1, s.theta));
        if (!(slow < fast)) violate(i, s.matrix(), {lo, fast, hi, slow}, "rounder ellipse rotated at least as fast");
        break;
      }
      case 8: {
        const auto s = sample_ellipse2(rng);
        const double base = detail::rotation_of(algorithm, s.matrix());
        const double thinner =
            detail::rotation_of(algorithm, rotated_diag2(s.lambda1, 0.1 * s.ratio * s.lambda1, s.theta));
        const Matrix segment = rotated_diag2(s.lambda1, 1e-12 * s.lambda1, s.theta);
        const double residual = std::abs(angle_after_step(algorithm, segment));
        report.worst = std::max(report.worst, residual);
        if (!(thinner > base)) violate(i, s.matrix(), {base, thinner}, "thinner ellipse did not rotate faster");
        if (!(residual < 1e-4)) violate(i, segment, {residual}, "near-segment did not align in one step");
        break;
      }
      case 9: {
        const auto m = sample_generic_psd(2, 8, rng);
        const Matrix fm = step(m);
        for (double lambda : {1e-3, 1e3}) {
          const Matrix flm = step(lambda * Matrix(m));
          const double err = max_abs(flm - lambda * fm) / (lambda * scale_of(m));
          report.worst = std::max(report.worst, err);
          if (err > 1e-12) violate(i, m, {lambda, err}, "step is not positively homogeneous");
          if (m.size() == 2) {
            const double dtheta = std::abs(major_axis_angle(flm) - major_axis_angle(fm));
            if (dtheta > 1e-12) violate(i, m, {lambda, dtheta}, "rotation angle depends on scale");
          }
        }
        break;
      }
      case 10: {
        const auto m = sample_generic_psd(2, 8, rng);
        const double err = detail::max_relative_spectrum_error(m, step(m));
        report.worst = std::max(report.worst, err);
        if (err > 1e-9) violate(i, m, {err}, "spectrum changed");
        break;
      }
      default: observation_predicate(id);
    }
  }
  detail::finish(report);
  return report;
}

/// |theta_1 - theta_0| after one step from R(theta0) diag(1, r) R(theta0)ᵀ,
/// for each ratio r. Angles are measured on both sides with the same
/// convention, so a circle reports 0.
inline std::vector<std::pair<double, double>> rotation_speed_profile(Algorithm algorithm,
                                                                     const std::vector<double>& ratios,
                                                                     double theta0) {
  std::vector<std::pair<double, double>> out;
  for (double r : ratios) out.emplace_back(r, detail::rotation_of(algorithm, rotated_diag2(1.0, r, theta0)));
  return out;
}

/// Checks tan(theta') = (lambda2 / lambda1) tan(theta) for one QR step over
/// seeded 2x2 samples. Residuals are relative to max(1, |predicted tan|).
inline ObservationReport angle_update_law_check(std::uint64_t seed, std::size_t count, double tolerance) {
  ObservationReport report;
  report.id = 0;
  report.predicate = "tan(theta') = (lambda2/lambda1) tan(theta) for one QR step";
  Rng rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const auto s = sample_ellipse2(rng);
    const Matrix m = s.matrix();
    const auto view = to_ellipse2d(m);
    const double predicted = (view.b / view.a) * std::tan(view.theta);
    const double actual = std::tan(angle_after_step(Algorithm::QR, m));
    const double residual = std::abs(actual - predicted) / std::max(1.0, std::abs(predicted));
    ++report.samples_tested;
    report.worst = std::max(report.worst, residual);
    if (residual > tolerance) report.violations.push_back({i, m, {predicted, actual, residual}, "law residual"});
  }
  detail::finish(report);
  return report;
}

// ---------------------------------------------------------------------------
// Continuity probe

struct ContinuityProbeResult {
  Matrix center;
  double radius = 0.0;
  std::size_t pairs = 0;
  double max_amplification = 0.0;
  Matrix witness_x;
  Matrix witness_y;
};

/// Centre at which the Wilkinson shift changes branch: delta = (a - c)/2 = 0
/// with a nonzero off-diagonal, so arbitrarily close inputs pick opposite
/// eigenvalues of the block.
inline Matrix wilkinson_flip_center() { return Matrix::from_rows({{1.0, 0.1}, {0.1, 1.0}}); }

namespace detail {

inline Matrix random_symmetric_direction(std::size_t n, Rng& rng) {
  Matrix e(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      const double g = rng.gaussian();
      e(i, j) = g;
      e(j, i) = g;
    }
  const double norm = frobenius_norm(e);
  return norm > 0.0 ? (1.0 / norm) * e : e;
}

}  // namespace detail

/// Max of |f(X) - f(Y)|_F / |X - Y|_F over random symmetric pairs within
/// `radius` of `center`, projected onto the PSD cone.
inline ContinuityProbeResult continuity_probe(const StepMap& f, const Matrix& center, double radius,
                                              std::size_t pairs, std::uint64_t seed) {
  if (!(radius > 0.0)) throw ValidationError("probe radius must be positive");
  if (pairs < 1) throw ValidationError("probe needs at least one pair");
  ContinuityProbeResult out;
  out.center = center;
  out.radius = radius;
  Rng rng(seed);
  const std::size_t n = center.size();
  for (std::size_t p = 0; p < pairs; ++p) {
    const Matrix x = project_psd(center + (radius * rng.uniform()) * detail::random_symmetric_direction(n, rng));
    const Matrix y = project_psd(center + (radius * rng.uniform()) * detail::random_symmetric_direction(n, rng));
    const double gap = frobenius_norm(x - y);
    if (gap == 0.0) continue;
    ++out.pairs;
    const double amp =
        frobenius_norm(Matrix(f.apply(SymPsdMatrix::unchecked(x))) - Matrix(f.apply(SymPsdMatrix::unchecked(y)))) / gap;
    if (amp > out.max_amplification || out.witness_x.empty()) {
      out.max_amplification = amp;
      out.witness_x = x;
      out.witness_y = y;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Axiom audit

struct AxiomResult {
  int axiom = 0;
  std::string description;
  std::size_t tested = 0;
  std::size_t failures = 0;
  std::vector<Violation> witnesses;  // first few failures
  bool passed() const { return failures == 0; }
};

struct AxiomAuditReport {
  std::string step;
  std::size_t samples = 0;
  std::vector<AxiomResult> axioms;  // axioms 1..5 in order

  const AxiomResult& axiom(int id) const { return axioms.at(static_cast<std::size_t>(id - 1)); }
};

namespace detail {

inline constexpr std::size_t kMaxWitnesses = 5;

inline void record_failure(AxiomResult& r, std::size_t sample, const Matrix& m, std::vector<double> measured,
                           std::string note) {
  ++r.failures;
  if (r.witnesses.size() < kMaxWitnesses) r.witnesses.push_back({sample, m, std::move(measured), std::move(note)});
}

/// Attractive if a run started 1e-6 away (along the isospectral orbit) ends
/// within 1e-8 * scale of the same fixed point.
inline void probe_attraction(const StepMap& f, AxiomResult& r, std::size_t sample, const Matrix& fixed, Rng& rng) {
  ++r.tested;
  const Matrix start = isospectral_perturbation(fixed, 1e-6, rng);
  try {
    const auto res = run(SymPsdMatrix::unchecked(start), f.run_config());
    const double dist = frobenius_norm(working_matrix(res.final_state) - fixed);
    if (dist > 1e-8 * scale_of(fixed)) record_failure(r, sample, fixed, {dist}, "fixed point is not attractive");
  } catch (const Error& e) {
    record_failure(r, sample, fixed, {}, e.what());
  }
}

}  // namespace detail

/// Empirical audit of the five fixed-point-iteration axioms for step map `f`
/// over `count` gapped samples. Axiom 1 holds by construction.
inline AxiomAuditReport axiom_audit(const StepMap& f, const SamplerSpec& sampler, std::size_t count,
                                    std::uint64_t seed) {
  AxiomAuditReport report;
  report.step = f.name();
  report.samples = count;
  report.axioms = {
      {1, "iterates a map on PSD matrices (structural)", count, 0, {}},
      {2, "f(M) is orthogonally similar to M (spectrum preserved to 1e-9)", 0, 0, {}},
      {3, "the iteration converges to a fixed point within 10000 steps", 0, 0, {}},
      {4, "fixed points are diagonal; non-diagonal samples are not fixed", 0, 0, {}},
      {5, "every fixed point is attractive", 0, 0, {}},
  };
  auto& a2 = report.axioms[1];
  auto& a3 = report.axioms[2];
  auto& a4 = report.axioms[3];
  auto& a5 = report.axioms[4];

  Rng rng(seed);
  Rng probe_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  if (sampler.min_n <= 2) {
    detail::probe_attraction(f, a5, 0, Matrix::diagonal({2.0, 1.0}), probe_rng);
    detail::probe_attraction(f, a5, 0, Matrix::diagonal({1.0, 2.0}), probe_rng);
  }

  for (std::size_t i = 0; i < count; ++i) {
    const auto m = sample_gapped_psd(sampler, rng);
    const double scale = scale_of(m);

    Matrix fm;
    ++a2.tested;
    ++a4.tested;
    try {
      fm = f.apply(m);
      const double err = detail::max_relative_spectrum_error(m, fm);
      if (err > 1e-9) detail::record_failure(a2, i, m, {err}, "spectrum changed");
      const double moved = frobenius_norm(fm - m);
      if (!(moved > 1e-12 * scale)) detail::record_failure(a4, i, m, {moved}, "non-diagonal matrix is fixed");
    } catch (const Error& e) {
      detail::record_failure(a2, i, m, {}, e.what());
      continue;
    }

    ++a3.tested;
    Matrix fixed;
    try {
      fixed = working_matrix(run(m, f.run_config()).final_state);
    } catch (const Error& e) {
      detail::record_failure(a3, i, m, {}, e.what());
      continue;
    }

    ++a4.tested;
    const Matrix again = f.apply(SymPsdMatrix::unchecked(fixed));
    const double drift = frobenius_norm(again - fixed);
    if (drift > 1e-10 * scale) {
      detail::record_failure(a4, i, fixed, {drift}, "converged matrix is not a fixed point");
    } else if (offdiag_norm(fixed) > 1e-10 * scale) {
      detail::record_failure(a4, i, fixed, {offdiag_norm(fixed)}, "fixed point is not diagonal");
    }

    auto reversed = diagonal_of(fixed);
    std::reverse(reversed.begin(), reversed.end());
    detail::probe_attraction(f, a5, i, fixed, probe_rng);
    detail::probe_attraction(f, a5, i, Matrix::diagonal(reversed), probe_rng);
  }
  return report;
}

// ---------------------------------------------------------------------------
// JSON

inline Json violation_json(const Violation& v) {
  return Json{{"sample", v.sample}, {"input", matrix_rows_json(v.input)}, {"measured", v.measured}, {"note", v.note}};
}

inline Json observation_report_json(const ObservationReport& r) {
  Json vs = Json::array();
  for (const auto& v : r.violations) vs.push_back(violation_json(v));
  return Json{{"observationId", r.id},    {"predicate", r.predicate}, {"samplesTested", r.samples_tested},
              {"passed", r.passed},       {"worst", r.worst},         {"violations", std::move(vs)}};
}

inline Json continuity_probe_json(const ContinuityProbeResult& r) {
  return Json{{"center", matrix_rows_json(r.center)},
              {"radius", r.radius},
              {"pairs", r.pairs},
              {"maxAmplification", r.max_amplification},
              {"witnessPair", Json::array({matrix_rows_json(r.witness_x), matrix_rows_json(r.witness_y)})}};
}

inline Json axiom_audit_json(const AxiomAuditReport& r) {
  Json axioms = Json::array();
  for (const auto& a : r.axioms) {
    Json ws = Json::array();
    for (const auto& w : a.witnesses) ws.push_back(violation_json(w));
    axioms.push_back(Json{{"axiom", a.axiom},
                          {"description", a.description},
                          {"tested", a.tested},
                          {"failures", a.failures},
                          {"passed", a.passed()},
                          {"witnesses", std::move(ws)}});
  }
  return Json{{"step", r.step}, {"samples", r.samples}, {"axioms", std::move(axioms)}};
}

}  // namespace eigenlab
