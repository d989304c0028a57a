// SPDX-License-Identifier: Apache-2.0
//
// The iterated maps (QR and Cholesky-LR), shift selection, deflation and full
// convergence runs.
#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <limits>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "eigenlab/ellipse.hpp"
#include "eigenlab/linalg.hpp"

namespace eigenlab {

enum class Algorithm { QR, LR };

inline std::string to_string(Algorithm a) { return a == Algorithm::QR ? "qr" : "lr"; }

inline Algorithm parse_algorithm(std::string_view s) {
  if (s == "qr" || s == "QR") return Algorithm::QR;
  if (s == "lr" || s == "LR") return Algorithm::LR;
  throw ValidationError("unknown algorithm '" + std::string(s) + "' (expected qr or lr)");
}

struct ShiftStrategy {
  enum class Kind { None, Constant, Gershgorin, Wilkinson };

  Kind kind = Kind::None;
  double mu = 0.0;  // Constant only

  static ShiftStrategy none() { return {}; }
  static ShiftStrategy constant(double mu) {
    if (!std::isfinite(mu)) throw ValidationError("constant shift must be finite");
    return {Kind::Constant, mu};
  }
  static ShiftStrategy gershgorin() { return {Kind::Gershgorin, 0.0}; }
  static ShiftStrategy wilkinson() { return {Kind::Wilkinson, 0.0}; }

  /// none | constant:<float> | gershgorin | wilkinson
  static ShiftStrategy parse(std::string_view s) {
    if (s == "none") return none();
    if (s == "gershgorin") return gershgorin();
    if (s == "wilkinson") return wilkinson();
    if (s.starts_with("constant:")) {
      const std::string num(s.substr(9));
      std::size_t used = 0;
      double mu = 0.0;
      try {
        mu = std::stod(num, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != num.size()) throw ValidationError("bad constant shift value '" + num + "'");
      return constant(mu);
    }
    throw ValidationError("unknown shift '" + std::string(s) + "' (none|constant:<float>|gershgorin|wilkinson)");
  }

  std::string to_string() const {
    switch (kind) {
      case Kind::Constant: {
        char buf[64];
        std::snprintf(buf, sizeof buf, "constant:%.17g", mu);
        return buf;
      }
      case Kind::Gershgorin: return "gershgorin";
      case Kind::Wilkinson: return "wilkinson";
      case Kind::None: break;
    }
    return "none";
  }

  friend bool operator==(const ShiftStrategy&, const ShiftStrategy&) = default;
};

/// min_i (a_ii - sum_{j != i} |a_ij|), a lower bound on every eigenvalue.
inline double gershgorin_lower_bound(const Matrix& m) {
  double bound = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m.size(); ++i) {
    double radius = 0.0;
    for (std::size_t j = 0; j < m.size(); ++j)
      if (j != i) radius += std::abs(m(i, j));
    bound = std::min(bound, m(i, i) - radius);
  }
  return bound;
}

/// Eigenvalue of [[a, b], [b, c]] closest to c. sign(0) is taken as +1, which
/// is where the shift jumps as a function of the entries.
inline double wilkinson_shift(double a, double b, double c) {
  const double delta = 0.5 * (a - c);
  const double sign = delta >= 0.0 ? 1.0 : -1.0;
  const double denom = std::abs(delta) + std::hypot(delta, b);
  if (denom == 0.0) return c;
  return c - sign * b * b / denom;
}

inline double wilkinson_shift(const Matrix& block) {
  if (block.size() != 2) throw DimensionMismatch("wilkinson_shift needs a 2x2 block");
  return wilkinson_shift(block(0, 0), 0.5 * (block(0, 1) + block(1, 0)), block(1, 1));
}

inline double select_shift(const ShiftStrategy& strategy, const Matrix& m) {
  switch (strategy.kind) {
    case ShiftStrategy::Kind::None: return 0.0;
    case ShiftStrategy::Kind::Constant: return strategy.mu;
    case ShiftStrategy::Kind::Gershgorin: return std::max(0.0, gershgorin_lower_bound(m));
    case ShiftStrategy::Kind::Wilkinson: {
      const std::size_t n = m.size();
      if (n == 0) return 0.0;
      if (n == 1) return m(0, 0);
      return wilkinson_shift(m(n - 2, n - 2), m(n - 1, n - 2), m(n - 1, n - 1));
    }
  }
  return 0.0;
}

namespace detail {

/// next = transformᵀ · m · transform, transform orthogonal.
struct StepProduct {
  Matrix next;
  Matrix transform;
};

inline StepProduct qr_step_product(const Matrix& m, double mu) {
  // mu == 0 skips both shifts so the unshifted step is bit-identical.
  auto [q, r] = qr_decompose(mu != 0.0 ? add_identity(m, -mu) : m);
  Matrix next = symmetrized(r * q);
  if (mu != 0.0) next = add_identity(std::move(next), mu);
  return {std::move(next), std::move(q)};
}

/// Gauss-Jordan inverse with partial pivoting; only used on well-posed
/// Cholesky factors.
inline Matrix inverse(const Matrix& m) {
  const std::size_t n = m.size();
  Matrix a = m;
  Matrix inv = Matrix::identity(n);
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a(r, c)) > std::abs(a(p, c))) p = r;
    if (a(p, c) == 0.0) throw SingularMatrix("matrix is not invertible");
    if (p != c)
      for (std::size_t j = 0; j < n; ++j) {
        std::swap(a(p, j), a(c, j));
        std::swap(inv(p, j), inv(c, j));
      }
    const double d = a(c, c);
    for (std::size_t j = 0; j < n; ++j) {
      a(c, j) /= d;
      inv(c, j) /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c || a(r, c) == 0.0) continue;
      const double f = a(r, c);
      for (std::size_t j = 0; j < n; ++j) {
        a(r, j) -= f * a(c, j);
        inv(r, j) -= f * inv(c, j);
      }
    }
  }
  return inv;
}

/// Orthogonal factor W of the polar decomposition L = (LLᵀ)^{1/2} W, by the
/// scaled Newton iteration X <- (g X + X^{-T} / g) / 2. Then WᵀMW = LᵀL.
inline Matrix polar_orthogonal_factor(const Matrix& l) {
  Matrix x = l;
  for (int it = 0; it < 100; ++it) {
    const Matrix inv_t = transpose(inverse(x));
    const double g = std::sqrt(frobenius_norm(inv_t) / frobenius_norm(x));
    Matrix next = 0.5 * (g * x + (1.0 / g) * inv_t);
    const double change = frobenius_norm(next - x);
    x = std::move(next);
    if (change <= 1e-14 * std::sqrt(static_cast<double>(x.size()))) {
      // one unscaled polishing step
      return 0.5 * (x + transpose(inverse(x)));
    }
  }
  throw NoConvergence("polar decomposition did not converge");
}

inline StepProduct lr_step_product(const Matrix& m, bool with_transform) {
  const std::size_t n = m.size();
  // Diagonal input: L = diag(sqrt(d)) and LᵀL = M exactly; returning M keeps
  // the fixed point bit-exact instead of sqrt(d)^2.
  if (is_diagonal(m)) {
    cholesky(m);  // still reject singular input
    return {m, Matrix::identity(n)};
  }
  const Matrix l = cholesky(m).l;
  Matrix next(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = j; k < n; ++k) s += l(k, i) * l(k, j);
      next(i, j) = s;
      next(j, i) = s;
    }
  return {std::move(next), with_transform ? polar_orthogonal_factor(l) : Matrix()};
}

/// True when mu lies above the smallest eigenvalue of m (the shifted matrix
/// is then indefinite and no longer an ellipsoid).
inline bool shift_exceeds_lambda_min(const Matrix& m, double mu) {
  if (mu <= 0.0 || m.empty()) return false;
  if (mu <= gershgorin_lower_bound(m)) return false;
  const auto d = diagonal_of(m);
  if (mu > *std::min_element(d.begin(), d.end())) return true;
  return mu > eigenvalues_of(m).back() + 1e-12 * scale_of(m);
}

}  // namespace detail

/// One naive QR step: M = QR, return RQ.
inline SymPsdMatrix qr_step(const SymPsdMatrix& m) {
  return SymPsdMatrix::unchecked(detail::qr_step_product(m, 0.0).next);
}

/// One Cholesky-LR step: M = LLᵀ, return LᵀL. Throws SingularMatrix unless M
/// is positive definite.
inline SymPsdMatrix lr_step(const SymPsdMatrix& m) {
  return SymPsdMatrix::unchecked(detail::lr_step_product(m, false).next);
}

struct ShiftedStep {
  SymPsdMatrix matrix;
  bool shift_not_pancaking = false;
};

/// M - mu I = QR, return RQ + mu I.
inline ShiftedStep shifted_qr_step(const SymPsdMatrix& m, double mu) {
  return {SymPsdMatrix::unchecked(detail::qr_step_product(m, mu).next), detail::shift_exceeds_lambda_min(m, mu)};
}

struct PsdShift {
  SymPsdMatrix matrix;
  double mu0 = 0.0;
};

/// Shift a symmetric matrix into the PSD cone using the Gershgorin bound.
/// Subtract mu0 from eigenvalues recovered from the result.
inline PsdShift make_psd(const Matrix& s) {
  require_symmetric(s);
  const double mu0 = std::max(0.0, -gershgorin_lower_bound(s));
  Matrix shifted = mu0 > 0.0 ? add_identity(s, mu0) : s;
  return {SymPsdMatrix::validated(std::move(shifted)), mu0};
}

struct Deflation {
  std::size_t slot = 0;
  double value = 0.0;
  friend bool operator==(const Deflation&, const Deflation&) = default;
};

struct IterationState {
  SymPsdMatrix active;  // leading m x m block still being iterated
  std::size_t k = 0;
  Matrix accum_q;  // n x n, columns m.. frozen
  std::vector<Deflation> deflated;
  Algorithm algorithm = Algorithm::QR;
  double scale = 1.0;  // scale_of(M0)

  std::size_t dimension() const noexcept { return accum_q.size(); }
  bool converged() const noexcept { return active.size() == 0; }
};

inline IterationState initial_state(const SymPsdMatrix& m0, Algorithm algorithm) {
  IterationState s;
  s.active = m0;
  s.accum_q = Matrix::identity(m0.size());
  s.algorithm = algorithm;
  s.scale = scale_of(m0);
  return s;
}

/// Full n x n working matrix: active block plus deflated eigenvalues on the
/// trailing diagonal.
inline Matrix working_matrix(const IterationState& s) {
  Matrix w(s.dimension());
  const Matrix& a = s.active;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j) w(i, j) = a(i, j);
  for (const auto& d : s.deflated) w(d.slot, d.slot) = d.value;
  return w;
}

/// Peel converged trailing rows off the active block while their
/// off-diagonal norm is <= tol * scale. A 1x1 block always deflates.
inline IterationState deflate_if_converged(IterationState s, double tol) {
  const double threshold = tol * s.scale;
  Matrix a = s.active;
  std::size_t m = a.size();
  while (m > 0) {
    double row = 0.0;
    for (std::size_t j = 0; j + 1 < m; ++j) row += a(m - 1, j) * a(m - 1, j);
    if (std::sqrt(row) > threshold) break;
    s.deflated.push_back({m - 1, a(m - 1, m - 1)});
    --m;
  }
  if (m != a.size()) s.active = SymPsdMatrix::unchecked(leading_block(a, m));
  return s;
}

struct StepDiagnostics {
  double offdiag = 0.0;
  std::optional<double> angle2d;
  double shift = 0.0;
  bool shift_not_pancaking = false;
  double wall_clock = 0.0;  // seconds; never serialised
};

struct TraceRecord {
  std::size_t k = 0;
  Matrix matrix;
  std::size_t active = 0;
  StepDiagnostics diagnostics;
  std::vector<Deflation> deflations;
};

struct RunConfig {
  double tol = 1e-10;
  std::size_t max_iters = 10000;
  ShiftStrategy shift;
  Algorithm algorithm = Algorithm::QR;
  std::size_t trace_every = 1;

  void validate() const {
    if (!(tol > 0.0) || !std::isfinite(tol)) throw ValidationError("tol must be a positive finite number");
    if (max_iters < 1) throw ValidationError("maxIters must be >= 1");
    if (trace_every < 1) throw ValidationError("traceEvery must be >= 1");
    if (shift.kind == ShiftStrategy::Kind::Constant && !std::isfinite(shift.mu))
      throw ValidationError("constant shift must be finite");
    if (algorithm == Algorithm::LR && shift.kind != ShiftStrategy::Kind::None)
      throw ValidationError("the LR iteration runs unshifted (use --shift none)");
  }
};

namespace detail {

inline TraceRecord make_record(const IterationState& s, double shift, bool not_pancaking,
                               std::vector<Deflation> events, double seconds) {
  TraceRecord r;
  r.k = s.k;
  r.matrix = working_matrix(s);
  r.active = s.active.size();
  r.diagnostics.offdiag = offdiag_norm(r.matrix);
  if (r.matrix.size() == 2) r.diagnostics.angle2d = major_axis_angle(r.matrix);
  r.diagnostics.shift = shift;
  r.diagnostics.shift_not_pancaking = not_pancaking;
  r.diagnostics.wall_clock = seconds;
  r.deflations = std::move(events);
  return r;
}

}  // namespace detail

/// Record describing a state as-is (k = 0 for a fresh run), listing every
/// deflation already applied.
inline TraceRecord initial_record(const IterationState& s) {
  return detail::make_record(s, 0.0, false, s.deflated, 0.0);
}

struct StepOutcome {
  IterationState state;
  TraceRecord record;
};

/// One step of the active block (shift from `shift` unless overridden),
/// followed by deflation. A converged state only advances k.
inline StepOutcome advance(const IterationState& s, const ShiftStrategy& shift, double tol,
                           std::optional<double> mu_override = std::nullopt) {
  const auto t0 = std::chrono::steady_clock::now();
  IterationState next = s;
  next.k = s.k + 1;
  double mu = 0.0;
  bool not_pancaking = false;

  if (!s.converged()) {
    const Matrix& a = s.active;
    mu = mu_override ? *mu_override : select_shift(shift, a);
    detail::StepProduct p;
    if (s.algorithm == Algorithm::LR) {
      if (mu != 0.0) throw ValidationError("the LR iteration runs unshifted");
      p = detail::lr_step_product(a, true);
    } else {
      p = detail::qr_step_product(a, mu);
      not_pancaking = detail::shift_exceeds_lambda_min(a, mu);
    }

    const std::size_t n = s.dimension();
    const std::size_t m = a.size();
    std::vector<double> row(m);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t j = 0; j < m; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) acc += s.accum_q(r, i) * p.transform(i, j);
        row[j] = acc;
      }
      for (std::size_t j = 0; j < m; ++j) next.accum_q(r, j) = row[j];
    }
    next.active = SymPsdMatrix::unchecked(std::move(p.next));
    next = deflate_if_converged(std::move(next), tol);
  }

  std::vector<Deflation> events(next.deflated.begin() + static_cast<std::ptrdiff_t>(s.deflated.size()),
                                next.deflated.end());
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  TraceRecord rec = detail::make_record(next, mu, not_pancaking, std::move(events), seconds);
  return {std::move(next), std::move(rec)};
}

struct RunResult {
  std::vector<TraceRecord> trace;
  IterationState final_state;
};

/// Raised when a run hits maxIters; carries everything computed so far.
class MaxItersExceeded : public Error {
 public:
  explicit MaxItersExceeded(RunResult partial)
      : Error("MaxItersExceeded",
              "no convergence after " + std::to_string(partial.final_state.k) + " iterations (" +
                  std::to_string(partial.final_state.active.size()) + " rows still active)"),
        partial_(std::move(partial)) {}

  const RunResult& partial() const noexcept { return partial_; }

 private:
  RunResult partial_;
};

/// Iterate until every row has deflated. Throws MaxItersExceeded otherwise.
inline RunResult run(const SymPsdMatrix& m0, const RunConfig& cfg) {
  cfg.validate();
  // LR needs a Cholesky factor even when the input is already diagonal.
  if (cfg.algorithm == Algorithm::LR) cholesky(m0);
  RunResult out;
  out.final_state = deflate_if_converged(initial_state(m0, cfg.algorithm), cfg.tol);
  out.trace.push_back(initial_record(out.final_state));

  while (!out.final_state.converged()) {
    if (out.final_state.k >= cfg.max_iters) throw MaxItersExceeded(std::move(out));
    auto step = advance(out.final_state, cfg.shift, cfg.tol);
    out.final_state = std::move(step.state);
    const bool last = out.final_state.converged() || out.final_state.k >= cfg.max_iters;
    if (out.final_state.k % cfg.trace_every == 0 || last) out.trace.push_back(std::move(step.record));
  }
  return out;
}

/// Eigenvalues (descending, mu0 subtracted) and eigenvectors from a finished
/// run. Near-equal eigenvalues give valid values but possibly poor vectors.
inline SpectralDecomp reconstruct_eigensystem(const IterationState& final_state, double mu0 = 0.0) {
  const std::size_t n = final_state.dimension();
  std::vector<Deflation> pairs;
  for (std::size_t i = 0; i < final_state.active.size(); ++i) pairs.push_back({i, final_state.active(i, i)});
  pairs.insert(pairs.end(), final_state.deflated.begin(), final_state.deflated.end());
  std::stable_sort(pairs.begin(), pairs.end(), [](const Deflation& x, const Deflation& y) {
    return x.value > y.value || (x.value == y.value && x.slot < y.slot);
  });

  SpectralDecomp out{std::vector<double>(n), Matrix(n)};
  for (std::size_t c = 0; c < n; ++c) {
    out.eigenvalues[c] = pairs[c].value - mu0;
    for (std::size_t r = 0; r < n; ++r) out.eigenvectors(r, c) = final_state.accum_q(r, pairs[c].slot);
  }
  detail::fix_eigenvector_signs(out.eigenvectors);
  return out;
}

}  // namespace eigenlab
