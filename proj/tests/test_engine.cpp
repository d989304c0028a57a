// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "eigenlab/engine.hpp"
#include "eigenlab/lab.hpp"
#include "oracles.hpp"

using namespace eigenlab;

namespace {

const Matrix kWorked = Matrix::from_rows({{1.5, 0.5}, {0.5, 1.5}});

SymPsdMatrix psd(const Matrix& m) { return SymPsdMatrix::validated(m); }

void expect_near_matrix(const Matrix& got, const Matrix& want, double tol) {
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i)
    for (std::size_t j = 0; j < got.size(); ++j) EXPECT_NEAR(got(i, j), want(i, j), tol) << "(" << i << "," << j << ")";
}

double spectrum_error(const Matrix& a, const Matrix& b) {
  const auto ea = eigenvalues_of(a);
  const auto eb = eigenvalues_of(b);
  const double s = std::max(1.0, std::abs(ea.front()));
  double worst = 0.0;
  for (std::size_t i = 0; i < ea.size(); ++i) worst = std::max(worst, std::abs(ea[i] - eb[i]) / s);
  return worst;
}

}  // namespace

TEST(QrStep, WorkedExample) {
  expect_near_matrix(qr_step(psd(kWorked)), Matrix::from_rows({{1.8, 0.4}, {0.4, 1.2}}), 1e-12);
  // agrees with the Gram-Schmidt route
  expect_near_matrix(qr_step(psd(kWorked)), oracle::gram_schmidt_qr_step(kWorked), 1e-14);
}

TEST(QrStep, DiagonalAndScalarAreFixedBitwise) {
  EXPECT_EQ(qr_step(psd(Matrix::diagonal({2.0, 1.0}))).matrix(), Matrix::diagonal({2.0, 1.0}));
  for (double lambda : {0.0, 0.3, 4.0}) {
    const Matrix m = lambda * Matrix::identity(3);
    EXPECT_EQ(qr_step(psd(m)).matrix(), m);
  }
}

TEST(QrStep, IsOrthogonalSimilarity) {
  Rng rng(31);
  for (int s = 0; s < 100; ++s) {
    const auto m = sample_generic_psd(2, 8, rng);
    const auto [q, r] = qr_decompose(m);
    const Matrix expected = transpose(q) * Matrix(m) * q;
    EXPECT_LE(max_abs(qr_step(m).matrix() - expected), 1e-12 * scale_of(m));
  }
}

TEST(LrStep, WorkedExample) {
  const Matrix want = Matrix::from_rows({{5.0 / 3.0, std::sqrt(2.0) / 3.0}, {std::sqrt(2.0) / 3.0, 4.0 / 3.0}});
  expect_near_matrix(lr_step(psd(kWorked)), want, 1e-12);
  EXPECT_NEAR(lr_step(psd(kWorked))(0, 1), 0.471405, 1e-6);
  // LᵀL from the forward-substitution factor
  const Matrix l = oracle::chol2(1.5, 0.5, 1.5);
  expect_near_matrix(lr_step(psd(kWorked)), transpose(l) * l, 1e-15);
}

TEST(LrStep, DiagonalFixedAndSingularRejected) {
  EXPECT_EQ(lr_step(psd(Matrix::diagonal({2.0, 1.0}))).matrix(), Matrix::diagonal({2.0, 1.0}));
  EXPECT_THROW(lr_step(psd(Matrix::diagonal({1.0, 0.0}))), SingularMatrix);
}

TEST(LrStep, IsSimilarityByCholeskyFactor) {
  Rng rng(32);
  for (int s = 0; s < 100; ++s) {
    const auto m = sample_generic_psd(2, 8, rng);
    const Matrix l = cholesky(m).l;
    const Matrix expected = detail::inverse(l) * Matrix(m) * l;
    EXPECT_LE(max_abs(lr_step(m).matrix() - expected), 1e-9 * scale_of(m));
  }
}

TEST(ShiftedQrStep, ZeroShiftIsBitIdentical) {
  EXPECT_EQ(shifted_qr_step(psd(kWorked), 0.0).matrix.matrix(), qr_step(psd(kWorked)).matrix());
  Rng rng(4);
  for (int s = 0; s < 50; ++s) {
    const auto m = sample_generic_psd(2, 8, rng);
    EXPECT_EQ(shifted_qr_step(m, 0.0).matrix.matrix(), qr_step(m).matrix());
  }
}

TEST(ShiftedQrStep, Examples) {
  EXPECT_EQ(shifted_qr_step(psd(Matrix::diagonal({2.0, 1.0})), 1.0).matrix.matrix(), Matrix::diagonal({2.0, 1.0}));

  const auto out = shifted_qr_step(psd(kWorked), 1.0);
  const auto ev = eigenvalues_of(out.matrix);
  EXPECT_NEAR(ev[0], 2.0, 1e-12);
  EXPECT_NEAR(ev[1], 1.0, 1e-12);
  EXPECT_LT(std::abs(out.matrix(0, 1)), 0.4);
  EXPECT_FALSE(out.shift_not_pancaking);
}

TEST(ShiftedQrStep, FlagsShiftAboveSmallestEigenvalue) {
  const auto out = shifted_qr_step(psd(kWorked), 1.5);
  EXPECT_TRUE(out.shift_not_pancaking);
  EXPECT_LE(spectrum_error(out.matrix, kWorked), 1e-12);
  EXPECT_FALSE(shifted_qr_step(psd(kWorked), 0.5).shift_not_pancaking);
}

TEST(ShiftedQrStep, NearlySingularDirectionAlignsInOneStep) {
  Rng rng(31);
  for (int s = 0; s < 20; ++s) {
    const auto m = SymPsdMatrix::unchecked(psd_from_spectrum({2.0, 1.0, 1e-8}, random_orthogonal(3, rng)));
    const double mu = select_shift(ShiftStrategy::gershgorin(), m);
    EXPECT_LT(row_offdiag_norm(shifted_qr_step(m, mu).matrix, 2), 1e-6);
    const auto next = advance(initial_state(m, Algorithm::QR), ShiftStrategy::gershgorin(), 1e-6).state;
    ASSERT_EQ(next.deflated.size(), 1u);
    EXPECT_EQ(next.deflated[0].slot, 2u);
    EXPECT_NEAR(next.deflated[0].value, 1e-8, 1e-12);
  }
}

TEST(SelectShift, Examples) {
  const Matrix m = Matrix::from_rows({{2, 1}, {1, 2}});
  EXPECT_EQ(select_shift(ShiftStrategy::gershgorin(), m), 1.0);
  EXPECT_EQ(select_shift(ShiftStrategy::none(), m), 0.0);
  EXPECT_EQ(select_shift(ShiftStrategy::constant(0.25), kWorked), 0.25);
  EXPECT_EQ(select_shift(ShiftStrategy::wilkinson(), m), 1.0);
  EXPECT_EQ(select_shift(ShiftStrategy::wilkinson(), Matrix::diagonal({7.0})), 7.0);
  // Gershgorin never goes negative
  EXPECT_EQ(select_shift(ShiftStrategy::gershgorin(), Matrix::from_rows({{1, 2}, {2, 1}})), 0.0);
}

TEST(WilkinsonShift, Examples) {
  EXPECT_NEAR(wilkinson_shift(Matrix::from_rows({{3, 1}, {1, 1}})), 2.0 - std::sqrt(2.0), 1e-12);
  EXPECT_EQ(wilkinson_shift(Matrix::diagonal({4.0, 9.0})), 9.0);
  EXPECT_EQ(wilkinson_shift(Matrix::from_rows({{2, 1}, {1, 2}})), 1.0);
}

TEST(WilkinsonShift, IsABlockEigenvalueClosestToCorner) {
  Rng rng(17);
  for (int s = 0; s < 1000; ++s) {
    const double a = rng.uniform(-3, 3);
    const double b = rng.uniform(-3, 3);
    const double c = rng.uniform(-3, 3);
    const auto [hi, lo] = oracle::eig2(a, b, c);
    const double mu = wilkinson_shift(a, b, c);
    const double closest = std::abs(hi - c) < std::abs(lo - c) ? hi : lo;
    EXPECT_NEAR(mu, closest, 1e-12);
  }
}

TEST(WilkinsonShift, JumpsAcrossEqualDiagonal) {
  const double below = wilkinson_shift(1.0 - 1e-9, 0.1, 1.0);
  const double above = wilkinson_shift(1.0 + 1e-9, 0.1, 1.0);
  EXPECT_NEAR(above, 0.9, 1e-8);
  EXPECT_NEAR(below, 1.1, 1e-8);
}

TEST(MakePsd, Examples) {
  const auto a = make_psd(Matrix::from_rows({{1, 0}, {0, -3}}));
  EXPECT_EQ(a.mu0, 3.0);
  EXPECT_EQ(a.matrix.matrix(), Matrix::diagonal({4.0, 0.0}));

  const auto b = make_psd(Matrix::diagonal({2.0, 1.0}));
  EXPECT_EQ(b.mu0, 0.0);
  EXPECT_EQ(b.matrix.matrix(), Matrix::diagonal({2.0, 1.0}));

  const auto c = make_psd(Matrix::from_rows({{0, 2}, {2, 0}}));
  EXPECT_EQ(c.mu0, 2.0);
  EXPECT_EQ(c.matrix.matrix(), Matrix::from_rows({{2, 2}, {2, 2}}));

  EXPECT_THROW(make_psd(Matrix::from_rows({{1, 2}, {0, 1}})), ValidationError);
}

TEST(MakePsd, RandomSymmetricBecomesPsd) {
  Rng rng(8);
  for (int s = 0; s < 200; ++s) {
    const std::size_t n = rng.index(2, 8);
    Matrix m(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) m(i, j) = m(j, i) = rng.uniform(-4, 4);
    const auto out = make_psd(m);
    EXPECT_GE(out.mu0, 0.0);
    EXPECT_GE(eigenvalues_of(out.matrix).back(), -1e-10 * scale_of(out.matrix));
  }
}

TEST(Deflate, Examples) {
  auto s = deflate_if_converged(initial_state(psd(Matrix::diagonal({3.0, 2.0, 1.0})), Algorithm::QR), 1e-10);
  EXPECT_TRUE(s.converged());
  EXPECT_EQ(s.deflated, (std::vector<Deflation>{{2, 1.0}, {1, 2.0}, {0, 3.0}}));

  s = deflate_if_converged(initial_state(psd(Matrix::from_rows({{2, 1e-15}, {1e-15, 1}})), Algorithm::QR), 1e-10);
  // eigenvalue 1 deflates first; the remaining 1x1 block [2] follows at once
  EXPECT_TRUE(s.converged());
  EXPECT_EQ(s.deflated, (std::vector<Deflation>{{1, 1.0}, {0, 2.0}}));
  EXPECT_EQ(s.accum_q, Matrix::identity(2));

  const Matrix m = Matrix::from_rows({{1.8, 0.4}, {0.4, 1.2}});
  s = deflate_if_converged(initial_state(psd(m), Algorithm::QR), 1e-10);
  EXPECT_EQ(s.active.matrix(), m);
  EXPECT_TRUE(s.deflated.empty());
}

TEST(Deflate, ThresholdIsRelativeToScale) {
  const Matrix m = Matrix::from_rows({{1e6, 1e-5}, {1e-5, 1.0}});
  // 1e-5 <= 1e-10 * 1e6
  EXPECT_TRUE(deflate_if_converged(initial_state(psd(m), Algorithm::QR), 1e-10).converged());
  EXPECT_FALSE(deflate_if_converged(initial_state(psd(m), Algorithm::QR), 1e-12).converged());
}

TEST(Run, DiagonalConvergesAtZeroSteps) {
  const auto r = run(psd(Matrix::diagonal({5.0, 2.0})), {});
  EXPECT_EQ(r.final_state.k, 0u);
  ASSERT_EQ(r.trace.size(), 1u);
  EXPECT_EQ(r.trace[0].deflations.size(), 2u);
  const auto sd = reconstruct_eigensystem(r.final_state);
  EXPECT_EQ(sd.eigenvalues, (std::vector<double>{5.0, 2.0}));
  EXPECT_EQ(sd.eigenvectors, Matrix::identity(2));
}

TEST(Run, WorkedExampleConvergesAtRateOneHalf) {
  RunConfig cfg;
  cfg.tol = 1e-10;
  const auto r = run(psd(kWorked), cfg);
  const auto sd = reconstruct_eigensystem(r.final_state);
  EXPECT_NEAR(sd.eigenvalues[0], 2.0, 1e-9);
  EXPECT_NEAR(sd.eigenvalues[1], 1.0, 1e-9);
  const double h = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(sd.eigenvectors(0, 0), h, 1e-6);
  EXPECT_NEAR(sd.eigenvectors(1, 0), h, 1e-6);
  EXPECT_NEAR(std::abs(sd.eigenvectors(0, 1)), h, 1e-6);
  EXPECT_NEAR(sd.eigenvectors(0, 1), -sd.eigenvectors(1, 1), 1e-6);
  // the final record has its coupling removed by deflation
  for (std::size_t i = 5; i + 2 < r.trace.size(); ++i) {
    const double ratio = r.trace[i + 1].diagnostics.offdiag / r.trace[i].diagnostics.offdiag;
    EXPECT_NEAR(ratio, 0.5, 2e-3) << "k = " << r.trace[i + 1].k;
  }
  EXPECT_NEAR(*r.trace[1].diagnostics.angle2d, 0.463648, 1e-6);
}

TEST(Run, NearUnstableFixedPointStalls) {
  RunConfig cfg;
  cfg.max_iters = 10;
  const Matrix m = rotated_diag2(1.0, 2.0, 1e-8);
  try {
    run(psd(m), cfg);
    FAIL() << "expected MaxItersExceeded";
  } catch (const MaxItersExceeded& e) {
    EXPECT_EQ(e.code(), "MaxItersExceeded");
    EXPECT_EQ(e.partial().final_state.k, 10u);
    EXPECT_EQ(e.partial().trace.size(), 11u);
    EXPECT_EQ(e.partial().final_state.active.size(), 2u);
  }
}

TEST(Run, LrOnSingularInputFails) {
  RunConfig cfg;
  cfg.algorithm = Algorithm::LR;
  EXPECT_THROW(run(psd(Matrix::diagonal({1.0, 0.0})), cfg), SingularMatrix);
}

TEST(Run, ConfigValidation) {
  RunConfig cfg;
  cfg.tol = 0.0;
  EXPECT_THROW(run(psd(kWorked), cfg), ValidationError);
  cfg = {};
  cfg.max_iters = 0;
  EXPECT_THROW(run(psd(kWorked), cfg), ValidationError);
  cfg = {};
  cfg.algorithm = Algorithm::LR;
  cfg.shift = ShiftStrategy::wilkinson();
  EXPECT_THROW(run(psd(kWorked), cfg), ValidationError);
}

TEST(Run, TraceEveryKeepsFirstAndLast) {
  RunConfig cfg;
  cfg.trace_every = 7;
  const auto full = run(psd(kWorked), RunConfig{});
  const auto thin = run(psd(kWorked), cfg);
  EXPECT_EQ(thin.trace.front().k, 0u);
  EXPECT_EQ(thin.trace.back().k, full.trace.back().k);
  for (std::size_t i = 1; i + 1 < thin.trace.size(); ++i) EXPECT_EQ(thin.trace[i].k % 7, 0u);
  EXPECT_EQ(thin.final_state.accum_q, full.final_state.accum_q);
}

TEST(Run, MakePsdShiftBack) {
  const auto shifted = make_psd(Matrix::from_rows({{1, 0}, {0, -3}}));
  const auto r = run(shifted.matrix, {});
  const auto sd = reconstruct_eigensystem(r.final_state, shifted.mu0);
  EXPECT_EQ(sd.eigenvalues, (std::vector<double>{1.0, -3.0}));
}

TEST(Run, LrAndWilkinsonConverge) {
  RunConfig lr;
  lr.algorithm = Algorithm::LR;
  RunConfig wil;
  wil.shift = ShiftStrategy::wilkinson();
  for (const auto& cfg : {lr, wil}) {
    const auto sd = reconstruct_eigensystem(run(psd(kWorked), cfg).final_state);
    EXPECT_NEAR(sd.eigenvalues[0], 2.0, 1e-9);
    EXPECT_NEAR(sd.eigenvalues[1], 1.0, 1e-9);
  }
}

TEST(ShiftStrategy, ParseAndPrint) {
  EXPECT_EQ(ShiftStrategy::parse("none"), ShiftStrategy::none());
  EXPECT_EQ(ShiftStrategy::parse("gershgorin"), ShiftStrategy::gershgorin());
  EXPECT_EQ(ShiftStrategy::parse("wilkinson"), ShiftStrategy::wilkinson());
  EXPECT_EQ(ShiftStrategy::parse("constant:0.25"), ShiftStrategy::constant(0.25));
  EXPECT_EQ(ShiftStrategy::parse("constant:-1e-3").mu, -1e-3);
  EXPECT_EQ(ShiftStrategy::constant(0.1).to_string(), "constant:0.10000000000000001");
  EXPECT_EQ(ShiftStrategy::parse(ShiftStrategy::constant(0.1).to_string()), ShiftStrategy::constant(0.1));
  for (const char* bad : {"", "constant:", "constant:x", "constant:1.5abc", "constant:nan", "Wilkinson", "rayleigh"})
    EXPECT_THROW(ShiftStrategy::parse(bad), ValidationError) << bad;
  EXPECT_EQ(parse_algorithm("qr"), Algorithm::QR);
  EXPECT_EQ(parse_algorithm("lr"), Algorithm::LR);
  EXPECT_THROW(parse_algorithm("qz"), ValidationError);
}

// ---- properties over seeded samples ----

TEST(EngineProperty, SpectrumPreservedByEveryStep) {
  Rng rng(1001);
  for (int s = 0; s < 500; ++s) {
    const auto m = sample_generic_psd(2, 8, rng);
    const double lmin = std::max(0.0, eigenvalues_of(m).back());
    EXPECT_LE(spectrum_error(qr_step(m), m), 1e-9);
    EXPECT_LE(spectrum_error(lr_step(m), m), 1e-9);
    for (double mu : {0.0, 0.3 * lmin, lmin}) EXPECT_LE(spectrum_error(shifted_qr_step(m, mu).matrix, m), 1e-9);
  }
}

TEST(EngineProperty, StepsStaySymmetric) {
  Rng rng(1002);
  for (int s = 0; s < 200; ++s) {
    const auto m = sample_generic_psd(2, 8, rng);
    for (const Matrix& out : {qr_step(m).matrix(), lr_step(m).matrix()})
      EXPECT_EQ(out, transpose(out));
  }
}

TEST(EngineProperty, PositiveHomogeneity) {
  Rng rng(1003);
  for (int s = 0; s < 100; ++s) {
    const auto m = sample_generic_psd(2, 8, rng);
    const Matrix base = qr_step(m);
    for (double lambda : {1e-3, 7.0, 1e3}) {
      const Matrix scaled = qr_step(SymPsdMatrix::unchecked(lambda * Matrix(m)));
      EXPECT_LE(max_abs(scaled - lambda * base), 1e-12 * scale_of(lambda * Matrix(m)));
    }
  }
}

TEST(EngineProperty, DiagonalFixedPointsAreExact) {
  Rng rng(1004);
  for (int s = 0; s < 200; ++s) {
    const std::size_t n = rng.index(1, 8);
    std::vector<double> d(n);
    for (double& x : d) x = rng.uniform(0.01, 10.0);
    const Matrix m = Matrix::diagonal(d);
    EXPECT_EQ(qr_step(psd(m)).matrix(), m);
    EXPECT_EQ(lr_step(psd(m)).matrix(), m);
  }
}

TEST(EngineProperty, GappedSamplesConverge) {
  Rng rng(1005);
  RunConfig cfg;
  cfg.tol = 1e-8;
  cfg.max_iters = 2000;
  for (int s = 0; s < 200; ++s) {
    const auto m = sample_gapped_psd({}, rng);
    RunResult r;
    ASSERT_NO_THROW(r = run(m, cfg)) << "sample " << s;
    const auto sd = reconstruct_eigensystem(r.final_state);
    EXPECT_EQ(sd.eigenvalues.size(), m.size());
  }
}

TEST(EngineProperty, AccumulatedTransformReconstructsTheIterate) {
  Rng rng(1006);
  for (const auto algorithm : {Algorithm::QR, Algorithm::LR}) {
    for (int s = 0; s < 60; ++s) {
      const auto m = sample_gapped_psd({}, rng);
      auto state = deflate_if_converged(initial_state(m, algorithm), 1e-10);
      const double scale = scale_of(m);
      while (!state.converged() && state.k < 400) {
        state = advance(state, ShiftStrategy::none(), 1e-10).state;
        const Matrix& v = state.accum_q;
        EXPECT_LE(frobenius_norm(transpose(v) * v - Matrix::identity(v.size())), 1e-9);
        // Vᵀ M₀ V equals the working matrix up to the discarded deflated couplings
        const Matrix w = working_matrix(state);
        const Matrix vt_m_v = transpose(v) * Matrix(m) * v;
        EXPECT_LE(max_abs(leading_block(vt_m_v, state.active.size()) - state.active.matrix()), 1e-8 * scale);
        for (const auto& d : state.deflated) EXPECT_NEAR(vt_m_v(d.slot, d.slot), w(d.slot, d.slot), 1e-8 * scale);
      }
    }
  }
}

TEST(EngineProperty, DeflationIsSoundAtEveryStep) {
  Rng rng(1007);
  RunConfig cfg;
  cfg.shift = ShiftStrategy::wilkinson();
  for (int s = 0; s < 100; ++s) {
    const auto m = sample_gapped_psd({}, rng);
    const auto want = eigenvalues_of(m);
    auto state = deflate_if_converged(initial_state(m, Algorithm::QR), cfg.tol);
    while (true) {
      std::vector<double> got;
      for (const auto& d : state.deflated) got.push_back(d.value);
      if (!state.converged())
        for (double x : eigenvalues_of(state.active)) got.push_back(x);
      std::sort(got.rbegin(), got.rend());
      const double rel = std::max(1.0, std::abs(want.front()));
      for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-8 * rel);
      if (state.converged()) break;
      ASSERT_LT(state.k, 500u);
      state = advance(state, cfg.shift, cfg.tol).state;
    }
  }
}

TEST(EngineProperty, ConvergedRunsSatisfyResidualBound) {
  Rng rng(1008);
  for (int s = 0; s < 100; ++s) {
    const auto m = sample_gapped_psd({}, rng);
    const auto r = run(m, {});
    const auto sd = reconstruct_eigensystem(r.final_state);
    const Matrix residual = Matrix(m) * sd.eigenvectors - sd.eigenvectors * Matrix::diagonal(sd.eigenvalues);
    EXPECT_LE(frobenius_norm(residual), 1e-6 * scale_of(m));
    EXPECT_TRUE(std::is_sorted(sd.eigenvalues.rbegin(), sd.eigenvalues.rend()));
  }
}

TEST(EngineProperty, RunsAreDeterministic) {
  Rng rng(1009);
  const auto m = sample_gapped_psd({}, rng);
  const auto a = run(m, {});
  const auto b = run(m, {});
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) EXPECT_EQ(a.trace[i].matrix, b.trace[i].matrix);
  EXPECT_EQ(a.final_state.accum_q, b.final_state.accum_q);
}
