#include "lqconic/riccati.h"

#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "lqconic/error.h"
#include "qp_oracle.h"

namespace lqconic {
namespace {

Eigen::MatrixXd scalar(double v) { return Eigen::MatrixXd::Constant(1, 1, v); }

Eigen::MatrixXd zeros(int r, int c) { return Eigen::MatrixXd::Zero(r, c); }

Eigen::MatrixXd randn(std::mt19937_64& rng, int r, int c) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(r, c);
  for (int j = 0; j < c; ++j) {
    for (int i = 0; i < r; ++i) m(i, j) = g(rng);
  }
  return m;
}

SymMat random_psd(std::mt19937_64& rng, int n) {
  const Eigen::MatrixXd G = randn(rng, n, n);
  return SymMat(G * G.transpose());
}

// a = 0, b = 1, q = r = 1: Λ(t) = tanh(T − t).
RiccatiModel scalar_lqr_model() {
  const StateSpace sys{scalar(0), scalar(1), scalar(0), scalar(0)};
  return RiccatiModel(sys, QuadForm(1, 1, Eigen::MatrixXd(Eigen::MatrixXd::Identity(2, 2))));
}

double max_residual(const MatTrajectory& r) {
  double worst = 0.0;
  for (int k = r.valid_begin(); k < r.valid_end(); ++k) {
    worst = std::max(worst, max_abs(r[k]));
  }
  return worst;
}

TEST(MatTrajectory, InterpolatesAndTracksValidRange) {
  const TimeGrid g(1.0, 2);
  MatTrajectory t(g, {SymMat(scalar(0)), SymMat(scalar(2)), SymMat(scalar(4))});
  EXPECT_TRUE(t.complete());
  EXPECT_DOUBLE_EQ(t.at(0.25)(0, 0), 1.0);
  t.set_valid_range(1, 3);
  EXPECT_FALSE(t.complete());
  EXPECT_FALSE(t.valid(0));
  EXPECT_TRUE(t.valid(2));
}

TEST(Transition, ZeroGeneratorGivesIdentity) {
  const TransitionMatrix phi =
      transition_matrix(Eigen::MatrixXd(Eigen::MatrixXd::Zero(2, 2)), TimeGrid(1.0, 16));
  EXPECT_EQ(phi(9, 3), Eigen::MatrixXd::Identity(2, 2));
}

TEST(Transition, ScalarClosedForm) {
  const double a = -0.8;
  const TimeGrid g(2.0, 200);
  const TransitionMatrix phi = transition_matrix(scalar(a), g);
  for (auto [k, j] : {std::pair{200, 0}, std::pair{150, 40}, std::pair{10, 90}}) {
    EXPECT_NEAR(phi(k, j)(0, 0), std::exp(a * (g.node(k) - g.node(j))), 1e-10);
  }
}

TEST(Transition, MatchesMatrixExponentialAndGroupLaw) {
  std::mt19937_64 rng(17);
  const Eigen::MatrixXd F = randn(rng, 3, 3);
  const TimeGrid g(1.0, 256);
  const TransitionMatrix phi = transition_matrix(F, g);
  EXPECT_LE(max_abs(phi(256, 0) - oracle::expm(F)), 1e-8);
  EXPECT_LE(max_abs(phi(200, 64) - oracle::expm(F * (g.node(200) - g.node(64)))), 1e-8);
  EXPECT_LE(max_abs(phi(200, 10) - phi(200, 99) * phi(99, 10)), 1e-10);
  EXPECT_LE(max_abs(phi(77, 77) - Eigen::MatrixXd::Identity(3, 3)), 1e-14);
}

TEST(Lyapunov, HandExamples) {
  const TimeGrid g(1.0, 64);
  const MatTrajectory x1 =
      solve_lyapunov_final(scalar(0), scalar(1), SymMat::Zero(1), g);
  for (int k = 0; k < g.size(); ++k) {
    EXPECT_NEAR(x1[k](0, 0), 1.0 - g.node(k), 1e-14);
  }
  const MatTrajectory x0 =
      solve_lyapunov_final(scalar(0.3), scalar(0), SymMat::Zero(1), g);
  for (int k = 0; k < g.size(); ++k) EXPECT_EQ(x0[k](0, 0), 0.0);

  const TimeGrid fine(1.0, 512);
  const MatTrajectory x2 =
      solve_lyapunov_final(scalar(-1), scalar(1), SymMat::Zero(1), fine);
  for (int k = 0; k < fine.size(); ++k) {
    const double tau = 1.0 - fine.node(k);
    EXPECT_NEAR(x2[k](0, 0), 0.5 * (1.0 - std::exp(-2.0 * tau)), 1e-9);
  }
}

TEST(Lyapunov, ScalarMatchesTransitionQuadrature) {
  // X(t) = ∫ₜᵀ Φ(s,t)ᵀ H Φ(s,t) ds, evaluated with Φ from the integrator.
  const TimeGrid g(1.0, 400);
  const double a = -1.0;
  const MatTrajectory x =
      solve_lyapunov_final(scalar(a), scalar(1), SymMat::Zero(1), g);
  const TransitionMatrix phi = transition_matrix(scalar(a), g);
  const int k0 = 100;
  double sum = 0.0;
  for (int s = k0; s <= g.steps(); ++s) {
    const double p = phi(s, k0)(0, 0);
    const double w = (s == k0 || s == g.steps()) ? 0.5 : 1.0;
    sum += w * p * p * g.h();
  }
  EXPECT_NEAR(x[k0](0, 0), sum, 1e-5);
}

TEST(Lyapunov, SignLawOnRandomData) {
  std::mt19937_64 rng(23);
  const TimeGrid g(1.0, 128);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 3;
    const Eigen::MatrixXd F = randn(rng, n, n);
    const SymMat H = random_psd(rng, n);
    const MatTrajectory back =
        solve_lyapunov_final(F, H.matrix(), SymMat::Zero(n), g);
    const MatTrajectory fwd =
        solve_lyapunov_initial(F, H.matrix(), SymMat::Zero(n), g);
    for (int k = 0; k < g.size(); ++k) {
      EXPECT_GE(min_eig(back[k]), -kDefaultTol * std::max(1.0, max_abs(back[k])));
      EXPECT_LE(max_eig(fwd[k]), kDefaultTol * std::max(1.0, max_abs(fwd[k])));
    }
  }
}

TEST(Dre, ScalarLqrIsTanh) {
  const TimeGrid g(1.0, 512);
  const DreSolution s = solve_dre_final(scalar_lqr_model(), SymMat::Zero(1), g);
  ASSERT_FALSE(s.escaped);
  ASSERT_TRUE(s.lambda.complete());
  double err = 0.0;
  for (int k = 0; k < g.size(); ++k) {
    err = std::max(err, std::abs(s.lambda[k](0, 0) - std::tanh(1.0 - g.node(k))));
  }
  EXPECT_LE(err, 1e-8);
  EXPECT_NEAR(s.lambda[0](0, 0), 0.761594155955765, 1e-9);
}

TEST(Dre, ZeroCostGivesZero) {
  const StateSpace sys{scalar(0.4), scalar(1), scalar(0), scalar(0)};
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(2, 2);
  q(1, 1) = 1.0;
  const DreSolution s = solve_dre_final(RiccatiModel(sys, QuadForm(1, 1, q)),
                                        SymMat::Zero(1), TimeGrid(1.0, 32));
  for (int k = 0; k < s.lambda.size(); ++k) EXPECT_EQ(s.lambda[k](0, 0), 0.0);
  EXPECT_EQ(s.residual_max, 0.0);
}

TEST(Dre, EscapesAtClosedFormTime) {
  // Λ̇ = 1 + Λ² backward from Λ(2) = 0 is −tan(2 − t).
  const TimeGrid g(2.0, 512);
  const DreSolution s = solve_dre_final(
      RiccatiModel::Standard(scalar(0), scalar(1), scalar(-1)), SymMat::Zero(1), g);
  ASSERT_TRUE(s.escaped);
  ASSERT_TRUE(s.escape_time.has_value());
  EXPECT_LE(std::abs(*s.escape_time - (2.0 - std::numbers::pi / 2)), 2 * g.h());
  EXPECT_FALSE(s.lambda.complete());
  EXPECT_TRUE(std::isnan(s.lambda[0](0, 0)));
  const int k = g.steps() / 2;
  ASSERT_TRUE(s.lambda.valid(k));
  EXPECT_NEAR(s.lambda[k](0, 0), -std::tan(2.0 - g.node(k)), 1e-8);
}

TEST(Dre, NegativeQuadraticCoefficientStaysBounded) {
  // −Λ̇ = −1 + Λ² from Λ(2) = 0 is −tanh(2 − t): no escape.
  const TimeGrid g(2.0, 512);
  const DreSolution s = solve_dre_final(
      RiccatiModel::Standard(scalar(0), scalar(-1), scalar(-1)), SymMat::Zero(1), g);
  EXPECT_FALSE(s.escaped);
  EXPECT_NEAR(s.lambda[0](0, 0), -std::tanh(2.0), 1e-9);
}

TEST(Dre, InitialValueForward) {
  const TimeGrid g(1.0, 512);
  const DreSolution zero = solve_dre_initial(
      RiccatiModel::Standard(scalar(0), scalar(1), scalar(0)), SymMat::Zero(1), g);
  for (int k = 0; k < g.size(); ++k) EXPECT_EQ(zero.lambda[k](0, 0), 0.0);

  const DreSolution s = solve_dre_initial(
      RiccatiModel::Standard(scalar(0), scalar(-1), scalar(-1)), SymMat::Zero(1), g);
  ASSERT_FALSE(s.escaped);
  for (int k = 0; k < g.size(); ++k) {
    EXPECT_NEAR(s.lambda[k](0, 0), std::tanh(g.node(k)), 1e-8);
  }
}

TEST(Dre, OrderOfAccuracy) {
  const RiccatiModel model = scalar_lqr_model();
  double prev_err = 0.0;
  double prev_res = 0.0;
  for (int steps : {32, 64, 128, 256}) {
    const TimeGrid g(1.0, steps);
    const DreSolution s = solve_dre_final(model, SymMat::Zero(1), g);
    double err = 0.0;
    for (int k = 0; k < g.size(); ++k) {
      err = std::max(err, std::abs(s.lambda[k](0, 0) - std::tanh(1.0 - g.node(k))));
    }
    if (prev_err > 0.0) {
      EXPECT_GE(prev_err / err, 8.0) << steps;
      // Λ̇ is differenced at second order, which bounds the residual's rate.
      EXPECT_GE(prev_res / s.residual_max, 4.0 * 0.99) << steps;
    }
    prev_err = err;
    prev_res = s.residual_max;
  }
}

TEST(Dre, ResidualOfZeroTrajectory) {
  const RiccatiModel model =
      RiccatiModel::Standard(scalar(0.5), scalar(1), scalar(0));
  const TimeGrid g(1.0, 16);
  const MatTrajectory zero(g, std::vector<SymMat>(17, SymMat::Zero(1)));
  EXPECT_EQ(max_residual(riccati_residual(zero, model)), 0.0);
}

TEST(Dre, ComparisonPrinciple) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 2;
    const Eigen::MatrixXd A = randn(rng, n, n);
    const SymMat M = random_psd(rng, n);
    const SymMat Q2 = SymMat::SymmetricPart(randn(rng, n, n));
    const SymMat Q1 = Q2 + random_psd(rng, n);
    const SymMat Lf = random_psd(rng, n);
    const TimeGrid g(1.0, 256);
    const DreSolution s1 =
        solve_dre_final(RiccatiModel::Standard(A, M.matrix(), Q1.matrix()), Lf, g);
    const DreSolution s2 =
        solve_dre_final(RiccatiModel::Standard(A, M.matrix(), Q2.matrix()), Lf, g);
    const LoewnerVerdict v = loewner_compare(s1.lambda, s2.lambda, 1e-8);
    EXPECT_TRUE(v.a_geq_b) << "trial " << trial << " min eig " << v.min_eig;
  }
}

TEST(Loewner, Examples) {
  const TimeGrid g(1.0, 4);
  Eigen::Vector2d d1(2, 0), d2(1, 1);
  const MatTrajectory a(g, std::vector<SymMat>(5, SymMat::Diagonal(d1)));
  const MatTrajectory b(g, std::vector<SymMat>(5, SymMat::Diagonal(d2)));
  EXPECT_EQ(loewner_compare(a, a, 0.0).order(), LoewnerOrder::kBoth);
  EXPECT_EQ(loewner_compare(a, b, 1e-12).order(), LoewnerOrder::kIncomparable);

  const TimeGrid g2(1.0, 8);
  const MatTrajectory c(g2, std::vector<SymMat>(9, SymMat::Diagonal(d1)));
  EXPECT_THROW(loewner_compare(a, c, 0.0), Error);
}

TEST(Loewner, LargerQGivesLargerSolution) {
  const TimeGrid g(1.0, 256);
  const DreSolution s1 = solve_dre_final(
      RiccatiModel::Standard(scalar(0), scalar(1), scalar(2)), SymMat::Zero(1), g);
  const DreSolution s2 = solve_dre_final(
      RiccatiModel::Standard(scalar(0), scalar(1), scalar(1)), SymMat::Zero(1), g);
  EXPECT_EQ(loewner_compare(s1.lambda, s2.lambda, 1e-12).order(),
            LoewnerOrder::kAGeqB);
}

TEST(ForcedDre, ZeroForcingMatchesPlainDre) {
  const RiccatiModel model = scalar_lqr_model();
  const TimeGrid g(1.0, 128);
  const DreSolution plain = solve_dre_final(model, SymMat::Zero(1), g);
  const DreSolution forced = solve_forced_dre(model, PiecewiseForcing(g, 1),
                                              SymMat::Zero(1), Boundary::kFinal);
  for (int k = 0; k < g.size(); ++k) {
    EXPECT_EQ(plain.lambda[k](0, 0), forced.lambda[k](0, 0));
  }

  DriSamplingOptions opts;
  opts.amplitude = 0.0;
  const DriSample flat = sample_dri_solution(model, SymMat::Zero(1), g, 5, opts);
  for (int k = 0; k < g.size(); ++k) {
    EXPECT_EQ(plain.lambda[k](0, 0), flat.solution.lambda[k](0, 0));
  }
}

TEST(ForcedDre, SampleResidualMatchesForcing) {
  const StateSpace sys{Eigen::MatrixXd(Eigen::Matrix2d{{0, 1}, {-1, -0.3}}),
                       Eigen::MatrixXd(Eigen::Vector2d(0, 1)),
                       zeros(1, 2), zeros(1, 1)};
  const RiccatiModel model(sys, QuadForm(2, 1, Eigen::MatrixXd(Eigen::MatrixXd::Identity(3, 3))));
  const TimeGrid g(1.0, 512);
  const DriSample s = sample_dri_solution(model, SymMat::Zero(2), g, 42);
  ASSERT_FALSE(s.solution.escaped);
  const MatTrajectory res = riccati_residual(s.solution.lambda, model);
  const MatTrajectory H = s.forcing.node_samples();
  double worst = 0.0;
  int checked = 0;
  for (int k = 1; k < g.steps(); ++k) {
    if (!s.forcing.smooth_at(k)) continue;
    worst = std::max(worst, max_abs(res[k] - H[k]) / (1.0 + max_abs(H[k])));
    ++checked;
  }
  EXPECT_GT(checked, g.steps() / 2);
  EXPECT_LE(worst, 1e-4);
  for (const SymMat& h : s.forcing.values()) EXPECT_TRUE(is_psd(h));
}

TEST(ForcedDre, SameSeedSameForcing) {
  const RiccatiModel model = scalar_lqr_model();
  const TimeGrid g(1.0, 64);
  const DriSample a = sample_dri_solution(model, SymMat::Zero(1), g, 99);
  const DriSample b = sample_dri_solution(model, SymMat::Zero(1), g, 99);
  const DriSample c = sample_dri_solution(model, SymMat::Zero(1), g, 100);
  ASSERT_EQ(a.forcing.values().size(), b.forcing.values().size());
  for (std::size_t i = 0; i < a.forcing.values().size(); ++i) {
    EXPECT_EQ(a.forcing.values()[i].matrix(), b.forcing.values()[i].matrix());
  }
  EXPECT_EQ(a.forcing.breakpoints(), b.forcing.breakpoints());
  EXPECT_NE(a.forcing.values()[0](0, 0), c.forcing.values()[0](0, 0));
}

TEST(ForcedDre, BreakpointsRoundToNodes) {
  const TimeGrid g(1.0, 64);
  DriSamplingOptions opts;
  opts.switch_points = 10;
  const DriSample s = sample_dri_solution(scalar_lqr_model(), SymMat::Zero(1), g, 1, opts);
  const std::vector<int>& b = s.forcing.breakpoints();
  ASSERT_EQ(b.size(), 11u);
  EXPECT_EQ(b.front(), 0);
  EXPECT_EQ(b.back(), 64);
  for (std::size_t i = 1; i < b.size(); ++i) EXPECT_GT(b[i], b[i - 1]);
}

TEST(ForcedDre, InitialExtremalIsMinimal) {
  const StateSpace sys{scalar(0.3), scalar(1), scalar(0), scalar(0)};
  const RiccatiModel model(sys, QuadForm(1, 1, Eigen::MatrixXd(Eigen::MatrixXd::Identity(2, 2))));
  const TimeGrid g(1.0, 256);
  const SymMat li(scalar(0.2));
  const DreSolution extremal = solve_dre_initial(model, li, g);
  DriSamplingOptions opts;
  opts.boundary = Boundary::kInitial;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const DriSample s = sample_dri_solution(model, li, g, seed, opts);
    const LoewnerVerdict v = loewner_compare(s.solution.lambda, extremal.lambda, 1e-7);
    EXPECT_TRUE(v.a_geq_b) << "seed " << seed << " min eig " << v.min_eig;
  }
}

TEST(ForcedDre, FinalExtremalIsMaximal) {
  const StateSpace sys{Eigen::MatrixXd(Eigen::Matrix2d{{0.2, 1}, {-1, 0}}),
                       Eigen::MatrixXd(Eigen::Vector2d(0, 1)),
                       zeros(1, 2), zeros(1, 1)};
  const RiccatiModel model(sys, QuadForm(2, 1, Eigen::MatrixXd(Eigen::MatrixXd::Identity(3, 3))));
  const TimeGrid g(1.0, 256);
  const DreSolution extremal = solve_dre_final(model, SymMat::Zero(2), g);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const DriSample s = sample_dri_solution(model, SymMat::Zero(2), g, seed);
    const LoewnerVerdict v = loewner_compare(s.solution.lambda, extremal.lambda, 1e-7);
    EXPECT_TRUE(v.b_geq_a) << "seed " << seed << " max eig " << v.max_eig;
  }
}

TEST(ForcedDre, NegativeForcingIsDetectedAboveExtremal) {
  // 𝓡(Λ) = −H with H ⪰ 0 violates the inequality, and the comparison has to
  // see it: such a Λ lies above the DRE, not below.
  const StateSpace sys{Eigen::MatrixXd(Eigen::Matrix2d{{0.2, 1}, {-1, 0}}),
                       Eigen::MatrixXd(Eigen::Vector2d(0, 1)),
                       zeros(1, 2), zeros(1, 1)};
  const RiccatiModel model(sys, QuadForm(2, 1, Eigen::MatrixXd(Eigen::MatrixXd::Identity(3, 3))));
  const TimeGrid g(1.0, 256);
  const DreSolution extremal = solve_dre_final(model, SymMat::Zero(2), g);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const DriSample s = sample_dri_solution(model, SymMat::Zero(2), g, seed);
    std::vector<SymMat> flipped;
    for (const SymMat& h : s.forcing.values()) flipped.push_back(SymMat(-h.matrix()));
    const PiecewiseForcing neg(g, s.forcing.breakpoints(), flipped);
    const DreSolution above =
        solve_forced_dre(model, neg, SymMat::Zero(2), Boundary::kFinal);
    ASSERT_FALSE(above.escaped);
    const LoewnerVerdict v = loewner_compare(above.lambda, extremal.lambda, 1e-7);
    EXPECT_FALSE(v.b_geq_a) << "seed " << seed;
    EXPECT_TRUE(v.a_geq_b) << "seed " << seed << " min eig " << v.min_eig;
  }
}

}  // namespace
}  // namespace lqconic
