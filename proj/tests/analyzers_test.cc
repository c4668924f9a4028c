#include "lqconic/analyzers.h"

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

const Check* find_check(const VerificationReport& r, const std::string& name) {
  for (const Check& c : r.checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

ProblemSpec scalar_lqr(double x0 = 1.0) {
  ProblemSpec spec;
  spec.sys = {scalar(0), scalar(1), scalar(0), scalar(0)};
  spec.grid = TimeGrid(1.0, 512);
  spec.variant = LqrProblem{{scalar(1), scalar(0), scalar(1)}, Eigen::VectorXd::Constant(1, x0)};
  return spec;
}

ProblemSpec from_instance(const oracle::Instance& in, double T, int steps) {
  ProblemSpec spec;
  spec.sys = {in.A, in.B, zeros(1, static_cast<int>(in.A.rows())),
              zeros(1, static_cast<int>(in.B.cols()))};
  spec.grid = TimeGrid(T, steps);
  spec.variant = LqrProblem{{in.Q, in.N, in.R}, in.x0};
  return spec;
}

StateSpace first_order(double c, double d) {
  return {scalar(-1), scalar(1), scalar(c), scalar(d)};
}

TEST(Lqr, ScalarValueAndCertificate) {
  const Certificate c = solve_lqr(scalar_lqr());
  EXPECT_EQ(c.variant, "lqr");
  EXPECT_FALSE(c.minus_infinity);
  EXPECT_NEAR(c.optimal_value, std::tanh(1.0), 1e-9);
  EXPECT_LE(std::abs(c.duality_gap), 1e-6);
  EXPECT_LE(std::abs(c.alignment), 1e-6);
  EXPECT_GE(c.dual_min_eig, -kDefaultTol);
  EXPECT_TRUE(c.rank_ok);
  ASSERT_TRUE(c.lambda.has_value());
  ASSERT_TRUE(c.gain.has_value());
}

TEST(Lqr, ZeroInitialStateCostsNothing) {
  const Certificate c = solve_lqr(scalar_lqr(0.0));
  EXPECT_EQ(c.optimal_value, 0.0);
  EXPECT_EQ(c.primal_value, 0.0);
}

TEST(Lqr, MatchesDiscretizedQp) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    const oracle::Instance in = oracle::random_instance(rng);
    const Certificate c = solve_lqr(from_instance(in, 1.0, 512));
    const double qp = oracle::qp_minimum(
        oracle::build_qp(in.A, in.B, in.Q, in.N, in.R, in.x0, 1.0, 50));
    EXPECT_LE(std::abs(c.optimal_value - qp), 1e-2 * std::abs(qp)) << trial;
    // Held inputs cannot beat the continuous optimum.
    EXPECT_GE(qp, c.optimal_value - 1e-9);
  }
}

TEST(Lqr, EscapeIsAnInternalError) {
  AnalyzerOptions o;
  o.riccati.escape_cap = 0.1;
  try {
    solve_lqr(scalar_lqr(), o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEscapeUnexpected);
  }
}

TEST(Lqr, WrongVariantThrows) {
  ProblemSpec spec = scalar_lqr();
  spec.variant = PositiveRealProblem{};
  EXPECT_THROW(solve_lqr(spec), Error);
}

TEST(StochLqr, ScalarIsLogCosh) {
  ProblemSpec spec = scalar_lqr();
  spec.variant = StochLqrProblem{{scalar(1), scalar(0), scalar(1)}, SymMat::Zero(1), scalar(1)};
  const Certificate c = solve_stoch_lqr(spec);
  EXPECT_NEAR(c.optimal_value, std::log(std::cosh(1.0)), 1e-9);
  EXPECT_LE(std::abs(c.duality_gap), 1e-6);
  EXPECT_TRUE(c.rank_ok);
}

TEST(StochLqr, NoNoiseMatchesDeterministic) {
  const ProblemSpec det = scalar_lqr(1.7);
  ProblemSpec sto = det;
  sto.variant = StochLqrProblem{{scalar(1), scalar(0), scalar(1)},
                                SymMat::Outer(Eigen::VectorXd::Constant(1, 1.7)), scalar(0)};
  EXPECT_NEAR(solve_stoch_lqr(sto).optimal_value, solve_lqr(det).optimal_value, 1e-12);
}

TEST(StochLqr, GainIgnoresNoiseAndInitialCovariance) {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 5; ++trial) {
    const oracle::Instance in = oracle::random_instance(rng);
    const ProblemSpec det = from_instance(in, 1.0, 256);
    const int n = static_cast<int>(in.A.rows());
    std::normal_distribution<double> g;
    Eigen::MatrixXd G(n, n);
    for (int i = 0; i < n * n; ++i) G.data()[i] = g(rng);
    ProblemSpec sto = det;
    sto.variant = StochLqrProblem{{in.Q, in.N, in.R}, SymMat(G * G.transpose()),
                                  Eigen::MatrixXd(G.transpose() * G)};
    const Certificate a = solve_lqr(det);
    const Certificate b = solve_stoch_lqr(sto);
    ASSERT_TRUE(a.gain && b.gain);
    for (std::size_t k = 0; k < a.gain->K.size(); ++k) {
      EXPECT_LE(max_abs(a.gain->K[k] - b.gain->K[k]), 1e-12);
    }
    EXPECT_LE(std::abs(b.duality_gap), 1e-6 * (1 + std::abs(b.optimal_value)));
  }
}

TEST(Iqc, NonnegativeFormWithZeroStart) {
  ProblemSpec spec = scalar_lqr();
  spec.variant = GeneralIqcProblem{{scalar(1), scalar(0), scalar(1)}, Eigen::VectorXd::Zero(1)};
  const Certificate c = iqc_infimum(spec);
  EXPECT_FALSE(c.minus_infinity);
  EXPECT_EQ(c.optimal_value, 0.0);
}

TEST(Iqc, EscapeMeansMinusInfinity) {
  ProblemSpec spec = scalar_lqr();
  spec.grid = TimeGrid(2.0, 512);
  spec.variant = GeneralIqcProblem{{scalar(-1), scalar(0), scalar(1)}, Eigen::VectorXd::Ones(1)};
  const Certificate c = iqc_infimum(spec);
  EXPECT_TRUE(c.minus_infinity);
  ASSERT_TRUE(c.escape_time.has_value());
  EXPECT_LE(std::abs(*c.escape_time - (2.0 - std::numbers::pi / 2)), 2 * spec.grid.h());
  EXPECT_TRUE(std::isnan(c.optimal_value));
  EXPECT_FALSE(c.gain.has_value());
}

TEST(Iqc, MixedSignatureShortHorizonMatchesQp) {
  // Q = −0.5 on T = 0.5 stays finite (escape would need T ≥ π/(2√0.5)).
  const double T = 0.5;
  ProblemSpec spec;
  spec.sys = {scalar(0.3), scalar(1), scalar(0), scalar(0)};
  spec.grid = TimeGrid(T, 512);
  spec.variant =
      GeneralIqcProblem{{scalar(-0.5), scalar(0.2), scalar(1)}, Eigen::VectorXd::Ones(1)};
  const Certificate c = iqc_infimum(spec);
  ASSERT_FALSE(c.minus_infinity);
  EXPECT_LT(c.optimal_value, 0.0);
  const double qp = oracle::qp_minimum(oracle::build_qp(
      scalar(0.3), scalar(1), scalar(-0.5), scalar(0.2), scalar(1), Eigen::VectorXd::Ones(1), T, 50));
  EXPECT_LE(std::abs(c.optimal_value - qp), 1e-2 * std::abs(qp));
  EXPECT_LE(std::abs(c.duality_gap), 1e-6);
}

TEST(Iqc, EscapeDichotomy) {
  // Escape happens iff the DRE alone escapes, over a sweep of Q.
  for (double q : {-3.0, -1.0, -0.2, 0.0, 0.5}) {
    ProblemSpec spec = scalar_lqr();
    spec.grid = TimeGrid(2.0, 256);
    spec.variant = GeneralIqcProblem{{scalar(q), scalar(0), scalar(1)}, Eigen::VectorXd::Ones(1)};
    const Certificate c = iqc_infimum(spec);
    const DreSolution s = solve_dre_final(
        RiccatiModel(spec.sys, assemble_quadform(spec)), SymMat::Zero(1), spec.grid);
    EXPECT_EQ(c.minus_infinity, s.escaped) << q;
    EXPECT_EQ(c.minus_infinity, std::isnan(c.optimal_value)) << q;
  }
}

TEST(BoundedReal, FirstOrderLag) {
  const TimeGrid g(10.0, 1024);
  const TestResult pass = bounded_real_test(first_order(1, 0), 2.0, g);
  EXPECT_TRUE(pass.passed);
  ASSERT_TRUE(pass.certificate.sign_ok.has_value());
  EXPECT_TRUE(*pass.certificate.sign_ok);
  EXPECT_LE(*pass.certificate.lambda_max_eig, kDefaultTol);

  const TestResult fail = bounded_real_test(first_order(1, 0), 0.5, g);
  EXPECT_FALSE(fail.passed);
  EXPECT_TRUE(fail.certificate.minus_infinity);
  EXPECT_TRUE(fail.certificate.escape_time.has_value());

  EXPECT_TRUE(bounded_real_test(first_order(1, 0), 1e6, g).passed);
}

TEST(BoundedReal, NonPositiveGammaThrows) {
  EXPECT_THROW(bounded_real_test(first_order(1, 0), 0.0, TimeGrid(1.0, 16)), Error);
}

TEST(Hinf, ZeroOutputHasZeroNorm) {
  const NormResult r = hinf_norm_bisection(first_order(0, 0), TimeGrid(10.0, 256), 1e-3);
  EXPECT_EQ(r.gamma_star, 0.0);
}

TEST(Hinf, BracketIsSoundAndNarrow) {
  const StateSpace sys = first_order(1, 0);
  const TimeGrid g(10.0, 512);
  const double tol = 1e-4;
  const NormResult r = hinf_norm_bisection(sys, g, tol);
  EXPECT_LE(r.hi - r.lo, tol);
  EXPECT_EQ(r.gamma_star, r.hi);
  EXPECT_TRUE(bounded_real_test(sys, r.hi, g).passed);
  EXPECT_FALSE(bounded_real_test(sys, r.lo, g).passed);
  const double oracle_norm = oracle::induced_norm(scalar(-1), scalar(1), scalar(1), 10.0, 200);
  EXPECT_LE(std::abs(r.gamma_star - oracle_norm), 0.02 * oracle_norm);
}

TEST(Hinf, GrowsWithHorizon) {
  const StateSpace sys = first_order(1, 0);
  double prev = 0.0;
  for (double T : {1.0, 3.0, 9.0}) {
    const NormResult r = hinf_norm_bisection(sys, TimeGrid(T, 512), 1e-5);
    EXPECT_GE(r.gamma_star, prev) << T;
    prev = r.gamma_star;
  }
  EXPECT_LT(prev, 1.0 + 1e-3);
}

TEST(Passivity, PositiveRealSystemPasses) {
  const TestResult r = passivity_test(first_order(1, 1), TimeGrid(10.0, 1024));
  EXPECT_TRUE(r.passed);
  ASSERT_TRUE(r.certificate.sign_ok.has_value());
  EXPECT_TRUE(*r.certificate.sign_ok);
}

TEST(Passivity, AdversarialOutputFails) {
  const TestResult r = passivity_test(first_order(-5, 0.01), TimeGrid(10.0, 1024));
  EXPECT_FALSE(r.passed);
  EXPECT_TRUE(r.certificate.minus_infinity);
  EXPECT_TRUE(r.certificate.escape_time.has_value());
}

TEST(Passivity, PureFeedthroughPasses) {
  EXPECT_TRUE(passivity_test(first_order(0, 1), TimeGrid(5.0, 256)).passed);
}

TEST(Passivity, RequiresStrictlyPassiveFeedthrough) {
  try {
    passivity_test(first_order(1, 0), TimeGrid(1.0, 16));
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_TRUE(e.has(ErrorCode::kDNotStrictlyPassive));
  }
}

TEST(DriCloud, NoSamplesGivesOnlyExtremal) {
  DriCloudOptions o;
  o.samples = 0;
  const DriCloudReport r = dri_cloud(
      RiccatiModel::Standard(scalar(0), scalar(1), scalar(1)), SymMat::Zero(1),
      TimeGrid(2.0, 128), o);
  EXPECT_TRUE(r.samples.empty());
  EXPECT_TRUE(r.maximal);
  EXPECT_FALSE(r.extremal.escaped);
}

TEST(DriCloud, MaximalForAllSignCombinations) {
  for (double q : {1.0, -1.0}) {
    for (double m : {1.0, -1.0}) {
      DriCloudOptions o;
      o.seed = 1;
      const DriCloudReport r = dri_cloud(RiccatiModel::Standard(scalar(0), scalar(m), scalar(q)),
                                         SymMat::Zero(1), TimeGrid(2.0, 512), o);
      EXPECT_EQ(r.samples.size(), 100u);
      EXPECT_TRUE(r.maximal) << "q=" << q << " m=" << m << " worst " << r.worst_excess;
      EXPECT_LE(r.worst_excess, 1e-7);
    }
  }
}

TEST(DriCloud, SameSeedSameReport) {
  DriCloudOptions o;
  o.samples = 10;
  o.seed = 77;
  const RiccatiModel model = RiccatiModel::Standard(scalar(0), scalar(-1), scalar(1));
  const DriCloudReport a = dri_cloud(model, SymMat::Zero(1), TimeGrid(2.0, 128), o);
  const DriCloudReport b = dri_cloud(model, SymMat::Zero(1), TimeGrid(2.0, 128), o);
  EXPECT_EQ(a.seeds, b.seeds);
  EXPECT_EQ(a.excess, b.excess);
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    const MatTrajectory& x = a.samples[i].solution.lambda;
    const MatTrajectory& y = b.samples[i].solution.lambda;
    for (int k = x.valid_begin(); k < x.valid_end(); ++k) EXPECT_EQ(x[k](0, 0), y[k](0, 0));
  }
  EXPECT_NE(sample_seed(77, 0), sample_seed(77, 1));
  EXPECT_NE(sample_seed(77, 0), sample_seed(78, 0));
}

TEST(Verify, FreshCertificatesPass) {
  const ProblemSpec lqr = scalar_lqr();
  const VerificationReport r = verify_solution(lqr, solve_lqr(lqr));
  EXPECT_TRUE(r.passed);
  for (const Check& c : r.checks) EXPECT_TRUE(c.passed) << c.name;

  ProblemSpec esc = scalar_lqr();
  esc.grid = TimeGrid(2.0, 256);
  esc.variant = GeneralIqcProblem{{scalar(-1), scalar(0), scalar(1)}, Eigen::VectorXd::Ones(1)};
  EXPECT_TRUE(verify_solution(esc, iqc_infimum(esc)).passed);
}

TEST(Verify, ZeroedGainFailsAlignment) {
  const ProblemSpec spec = scalar_lqr();
  Certificate c = solve_lqr(spec);
  for (auto& k : c.gain->K) k.setZero();
  for (auto& k : c.gain->Kdot) k.setZero();
  const VerificationReport r = verify_solution(spec, c);
  EXPECT_FALSE(r.passed);
  const Check* gap = find_check(r, "duality_gap");
  ASSERT_NE(gap, nullptr);
  EXPECT_FALSE(gap->passed);
  EXPECT_GT(gap->value, 0.0);
  const Check* align = find_check(r, "alignment");
  ASSERT_NE(align, nullptr);
  EXPECT_FALSE(align->passed);
}

TEST(Verify, OppositeFeedbackSignFails) {
  // u = +R⁻¹BᵀΛx instead of −R⁻¹BᵀΛx: the gap and alignment must both open.
  const ProblemSpec spec = scalar_lqr();
  Certificate c = solve_lqr(spec);
  for (auto& k : c.gain->K) k = -k;
  for (auto& k : c.gain->Kdot) k = -k;
  const VerificationReport r = verify_solution(spec, c);
  EXPECT_FALSE(r.passed);
  EXPECT_FALSE(find_check(r, "duality_gap")->passed);
  EXPECT_FALSE(find_check(r, "alignment")->passed);
  EXPECT_GT(find_check(r, "duality_gap")->value, 0.1);
}

TEST(Verify, SuboptimalDualIsFeasibleButSmaller) {
  // A forced DRI solution with the same final value is dual feasible and
  // lies below the extremal, so its objective falls short of the optimum.
  const ProblemSpec spec = scalar_lqr();
  Certificate c = solve_lqr(spec);
  const QuadForm qf = assemble_quadform(spec);
  const DriSample s =
      sample_dri_solution(RiccatiModel(spec.sys, qf), SymMat::Zero(1), spec.grid, 3);
  ASSERT_FALSE(s.solution.escaped);
  const Eigen::VectorXd x0 = Eigen::VectorXd::Ones(1);
  const double lower = dual_objective(s.solution.lambda, x0);
  EXPECT_LT(lower, c.optimal_value - 1e-6);

  DlmiOptions o;
  o.extra_slack = 1e-3;
  EXPECT_TRUE(feasibility(s.solution.lambda, spec.sys, qf, o).feasible);

  c.lambda = s.solution.lambda;
  c.optimal_value = lower;
  const VerificationReport r = verify_solution(spec, c);
  EXPECT_FALSE(r.passed);
  const Check* gap = find_check(r, "duality_gap");
  ASSERT_NE(gap, nullptr);
  EXPECT_FALSE(gap->passed);
}

TEST(Verify, TamperedValueFails) {
  const ProblemSpec spec = scalar_lqr();
  Certificate c = solve_lqr(spec);
  c.optimal_value += 0.01;
  const VerificationReport r = verify_solution(spec, c);
  EXPECT_FALSE(r.passed);
  EXPECT_FALSE(find_check(r, "value_consistent")->passed);
}

TEST(Verify, SignTestsAreReproduced) {
  const TimeGrid g(10.0, 512);
  ProblemSpec spec;
  spec.sys = first_order(1, 1);
  spec.grid = g;
  spec.variant = PositiveRealProblem{};
  TestResult t = passivity_test(spec.sys, g);
  EXPECT_TRUE(verify_solution(spec, t.certificate).passed);
  t.certificate.verdict = !*t.certificate.verdict;
  EXPECT_FALSE(verify_solution(spec, t.certificate).passed);
}

}  // namespace
}  // namespace lqconic
