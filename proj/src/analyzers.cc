#include "lqconic/analyzers.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "lqconic/error.h"

namespace lqconic {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double gap_tolerance(double dual) {
  return std::max(1e-6, 1e-3 * std::abs(dual));
}

// Primal/dual payload of the finite-value variants.
struct Payload {
  bool stochastic = false;
  Eigen::VectorXd x0;
  SymMat Xi;
  MatrixFunction W;
};

Payload payload_of(const ProblemSpec& spec) {
  Payload p;
  const int n = spec.sys.n();
  if (const auto* v = std::get_if<LqrProblem>(&spec.variant)) {
    p.x0 = v->x0;
  } else if (const auto* v = std::get_if<GeneralIqcProblem>(&spec.variant)) {
    p.x0 = v->x0;
  } else if (const auto* v = std::get_if<StochLqrProblem>(&spec.variant)) {
    p.stochastic = true;
    p.Xi = v->Xi;
    p.W = v->W;
  } else {
    p.x0 = Eigen::VectorXd::Zero(n);
  }
  return p;
}

double dual_value(const MatTrajectory& lambda, const Payload& p) {
  return p.stochastic ? dual_objective(lambda, p.Xi, p.W)
                      : dual_objective(lambda, p.x0);
}

CovTrajectory primal_covariance(const StateSpace& sys, const Gain& gain,
                                const Payload& p, const TimeGrid& grid) {
  if (p.stochastic) return stochastic_covariance(sys, gain, p.W, p.Xi, grid);
  return deterministic_covariance(closed_loop_simulate(sys, gain, p.x0, grid));
}

double lambda_max_eig(const MatTrajectory& lambda) {
  double worst = -std::numeric_limits<double>::infinity();
  for (int k = lambda.valid_begin(); k < lambda.valid_end(); ++k) {
    worst = std::max(worst, max_eig(lambda[k]));
  }
  return worst;
}

// Solves the final-value DRE for 𝒬 and fills the certificate: dual value,
// gain, primal objective of the closed loop, gap, alignment and the DLMI
// evidence along Λ̄.
Certificate certify(const ProblemSpec& spec, const QuadForm& qf,
                    const Payload& payload, const AnalyzerOptions& options) {
  const StateSpace& sys = spec.sys;
  const RiccatiModel model(sys, qf);
  DreSolution sol =
      solve_dre_final(model, SymMat::Zero(sys.n()), spec.grid, options.riccati);

  Certificate c;
  c.variant = std::string(variant_name(spec.variant));
  c.grid = spec.grid;
  if (sol.escaped) {
    c.minus_infinity = true;
    c.escape_time = sol.escape_time;
    c.optimal_value = kNaN;
    c.primal_value = kNaN;
    c.duality_gap = kNaN;
    c.alignment = kNaN;
    c.dual_min_eig = kNaN;
    c.lambda = std::move(sol.lambda);
    return c;
  }

  const MatTrajectory& lambda = sol.lambda;
  c.optimal_value = dual_value(lambda, payload);
  Gain gain = gain_from_dual(lambda, sys, qf);
  const CovTrajectory cov = primal_covariance(sys, gain, payload, spec.grid);
  c.primal_value = primal_objective(cov, qf);
  c.duality_gap = c.primal_value - c.optimal_value;
  c.alignment = alignment_residual(cov, lambda, sys, qf);

  DlmiOptions dopt;
  dopt.tol = options.tol;
  dopt.derivative = DerivativeSource::kRiccatiRhs;
  const DlmiCertificate dc = feasibility(lambda, sys, qf, dopt);
  c.dual_min_eig = dc.worst_min_eig;
  c.rank_ok = std::all_of(dc.rank_trace.begin(), dc.rank_trace.end(),
                          [&](int r) { return r == sys.m(); });
  c.gain = std::move(gain);
  c.lambda = std::move(sol.lambda);
  return c;
}

template <typename V>
const V& require_variant(const ProblemSpec& spec, const char* who) {
  const V* v = std::get_if<V>(&spec.variant);
  if (v == nullptr) {
    throw Error(ErrorCode::kValidation,
                std::string(who) + ": wrong problem variant '" +
                    std::string(variant_name(spec.variant)) + "'");
  }
  return *v;
}

TestResult sign_test(const ProblemSpec& spec, const AnalyzerOptions& options) {
  validate(spec, options.tol);
  const QuadForm qf = assemble_quadform(spec, options.tol);
  TestResult r;
  r.certificate = certify(spec, qf, payload_of(spec), options);
  Certificate& c = r.certificate;
  r.passed = !c.minus_infinity;
  c.verdict = r.passed;
  c.lambda_max_eig = lambda_max_eig(*c.lambda);
  c.sign_ok = *c.lambda_max_eig <= options.tol;
  return r;
}

bool all_zero(const MatrixFunction& f) {
  if (f.rows() == 0 || f.cols() == 0) return true;
  if (f.is_constant()) return max_abs(f.constant()) == 0.0;
  return std::all_of(f.samples().begin(), f.samples().end(),
                     [](const Eigen::MatrixXd& s) { return max_abs(s) == 0.0; });
}

}  // namespace

Certificate solve_lqr(const ProblemSpec& spec, const AnalyzerOptions& options) {
  require_variant<LqrProblem>(spec, "solve_lqr");
  validate(spec, options.tol);
  const QuadForm qf = assemble_quadform(spec, options.tol);
  Certificate c = certify(spec, qf, payload_of(spec), options);
  if (c.minus_infinity) {
    throw Error(ErrorCode::kEscapeUnexpected,
                "solve_lqr: Riccati solution escaped at t = " +
                    std::to_string(c.escape_time.value_or(kNaN)) +
                    " although Q ⪰ 0 and R ≻ 0");
  }
  return c;
}

Certificate solve_stoch_lqr(const ProblemSpec& spec,
                            const AnalyzerOptions& options) {
  require_variant<StochLqrProblem>(spec, "solve_stoch_lqr");
  validate(spec, options.tol);
  const QuadForm qf = assemble_quadform(spec, options.tol);
  Certificate c = certify(spec, qf, payload_of(spec), options);
  if (c.minus_infinity) {
    throw Error(ErrorCode::kEscapeUnexpected,
                "solve_stoch_lqr: Riccati solution escaped at t = " +
                    std::to_string(c.escape_time.value_or(kNaN)));
  }
  return c;
}

Certificate iqc_infimum(const ProblemSpec& spec,
                        const AnalyzerOptions& options) {
  require_variant<GeneralIqcProblem>(spec, "iqc_infimum");
  validate(spec, options.tol);
  const QuadForm qf = assemble_quadform(spec, options.tol);
  return certify(spec, qf, payload_of(spec), options);
}

TestResult bounded_real_test(const StateSpace& sys, double gamma,
                             const TimeGrid& grid,
                             const AnalyzerOptions& options) {
  ProblemSpec spec{sys, grid, BoundedRealProblem{gamma}};
  TestResult r = sign_test(spec, options);
  r.certificate.gamma = gamma;
  return r;
}

TestResult passivity_test(const StateSpace& sys, const TimeGrid& grid,
                          const AnalyzerOptions& options) {
  return sign_test(ProblemSpec{sys, grid, PositiveRealProblem{}}, options);
}

NormResult hinf_norm_bisection(const StateSpace& sys, const TimeGrid& grid,
                               double tol, const AnalyzerOptions& options) {
  if (!(tol > 0.0)) {
    throw Error(ErrorCode::kValidation, "hinf_norm_bisection: tol must be > 0");
  }
  NormResult res;
  if (all_zero(sys.C)) return res;

  constexpr int kMaxIterations = 60;
  auto passes = [&](double g) {
    return bounded_real_test(sys, g, grid, options).passed;
  };
  double lo = 0.0;
  double hi = 1.0;
  int grow = 0;
  if (passes(hi)) {
    lo = hi / 4.0;
    while (passes(lo)) {
      hi = lo;
      lo /= 4.0;
      if (++grow >= kMaxIterations) {
        throw Error(ErrorCode::kBracketFailure,
                    "hinf_norm_bisection: test passes at γ = " +
                        std::to_string(lo) + " and every larger γ tried");
      }
    }
  } else {
    lo = hi;
    hi *= 4.0;
    while (!passes(hi)) {
      lo = hi;
      hi *= 4.0;
      if (++grow >= kMaxIterations) {
        throw Error(ErrorCode::kBracketFailure,
                    "hinf_norm_bisection: test fails up to γ = " +
                        std::to_string(hi));
      }
    }
  }
  while (hi - lo > tol && res.iterations < kMaxIterations) {
    const double mid = 0.5 * (lo + hi);
    if (passes(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
    ++res.iterations;
  }
  res.gamma_star = hi;
  res.lo = lo;
  res.hi = hi;
  return res;
}

std::uint64_t sample_seed(std::uint64_t seed, int index) {
  // splitmix64 of seed advanced by index+1 golden-ratio increments.
  std::uint64_t z =
      seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(index) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

DriCloudReport dri_cloud(const RiccatiModel& model, const SymMat& lambda_f,
                         const TimeGrid& grid, const DriCloudOptions& options) {
  DriCloudReport rep{solve_dre_final(model, lambda_f, grid, options.riccati),
                     {}, {}, {}, -std::numeric_limits<double>::infinity(), 0,
                     true};
  DriSamplingOptions sopt;
  sopt.switch_points = options.switch_points;
  sopt.amplitude = options.amplitude;
  sopt.boundary = Boundary::kFinal;
  sopt.riccati = options.riccati;
  for (int i = 0; i < options.samples; ++i) {
    const std::uint64_t s = sample_seed(options.seed, i);
    DriSample sample = sample_dri_solution(model, lambda_f, grid, s, sopt);
    const LoewnerVerdict v =
        loewner_compare(sample.solution.lambda, rep.extremal.lambda,
                        options.tol);
    rep.excess.push_back(v.max_eig);
    rep.worst_excess = std::max(rep.worst_excess, v.max_eig);
    rep.maximal = rep.maximal && v.b_geq_a;
    if (sample.solution.escaped) ++rep.escaped_samples;
    rep.seeds.push_back(s);
    rep.samples.push_back(std::move(sample));
  }
  if (options.samples == 0) rep.worst_excess = 0.0;
  return rep;
}

namespace {

void add_check(VerificationReport& r, std::string name, double value,
               double threshold, bool passed) {
  r.checks.push_back(Check{std::move(name), value, threshold, passed});
}

void verify_sign_test(const ProblemSpec& spec, const Certificate& cert,
                      const AnalyzerOptions& options, VerificationReport& r) {
  ProblemSpec fine = spec;
  fine.grid = spec.grid.refined(2);
  const TestResult again = sign_test(fine, options);
  add_check(r, "verdict_reproduced", again.passed ? 1.0 : 0.0,
            *cert.verdict ? 1.0 : 0.0, again.passed == *cert.verdict);
  if (again.passed) {
    add_check(r, "lambda_nonpositive", *again.certificate.lambda_max_eig,
              options.tol, *again.certificate.sign_ok);
  }
}

void verify_escape(const ProblemSpec& spec, const QuadForm& qf,
                   const Certificate& cert, const AnalyzerOptions& options,
                   VerificationReport& r) {
  const TimeGrid fine = spec.grid.refined(2);
  const DreSolution sol =
      solve_dre_final(RiccatiModel(spec.sys, qf), SymMat::Zero(spec.sys.n()),
                      fine, options.riccati);
  add_check(r, "escape_reproduced", sol.escaped ? 1.0 : 0.0, 1.0, sol.escaped);
  if (sol.escaped && cert.escape_time) {
    const double diff = std::abs(*sol.escape_time - *cert.escape_time);
    const double bound = 2.0 * spec.grid.h();
    add_check(r, "escape_time", diff, bound, diff <= bound);
  }
}

void verify_finite(const ProblemSpec& spec, const QuadForm& qf,
                   const Certificate& cert, const AnalyzerOptions& options,
                   VerificationReport& r) {
  const StateSpace& sys = spec.sys;
  if (!cert.lambda || !cert.gain || !cert.lambda->complete() ||
      !(cert.lambda->grid() == spec.grid) || cert.lambda->dim() != sys.n() ||
      cert.gain->n() != sys.n() || cert.gain->m() != sys.m()) {
    add_check(r, "certificate_complete", 0.0, 1.0, false);
    return;
  }
  const MatTrajectory& lambda = *cert.lambda;
  const Gain& gain = *cert.gain;
  const Payload payload = payload_of(spec);

  // Dual feasibility from the samples alone, with slack for the
  // differencing error of Λ̇: the entrywise Richardson estimate, times n to
  // bound the eigenvalue shift, times 2 as a safety factor.
  DlmiOptions fd;
  fd.tol = options.tol;
  fd.derivative = DerivativeSource::kFiniteDifference;
  const double slack =
      2.0 * sys.n() * feasibility(lambda, sys, qf, fd).derivative_error;
  fd.extra_slack = slack;
  const DlmiCertificate dc = feasibility(lambda, sys, qf, fd);
  add_check(r, "dual_feasible", dc.worst_min_eig, -slack, dc.feasible);

  const double dual = dual_value(lambda, payload);
  const double value_err = std::abs(dual - cert.optimal_value);
  const double value_bound = 1e-9 * (1.0 + std::abs(dual));
  add_check(r, "value_consistent", value_err, value_bound,
            value_err <= value_bound);

  const TimeGrid fine = spec.grid.refined(2);
  const CovTrajectory cov_fine = primal_covariance(sys, gain, payload, fine);
  const double primal = primal_objective(cov_fine, qf);
  const double gap = primal - cert.optimal_value;
  const double gap_bound = gap_tolerance(cert.optimal_value);
  add_check(r, "duality_gap", gap, gap_bound, std::abs(gap) <= gap_bound);

  const CovTrajectory cov = primal_covariance(sys, gain, payload, spec.grid);
  const double align = alignment_residual(cov, lambda, sys, qf,
                                          DerivativeSource::kFiniteDifference);
  add_check(r, "alignment", align, gap_bound, std::abs(align) <= gap_bound);

  std::optional<MatrixFunction> W;
  if (payload.stochastic) W = payload.W;
  const double desc_coarse = descriptor_residual(cov, sys, W);
  const double desc_fine = descriptor_residual(cov_fine, sys, W);
  double peak = 0.0;
  for (const SymMat& s : cov.sigma.samples()) peak = std::max(peak, max_abs(s));
  const double desc_bound = 0.5 * desc_coarse + options.tol * (1.0 + peak);
  add_check(r, "descriptor_converges", desc_fine, desc_bound,
            desc_fine <= desc_bound);

  DlmiOptions rhs;
  rhs.tol = options.tol;
  rhs.derivative = DerivativeSource::kRiccatiRhs;
  const DlmiCertificate rc = feasibility(lambda, sys, qf, rhs);
  const int worst_rank =
      *std::max_element(rc.rank_trace.begin(), rc.rank_trace.end());
  const bool rank_ok = std::all_of(rc.rank_trace.begin(), rc.rank_trace.end(),
                                   [&](int k) { return k == sys.m(); });
  add_check(r, "rank", worst_rank, sys.m(), rank_ok);
}

}  // namespace

VerificationReport verify_solution(const ProblemSpec& spec,
                                   const Certificate& cert,
                                   const AnalyzerOptions& options) {
  VerificationReport r;
  validate(spec, options.tol);
  const QuadForm qf = assemble_quadform(spec, options.tol);
  if (cert.variant != variant_name(spec.variant)) {
    add_check(r, "variant_matches", 0.0, 1.0, false);
  } else if (cert.verdict) {
    verify_sign_test(spec, cert, options, r);
  } else if (cert.minus_infinity) {
    verify_escape(spec, qf, cert, options, r);
  } else {
    verify_finite(spec, qf, cert, options, r);
  }
  r.passed = !r.checks.empty() &&
             std::all_of(r.checks.begin(), r.checks.end(),
                         [](const Check& c) { return c.passed; });
  return r;
}

}  // namespace lqconic
