#pragma once

/// @file
/// End-to-end analyzers: LQR, stochastic LQR, general indefinite quadratic
/// constraints, the bounded-real and positive-real tests, induced-norm
/// bisection, the DRI-cloud experiment, and independent verification of a
/// certificate.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lqconic/covariance.h"
#include "lqconic/dlmi.h"
#include "lqconic/model.h"
#include "lqconic/riccati.h"

namespace lqconic {

struct AnalyzerOptions {
  double tol = kDefaultTol;
  RiccatiOptions riccati;
};

/// Optimality evidence produced by every analyzer.
struct Certificate {
  std::string variant;
  TimeGrid grid{1.0, 1};

  /// True when the infimum is −∞ (the DRE escapes); optimal_value is then
  /// NaN and escape_time is set.
  bool minus_infinity = false;
  std::optional<double> escape_time;
  double optimal_value = 0.0;

  double primal_value = 0.0;
  double duality_gap = 0.0;
  double alignment = 0.0;
  double dual_min_eig = 0.0;
  bool rank_ok = false;

  /// Bounded-real / positive-real outcome and the Λ ⪯ 0 check.
  std::optional<bool> verdict;
  std::optional<double> lambda_max_eig;
  std::optional<bool> sign_ok;
  std::optional<double> gamma;

  /// Λ̄ (possibly truncated at an escape) and the feedback gain.
  std::optional<MatTrajectory> lambda;
  std::optional<Gain> gain;
};

/// Throws kEscapeUnexpected if the DRE escapes.
Certificate solve_lqr(const ProblemSpec& spec,
                      const AnalyzerOptions& options = {});

Certificate solve_stoch_lqr(const ProblemSpec& spec,
                            const AnalyzerOptions& options = {});

/// Finite value, or minus_infinity with the escape time.
Certificate iqc_infimum(const ProblemSpec& spec,
                        const AnalyzerOptions& options = {});

struct TestResult {
  bool passed = false;
  Certificate certificate;
};

/// ‖z‖ < γ‖w‖ on [0, T] for zero initial state, decided by boundedness of
/// the DRE of [−CᵀC 0; 0 γ²I].
TestResult bounded_real_test(const StateSpace& sys, double gamma,
                             const TimeGrid& grid,
                             const AnalyzerOptions& options = {});

/// ⟨z, w⟩ ≥ 0 on [0, T] for zero initial state, decided by boundedness of
/// the DRE of ½[0 Cᵀ; C D+Dᵀ].  Throws ValidationError (kDNotStrictlyPassive)
/// unless D+Dᵀ ≻ 0.
TestResult passivity_test(const StateSpace& sys, const TimeGrid& grid,
                          const AnalyzerOptions& options = {});

struct NormResult {
  double gamma_star = 0.0;
  int iterations = 0;
  double lo = 0.0;
  double hi = 0.0;
};

/// Smallest γ passing bounded_real_test, to within `tol` (absolute bracket
/// width).  The bracket grows by factors of 4 from γ = 1, then bisects; at
/// most 60 iterations per phase.  C = 0 returns 0; a test that passes at
/// every γ otherwise throws kBracketFailure.
NormResult hinf_norm_bisection(const StateSpace& sys, const TimeGrid& grid,
                               double tol,
                               const AnalyzerOptions& options = {});

struct DriCloudOptions {
  int samples = 100;
  int switch_points = 10;
  std::uint64_t seed = 0;
  std::optional<double> amplitude;
  /// Margin for sample ⪯ extremal.
  double tol = 1e-7;
  RiccatiOptions riccati;
};

struct DriCloudReport {
  DreSolution extremal;
  std::vector<DriSample> samples;
  std::vector<std::uint64_t> seeds;
  /// Per sample: λ_max(sample − extremal) over shared nodes.
  std::vector<double> excess;
  double worst_excess = 0.0;
  int escaped_samples = 0;
  bool maximal = true;
};

/// Seed of sample i derived from the run seed.
std::uint64_t sample_seed(std::uint64_t seed, int index);

/// The extremal of the final-value DRE plus `samples` forced DRI solutions
/// sharing its final value, and the verdict that none exceeds it.
DriCloudReport dri_cloud(const RiccatiModel& model, const SymMat& lambda_f,
                         const TimeGrid& grid,
                         const DriCloudOptions& options = {});

struct Check {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool passed = false;
};

struct VerificationReport {
  std::vector<Check> checks;
  bool passed = false;
};

/// Recomputes the evidence behind `cert` independently: dual feasibility
/// with differenced Λ̇, value consistency, primal objective at 2× refinement,
/// duality gap, alignment, descriptor residual and the rank law.  Escape
/// claims and test verdicts are re-derived by solving again at 2×.
VerificationReport verify_solution(const ProblemSpec& spec,
                                   const Certificate& cert,
                                   const AnalyzerOptions& options = {});

}  // namespace lqconic
