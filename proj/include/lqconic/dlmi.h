#pragma once

/// @file
/// The DLMI matrix 𝓜(Λ) = 𝒬 + ℰ*(Λ̇) + 𝒜*(Λ), its pointwise feasibility
/// along a trajectory, the full-rank factorization at Riccati extremals, the
/// Lur'e residuals of a factorization, and the dual objective.

#include <algorithm>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "lqconic/model.h"
#include "lqconic/riccati.h"
#include "lqconic/symmat.h"

namespace lqconic {

/// [Q+Λ̇+AᵀΛ+ΛA, N+ΛB; (N+ΛB)ᵀ, R] at time t.
SymMat assemble_M(const SymMat& lambda, const SymMat& lambda_dot,
                  const StateSpace& sys, const QuadForm& qf, double t);

/// Λ̇ that makes 𝓡(Λ) vanish at t:
/// −(AᵀΛ + ΛA − (N+ΛB)R⁻¹(N+ΛB)ᵀ + Q).
SymMat dre_derivative(const SymMat& lambda, const StateSpace& sys,
                      const QuadForm& qf, double t);

enum class DerivativeSource {
  /// Differences of the samples; independent of how Λ was produced.
  kFiniteDifference,
  /// Substituted from the Riccati equation; exact for DRE extremals.
  kRiccatiRhs,
};

/// Λ̇ at every valid node from the chosen source.
std::vector<SymMat> lambda_derivative(const MatTrajectory& lambda,
                                      const StateSpace& sys,
                                      const QuadForm& qf,
                                      DerivativeSource source);

struct DlmiOptions {
  double tol = kDefaultTol;
  /// Extra absolute slack on the eigenvalue test, e.g. a finite-difference
  /// error bound.
  double extra_slack = 0.0;
  DerivativeSource derivative = DerivativeSource::kFiniteDifference;
  /// Λ(T) target; zero when absent.
  std::optional<SymMat> lambda_final;
  /// Also record the extremal factorization at every node.
  bool factorize = false;
};

struct DlmiCertificate {
  /// λ_min(𝓜(Λ)(t_k)); NaN at invalid nodes.
  std::vector<double> min_eig;
  double worst_min_eig = 0.0;
  double worst_node = 0.0;
  bool psd_ok = false;
  double boundary_error = 0.0;
  bool boundary_ok = false;
  /// psd_ok && boundary_ok && the trajectory covers the whole grid.
  bool feasible = false;
  std::vector<int> rank_trace;
  std::vector<SymFactor> factors;
  /// Richardson estimate of the error of the finite-difference Λ̇ (max
  /// entry); zero for the Riccati source.
  double derivative_error = 0.0;
};

DlmiCertificate feasibility(const MatTrajectory& lambda, const StateSpace& sys,
                            const QuadForm& qf,
                            const DlmiOptions& options = {});

/// U = [(N+Λ̄B)R^{-1/2}; R^{1/2}].  Throws kResidualTooLarge unless
/// ‖U·Uᵀ − 𝓜(Λ̄)‖_∞ ≤ tol·(1 + ‖𝓜(Λ̄)‖_∞) for the given Λ̇.
SymFactor extremal_factorization(const SymMat& lambda_bar,
                                 const SymMat& lambda_dot,
                                 const StateSpace& sys, const QuadForm& qf,
                                 double t, double tol = 1e-8);

/// Same, with Λ̇ taken from the Riccati equation.
SymFactor extremal_factorization(const SymMat& lambda_bar,
                                 const StateSpace& sys, const QuadForm& qf,
                                 double t, double tol = 1e-8);

struct LureResiduals {
  double r1 = 0.0;  ///< ‖U1U1ᵀ − (Q+Λ̇+AᵀΛ+ΛA)‖_∞
  double r2 = 0.0;  ///< ‖U1U2ᵀ − (N+ΛB)‖_∞
  double r3 = 0.0;  ///< ‖U2U2ᵀ − R‖_∞

  double max() const { return std::max({r1, r2, r3}); }
};

LureResiduals lure_residuals(const SymMat& lambda, const SymMat& lambda_dot,
                             const Eigen::MatrixXd& U1,
                             const Eigen::MatrixXd& U2, const StateSpace& sys,
                             const QuadForm& qf, double t);

/// x₀ᵀΛ(0)x₀.
double dual_objective(const MatTrajectory& lambda, const Eigen::VectorXd& x0);

/// tr(Λ(0)Xᵢ) + ∫ tr(Λ(t)W(t)) dt.
double dual_objective(const MatTrajectory& lambda, const SymMat& Xi,
                      const MatrixFunction& W);

}  // namespace lqconic
