#pragma once

/// @file
/// Primal side: closed-loop simulation under a state feedback, covariance
/// trajectories (rank-one deterministic and Lyapunov-propagated stochastic),
/// the primal objective ∫⟨𝒬, Σ⟩, descriptor and alignment residuals,
/// rank-one factor extraction, and a Monte Carlo cost estimate.

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "lqconic/dlmi.h"
#include "lqconic/model.h"
#include "lqconic/riccati.h"
#include "lqconic/symmat.h"

namespace lqconic {

/// Feedback u = −K(t)x sampled on grid nodes.  Between nodes: cubic
/// Hermite when the rates K̇ are present, linear otherwise.
struct Gain {
  TimeGrid grid;
  std::vector<Eigen::MatrixXd> K;
  std::vector<Eigen::MatrixXd> Kdot;

  Eigen::MatrixXd at(double t) const;
  int m() const { return static_cast<int>(K.front().rows()); }
  int n() const { return static_cast<int>(K.front().cols()); }
};

Gain zero_gain(const TimeGrid& grid, int m, int n);

/// K(t) = R⁻¹(Nᵀ + BᵀΛ̄(t)), with K̇ from Λ̇ given by the Riccati equation.
/// Λ̄ must cover the whole grid.
Gain gain_from_dual(const MatTrajectory& lambda_bar, const StateSpace& sys,
                    const QuadForm& qf);

struct Signals {
  TimeGrid grid;
  std::vector<Eigen::VectorXd> x;
  std::vector<Eigen::VectorXd> u;
};

/// RK4 on ẋ = (A − BK)x from x(0) = x0; u = −Kx at every node.
Signals closed_loop_simulate(const StateSpace& sys, const Gain& gain,
                             const Eigen::VectorXd& x0, const TimeGrid& grid);

enum class CovKind { kDeterministic, kStochastic };

struct CovTrajectory {
  MatTrajectory sigma;
  CovKind kind;
};

/// Σ(t_k) = [x;u][x;u]ᵀ.
CovTrajectory deterministic_covariance(const Signals& s);

/// Σxx from Σ̇xx = FΣxx + ΣxxFᵀ + W, F = A − BK, Σxx(0) = Xi (RK4), then
/// Σxu = −ΣxxKᵀ and Σuu = KΣxxKᵀ.
CovTrajectory stochastic_covariance(const StateSpace& sys, const Gain& gain,
                                    const MatrixFunction& W, const SymMat& Xi,
                                    const TimeGrid& grid);

/// ∫ ⟨𝒬(t), Σ(t)⟩ dt.
double primal_objective(const CovTrajectory& cov, const QuadForm& qf);

/// max over interior nodes of ‖ℰ(Σ̇) − 𝒜(Σ) − W‖_∞, Σ̇ by centered
/// differences.
double descriptor_residual(const CovTrajectory& cov, const StateSpace& sys,
                           const std::optional<MatrixFunction>& W = {});

/// ∫ ⟨𝓜(Λ̄)(t), Σ(t)⟩ dt on the common grid.  Throws kGridMismatch when the
/// grids differ or Λ̄ does not cover the horizon.
double alignment_residual(
    const CovTrajectory& cov, const MatTrajectory& lambda_bar,
    const StateSpace& sys, const QuadForm& qf,
    DerivativeSource source = DerivativeSource::kRiccatiRhs);

/// z with z·zᵀ = Σ.  The sign makes z·previous ≥ 0 when a previous factor
/// is given and nonzero, else makes the first significant entry positive.
/// Throws kRankTooHigh if eps_rank(Σ) > 1.
Eigen::VectorXd extract_rank_one_factor(
    const SymMat& sigma, double tol = kDefaultTol,
    const std::optional<Eigen::VectorXd>& previous = {});

struct MonteCarloResult {
  double mean = 0.0;
  double stderr_ = 0.0;
  int paths = 0;
};

struct MonteCarloOptions {
  int paths = 10000;
  std::uint64_t seed = 0;
  /// Start every path here instead of sampling N(0, Xi).
  std::optional<Eigen::VectorXd> fixed_x0;
};

/// Euler–Maruyama paths of dx = (A − BK)x dt + dw, Cov(dw) = W dt, at the
/// grid step; x(0) ~ N(0, Xi).  Each path cost ∫[x;u]ᵀ𝒬[x;u] is integrated
/// over the node values.  Path i draws from a generator seeded by
/// (seed, i).
MonteCarloResult monte_carlo_cost(const StateSpace& sys, const Gain& gain,
                                  const QuadForm& qf, const MatrixFunction& W,
                                  const SymMat& Xi, const TimeGrid& grid,
                                  const MonteCarloOptions& options = {});

}  // namespace lqconic
