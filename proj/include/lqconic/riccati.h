#pragma once

/// @file
/// Fixed-step RK4 integration of differential Lyapunov and Riccati equations
/// on a uniform grid, with finite-escape detection, forced (inequality)
/// solution sampling, residual evaluation by finite differences, and
/// Loewner-order comparison of trajectories.
///
/// Riccati equations are handled in the standard form
///
///   𝓡(Λ) = Λ̇ + ÂᵀΛ + ΛÂ − ΛMΛ + Q̂,
///
/// obtained from (A, B, Q, N, R) through Â = A − BR⁻¹Nᵀ, M = BR⁻¹Bᵀ,
/// Q̂ = Q − NR⁻¹Nᵀ, which coincides with
/// Λ̇ + AᵀΛ + ΛA − (N+ΛB)R⁻¹(N+ΛB)ᵀ + Q.  M may also be given directly, and
/// then may be indefinite.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lqconic/model.h"
#include "lqconic/symmat.h"

namespace lqconic {

/// Symmetric matrix samples on every node of a grid.  Samples outside
/// [valid_begin, valid_end) are not part of the solution (they lie beyond a
/// finite escape) and hold NaN.
class MatTrajectory {
 public:
  MatTrajectory(TimeGrid grid, std::vector<SymMat> samples,
                std::string label = {});

  const TimeGrid& grid() const { return grid_; }
  int size() const { return static_cast<int>(samples_.size()); }
  int dim() const { return samples_.front().dim(); }
  const SymMat& operator[](int k) const {
    return samples_[static_cast<std::size_t>(k)];
  }
  const std::vector<SymMat>& samples() const { return samples_; }

  int valid_begin() const { return valid_begin_; }
  int valid_end() const { return valid_end_; }
  bool valid(int k) const { return k >= valid_begin_ && k < valid_end_; }
  bool complete() const { return valid_begin_ == 0 && valid_end_ == size(); }
  void set_valid_range(int begin, int end);

  /// Linear interpolation between nodes.
  SymMat at(double t) const;

  const std::string& label() const { return label_; }
  void set_label(std::string label) { label_ = std::move(label); }

 private:
  TimeGrid grid_;
  std::vector<SymMat> samples_;
  int valid_begin_ = 0;
  int valid_end_ = 0;
  std::string label_;
};

/// Λ̇ at every valid node: centered differences inside, second-order
/// one-sided differences at the ends of the valid range.
std::vector<SymMat> finite_difference_derivative(const MatTrajectory& traj);

struct RiccatiCoefficients {
  Eigen::MatrixXd A;
  SymMat M;
  SymMat Q;
};

class RiccatiModel {
 public:
  /// Standard form of the Riccati operator of (sys, 𝒬).
  RiccatiModel(const StateSpace& sys, const QuadForm& qf);

  /// Coefficients given directly; M may be indefinite.
  static RiccatiModel Standard(MatrixFunction A, MatrixFunction M,
                               MatrixFunction Q);

  int n() const { return n_; }
  RiccatiCoefficients at(double t) const { return eval_(t); }

  /// ÂᵀΛ + ΛÂ − ΛMΛ + Q̂, i.e. 𝓡(Λ) without the Λ̇ term.
  SymMat field(double t, const SymMat& lambda) const;

 private:
  RiccatiModel(int n, std::function<RiccatiCoefficients(double)> eval)
      : n_(n), eval_(std::move(eval)) {}

  int n_;
  std::function<RiccatiCoefficients(double)> eval_;
};

struct DreSolution {
  MatTrajectory lambda;
  bool escaped = false;
  std::optional<double> escape_time;
  /// max ‖𝓡(Λ) − H‖_∞ over valid nodes (finite-difference Λ̇), where H is
  /// the forcing (zero for a plain DRE).
  double residual_max = 0.0;
};

struct RiccatiOptions {
  /// Escape is declared once sigma_max(Λ) exceeds this value.
  double escape_cap = 1e9;
  /// Substeps used to locate the escape inside the step where it occurs.
  int escape_substeps = 40;
};

enum class Boundary { kFinal, kInitial };

/// Piecewise-constant PSD forcing H(t), constant on each grid step.
class PiecewiseForcing {
 public:
  /// Zero forcing.
  PiecewiseForcing(TimeGrid grid, int n);
  /// `breakpoints` are increasing node indices 0 = b₀ < … < b_K = steps;
  /// values[j] holds on steps [b_j, b_{j+1}).
  PiecewiseForcing(TimeGrid grid, std::vector<int> breakpoints,
                   std::vector<SymMat> values);

  const TimeGrid& grid() const { return grid_; }
  const std::vector<int>& breakpoints() const { return breakpoints_; }
  const std::vector<SymMat>& values() const { return values_; }

  /// Value on step [t_k, t_{k+1}].
  const SymMat& on_step(int k) const;
  /// True if the centered stencil at node k stays inside one piece.
  bool smooth_at(int k) const;
  /// Right-continuous node samples (the last node takes the last piece).
  MatTrajectory node_samples() const;

 private:
  TimeGrid grid_;
  std::vector<int> breakpoints_;
  std::vector<SymMat> values_;
  std::vector<int> piece_of_step_;
};

/// Φ(t_k, t_j) for Φ̇ = F Φ, from RK4 on the grid.
class TransitionMatrix {
 public:
  TransitionMatrix(const MatrixFunction& F, const TimeGrid& grid);

  Eigen::MatrixXd operator()(int k, int j) const;
  const TimeGrid& grid() const { return grid_; }

 private:
  TimeGrid grid_;
  std::vector<Eigen::MatrixXd> from_zero_;
};

TransitionMatrix transition_matrix(const MatrixFunction& F,
                                   const TimeGrid& grid);

/// −Ẋ = FᵀX + XF + H integrated backward from X(T) = x_final.
MatTrajectory solve_lyapunov_final(const MatrixFunction& F,
                                   const MatrixFunction& H,
                                   const SymMat& x_final, const TimeGrid& grid);

/// The same equation integrated forward from X(0) = x_initial.
MatTrajectory solve_lyapunov_initial(const MatrixFunction& F,
                                     const MatrixFunction& H,
                                     const SymMat& x_initial,
                                     const TimeGrid& grid);

/// 𝓡(Λ) = H with Λ given at the final (backward sweep) or initial (forward
/// sweep) time.  Escape is an outcome, reported in the solution.
DreSolution solve_forced_dre(const RiccatiModel& model,
                             const PiecewiseForcing& forcing,
                             const SymMat& boundary_value, Boundary boundary,
                             const RiccatiOptions& options = {});

/// 𝓡(Λ) = 0, Λ(T) = lambda_f: the maximal solution of the final-value DRI.
DreSolution solve_dre_final(const RiccatiModel& model, const SymMat& lambda_f,
                            const TimeGrid& grid,
                            const RiccatiOptions& options = {});

/// 𝓡(Λ) = 0, Λ(0) = lambda_i: the minimal solution of the initial-value DRI.
DreSolution solve_dre_initial(const RiccatiModel& model,
                              const SymMat& lambda_i, const TimeGrid& grid,
                              const RiccatiOptions& options = {});

struct DriSample {
  DreSolution solution;
  PiecewiseForcing forcing;
};

struct DriSamplingOptions {
  int switch_points = 10;
  /// G has i.i.d. N(0,1) entries times this; H = G·Gᵀ.  Defaults to
  /// 0.5·(1 + ‖Q̂(0)‖_∞).
  std::optional<double> amplitude;
  Boundary boundary = Boundary::kFinal;
  RiccatiOptions riccati;
};

/// One solution of the DRI 𝓡(Λ) ⪰ 0 obtained as 𝓡(Λ) = H with a random
/// piecewise-constant H ⪰ 0 switching on `switch_points` equal subintervals
/// (rounded to grid nodes).  Reproducible from `seed`.
DriSample sample_dri_solution(const RiccatiModel& model,
                              const SymMat& boundary_value,
                              const TimeGrid& grid, std::uint64_t seed,
                              const DriSamplingOptions& options = {});

/// 𝓡(Λ) at every valid node with Λ̇ from finite differences.
MatTrajectory riccati_residual(const MatTrajectory& lambda,
                               const RiccatiModel& model);

enum class LoewnerOrder { kBoth, kAGeqB, kBGeqA, kIncomparable };

struct LoewnerVerdict {
  bool a_geq_b = true;
  bool b_geq_a = true;
  /// Extremes of the eigenvalues of a − b over shared valid nodes.
  double min_eig = 0.0;
  double max_eig = 0.0;
  int shared_nodes = 0;

  LoewnerOrder order() const;
};

/// Compares a and b at every node valid in both.  a ⪰ b holds when
/// λ_min(a − b) ≥ −tol at all of them.  Throws kGridMismatch if grids or
/// dimensions differ.
LoewnerVerdict loewner_compare(const MatTrajectory& a, const MatTrajectory& b,
                               double tol);

}  // namespace lqconic
