#pragma once

/// @file
/// Problem model: time grid, state-space data (constant or sampled), cost
/// data, the problem variants, the quadratic-form matrix 𝒬 assembled per
/// variant, and the structured operators ℰ, 𝒜 with their adjoints.

#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "lqconic/symmat.h"

namespace lqconic {

/// Uniform nodes t_k = k·T/steps on [0, T].
class TimeGrid {
 public:
  TimeGrid(double T, int steps);

  double horizon() const { return T_; }
  int steps() const { return steps_; }
  int size() const { return steps_ + 1; }
  double h() const { return T_ / steps_; }
  double node(int k) const { return T_ * k / steps_; }

  /// Same horizon with `factor` times as many steps.
  TimeGrid refined(int factor) const { return TimeGrid(T_, steps_ * factor); }

  bool operator==(const TimeGrid& other) const {
    return T_ == other.T_ && steps_ == other.steps_;
  }

 private:
  double T_;
  int steps_;
};

/// A matrix-valued function of time: either constant, or node samples on a
/// uniform grid over [0, T] joined by linear interpolation.  Evaluation at a
/// node returns the stored sample exactly.
class MatrixFunction {
 public:
  MatrixFunction() = default;
  MatrixFunction(Eigen::MatrixXd constant);  // NOLINT(runtime/explicit)

  static MatrixFunction Sampled(double T, std::vector<Eigen::MatrixXd> samples);

  bool is_constant() const { return samples_.empty(); }
  Eigen::Index rows() const;
  Eigen::Index cols() const;
  Eigen::MatrixXd at(double t) const;

  const Eigen::MatrixXd& constant() const { return constant_; }
  const std::vector<Eigen::MatrixXd>& samples() const { return samples_; }
  double sample_horizon() const { return T_; }

 private:
  Eigen::MatrixXd constant_;
  std::vector<Eigen::MatrixXd> samples_;
  double T_ = 0.0;
};

/// ẋ = A x + B u, z = C x + D u.
struct StateSpace {
  MatrixFunction A;
  MatrixFunction B;
  MatrixFunction C;
  MatrixFunction D;

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }
  int p() const { return static_cast<int>(C.rows()); }
  bool time_varying() const {
    return !A.is_constant() || !B.is_constant() || !C.is_constant() ||
           !D.is_constant();
  }
};

/// Running cost [x;u]ᵀ [Q N; Nᵀ R] [x;u].
struct CostData {
  Eigen::MatrixXd Q;
  Eigen::MatrixXd N;
  Eigen::MatrixXd R;
};

struct LqrProblem {
  CostData cost;
  Eigen::VectorXd x0;
};

struct StochLqrProblem {
  CostData cost;
  SymMat Xi;
  /// Process-noise intensity; constant or sampled.
  MatrixFunction W;
};

struct BoundedRealProblem {
  double gamma = 1.0;
};

struct PositiveRealProblem {};

struct GeneralIqcProblem {
  CostData cost;
  Eigen::VectorXd x0;
};

using ProblemVariant = std::variant<LqrProblem, StochLqrProblem,
                                    BoundedRealProblem, PositiveRealProblem,
                                    GeneralIqcProblem>;

std::string_view variant_name(const ProblemVariant& v);

struct ProblemSpec {
  StateSpace sys;
  TimeGrid grid{1.0, 512};
  ProblemVariant variant;
};

/// The (n+m)×(n+m) matrix 𝒬(t) of a problem.  Constant unless the system
/// data it depends on is sampled, in which case it is sampled on the same
/// nodes.
class QuadForm {
 public:
  QuadForm(int n, int m, MatrixFunction q);

  int n() const { return n_; }
  int m() const { return m_; }
  int nq() const { return n_ + m_; }
  bool is_constant() const { return q_.is_constant(); }

  SymMat at(double t) const;
  Eigen::MatrixXd Q(double t) const;
  Eigen::MatrixXd N(double t) const;
  Eigen::MatrixXd R(double t) const;

 private:
  int n_;
  int m_;
  MatrixFunction q_;
};

/// Checks dimensions, finiteness, horizon, R ≻ 0 (or the variant's
/// equivalent), and the variant's sign constraints.  Throws ValidationError
/// listing every violation.
void validate(const ProblemSpec& spec, double tol = kDefaultTol);

/// LQR / general IQC / stochastic LQR: [Q N; Nᵀ R].
/// Bounded-real: [−CᵀC 0; 0 γ²I].  Positive-real: ½[0 Cᵀ; C D+Dᵀ].
/// Throws kRNotPd if the input-weight block is not positive definite.
QuadForm assemble_quadform(const ProblemSpec& spec, double tol = kDefaultTol);

/// Constant [Q N; Nᵀ R]; throws kRNotPd / kDimensionMismatch.
QuadForm quadform_from_cost(const CostData& cost, double tol = kDefaultTol);

/// ℰ(S) = [I 0] S [I; 0], the top-left n×n block.
SymMat apply_E(const SymMat& s, int n);

/// 𝒜(S) = [A B] S [I; 0] + [I 0] S [Aᵀ; Bᵀ] at time t.
SymMat apply_Aop(const SymMat& s, const StateSpace& sys, double t);

/// ℰ*(Y) embeds Y in the top-left block of an (n+m)×(n+m) zero matrix.
SymMat apply_E_adj(const SymMat& y, int m);

/// 𝒜*(Y) = [Aᵀ; Bᵀ] Y [I 0] + [I; 0] Y [A B] at time t.
SymMat apply_A_adj(const SymMat& y, const StateSpace& sys, double t);

}  // namespace lqconic
